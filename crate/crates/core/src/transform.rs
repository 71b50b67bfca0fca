//! Stream-function coordinate change between physical `(x, y)` and
//! transformed `(x, ȳ)` with `ȳ = ψ(t, x, y)`, `h1 = ∂_y ψ`, `h2 = −∂_x ψ`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::numerics::{
    apply_columns, cumulative_trapezoid, diff_column_wide, diff_x, diff_y, Hermite, WallRule,
};
use crate::outflow::OutflowTrace;
use crate::state::{density_pressure, LiftedState, PhysicalParams, PhysicalState};

/// Stream function on a physical grid.
#[derive(Debug, Clone)]
pub struct StreamFunction {
    pub psi: Field,
    /// True when every column is strictly increasing in y.
    pub monotone: bool,
}

fn check_lower_bound(h: &Field, delta: f64) -> Result<()> {
    for (k, &v) in h.values().iter().enumerate() {
        if !(v >= delta) {
            return Err(Error::Degenerate {
                location: h.grid().node(k),
                value: v,
                delta,
            });
        }
    }
    Ok(())
}

/// `ψ(x, y) = ∫₀^y h1(x, s) ds` by the composite trapezoid rule.
pub fn stream_forward(h1: &Field, delta: f64) -> Result<StreamFunction> {
    check_lower_bound(h1, delta)?;
    let grid = h1.grid();
    let ny = grid.ny();
    let mut values = Vec::with_capacity(grid.len());
    for i in 0..grid.nx() {
        values.extend(cumulative_trapezoid(grid.y_nodes(), h1.column(i)));
    }
    let monotone = values
        .chunks_exact(ny)
        .all(|c| c.windows(2).all(|w| w[1] > w[0]));
    Ok(StreamFunction {
        psi: Field::from_values(grid, values)?,
        monotone,
    })
}

/// Per-column inverse map built from `ĥ1` on the transformed grid:
/// `y(ȳ) = ∫₀^ȳ ds / ĥ1`, and the monotone interpolant `ψ(y)` through the
/// nodes `(y_k, ȳ_k)` with slopes `ĥ1_k`.
#[derive(Debug, Clone)]
pub struct InverseMap {
    columns: Vec<Hermite>,
}

impl InverseMap {
    pub fn psi(&self, i: usize, y: f64) -> f64 {
        self.columns[i].eval(y)
    }

    /// Physical height `y(ȳ_max)` of column `i`.
    pub fn y_top(&self, i: usize) -> f64 {
        self.columns[i].last()
    }

    /// Physical node heights of column `i`.
    pub fn y_nodes(&self, i: usize) -> &[f64] {
        self.columns[i].nodes()
    }

    pub fn min_y_top(&self) -> f64 {
        (0..self.columns.len())
            .map(|i| self.y_top(i))
            .fold(f64::INFINITY, f64::min)
    }
}

pub fn inverse_y_of_psi(h1_hat: &Field, delta: f64) -> Result<InverseMap> {
    check_lower_bound(h1_hat, delta)?;
    let grid = h1_hat.grid();
    let ybar = grid.y_nodes();
    let mut columns = Vec::with_capacity(grid.nx());
    for i in 0..grid.nx() {
        let h = h1_hat.column(i);
        let inv: Vec<f64> = h.iter().map(|v| 1.0 / v).collect();
        let y = cumulative_trapezoid(ybar, &inv);
        if y.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Internal(format!(
                "inverse stream map is not monotone in column {i}"
            )));
        }
        columns.push(Hermite::monotone(y, ybar.to_vec(), h.to_vec())?);
    }
    Ok(InverseMap { columns })
}

/// Resample physical fields onto the transformed grid `target`:
/// `f̂(x, ȳ) = f(x, y(ȳ))`, where `y(ȳ)` inverts the given stream function.
pub fn pushforward(
    fields: &[&Field],
    stream: &StreamFunction,
    target: &Arc<Grid>,
) -> Result<Vec<Field>> {
    let psi = &stream.psi;
    let grid = psi.grid();
    if target.nx() != grid.nx() {
        return Err(Error::Grid("pushforward needs matching x grids".into()));
    }
    let h1 = diff_y(grid, psi.values(), WallRule::OneSided);
    let ny = grid.ny();
    let mut out: Vec<Vec<f64>> = vec![Vec::with_capacity(target.len()); fields.len()];
    for i in 0..grid.nx() {
        let col = psi.column(i);
        let top = col[ny - 1];
        if target.y_max() > top * (1.0 + 1e-12) {
            return Err(Error::Range {
                column: i,
                target: target.y_max(),
                limit: top,
            });
        }
        let slopes: Vec<f64> = h1[i * ny..(i + 1) * ny].iter().map(|h| 1.0 / h).collect();
        let y_of = Hermite::monotone(col.to_vec(), grid.y_nodes().to_vec(), slopes)?;
        let ys: Vec<f64> = target.y_nodes().iter().map(|&yb| y_of.eval(yb)).collect();
        for (f, o) in fields.iter().zip(out.iter_mut()) {
            let interp = Hermite::from_data(grid.y_nodes().to_vec(), f.column(i).to_vec())?;
            o.extend(ys.iter().map(|&y| interp.eval(y)));
        }
    }
    out.into_iter().map(|v| Field::from_values(target, v)).collect()
}

/// Resample transformed fields onto the physical grid `target` with the
/// inverse map: `f(x, y) = f̂(x, ψ(y))`. Also returns `ψ` on `target`.
pub fn pullback(
    fields: &[&Field],
    map: &InverseMap,
    target: &Arc<Grid>,
) -> Result<(Vec<Field>, Field)> {
    let source = fields
        .first()
        .map(|f| Arc::clone(f.grid()))
        .ok_or_else(|| Error::Internal("pullback needs at least one field".into()))?;
    let mut psi = Vec::with_capacity(target.len());
    let mut out: Vec<Vec<f64>> = vec![Vec::with_capacity(target.len()); fields.len()];
    for i in 0..target.nx() {
        if target.y_max() > map.y_top(i) * (1.0 + 1e-12) {
            return Err(Error::Range {
                column: i,
                target: target.y_max(),
                limit: map.y_top(i),
            });
        }
        let ps: Vec<f64> = target.y_nodes().iter().map(|&y| map.psi(i, y)).collect();
        for (f, o) in fields.iter().zip(out.iter_mut()) {
            let interp = Hermite::from_data(source.y_nodes().to_vec(), f.column(i).to_vec())?;
            o.extend(ps.iter().map(|&yb| interp.eval(yb)));
        }
        psi.extend(ps);
    }
    let fields = out
        .into_iter()
        .map(|v| Field::from_values(target, v))
        .collect::<Result<Vec<_>>>()?;
    Ok((fields, Field::from_values(target, psi)?))
}

/// Split `ψ` into its x-mean profile (repeated per column) and the fluctuation.
fn split_mean(psi: &Field) -> (Vec<f64>, Vec<f64>) {
    let grid = psi.grid();
    let (nx, ny) = (grid.nx(), grid.ny());
    let mean: Vec<f64> = (0..ny)
        .map(|j| (0..nx).map(|i| psi.get(i, j)).sum::<f64>() / nx as f64)
        .collect();
    let fluct = psi
        .values()
        .iter()
        .enumerate()
        .map(|(k, v)| v - mean[k % ny])
        .collect();
    (mean.repeat(nx), fluct)
}

/// `∂_x ψ` computed on the fluctuation about the x-mean, so that column-constant
/// parts cancel exactly in mixed differences.
pub fn psi_dx(psi: &Field) -> Vec<f64> {
    let (_, fluct) = split_mean(psi);
    diff_x(psi.grid(), &fluct)
}

/// `∂_y ψ` split the same way as [`psi_dx`].
pub fn psi_dy(psi: &Field) -> Vec<f64> {
    let grid = psi.grid();
    let (mean, fluct) = split_mean(psi);
    let d = |f: &[f64]| apply_columns(grid, f, |y, s, o| diff_column_wide(y, s, 1, o));
    let (dm, df) = (d(&mean), d(&fluct));
    dm.iter().zip(&df).map(|(a, b)| a + b).collect()
}

/// Time derivative of a series of equally spaced fields: central inside,
/// second-order one-sided at both ends. Needs at least three levels.
pub fn time_derivative(series: &[&[f64]], dt: f64) -> Result<Vec<Vec<f64>>> {
    let m = series.len();
    if m < 3 {
        return Err(Error::Config(
            "time derivative needs at least three levels".into(),
        ));
    }
    let n = series[0].len();
    Ok((0..m)
        .map(|l| {
            (0..n)
                .map(|k| {
                    if l == 0 {
                        (-3.0 * series[0][k] + 4.0 * series[1][k] - series[2][k]) / (2.0 * dt)
                    } else if l == m - 1 {
                        (3.0 * series[l][k] - 4.0 * series[l - 1][k] + series[l - 2][k])
                            / (2.0 * dt)
                    } else {
                        (series[l + 1][k] - series[l - 1][k]) / (2.0 * dt)
                    }
                })
                .collect()
        })
        .collect())
}

/// `u2 = −(∂_tψ + u1 ∂_xψ − σ ∂_y²ψ)/h1` and `h2 = −∂_xψ` at one level.
pub fn recover_secondary(
    psi: &Field,
    psi_t: &[f64],
    u1: &Field,
    h1: &Field,
    params: &PhysicalParams,
) -> Result<(Field, Field)> {
    check_lower_bound(h1, params.delta)?;
    let grid = psi.grid();
    let px = psi_dx(psi);
    let pyy = apply_columns(grid, psi.values(), |y, s, o| diff_column_wide(y, s, 2, o));
    let u2: Vec<f64> = (0..grid.len())
        .map(|k| {
            -(psi_t[k] + u1.values()[k] * px[k] - params.sigma * pyy[k]) / h1.values()[k]
        })
        .collect();
    let h2: Vec<f64> = px.iter().map(|v| -v).collect();
    Ok((Field::from_values(grid, u2)?, Field::from_values(grid, h2)?))
}

/// Physical-coordinate series plus the directly pulled-back `h1`.
#[derive(Debug, Clone)]
pub struct PhysicalSeries {
    pub states: Vec<PhysicalState>,
    /// `ĥ1` resampled onto the physical grid (not differentiated from ψ).
    pub h1_pulled: Vec<Field>,
    pub dt: f64,
}

/// Uniform physical grid reaching the lowest column top over all levels.
pub fn physical_grid(maps: &[InverseMap], nx: usize, lx: f64, ny: usize) -> Result<Arc<Grid>> {
    let top = maps
        .iter()
        .map(InverseMap::min_y_top)
        .fold(f64::INFINITY, f64::min);
    Ok(Arc::new(Grid::uniform(nx, lx, ny, top)?))
}

/// Map a lifted transformed series (one entry per trace level) to physical
/// coordinates on a common uniform grid with `ny_phys` nodes.
pub fn to_physical(
    lifted: &[LiftedState],
    trace: &OutflowTrace,
    params: &PhysicalParams,
    ny_phys: usize,
) -> Result<PhysicalSeries> {
    if lifted.len() < 3 {
        return Err(Error::Config(
            "physical reconstruction needs at least three time levels".into(),
        ));
    }
    let tgrid = Arc::clone(lifted[0].q1.grid());
    let h_hat: Vec<Field> = lifted.iter().map(|l| l.q1.map(|q| (2.0 * q).sqrt())).collect();
    let maps = h_hat
        .iter()
        .map(|h| inverse_y_of_psi(h, params.delta))
        .collect::<Result<Vec<_>>>()?;
    let pgrid = physical_grid(&maps, tgrid.nx(), tgrid.lx(), ny_phys)?;

    let mut pulled = Vec::with_capacity(lifted.len());
    for ((l, map), h) in lifted.iter().zip(&maps).zip(&h_hat) {
        let (fields, psi) = pullback(&[&l.u1, &l.w1, h], map, &pgrid)?;
        pulled.push((fields, psi));
    }
    let psis: Vec<&[f64]> = pulled.iter().map(|(_, p)| p.values()).collect();
    let psi_t = time_derivative(&psis, trace.dt)?;

    let mut states = Vec::with_capacity(lifted.len());
    let mut h1_pulled = Vec::with_capacity(lifted.len());
    for (m, (fields, psi)) in pulled.into_iter().enumerate() {
        let h1 = Field::from_values(&pgrid, psi_dy(&psi))?;
        let (u2, h2) = recover_secondary(&psi, &psi_t[m], &fields[0], &h1, params)?;
        let q1 = h1.map(|h| 0.5 * h * h);
        let (rho, p) = density_pressure(&q1, &trace.levels[m].p, params)?;
        let mut it = fields.into_iter();
        let u1 = it.next().expect("three fields");
        let w1 = it.next().expect("three fields");
        h1_pulled.push(it.next().expect("three fields"));
        states.push(PhysicalState {
            time: lifted[m].time,
            u1,
            u2,
            w1,
            h1,
            h2,
            psi,
            rho,
            p,
        });
    }
    Ok(PhysicalSeries {
        states,
        h1_pulled,
        dt: trace.dt,
    })
}

/// Round trip of the stream map on the physical grid: forward ψ from `h1`,
/// push `h1` to a uniform transformed grid, rebuild the inverse map from the
/// pushed `ĥ1`, and return `max |y(ψ(y)) − y|` over physical nodes inside the
/// common range.
pub fn round_trip_error(h1: &Field, delta: f64) -> Result<f64> {
    let grid = h1.grid();
    let stream = stream_forward(h1, delta)?;
    let ny = grid.ny();
    let top = (0..grid.nx())
        .map(|i| stream.psi.get(i, ny - 1))
        .fold(f64::INFINITY, f64::min);
    let tgrid = Arc::new(Grid::uniform(grid.nx(), grid.lx(), ny, top)?);
    let pushed = pushforward(&[h1], &stream, &tgrid)?;
    let map = inverse_y_of_psi(&pushed[0], delta)?;
    let mut err = 0.0f64;
    for i in 0..grid.nx() {
        // y(ȳ) from the inverse map, evaluated at forward images of the physical nodes
        let y_of = Hermite::monotone(
            tgrid.y_nodes().to_vec(),
            map.y_nodes(i).to_vec(),
            pushed[0].column(i).iter().map(|h| 1.0 / h).collect(),
        )?;
        for (j, &y) in grid.y_nodes().iter().enumerate() {
            let psi = stream.psi.get(i, j);
            if psi > top {
                break;
            }
            err = err.max((y_of.eval(psi) - y).abs());
        }
    }
    Ok(err)
}
