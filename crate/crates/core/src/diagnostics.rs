//! Discrete Sobolev norms, the weighted energy, Gronwall envelopes, the
//! Sobolev-ratio check and residuals of the physical-variable equations.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::linear_step::FrozenCoefficients;
use crate::numerics::{
    apply_columns, diff2_y, diff_column_wide, diff_x, diff_y, inner, l2_norm, pairwise_sum, WallRule,
};
use crate::outflow::OutflowTrace;
use crate::picard::PicardRun;
use crate::state::{Cutoff, PhysicalParams};
use crate::transform::{psi_dx, time_derivative, PhysicalSeries};

/// All mixed differences `∂_x^a ∂_y^b f` with `a + b ≤ k`, in the order
/// `(0,0), (1,0), (0,1), (2,0), (1,1), (0,2), …`.
pub fn mixed_differences(grid: &Grid, f: &[f64], k: usize) -> Vec<Vec<f64>> {
    // y-derivatives of every x-derivative, built incrementally
    let mut by_x: Vec<Vec<f64>> = Vec::with_capacity(k + 1);
    by_x.push(f.to_vec());
    for a in 1..=k {
        by_x.push(diff_x(grid, &by_x[a - 1]));
    }
    let mut table: Vec<Vec<Vec<f64>>> = by_x.into_iter().map(|d| vec![d]).collect();
    for (a, col) in table.iter_mut().enumerate() {
        for b in 1..=(k - a) {
            let next = diff_y(grid, &col[b - 1], WallRule::OneSided);
            col.push(next);
        }
    }
    let mut out = Vec::new();
    for total in 0..=k {
        for a in (0..=total).rev() {
            out.push(table[a][total - a].clone());
        }
    }
    out
}

/// Discrete `Hᵏ` norm in `(x, y)`: square root of the summed squared `L²`
/// norms of all mixed differences of order at most `k`.
pub fn sobolev_norm_xy(f: &Field, k: usize) -> f64 {
    let grid = f.grid();
    let sq: Vec<f64> = mixed_differences(grid, f.values(), k)
        .iter()
        .map(|d| inner(grid, d, d))
        .collect();
    pairwise_sum(&sq).sqrt()
}

/// Space-time `𝓗ᵏ` norms of a series, one per level.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeNorm {
    pub values: Vec<f64>,
    /// Levels whose time differences used one-sided stencils.
    pub reduced_order: Vec<bool>,
}

/// `𝓗ᵏ` norm including time differences `∂_t^j`, `j ≤ k`, taken over stored
/// levels spaced by `dt`. Needs at least three levels when `k ≥ 1`.
pub fn discrete_sobolev_norm(series: &[&Field], dt: f64, k: usize) -> Result<SpaceTimeNorm> {
    let m = series.len();
    if m == 0 {
        return Ok(SpaceTimeNorm {
            values: Vec::new(),
            reduced_order: Vec::new(),
        });
    }
    let grid = Arc::clone(series[0].grid());
    let mut current: Vec<Vec<f64>> = series.iter().map(|f| f.values().to_vec()).collect();
    let mut acc: Vec<Vec<f64>> = vec![Vec::new(); m];
    let mut reduced = vec![false; m];
    for j in 0..=k {
        if j > 0 {
            if m < 3 {
                return Err(Error::Config(
                    "time differences need at least three stored levels".into(),
                ));
            }
            let refs: Vec<&[f64]> = current.iter().map(Vec::as_slice).collect();
            current = time_derivative(&refs, dt)?;
            // a j-th difference touches j levels at each end one-sidedly
            for (l, r) in reduced.iter_mut().enumerate() {
                if l < j || l + j >= m {
                    *r = true;
                }
            }
        }
        for (l, f) in current.iter().enumerate() {
            for d in mixed_differences(&grid, f, k - j) {
                acc[l].push(inner(&grid, &d, &d));
            }
        }
    }
    Ok(SpaceTimeNorm {
        values: acc.iter().map(|v| pairwise_sum(v).sqrt()).collect(),
        reduced_order: reduced,
    })
}

/// `Σ_{|α| ≤ k} ⟨∂^α v, S ∂^α v⟩` over `(x, y)` multi-indices.
pub fn energy(v: [&[f64]; 3], s: [&[f64]; 3], grid: &Grid, k: usize) -> f64 {
    let mut terms = Vec::new();
    for c in 0..3 {
        for d in mixed_differences(grid, v[c], k) {
            let sd: Vec<f64> = d.iter().zip(s[c]).map(|(x, w)| x * w).collect();
            terms.push(inner(grid, &d, &sd));
        }
    }
    pairwise_sum(&terms)
}

/// `E(t)` along a converged run, with `S` evaluated on the run itself.
pub fn energy_series(
    run: &PicardRun,
    trace: &OutflowTrace,
    cutoff: &Cutoff,
    params: &PhysicalParams,
    k: usize,
) -> Result<Vec<f64>> {
    run.solution
        .iter()
        .zip(&trace.levels)
        .map(|(v, level)| {
            let c = FrozenCoefficients::frozen(v, level, cutoff, params)?;
            Ok(energy(
                [v.u.values(), v.w.values(), v.q.values()],
                [&c.s[0], &c.s[1], &c.s[2]],
                v.grid(),
                k,
            ))
        })
        .collect()
}

/// Exponential envelope `E(t) ≤ E(0) e^{Ct}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    /// Smallest `C` making the envelope hold at every stored level.
    pub c: Option<f64>,
    /// `E(T)/E(0)`.
    pub growth: Option<f64>,
    pub pass: bool,
    /// Set when `E(0) = 0` but `E` later becomes positive, or fewer than
    /// four levels are available.
    pub undefined: bool,
}

pub fn gronwall_envelope(times: &[f64], e: &[f64], ceiling: f64) -> Envelope {
    let undefined = Envelope {
        c: None,
        growth: None,
        pass: false,
        undefined: true,
    };
    if e.len() < 4 || times.len() != e.len() {
        return undefined;
    }
    let e0 = e[0];
    if e0 == 0.0 {
        if e.iter().all(|&v| v == 0.0) {
            return Envelope {
                c: Some(0.0),
                growth: Some(1.0),
                pass: true,
                undefined: false,
            };
        }
        return undefined;
    }
    let t0 = times[0];
    let c = times
        .iter()
        .zip(e)
        .skip(1)
        .map(|(&t, &v)| (v / e0).ln() / (t - t0))
        .fold(f64::NEG_INFINITY, f64::max);
    let growth = e[e.len() - 1] / e0;
    Envelope {
        c: Some(c),
        growth: Some(growth),
        pass: c.is_finite() && growth <= ceiling,
        undefined: false,
    }
}

/// `‖f‖_∞ / (‖f‖ + ‖∂_x f‖ + ‖∂_y² f‖)`.
pub fn sobolev_ratio(f: &Field) -> Result<f64> {
    let grid = f.grid();
    let fx = diff_x(grid, f.values());
    let fyy = diff2_y(grid, f.values(), WallRule::OneSided);
    let den = f.l2_norm() + l2_norm(grid, &fx) + l2_norm(grid, &fyy);
    if !(den > 0.0) {
        return Err(Error::Undefined("Sobolev ratio of a zero field".into()));
    }
    Ok(f.max_abs() / den)
}

/// Seeded family of smooth fields: up to four x-modes with decaying
/// amplitudes times `Σ c_m yᵐ e^{−λy}` profiles.
pub fn smooth_family(grid: &Arc<Grid>, count: usize, seed: u64) -> Vec<Field> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let modes: Vec<(f64, f64, f64)> = (1..=4)
                .map(|k| {
                    let scale = 1.0 / (k * k) as f64;
                    (k as f64, scale * rng.random_range(-1.0..1.0), scale * rng.random_range(-1.0..1.0))
                })
                .collect();
            let mean = rng.random_range(-0.5..0.5);
            let poly: [f64; 3] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
            let lambda = rng.random_range(0.5..2.0);
            Field::from_fn(grid, |x, y| {
                let xs: f64 = mean
                    + modes
                        .iter()
                        .map(|&(k, a, b)| a * (k * x).sin() + b * (k * x).cos())
                        .sum::<f64>();
                let ys = (poly[0] + poly[1] * y + poly[2] * y * y) * (-lambda * y).exp();
                xs * ys
            })
        })
        .collect()
}

/// Largest Sobolev ratio over the seeded family on `grid`.
pub fn sobolev_family_max(grid: &Arc<Grid>, count: usize, seed: u64) -> Result<f64> {
    smooth_family(grid, count, seed)
        .iter()
        .map(sobolev_ratio)
        .try_fold(0.0_f64, |m, r| Ok(m.max(r?)))
}

/// L² residual norms of the five physical-variable equations at one level:
/// `u1` momentum, `w1`, `h1` induction, the compressibility relation for
/// `∂_x u1 + ∂_y u2`, and `∂_x h1 + ∂_y h2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualNorms {
    pub t: f64,
    pub eqs: [f64; 5],
    /// `∂_x h1 + ∂_y h2` with `h1` resampled directly from the solve and
    /// `h2` from ψ.
    pub mixed_divergence: f64,
}

impl ResidualNorms {
    pub fn max_eq(&self) -> f64 {
        self.eqs.iter().copied().fold(0.0, f64::max)
    }
}

/// Residuals at every level with a central time difference (all but the
/// first and last). Nodes on the wall and the top row are excluded.
pub fn original_system_residual(
    phys: &PhysicalSeries,
    trace: &OutflowTrace,
    params: &PhysicalParams,
) -> Result<Vec<ResidualNorms>> {
    let m = phys.states.len();
    if m < 3 {
        return Err(Error::Config("residuals need at least three levels".into()));
    }
    let dt = phys.dt;
    let grid = Arc::clone(phys.states[0].grid());
    let (nx, ny) = (grid.nx(), grid.ny());
    let dx = |f: &[f64]| diff_x(&grid, f);
    let dy = |f: &[f64]| apply_columns(&grid, f, |y, s, o| diff_column_wide(y, s, 1, o));
    let dyy = |f: &[f64]| apply_columns(&grid, f, |y, s, o| diff_column_wide(y, s, 2, o));
    let interior = |r: Vec<f64>| -> f64 {
        let masked: Vec<f64> = r
            .iter()
            .enumerate()
            .map(|(k, &v)| if k % ny == 0 || k % ny == ny - 1 { 0.0 } else { v })
            .collect();
        l2_norm(&grid, &masked)
    };
    let (g, a) = (params.gamma, params.a);
    let mut out = Vec::with_capacity(m - 2);
    for l in 1..m - 1 {
        let s = &phys.states[l];
        let (prev, next) = (&phys.states[l - 1], &phys.states[l + 1]);
        let dt_of = |f: fn(&crate::state::PhysicalState) -> &Field| -> Vec<f64> {
            f(next)
                .values()
                .iter()
                .zip(f(prev).values())
                .map(|(a, b)| (a - b) / (2.0 * dt))
                .collect()
        };
        let u1t = dt_of(|s| &s.u1);
        let w1t = dt_of(|s| &s.w1);
        let h1t = dt_of(|s| &s.h1);
        let (u1, u2, w1, h1, h2) = (
            s.u1.values(),
            s.u2.values(),
            s.w1.values(),
            s.h1.values(),
            s.h2.values(),
        );
        let (u1x, u1y, u1yy) = (dx(u1), dy(u1), dyy(u1));
        let (w1x, w1y, w1yy) = (dx(w1), dy(w1), dyy(w1));
        let (h1x, h1y, h1yy) = (dx(h1), dy(h1), dyy(h1));
        let u2y = dy(u2);
        let h2y = dy(h2);
        let level = &trace.levels[l];
        let mut r = [
            vec![0.0; nx * ny],
            vec![0.0; nx * ny],
            vec![0.0; nx * ny],
            vec![0.0; nx * ny],
        ];
        for k in 0..nx * ny {
            let i = k / ny;
            let (p, pt, px) = (level.p[i], level.p_t[i], level.p_x[i]);
            let q = 0.5 * h1[k] * h1[k];
            let pr = p - q;
            let acal = ((a / pr).ln() / g).exp();
            let qq = g * pr + h1[k] * h1[k];
            let hgrad_u = h1[k] * u1x[k] + h2[k] * u1y[k];
            let src = (pt + px * u1[k]) / qq;
            r[0][k] = u1t[k] + u1[k] * u1x[k] + u2[k] * u1y[k] + acal * px
                - acal * (h1[k] * h1x[k] + h2[k] * h1y[k])
                - params.mu * acal * u1yy[k];
            r[1][k] = w1t[k] + u1[k] * w1x[k] + u2[k] * w1y[k] + 2.0 * params.zeta * acal * u1y[k]
                - params.mu_prime * acal * w1yy[k];
            r[2][k] = h1t[k] + u1[k] * h1x[k] + u2[k] * h1y[k]
                - h1[k] * src
                - g * pr / qq * hgrad_u
                - params.sigma * g * pr / qq * h1yy[k];
            r[3][k] = u1x[k] + u2y[k] + src
                - (h1[k] * hgrad_u + params.sigma * h1[k] * h1yy[k]) / qq;
        }
        let div: Vec<f64> = h1x.iter().zip(&h2y).map(|(a, b)| a + b).collect();
        let hp = phys.h1_pulled[l].values();
        let mixed: Vec<f64> = dx(hp).iter().zip(&h2y).map(|(a, b)| a + b).collect();
        let [r0, r1, r2, r3] = r;
        out.push(ResidualNorms {
            t: s.time,
            eqs: [interior(r0), interior(r1), interior(r2), interior(r3), interior(div)],
            mixed_divergence: interior(mixed),
        });
    }
    Ok(out)
}

/// `∂_x h1 + ∂_y h2` for `h1 = ∂_y ψ`, `h2 = −∂_x ψ` from one discrete ψ,
/// as a max norm.
pub fn stream_divergence(psi: &Field) -> f64 {
    let grid = psi.grid();
    let h1 = crate::transform::psi_dy(psi);
    let h2: Vec<f64> = psi_dx(psi).iter().map(|v| -v).collect();
    diff_x(grid, &h1)
        .iter()
        .zip(apply_columns(grid, &h2, |y, s, o| diff_column_wide(y, s, 1, o)))
        .fold(0.0_f64, |m, (a, b)| m.max((a + b).abs()))
}
