//! One time step of the linear problem
//! `S ∂_t v + A ∂_x v + F (∂_y v + ∂_y L) − B ∂_y² v = g (+ forcing)`
//! with frozen coefficients.
//!
//! Diffusion is implicit; advection, the `F` term, the source and a small
//! fourth-difference x-dissipation are explicit. `S` and `B` are diagonal,
//! so the implicit part is one scalar tridiagonal solve per component and
//! x-column.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::coefficients::{advective_radius, assemble, CoefficientBundle};
use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::numerics::{diff_x, diff_y, fourth_difference_x, solve_tridiagonal, WallRule};
use crate::outflow::OutflowLevel;
use crate::state::{lift, Cutoff, PhysicalParams, TransformedState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimeScheme {
    /// Backward Euler diffusion, forward Euler for the rest.
    ImexEuler,
    /// Crank–Nicolson diffusion with second-order Adams–Bashforth for the rest.
    Cnab2,
}

impl TimeScheme {
    pub fn name(self) -> &'static str {
        match self {
            TimeScheme::ImexEuler => "imex-euler",
            TimeScheme::Cnab2 => "cnab2",
        }
    }

    pub fn order(self) -> u32 {
        match self {
            TimeScheme::ImexEuler => 1,
            TimeScheme::Cnab2 => 2,
        }
    }
}

/// Coefficients of the linear problem at one time level.
#[derive(Debug, Clone)]
pub struct FrozenCoefficients {
    grid: Arc<Grid>,
    pub s: [Vec<f64>; 3],
    /// Row-major entries.
    pub a: [Vec<f64>; 9],
    pub b: [Vec<f64>; 3],
    pub f: [Vec<f64>; 9],
    pub g: [Vec<f64>; 3],
    /// `∂_y` of the lift `(Uφ, Iφ, (H²/2)φ)`, multiplied by `F`.
    pub lift_dy: [Vec<f64>; 3],
    /// Spectral radius of `S⁻¹A` per node.
    pub radius: Vec<f64>,
}

/// Spectral radius of `S⁻¹A` for the coupling pattern of the system: the
/// `(u, q)` block plus the decoupled `w` diagonal.
fn block_radius(s: [f64; 3], a: &[f64; 9]) -> f64 {
    let m00 = a[0] / s[0];
    let m02 = a[2] / s[0];
    let m20 = a[6] / s[2];
    let m22 = a[8] / s[2];
    let half_tr = 0.5 * (m00 + m22);
    let det = m00 * m22 - m02 * m20;
    let disc = half_tr * half_tr - det;
    let block = if disc >= 0.0 {
        half_tr.abs() + disc.sqrt()
    } else {
        det.sqrt()
    };
    block.max((a[4] / s[1]).abs())
}

impl FrozenCoefficients {
    /// Assemble from a full state: lift `v` with the trace, evaluate the
    /// coefficients on the lifted state.
    pub fn frozen(
        v: &TransformedState,
        level: &OutflowLevel,
        cutoff: &Cutoff,
        params: &PhysicalParams,
    ) -> Result<Self> {
        let lifted = lift(v, level, cutoff);
        let bundle = assemble(&lifted, level, cutoff, params)?;
        Ok(Self::from_bundle(&bundle, lifted.u1.values(), level, cutoff, params))
    }

    pub fn from_bundle(
        bundle: &CoefficientBundle,
        u1: &[f64],
        level: &OutflowLevel,
        cutoff: &Cutoff,
        params: &PhysicalParams,
    ) -> Self {
        let grid = bundle.grid();
        let ny = grid.ny();
        let n = grid.len();
        let mut lift_dy: [Vec<f64>; 3] = std::array::from_fn(|_| vec![0.0; n]);
        for k in 0..n {
            let (i, j) = (k / ny, k % ny);
            lift_dy[0][k] = level.u[i] * cutoff.dphi[j];
            lift_dy[1][k] = level.i[i] * cutoff.dphi[j];
            lift_dy[2][k] = level.k(i) * cutoff.dphi[j];
        }
        let radius = (0..n)
            .map(|k| advective_radius(&bundle.node(k), u1[k], params.gamma))
            .collect();
        FrozenCoefficients {
            grid: Arc::clone(grid),
            s: bundle.s.clone(),
            a: bundle.a.clone(),
            b: bundle.b.clone(),
            f: bundle.f.clone(),
            g: bundle.g.clone(),
            lift_dy,
            radius,
        }
    }

    /// Build from explicit arrays (manufactured-solution studies and tests).
    /// `S` and `B` must be positive.
    pub fn from_parts(
        grid: &Arc<Grid>,
        s: [Vec<f64>; 3],
        a: [Vec<f64>; 9],
        b: [Vec<f64>; 3],
        f: [Vec<f64>; 9],
        g: [Vec<f64>; 3],
        lift_dy: [Vec<f64>; 3],
    ) -> Result<Self> {
        let n = grid.len();
        let all = s
            .iter()
            .chain(a.iter())
            .chain(b.iter())
            .chain(f.iter())
            .chain(g.iter())
            .chain(lift_dy.iter());
        for v in all {
            if v.len() != n {
                return Err(Error::Internal("coefficient array length mismatch".into()));
            }
            if let Some(k) = v.iter().position(|x| !x.is_finite()) {
                return Err(Error::NonFinite(grid.node(k)));
            }
        }
        for (c, v) in s.iter().chain(b.iter()).enumerate() {
            if let Some(k) = v.iter().position(|x| !(*x > 0.0)) {
                return Err(Error::Admissibility {
                    location: Some(grid.node(k)),
                    detail: format!("diagonal coefficient {c} is not positive"),
                });
            }
        }
        let radius = (0..n)
            .map(|k| {
                let ak: [f64; 9] = std::array::from_fn(|e| a[e][k]);
                block_radius([s[0][k], s[1][k], s[2][k]], &ak)
            })
            .collect();
        Ok(FrozenCoefficients {
            grid: Arc::clone(grid),
            s,
            a,
            b,
            f,
            g,
            lift_dy,
            radius,
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn max_radius(&self) -> f64 {
        self.radius.iter().fold(0.0, |m, &r| m.max(r))
    }

    /// Smallest diagonal entry of `S` over the grid.
    pub fn min_s(&self) -> f64 {
        self.s
            .iter()
            .flat_map(|v| v.iter().copied())
            .fold(f64::INFINITY, f64::min)
    }
}

/// `cfl_safety · Δx / max ρ(S⁻¹A)`.
pub fn cfl_bound(coeffs: &FrozenCoefficients, cfl_safety: f64) -> f64 {
    cfl_safety * coeffs.grid.dx() / coeffs.max_radius().max(1e-300)
}

/// Options shared by every step of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOptions {
    pub scheme: TimeScheme,
    pub cfl_safety: f64,
    /// Coefficient of the fourth-difference x-dissipation.
    pub dissipation: f64,
}

impl Default for StepOptions {
    fn default() -> Self {
        StepOptions {
            scheme: TimeScheme::ImexEuler,
            cfl_safety: 0.4,
            dissipation: 0.0625,
        }
    }
}

const WALLS: [WallRule; 3] = [WallRule::OneSided, WallRule::OneSided, WallRule::Mirror];

/// `S⁻¹(g + forcing − A D_x v − F (D_y v + D_y L))`, optionally with the
/// x-dissipation, zero on Dirichlet rows.
pub fn explicit_rate(
    v: &TransformedState,
    c: &FrozenCoefficients,
    forcing: Option<&[Vec<f64>; 3]>,
    dissipation: f64,
) -> [Vec<f64>; 3] {
    let grid = v.grid();
    let ny = grid.ny();
    let n = grid.len();
    let comps = v.components();
    let dx: [Vec<f64>; 3] = std::array::from_fn(|d| diff_x(grid, comps[d].values()));
    let dy: [Vec<f64>; 3] = std::array::from_fn(|d| diff_y(grid, comps[d].values(), WALLS[d]));
    let mut out: [Vec<f64>; 3] = std::array::from_fn(|_| vec![0.0; n]);
    for (r, o) in out.iter_mut().enumerate() {
        for k in 0..n {
            let mut acc = c.g[r][k];
            if let Some(fc) = forcing {
                acc += fc[r][k];
            }
            for d in 0..3 {
                acc -= c.a[3 * r + d][k] * dx[d][k];
                acc -= c.f[3 * r + d][k] * (dy[d][k] + c.lift_dy[d][k]);
            }
            o[k] = acc / c.s[r][k];
        }
    }
    if dissipation > 0.0 {
        let inv_dx = 1.0 / grid.dx();
        for (d, o) in out.iter_mut().enumerate() {
            let d4 = fourth_difference_x(grid, comps[d].values());
            for k in 0..n {
                o[k] -= dissipation * c.radius[k] * inv_dx * d4[k];
            }
        }
    }
    for (d, o) in out.iter_mut().enumerate() {
        for i in 0..grid.nx() {
            if d < 2 {
                o[i * ny] = 0.0;
            }
            o[i * ny + ny - 1] = 0.0;
        }
    }
    out
}

/// `S⁻¹ B D_yy v` with the solver's boundary rows (zero on Dirichlet rows).
pub fn diffusion_rate(v: &TransformedState, c: &FrozenCoefficients) -> Result<[Vec<f64>; 3]> {
    let grid = v.grid();
    let dy = grid.require_uniform_dy()?;
    let ny = grid.ny();
    let inv = 1.0 / (dy * dy);
    let comps = v.components();
    let mut out: [Vec<f64>; 3] = std::array::from_fn(|_| vec![0.0; grid.len()]);
    for (d, o) in out.iter_mut().enumerate() {
        let f = comps[d].values();
        for i in 0..grid.nx() {
            let base = i * ny;
            for j in 1..ny - 1 {
                let k = base + j;
                o[k] = c.b[d][k] / c.s[d][k] * (f[k - 1] - 2.0 * f[k] + f[k + 1]) * inv;
            }
            if d == 2 {
                o[base] = c.b[d][base] / c.s[d][base] * 2.0 * (f[base + 1] - f[base]) * inv;
            }
        }
    }
    Ok(out)
}

/// Solve `(I − θ dt S⁻¹B D_yy) v = rhs` column by column.
fn implicit_solve(
    grid: &Arc<Grid>,
    c: &FrozenCoefficients,
    theta_dt: f64,
    mut rhs: [Vec<f64>; 3],
    time: f64,
) -> Result<TransformedState> {
    let dy = grid.require_uniform_dy()?;
    let ny = grid.ny();
    let inv = 1.0 / (dy * dy);
    let mut lower = vec![0.0; ny];
    let mut diag = vec![0.0; ny];
    let mut upper = vec![0.0; ny];
    let mut scratch = Vec::with_capacity(ny);
    for (d, r) in rhs.iter_mut().enumerate() {
        for i in 0..grid.nx() {
            let base = i * ny;
            for j in 1..ny - 1 {
                let k = base + j;
                let rj = theta_dt * c.b[d][k] / c.s[d][k] * inv;
                lower[j] = -rj;
                diag[j] = 1.0 + 2.0 * rj;
                upper[j] = -rj;
            }
            if d == 2 {
                let r0 = theta_dt * c.b[d][base] / c.s[d][base] * inv;
                diag[0] = 1.0 + 2.0 * r0;
                upper[0] = -2.0 * r0;
            } else {
                diag[0] = 1.0;
                upper[0] = 0.0;
                r[base] = 0.0;
            }
            lower[ny - 1] = 0.0;
            diag[ny - 1] = 1.0;
            r[base + ny - 1] = 0.0;
            solve_tridiagonal(&lower, &diag, &upper, &mut r[base..base + ny], &mut scratch)?;
        }
    }
    let [u, w, q] = rhs;
    Ok(TransformedState {
        u: Field::from_values(grid, u)?,
        w: Field::from_values(grid, w)?,
        q: Field::from_values(grid, q)?,
        time,
    })
}

fn check_cfl(c: &FrozenCoefficients, dt: f64, opts: &StepOptions) -> Result<()> {
    let dt_max = cfl_bound(c, opts.cfl_safety);
    if dt > dt_max {
        return Err(Error::Cfl { dt, dt_max });
    }
    Ok(())
}

/// One IMEX Euler step: `(I − dt S⁻¹B D_yy) v⁺ = v + dt E(v)` with every
/// coefficient taken from `coeffs`.
pub fn step(
    v: &TransformedState,
    coeffs: &FrozenCoefficients,
    dt: f64,
    forcing: Option<&[Vec<f64>; 3]>,
    opts: &StepOptions,
) -> Result<TransformedState> {
    check_cfl(coeffs, dt, opts)?;
    let e = explicit_rate(v, coeffs, forcing, opts.dissipation);
    let comps = v.components();
    let rhs: [Vec<f64>; 3] = std::array::from_fn(|d| {
        comps[d]
            .values()
            .iter()
            .zip(&e[d])
            .map(|(a, b)| a + dt * b)
            .collect()
    });
    implicit_solve(v.grid(), coeffs, dt, rhs, v.time + dt)
}

/// Multistep driver: IMEX Euler for the first step, then either IMEX Euler
/// or CNAB2 depending on the scheme.
#[derive(Debug, Clone)]
pub struct Stepper {
    opts: StepOptions,
    dt: f64,
    prev_explicit: Option<[Vec<f64>; 3]>,
}

impl Stepper {
    pub fn new(dt: f64, opts: StepOptions) -> Self {
        Stepper {
            opts,
            dt,
            prev_explicit: None,
        }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Advance from `v` (at coefficients `now`) to the next level (whose
    /// diffusion coefficients are `next`); `forcing` is evaluated at the
    /// current level.
    pub fn advance(
        &mut self,
        v: &TransformedState,
        now: &FrozenCoefficients,
        next: &FrozenCoefficients,
        forcing: Option<&[Vec<f64>; 3]>,
    ) -> Result<TransformedState> {
        let dt = self.dt;
        check_cfl(now, dt, &self.opts)?;
        let e = explicit_rate(v, now, forcing, self.opts.dissipation);
        let comps = v.components();
        let out = match (self.opts.scheme, &self.prev_explicit) {
            (TimeScheme::Cnab2, Some(prev)) => {
                let diff = diffusion_rate(v, now)?;
                let rhs: [Vec<f64>; 3] = std::array::from_fn(|d| {
                    (0..e[d].len())
                        .map(|k| {
                            comps[d].values()[k]
                                + 0.5 * dt * diff[d][k]
                                + dt * (1.5 * e[d][k] - 0.5 * prev[d][k])
                        })
                        .collect()
                });
                implicit_solve(v.grid(), next, 0.5 * dt, rhs, v.time + dt)?
            }
            _ => {
                let rhs: [Vec<f64>; 3] = std::array::from_fn(|d| {
                    comps[d]
                        .values()
                        .iter()
                        .zip(&e[d])
                        .map(|(a, b)| a + dt * b)
                        .collect()
                });
                implicit_solve(v.grid(), next, dt, rhs, v.time + dt)?
            }
        };
        self.prev_explicit = Some(e);
        Ok(out)
    }
}

/// Continuous-in-time right-hand side `S⁻¹(g − A D_x v − F(D_y v + D_y L) + B D_yy v)`
/// without artificial dissipation, zero on Dirichlet rows.
pub fn pde_rate(v: &TransformedState, c: &FrozenCoefficients) -> Result<[Vec<f64>; 3]> {
    let mut e = explicit_rate(v, c, None, 0.0);
    let diff = diffusion_rate(v, c)?;
    for d in 0..3 {
        for (a, b) in e[d].iter_mut().zip(&diff[d]) {
            *a += b;
        }
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn diagonal_coeffs(grid: &Arc<Grid>, s: f64, b: f64) -> FrozenCoefficients {
        let n = grid.len();
        let z = || vec![0.0; n];
        FrozenCoefficients::from_parts(
            grid,
            [vec![s; n], vec![s; n], vec![s; n]],
            std::array::from_fn(|_| z()),
            [vec![b; n], vec![b; n], vec![b; n]],
            std::array::from_fn(|_| z()),
            std::array::from_fn(|_| z()),
            std::array::from_fn(|_| z()),
        )
        .unwrap()
    }

    #[test]
    fn zero_state_stays_zero() {
        let grid = Arc::new(Grid::uniform_2pi(16, 33, 8.0).unwrap());
        let c = diagonal_coeffs(&grid, 1.0, 0.5);
        let v = TransformedState::zeros(&grid, 0.0);
        let out = step(&v, &c, 0.01, None, &StepOptions::default()).unwrap();
        assert_eq!(out.l2_norm(), 0.0);
    }

    #[test]
    fn heat_mode_decays_at_discrete_rate() {
        // exact discrete decay of the backward Euler step on sin(πy/Y)
        let y_max = 4.0;
        let ny = 41;
        let grid = Arc::new(Grid::uniform_2pi(8, ny, y_max).unwrap());
        let dy = grid.uniform_dy().unwrap();
        let b = 0.3;
        let c = diagonal_coeffs(&grid, 1.0, b);
        let mut v = TransformedState::zeros(&grid, 0.0);
        v.u = Field::from_fn(&grid, |_, y| (PI * y / y_max).sin());
        let dt = 0.01;
        let out = step(&v, &c, dt, None, &StepOptions::default()).unwrap();
        let lam = 4.0 / (dy * dy) * (PI * dy / (2.0 * y_max)).sin().powi(2);
        let factor = 1.0 / (1.0 + dt * b * lam);
        for j in 1..ny - 1 {
            assert_abs_diff_eq!(out.u.get(3, j), factor * v.u.get(3, j), epsilon = 1e-13);
        }
        // and the discrete rate approximates the continuous one
        let exact = (-(b * (PI / y_max).powi(2)) * dt).exp();
        assert!((factor - exact).abs() < 1e-5);
    }

    #[test]
    fn boundary_rows_are_enforced() {
        let grid = Arc::new(Grid::uniform_2pi(16, 33, 8.0).unwrap());
        let c = diagonal_coeffs(&grid, 1.0, 0.5);
        let mut v = TransformedState::zeros(&grid, 0.0);
        v.u = Field::from_fn(&grid, |x, y| x.sin() * y * (-y).exp());
        v.q = Field::from_fn(&grid, |x, y| x.cos() * (-y * y).exp());
        let out = step(&v, &c, 0.01, None, &StepOptions::default()).unwrap();
        for i in 0..16 {
            assert!(out.u.get(i, 0).abs() <= 1e-13);
            assert!(out.w.get(i, 0).abs() <= 1e-13);
            assert_eq!(out.q.get(i, 32), 0.0);
        }
    }

    #[test]
    fn cfl_violation_is_reported() {
        let grid = Arc::new(Grid::uniform_2pi(16, 17, 8.0).unwrap());
        let n = grid.len();
        let mut c = diagonal_coeffs(&grid, 1.0, 0.5);
        c.a[0] = vec![10.0; n];
        c.radius = vec![10.0; n];
        let v = TransformedState::zeros(&grid, 0.0);
        assert!(matches!(
            step(&v, &c, 0.1, None, &StepOptions::default()),
            Err(Error::Cfl { .. })
        ));
    }

    #[test]
    fn cfl_bound_scales_with_dx() {
        let g1 = Arc::new(Grid::uniform_2pi(32, 17, 8.0).unwrap());
        let g2 = Arc::new(Grid::uniform_2pi(16, 17, 8.0).unwrap());
        let mut c1 = diagonal_coeffs(&g1, 1.0, 1.0);
        c1.radius = vec![1.5; g1.len()];
        let b1 = cfl_bound(&c1, 0.4);
        let mut c2 = diagonal_coeffs(&g2, 1.0, 1.0);
        c2.radius = vec![1.5; g2.len()];
        assert_abs_diff_eq!(cfl_bound(&c2, 0.4), 2.0 * b1, epsilon = 1e-12);
    }

    #[test]
    fn block_radius_matches_closed_form() {
        let s = [0.2, 0.2, 0.5];
        let a = [0.2 * 0.3, 0.0, -0.25, 0.0, 0.2 * 0.3, 0.0, -0.25, 0.0, 0.5 * 0.3];
        // S⁻¹A (u,q) block: [[0.3, -1.25], [-0.5, 0.3]]
        let expected = 0.3 + (1.25f64 * 0.5).sqrt();
        assert_abs_diff_eq!(block_radius(s, &a), expected, epsilon = 1e-14);
    }
}
