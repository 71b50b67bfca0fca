//! Refinement studies and randomized suites behind the verification
//! commands: manufactured solutions for the linear step, Bernoulli
//! translation, stream-map round trips, coefficient identities, residual
//! refinement of full runs and the Sobolev-ratio family.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::coefficients::{analytic_lower_bounds, node_coefficients, Mat3};
use crate::diagnostics::{sobolev_family_max, sobolev_ratio, smooth_family};
use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::io::certificate::Study;
use crate::io::config::Config;
use crate::io::snapshot::OrderRow;
use crate::linear_step::{
    diffusion_rate, explicit_rate, FrozenCoefficients, StepOptions, Stepper, TimeScheme,
};
use crate::outflow::{solve_bernoulli, BernoulliOptions, OutflowInit, PressureSpec};
use crate::pipeline;
use crate::state::{PhysicalParams, TransformedState};
use crate::transform::round_trip_error;

/// Order rows from `(h, error)` pairs, coarsest first.
pub fn order_rows(hs: &[f64], errors: &[f64]) -> Vec<OrderRow> {
    (0..hs.len())
        .map(|l| OrderRow {
            level: l,
            h: hs[l],
            error: errors[l],
            order: (l > 0).then(|| (errors[l - 1] / errors[l]).ln() / (hs[l - 1] / hs[l]).ln()),
        })
        .collect()
}

pub fn order_study(name: &str, hs: &[f64], errors: &[f64], required: Option<f64>) -> Study {
    let rows = order_rows(hs, errors);
    Study {
        name: name.to_string(),
        observed: rows.last().and_then(|r| r.order),
        rows,
        required,
    }
}

fn need_levels(levels: usize) -> Result<()> {
    if levels < 2 {
        return Err(Error::Config(format!(
            "a refinement study needs at least 2 levels, got {levels}"
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Coefficient identities

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvariantReport {
    pub samples: usize,
    /// Largest `|S·A0 − A|` entry relative to the largest `|A|` entry.
    pub max_sa0: f64,
    /// Same for `S·B0 − B`.
    pub max_sb0: f64,
    /// Largest `|A − Aᵀ|` entry.
    pub max_asym: f64,
    /// Smallest eigenvalue of `S` (resp. `B`) divided by its analytic lower
    /// bound; at least 1 when the bound holds.
    pub min_s_over_bound: f64,
    pub min_b_over_bound: f64,
    pub min_s: f64,
    pub min_b: f64,
}

fn sample_params(rng: &mut ChaCha8Rng) -> PhysicalParams {
    PhysicalParams {
        a: rng.random_range(0.2..5.0),
        gamma: rng.random_range(1.05..3.0),
        mu: rng.random_range(0.05..5.0),
        mu_prime: rng.random_range(0.05..5.0),
        zeta: rng.random_range(0.0..2.0),
        sigma: rng.random_range(0.05..5.0),
        delta: rng.random_range(0.01..0.3),
    }
}

fn max_abs(m: &Mat3) -> f64 {
    m.iter().flatten().fold(0.0, |a, v| a.max(v.abs()))
}

/// Random admissible states: parameters, a total pressure `P > 2δ`, `q1`
/// anywhere in the band `[δ, P − δ]`, arbitrary `u1` and `∂_y q1`.
pub fn invariant_suite(samples: usize, seed: u64) -> Result<InvariantReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut r = InvariantReport {
        samples,
        max_sa0: 0.0,
        max_sb0: 0.0,
        max_asym: 0.0,
        min_s_over_bound: f64::INFINITY,
        min_b_over_bound: f64::INFINITY,
        min_s: f64::INFINITY,
        min_b: f64::INFINITY,
    };
    for _ in 0..samples {
        let params = sample_params(&mut rng);
        let d = params.delta;
        let p = rng.random_range(2.0 * d..20.0);
        let q1 = rng.random_range(d..=p - d);
        let u1 = rng.random_range(-3.0..3.0);
        let dq1 = rng.random_range(-3.0..3.0);
        let c = node_coefficients(u1, q1, dq1, p, &params)?;
        let mut sa0 = [[0.0; 3]; 3];
        for (i, row) in sa0.iter_mut().enumerate() {
            for (j, e) in row.iter_mut().enumerate() {
                *e = c.s[i] * c.a0[i][j] - c.a[i][j];
            }
        }
        let scale_a = max_abs(&c.a).max(f64::MIN_POSITIVE);
        r.max_sa0 = r.max_sa0.max(max_abs(&sa0) / scale_a);
        let scale_b = c.b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for k in 0..3 {
            r.max_sb0 = r.max_sb0.max((c.s[k] * c.b0[k] - c.b[k]).abs() / scale_b);
            for j in 0..3 {
                r.max_asym = r.max_asym.max((c.a[k][j] - c.a[j][k]).abs());
            }
        }
        let (s_lo, b_lo) = analytic_lower_bounds(&params);
        for k in 0..3 {
            r.min_s = r.min_s.min(c.s[k]);
            r.min_b = r.min_b.min(c.b[k]);
            r.min_s_over_bound = r.min_s_over_bound.min(c.s[k] / s_lo[k]);
            r.min_b_over_bound = r.min_b_over_bound.min(c.b[k] / b_lo[k]);
        }
    }
    Ok(r)
}

// ---------------------------------------------------------------------------
// Bernoulli system

/// Largest deviation of `(U, I, H, P)` from constant admissible data over
/// `steps` steps.
pub fn bernoulli_constant(steps: usize) -> Result<f64> {
    let params = PhysicalParams::canonical();
    let nx = 32;
    let (u, i, h, p) = (0.3, -0.2, 1.1, 2.5);
    let init = OutflowInit {
        u: vec![u; nx],
        i: vec![i; nx],
        h: vec![h; nx],
    };
    let dt = 0.01;
    let trace = solve_bernoulli(
        &PressureSpec::Constant { value: p },
        &init,
        &params,
        2.0 * std::f64::consts::PI,
        steps as f64 * dt,
        dt,
        BernoulliOptions::default(),
    )?;
    let mut dev = 0.0f64;
    for l in &trace.levels {
        for n in 0..nx {
            dev = dev
                .max((l.u[n] - u).abs())
                .max((l.i[n] - i).abs())
                .max((l.h[n] - h).abs())
                .max((l.p[n] - p).abs());
        }
    }
    Ok(dev)
}

/// Constant `U`, `H`, `P` and `I(0, x) = 0.2 sin x`: `I` is translated
/// with speed `U`. Max error at `t = 1` on `nx = 32·2ˡ`, `dt = 1/nx`.
pub fn bernoulli_translation(levels: usize) -> Result<Study> {
    need_levels(levels)?;
    let params = PhysicalParams::canonical();
    let lx = 2.0 * std::f64::consts::PI;
    let (u0, t_end) = (0.5, 1.0);
    let mut hs = Vec::new();
    let mut errs = Vec::new();
    for l in 0..levels {
        let nx = 32 << l;
        let init = OutflowInit::harmonic(nx, lx, 1.0, (u0, 0.0), (0.0, 0.2), (1.0, 0.0));
        let dt = t_end / nx as f64;
        let trace = solve_bernoulli(
            &PressureSpec::Constant { value: 2.0 },
            &init,
            &params,
            lx,
            t_end,
            dt,
            BernoulliOptions::default(),
        )?;
        let last = trace.levels.last().expect("levels");
        let err = (0..nx)
            .map(|n| (last.i[n] - 0.2 * (trace.x(n) - u0 * t_end).sin()).abs())
            .fold(0.0, f64::max);
        hs.push(lx / nx as f64);
        errs.push(err);
    }
    Ok(order_study("bernoulli-translation", &hs, &errs, Some(1.8)))
}

// ---------------------------------------------------------------------------
// Stream map

fn round_trip_h1(grid: &Arc<Grid>) -> Field {
    Field::from_fn(grid, |x, y| 1.0 + 0.5 * (1.0 + 0.5 * x.cos()) * (-y).exp())
}

/// Forward-then-inverse stream map on `ny = 32·2ˡ + 1` rows of `[0, 8]`.
pub fn transform_round_trip(levels: usize, delta: f64) -> Result<Study> {
    need_levels(levels)?;
    let mut hs = Vec::new();
    let mut errs = Vec::new();
    for l in 0..levels {
        let grid = Arc::new(Grid::uniform_2pi(16, (32 << l) + 1, 8.0)?);
        errs.push(round_trip_error(&round_trip_h1(&grid), delta)?);
        hs.push(grid.uniform_dy().expect("uniform"));
    }
    Ok(order_study("transform-roundtrip", &hs, &errs, Some(2.0)))
}

/// Round-trip error for constant `h1`.
pub fn transform_round_trip_constant(delta: f64) -> Result<f64> {
    let grid = Arc::new(Grid::uniform_2pi(16, 65, 8.0)?);
    round_trip_error(&Field::constant(&grid, 1.3), delta)
}

// ---------------------------------------------------------------------------
// Manufactured solutions for the linear step

const MMS_Y_MAX: f64 = 20.0;

/// Profiles `p_u = y e^{−y} − y e^{−Y}` (zero at both ends) and
/// `p_q = e^{−y²/2}` (zero slope at the wall) with two derivatives.
fn profiles(y: f64) -> ([f64; 3], [f64; 3]) {
    let e = (-y).exp();
    let c = (-MMS_Y_MAX).exp();
    let g = (-0.5 * y * y).exp();
    (
        [y * e - y * c, (1.0 - y) * e - c, (y - 2.0) * e],
        [g, -y * g, (y * y - 1.0) * g],
    )
}

fn amplitude(t: f64) -> (f64, f64) {
    (1.0 + 0.5 * (2.0 * t).sin(), (2.0 * t).cos())
}

/// Exact solution and its derivatives `[v, ∂_t v, ∂_x v, ∂_y v, ∂_y² v]`
/// per component.
fn mms_exact(t: f64, x: f64, y: f64) -> [[f64; 5]; 3] {
    let (a, at) = amplitude(t);
    let (pu, pq) = profiles(y);
    let (s, c) = x.sin_cos();
    let xq = 0.5 + 0.3 * c;
    [
        [a * s * pu[0], at * s * pu[0], a * c * pu[0], a * s * pu[1], a * s * pu[2]],
        [
            0.5 * a * c * pu[0],
            0.5 * at * c * pu[0],
            -0.5 * a * s * pu[0],
            0.5 * a * c * pu[1],
            0.5 * a * c * pu[2],
        ],
        [a * xq * pq[0], at * xq * pq[0], -0.3 * a * s * pq[0], a * xq * pq[1], a * xq * pq[2]],
    ]
}

/// Smooth, time-independent coefficients: positive diagonal `S` and `B`,
/// symmetric `A` coupling `u` and `q`, and a lower-triangular `F`.
fn mms_coefficients(grid: &Arc<Grid>) -> Result<FrozenCoefficients> {
    let n = grid.len();
    let mut s: [Vec<f64>; 3] = std::array::from_fn(|_| vec![0.0; n]);
    let mut a: [Vec<f64>; 9] = std::array::from_fn(|_| vec![0.0; n]);
    let mut b: [Vec<f64>; 3] = std::array::from_fn(|_| vec![0.0; n]);
    let mut f: [Vec<f64>; 9] = std::array::from_fn(|_| vec![0.0; n]);
    for k in 0..n {
        let (i, j) = (k / grid.ny(), k % grid.ny());
        let (x, y) = (grid.x(i), grid.y(j));
        let e = (-y).exp();
        s[0][k] = 1.0 + 0.2 * x.sin() * e;
        s[1][k] = 1.2;
        s[2][k] = 0.8 + 0.1 * x.cos() * e;
        a[0][k] = 0.3 + 0.1 * x.cos();
        a[2][k] = -0.2;
        a[6][k] = -0.2;
        a[4][k] = 0.25;
        a[8][k] = 0.2 * x.sin();
        b[0][k] = 0.5 + 0.2 * e;
        b[1][k] = 0.4;
        b[2][k] = 0.6 + 0.1 * x.sin() * e;
        f[0][k] = 0.1 * e;
        f[3][k] = 0.2 * e;
        f[4][k] = 0.05;
        f[8][k] = -0.1 * e;
    }
    let zero = || std::array::from_fn(|_| vec![0.0; n]);
    FrozenCoefficients::from_parts(grid, s, a, b, f, zero(), zero())
}

fn exact_state(grid: &Arc<Grid>, t: f64) -> TransformedState {
    let comp = |d: usize| Field::from_fn(grid, |x, y| mms_exact(t, x, y)[d][0]);
    TransformedState {
        u: comp(0),
        w: comp(1),
        q: comp(2),
        time: t,
    }
}

/// `S ∂_t v + A ∂_x v + F ∂_y v − B ∂_y² v` evaluated analytically.
fn analytic_forcing(c: &FrozenCoefficients, grid: &Grid, t: f64) -> [Vec<f64>; 3] {
    let n = grid.len();
    let mut out: [Vec<f64>; 3] = std::array::from_fn(|_| vec![0.0; n]);
    for k in 0..n {
        let (i, j) = (k / grid.ny(), k % grid.ny());
        let ex = mms_exact(t, grid.x(i), grid.y(j));
        for (r, o) in out.iter_mut().enumerate() {
            let mut acc = c.s[r][k] * ex[r][1] - c.b[r][k] * ex[r][4];
            for d in 0..3 {
                acc += c.a[3 * r + d][k] * ex[d][2] + c.f[3 * r + d][k] * ex[d][3];
            }
            o[k] = acc;
        }
    }
    out
}

/// Forcing that makes the grid samples of the exact solution solve the
/// semi-discrete system exactly: `S(∂_t v − E(v) − D(v))`.
fn semi_discrete_forcing(
    c: &FrozenCoefficients,
    grid: &Arc<Grid>,
    t: f64,
    dissipation: f64,
) -> Result<[Vec<f64>; 3]> {
    let v = exact_state(grid, t);
    let e = explicit_rate(&v, c, None, dissipation);
    let diff = diffusion_rate(&v, c)?;
    let n = grid.len();
    let mut out: [Vec<f64>; 3] = std::array::from_fn(|_| vec![0.0; n]);
    for k in 0..n {
        let (i, j) = (k / grid.ny(), k % grid.ny());
        let ex = mms_exact(t, grid.x(i), grid.y(j));
        for r in 0..3 {
            out[r][k] = c.s[r][k] * (ex[r][1] - e[r][k] - diff[r][k]);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Forcing {
    Analytic,
    SemiDiscrete,
}

/// March the manufactured problem to `t_end` and return the discrete `L²`
/// error against the exact solution.
fn mms_error(
    nx: usize,
    ny: usize,
    dt: f64,
    t_end: f64,
    scheme: TimeScheme,
    forcing: Forcing,
) -> Result<f64> {
    let grid = Arc::new(Grid::uniform_2pi(nx, ny, MMS_Y_MAX)?);
    let c = mms_coefficients(&grid)?;
    let opts = StepOptions {
        scheme,
        ..StepOptions::default()
    };
    let steps = crate::outflow::step_count(t_end, dt)?;
    let mut stepper = Stepper::new(dt, opts);
    let mut v = exact_state(&grid, 0.0);
    for m in 0..steps {
        let t = m as f64 * dt;
        let f = match forcing {
            Forcing::Analytic => analytic_forcing(&c, &grid, t),
            Forcing::SemiDiscrete => semi_discrete_forcing(&c, &grid, t, opts.dissipation)?,
        };
        v = stepper.advance(&v, &c, &c, Some(&f))?;
    }
    let exact = exact_state(&grid, steps as f64 * dt);
    Ok(v.axpy(-1.0, &exact).l2_norm())
}

/// Spatial study with analytic forcing and CNAB2: `nx = 32·2ˡ`,
/// `ny = 64·2ˡ + 1`, `dt = 0.08/2ˡ` to `t = 0.4`.
pub fn mms_space(levels: usize) -> Result<Study> {
    need_levels(levels)?;
    let mut hs = Vec::new();
    let mut errs = Vec::new();
    for l in 0..levels {
        let (nx, ny) = (32 << l, (64 << l) + 1);
        errs.push(mms_error(nx, ny, 0.08 / (1 << l) as f64, 0.4, TimeScheme::Cnab2, Forcing::Analytic)?);
        hs.push(MMS_Y_MAX / (ny - 1) as f64);
    }
    Ok(order_study("mms-space", &hs, &errs, Some(1.8)))
}

/// Temporal study with semi-discrete forcing on a fixed `16 × 65` grid:
/// `dt = 0.1/2ˡ` to `t = 1`.
pub fn mms_time(scheme: TimeScheme, levels: usize) -> Result<Study> {
    need_levels(levels)?;
    let mut hs = Vec::new();
    let mut errs = Vec::new();
    for l in 0..levels {
        let dt = 0.1 / (1 << l) as f64;
        errs.push(mms_error(16, 65, dt, 1.0, scheme, Forcing::SemiDiscrete)?);
        hs.push(dt);
    }
    let required = match scheme {
        TimeScheme::ImexEuler => 0.9,
        TimeScheme::Cnab2 => 1.8,
    };
    Ok(order_study(&format!("mms-time-{}", scheme.name()), &hs, &errs, Some(required)))
}

// ---------------------------------------------------------------------------
// Residual refinement of full runs

/// Residual names in the order of [`crate::diagnostics::ResidualNorms::eqs`].
pub const RESIDUAL_NAMES: [&str; 5] = ["momentum", "microrotation", "induction", "compressibility", "divergence"];

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualStudy {
    /// One study per equation, then the mixed-route divergence.
    pub studies: Vec<Study>,
    /// Largest ψ-route divergence residual over all levels and times.
    pub max_stream_divergence: f64,
}

/// `(nx, ny, dt)` for level `l`: `(16·2ˡ, 64·2ˡ + 1, 0.02/2ˡ)`.
pub fn residual_levels(levels: usize) -> Vec<(usize, usize, f64)> {
    (0..levels)
        .map(|l| (16 << l, (64 << l) + 1, 0.02 / (1 << l) as f64))
        .collect()
}

/// Full runs of `base` on a short window at refined `(Δx, Δy, dt)`. The
/// error measure per equation is the RMS of the residual over the sample
/// times shared by every level, skipping the first interior step where the
/// initial layer is not yet resolved.
pub fn residual_refinement(base: &Config, levels: usize, t_window: f64) -> Result<ResidualStudy> {
    need_levels(levels)?;
    let spec = residual_levels(levels);
    let dt0 = spec[0].2;
    let n0 = crate::outflow::step_count(t_window, dt0)?;
    let samples: Vec<f64> = (2..n0).map(|k| k as f64 * dt0).collect();
    if samples.is_empty() {
        return Err(Error::Config(format!(
            "window {t_window} too short for a residual study at dt={dt0}"
        )));
    }
    let mut errs = vec![Vec::new(); 6];
    let mut hs = Vec::new();
    let mut max_div = 0.0f64;
    for &(nx, ny, dt) in &spec {
        let mut cfg = base.clone();
        cfg.grid.nx = nx;
        cfg.grid.ny = ny;
        cfg.grid.ny_phys = ny;
        cfg.solver.dt = dt;
        cfg.solver.t_window = t_window;
        let out = pipeline::run(&cfg, false)?;
        let mut acc = [0.0; 6];
        for &ts in &samples {
            let r = out
                .residuals
                .iter()
                .find(|r| (r.t - ts).abs() < 1e-9)
                .ok_or_else(|| Error::Internal(format!("no residual at t={ts}")))?;
            for e in 0..5 {
                acc[e] += r.eqs[e] * r.eqs[e];
            }
            acc[5] += r.mixed_divergence * r.mixed_divergence;
        }
        for r in &out.residuals {
            max_div = max_div.max(r.eqs[4]);
        }
        for (e, a) in acc.iter().enumerate() {
            errs[e].push((a / samples.len() as f64).sqrt());
        }
        hs.push(dt);
    }
    let mut studies: Vec<Study> = RESIDUAL_NAMES[..4]
        .iter()
        .enumerate()
        .map(|(e, name)| order_study(&format!("residual-{name}"), &hs, &errs[e], Some(0.9)))
        .collect();
    studies.push(order_study("residual-divergence", &hs, &errs[4], None));
    studies.push(order_study("residual-mixed-divergence", &hs, &errs[5], Some(1.8)));
    Ok(ResidualStudy {
        studies,
        max_stream_divergence: max_div,
    })
}

// ---------------------------------------------------------------------------
// Sobolev ratio

#[derive(Debug, Clone, PartialEq)]
pub struct SobolevStudy {
    /// Largest `|ratio(αf) − ratio(f)|` over the family and several `α`.
    pub scaling_error: f64,
    /// `(ny, max ratio)` per refinement level.
    pub maxima: Vec<(usize, f64)>,
}

impl SobolevStudy {
    /// Relative change of the family maximum between the two finest levels.
    pub fn refinement_change(&self) -> Option<f64> {
        let n = self.maxima.len();
        (n >= 2).then(|| (self.maxima[n - 1].1 - self.maxima[n - 2].1).abs() / self.maxima[n - 1].1)
    }
}

/// Family maxima on `nx = 32·2ˡ`, `ny = 64·2ˡ + 1` over `[0, 20]`.
pub fn sobolev_study(count: usize, seed: u64, levels: usize) -> Result<SobolevStudy> {
    need_levels(levels)?;
    let mut maxima = Vec::new();
    for l in 0..levels {
        let (nx, ny) = (32 << l, (64 << l) + 1);
        let grid = Arc::new(Grid::uniform_2pi(nx, ny, 20.0)?);
        maxima.push((ny, sobolev_family_max(&grid, count, seed)?));
    }
    let grid = Arc::new(Grid::uniform_2pi(32, 65, 20.0)?);
    let mut scaling_error = 0.0f64;
    for f in smooth_family(&grid, count, seed) {
        let r = sobolev_ratio(&f)?;
        for alpha in [-3.0, 1e-3, 7.5, 1e4] {
            scaling_error = scaling_error.max((sobolev_ratio(&f.scaled(alpha))? - r).abs());
        }
    }
    Ok(SobolevStudy {
        scaling_error,
        maxima,
    })
}
