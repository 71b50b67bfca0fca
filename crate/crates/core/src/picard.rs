//! Picard iteration over a time window: each iterate solves the linear
//! problem with coefficients frozen at the previous iterate.

use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, NodeIndex, Result};
use crate::grid::{Field, Grid};
use crate::linear_step::{pde_rate, FrozenCoefficients, StepOptions, Stepper, TimeScheme};
use crate::outflow::{step_count, OutflowTrace};
use crate::state::{band_margins, lift, unlift, Cutoff, LiftedState, PhysicalParams, TransformedState};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PicardConfig {
    pub t_window: f64,
    pub dt: f64,
    pub picard_tol: f64,
    pub max_iters: usize,
    /// Order J of the Taylor polynomial used as zeroth iterate (0..=2).
    pub taylor_order: usize,
    pub step: StepOptions,
}

impl Default for PicardConfig {
    fn default() -> Self {
        PicardConfig {
            t_window: 0.5,
            dt: 0.01,
            picard_tol: 1e-8,
            max_iters: 50,
            taylor_order: 1,
            step: StepOptions::default(),
        }
    }
}

/// Measurements of one Picard iteration `n` (`Vⁿ = vⁿ⁺¹ − vⁿ`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub n: usize,
    /// `sup_t ‖Vⁿ(t)‖_{L²}` over stored levels.
    pub norm: f64,
    /// `‖Vⁿ‖ / ‖Vⁿ⁻¹‖`, absent for `n = 0` or a zero denominator.
    pub ratio: Option<f64>,
    /// `min (q1 − δ)` of the new iterate.
    pub lower_margin: f64,
    /// `min (P − δ − q1)` of the new iterate.
    pub upper_margin: f64,
    #[serde(skip)]
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct IterationReport {
    pub records: Vec<IterationRecord>,
    pub converged: bool,
}

impl IterationReport {
    pub fn ratios(&self) -> Vec<f64> {
        self.records.iter().filter_map(|r| r.ratio).collect()
    }

    /// Largest ratio over `n ≥ from`, `None` if there is none.
    pub fn max_ratio_from(&self, from: usize) -> Option<f64> {
        self.records
            .iter()
            .filter(|r| r.n >= from)
            .filter_map(|r| r.ratio)
            .reduce(f64::max)
    }
}

/// Smallest band margins over a run and the first violation, if any.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundReport {
    pub lower: f64,
    pub upper: f64,
    /// `(level index, node)` of the first violation in time order.
    pub first_violation: Option<(usize, NodeIndex)>,
}

impl BoundReport {
    pub fn holds(&self) -> bool {
        self.first_violation.is_none()
    }
}

pub fn check_bounds(series: &[LiftedState], trace: &OutflowTrace, delta: f64) -> BoundReport {
    let mut rep = BoundReport {
        lower: f64::INFINITY,
        upper: f64::INFINITY,
        first_violation: None,
    };
    for (m, l) in series.iter().enumerate() {
        let b = band_margins(&l.q1, &trace.levels[m].p, delta);
        rep.lower = rep.lower.min(b.lower);
        rep.upper = rep.upper.min(b.upper);
        if rep.first_violation.is_none() {
            if let Some((node, _)) = b.violation() {
                rep.first_violation = Some((m, node));
            }
        }
    }
    rep
}

/// Taylor coefficients `v₀ʲ`, `j = 0..=order`, of the homogenized solution at
/// `t = 0`, from the lifted initial data.
pub fn compatibility_data(
    init: &LiftedState,
    trace: &OutflowTrace,
    cutoff: &Cutoff,
    params: &PhysicalParams,
    order: usize,
) -> Result<Vec<TransformedState>> {
    if order > 2 {
        return Err(Error::Unsupported(format!(
            "Taylor order {order}: compatibility data are available up to order 2"
        )));
    }
    let level0 = &trace.levels[0];
    let v0 = unlift(init, level0, cutoff);
    let mut out = vec![v0.clone()];
    if order == 0 {
        return Ok(out);
    }
    let c0 = FrozenCoefficients::frozen(&v0, level0, cutoff, params)?;
    let r0 = pde_rate(&v0, &c0)?;
    out.push(state_from(v0.grid(), r0.clone(), 0.0)?);
    if order == 2 {
        let level1 = trace
            .levels
            .get(1)
            .ok_or_else(|| Error::Config("second-order data need two trace levels".into()))?;
        let h = level1.t - level0.t;
        let v_h = v0.axpy(h, &out[1]);
        let c1 = FrozenCoefficients::frozen(&v_h, level1, cutoff, params)?;
        let r1 = pde_rate(&v_h, &c1)?;
        let d: [Vec<f64>; 3] =
            std::array::from_fn(|c| r1[c].iter().zip(&r0[c]).map(|(a, b)| (a - b) / h).collect());
        out.push(state_from(v0.grid(), d, 0.0)?);
    }
    Ok(out)
}

fn state_from(grid: &Arc<Grid>, v: [Vec<f64>; 3], time: f64) -> Result<TransformedState> {
    let [u, w, q] = v;
    Ok(TransformedState {
        u: Field::from_values(grid, u)?,
        w: Field::from_values(grid, w)?,
        q: Field::from_values(grid, q)?,
        time,
    })
}

/// `Σ_j tʲ/j! v₀ʲ`.
pub fn zeroth_iterate(data: &[TransformedState], t: f64) -> TransformedState {
    let mut out = data[0].clone();
    let mut coef = 1.0;
    for (j, d) in data.iter().enumerate().skip(1) {
        coef *= t / j as f64;
        out = out.axpy(coef, d);
    }
    out.time = t;
    out
}

/// Converged (or last) iterate over the window.
#[derive(Debug, Clone)]
pub struct PicardRun {
    pub solution: Vec<TransformedState>,
    pub lifted: Vec<LiftedState>,
    pub report: IterationReport,
    pub bounds: BoundReport,
    /// Smallest diagonal entry of `S` seen while freezing coefficients.
    pub min_s: f64,
}

fn sup_difference(a: &[TransformedState], b: &[TransformedState]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.axpy(-1.0, y).l2_norm())
        .fold(0.0, f64::max)
}

fn lift_series(
    series: &[TransformedState],
    trace: &OutflowTrace,
    cutoff: &Cutoff,
) -> Vec<LiftedState> {
    series
        .iter()
        .zip(&trace.levels)
        .map(|(v, l)| lift(v, l, cutoff))
        .collect()
}

fn admissibility_error(
    n: usize,
    series: &[LiftedState],
    trace: &OutflowTrace,
    report: &BoundReport,
) -> Option<Error> {
    let (m, node) = report.first_violation?;
    let grid = series[m].q1.grid();
    Some(Error::IterateAdmissibility {
        iteration: n,
        t: series[m].time,
        x: grid.x(node.i),
        y: grid.y(node.j),
        detail: format!(
            "q1 = {} against band [{}, P - delta] with P = {}",
            series[m].q1.get(node.i, node.j),
            report.lower.min(0.0),
            trace.levels[m].p[node.i]
        ),
    })
}

/// Run the iteration on the window `[0, t_window]` with the trace sampled at
/// the solver step.
pub fn run_picard(
    config: &PicardConfig,
    trace: &OutflowTrace,
    init: &LiftedState,
    cutoff: &Cutoff,
    params: &PhysicalParams,
) -> Result<PicardRun> {
    if !(config.picard_tol > 0.0) {
        return Err(Error::Config("picard_tol must be positive".into()));
    }
    let steps = step_count(config.t_window, config.dt)?;
    if (trace.dt - config.dt).abs() > 1e-12 * config.dt || trace.levels.len() < steps + 1 {
        return Err(Error::Config(format!(
            "trace (dt={}, {} levels) does not cover the window with dt={}",
            trace.dt,
            trace.levels.len(),
            config.dt
        )));
    }
    let data = compatibility_data(init, trace, cutoff, params, config.taylor_order)?;
    let times: Vec<f64> = (0..=steps).map(|m| trace.levels[m].t).collect();
    let mut prev: Vec<TransformedState> = times.iter().map(|&t| zeroth_iterate(&data, t)).collect();
    let prev_lifted = lift_series(&prev, trace, cutoff);
    let bounds0 = check_bounds(&prev_lifted, trace, params.delta);
    if let Some(e) = admissibility_error(0, &prev_lifted, trace, &bounds0) {
        return Err(e);
    }

    let mut report = IterationReport::default();
    let mut min_s = f64::INFINITY;
    let mut above_one = 0;
    let mut last = None;
    for n in 0..config.max_iters {
        let clock = Instant::now();
        let coeffs = prev
            .iter()
            .zip(&trace.levels)
            .map(|(v, l)| FrozenCoefficients::frozen(v, l, cutoff, params))
            .collect::<Result<Vec<_>>>()?;
        min_s = coeffs.iter().map(FrozenCoefficients::min_s).fold(min_s, f64::min);
        let mut stepper = Stepper::new(config.dt, config.step);
        let mut cur = Vec::with_capacity(steps + 1);
        cur.push(data[0].clone());
        for m in 0..steps {
            let next = match config.step.scheme {
                TimeScheme::ImexEuler => &coeffs[m],
                TimeScheme::Cnab2 => &coeffs[m + 1],
            };
            let mut v = stepper.advance(&cur[m], &coeffs[m], next, None)?;
            v.time = times[m + 1];
            cur.push(v);
        }
        let norm = sup_difference(&cur, &prev);
        let lifted = lift_series(&cur, trace, cutoff);
        let bounds = check_bounds(&lifted, trace, params.delta);
        if let Some(e) = admissibility_error(n + 1, &lifted, trace, &bounds) {
            return Err(e);
        }
        let ratio = report
            .records
            .last()
            .and_then(|r: &IterationRecord| (r.norm > 0.0).then(|| norm / r.norm));
        report.records.push(IterationRecord {
            n,
            norm,
            ratio,
            lower_margin: bounds.lower,
            upper_margin: bounds.upper,
            wall_seconds: clock.elapsed().as_secs_f64(),
        });
        prev = cur;
        last = Some((lifted, bounds));
        if norm <= config.picard_tol {
            report.converged = true;
            break;
        }
        above_one = match ratio {
            Some(r) if r >= 1.0 => above_one + 1,
            _ => 0,
        };
        if above_one >= 3 {
            return Err(Error::Divergence {
                ratios: report.ratios(),
            });
        }
    }
    let (lifted, bounds) = last.ok_or_else(|| Error::Config("picard_max_iters must be >= 1".into()))?;
    Ok(PicardRun {
        solution: prev,
        lifted,
        report,
        bounds,
        min_s,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::outflow::OutflowTrace;
    use approx::assert_abs_diff_eq;

    fn grid() -> Arc<Grid> {
        Arc::new(Grid::uniform_2pi(16, 41, 8.0).unwrap())
    }

    fn steady(grid: &Arc<Grid>, h: f64) -> LiftedState {
        LiftedState {
            u1: Field::zeros(grid),
            w1: Field::zeros(grid),
            q1: Field::constant(grid, 0.5 * h * h),
            time: 0.0,
        }
    }

    #[test]
    fn steady_state_is_a_fixed_point() {
        let g = grid();
        let params = PhysicalParams::canonical();
        let cutoff = Cutoff::new(&g).unwrap();
        let config = PicardConfig {
            t_window: 0.1,
            ..PicardConfig::default()
        };
        let trace = OutflowTrace::constant(16, g.lx(), 0.01, 10, 0.0, 0.0, 1.0, 2.0);
        let init = steady(&g, 1.0);
        let data = compatibility_data(&init, &trace, &cutoff, &params, 2).unwrap();
        assert!(data[1].l2_norm() <= 1e-13, "{}", data[1].l2_norm());
        assert!(data[2].l2_norm() <= 1e-11, "{}", data[2].l2_norm());
        let run = run_picard(&config, &trace, &init, &cutoff, &params).unwrap();
        assert!(run.report.converged);
        assert_eq!(run.report.records.len(), 1);
        assert!(run.report.records[0].norm <= 1e-12);
        let last = run.lifted.last().unwrap();
        assert!(last.q1.map(|q| q - 0.5).max_abs() <= 1e-12);
        assert!(run.bounds.holds());
    }

    #[test]
    fn zero_data_gives_zero_compatibility_terms() {
        let g = grid();
        let params = PhysicalParams::canonical();
        let cutoff = Cutoff::new(&g).unwrap();
        let trace = OutflowTrace::constant(16, g.lx(), 0.01, 4, 0.0, 0.0, 0.0, 2.0);
        // homogeneous part zero, q1 inside the band
        let init = steady(&g, 0.0);
        let mut init = init;
        init.q1 = Field::constant(&g, 0.0);
        let data = compatibility_data(&init, &trace, &cutoff, &params, 0).unwrap();
        assert_eq!(data[0].l2_norm(), 0.0);
        assert!(matches!(
            compatibility_data(&init, &trace, &cutoff, &params, 3),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn zeroth_iterate_is_the_taylor_polynomial() {
        let g = grid();
        let a = TransformedState {
            u: Field::constant(&g, 1.0),
            w: Field::constant(&g, 2.0),
            q: Field::constant(&g, 3.0),
            time: 0.0,
        };
        let b = a.scaled(0.5);
        let c = a.scaled(-2.0);
        let data = vec![a.clone(), b, c];
        assert_eq!(zeroth_iterate(&data[..1], 0.7), TransformedState { time: 0.7, ..a.clone() });
        assert_eq!(zeroth_iterate(&data[..2], 0.0).u, a.u);
        let v = zeroth_iterate(&data, 0.2);
        // 1 + 0.5·0.2 − 2·0.02
        assert_abs_diff_eq!(v.u.get(0, 0), 1.06, epsilon = 1e-15);
    }

    #[test]
    fn bounds_report_margins_and_location() {
        let g = grid();
        let trace = OutflowTrace::constant(16, g.lx(), 0.01, 1, 0.0, 0.0, 1.0, 1.0);
        let mut a = steady(&g, 1.0);
        let b = a.clone();
        let rep = check_bounds(&[a.clone(), b.clone()], &trace, 0.1);
        assert_abs_diff_eq!(rep.lower, 0.4, epsilon = 1e-15);
        assert_abs_diff_eq!(rep.upper, 0.4, epsilon = 1e-15);
        a.q1.set(4, 9, 0.1);
        let rep = check_bounds(&[b, a], &trace, 0.1);
        assert_eq!(rep.lower, 0.0);
        assert!(rep.holds());
    }
}
