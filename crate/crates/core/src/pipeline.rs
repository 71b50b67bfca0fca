//! Problem assembly from a configuration and the full run: outflow trace,
//! window ladder, Picard iteration, inverse transform and diagnostics.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::diagnostics::{
    energy_series, gronwall_envelope, original_system_residual, Envelope, ResidualNorms,
};
use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::io::config::Config;
use crate::outflow::{solve_bernoulli, step_count, OutflowLevel, OutflowTrace};
use crate::picard::{run_picard, IterationReport, PicardConfig, PicardRun};
use crate::state::{Cutoff, LiftedState, PhysicalParams};
use crate::transform::{to_physical, PhysicalSeries};

/// Everything the Picard iteration needs besides the trace.
#[derive(Debug, Clone)]
pub struct Problem {
    pub grid: Arc<Grid>,
    pub cutoff: Cutoff,
    pub params: PhysicalParams,
    pub config: Config,
}

impl Problem {
    pub fn new(config: &Config) -> Result<Self> {
        let g = &config.grid;
        let grid = Arc::new(Grid::uniform(g.nx, g.lx, g.ny, g.y_max)?);
        let cutoff = Cutoff::new(&grid)?;
        Ok(Problem {
            grid,
            cutoff,
            params: config.physics,
            config: config.clone(),
        })
    }

    /// Outflow trace on `[0, t_end]` with step `dt`.
    pub fn trace(&self, t_end: f64, dt: f64) -> Result<OutflowTrace> {
        let c = &self.config;
        let init = c.outflow.init(c.grid.nx, c.grid.lx);
        solve_bernoulli(
            &c.pressure_spec()?,
            &init,
            &self.params,
            c.grid.lx,
            t_end,
            dt,
            c.solver.bernoulli_options(),
        )
    }

    /// Initial layer profiles matched to the trace at `t = 0`.
    pub fn initial_data(&self, level: &OutflowLevel) -> LiftedState {
        initial_profiles(&self.grid, level, &self.config)
    }
}

pub fn initial_profiles(grid: &Arc<Grid>, level: &OutflowLevel, config: &Config) -> LiftedState {
    let ic = &config.initial;
    let nx = grid.nx();
    let ny = grid.ny();
    let mut u1 = Vec::with_capacity(nx * ny);
    let mut w1 = Vec::with_capacity(nx * ny);
    let mut q1 = Vec::with_capacity(nx * ny);
    for i in 0..nx {
        let x = grid.x(i);
        for &y in grid.y_nodes() {
            let layer = 1.0 - (-ic.layer_rate * y).exp();
            u1.push(level.u[i] * layer);
            w1.push(level.i[i] * layer + ic.w_bump * y * (-y).exp());
            q1.push(
                0.5 * level.h[i] * level.h[i]
                    + ic.q_bump * (-y * y).exp() * (1.0 + ic.q_mod * x.cos()),
            );
        }
    }
    LiftedState {
        u1: Field::from_values(grid, u1).expect("sized"),
        w1: Field::from_values(grid, w1).expect("sized"),
        q1: Field::from_values(grid, q1).expect("sized"),
        time: 0.0,
    }
}

/// Step for a window: the configured `dt` when it divides the window,
/// otherwise the largest step below it that does.
pub fn window_step(window: f64, dt: f64) -> (usize, f64) {
    match step_count(window, dt) {
        Ok(n) => (n, dt),
        Err(_) => {
            let n = (window / dt).ceil() as usize;
            (n, window / n as f64)
        }
    }
}

/// One rung of the window ladder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderRung {
    pub window: f64,
    pub dt: f64,
    /// Largest ratio over `n ≥ 2`; `None` when the iteration stopped first.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_ratio: Option<f64>,
    pub ratios: Vec<f64>,
    pub converged: bool,
    /// Error text when the rung failed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Ladder {
    pub rungs: Vec<LadderRung>,
    /// Index of the first rung meeting the target.
    pub accepted: Option<usize>,
}

impl Ladder {
    /// Max ratios along the ladder are below 1 and do not grow by more than
    /// `tol` as the window halves.
    pub fn monotone(&self, tol: f64) -> bool {
        let r: Vec<f64> = self.rungs.iter().filter_map(|r| r.max_ratio).collect();
        r.iter().all(|&x| x < 1.0) && r.windows(2).all(|w| w[1] <= w[0] + tol)
    }
}

fn picard_on_window(problem: &Problem, window: f64) -> Result<(OutflowTrace, PicardRun, f64)> {
    let (_, dt) = window_step(window, problem.config.solver.dt);
    let trace = problem.trace(window, dt)?;
    let init = problem.initial_data(&trace.levels[0]);
    let config = PicardConfig {
        t_window: window,
        dt,
        ..problem.config.solver.picard()
    };
    let run = run_picard(&config, &trace, &init, &problem.cutoff, &problem.params)?;
    Ok((trace, run, dt))
}

/// Halve the window from `t_window` until the max ratio over `n ≥ 2` meets
/// the target, or the floor is reached. The first four windows are always
/// measured so monotonicity along the ladder can be checked.
pub fn window_ladder(problem: &Problem) -> Ladder {
    let s = &problem.config.solver;
    let mut ladder = Ladder::default();
    let mut window = s.t_window;
    while window >= s.ladder_floor * (1.0 - 1e-12) {
        let rung = match picard_on_window(problem, window) {
            Ok((_, run, dt)) => LadderRung {
                window,
                dt,
                max_ratio: run.report.max_ratio_from(2),
                ratios: run.report.ratios(),
                converged: run.report.converged,
                failure: None,
            },
            Err(e) => LadderRung {
                window,
                dt: window_step(window, s.dt).1,
                max_ratio: match &e {
                    Error::Divergence { ratios } => ratios.iter().skip(1).copied().reduce(f64::max),
                    _ => None,
                },
                ratios: match &e {
                    Error::Divergence { ratios } => ratios.clone(),
                    _ => Vec::new(),
                },
                converged: false,
                failure: Some(e.to_string()),
            },
        };
        let meets = rung.failure.is_none()
            && rung.max_ratio.is_none_or(|r| r <= s.ladder_target);
        ladder.rungs.push(rung);
        if meets && ladder.accepted.is_none() {
            ladder.accepted = Some(ladder.rungs.len() - 1);
        }
        if ladder.accepted.is_some() && ladder.rungs.len() >= 4 {
            break;
        }
        window *= 0.5;
    }
    ladder
}

/// Everything produced by a full run on the configured window.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub trace: OutflowTrace,
    pub picard: PicardRun,
    pub physical: PhysicalSeries,
    pub residuals: Vec<ResidualNorms>,
    pub energy: Vec<f64>,
    pub envelope: Envelope,
    pub ladder: Option<Ladder>,
}

impl RunOutcome {
    pub fn report(&self) -> &IterationReport {
        &self.picard.report
    }
}

/// Trace, Picard iteration on `t_window`, inverse transform, residual oracle
/// and energy envelope. The ladder runs only when requested.
pub fn run(config: &Config, with_ladder: bool) -> Result<RunOutcome> {
    let problem = Problem::new(config)?;
    let (trace, picard, _) = picard_on_window(&problem, config.solver.t_window)?;
    let physical = to_physical(&picard.lifted, &trace, &problem.params, config.grid.ny_phys)?;
    let residuals = original_system_residual(&physical, &trace, &problem.params)?;
    let energy = energy_series(&picard, &trace, &problem.cutoff, &problem.params, config.solver.k_order)?;
    let times: Vec<f64> = picard.solution.iter().map(|s| s.time).collect();
    let envelope = gronwall_envelope(&times, &energy, config.solver.envelope_ceiling);
    let ladder = with_ladder.then(|| window_ladder(&problem));
    Ok(RunOutcome {
        trace,
        picard,
        physical,
        residuals,
        energy,
        envelope,
        ladder,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_step_keeps_divisors() {
        assert_eq!(window_step(0.5, 0.01), (50, 0.01));
        let (n, dt) = window_step(0.125, 0.01);
        assert_eq!(n, 13);
        assert!((dt * 13.0 - 0.125).abs() < 1e-15);
    }

    #[test]
    fn initial_profiles_meet_wall_conditions() {
        let cfg = Config::canonical();
        let p = Problem::new(&cfg).unwrap();
        let tr = p.trace(0.02, 0.01).unwrap();
        let init = p.initial_data(&tr.levels[0]);
        for i in 0..cfg.grid.nx {
            assert_eq!(init.u1.get(i, 0), 0.0);
            assert_eq!(init.w1.get(i, 0), 0.0);
        }
        let top = cfg.grid.ny - 1;
        assert!((init.q1.get(3, top) - 0.5).abs() < 1e-15);
    }
}
