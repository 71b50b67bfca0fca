use mmbl_core::diagnostics::{energy_series, mixed_differences, sobolev_norm_xy};
use mmbl_core::io::config::Config;
use mmbl_core::linear_step::FrozenCoefficients;
use mmbl_core::pipeline::{self, Problem};
use mmbl_core::Error;

fn short(window: f64) -> Config {
    let mut c = Config::canonical();
    c.solver.t_window = window;
    c
}

#[test]
fn steady_homogeneous_state_has_no_residual() {
    let mut c = short(0.05);
    c.outflow.u_amp = 0.0;
    c.initial.w_bump = 0.0;
    c.initial.q_bump = 0.0;
    let out = pipeline::run(&c, false).unwrap();
    assert!(out.report().converged);
    for r in &out.residuals {
        assert!(r.max_eq() <= 1e-10, "t={} residuals {:?}", r.t, r.eqs);
        assert!(r.mixed_divergence <= 1e-10);
    }
    let e0 = out.energy[0];
    assert!(out.energy.iter().all(|&e| (e - e0).abs() <= 1e-12 * e0), "{:?}", out.energy);
    assert!(out.envelope.c.unwrap().abs() <= 1e-10);
}

#[test]
fn far_field_height_does_not_change_the_layer() {
    let base = short(0.1);
    let mut tall = base.clone();
    tall.grid.y_max = 2.0 * base.grid.y_max;
    tall.grid.ny = 2 * (base.grid.ny - 1) + 1;
    let a = pipeline::run(&base, false).unwrap();
    let b = pipeline::run(&tall, false).unwrap();
    let (la, lb) = (a.picard.lifted.last().unwrap(), b.picard.lifted.last().unwrap());
    let rows = (base.grid.ny - 1) / 2;
    let mut diff = 0.0f64;
    for i in 0..base.grid.nx {
        for j in 0..=rows {
            for (fa, fb) in [(&la.u1, &lb.u1), (&la.w1, &lb.w1), (&la.q1, &lb.q1)] {
                diff = diff.max((fa.get(i, j) - fb.get(i, j)).abs());
            }
        }
    }
    assert!(diff <= 1e-10, "difference {diff}");
    let ga = a.envelope.growth.unwrap();
    let gb = b.envelope.growth.unwrap();
    assert!((ga - gb).abs() <= 1e-8 * ga);
}

#[test]
fn energy_matches_independent_reduction_and_is_coercive() {
    let c = short(0.1);
    let problem = Problem::new(&c).unwrap();
    let out = pipeline::run(&c, false).unwrap();
    let k = c.solver.k_order;
    let e = energy_series(&out.picard, &out.trace, &problem.cutoff, &problem.params, k).unwrap();
    assert_eq!(e, out.energy);
    let grid = &problem.grid;
    let (nx, ny) = (grid.nx(), grid.ny());
    let dy = grid.uniform_dy().unwrap();
    for ((v, level), &energy) in out.picard.solution.iter().zip(&out.trace.levels).zip(&e) {
        let frozen = FrozenCoefficients::frozen(v, level, &problem.cutoff, &problem.params).unwrap();
        let mut direct = 0.0;
        let mut h_sq = 0.0;
        for (comp, field) in [&v.u, &v.w, &v.q].into_iter().enumerate() {
            for d in mixed_differences(grid, field.values(), k) {
                for i in 0..nx {
                    for j in 0..ny {
                        let w = if j == 0 || j == ny - 1 { 0.5 * dy } else { dy };
                        let n = i * ny + j;
                        direct += frozen.s[comp][n] * d[n] * d[n] * w * grid.dx();
                    }
                }
            }
            h_sq += sobolev_norm_xy(field, k).powi(2);
        }
        assert!((direct - energy).abs() <= 1e-12 * energy.max(1e-300), "{direct} vs {energy}");
        assert!(energy >= frozen.min_s() * h_sq * (1.0 - 1e-12));
    }
}

#[test]
fn identical_configs_give_identical_results() {
    let c = short(0.05);
    let a = pipeline::run(&c, false).unwrap();
    let b = pipeline::run(&c, false).unwrap();
    assert_eq!(a.residuals, b.residuals);
    assert_eq!(a.energy, b.energy);
    assert_eq!(a.report().records.len(), b.report().records.len());
    for (x, y) in a.report().records.iter().zip(&b.report().records) {
        assert_eq!(x.norm.to_bits(), y.norm.to_bits());
    }
}

#[test]
fn inadmissible_initial_layer_is_rejected() {
    let mut c = short(0.05);
    c.initial.q_bump = -0.45;
    let err = pipeline::run(&c, false).unwrap_err();
    assert!(
        matches!(err, Error::Admissibility { .. } | Error::IterateAdmissibility { .. }),
        "{err}"
    );
}

#[test]
fn cosine_pressure_run_converges() {
    let mut c = short(0.1);
    c.pressure = Config::parse(
        "[physics]\na=1\ngamma=2\nmu=1\nmu_prime=1\nzeta=0.1\nsigma=1\ndelta=0.1\n\
         [pressure]\nkind=\"cosine\"\nbase=2.0\namplitude=0.05\n",
        "inline",
    )
    .unwrap()
    .pressure;
    let out = pipeline::run(&c, false).unwrap();
    assert!(out.report().converged);
    assert!(out.picard.bounds.holds());
    assert!(out.envelope.pass);
}
