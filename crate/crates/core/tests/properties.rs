use std::sync::Arc;

use mmbl_core::coefficients::{advective_radius, analytic_lower_bounds, node_coefficients};
use mmbl_core::diagnostics::{sobolev_norm_xy, sobolev_ratio};
use mmbl_core::outflow::OutflowLevel;
use mmbl_core::pipeline::window_step;
use mmbl_core::state::{lift, unlift, Cutoff};
use mmbl_core::studies::order_rows;
use mmbl_core::{Field, Grid, PhysicalParams, TransformedState};
use nalgebra::{Matrix3, SymmetricEigen};
use proptest::prelude::*;

fn params() -> impl Strategy<Value = PhysicalParams> {
    (
        0.2f64..5.0,
        1.05f64..3.0,
        0.05f64..5.0,
        0.05f64..5.0,
        0.0f64..2.0,
        0.05f64..5.0,
        0.01f64..0.3,
    )
        .prop_map(|(a, gamma, mu, mu_prime, zeta, sigma, delta)| PhysicalParams {
            a,
            gamma,
            mu,
            mu_prime,
            zeta,
            sigma,
            delta,
        })
}

/// Smooth field `(c0 + c1 sin(kx) + c2 cos x)(1 + b y) e^{−λy}`.
fn field(grid: &Arc<Grid>, c: [f64; 3], k: f64, b: f64, lambda: f64) -> Field {
    Field::from_fn(grid, |x, y| {
        (c[0] + c[1] * (k * x).sin() + c[2] * x.cos()) * (1.0 + b * y) * (-lambda * y).exp()
    })
}

fn small_grid() -> Arc<Grid> {
    Arc::new(Grid::uniform_2pi(16, 33, 8.0).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn symmetrizer_identities_hold(
        p in params(),
        frac in 0.0f64..=1.0,
        gap in 0.0f64..10.0,
        u1 in -3.0f64..3.0,
        dq1 in -3.0f64..3.0,
    ) {
        let d = p.delta;
        let total = 2.0 * d + gap;
        let q1 = d + frac * (total - 2.0 * d);
        let c = node_coefficients(u1, q1, dq1, total, &p).unwrap();
        let scale = c.a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..3 {
            for j in 0..3 {
                prop_assert_eq!(c.a[i][j], c.a[j][i]);
                prop_assert!((c.s[i] * c.a0[i][j] - c.a[i][j]).abs() <= 1e-12 * scale);
            }
            prop_assert!((c.s[i] * c.b0[i] - c.b[i]).abs() <= 1e-12 * c.b[i]);
        }
        let (s_lo, b_lo) = analytic_lower_bounds(&p);
        for i in 0..3 {
            prop_assert!(c.s[i] >= s_lo[i] * (1.0 - 1e-12));
            prop_assert!(c.b[i] >= b_lo[i] * (1.0 - 1e-12));
        }
    }

    #[test]
    fn closed_form_radius_matches_eigensolve(
        p in params(),
        frac in 0.0f64..=1.0,
        gap in 0.0f64..10.0,
        u1 in -3.0f64..3.0,
    ) {
        let total = 2.0 * p.delta + gap;
        let q1 = p.delta + frac * (total - 2.0 * p.delta);
        let c = node_coefficients(u1, q1, 0.0, total, &p).unwrap();
        // S^{-1/2} A S^{-1/2} is symmetric and similar to S^{-1}A
        let m = Matrix3::from_fn(|i, j| c.a[i][j] / (c.s[i] * c.s[j]).sqrt());
        let eig = SymmetricEigen::new(m).eigenvalues;
        let radius = eig.iter().fold(0.0f64, |r, l| r.max(l.abs()));
        let closed = advective_radius(&c, u1, p.gamma);
        prop_assert!((radius - closed).abs() <= 1e-10 * closed.max(1.0), "{} vs {}", radius, closed);
    }

    #[test]
    fn sobolev_norms_grow_with_order(
        c in prop::array::uniform3(-1.0f64..1.0),
        k in 1.0f64..4.0,
        b in -0.5f64..2.0,
        lambda in 0.5f64..2.0,
    ) {
        let g = small_grid();
        let f = field(&g, c, k.round(), b, lambda);
        let norms: Vec<f64> = (0..4).map(|k| sobolev_norm_xy(&f, k)).collect();
        for w in norms.windows(2) {
            prop_assert!(w[0] <= w[1]);
        }
    }

    #[test]
    fn sobolev_ratio_is_scale_invariant(
        c in prop::array::uniform3(0.1f64..1.0),
        lambda in 0.5f64..2.0,
        alpha in prop_oneof![-1e6f64..-1e-6, 1e-6f64..1e6],
    ) {
        let g = small_grid();
        let f = field(&g, c, 2.0, 0.3, lambda);
        let r = sobolev_ratio(&f).unwrap();
        let rs = sobolev_ratio(&f.scaled(alpha)).unwrap();
        prop_assert!((r - rs).abs() <= 1e-12 * r);
    }

    #[test]
    fn lift_and_unlift_are_inverse(
        u in -1.0f64..1.0,
        i in -1.0f64..1.0,
        h in 0.5f64..1.5,
        c in prop::array::uniform3(-0.2f64..0.2),
    ) {
        let g = small_grid();
        let cutoff = Cutoff::new(&g).unwrap();
        let level = OutflowLevel::constant(16, 0.0, u, i, h, 3.0);
        let v = TransformedState {
            u: field(&g, c, 1.0, 0.0, 1.0),
            w: field(&g, c, 2.0, 0.5, 1.5),
            q: field(&g, c, 3.0, -0.2, 0.7),
            time: 0.0,
        };
        let back = unlift(&lift(&v, &level, &cutoff), &level, &cutoff);
        prop_assert!(back.axpy(-1.0, &v).l2_norm() <= 1e-14);
    }

    #[test]
    fn window_step_divides_the_window(w in 1e-3f64..1.0, dt in 1e-3f64..0.05) {
        let (n, step) = window_step(w, dt);
        prop_assert!(step <= dt * (1.0 + 1e-12));
        prop_assert!((n as f64 * step - w).abs() <= 1e-9 * w.max(dt));
    }

    #[test]
    fn orders_recover_power_laws(p in 0.5f64..4.0, c in 1e-3f64..1e3) {
        let hs = [0.2, 0.1, 0.05, 0.025];
        let errs: Vec<f64> = hs.iter().map(|h: &f64| c * h.powf(p)).collect();
        for r in order_rows(&hs, &errs).iter().skip(1) {
            prop_assert!((r.order.unwrap() - p).abs() <= 1e-9);
        }
    }
}
