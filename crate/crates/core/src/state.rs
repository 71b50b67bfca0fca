//! Physical parameters, the cutoff profile and the state types shared by the
//! solver stages.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, NodeIndex, Result};
use crate::grid::{Field, Grid};
use crate::numerics::{diff2_column, diff_column, WallRule};
use crate::outflow::OutflowLevel;

/// Fluid constants of the γ-law magneto-micropolar model plus the
/// admissibility margin `delta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalParams {
    pub a: f64,
    pub gamma: f64,
    pub mu: f64,
    pub mu_prime: f64,
    pub zeta: f64,
    pub sigma: f64,
    pub delta: f64,
}

impl PhysicalParams {
    pub fn new(
        a: f64,
        gamma: f64,
        mu: f64,
        mu_prime: f64,
        zeta: f64,
        sigma: f64,
        delta: f64,
    ) -> Result<Self> {
        let p = PhysicalParams {
            a,
            gamma,
            mu,
            mu_prime,
            zeta,
            sigma,
            delta,
        };
        p.validate()?;
        Ok(p)
    }

    /// a=1, γ=2, μ=μ′=σ=1, ζ=0.1, δ=0.1.
    pub fn canonical() -> Self {
        PhysicalParams {
            a: 1.0,
            gamma: 2.0,
            mu: 1.0,
            mu_prime: 1.0,
            zeta: 0.1,
            sigma: 1.0,
            delta: 0.1,
        }
    }

    /// Returns the first violated constraint as `(key, message)`.
    pub fn violation(&self) -> Option<(&'static str, &'static str)> {
        let checks: [(&str, bool, &str); 7] = [
            ("a", self.a > 0.0, "a must be positive"),
            ("gamma", self.gamma > 1.0, "gamma must exceed 1"),
            ("mu", self.mu > 0.0, "mu must be positive"),
            ("mu_prime", self.mu_prime > 0.0, "mu_prime must be positive"),
            ("zeta", self.zeta >= 0.0, "zeta must be nonnegative"),
            ("sigma", self.sigma > 0.0, "sigma must be positive"),
            ("delta", self.delta > 0.0, "delta must be positive"),
        ];
        checks
            .into_iter()
            .find(|(_, ok, _)| !ok)
            .map(|(key, _, msg)| (key, msg))
    }

    pub fn validate(&self) -> Result<()> {
        match self.violation() {
            Some((_, msg)) => Err(Error::Config(msg.into())),
            None => Ok(()),
        }
    }
}

/// Blend on `s ∈ [0, 1]`: `s⁴(35 − 84s + 70s² − 20s³)`. Symmetric about
/// `s = 1/2`, monotone, and three times continuously differentiable at both
/// ends.
pub fn blend(s: f64) -> f64 {
    if s <= 0.0 {
        0.0
    } else if s >= 1.0 {
        1.0
    } else {
        let s4 = s * s * s * s;
        s4 * (35.0 + s * (-84.0 + s * (70.0 - 20.0 * s)))
    }
}

/// Cutoff value: 0 on `[0, 1]`, 1 on `[2, ∞)`.
pub fn cutoff_value(y: f64) -> f64 {
    blend(y - 1.0)
}

/// The cutoff profile on a y-grid together with its discrete first and second
/// derivatives (same stencils the solver applies to the unknowns).
#[derive(Debug, Clone)]
pub struct Cutoff {
    pub phi: Vec<f64>,
    pub dphi: Vec<f64>,
    pub d2phi: Vec<f64>,
}

impl Cutoff {
    pub fn new(grid: &Grid) -> Result<Self> {
        if grid.y_max() < 3.0 {
            return Err(Error::Config(format!(
                "y_max={} leaves no room for the cutoff (need y_max >= 3)",
                grid.y_max()
            )));
        }
        let y = grid.y_nodes();
        let phi: Vec<f64> = y.iter().map(|&v| cutoff_value(v)).collect();
        let mut dphi = vec![0.0; y.len()];
        let mut d2phi = vec![0.0; y.len()];
        diff_column(y, &phi, WallRule::OneSided, &mut dphi);
        diff2_column(y, &phi, WallRule::OneSided, &mut d2phi);
        Ok(Cutoff { phi, dphi, d2phi })
    }
}

pub fn make_cutoff(grid: &Arc<Grid>) -> Result<Field> {
    let c = Cutoff::new(grid)?;
    Ok(Field::from_values_unchecked(grid, c.phi.repeat(grid.nx())))
}

/// Homogenized unknowns `(u, w, q)` on the transformed grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformedState {
    pub u: Field,
    pub w: Field,
    pub q: Field,
    pub time: f64,
}

impl TransformedState {
    pub fn zeros(grid: &Arc<Grid>, time: f64) -> Self {
        TransformedState {
            u: Field::zeros(grid),
            w: Field::zeros(grid),
            q: Field::zeros(grid),
            time,
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.u.grid()
    }

    pub fn components(&self) -> [&Field; 3] {
        [&self.u, &self.w, &self.q]
    }

    pub fn components_mut(&mut self) -> [&mut Field; 3] {
        [&mut self.u, &mut self.w, &mut self.q]
    }

    /// `sqrt(‖u‖² + ‖w‖² + ‖q‖²)` in the discrete L² norm.
    pub fn l2_norm(&self) -> f64 {
        self.components()
            .iter()
            .map(|f| f.l2_norm().powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// `self + alpha * other`, componentwise.
    pub fn axpy(&self, alpha: f64, other: &TransformedState) -> TransformedState {
        TransformedState {
            u: self.u.zip_map(&other.u, |a, b| a + alpha * b),
            w: self.w.zip_map(&other.w, |a, b| a + alpha * b),
            q: self.q.zip_map(&other.q, |a, b| a + alpha * b),
            time: self.time,
        }
    }

    pub fn scaled(&self, alpha: f64) -> TransformedState {
        TransformedState {
            u: self.u.scaled(alpha),
            w: self.w.scaled(alpha),
            q: self.q.scaled(alpha),
            time: self.time,
        }
    }
}

/// Full unknowns `(u1, w1, q1)` with `q1 = h1²/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedState {
    pub u1: Field,
    pub w1: Field,
    pub q1: Field,
    pub time: f64,
}

/// Smallest distance to the admissibility band `δ ≤ q1 ≤ P − δ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandMargins {
    /// `min (q1 − δ)`.
    pub lower: f64,
    /// `min (P − δ − q1)`.
    pub upper: f64,
    pub lower_at: NodeIndex,
    pub upper_at: NodeIndex,
}

impl BandMargins {
    pub fn holds(&self) -> bool {
        self.lower >= 0.0 && self.upper >= 0.0
    }

    /// First violated side, if any, as a node and description.
    pub fn violation(&self) -> Option<(NodeIndex, String)> {
        if self.lower < 0.0 {
            Some((self.lower_at, format!("q1 - delta = {:e}", self.lower)))
        } else if self.upper < 0.0 {
            Some((self.upper_at, format!("P - delta - q1 = {:e}", self.upper)))
        } else {
            None
        }
    }
}

/// Band margins of `q1` against the per-column total pressure `p_total`,
/// with band width `delta`.
pub fn band_margins(q1: &Field, p_total: &[f64], delta: f64) -> BandMargins {
    let grid = q1.grid();
    let ny = grid.ny();
    let mut m = BandMargins {
        lower: f64::INFINITY,
        upper: f64::INFINITY,
        lower_at: NodeIndex { i: 0, j: 0 },
        upper_at: NodeIndex { i: 0, j: 0 },
    };
    for (k, &q) in q1.values().iter().enumerate() {
        let lo = q - delta;
        let hi = p_total[k / ny] - delta - q;
        if lo < m.lower {
            m.lower = lo;
            m.lower_at = grid.node(k);
        }
        if hi < m.upper {
            m.upper = hi;
            m.upper_at = grid.node(k);
        }
    }
    m
}

/// `u1 = u + Uφ`, `w1 = w + Iφ`, `q1 = q + (H²/2)φ`.
pub fn lift(state: &TransformedState, level: &OutflowLevel, cutoff: &Cutoff) -> LiftedState {
    let grid = state.grid();
    let ny = grid.ny();
    let build = |f: &Field, edge: &dyn Fn(usize) -> f64| {
        let values = f
            .values()
            .iter()
            .enumerate()
            .map(|(k, &v)| v + edge(k / ny) * cutoff.phi[k % ny])
            .collect();
        Field::from_values_unchecked(grid, values)
    };
    LiftedState {
        u1: build(&state.u, &|i| level.u[i]),
        w1: build(&state.w, &|i| level.i[i]),
        q1: build(&state.q, &|i| 0.5 * level.h[i] * level.h[i]),
        time: state.time,
    }
}

/// Inverse of [`lift`].
pub fn unlift(lifted: &LiftedState, level: &OutflowLevel, cutoff: &Cutoff) -> TransformedState {
    let grid = lifted.u1.grid();
    let ny = grid.ny();
    let build = |f: &Field, edge: &dyn Fn(usize) -> f64| {
        let values = f
            .values()
            .iter()
            .enumerate()
            .map(|(k, &v)| v - edge(k / ny) * cutoff.phi[k % ny])
            .collect();
        Field::from_values_unchecked(grid, values)
    };
    TransformedState {
        u: build(&lifted.u1, &|i| level.u[i]),
        w: build(&lifted.w1, &|i| level.i[i]),
        q: build(&lifted.q1, &|i| 0.5 * level.h[i] * level.h[i]),
        time: lifted.time,
    }
}

/// `p = P − q1` and `ρ = (p/a)^{1/γ}` per node; `p_total` is per x column.
pub fn density_pressure(
    q1: &Field,
    p_total: &[f64],
    params: &PhysicalParams,
) -> Result<(Field, Field)> {
    let grid = q1.grid();
    let ny = grid.ny();
    let mut rho = Vec::with_capacity(grid.len());
    let mut p = Vec::with_capacity(grid.len());
    for (k, &q) in q1.values().iter().enumerate() {
        let pk = p_total[k / ny] - q;
        if !(pk > 0.0) {
            return Err(Error::Admissibility {
                location: Some(grid.node(k)),
                detail: format!("pressure p = P - q1 = {pk:e} is not positive"),
            });
        }
        p.push(pk);
        rho.push(((pk / params.a).ln() / params.gamma).exp());
    }
    Ok((
        Field::from_values_unchecked(grid, rho),
        Field::from_values_unchecked(grid, p),
    ))
}

/// Primary and reconstructed fields in physical `(t, x, y)` coordinates.
#[derive(Debug, Clone)]
pub struct PhysicalState {
    pub time: f64,
    pub u1: Field,
    pub u2: Field,
    pub w1: Field,
    pub h1: Field,
    pub h2: Field,
    pub psi: Field,
    pub rho: Field,
    pub p: Field,
}

impl PhysicalState {
    pub fn grid(&self) -> &Arc<Grid> {
        self.u1.grid()
    }

    /// `q = h1²/2`.
    pub fn q(&self) -> Field {
        self.h1.map(|h| 0.5 * h * h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::outflow::OutflowLevel;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn grid() -> Arc<Grid> {
        Arc::new(Grid::uniform_2pi(8, 41, 4.0).unwrap())
    }

    #[test]
    fn cutoff_plateaus_and_midpoint() {
        assert_eq!(cutoff_value(0.5), 0.0);
        assert_eq!(cutoff_value(1.0), 0.0);
        assert_eq!(cutoff_value(2.0), 1.0);
        assert_eq!(cutoff_value(3.0), 1.0);
        assert_abs_diff_eq!(cutoff_value(1.5), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn cutoff_blend_is_monotone_and_smooth() {
        let h = 1e-4;
        let mut prev = 0.0;
        for k in 0..=10_000 {
            let s = k as f64 * 1e-4;
            let v = blend(s);
            assert!(v >= prev);
            prev = v;
        }
        // one-sided derivatives up to third order vanish at both ends
        for end in [0.0, 1.0] {
            let d1 = (blend(end + h) - blend(end - h)) / (2.0 * h);
            let d2 = (blend(end + h) - 2.0 * blend(end) + blend(end - h)) / (h * h);
            assert!(d1.abs() < 1e-9, "d1 at {end}: {d1}");
            assert!(d2.abs() < 1e-4, "d2 at {end}: {d2}");
        }
    }

    #[test]
    fn cutoff_requires_room() {
        let g = Grid::uniform_2pi(8, 20, 2.5).unwrap();
        assert!(matches!(Cutoff::new(&g), Err(Error::Config(_))));
        let f = make_cutoff(&grid()).unwrap();
        assert!(f.max_abs() <= 1.0);
    }

    #[test]
    fn lift_examples() {
        let g = Arc::new(Grid::uniform_2pi(8, 9, 4.0).unwrap());
        let c = Cutoff::new(&g).unwrap();
        let level = OutflowLevel::constant(8, 0.0, 1.0, 1.0, 1.0, 2.0);
        let mut s = TransformedState::zeros(&g, 0.0);
        s.w = Field::constant(&g, 0.2);
        s.q = Field::constant(&g, 0.1);
        let l = lift(&s, &level, &c);
        // y nodes are 0, 0.5, 1, 1.5, ...
        assert_eq!(l.u1.get(3, 6), 1.0);
        assert_eq!(l.w1.get(3, 1), 0.2);
        assert_abs_diff_eq!(l.q1.get(3, 3), 0.35, epsilon = 1e-15);
        let back = unlift(&l, &level, &c);
        assert_abs_diff_eq!(back.q.get(2, 3), 0.1, epsilon = 1e-15);
    }

    #[test]
    fn density_pressure_examples() {
        let g = grid();
        let params = PhysicalParams::canonical();
        let (rho, p) =
            density_pressure(&Field::constant(&g, 0.0), &vec![1.0; 8], &params).unwrap();
        assert_eq!(rho.get(0, 0), 1.0);
        assert_eq!(p.get(0, 0), 1.0);
        let (rho, p) =
            density_pressure(&Field::constant(&g, 1.5), &vec![2.0; 8], &params).unwrap();
        assert_abs_diff_eq!(p.get(1, 1), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(rho.get(1, 1), 0.5f64.sqrt(), epsilon = 1e-15);
        let err = density_pressure(&Field::constant(&g, 1.0), &vec![1.0; 8], &params);
        assert!(matches!(err, Err(Error::Admissibility { .. })));
    }

    #[test]
    fn params_reject_bad_gamma() {
        let err = PhysicalParams::new(1.0, 0.5, 1.0, 1.0, 0.1, 1.0, 0.1).unwrap_err();
        assert!(err.to_string().contains("gamma must exceed 1"));
    }

    #[test]
    fn band_margins_locate_touching_node() {
        let g = grid();
        let mut q1 = Field::constant(&g, 1.0);
        q1.set(3, 7, 0.1);
        let m = band_margins(&q1, &vec![2.0; 8], 0.1);
        assert_eq!(m.lower, 0.0);
        assert_eq!(m.lower_at, NodeIndex { i: 3, j: 7 });
        assert_abs_diff_eq!(m.upper, 0.9, epsilon = 1e-15);
        assert!(m.holds());
    }

    proptest! {
        #[test]
        fn density_pressure_recovers_total_pressure(
            a in 0.2f64..3.0, gamma in 1.05f64..3.0, p in 0.5f64..4.0, frac in 0.05f64..0.95
        ) {
            let params = PhysicalParams::new(a, gamma, 1.0, 1.0, 0.0, 1.0, 0.01).unwrap();
            let g = grid();
            let q = frac * p;
            let (rho, _) = density_pressure(&Field::constant(&g, q), &vec![p; 8], &params).unwrap();
            let r = rho.get(0, 0);
            let back = a * r.powf(gamma) + q;
            prop_assert!(((back - p) / p).abs() <= 1e-12);
        }

        #[test]
        fn lift_scales_with_data(alpha in 0.1f64..3.0, u in -1.0f64..1.0, q in 0.0f64..1.0) {
            let g = grid();
            let c = Cutoff::new(&g).unwrap();
            let mut s = TransformedState::zeros(&g, 0.0);
            s.u = Field::from_fn(&g, |x, y| u * x.sin() * (-y).exp());
            s.w = Field::from_fn(&g, |x, _| u * x.cos());
            s.q = Field::constant(&g, q);
            let level = OutflowLevel::constant(8, 0.0, 0.7, -0.3, 1.2, 3.0);
            let base = lift(&s, &level, &c);
            // the q-lift is quadratic in H, so H scales with sqrt(alpha)
            let scaled_level = OutflowLevel::constant(8, 0.0, 0.7 * alpha, -0.3 * alpha, 1.2 * alpha.sqrt(), 3.0 * alpha);
            let scaled = lift(&s.scaled(alpha), &scaled_level, &c);
            for (a, b) in [(&base.u1, &scaled.u1), (&base.w1, &scaled.w1), (&base.q1, &scaled.q1)] {
                for (x, y) in a.values().iter().zip(b.values()) {
                    prop_assert!((alpha * x - y).abs() <= 1e-13 * (1.0 + y.abs()));
                }
            }
        }
    }
}
