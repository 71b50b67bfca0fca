//! Pointwise coefficients of the symmetrized system
//! `S ∂_t v1 + A ∂_x v1 + F ∂_y v1 − B ∂_y² v1 = r(v1)` in the unknowns
//! `v1 = (u1, w1, q1)`, and the source `g` seen by the homogenized unknown
//! `v = v1 − (Uφ, Iφ, (H²/2)φ)`.
//!
//! Throughout, `Π = (P − q1) q1`, `𝒜 = (a/(P − q1))^{1/γ}` and
//! `Q = γ(P − q1) + 2 q1`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::numerics::{diff_y, WallRule};
use crate::outflow::OutflowLevel;
use crate::state::{Cutoff, LiftedState, PhysicalParams};

pub type Mat3 = [[f64; 3]; 3];

/// `(𝒜, Q)` after checking `δ ≤ q1 ≤ P − δ`.
pub fn eval_acal_q(p: f64, q1: f64, params: &PhysicalParams) -> Result<(f64, f64)> {
    let d = params.delta;
    if !(q1 >= d && q1 <= p - d) {
        return Err(Error::Admissibility {
            location: None,
            detail: format!("q1={q1} outside [delta, P - delta] = [{d}, {}]", p - d),
        });
    }
    let pr = p - q1;
    let acal = ((params.a / pr).ln() / params.gamma).exp();
    Ok((acal, params.gamma * pr + 2.0 * q1))
}

/// All pointwise matrices at one node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeCoefficients {
    pub acal: f64,
    pub q_val: f64,
    /// `Π = (P − q1) q1`.
    pub pi: f64,
    /// Diagonal of `S`.
    pub s: [f64; 3],
    pub a0: Mat3,
    /// Diagonal of `B0`.
    pub b0: [f64; 3],
    pub a: Mat3,
    /// Diagonal of `B`.
    pub b: [f64; 3],
    pub f: Mat3,
}

/// Coefficients at a node with state `(u1, q1)`, total pressure `p` and
/// normal derivative `dq1 = ∂_y q1`.
pub fn node_coefficients(
    u1: f64,
    q1: f64,
    dq1: f64,
    p: f64,
    params: &PhysicalParams,
) -> Result<NodeCoefficients> {
    let (acal, q_val) = eval_acal_q(p, q1, params)?;
    let g = params.gamma;
    let pr = p - q1;
    let pi = pr * q1;
    let s1 = pi / acal;
    let s3 = q_val / (2.0 * g);
    let a0 = [
        [u1, 0.0, -acal],
        [0.0, u1, 0.0],
        [-2.0 * g * pi / q_val, 0.0, u1],
    ];
    let b0 = [
        2.0 * q1 * params.mu * acal,
        2.0 * q1 * params.mu_prime * acal,
        2.0 * q1 * params.sigma * g * pr / q_val,
    ];
    // built symmetric by construction, equal to S·A0
    let a = [
        [s1 * u1, 0.0, -pi],
        [0.0, s1 * u1, 0.0],
        [-pi, 0.0, s3 * u1],
    ];
    let b = [
        2.0 * params.mu * pi * q1,
        2.0 * params.mu_prime * pi * q1,
        params.sigma * pi,
    ];
    let sigma_over = params.sigma / acal;
    let f = [
        [(sigma_over - params.mu) * pi * dq1, 0.0, 0.0],
        [
            2.0 * params.zeta * pi * (2.0 * q1).sqrt(),
            (sigma_over - params.mu_prime) * pi * dq1,
            0.0,
        ],
        [0.0, 0.0, params.sigma * s3 * dq1],
    ];
    Ok(NodeCoefficients {
        acal,
        q_val,
        pi,
        s: [s1, s1, s3],
        a0,
        b0,
        a,
        b,
        f,
    })
}

/// Outflow data at one x column used by the source term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColumnTrace {
    pub u: f64,
    pub i: f64,
    pub h: f64,
    pub p: f64,
    pub p_t: f64,
    pub p_x: f64,
    pub u_t: f64,
    pub i_t: f64,
    pub h_t: f64,
    pub u_x: f64,
    pub i_x: f64,
    pub h_x: f64,
}

impl ColumnTrace {
    pub fn from_level(level: &OutflowLevel, i: usize) -> Self {
        ColumnTrace {
            u: level.u[i],
            i: level.i[i],
            h: level.h[i],
            p: level.p[i],
            p_t: level.p_t[i],
            p_x: level.p_x[i],
            u_t: level.u_t[i],
            i_t: level.i_t[i],
            h_t: level.h_t[i],
            u_x: level.u_x[i],
            i_x: level.i_x[i],
            h_x: level.h_x[i],
        }
    }
}

/// Source `g` of the homogenized system at one node: the pressure terms of
/// the full system plus everything the lift `(Uφ, Iφ, (H²/2)φ)` contributes
/// through `S ∂_t`, `A ∂_x` and `B ∂_y²`. The `F ∂_y` lift contribution is
/// applied by the solver alongside `F ∂_y v`.
pub fn source_g(
    c: &NodeCoefficients,
    u1: f64,
    q1: f64,
    phi: f64,
    d2phi: f64,
    tr: &ColumnTrace,
    params: &PhysicalParams,
) -> [f64; 3] {
    let pi = c.pi;
    let s = c.s[0];
    let s3 = c.s[2];
    let k = 0.5 * tr.h * tr.h;
    let g1 = -s * tr.u_t * phi - s * u1 * tr.u_x * phi + pi * tr.h * tr.h_x * phi - pi * tr.p_x
        + 2.0 * params.mu * pi * q1 * tr.u * d2phi;
    let g2 = -s * tr.i_t * phi - s * u1 * tr.i_x * phi
        + 2.0 * params.mu_prime * pi * q1 * tr.i * d2phi;
    let g3 = -s3 * tr.h * tr.h_t * phi + pi * tr.u_x * phi - s3 * u1 * tr.h * tr.h_x * phi
        + q1 * (tr.p_t + tr.p_x * u1) / params.gamma
        + params.sigma * pi * k * d2phi;
    [g1, g2, g3]
}

/// Structure-of-arrays coefficient storage over a grid.
#[derive(Debug, Clone)]
pub struct CoefficientBundle {
    grid: Arc<Grid>,
    pub acal: Vec<f64>,
    pub q_val: Vec<f64>,
    pub s: [Vec<f64>; 3],
    /// Row-major entries of `A0`.
    pub a0: [Vec<f64>; 9],
    pub b0: [Vec<f64>; 3],
    pub a: [Vec<f64>; 9],
    pub b: [Vec<f64>; 3],
    pub f: [Vec<f64>; 9],
    pub g: [Vec<f64>; 3],
}

fn vecs<const N: usize>(n: usize) -> [Vec<f64>; N] {
    std::array::from_fn(|_| vec![0.0; n])
}

impl CoefficientBundle {
    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn node(&self, k: usize) -> NodeCoefficients {
        let m = |v: &[Vec<f64>; 9]| -> Mat3 {
            std::array::from_fn(|r| std::array::from_fn(|c| v[3 * r + c][k]))
        };
        let s = [self.s[0][k], self.s[1][k], self.s[2][k]];
        NodeCoefficients {
            acal: self.acal[k],
            q_val: self.q_val[k],
            pi: s[0] * self.acal[k],
            s,
            a0: m(&self.a0),
            b0: [self.b0[0][k], self.b0[1][k], self.b0[2][k]],
            a: m(&self.a),
            b: [self.b[0][k], self.b[1][k], self.b[2][k]],
            f: m(&self.f),
        }
    }
}

/// Evaluate every coefficient on the lifted state at one time level.
pub fn assemble(
    lifted: &LiftedState,
    level: &OutflowLevel,
    cutoff: &Cutoff,
    params: &PhysicalParams,
) -> Result<CoefficientBundle> {
    let grid = lifted.q1.grid();
    let n = grid.len();
    let ny = grid.ny();
    let dq1 = diff_y(grid, lifted.q1.values(), WallRule::Mirror);
    let mut out = CoefficientBundle {
        grid: Arc::clone(grid),
        acal: vec![0.0; n],
        q_val: vec![0.0; n],
        s: vecs(n),
        a0: vecs(n),
        b0: vecs(n),
        a: vecs(n),
        b: vecs(n),
        f: vecs(n),
        g: vecs(n),
    };
    for i in 0..grid.nx() {
        let tr = ColumnTrace::from_level(level, i);
        for j in 0..ny {
            let k = i * ny + j;
            let u1 = lifted.u1.values()[k];
            let q1 = lifted.q1.values()[k];
            let c = node_coefficients(u1, q1, dq1[k], tr.p, params).map_err(|e| match e {
                Error::Admissibility { detail, .. } => Error::Admissibility {
                    location: Some(grid.node(k)),
                    detail,
                },
                other => other,
            })?;
            let g = source_g(&c, u1, q1, cutoff.phi[j], cutoff.d2phi[j], &tr, params);
            out.acal[k] = c.acal;
            out.q_val[k] = c.q_val;
            for r in 0..3 {
                out.s[r][k] = c.s[r];
                out.b0[r][k] = c.b0[r];
                out.b[r][k] = c.b[r];
                out.g[r][k] = g[r];
                for col in 0..3 {
                    out.a0[3 * r + col][k] = c.a0[r][col];
                    out.a[3 * r + col][k] = c.a[r][col];
                    out.f[3 * r + col][k] = c.f[r][col];
                }
            }
        }
    }
    Ok(out)
}

/// Analytic lower bounds valid on the whole band `δ ≤ q1 ≤ P − δ`:
/// diagonal of `S` and of `B`.
pub fn analytic_lower_bounds(params: &PhysicalParams) -> ([f64; 3], [f64; 3]) {
    let d = params.delta;
    let g = params.gamma;
    // Π ≥ δ², 𝒜⁻¹ ≥ (δ/a)^{1/γ}, Q ≥ γδ + 2δ
    let s12 = (d / params.a).powf(1.0 / g) * d * d;
    let s3 = (g * d + 2.0 * d) / (2.0 * g);
    (
        [s12, s12, s3],
        [
            2.0 * params.mu * d * d * d,
            2.0 * params.mu_prime * d * d * d,
            params.sigma * d * d,
        ],
    )
}

/// Spectral radius of `S⁻¹A` in closed form: `|u1| + sqrt(𝒜 · 2γΠ / Q)`.
pub fn advective_radius(c: &NodeCoefficients, u1: f64, gamma: f64) -> f64 {
    u1.abs() + (c.acal * 2.0 * gamma * c.pi / c.q_val).sqrt()
}
