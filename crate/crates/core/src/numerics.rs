//! Difference stencils, quadrature, reductions and interpolation shared by
//! the solver and the diagnostics.
//!
//! All reductions go through [`pairwise_sum`], which has a fixed summation
//! tree, so norms are bitwise reproducible for identical inputs.

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Sum with a fixed pairwise tree (blocks of 8 summed left to right).
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 8 {
        return v.iter().fold(0.0, |a, &b| a + b);
    }
    let mid = v.len() / 2;
    pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
}

/// Discrete ⟨a, b⟩ with rectangle rule in x and trapezoid weights in y.
pub fn inner(grid: &Grid, a: &[f64], b: &[f64]) -> f64 {
    let wy = grid.y_weights();
    let ny = grid.ny();
    let terms: Vec<f64> = a
        .iter()
        .zip(b)
        .enumerate()
        .map(|(k, (&p, &q))| p * q * wy[k % ny])
        .collect();
    pairwise_sum(&terms) * grid.dx()
}

pub fn l2_norm(grid: &Grid, a: &[f64]) -> f64 {
    inner(grid, a, a).sqrt()
}

/// Periodic L² norm of a one-dimensional x-profile.
pub fn l2_norm_periodic(dx: f64, a: &[f64]) -> f64 {
    let sq: Vec<f64> = a.iter().map(|v| v * v).collect();
    (pairwise_sum(&sq) * dx).sqrt()
}

/// Finite-difference weights for the `order`-th derivative at `x0` using
/// `nodes` (Fornberg's recursion). Returns one weight per node.
pub fn fd_weights(nodes: &[f64], x0: f64, order: usize) -> Vec<f64> {
    let n = nodes.len();
    assert!(n > order, "need more nodes than the derivative order");
    // c[k][m]: weight of node k for derivative m
    let mut c = vec![vec![0.0; order + 1]; n];
    let mut c1 = 1.0;
    let mut c4 = nodes[0] - x0;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = nodes[i] - x0;
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|row| row[order]).collect()
}

/// Behaviour of y-stencils at the wall row `j = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WallRule {
    /// Second-order one-sided stencil.
    OneSided,
    /// Even mirror through `y = 0` (zero normal derivative, ghost node).
    Mirror,
}

/// Central first difference in x with periodic wrap, per node.
pub fn diff_x(grid: &Grid, f: &[f64]) -> Vec<f64> {
    let (nx, ny) = (grid.nx(), grid.ny());
    let inv = 1.0 / (2.0 * grid.dx());
    let mut out = vec![0.0; f.len()];
    for i in 0..nx {
        let ip = (i + 1) % nx;
        let im = (i + nx - 1) % nx;
        for j in 0..ny {
            out[i * ny + j] = (f[ip * ny + j] - f[im * ny + j]) * inv;
        }
    }
    out
}

/// Undivided fourth difference in x (periodic).
pub fn fourth_difference_x(grid: &Grid, f: &[f64]) -> Vec<f64> {
    let (nx, ny) = (grid.nx(), grid.ny());
    let mut out = vec![0.0; f.len()];
    for i in 0..nx {
        let ip = (i + 1) % nx;
        let ipp = (i + 2) % nx;
        let im = (i + nx - 1) % nx;
        let imm = (i + nx - 2) % nx;
        for j in 0..ny {
            out[i * ny + j] = f[ipp * ny + j] - 4.0 * f[ip * ny + j] + 6.0 * f[i * ny + j]
                - 4.0 * f[im * ny + j]
                + f[imm * ny + j];
        }
    }
    out
}

/// First derivative of one column on arbitrary nodes: three-point central
/// in the interior, three-point one-sided (or mirrored) at the ends.
pub fn diff_column(y: &[f64], f: &[f64], wall: WallRule, out: &mut [f64]) {
    let n = y.len();
    for j in 1..n - 1 {
        let hm = y[j] - y[j - 1];
        let hp = y[j + 1] - y[j];
        out[j] = -hp / (hm * (hm + hp)) * f[j - 1]
            + (hp - hm) / (hm * hp) * f[j]
            + hm / (hp * (hm + hp)) * f[j + 1];
    }
    out[0] = match wall {
        WallRule::Mirror => 0.0,
        WallRule::OneSided => dot(&fd_weights(&y[0..3], y[0], 1), &f[0..3]),
    };
    out[n - 1] = dot(&fd_weights(&y[n - 3..n], y[n - 1], 1), &f[n - 3..n]);
}

/// Second derivative of one column: three-point interior, four-point
/// one-sided (second order) or mirrored at the wall, four-point at the top.
pub fn diff2_column(y: &[f64], f: &[f64], wall: WallRule, out: &mut [f64]) {
    let n = y.len();
    for j in 1..n - 1 {
        let hm = y[j] - y[j - 1];
        let hp = y[j + 1] - y[j];
        out[j] = 2.0
            * (f[j - 1] / (hm * (hm + hp)) - f[j] / (hm * hp) + f[j + 1] / (hp * (hm + hp)));
    }
    out[0] = match wall {
        WallRule::Mirror => {
            let h = y[1] - y[0];
            2.0 * (f[1] - f[0]) / (h * h)
        }
        WallRule::OneSided => dot(&fd_weights(&y[0..4], y[0], 2), &f[0..4]),
    };
    out[n - 1] = dot(&fd_weights(&y[n - 4..n], y[n - 1], 2), &f[n - 4..n]);
}

/// First or second derivative of one column with five-point stencils,
/// centered in the interior and shifted inward at the ends. Differencing the
/// result once more stays consistent up to the boundary.
pub fn diff_column_wide(y: &[f64], f: &[f64], order: usize, out: &mut [f64]) {
    let n = y.len();
    let width = 5.min(n);
    for (j, o) in out.iter_mut().enumerate() {
        let start = j.saturating_sub(width / 2).min(n - width);
        let w = fd_weights(&y[start..start + width], y[j], order);
        *o = dot(&w, &f[start..start + width]);
    }
}

/// Apply a column operator to every x-column.
pub fn apply_columns(
    grid: &Grid,
    f: &[f64],
    op: impl Fn(&[f64], &[f64], &mut [f64]),
) -> Vec<f64> {
    let ny = grid.ny();
    let mut out = vec![0.0; f.len()];
    for (src, dst) in f.chunks_exact(ny).zip(out.chunks_exact_mut(ny)) {
        op(grid.y_nodes(), src, dst);
    }
    out
}

pub fn diff_y(grid: &Grid, f: &[f64], wall: WallRule) -> Vec<f64> {
    apply_columns(grid, f, |y, s, d| diff_column(y, s, wall, d))
}

pub fn diff2_y(grid: &Grid, f: &[f64], wall: WallRule) -> Vec<f64> {
    apply_columns(grid, f, |y, s, d| diff2_column(y, s, wall, d))
}

/// Fourth-order (five-point) first derivative of one column on arbitrary
/// nodes; the stencil shifts inward near the ends.
pub fn diff_column_high_order(y: &[f64], f: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; y.len()];
    diff_column_wide(y, f, 1, &mut out);
    out
}

/// Running composite-trapezoid integral, starting from 0 at the first node.
pub fn cumulative_trapezoid(y: &[f64], f: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(y.len());
    let mut acc = 0.0;
    out.push(0.0);
    for k in 1..y.len() {
        acc += 0.5 * (f[k] + f[k - 1]) * (y[k] - y[k - 1]);
        out.push(acc);
    }
    out
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solve a tridiagonal system in place (Thomas algorithm).
///
/// `lower[k]` couples row `k` to `k-1` (`lower[0]` unused), `upper[k]` couples
/// row `k` to `k+1` (last entry unused). `rhs` is overwritten with the
/// solution. Fails when a pivot drops below `1e-14` in magnitude.
pub fn solve_tridiagonal(
    lower: &[f64],
    diag: &[f64],
    upper: &[f64],
    rhs: &mut [f64],
    scratch: &mut Vec<f64>,
) -> Result<()> {
    let n = diag.len();
    scratch.clear();
    scratch.resize(n, 0.0);
    let mut pivot = diag[0];
    if pivot.abs() < 1e-14 {
        return Err(Error::SingularOperator { row: 0, pivot });
    }
    rhs[0] /= pivot;
    for k in 1..n {
        scratch[k] = upper[k - 1] / pivot;
        pivot = diag[k] - lower[k] * scratch[k];
        if pivot.abs() < 1e-14 {
            return Err(Error::SingularOperator { row: k, pivot });
        }
        rhs[k] = (rhs[k] - lower[k] * rhs[k - 1]) / pivot;
    }
    for k in (0..n - 1).rev() {
        rhs[k] -= scratch[k + 1] * rhs[k + 1];
    }
    Ok(())
}

/// Piecewise-cubic Hermite interpolant through strictly increasing nodes.
#[derive(Debug, Clone)]
pub struct Hermite {
    nodes: Vec<f64>,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl Hermite {
    /// Interpolant with prescribed nodal slopes.
    pub fn new(nodes: Vec<f64>, values: Vec<f64>, slopes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 || nodes.len() != values.len() || nodes.len() != slopes.len() {
            return Err(Error::Internal("hermite: inconsistent table lengths".into()));
        }
        if let Some(k) = nodes.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::Internal(format!(
                "hermite: nodes not strictly increasing at {}",
                k + 1
            )));
        }
        Ok(Hermite {
            nodes,
            values,
            slopes,
        })
    }

    /// Slopes from the five-point derivative of the data.
    pub fn from_data(nodes: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let slopes = diff_column_high_order(&nodes, &values);
        Self::new(nodes, values, slopes)
    }

    /// Shape-preserving variant: slopes are limited with the Fritsch–Carlson
    /// conditions so monotone data give a monotone interpolant.
    pub fn monotone(nodes: Vec<f64>, values: Vec<f64>, mut slopes: Vec<f64>) -> Result<Self> {
        let n = nodes.len();
        for k in 0..n.saturating_sub(1) {
            let secant = (values[k + 1] - values[k]) / (nodes[k + 1] - nodes[k]);
            if secant == 0.0 {
                slopes[k] = 0.0;
                slopes[k + 1] = 0.0;
                continue;
            }
            if slopes[k] * secant < 0.0 {
                slopes[k] = 0.0;
            }
            if slopes[k + 1] * secant < 0.0 {
                slopes[k + 1] = 0.0;
            }
            let alpha = slopes[k] / secant;
            let beta = slopes[k + 1] / secant;
            let r2 = alpha * alpha + beta * beta;
            if r2 > 9.0 {
                let tau = 3.0 / r2.sqrt();
                slopes[k] = tau * alpha * secant;
                slopes[k + 1] = tau * beta * secant;
            }
        }
        Self::new(nodes, values, slopes)
    }

    pub fn first(&self) -> f64 {
        self.nodes[0]
    }

    pub fn last(&self) -> f64 {
        *self.nodes.last().expect("non-empty")
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Evaluate; points outside the node range are clamped to the end value.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.nodes.len();
        if x <= self.nodes[0] {
            return self.values[0];
        }
        if x >= self.nodes[n - 1] {
            return self.values[n - 1];
        }
        let k = self.nodes.partition_point(|&t| t <= x) - 1;
        let h = self.nodes[k + 1] - self.nodes[k];
        let s = (x - self.nodes[k]) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        h00 * self.values[k]
            + h * h10 * self.slopes[k]
            + h01 * self.values[k + 1]
            + h * h11 * self.slopes[k + 1]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn fornberg_matches_classic_stencils() {
        let w = fd_weights(&[-1.0, 0.0, 1.0], 0.0, 1);
        assert_abs_diff_eq!(w[0], -0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(w[1], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(w[2], 0.5, epsilon = 1e-15);
        let w = fd_weights(&[0.0, 1.0, 2.0, 3.0], 0.0, 2);
        // 2, -5, 4, -1
        for (a, b) in w.iter().zip([2.0, -5.0, 4.0, -1.0]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-13);
        }
    }

    #[test]
    fn tridiagonal_solves_known_system() {
        // [2 -1 0; -1 2 -1; 0 -1 2] x = [1 0 1] -> x = [1 1 1]
        let lower = [0.0, -1.0, -1.0];
        let diag = [2.0, 2.0, 2.0];
        let upper = [-1.0, -1.0, 0.0];
        let mut rhs = [1.0, 0.0, 1.0];
        let mut scratch = Vec::new();
        solve_tridiagonal(&lower, &diag, &upper, &mut rhs, &mut scratch).unwrap();
        for v in rhs {
            assert_abs_diff_eq!(v, 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn tridiagonal_reports_tiny_pivot() {
        let mut rhs = [1.0, 1.0];
        let err = solve_tridiagonal(&[0.0, 1.0], &[0.0, 1.0], &[1.0, 0.0], &mut rhs, &mut Vec::new());
        assert!(matches!(err, Err(Error::SingularOperator { row: 0, .. })));
    }

    #[test]
    fn pairwise_sum_is_order_fixed() {
        let v: Vec<f64> = (0..1000).map(|k| (k as f64).sin() * 1e-3).collect();
        assert_eq!(pairwise_sum(&v).to_bits(), pairwise_sum(&v.clone()).to_bits());
        assert_abs_diff_eq!(pairwise_sum(&v), v.iter().sum::<f64>(), epsilon = 1e-12);
    }

    #[test]
    fn hermite_reproduces_cubics_with_exact_slopes() {
        let nodes: Vec<f64> = vec![0.0, 0.3, 1.1, 2.0];
        let f = |x: f64| x * x * x - 2.0 * x + 1.0;
        let df = |x: f64| 3.0 * x * x - 2.0;
        let h = Hermite::new(
            nodes.clone(),
            nodes.iter().map(|&x| f(x)).collect(),
            nodes.iter().map(|&x| df(x)).collect(),
        )
        .unwrap();
        for x in [0.05, 0.7, 1.5, 1.99] {
            assert_abs_diff_eq!(h.eval(x), f(x), epsilon = 1e-13);
        }
    }

    #[test]
    fn monotone_limiter_prevents_overshoot() {
        let nodes = vec![0.0, 1.0, 2.0, 3.0];
        let values = vec![0.0, 0.0, 1.0, 1.0];
        let h = Hermite::monotone(nodes, values, vec![0.0, 5.0, 5.0, 0.0]).unwrap();
        let mut prev = -1.0;
        for k in 0..=300 {
            let v = h.eval(k as f64 * 0.01);
            assert!(v >= prev - 1e-15 && (-1e-15..=1.0 + 1e-15).contains(&v));
            prev = v;
        }
    }

    #[test]
    fn trapezoid_exact_on_linear() {
        let y = [0.0, 0.5, 1.5, 2.0];
        let f: Vec<f64> = y.iter().map(|v| 3.0 * v + 1.0).collect();
        let c = cumulative_trapezoid(&y, &f);
        assert_abs_diff_eq!(c[3], 1.5 * 4.0 + 2.0, epsilon = 1e-14);
    }
}
