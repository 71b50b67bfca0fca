//! Periodic-in-x, truncated half-line-in-y tensor grids and scalar fields.
//!
//! Storage is x-outer: node `(i, j)` lives at `i * ny + j`, so each x-column
//! is a contiguous slice. This matches the row order of the snapshot files.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, NodeIndex, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    nx: usize,
    lx: f64,
    y_nodes: Vec<f64>,
}

impl Grid {
    pub fn uniform(nx: usize, lx: f64, ny: usize, y_max: f64) -> Result<Self> {
        if ny < 2 {
            return Err(Error::Grid(format!("ny={ny} must be at least 8")));
        }
        let dy = y_max / (ny - 1) as f64;
        let mut y_nodes: Vec<f64> = (0..ny).map(|j| j as f64 * dy).collect();
        y_nodes[ny - 1] = y_max;
        Self::from_nodes(nx, lx, y_nodes)
    }

    /// Default x period is 2π.
    pub fn uniform_2pi(nx: usize, ny: usize, y_max: f64) -> Result<Self> {
        Self::uniform(nx, 2.0 * PI, ny, y_max)
    }

    pub fn from_nodes(nx: usize, lx: f64, y_nodes: Vec<f64>) -> Result<Self> {
        if nx < 8 || nx % 2 != 0 {
            return Err(Error::Grid(format!("nx={nx} must be even and at least 8")));
        }
        if !(lx.is_finite() && lx > 0.0) {
            return Err(Error::Grid(format!("x period {lx} must be positive")));
        }
        if y_nodes.len() < 8 {
            return Err(Error::Grid(format!(
                "ny={} must be at least 8",
                y_nodes.len()
            )));
        }
        if y_nodes[0] != 0.0 {
            return Err(Error::Grid("first y node must be 0".into()));
        }
        if let Some(k) = y_nodes
            .windows(2)
            .position(|w| !(w[1] > w[0]) || !w[1].is_finite())
        {
            return Err(Error::Grid(format!(
                "y nodes must be strictly increasing (violated at {})",
                k + 1
            )));
        }
        Ok(Grid { nx, lx, y_nodes })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.y_nodes.len()
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn lx(&self) -> f64 {
        self.lx
    }

    pub fn dx(&self) -> f64 {
        self.lx / self.nx as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.dx()
    }

    pub fn x_nodes(&self) -> Vec<f64> {
        (0..self.nx).map(|i| self.x(i)).collect()
    }

    pub fn y(&self, j: usize) -> f64 {
        self.y_nodes[j]
    }

    pub fn y_nodes(&self) -> &[f64] {
        &self.y_nodes
    }

    pub fn y_max(&self) -> f64 {
        *self.y_nodes.last().expect("grid has nodes")
    }

    /// Spacing of a uniform y grid, `None` when the nodes are stretched.
    pub fn uniform_dy(&self) -> Option<f64> {
        let ny = self.ny();
        let dy = self.y_max() / (ny - 1) as f64;
        let uniform = self
            .y_nodes
            .windows(2)
            .all(|w| ((w[1] - w[0]) - dy).abs() <= 1e-9 * dy);
        uniform.then_some(dy)
    }

    pub fn require_uniform_dy(&self) -> Result<f64> {
        self.uniform_dy()
            .ok_or_else(|| Error::Unsupported("the solver requires a uniform y grid".into()))
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.ny() + j
    }

    pub fn node(&self, k: usize) -> NodeIndex {
        NodeIndex {
            i: k / self.ny(),
            j: k % self.ny(),
        }
    }

    /// Composite-trapezoid weights in y; together with `dx` they give the
    /// discrete L² inner product on the truncated domain.
    pub fn y_weights(&self) -> Vec<f64> {
        let y = &self.y_nodes;
        let n = y.len();
        let mut w = vec![0.0; n];
        for k in 0..n - 1 {
            let h = y[k + 1] - y[k];
            w[k] += 0.5 * h;
            w[k + 1] += 0.5 * h;
        }
        w
    }
}

/// A real value per grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: &Arc<Grid>) -> Self {
        Field {
            grid: Arc::clone(grid),
            values: vec![0.0; grid.len()],
        }
    }

    pub fn constant(grid: &Arc<Grid>, value: f64) -> Self {
        Field {
            grid: Arc::clone(grid),
            values: vec![value; grid.len()],
        }
    }

    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for i in 0..grid.nx() {
            let x = grid.x(i);
            for &y in grid.y_nodes() {
                values.push(f(x, y));
            }
        }
        Field {
            grid: Arc::clone(grid),
            values,
        }
    }

    /// Checked constructor: length must match and every value must be finite.
    pub fn from_values(grid: &Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Grid(format!(
                "field has {} values, grid has {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(grid.node(k)));
        }
        Ok(Field {
            grid: Arc::clone(grid),
            values,
        })
    }

    pub(crate) fn from_values_unchecked(grid: &Arc<Grid>, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Field {
            grid: Arc::clone(grid),
            values,
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.grid.index(i, j);
        self.values[k] = v;
    }

    pub fn column(&self, i: usize) -> &[f64] {
        let ny = self.grid.ny();
        &self.values[i * ny..(i + 1) * ny]
    }

    pub fn column_mut(&mut self, i: usize) -> &mut [f64] {
        let ny = self.grid.ny();
        &mut self.values[i * ny..(i + 1) * ny]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            grid: Arc::clone(&self.grid),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Field {
        debug_assert_eq!(self.values.len(), other.values.len());
        Field {
            grid: Arc::clone(&self.grid),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn scaled(&self, alpha: f64) -> Field {
        self.map(|v| alpha * v)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Discrete L² norm: periodic rectangle rule in x, trapezoid in y.
    pub fn l2_norm(&self) -> f64 {
        crate::numerics::l2_norm(&self.grid, &self.values)
    }
}
