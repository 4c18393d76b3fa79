use std::ops::Index;

use crate::error::{Error, Result};

/// Uniform grid on `[center - L, center + L]` with `n_cells + 1` nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    half_length: f64,
    n_cells: usize,
    center: f64,
}

impl Grid {
    pub fn new(half_length: f64, n_cells: usize) -> Result<Self> {
        Self::centered_at(half_length, n_cells, 0.0)
    }

    pub fn centered_at(half_length: f64, n_cells: usize, center: f64) -> Result<Self> {
        if !(half_length.is_finite() && half_length > 0.0) {
            return Err(Error::InvalidParameter(format!("half_length must be > 0, got {half_length}")));
        }
        if n_cells < 2 {
            return Err(Error::InvalidParameter(format!("need at least 2 cells, got {n_cells}")));
        }
        if !center.is_finite() {
            return Err(Error::InvalidParameter("grid center must be finite".into()));
        }
        Ok(Grid { half_length, n_cells, center })
    }

    /// Grid whose spacing is as close to `h` as an integer cell count allows.
    pub fn with_spacing(half_length: f64, h: f64) -> Result<Self> {
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::InvalidParameter(format!("spacing must be > 0, got {h}")));
        }
        Self::new(half_length, (2.0 * half_length / h).round() as usize)
    }

    pub fn half_length(&self) -> f64 {
        self.half_length
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn n_nodes(&self) -> usize {
        self.n_cells + 1
    }

    pub fn center(&self) -> f64 {
        self.center
    }

    pub fn h(&self) -> f64 {
        2.0 * self.half_length / self.n_cells as f64
    }

    pub fn left(&self) -> f64 {
        self.center - self.half_length
    }

    pub fn right(&self) -> f64 {
        self.center + self.half_length
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.left() + i as f64 * self.h()
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_nodes()).map(move |i| self.x(i))
    }

    /// Same extent, twice the cells.
    pub fn refined(&self) -> Grid {
        Grid { n_cells: 2 * self.n_cells, ..*self }
    }

    /// Indices of nodes at least `buffer` away from both ends.
    pub fn interior(&self, buffer: f64) -> std::ops::Range<usize> {
        let skip = ((buffer / self.h()).ceil() as usize).min(self.n_nodes() / 2);
        skip..self.n_nodes() - skip
    }
}

/// Values sampled at the nodes of a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_nodes() {
            return Err(Error::GridMismatch(format!("{} values for a grid of {} nodes", values.len(), grid.n_nodes())));
        }
        Ok(ScalarField { grid, values })
    }

    pub fn from_fn(grid: Grid, mut f: impl FnMut(f64) -> f64) -> Self {
        ScalarField { grid, values: grid.nodes().map(&mut f).collect() }
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        ScalarField { grid, values: vec![c; grid.n_nodes()] }
    }

    pub fn grid(&self) -> &Grid {
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

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Index and value of the most negative entry below `-tolerance`.
    pub fn undershoot(&self, tolerance: f64) -> Option<(usize, f64)> {
        self.values.iter().copied().enumerate().filter(|&(_, v)| v < -tolerance).min_by(|a, b| a.1.total_cmp(&b.1))
    }

    pub fn ensure_same_grid(&self, other: &ScalarField) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch(format!("{:?} vs {:?}", self.grid, other.grid)));
        }
        Ok(())
    }

    /// Sup-norm distance to a field on the same grid.
    pub fn sup_distance(&self, other: &ScalarField) -> Result<f64> {
        self.ensure_same_grid(other)?;
        Ok(self.values.iter().zip(&other.values).fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }

    /// Piecewise-linear interpolant at `x`, clamped to the end values outside the grid.
    pub fn interpolate(&self, x: f64) -> f64 {
        let g = &self.grid;
        let s = (x - g.left()) / g.h();
        if s <= 0.0 {
            return self.values[0];
        }
        let last = g.n_cells();
        if s >= last as f64 {
            return self.values[last];
        }
        let i = s.floor() as usize;
        let w = s - i as f64;
        (1.0 - w) * self.values[i] + w * self.values[i + 1]
    }

    pub fn map(&self, f: impl Fn(f64, f64) -> f64) -> ScalarField {
        let values = self.grid.nodes().zip(&self.values).map(|(x, &v)| f(x, v)).collect();
        ScalarField { grid: self.grid, values }
    }
}

impl Index<usize> for ScalarField {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.values[i]
    }
}
