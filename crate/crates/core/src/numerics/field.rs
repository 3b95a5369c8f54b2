use std::sync::Arc;

use crate::error::{Error, Result};
use crate::numerics::grid::Grid2D;

/// Node values on a tensor grid, stored with x as the outer index.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField2D {
    grid: Arc<Grid2D>,
    values: Vec<f64>,
}

impl ScalarField2D {
    pub fn new(grid: Arc<Grid2D>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "field has {} values for a {}x{} grid",
                values.len(),
                grid.nx(),
                grid.ny()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            let (i, j) = (k / grid.ny(), k % grid.ny());
            return Err(Error::InvalidField(format!(
                "non-finite value at x = {}, y = {}",
                grid.x()[i],
                grid.y()[j]
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Arc<Grid2D>) -> Self {
        let n = grid.len();
        Self { grid, values: vec![0.0; n] }
    }

    pub fn from_fn(grid: Arc<Grid2D>, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(grid.len());
        for &x in grid.x() {
            for &y in grid.y() {
                values.push(f(x, y));
            }
        }
        Self::new(grid, values)
    }

    /// Builds from per-column vectors (one per x node).
    pub fn from_columns(grid: Arc<Grid2D>, cols: &[Vec<f64>]) -> Result<Self> {
        if cols.len() != grid.nx() || cols.iter().any(|c| c.len() != grid.ny()) {
            return Err(Error::GridMismatch("column layout does not match grid".into()));
        }
        Self::new(grid, cols.concat())
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn grid_arc(&self) -> &Arc<Grid2D> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.grid.ny() + j]
    }

    pub fn column(&self, i: usize) -> &[f64] {
        let ny = self.grid.ny();
        &self.values[i * ny..(i + 1) * ny]
    }

    pub fn row(&self, j: usize) -> Vec<f64> {
        (0..self.grid.nx()).map(|i| self.at(i, j)).collect()
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

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.grid.clone(), self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn map_xy(&self, f: impl Fn(f64, f64, f64) -> f64) -> Result<Self> {
        let ny = self.grid.ny();
        let vals = self
            .values
            .iter()
            .enumerate()
            .map(|(k, &v)| f(self.grid.x()[k / ny], self.grid.y()[k % ny], v))
            .collect();
        Self::new(self.grid.clone(), vals)
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.check_same_grid(other)?;
        Self::new(
            self.grid.clone(),
            self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        )
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { grid: self.grid.clone(), values: self.values.iter().map(|v| v * s).collect() }
    }

    /// `self + s * other`
    pub fn axpy(&self, s: f64, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + s * b)
    }

    pub fn check_same_grid(&self, other: &Self) -> Result<()> {
        if Arc::ptr_eq(&self.grid, &other.grid) || self.grid.same_nodes(&other.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "fields on different grids ({}x{} vs {}x{})",
                self.grid.nx(),
                self.grid.ny(),
                other.grid.nx(),
                other.grid.ny()
            )))
        }
    }

    /// Restricts to the x-columns with the given indices.
    pub fn select_columns(&self, grid: Arc<Grid2D>, cols: &[usize]) -> Result<Self> {
        if grid.ny() != self.grid.ny() || cols.len() != grid.nx() {
            return Err(Error::GridMismatch("column selection does not match target grid".into()));
        }
        let mut vals = Vec::with_capacity(grid.len());
        for &c in cols {
            vals.extend_from_slice(self.column(c));
        }
        Self::new(grid, vals)
    }

    /// Keeps the first `ny` nodes of every column.
    pub fn truncate_rows(&self, grid: Arc<Grid2D>) -> Result<Self> {
        let ny = grid.ny();
        if grid.nx() != self.grid.nx() || ny > self.grid.ny() {
            return Err(Error::GridMismatch("row truncation does not match target grid".into()));
        }
        let mut vals = Vec::with_capacity(grid.len());
        for i in 0..grid.nx() {
            vals.extend_from_slice(&self.column(i)[..ny]);
        }
        Self::new(grid, vals)
    }
}
