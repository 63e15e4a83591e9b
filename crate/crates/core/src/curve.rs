//! Sampled delay curves and two-delay surfaces with unit tags.

use crate::error::{invalid, Error, Result};
use crate::grid::UniformGrid;

/// Physical unit of sampled values. Rates are in 1/s, so the cross-correlation
/// amplitude C, with C² / R² dimensionless, is also in 1/s.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unit {
    Dimensionless,
    Rate,
    Amplitude,
    RateCubed,
}

impl Unit {
    /// Column-name suffix used in CSV headers.
    pub fn suffix(self) -> &'static str {
        match self {
            Unit::Dimensionless => "1",
            Unit::Rate | Unit::Amplitude => "per_s",
            Unit::RateCubed => "per_s3",
        }
    }
}

/// Values on a uniform delay grid (seconds).
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationCurve {
    grid: UniformGrid,
    values: Vec<f64>,
    unit: Unit,
}

impl CorrelationCurve {
    pub fn new(grid: UniformGrid, values: Vec<f64>, unit: Unit) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!("curve value at index {i} is not finite")));
        }
        Ok(Self { grid, values, unit })
    }

    /// Point samples of `f` at the grid delays.
    pub fn sample(grid: UniformGrid, unit: Unit, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.points().map(f).collect();
        Self::new(grid, values, unit)
    }

    pub fn grid(&self) -> &UniformGrid {
        &self.grid
    }

    pub fn delays(&self) -> Vec<f64> {
        self.grid.points().collect()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn unit(&self) -> Unit {
        self.unit
    }

    pub fn value_at(&self, delay: f64) -> Option<f64> {
        self.grid.index_of(delay).map(|i| self.values[i])
    }

    /// Rectangle-rule integral of `value - baseline` over the grid.
    pub fn excess_integral(&self, baseline: f64) -> f64 {
        self.values.iter().map(|v| v - baseline).sum::<f64>() * self.grid.step()
    }

    pub fn map(&self, unit: Unit, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.grid, self.values.iter().map(|&v| f(v)).collect(), unit)
    }
}

/// Values over the square grid `(t1 - ti, t2 - ti)`, row-major with rows
/// indexed by `t1`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationSurface {
    axis: UniformGrid,
    values: Vec<f64>,
    unit: Unit,
}

/// Largest surface held in memory.
pub const MAX_SURFACE_CELLS: usize = 100_000_000;

impl CorrelationSurface {
    pub fn new(axis: UniformGrid, values: Vec<f64>, unit: Unit) -> Result<Self> {
        let n = axis.len();
        let cells = n.saturating_mul(n);
        if cells > MAX_SURFACE_CELLS {
            return Err(Error::GridTooLarge {
                cells,
                limit: MAX_SURFACE_CELLS,
            });
        }
        if values.len() != cells {
            return Err(Error::GridMismatch(format!(
                "{} values for a {n}x{n} surface",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!("surface value at index {i} is not finite")));
        }
        Ok(Self { axis, values, unit })
    }

    pub fn axis(&self) -> &UniformGrid {
        &self.axis
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn unit(&self) -> Unit {
        self.unit
    }

    pub fn value(&self, i1: usize, i2: usize) -> f64 {
        self.values[i1 * self.axis.len() + i2]
    }

    pub fn row(&self, i1: usize) -> &[f64] {
        let n = self.axis.len();
        &self.values[i1 * n..(i1 + 1) * n]
    }

    /// Value at the grid point `(t1, t2)`, if both lie on the axis grid.
    pub fn value_at(&self, t1: f64, t2: f64) -> Option<f64> {
        Some(self.value(self.axis.index_of(t1)?, self.axis.index_of(t2)?))
    }
}
