//! Time units and uniform sampling grids.

use crate::error::{invalid, Result};

/// Event timestamps are integer femtoseconds.
pub const TICKS_PER_SECOND: f64 = 1e15;

pub fn seconds_to_ticks(seconds: f64) -> i64 {
    (seconds * TICKS_PER_SECOND).round() as i64
}

pub fn ticks_to_seconds(ticks: i64) -> f64 {
    ticks as f64 / TICKS_PER_SECOND
}

/// Uniformly spaced points `start + i * step`, `i = 0..len`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformGrid {
    start: f64,
    step: f64,
    len: usize,
}

impl UniformGrid {
    pub fn new(start: f64, step: f64, len: usize) -> Result<Self> {
        if !(step > 0.0) || !step.is_finite() {
            return Err(invalid(format!("grid step must be positive, got {step}")));
        }
        if !start.is_finite() {
            return Err(invalid("grid start must be finite"));
        }
        if len == 0 {
            return Err(invalid("grid must have at least one point"));
        }
        Ok(Self { start, step, len })
    }

    /// Grid `k * step` for `k = -n..=n` with `n = ceil(half_span / step)`;
    /// always contains zero.
    pub fn symmetric(half_span: f64, step: f64) -> Result<Self> {
        if !(half_span >= 0.0) {
            return Err(invalid("half span must be non-negative"));
        }
        if !(step > 0.0) {
            return Err(invalid(format!("grid step must be positive, got {step}")));
        }
        let n = (half_span / step - 1e-9).ceil().max(0.0) as usize;
        Self::new(-(n as f64) * step, step, 2 * n + 1)
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn point(&self, i: usize) -> f64 {
        self.start + i as f64 * self.step
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len).map(move |i| self.point(i))
    }

    pub fn last(&self) -> f64 {
        self.point(self.len - 1)
    }

    /// Index of the grid point equal to `x` (within 1e-6 of a step).
    pub fn index_of(&self, x: f64) -> Option<usize> {
        let k = ((x - self.start) / self.step).round();
        if k < 0.0 || k >= self.len as f64 {
            return None;
        }
        let k = k as usize;
        ((self.point(k) - x).abs() <= 1e-6 * self.step).then_some(k)
    }

    /// Same spacing, `extra` more points on each side.
    pub fn extended(&self, extra: usize) -> Self {
        Self {
            start: self.start - extra as f64 * self.step,
            step: self.step,
            len: self.len + 2 * extra,
        }
    }

    pub(crate) fn same_step(&self, step: f64) -> bool {
        (self.step - step).abs() <= 1e-9 * step
    }
}
