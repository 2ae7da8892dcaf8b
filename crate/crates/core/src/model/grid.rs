use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform time grid `0 = t_0 < t_1 < ... < t_N = T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    horizon: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "horizon must be a positive finite number, got {horizon}"
            )));
        }
        if steps == 0 {
            return Err(Error::InvalidGrid("steps must be at least 1".into()));
        }
        Ok(Self { horizon, steps })
    }

    #[inline]
    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    #[inline]
    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Number of knots, `steps + 1`.
    #[inline]
    pub fn knots(&self) -> usize {
        self.steps + 1
    }

    #[inline]
    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    /// Time of knot `i`. The last knot is exactly `T`.
    #[inline]
    pub fn time(&self, i: usize) -> f64 {
        if i == self.steps {
            self.horizon
        } else {
            i as f64 * self.dt()
        }
    }
}

/// A sample path stored at the knots of a [`TimeGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    grid: TimeGrid,
    values: Vec<f64>,
}

impl Path {
    pub fn zeros(grid: TimeGrid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.knots()],
        }
    }

    pub fn from_values(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.knots() {
            return Err(Error::Dimension {
                expected: grid.knots(),
                got: values.len(),
            });
        }
        Ok(Self { grid, values })
    }

    /// Path whose knot values are `g(t_i)`.
    pub fn from_fn(grid: TimeGrid, mut g: impl FnMut(f64) -> f64) -> Self {
        let values = (0..grid.knots()).map(|i| g(grid.time(i))).collect();
        Self { grid, values }
    }

    #[inline]
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Value at the final knot.
    #[inline]
    pub fn terminal(&self) -> f64 {
        self.values[self.grid.steps()]
    }

    pub fn sup_norm(&self) -> f64 {
        crate::path::sup_norm(self, self.grid.steps())
    }

    /// `sup_i |self_i - other_i|`.
    pub fn sup_distance(&self, other: &Path) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0_f64, |acc, (a, b)| acc.max((a - b).abs()))
    }
}

impl std::ops::Index<usize> for Path {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.values[i]
    }
}
