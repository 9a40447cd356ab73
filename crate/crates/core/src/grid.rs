use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform partition of `[0, T]` into `M` steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    horizon: f64,
    steps: usize,
    dt: f64,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::invalid(format!("horizon must be positive, got {horizon}")));
        }
        if steps == 0 {
            return Err(Error::invalid("grid needs at least one step"));
        }
        Ok(TimeGrid { horizon, steps, dt: horizon / steps as f64 })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Number of grid points, `M + 1`.
    pub fn points(&self) -> usize {
        self.steps + 1
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// `t_k = k dt`, with the last point pinned to `T` exactly.
    pub fn time(&self, k: usize) -> f64 {
        if k == self.steps {
            self.horizon
        } else {
            k as f64 * self.dt
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.points()).map(|k| self.time(k)).collect()
    }

    /// Index of the grid point closest to `t` (clamped to the grid).
    pub fn nearest_index(&self, t: f64) -> usize {
        let k = (t / self.dt).round();
        if k <= 0.0 {
            0
        } else {
            (k as usize).min(self.steps)
        }
    }
}

/// Build a grid; see [`TimeGrid::new`].
pub fn make_grid(horizon: f64, steps: usize) -> Result<TimeGrid> {
    TimeGrid::new(horizon, steps)
}
