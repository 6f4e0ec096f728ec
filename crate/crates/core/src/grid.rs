use crate::error::{Error, Result};

/// Uniform time grid `t_k = t_start + k·dt`, `k = 0..=n_steps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub t_start: f64,
    pub dt: f64,
    pub n_steps: usize,
}

impl TimeGrid {
    pub fn new(t_start: f64, dt: f64, n_steps: usize) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("time step {dt}")));
        }
        if !t_start.is_finite() {
            return Err(Error::InvalidParameter(format!("grid start {t_start}")));
        }
        if n_steps == 0 {
            return Err(Error::EmptyGrid);
        }
        Ok(Self { t_start, dt, n_steps })
    }

    /// Smallest grid starting at `t_start` that reaches at least `t_end`.
    pub fn covering(t_start: f64, t_end: f64, dt: f64) -> Result<Self> {
        if !(t_end > t_start) {
            return Err(Error::EmptyGrid);
        }
        let n = ((t_end - t_start) / dt).ceil() as usize;
        Self::new(t_start, dt, n.max(1))
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t_start + k as f64 * self.dt
    }

    pub fn t_end(&self) -> f64 {
        self.time(self.n_steps)
    }

    pub fn len(&self) -> usize {
        self.n_steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Same window at half the step.
    pub fn refined(&self) -> Self {
        Self { t_start: self.t_start, dt: 0.5 * self.dt, n_steps: 2 * self.n_steps }
    }

    /// Composite trapezoid weight of grid point `k` over the whole window.
    pub fn trapezoid_weight(&self, k: usize) -> f64 {
        if k == 0 || k == self.n_steps {
            0.5 * self.dt
        } else {
            self.dt
        }
    }
}
