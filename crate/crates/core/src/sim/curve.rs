use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::time::DAY;

/// Age at which every curve is treated as exhausted.
pub const LONG_RUN_HORIZON: u64 = 30 * DAY;

/// Cumulative engagement of one post as a function of its age.
///
/// Follows a log-logistic CDF scaled by `total_potential`: half of the
/// potential has accrued at age `tau`, and `shape_k` sets how sharply.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccrualCurve {
    pub total_potential: u64,
    pub tau: f64,
    pub shape_k: f64,
}

impl AccrualCurve {
    pub fn new(total_potential: u64, tau: f64, shape_k: f64) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::config(format!(
                "curve tau must be positive, got {tau}"
            )));
        }
        if !(shape_k > 1.0 && shape_k.is_finite()) {
            return Err(Error::config(format!(
                "curve shape_k must exceed 1, got {shape_k}"
            )));
        }
        Ok(Self {
            total_potential,
            tau,
            shape_k,
        })
    }

    /// Unclamped log-logistic CDF at `age` minutes.
    pub fn fraction_at(&self, age: u64) -> f64 {
        if age == 0 {
            return 0.0;
        }
        1.0 / (1.0 + (self.tau / age as f64).powf(self.shape_k))
    }

    pub fn cumulative_at(&self, age: u64) -> u64 {
        cumulative_at(self, age)
    }
}

/// `floor(total_potential * F(age))`, clamped to the full potential from
/// [`LONG_RUN_HORIZON`] on.
pub fn cumulative_at(curve: &AccrualCurve, age: u64) -> u64 {
    if age >= LONG_RUN_HORIZON {
        return curve.total_potential;
    }
    let v = (curve.total_potential as f64 * curve.fraction_at(age)).floor() as u64;
    v.min(curve.total_potential)
}
