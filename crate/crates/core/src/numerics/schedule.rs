use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Linear warm-up over the first tenth of the optimizer steps, then linear
/// decay to zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrSchedule {
    base_lr: f64,
    total_steps: usize,
    warmup_steps: usize,
}

pub const WARMUP_FRACTION: f64 = 0.10;

impl LrSchedule {
    pub fn new(base_lr: f64, total_steps: usize) -> Result<Self> {
        if !(base_lr > 0.0 && base_lr.is_finite()) {
            return Err(Error::InvalidConfig(alloc::format!(
                "base learning rate must be positive, got {base_lr}"
            )));
        }
        if total_steps == 0 {
            return Err(Error::InvalidConfig(
                "schedule needs at least one step".into(),
            ));
        }
        // integer ceil(total / 10) avoids 0.1 * 10 = 1.0000000000000002 style rounding
        let warmup_steps = total_steps.div_ceil(10);
        Ok(LrSchedule {
            base_lr,
            total_steps,
            warmup_steps,
        })
    }

    pub fn base_lr(&self) -> f64 {
        self.base_lr
    }

    pub fn total_steps(&self) -> usize {
        self.total_steps
    }

    pub fn warmup_steps(&self) -> usize {
        self.warmup_steps
    }

    /// Learning rate at `step` in `0..=total_steps`.
    ///
    /// With a single total step the warm-up covers the whole range, so
    /// `lr_at(1) = base_lr`.
    pub fn lr_at(&self, step: usize) -> Result<f64> {
        if step > self.total_steps {
            return Err(Error::StepOutOfRange {
                step,
                total: self.total_steps,
            });
        }
        let w = self.warmup_steps;
        if step <= w {
            Ok(self.base_lr * step as f64 / w as f64)
        } else {
            let remaining = (self.total_steps - step) as f64;
            Ok(self.base_lr * remaining / (self.total_steps - w) as f64)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoints_and_midpoint() {
        let s = LrSchedule::new(1e-5, 100).unwrap();
        assert_eq!(s.warmup_steps(), 10);
        assert_eq!(s.lr_at(0).unwrap(), 0.0);
        assert_eq!(s.lr_at(10).unwrap(), 1e-5);
        assert_eq!(s.lr_at(100).unwrap(), 0.0);
        assert!((s.lr_at(55).unwrap() - 5e-6).abs() < 1e-20);
        assert!(matches!(s.lr_at(101), Err(Error::StepOutOfRange { .. })));
    }

    #[test]
    fn warmup_is_ceiling_of_tenth() {
        assert_eq!(LrSchedule::new(1.0, 101).unwrap().warmup_steps(), 11);
        assert_eq!(LrSchedule::new(1.0, 9).unwrap().warmup_steps(), 1);
        assert_eq!(LrSchedule::new(1.0, 1).unwrap().warmup_steps(), 1);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(LrSchedule::new(0.0, 10).is_err());
        assert!(LrSchedule::new(1e-5, 0).is_err());
    }
}
