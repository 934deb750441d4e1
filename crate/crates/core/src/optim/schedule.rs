use crate::error::{Error, Result};

pub const LR_INITIAL: f64 = 0.0015;
pub const LR_FINAL: f64 = 1e-6;

/// Linear interpolation from `lr0` at step 0 to `lr_final` at `total_steps`.
///
/// ```
/// use phonintent::optim::lr_at;
/// assert_eq!(lr_at(0, 100, 0.0015, 1e-6).unwrap(), 0.0015);
/// assert_eq!(lr_at(100, 100, 0.0015, 1e-6).unwrap(), 1e-6);
/// ```
pub fn lr_at(step: usize, total_steps: usize, lr0: f64, lr_final: f64) -> Result<f64> {
    if total_steps == 0 {
        return Err(Error::Invalid("schedule needs at least one step".into()));
    }
    if step > total_steps {
        return Err(Error::Invalid(format!("step {step} is past the schedule end {total_steps}")));
    }
    if step == total_steps {
        return Ok(lr_final);
    }
    Ok(lr0 + (lr_final - lr0) * step as f64 / total_steps as f64)
}
