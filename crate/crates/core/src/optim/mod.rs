//! Adam with coupled L2 decay, the linear learning-rate schedule, and a
//! finite-difference gradient checker.

pub mod adam;
pub mod gradcheck;
pub mod schedule;

pub use adam::{adam_step, AdamState, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
pub use gradcheck::{grad_check, GradCheckOptions, GradCheckReport, GRADCHECK_TOLERANCE};
pub use schedule::{lr_at, LR_FINAL, LR_INITIAL};
