use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const LAYERS: usize = 4;
pub const POOLED_STEPS: usize = 4;

/// Number of input frames that influence one output frame of a stride-1
/// stack: `1 + Σ (k - 1)·d`.
pub fn receptive_field(kernels: &[usize], dilations: &[usize]) -> usize {
    1 + kernels
        .iter()
        .zip(dilations)
        .map(|(&k, &d)| k.saturating_sub(1) * d)
        .sum::<usize>()
}

/// Shape of the classifier. Kernel sizes must be odd so that same-padding is
/// symmetric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub kernels: [usize; LAYERS],
    pub dilations: [usize; LAYERS],
    pub channels: usize,
    pub dropout_rate: f64,
    pub input_dim: usize,
    pub n_classes: usize,
    pub pooled_steps: usize,
}

impl ModelConfig {
    pub fn new(
        kernels: [usize; LAYERS],
        dilations: [usize; LAYERS],
        channels: usize,
        dropout_rate: f64,
        input_dim: usize,
        n_classes: usize,
    ) -> Result<Self> {
        let cfg = Self {
            kernels,
            dilations,
            channels,
            dropout_rate,
            input_dim,
            n_classes,
            pooled_steps: POOLED_STEPS,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Invalid(format!("model config: {m}")));
        if let Some(k) = self.kernels.iter().find(|&&k| k == 0 || k % 2 == 0) {
            return fail(format!("kernel size {k} must be odd and positive"));
        }
        if self.dilations.contains(&0) {
            return fail("dilations must be positive".into());
        }
        if self.channels == 0 || self.input_dim == 0 {
            return fail("channels and input dim must be positive".into());
        }
        if self.n_classes < 2 {
            return fail(format!("need at least 2 classes, got {}", self.n_classes));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return fail(format!("dropout rate {} outside [0, 1)", self.dropout_rate));
        }
        if self.pooled_steps != POOLED_STEPS {
            return fail(format!("pooled steps must be {POOLED_STEPS}"));
        }
        Ok(())
    }

    pub fn receptive_field(&self) -> usize {
        receptive_field(&self.kernels, &self.dilations)
    }

    /// Input channels of layer `l` (0-based).
    pub fn layer_in(&self, l: usize) -> usize {
        if l == 0 {
            self.input_dim
        } else {
            self.channels
        }
    }

    pub fn head_in(&self) -> usize {
        self.pooled_steps * self.channels
    }
}
