use crate::corpus::PAD_ID;
use crate::error::{Error, Result};
use crate::net::{ModelGrads, ModelParams, ParamKind};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// First and second moments for every registry entry, plus the step count.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(params: &ModelParams) -> Self {
        let zeros: Vec<Vec<f64>> = params.entries().iter().map(|e| vec![0.0; e.data.len()]).collect();
        Self {
            m: zeros.clone(),
            v: zeros,
            t: 0,
            beta1: ADAM_BETA1,
            beta2: ADAM_BETA2,
            eps: ADAM_EPS,
        }
    }
}

/// One Adam update. Conv and linear weights get `weight_decay · w` added to
/// their gradient before the moments are updated. Running statistics are left
/// alone and the padding row of the embedding table never moves.
///
/// The step is all-or-nothing: a non-finite gradient anywhere aborts it
/// before any parameter or moment changes.
pub fn adam_step(
    params: &mut ModelParams,
    grads: &ModelGrads,
    state: &mut AdamState,
    lr: f64,
    weight_decay: f64,
) -> Result<()> {
    if !(lr > 0.0 && lr.is_finite()) {
        return Err(Error::Invalid(format!("learning rate {lr} must be positive")));
    }
    let n = params.entries().len();
    if grads.entries().len() != n || state.m.len() != n {
        return Err(Error::Shape("optimizer state does not match the parameter registry".into()));
    }
    for (p, g) in params.entries().iter().zip(grads.entries()) {
        if p.data.len() != g.data.len() {
            return Err(Error::Shape(format!("gradient for {} has the wrong size", p.name)));
        }
        if p.kind.trainable() && g.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("gradient of {}", p.name)));
        }
    }
    state.t += 1;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.eps);
    let c1 = 1.0 - b1.powi(state.t as i32);
    let c2 = 1.0 - b2.powi(state.t as i32);
    for (i, (p, g)) in params.entries_mut().iter_mut().zip(grads.entries()).enumerate() {
        if !p.kind.trainable() {
            continue;
        }
        let skip = if p.kind == ParamKind::Embedding {
            let dim = p.shape[1];
            PAD_ID * dim..(PAD_ID + 1) * dim
        } else {
            0..0
        };
        let decay = if p.kind.decayed() { weight_decay } else { 0.0 };
        let (m, v) = (&mut state.m[i], &mut state.v[i]);
        for k in 0..p.data.len() {
            if skip.contains(&k) {
                continue;
            }
            let w = &mut p.data[k];
            let gk = g.data[k] + decay * *w;
            m[k] = b1 * m[k] + (1.0 - b1) * gk;
            v[k] = b2 * v[k] + (1.0 - b2) * gk * gk;
            *w -= lr * (m[k] / c1) / ((v[k] / c2).sqrt() + eps);
        }
    }
    Ok(())
}
