//! ReLU and inverted dropout.

use rand::Rng;

use super::Mode;
use crate::seed;
use crate::tensor::BatchTensor;

/// In-place ReLU; returns the pass-through mask (`x > 0`).
pub fn relu(x: &mut [f64]) -> Vec<bool> {
    x.iter_mut()
        .map(|v| {
            let keep = *v > 0.0;
            if !keep {
                *v = 0.0;
            }
            keep
        })
        .collect()
}

pub fn relu_backward(mask: &[bool], dy: &mut [f64]) {
    for (d, &keep) in dy.iter_mut().zip(mask) {
        if !keep {
            *d = 0.0;
        }
    }
}

/// Identifies one dropout draw: the run seed and the optimizer step. The
/// layer index is supplied by the caller.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DropoutKey {
    pub seed: u64,
    pub step: u64,
}

/// Per-element multipliers: `0` or `1 / (1 - rate)`. `None` means identity.
pub type DropoutMask = Option<Vec<f64>>;

pub fn dropout_mask(len: usize, rate: f64, key: DropoutKey, layer: u64) -> Vec<f64> {
    let mut rng = seed::rng(&[key.seed, layer, key.step, 0xD0]);
    let scale = 1.0 / (1.0 - rate);
    (0..len)
        .map(|_| if rng.random::<f64>() < rate { 0.0 } else { scale })
        .collect()
}

/// Dropout over a flat buffer of values.
pub fn dropout(x: &mut [f64], rate: f64, mode: Mode, key: DropoutKey, layer: u64) -> DropoutMask {
    if mode == Mode::Eval || rate == 0.0 {
        return None;
    }
    let mask = dropout_mask(x.len(), rate, key, layer);
    for (v, m) in x.iter_mut().zip(&mask) {
        *v *= m;
    }
    Some(mask)
}

/// Dropout over the valid frames of a batch only.
pub fn dropout_batch(x: &mut BatchTensor, rate: f64, mode: Mode, key: DropoutKey, layer: u64) -> DropoutMask {
    if mode == Mode::Eval || rate == 0.0 {
        return None;
    }
    let n = x.valid_frames() * x.channels();
    let mask = dropout_mask(n, rate, key, layer);
    let mut offset = 0;
    for b in 0..x.batch() {
        let ex = x.example_mut(b);
        for (v, m) in ex.iter_mut().zip(&mask[offset..]) {
            *v *= m;
        }
        offset += ex.len();
    }
    Some(mask)
}

pub fn dropout_backward(mask: &DropoutMask, dy: &mut [f64]) {
    if let Some(mask) = mask {
        for (d, m) in dy.iter_mut().zip(mask) {
            *d *= m;
        }
    }
}

pub fn dropout_batch_backward(mask: &DropoutMask, dy: &mut BatchTensor) {
    let Some(mask) = mask else {
        return;
    };
    let mut offset = 0;
    for b in 0..dy.batch() {
        let ex = dy.example_mut(b);
        for (d, m) in ex.iter_mut().zip(&mask[offset..]) {
            *d *= m;
        }
        offset += ex.len();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relu_values_and_zero_convention() {
        let mut x = vec![-1.0, 0.0, 2.0];
        let mask = relu(&mut x);
        assert_eq!(x, vec![0.0, 0.0, 2.0]);
        let mut dy = vec![1.0, 1.0, 1.0];
        relu_backward(&mask, &mut dy);
        assert_eq!(dy, vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn relu_matches_finite_differences_away_from_kink() {
        let h = 1e-6;
        for &x0 in &[-2.0, -0.3, 0.4, 1.7] {
            let f = |v: f64| {
                let mut b = [v];
                relu(&mut b);
                b[0]
            };
            let num = (f(x0 + h) - f(x0 - h)) / (2.0 * h);
            let mut b = [x0];
            let mask = relu(&mut b);
            let mut dy = [1.0];
            relu_backward(&mask, &mut dy);
            assert!((dy[0] - num).abs() / num.abs().max(1e-8).max(dy[0].abs()) < 1e-4 || (dy[0] == 0.0 && num == 0.0));
        }
    }

    #[test]
    fn eval_and_zero_rate_are_identity() {
        let x0 = vec![1.0, -2.0, 3.5];
        let mut x = x0.clone();
        assert!(dropout(&mut x, 0.5, Mode::Eval, DropoutKey::default(), 0).is_none());
        assert_eq!(x, x0);
        assert!(dropout(&mut x, 0.0, Mode::Train, DropoutKey::default(), 0).is_none());
        assert_eq!(x, x0);
    }

    #[test]
    fn masks_are_deterministic_per_key() {
        let k = DropoutKey { seed: 3, step: 9 };
        assert_eq!(dropout_mask(50, 0.3, k, 2), dropout_mask(50, 0.3, k, 2));
        assert_ne!(dropout_mask(50, 0.3, k, 2), dropout_mask(50, 0.3, k, 1));
        assert_ne!(dropout_mask(50, 0.3, k, 2), dropout_mask(50, 0.3, DropoutKey { step: 10, ..k }, 2));
    }

    #[test]
    fn expectation_is_preserved() {
        let x = [2.0, -1.0, 0.5];
        let draws = 10_000;
        let mut sum = [0.0; 3];
        for step in 0..draws {
            let mut y = x;
            dropout(&mut y, 0.3, Mode::Train, DropoutKey { seed: 1, step }, 0);
            for (s, v) in sum.iter_mut().zip(y) {
                *s += v;
            }
        }
        for (s, v) in sum.iter().zip(x) {
            let mean = s / draws as f64;
            assert!((mean - v).abs() <= 0.05 * v.abs(), "{mean} vs {v}");
        }
    }
}
