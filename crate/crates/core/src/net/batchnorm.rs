//! Batch normalization whose statistics only see valid frames.

use super::Mode;
use crate::error::{Error, Result};
use crate::tensor::BatchTensor;

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

#[derive(Debug, Clone)]
pub struct BnCache {
    xhat: BatchTensor,
    inv_std: Vec<f64>,
    mode: Mode,
    batch_mean: Vec<f64>,
    /// Unbiased variance of the valid frames (biased when only one frame).
    batch_var: Vec<f64>,
}

impl BnCache {
    pub fn batch_mean(&self) -> &[f64] {
        &self.batch_mean
    }

    pub fn batch_var(&self) -> &[f64] {
        &self.batch_var
    }

    /// Adds a per-channel constant to the recorded batch mean, for inputs
    /// whose constant offset was left out before normalising.
    pub(crate) fn shift_batch_mean(&mut self, offset: &[f64]) {
        for (m, o) in self.batch_mean.iter_mut().zip(offset) {
            *m += o;
        }
    }
}

pub fn batchnorm_forward(
    x: &BatchTensor,
    gamma: &[f64],
    beta: &[f64],
    running_mean: &[f64],
    running_var: &[f64],
    mode: Mode,
) -> Result<(BatchTensor, BnCache)> {
    let c = x.channels();
    if [gamma.len(), beta.len(), running_mean.len(), running_var.len()] != [c; 4] {
        return Err(Error::Shape("batch-norm parameter length".into()));
    }
    let n = x.valid_frames();
    if n == 0 {
        return Err(Error::Shape("batch norm over zero valid frames".into()));
    }
    let (mean, inv_std, batch_var) = match mode {
        Mode::Train => {
            let mut mean = vec![0.0; c];
            for b in 0..x.batch() {
                for frame in x.example(b).chunks_exact(c) {
                    for (m, v) in mean.iter_mut().zip(frame) {
                        *m += v;
                    }
                }
            }
            mean.iter_mut().for_each(|m| *m /= n as f64);
            let mut var = vec![0.0; c];
            for b in 0..x.batch() {
                for frame in x.example(b).chunks_exact(c) {
                    for ((s, v), m) in var.iter_mut().zip(frame).zip(&mean) {
                        *s += (v - m) * (v - m);
                    }
                }
            }
            let unbiased: Vec<f64> = var
                .iter()
                .map(|s| s / (n.max(2) - 1) as f64)
                .collect();
            let inv_std: Vec<f64> = var
                .iter()
                .map(|s| 1.0 / (s / n as f64 + BN_EPS).sqrt())
                .collect();
            (mean, inv_std, unbiased)
        }
        Mode::Eval => (
            running_mean.to_vec(),
            running_var.iter().map(|v| 1.0 / (v + BN_EPS).sqrt()).collect(),
            running_var.to_vec(),
        ),
    };
    let mut xhat = x.clone();
    let mut y = x.zeros_like_with_channels(c);
    for b in 0..x.batch() {
        for (xf, yf) in xhat
            .example_mut(b)
            .chunks_exact_mut(c)
            .zip(y.example_mut(b).chunks_exact_mut(c))
        {
            for k in 0..c {
                xf[k] = (xf[k] - mean[k]) * inv_std[k];
                yf[k] = gamma[k] * xf[k] + beta[k];
            }
        }
    }
    Ok((
        y,
        BnCache {
            xhat,
            inv_std,
            mode,
            batch_mean: mean,
            batch_var,
        },
    ))
}

/// Exponential moving average of the batch statistics.
pub fn update_running_stats(running_mean: &mut [f64], running_var: &mut [f64], cache: &BnCache) {
    if cache.mode != Mode::Train {
        return;
    }
    for (r, m) in running_mean.iter_mut().zip(&cache.batch_mean) {
        *r = (1.0 - BN_MOMENTUM) * *r + BN_MOMENTUM * m;
    }
    for (r, v) in running_var.iter_mut().zip(&cache.batch_var) {
        *r = (1.0 - BN_MOMENTUM) * *r + BN_MOMENTUM * v;
    }
}

/// Returns `(dx, dgamma, dbeta)`.
pub fn batchnorm_backward(
    cache: &BnCache,
    gamma: &[f64],
    dy: &BatchTensor,
) -> Result<(BatchTensor, Vec<f64>, Vec<f64>)> {
    let xhat = &cache.xhat;
    if !xhat.same_layout(dy) {
        return Err(Error::Shape("batch-norm upstream gradient does not match cache".into()));
    }
    let c = xhat.channels();
    let n = xhat.valid_frames() as f64;
    let mut dgamma = vec![0.0; c];
    let mut dbeta = vec![0.0; c];
    for b in 0..xhat.batch() {
        for (xf, gf) in xhat.example(b).chunks_exact(c).zip(dy.example(b).chunks_exact(c)) {
            for k in 0..c {
                dbeta[k] += gf[k];
                dgamma[k] += gf[k] * xf[k];
            }
        }
    }
    let mut dx = xhat.zeros_like_with_channels(c);
    for b in 0..xhat.batch() {
        for ((xf, gf), df) in xhat
            .example(b)
            .chunks_exact(c)
            .zip(dy.example(b).chunks_exact(c))
            .zip(dx.example_mut(b).chunks_exact_mut(c))
        {
            for k in 0..c {
                let scale = gamma[k] * cache.inv_std[k];
                df[k] = match cache.mode {
                    Mode::Train => scale * (gf[k] - dbeta[k] / n - xf[k] * dgamma[k] / n),
                    Mode::Eval => scale * gf[k],
                };
            }
        }
    }
    Ok((dx, dgamma, dbeta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Matrix;

    fn batch() -> BatchTensor {
        let a = Matrix::from_vec(6, 3, (0..18).map(|i| (0.7 * i as f64).sin() * 3.0 + 1.0).collect()).unwrap();
        let b = Matrix::from_vec(4, 3, (0..12).map(|i| (1.3 * i as f64).cos() - 2.0).collect()).unwrap();
        BatchTensor::from_sequences(&[&a, &b], 6).unwrap()
    }

    #[test]
    fn train_mode_normalizes_valid_frames() {
        let x = batch();
        let (y, _) = batchnorm_forward(&x, &[1.0; 3], &[0.0; 3], &[0.0; 3], &[1.0; 3], Mode::Train).unwrap();
        assert!(y.masked_frames_are_zero());
        let n = x.valid_frames() as f64;
        for k in 0..3 {
            let vals: Vec<f64> = (0..2)
                .flat_map(|b| y.example(b).chunks_exact(3).map(move |f| f[k]).collect::<Vec<_>>())
                .collect();
            let mean = vals.iter().sum::<f64>() / n;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            assert!(mean.abs() < 1e-5);
            assert!((var - 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn eval_mode_uses_running_stats() {
        let x = batch();
        let (y, _) = batchnorm_forward(&x, &[1.0; 3], &[0.0; 3], &[0.0; 3], &[1.0; 3], Mode::Eval).unwrap();
        let s = (1.0 + BN_EPS).sqrt();
        for (a, b) in y.as_slice().iter().zip(x.as_slice()) {
            assert!((a - b / s).abs() < 1e-15);
        }
    }

    #[test]
    fn running_stats_move_toward_batch() {
        let x = batch();
        let (_, cache) = batchnorm_forward(&x, &[1.0; 3], &[0.0; 3], &[0.0; 3], &[1.0; 3], Mode::Train).unwrap();
        let (mut rm, mut rv) = (vec![0.0; 3], vec![1.0; 3]);
        update_running_stats(&mut rm, &mut rv, &cache);
        for k in 0..3 {
            assert!((rm[k] - 0.1 * cache.batch_mean()[k]).abs() < 1e-15);
            assert!((rv[k] - (0.9 + 0.1 * cache.batch_var()[k])).abs() < 1e-15);
        }
    }

    #[test]
    fn dbeta_is_sum_and_zero_upstream() {
        let x = batch();
        let g = [1.5, -0.5, 2.0];
        let (y, cache) = batchnorm_forward(&x, &g, &[0.0; 3], &[0.0; 3], &[1.0; 3], Mode::Train).unwrap();
        let mut dy = y.clone();
        dy.as_mut_slice().iter_mut().enumerate().for_each(|(i, v)| {
            if *v != 0.0 {
                *v = (i % 5) as f64 - 2.0
            }
        });
        let (_, _, dbeta) = batchnorm_backward(&cache, &g, &dy).unwrap();
        for k in 0..3 {
            let s: f64 = (0..2).flat_map(|b| dy.example(b).chunks_exact(3).map(move |f| f[k]).collect::<Vec<_>>()).sum();
            assert!((dbeta[k] - s).abs() < 1e-12);
        }
        let zero = y.zeros_like_with_channels(3);
        let (dx, dg, db) = batchnorm_backward(&cache, &g, &zero).unwrap();
        assert!(dx.as_slice().iter().chain(&dg).chain(&db).all(|&v| v == 0.0));
    }

    /// 2×6×3 instance, train mode, central differences.
    #[test]
    fn train_gradients_match_finite_differences() {
        let x = batch();
        let gamma = [1.2, 0.7, -0.4];
        let beta = [0.1, 0.0, -0.3];
        let mut r = x.zeros_like_with_channels(3);
        for b in 0..2 {
            for (i, v) in r.example_mut(b).iter_mut().enumerate() {
                *v = (((i * 7 + b * 3) % 11) as f64 - 5.0) / 3.0;
            }
        }
        let loss = |x: &BatchTensor, g: &[f64], be: &[f64]| -> f64 {
            let (y, _) = batchnorm_forward(x, g, be, &[0.0; 3], &[1.0; 3], Mode::Train).unwrap();
            y.as_slice().iter().zip(r.as_slice()).map(|(a, b)| a * b * a).sum()
        };
        // dL/dy = 2 r y for L = Σ r y²
        let (y, cache) = batchnorm_forward(&x, &gamma, &beta, &[0.0; 3], &[1.0; 3], Mode::Train).unwrap();
        let mut dy = y.clone();
        for (d, rv) in dy.as_mut_slice().iter_mut().zip(r.as_slice()) {
            *d *= 2.0 * rv;
        }
        let (dx, dg, db) = batchnorm_backward(&cache, &gamma, &dy).unwrap();
        let h = 1e-5;
        let rel = |a: f64, n: f64| (a - n).abs() / a.abs().max(n.abs()).max(1e-8);
        for b in 0..2 {
            for i in 0..x.example(b).len() {
                let (mut xp, mut xm) = (x.clone(), x.clone());
                xp.example_mut(b)[i] += h;
                xm.example_mut(b)[i] -= h;
                let num = (loss(&xp, &gamma, &beta) - loss(&xm, &gamma, &beta)) / (2.0 * h);
                assert!(rel(dx.example(b)[i], num) < 1e-4, "{} vs {num}", dx.example(b)[i]);
            }
        }
        for k in 0..3 {
            let (mut gp, mut gm) = (gamma, gamma);
            gp[k] += h;
            gm[k] -= h;
            let num = (loss(&x, &gp, &beta) - loss(&x, &gm, &beta)) / (2.0 * h);
            assert!(rel(dg[k], num) < 1e-4);
            let (mut bp, mut bm) = (beta, beta);
            bp[k] += h;
            bm[k] -= h;
            let num = (loss(&x, &gamma, &bp) - loss(&x, &gamma, &bm)) / (2.0 * h);
            assert!(rel(db[k], num) < 1e-4);
        }
    }

    #[test]
    fn single_valid_frame_keeps_variance_positive() {
        let m = Matrix::from_vec(1, 2, vec![3.0, -1.0]).unwrap();
        let x = BatchTensor::from_sequences(&[&m], 3).unwrap();
        let (_, cache) = batchnorm_forward(&x, &[1.0; 2], &[0.0; 2], &[0.0; 2], &[1.0; 2], Mode::Train).unwrap();
        let (mut rm, mut rv) = (vec![0.0; 2], vec![1.0; 2]);
        update_running_stats(&mut rm, &mut rv, &cache);
        assert!(rv.iter().all(|&v| v > 0.0));
    }
}
