//! Central-difference verification of analytic gradients.

use rand::seq::index::sample;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::net::{ModelGrads, ModelParams};
use crate::seed;

/// Maximum relative error accepted by the `gradcheck` command.
pub const GRADCHECK_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckOptions {
    pub h: f64,
    /// Coordinates probed per registry entry (all of them if the entry is
    /// smaller).
    pub samples_per_entry: usize,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            h: 1e-4,
            samples_per_entry: 20,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Entry name and flat index of the worst coordinate.
    pub worst: Option<(String, usize)>,
    /// Largest relative error per trainable entry, in registry order.
    pub per_entry: Vec<(String, f64)>,
    pub coordinates: usize,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error < GRADCHECK_TOLERANCE
    }
}

pub fn relative_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-8)
}

fn same(a: &(f64, ModelGrads), b: &(f64, ModelGrads)) -> bool {
    a.0.to_bits() == b.0.to_bits()
        && a.1.entries().iter().zip(b.1.entries()).all(|(x, y)| {
            x.data.iter().zip(&y.data).all(|(p, q)| p.to_bits() == q.to_bits())
        })
}

/// Compares the gradients returned by `f` against central differences of its
/// loss, probing a random subset of each trainable entry.
///
/// `f` must be a pure function of the parameters: it is evaluated twice at the
/// starting point and any disagreement is reported as an error.
pub fn grad_check<F>(f: F, params: &ModelParams, opts: GradCheckOptions) -> Result<GradCheckReport>
where
    F: Fn(&ModelParams) -> Result<(f64, ModelGrads)> + Sync,
{
    if !(opts.h > 0.0 && opts.h.is_finite()) || opts.samples_per_entry == 0 {
        return Err(Error::Invalid("grad check needs h > 0 and at least one sample".into()));
    }
    let first = f(params)?;
    let second = f(params)?;
    if !same(&first, &second) {
        return Err(Error::NonDeterministic {
            first: first.0,
            second: second.0,
        });
    }
    let analytic = first.1;

    let mut probes = Vec::new();
    for (i, e) in params.entries().iter().enumerate() {
        if !e.kind.trainable() {
            continue;
        }
        let len = e.data.len();
        let mut picked: Vec<usize> = if len <= opts.samples_per_entry {
            (0..len).collect()
        } else {
            sample(&mut seed::rng(&[opts.seed, i as u64]), len, opts.samples_per_entry).into_vec()
        };
        picked.sort_unstable();
        probes.extend(picked.into_iter().map(|k| (i, k)));
    }

    let errors = probes
        .par_iter()
        .map(|&(i, k)| {
            let mut p = params.clone();
            let w = p.entries()[i].data[k];
            p.entries_mut()[i].data[k] = w + opts.h;
            let up = f(&p)?.0;
            p.entries_mut()[i].data[k] = w - opts.h;
            let down = f(&p)?.0;
            let numeric = (up - down) / (2.0 * opts.h);
            Ok(relative_error(analytic.entries()[i].data[k], numeric))
        })
        .collect::<Result<Vec<f64>>>()?;

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        per_entry: Vec::new(),
        coordinates: probes.len(),
    };
    for (&(i, k), &err) in probes.iter().zip(&errors) {
        let name = &params.entries()[i].name;
        match report.per_entry.last_mut() {
            Some((n, m)) if n == name => *m = m.max(err),
            _ => report.per_entry.push((name.clone(), err)),
        }
        if err > report.max_rel_error || report.worst.is_none() {
            report.max_rel_error = report.max_rel_error.max(err);
            report.worst = Some((name.clone(), k));
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{init_params, loss_and_grads, DropoutKey, ModelConfig, ModelInput, ParamKind};
    use crate::tensor::{BatchTensor, Matrix};
    use std::sync::atomic::{AtomicUsize, Ordering};

    fn dense_case(kernels: [usize; 4], dilations: [usize; 4]) -> (ModelConfig, ModelParams, ModelInput, Vec<usize>) {
        let cfg = ModelConfig::new(kernels, dilations, 3, 0.3, 4, 3).unwrap();
        let p = init_params(&cfg, None, 3).unwrap();
        let seqs: Vec<Matrix> = [5usize, 7, 6]
            .iter()
            .enumerate()
            .map(|(b, &len)| {
                Matrix::from_vec(len, 4, (0..len * 4).map(|i| ((b * 31 + i) as f64 * 0.73).sin()).collect()).unwrap()
            })
            .collect();
        let refs: Vec<&Matrix> = seqs.iter().collect();
        let x = ModelInput::Dense(BatchTensor::from_sequences(&refs, 0).unwrap());
        (cfg, p, x, vec![0, 2, 1])
    }

    #[test]
    fn dilated_model_passes() {
        let (cfg, p, x, y) = dense_case([3, 3, 3, 3], [1, 2, 1, 2]);
        let key = DropoutKey { seed: 4, step: 1 };
        let f = |q: &ModelParams| loss_and_grads(&x, &y, q, &cfg, key).map(|s| (s.loss, s.grads));
        let r = grad_check(f, &p, GradCheckOptions::default()).unwrap();
        assert!(r.passed(), "{r:?}");
        let expected = p.entries().iter().filter(|e| e.kind.trainable()).count();
        assert_eq!(r.per_entry.len(), expected);
    }

    #[test]
    fn pointwise_model_is_tighter() {
        let (cfg, p, x, y) = dense_case([1; 4], [1; 4]);
        let f = |q: &ModelParams| loss_and_grads(&x, &y, q, &cfg, DropoutKey::default()).map(|s| (s.loss, s.grads));
        let r = grad_check(f, &p, GradCheckOptions::default()).unwrap();
        assert!(r.max_rel_error < 1e-6, "{r:?}");
    }

    #[test]
    fn sign_flipped_conv_gradient_is_caught() {
        let (cfg, p, x, y) = dense_case([3, 3, 3, 3], [1, 2, 1, 2]);
        let f = |q: &ModelParams| {
            let step = loss_and_grads(&x, &y, q, &cfg, DropoutKey::default())?;
            let (l, mut g) = (step.loss, step.grads);
            for e in g.entries_mut() {
                if e.kind == ParamKind::ConvWeight {
                    e.data.iter_mut().for_each(|v| *v = -*v);
                }
            }
            Ok((l, g))
        };
        let r = grad_check(f, &p, GradCheckOptions::default()).unwrap();
        assert!(r.max_rel_error > 0.5, "{r:?}");
        assert!(r.worst.unwrap().0.starts_with("conv"));
    }

    #[test]
    fn impure_closure_is_rejected() {
        let (cfg, p, x, y) = dense_case([3, 3, 3, 3], [1, 1, 1, 1]);
        let calls = AtomicUsize::new(0);
        let f = |q: &ModelParams| {
            let step = loss_and_grads(&x, &y, q, &cfg, DropoutKey::default())?;
            let (l, g) = (step.loss, step.grads);
            Ok((l + calls.fetch_add(1, Ordering::SeqCst) as f64, g))
        };
        assert!(matches!(grad_check(f, &p, GradCheckOptions::default()), Err(Error::NonDeterministic { .. })));
    }

    #[test]
    fn relative_error_floor() {
        assert_eq!(relative_error(0.0, 0.0), 0.0);
        assert!((relative_error(1e-12, 0.0) - 1e-4).abs() < 1e-18);
        assert_eq!(relative_error(2.0, 1.0), 0.5);
    }
}
