//! A synthetic corpus whose classes differ only in the local order of phones.
//!
//! Every class owns a signature: an ordered run of `signature_len` phones.
//! Classes are packed into groups that share the same signature phones in
//! different permutations, so within a group the phones occur with identical
//! counts and only their order tells classes apart. When more than one group
//! is needed, every utterance also carries the other groups' signature phones
//! as scattered decoys, which keeps each phone's count per utterance
//! independent of the class. The remaining phones are uniform filler.
//!
//! Each frame's embedding is a fixed per-phone prototype plus isotropic
//! Gaussian noise, rounded to single precision so the in-memory corpus equals
//! what the `ALLO` writer puts on disk.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Dataset, Utterance};
use crate::error::{Error, Result};
use crate::seed;
use crate::tensor::Matrix;

const SYMBOLS: &[&str] = &[
    "a", "e", "i", "o", "u", "p", "t", "k", "b", "d", "g", "m", "n", "s", "z", "f", "v", "l", "r",
    "j", "w", "h", "ʃ", "ʒ", "ŋ", "ɲ", "ʈ", "ɖ", "ɾ", "ə", "ɛ", "ɔ", "ɪ", "ʊ", "θ", "ð", "x", "ɣ",
    "ʔ", "ç",
];

fn symbol(i: usize) -> String {
    SYMBOLS
        .get(i)
        .map_or_else(|| format!("x{i}"), |s| s.to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_classes: usize,
    pub per_class: usize,
    pub vocab_size: usize,
    pub signature_len: usize,
    pub min_len: usize,
    pub max_len: usize,
    pub emb_dim: usize,
    pub noise_sigma: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n_classes: 6,
            per_class: 64,
            vocab_size: 18,
            signature_len: 3,
            min_len: 12,
            max_len: 24,
            emb_dim: 16,
            noise_sigma: 0.5,
        }
    }
}

impl SyntheticSpec {
    fn perms_per_group(&self) -> usize {
        (1..=self.signature_len).try_fold(1usize, |acc, k| acc.checked_mul(k)).unwrap_or(usize::MAX)
    }

    fn groups(&self) -> usize {
        self.n_classes.div_ceil(self.perms_per_group())
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Invalid(format!("synthetic spec: {m}")));
        if self.n_classes == 0 || self.per_class == 0 || self.emb_dim == 0 {
            return fail("classes, per-class count and embedding dim must be positive".into());
        }
        if self.signature_len == 0 {
            return fail("signature length must be positive".into());
        }
        if self.vocab_size < 3 * self.n_classes {
            return fail(format!(
                "vocab size {} is below 3 x {} classes",
                self.vocab_size, self.n_classes
            ));
        }
        let signature_phones = self.groups() * self.signature_len;
        if self.vocab_size <= signature_phones {
            return fail(format!(
                "vocab size {} leaves no filler phones after {signature_phones} signature phones",
                self.vocab_size
            ));
        }
        if self.min_len < signature_phones || self.min_len < self.signature_len {
            return fail(format!(
                "minimum length {} cannot hold {signature_phones} signature phones",
                self.min_len
            ));
        }
        if self.max_len < self.min_len {
            return fail("maximum length is below minimum length".into());
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return fail("noise sigma must be finite and non-negative".into());
        }
        Ok(())
    }

    /// All phone symbols the corpus can emit, signature phones first.
    pub fn phone_inventory(&self) -> Vec<String> {
        (0..self.vocab_size).map(symbol).collect()
    }

    pub fn label(class: usize) -> String {
        format!("intent_{class:02}")
    }

    /// Phone-index signature of every class.
    fn signatures(&self) -> Vec<Vec<usize>> {
        let per_group = self.perms_per_group();
        let perms = permutations(self.signature_len, per_group.min(self.n_classes));
        (0..self.n_classes)
            .map(|c| {
                let group = c / per_group;
                perms[c % per_group]
                    .iter()
                    .map(|&p| group * self.signature_len + p)
                    .collect()
            })
            .collect()
    }
}

/// The first `count` permutations of `0..n` in lexicographic order.
fn permutations(n: usize, count: usize) -> Vec<Vec<usize>> {
    let mut current: Vec<usize> = (0..n).collect();
    let mut out = vec![current.clone()];
    while out.len() < count {
        // next lexicographic permutation
        let Some(i) = (1..n).rev().find(|&i| current[i - 1] < current[i]) else {
            break;
        };
        let j = (i..n).rev().find(|&j| current[j] > current[i - 1]).expect("successor exists");
        current.swap(i - 1, j);
        current[i..].reverse();
        out.push(current.clone());
    }
    out
}

fn contains_run(seq: &[usize], run: &[usize]) -> bool {
    seq.windows(run.len()).any(|w| w == run)
}

fn round_f32(v: f64) -> f64 {
    v as f32 as f64
}

/// Generates `n_classes × per_class` utterances. Utterance `i` belongs to
/// class `i mod n_classes` and draws all of its randomness from `(seed, i)`.
pub fn generate_synthetic(spec: &SyntheticSpec, seed: u64) -> Result<Dataset> {
    spec.validate()?;
    let signatures = spec.signatures();
    let groups = spec.groups();
    let sig_phones = groups * spec.signature_len;
    let filler: Vec<usize> = (sig_phones..spec.vocab_size).collect();
    let symbols = spec.phone_inventory();

    let mut proto_rng = seed::rng(&[seed, u64::MAX]);
    let prototypes: Vec<f64> = (0..spec.vocab_size * spec.emb_dim)
        .map(|_| round_f32(StandardNormal.sample(&mut proto_rng)))
        .collect();

    let make = |i: usize| -> Utterance {
        let class = i % spec.n_classes;
        let own_group = class / spec.perms_per_group();
        let mut rng = seed::rng(&[seed, i as u64]);
        let len = rng.random_range(spec.min_len..=spec.max_len);
        let signature = &signatures[class];
        let decoys: Vec<usize> = (0..sig_phones)
            .filter(|p| p / spec.signature_len != own_group)
            .collect();
        let phones = loop {
            let mut body = decoys.clone();
            while body.len() < len - spec.signature_len {
                body.push(filler[rng.random_range(0..filler.len())]);
            }
            body.shuffle(&mut rng);
            let at = rng.random_range(0..=body.len());
            body.splice(at..at, signature.iter().copied());
            let clean = signatures
                .iter()
                .enumerate()
                .all(|(c, s)| c == class || !contains_run(&body, s));
            if clean {
                break body;
            }
        };
        let mut emb = Vec::with_capacity(phones.len() * spec.emb_dim);
        for &p in &phones {
            for d in 0..spec.emb_dim {
                let z: f64 = StandardNormal.sample(&mut rng);
                emb.push(round_f32(prototypes[p * spec.emb_dim + d] + spec.noise_sigma * z));
            }
        }
        Utterance {
            id: format!("syn{i:06}"),
            label: SyntheticSpec::label(class),
            phones: phones.iter().map(|&p| symbols[p].clone()).collect(),
            emb: Some(
                Matrix::from_vec(phones.len(), spec.emb_dim, emb).expect("frame count matches"),
            ),
        }
    };

    let utterances = (0..spec.n_classes * spec.per_class)
        .into_par_iter()
        .map(make)
        .collect();
    Dataset::new("synthetic", utterances)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn spec(n_classes: usize, per_class: usize) -> SyntheticSpec {
        SyntheticSpec {
            n_classes,
            per_class,
            ..SyntheticSpec::default()
        }
    }

    #[test]
    fn counts() {
        let d = generate_synthetic(&spec(6, 512), 0).unwrap();
        assert_eq!(d.len(), 3072);
        assert!(d.class_counts().values().all(|&c| c == 512));
    }

    #[test]
    fn deterministic_and_parallel_safe() {
        let s = spec(6, 20);
        let a = generate_synthetic(&s, 5).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let b = pool.install(|| generate_synthetic(&s, 5).unwrap());
        assert_eq!(a, b);
        assert_ne!(a, generate_synthetic(&s, 6).unwrap());
    }

    #[test]
    fn each_utterance_contains_its_signature_once() {
        let s = SyntheticSpec {
            vocab_size: 30,
            ..spec(9, 30)
        };
        let sigs = s.signatures();
        let symbols = s.phone_inventory();
        let d = generate_synthetic(&s, 1).unwrap();
        for (i, u) in d.iter().enumerate() {
            let ids: Vec<usize> = u
                .phones
                .iter()
                .map(|p| symbols.iter().position(|q| q == p).unwrap())
                .collect();
            for (c, sig) in sigs.iter().enumerate() {
                let hits = ids.windows(sig.len()).filter(|w| w == sig).count();
                assert_eq!(hits, usize::from(c == i % 9), "utterance {i}, class {c}");
            }
        }
    }

    #[test]
    fn zero_noise_frames_equal_prototypes() {
        let s = SyntheticSpec {
            noise_sigma: 0.0,
            ..spec(6, 10)
        };
        let d = generate_synthetic(&s, 2).unwrap();
        let mut proto: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
        for u in &d {
            let emb = u.emb.as_ref().unwrap();
            for (t, p) in u.phones.iter().enumerate() {
                let row = emb.row(t).to_vec();
                let seen = proto.entry(p).or_insert_with(|| row.clone());
                assert_eq!(seen, &row);
            }
        }
    }

    #[test]
    fn invalid_specs() {
        assert!(SyntheticSpec { vocab_size: 17, ..spec(6, 1) }.validate().is_err());
        assert!(SyntheticSpec { min_len: 2, ..spec(6, 1) }.validate().is_err());
        assert!(SyntheticSpec { noise_sigma: -1.0, ..spec(6, 1) }.validate().is_err());
        assert!(SyntheticSpec { per_class: 0, ..spec(6, 1) }.validate().is_err());
    }

    /// Pooled phone histograms per class; total-variation distance between
    /// every pair of classes.
    #[test]
    fn unigram_distributions_match_across_classes() {
        let s = SyntheticSpec {
            per_class: 1700,
            ..spec(6, 0)
        };
        let d = generate_synthetic(&s, 11).unwrap();
        assert!(d.len() >= 10_000);
        let mut hist: BTreeMap<&str, BTreeMap<&str, f64>> = BTreeMap::new();
        for u in &d {
            let h = hist.entry(u.label.as_str()).or_default();
            for p in &u.phones {
                *h.entry(p.as_str()).or_default() += 1.0;
            }
        }
        let normalized: Vec<BTreeMap<&str, f64>> = hist
            .values()
            .map(|h| {
                let total: f64 = h.values().sum();
                h.iter().map(|(k, v)| (*k, v / total)).collect()
            })
            .collect();
        let inventory = s.phone_inventory();
        for a in &normalized {
            for b in &normalized {
                let tv: f64 = inventory
                    .iter()
                    .map(|p| {
                        (a.get(p.as_str()).unwrap_or(&0.0) - b.get(p.as_str()).unwrap_or(&0.0)).abs()
                    })
                    .sum::<f64>()
                    / 2.0;
                assert!(tv < 0.02, "tv = {tv}");
            }
        }
    }

    #[test]
    fn permutation_order() {
        assert_eq!(
            permutations(3, 6),
            vec![
                vec![0, 1, 2],
                vec![0, 2, 1],
                vec![1, 0, 2],
                vec![1, 2, 0],
                vec![2, 0, 1],
                vec![2, 1, 0]
            ]
        );
    }
}
