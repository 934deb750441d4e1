//! The named parameter registry.
//!
//! Registry order is fixed: an optional `embedding` table first, then for each
//! layer `l` in 1..=4 the entries `conv{l}.weight`, `conv{l}.bias`,
//! `bn{l}.scale`, `bn{l}.shift`, `bn{l}.running_mean`, `bn{l}.running_var`,
//! and finally `head.weight`, `head.bias`.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::config::{ModelConfig, LAYERS};
use crate::corpus::PAD_ID;
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    Embedding,
    ConvWeight,
    ConvBias,
    BnScale,
    BnShift,
    RunningMean,
    RunningVar,
    LinearWeight,
    LinearBias,
}

impl ParamKind {
    /// Updated by the optimizer.
    pub fn trainable(self) -> bool {
        !matches!(self, Self::RunningMean | Self::RunningVar)
    }

    /// Receives the L2 penalty.
    pub fn decayed(self) -> bool {
        matches!(self, Self::ConvWeight | Self::LinearWeight)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub kind: ParamKind,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Param {
    fn zeros(name: String, kind: ParamKind, shape: Vec<usize>) -> Self {
        let len = shape.iter().product();
        Self {
            name,
            kind,
            shape,
            data: vec![0.0; len],
        }
    }
}

/// Position of an entry in the registry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    Embedding,
    ConvWeight(usize),
    ConvBias(usize),
    BnScale(usize),
    BnShift(usize),
    RunningMean(usize),
    RunningVar(usize),
    HeadWeight,
    HeadBias,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    entries: Vec<Param>,
    has_embedding: bool,
}

/// Gradients, one buffer per registry entry (all zero for running stats).
pub type ModelGrads = ModelParams;

impl ModelParams {
    /// Every entry zero-filled, with the registry's shapes.
    pub fn zeros(cfg: &ModelConfig, embedding_rows: Option<usize>) -> Self {
        let mut entries = Vec::with_capacity(2 + 6 * LAYERS);
        if let Some(rows) = embedding_rows {
            entries.push(Param::zeros(
                "embedding".into(),
                ParamKind::Embedding,
                vec![rows, cfg.input_dim],
            ));
        }
        for l in 0..LAYERS {
            let n = l + 1;
            let c = cfg.channels;
            entries.push(Param::zeros(
                format!("conv{n}.weight"),
                ParamKind::ConvWeight,
                vec![c, cfg.layer_in(l), cfg.kernels[l]],
            ));
            entries.push(Param::zeros(format!("conv{n}.bias"), ParamKind::ConvBias, vec![c]));
            entries.push(Param::zeros(format!("bn{n}.scale"), ParamKind::BnScale, vec![c]));
            entries.push(Param::zeros(format!("bn{n}.shift"), ParamKind::BnShift, vec![c]));
            entries.push(Param::zeros(
                format!("bn{n}.running_mean"),
                ParamKind::RunningMean,
                vec![c],
            ));
            entries.push(Param::zeros(
                format!("bn{n}.running_var"),
                ParamKind::RunningVar,
                vec![c],
            ));
        }
        entries.push(Param::zeros(
            "head.weight".into(),
            ParamKind::LinearWeight,
            vec![cfg.n_classes, cfg.head_in()],
        ));
        entries.push(Param::zeros(
            "head.bias".into(),
            ParamKind::LinearBias,
            vec![cfg.n_classes],
        ));
        Self {
            entries,
            has_embedding: embedding_rows.is_some(),
        }
    }

    /// Rebuilds a registry from entries in registry order.
    pub fn from_entries(cfg: &ModelConfig, entries: Vec<(String, Vec<usize>, Vec<f64>)>) -> Result<Self> {
        let has_embedding = entries.first().is_some_and(|(n, _, _)| n == "embedding");
        let rows = has_embedding.then(|| entries[0].1.first().copied().unwrap_or(0));
        let mut params = Self::zeros(cfg, rows);
        if entries.len() != params.entries.len() {
            return Err(Error::Shape(format!(
                "{} registry entries, expected {}",
                entries.len(),
                params.entries.len()
            )));
        }
        for (slot, (name, shape, data)) in params.entries.iter_mut().zip(entries) {
            if slot.name != name || slot.shape != shape || slot.data.len() != data.len() {
                return Err(Error::Shape(format!(
                    "registry entry {name:?} {shape:?} does not match expected {:?} {:?}",
                    slot.name, slot.shape
                )));
            }
            slot.data = data;
        }
        Ok(params)
    }

    pub fn has_embedding(&self) -> bool {
        self.has_embedding
    }

    pub fn index(&self, slot: Slot) -> usize {
        let base = usize::from(self.has_embedding);
        match slot {
            Slot::Embedding => {
                assert!(self.has_embedding, "registry has no embedding table");
                0
            }
            Slot::ConvWeight(l) => base + 6 * l,
            Slot::ConvBias(l) => base + 6 * l + 1,
            Slot::BnScale(l) => base + 6 * l + 2,
            Slot::BnShift(l) => base + 6 * l + 3,
            Slot::RunningMean(l) => base + 6 * l + 4,
            Slot::RunningVar(l) => base + 6 * l + 5,
            Slot::HeadWeight => base + 6 * LAYERS,
            Slot::HeadBias => base + 6 * LAYERS + 1,
        }
    }

    pub fn get(&self, slot: Slot) -> &[f64] {
        &self.entries[self.index(slot)].data
    }

    pub fn get_mut(&mut self, slot: Slot) -> &mut [f64] {
        let i = self.index(slot);
        &mut self.entries[i].data
    }

    pub fn entries(&self) -> &[Param] {
        &self.entries
    }

    pub fn entries_mut(&mut self) -> &mut [Param] {
        &mut self.entries
    }

    pub fn by_name(&self, name: &str) -> Option<&Param> {
        self.entries.iter().find(|p| p.name == name)
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for e in &mut z.entries {
            e.data.iter_mut().for_each(|v| *v = 0.0);
        }
        z
    }

    /// Total number of trainable scalars.
    pub fn trainable_count(&self) -> usize {
        self.entries
            .iter()
            .filter(|e| e.kind.trainable())
            .map(|e| e.data.len())
            .sum()
    }

    pub fn is_finite(&self) -> bool {
        self.entries.iter().all(|e| e.data.iter().all(|v| v.is_finite()))
    }

    /// Rows of the embedding table, if any.
    pub fn embedding_rows(&self) -> Option<usize> {
        self.has_embedding.then(|| self.entries[0].shape[0])
    }
}

/// He-normal conv/linear weights, zero biases, unit BN scale, unit running
/// variance; the optional phone table is uniform in `[-0.1, 0.1]` with an
/// all-zero padding row.
pub fn init_params(cfg: &ModelConfig, embedding_rows: Option<usize>, seed: u64) -> Result<ModelParams> {
    cfg.validate()?;
    let mut params = ModelParams::zeros(cfg, embedding_rows);
    for (i, e) in params.entries.iter_mut().enumerate() {
        let mut rng = seed::rng(&[seed, i as u64]);
        match e.kind {
            ParamKind::ConvWeight | ParamKind::LinearWeight => {
                let fan_in: usize = e.shape[1..].iter().product();
                let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt())
                    .map_err(|err| Error::Invalid(err.to_string()))?;
                e.data.iter_mut().for_each(|v| *v = normal.sample(&mut rng));
            }
            ParamKind::Embedding => {
                let dim = e.shape[1];
                e.data.iter_mut().for_each(|v| *v = rng.random_range(-0.1..=0.1));
                e.data[PAD_ID * dim..(PAD_ID + 1) * dim].fill(0.0);
            }
            ParamKind::BnScale | ParamKind::RunningVar => e.data.fill(1.0),
            ParamKind::ConvBias | ParamKind::LinearBias | ParamKind::BnShift | ParamKind::RunningMean => {}
        }
    }
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> ModelConfig {
        ModelConfig::new([3, 5, 7, 9], [1, 2, 3, 4], 8, 0.3, 5, 3).unwrap()
    }

    #[test]
    fn registry_order_and_shapes() {
        let p = init_params(&cfg(), Some(7), 0).unwrap();
        let names: Vec<_> = p.entries().iter().map(|e| e.name.as_str()).collect();
        assert_eq!(names[0], "embedding");
        assert_eq!(names[1], "conv1.weight");
        assert_eq!(names[6], "bn1.running_var");
        assert_eq!(names[24], "bn4.running_var");
        assert_eq!(&names[25..], &["head.weight", "head.bias"]);
        assert_eq!(p.entries()[1].shape, vec![8, 5, 3]);
        assert_eq!(p.entries()[19].shape, vec![8, 8, 9]);
        assert_eq!(p.entries()[25].shape, vec![3, 32]);
        assert_eq!(p.index(Slot::HeadBias), 26);
    }

    #[test]
    fn init_is_deterministic() {
        let a = init_params(&cfg(), Some(7), 4).unwrap();
        assert_eq!(a, init_params(&cfg(), Some(7), 4).unwrap());
        assert_ne!(a, init_params(&cfg(), Some(7), 5).unwrap());
    }

    #[test]
    fn init_rules() {
        let p = init_params(&cfg(), Some(7), 1).unwrap();
        assert!(p.get(Slot::BnScale(2)).iter().all(|&v| v == 1.0));
        assert_eq!(p.get(Slot::BnScale(2)).len(), 8);
        assert!(p.get(Slot::BnShift(0)).iter().all(|&v| v == 0.0));
        assert!(p.get(Slot::RunningVar(3)).iter().all(|&v| v == 1.0));
        assert!(p.get(Slot::ConvBias(1)).iter().all(|&v| v == 0.0));
        let emb = p.get(Slot::Embedding);
        assert!(emb[..5].iter().all(|&v| v == 0.0));
        assert!(emb[5..].iter().all(|v| v.abs() <= 0.1));
    }

    #[test]
    fn he_variance() {
        let cfg = ModelConfig::new([3; 4], [1; 4], 256, 0.0, 256, 2).unwrap();
        let p = init_params(&cfg, None, 0).unwrap();
        let w = p.get(Slot::ConvWeight(0));
        assert_eq!(w.len(), 256 * 256 * 3);
        let mean = w.iter().sum::<f64>() / w.len() as f64;
        let var = w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (w.len() - 1) as f64;
        let target = 2.0 / (256.0 * 3.0);
        assert!((var / target - 1.0).abs() < 0.2, "var {var} vs {target}");
    }
}
