//! Dataset ingestion, file formats, vocabularies, splits and the synthetic
//! oracle corpus.

mod allo;
mod folds;
mod manifest;
mod panphone;
mod synthetic;
mod vocab;

pub use allo::{load_embedding_file, write_embedding_file, ALLO_MAGIC, ALLO_VERSION};
pub use folds::{kfold_split, subsample_per_class, FoldPlan};
pub use manifest::{load_manifest, load_manifest_with_dim, write_manifest, ManifestRecord};
pub use panphone::{load_panphone_table, write_panphone_table, FeatureTable, PANPHONE_DIM};
pub use synthetic::{generate_synthetic, SyntheticSpec};
pub use vocab::{build_label_vocab, build_phone_vocab, LabelVocab, PhoneVocab, PAD_ID, UNK_ID};

use std::collections::{BTreeMap, HashSet};

use crate::error::{Error, Result};
use crate::tensor::Matrix;

/// One spoken example: the recognizer's phone string and, optionally, its
/// frame-level acoustic embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct Utterance {
    pub id: String,
    pub label: String,
    pub phones: Vec<String>,
    pub emb: Option<Matrix>,
}

impl Utterance {
    pub fn new(id: impl Into<String>, label: impl Into<String>, phones: Vec<String>) -> Self {
        Self {
            id: id.into(),
            label: label.into(),
            phones,
            emb: None,
        }
    }

    pub fn with_embedding(mut self, emb: Matrix) -> Self {
        self.emb = Some(emb);
        self
    }

    fn validate(&self) -> Result<()> {
        if self.phones.is_empty() {
            return Err(Error::Invalid(format!(
                "utterance {:?} has an empty phone sequence",
                self.id
            )));
        }
        if let Some(emb) = &self.emb {
            if emb.rows() == 0 || emb.cols() == 0 {
                return Err(Error::Invalid(format!(
                    "utterance {:?} has an empty embedding",
                    self.id
                )));
            }
            if !emb.is_finite() {
                return Err(Error::NonFinite(format!("embedding of {:?}", self.id)));
            }
        }
        Ok(())
    }
}

/// An ordered, non-empty collection of utterances with unique ids.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    name: String,
    utterances: Vec<Utterance>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, utterances: Vec<Utterance>) -> Result<Self> {
        if utterances.is_empty() {
            return Err(Error::Invalid("a dataset needs at least one utterance".into()));
        }
        let mut seen = HashSet::with_capacity(utterances.len());
        for u in &utterances {
            u.validate()?;
            if !seen.insert(u.id.as_str()) {
                return Err(Error::DuplicateId(u.id.clone()));
            }
        }
        Ok(Self {
            name: name.into(),
            utterances,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn utterances(&self) -> &[Utterance] {
        &self.utterances
    }

    pub fn len(&self) -> usize {
        self.utterances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.utterances.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Utterance> {
        self.utterances.iter()
    }

    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// The utterances at `indices`, in the given order.
    pub fn select(&self, name: impl Into<String>, indices: &[usize]) -> Result<Self> {
        Self::new(
            name,
            indices.iter().map(|&i| self.utterances[i].clone()).collect(),
        )
    }

    /// Example count per label, labels in lexicographic order.
    pub fn class_counts(&self) -> BTreeMap<&str, usize> {
        let mut counts = BTreeMap::new();
        for u in &self.utterances {
            *counts.entry(u.label.as_str()).or_insert(0) += 1;
        }
        counts
    }

    /// Dimension shared by all attached embeddings, if any are attached.
    pub fn embedding_dim(&self) -> Option<usize> {
        self.utterances
            .iter()
            .find_map(|u| u.emb.as_ref().map(Matrix::cols))
    }
}

impl<'a> IntoIterator for &'a Dataset {
    type Item = &'a Utterance;
    type IntoIter = std::slice::Iter<'a, Utterance>;

    fn into_iter(self) -> Self::IntoIter {
        self.utterances.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn utt(id: &str, label: &str) -> Utterance {
        Utterance::new(id, label, vec!["a".into()])
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let err = Dataset::new("d", vec![utt("x", "a"), utt("x", "b")]).unwrap_err();
        assert!(matches!(err, Error::DuplicateId(id) if id == "x"));
    }

    #[test]
    fn empty_phone_sequence_is_rejected() {
        let u = Utterance::new("x", "a", vec![]);
        assert!(Dataset::new("d", vec![u]).is_err());
    }

    #[test]
    fn non_finite_embedding_is_rejected() {
        let emb = Matrix::from_vec(1, 2, vec![0.0, f64::NAN]).unwrap();
        let u = utt("x", "a").with_embedding(emb);
        assert!(matches!(
            Dataset::new("d", vec![u]),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn class_counts_are_sorted() {
        let d = Dataset::new("d", vec![utt("1", "b"), utt("2", "a"), utt("3", "b")]).unwrap();
        let counts: Vec<_> = d.class_counts().into_iter().collect();
        assert_eq!(counts, vec![("a", 1), ("b", 2)]);
    }
}
