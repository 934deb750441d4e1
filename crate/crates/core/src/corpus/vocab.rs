use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{Dataset, Utterance};
use crate::error::{Error, Result};

pub const PAD_ID: usize = 0;
pub const UNK_ID: usize = 1;

/// Intent label → class index, labels sorted lexicographically.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelVocab {
    labels: Vec<String>,
}

impl LabelVocab {
    pub fn from_labels<I, S>(labels: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let set: BTreeSet<String> = labels.into_iter().map(Into::into).collect();
        Self {
            labels: set.into_iter().collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn index(&self, label: &str) -> Option<usize> {
        self.labels
            .binary_search_by(|l| l.as_str().cmp(label))
            .ok()
    }

    pub fn index_of(&self, label: &str) -> Result<usize> {
        self.index(label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    pub fn label(&self, index: usize) -> &str {
        &self.labels[index]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }
}

pub fn build_label_vocab(d: &Dataset) -> LabelVocab {
    LabelVocab::from_labels(d.iter().map(|u| u.label.as_str()))
}

/// Phone symbol → integer id. Ids 0 and 1 are reserved for padding and
/// unknown phones; real phones start at 2 in lexicographic order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhoneVocab {
    phones: Vec<String>,
}

impl PhoneVocab {
    pub fn from_phones<I, S>(phones: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let set: BTreeSet<String> = phones.into_iter().map(Into::into).collect();
        Self {
            phones: set.into_iter().collect(),
        }
    }

    /// Vocabulary size including the two reserved ids.
    pub fn len(&self) -> usize {
        self.phones.len() + 2
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn id(&self, phone: &str) -> usize {
        self.phones
            .binary_search_by(|p| p.as_str().cmp(phone))
            .map_or(UNK_ID, |i| i + 2)
    }

    pub fn phones(&self) -> &[String] {
        &self.phones
    }

    /// Maps each phone of `u`; unseen phones become [`UNK_ID`].
    pub fn encode(&self, u: &Utterance) -> Vec<usize> {
        u.phones.iter().map(|p| self.id(p)).collect()
    }
}

pub fn build_phone_vocab(d: &Dataset) -> PhoneVocab {
    PhoneVocab::from_phones(d.iter().flat_map(|u| u.phones.iter().map(String::as_str)))
}
