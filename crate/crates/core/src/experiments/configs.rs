use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::receptive_field;

/// A kernel/dilation layout for the four conv layers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NamedConfig {
    pub name: String,
    pub kernels: [usize; 4],
    pub dilations: [usize; 4],
    /// Context size listed alongside the standard layouts, where one exists.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub listed_context: Option<usize>,
}

const STANDARD: [(&str, [usize; 4], [usize; 4], usize); 5] = [
    ("C1", [1, 1, 1, 1], [1, 1, 1, 1], 1),
    ("C2", [3, 3, 3, 3], [1, 1, 1, 1], 9),
    ("C3", [3, 3, 3, 3], [1, 2, 3, 4], 17),
    ("C4", [3, 5, 7, 9], [1, 1, 1, 1], 21),
    ("C5", [3, 5, 7, 9], [1, 2, 3, 4], 41),
];

impl NamedConfig {
    /// The five standard layouts C1 to C5.
    pub fn standard() -> Vec<Self> {
        STANDARD
            .iter()
            .map(|&(name, kernels, dilations, listed)| Self {
                name: name.into(),
                kernels,
                dilations,
                listed_context: Some(listed),
            })
            .collect()
    }

    pub fn by_name(name: &str) -> Result<Self> {
        Self::standard()
            .into_iter()
            .find(|c| c.name.eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::Invalid(format!("unknown config {name:?}, expected C1 to C5")))
    }

    pub fn custom(kernels: [usize; 4], dilations: [usize; 4]) -> Self {
        Self {
            name: "custom".into(),
            kernels,
            dilations,
            listed_context: None,
        }
    }

    /// `1 + Σ (k − 1)·d` over the four layers.
    pub fn receptive_field(&self) -> usize {
        receptive_field(&self.kernels, &self.dilations)
    }

    /// Describes a mismatch between the computed and the listed context size.
    pub fn context_note(&self) -> Option<String> {
        let listed = self.listed_context?;
        let computed = self.receptive_field();
        (listed != computed).then(|| {
            format!(
                "{}: kernels {:?} with dilations {:?} give a receptive field of {computed} frames \
                 (1 + sum of (k - 1) * d); the commonly listed context size is {listed}. \
                 The receptive_field column reports the computed value.",
                self.name, self.kernels, self.dilations
            )
        })
    }
}
