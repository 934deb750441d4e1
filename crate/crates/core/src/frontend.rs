//! The three input representations: learned phone embeddings, fixed ternary
//! articulatory features, and frame-level acoustic embeddings.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{
    build_phone_vocab, Dataset, FeatureTable, LabelVocab, PhoneVocab, Utterance, PANPHONE_DIM,
};
use crate::error::{Error, Result};
use crate::tensor::Matrix;

pub const PHONE_EMBED_DIM: usize = 256;
pub const ALLO_DIM: usize = 640;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrontEndKind {
    Phone,
    Panphone,
    Allo,
}

impl FrontEndKind {
    pub const ALL: [FrontEndKind; 3] = [Self::Phone, Self::Panphone, Self::Allo];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Phone => "phone",
            Self::Panphone => "panphone",
            Self::Allo => "allo",
        }
    }
}

impl fmt::Display for FrontEndKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FrontEndKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "phone" => Ok(Self::Phone),
            "panphone" => Ok(Self::Panphone),
            "allo" => Ok(Self::Allo),
            other => Err(Error::Invalid(format!(
                "unknown front-end {other:?} (expected phone, panphone or allo)"
            ))),
        }
    }
}

/// Canonical input width of each front-end.
pub fn frontend_dim(kind: FrontEndKind) -> usize {
    match kind {
        FrontEndKind::Phone => PHONE_EMBED_DIM,
        FrontEndKind::Panphone => PANPHONE_DIM,
        FrontEndKind::Allo => ALLO_DIM,
    }
}

pub fn encode_phones(u: &Utterance, v: &PhoneVocab) -> Vec<usize> {
    v.encode(u)
}

/// Row `t` of the result is row `ids[t]` of the embedding matrix.
pub fn embed_phone_ids(ids: &[usize], m: &Matrix) -> Result<Matrix> {
    let mut out = Matrix::zeros(ids.len(), m.cols());
    for (t, &id) in ids.iter().enumerate() {
        if id >= m.rows() {
            return Err(Error::Shape(format!(
                "phone id {id} outside an embedding table of {} rows",
                m.rows()
            )));
        }
        out.row_mut(t).copy_from_slice(m.row(id));
    }
    Ok(out)
}

/// Phones missing from the table map to the zero vector.
pub fn embed_panphone<S: AsRef<str>>(phones: &[S], table: &FeatureTable) -> Matrix {
    let mut out = Matrix::zeros(phones.len(), PANPHONE_DIM);
    for (t, p) in phones.iter().enumerate() {
        if let Some(row) = table.get(p.as_ref()) {
            for (dst, &v) in out.row_mut(t).iter_mut().zip(row) {
                *dst = f64::from(v);
            }
        }
    }
    out
}

pub fn embed_allo(u: &Utterance) -> Result<Matrix> {
    let emb = u
        .emb
        .as_ref()
        .ok_or_else(|| Error::MissingEmbedding { id: u.id.clone() })?;
    if !emb.is_finite() {
        return Err(Error::NonFinite(format!("embedding of {:?}", u.id)));
    }
    Ok(emb.clone())
}

/// Per-dimension standardization fitted on training frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(d: &Dataset) -> Result<Self> {
        let dim = d
            .embedding_dim()
            .ok_or_else(|| Error::Invalid("no embeddings to standardize".into()))?;
        let mut sum = vec![0.0; dim];
        let mut sq = vec![0.0; dim];
        let mut n = 0usize;
        for u in d {
            let emb = embed_allo(u)?;
            for t in 0..emb.rows() {
                for (k, &v) in emb.row(t).iter().enumerate() {
                    sum[k] += v;
                    sq[k] += v * v;
                }
            }
            n += emb.rows();
        }
        let n = n as f64;
        let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
        let scale = sq
            .iter()
            .zip(&mean)
            .map(|(s, m)| {
                let var = (s / n - m * m).max(0.0);
                if var > 1e-12 {
                    1.0 / var.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Self { mean, scale })
    }

    pub fn apply(&self, m: &mut Matrix) {
        for t in 0..m.rows() {
            for ((v, mu), s) in m.row_mut(t).iter_mut().zip(&self.mean).zip(&self.scale) {
                *v = (*v - mu) * s;
            }
        }
    }
}

/// One utterance after the front-end: either phone ids for the learned
/// lookup, or fixed dense frames.
#[derive(Debug, Clone, PartialEq)]
pub enum Encoded {
    Ids(Vec<usize>),
    Dense(Matrix),
}

impl Encoded {
    pub fn len(&self) -> usize {
        match self {
            Encoded::Ids(ids) => ids.len(),
            Encoded::Dense(m) => m.rows(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A front-end fitted to a training split: label and phone vocabularies plus
/// whatever fixed tables the kind needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontEnd {
    kind: FrontEndKind,
    labels: LabelVocab,
    input_dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    phones: Option<PhoneVocab>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    table: Option<FeatureTable>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    standardizer: Option<Standardizer>,
}

/// Knobs for [`FrontEnd::fit`].
#[derive(Debug, Clone, Default)]
pub struct FrontEndOptions {
    /// Width of the learned phone embedding (default 256).
    pub phone_dim: Option<usize>,
    /// Feature table for the articulatory front-end.
    pub table: Option<FeatureTable>,
    /// Standardize acoustic embeddings with training statistics.
    pub standardize: bool,
}

impl FrontEnd {
    pub fn fit(
        kind: FrontEndKind,
        train: &Dataset,
        labels: LabelVocab,
        options: &FrontEndOptions,
    ) -> Result<Self> {
        let mut fe = Self {
            kind,
            labels,
            input_dim: frontend_dim(kind),
            phones: None,
            table: None,
            standardizer: None,
        };
        match kind {
            FrontEndKind::Phone => {
                fe.phones = Some(build_phone_vocab(train));
                fe.input_dim = options.phone_dim.unwrap_or(PHONE_EMBED_DIM);
            }
            FrontEndKind::Panphone => {
                let table = options.table.as_ref().ok_or_else(|| {
                    Error::Invalid("the panphone front-end needs a feature table".into())
                })?;
                fe.table = Some(table.clone());
            }
            FrontEndKind::Allo => {
                fe.input_dim = train
                    .embedding_dim()
                    .ok_or_else(|| Error::MissingEmbedding {
                        id: train.utterances()[0].id.clone(),
                    })?;
                if options.standardize {
                    fe.standardizer = Some(Standardizer::fit(train)?);
                }
            }
        }
        Ok(fe)
    }

    pub fn kind(&self) -> FrontEndKind {
        self.kind
    }

    pub fn labels(&self) -> &LabelVocab {
        &self.labels
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    /// Rows of the learned embedding table (vocabulary incl. PAD and UNK).
    pub fn phone_rows(&self) -> Option<usize> {
        self.phones.as_ref().map(PhoneVocab::len)
    }

    pub fn phone_vocab(&self) -> Option<&PhoneVocab> {
        self.phones.as_ref()
    }

    pub fn feature_table(&self) -> Option<&FeatureTable> {
        self.table.as_ref()
    }

    pub fn encode(&self, u: &Utterance) -> Result<Encoded> {
        match self.kind {
            FrontEndKind::Phone => {
                let vocab = self.phones.as_ref().expect("phone front-end has a vocabulary");
                Ok(Encoded::Ids(encode_phones(u, vocab)))
            }
            FrontEndKind::Panphone => {
                let table = self.table.as_ref().expect("panphone front-end has a table");
                Ok(Encoded::Dense(embed_panphone(&u.phones, table)))
            }
            FrontEndKind::Allo => {
                let mut m = embed_allo(u)?;
                if m.cols() != self.input_dim {
                    return Err(Error::DimensionMismatch {
                        what: format!("utterance {:?}", u.id),
                        expected: self.input_dim,
                        found: m.cols(),
                    });
                }
                if let Some(s) = &self.standardizer {
                    s.apply(&mut m);
                }
                Ok(Encoded::Dense(m))
            }
        }
    }

    /// Encodes a whole dataset: inputs and class indices.
    pub fn encode_dataset(&self, d: &Dataset) -> Result<Vec<(Encoded, usize)>> {
        d.iter()
            .map(|u| Ok((self.encode(u)?, self.labels.index_of(&u.label)?)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn utt(phones: &[&str]) -> Utterance {
        Utterance::new("u", "x", phones.iter().map(|s| s.to_string()).collect())
    }

    #[test]
    fn dims() {
        assert_eq!(frontend_dim(FrontEndKind::Phone), 256);
        assert_eq!(frontend_dim(FrontEndKind::Panphone), 26);
        assert_eq!(frontend_dim(FrontEndKind::Allo), 640);
    }

    #[test]
    fn phone_encoding_and_unk() {
        let v = PhoneVocab::from_phones(["a", "k"]);
        assert_eq!(encode_phones(&utt(&["a", "k", "a"]), &v), vec![2, 3, 2]);
        assert_eq!(encode_phones(&utt(&["a", "ʈ"]), &v), vec![2, 1]);
    }

    #[test]
    fn lookup_rows() {
        let m = Matrix::from_vec(3, 2, vec![0.0, 0.0, 9.0, 9.0, 1.5, -2.0]).unwrap();
        let pad = embed_phone_ids(&[0], &m).unwrap();
        assert_eq!(pad.row(0), &[0.0, 0.0]);
        let e = embed_phone_ids(&[2, 2], &m).unwrap();
        assert_eq!(e.row(0), m.row(2));
        assert_eq!(e.row(1), m.row(2));
        assert!(embed_phone_ids(&[3], &m).is_err());
    }

    #[test]
    fn panphone_lookup_and_zero_fallback() {
        let table = FeatureTable::synthetic(&["a", "k"], 0);
        let m = embed_panphone(&["a", "q"], &table);
        assert_eq!(m.cols(), 26);
        let a: Vec<f64> = table.get("a").unwrap().iter().map(|&v| f64::from(v)).collect();
        assert_eq!(m.row(0), a.as_slice());
        assert!(m.row(1).iter().all(|&v| v == 0.0));
        assert!(m.as_slice().iter().all(|v| [-1.0, 0.0, 1.0].contains(v)));
    }

    #[test]
    fn allo_passthrough_and_errors() {
        let emb = Matrix::from_vec(5, 640, vec![0.25; 3200]).unwrap();
        let u = utt(&["a"]).with_embedding(emb.clone());
        assert_eq!(embed_allo(&u).unwrap(), emb);
        assert!(matches!(
            embed_allo(&utt(&["a"])),
            Err(Error::MissingEmbedding { id }) if id == "u"
        ));
        let mut bad = emb;
        bad.as_mut_slice()[7] = f64::NAN;
        let u = Utterance { emb: Some(bad), ..utt(&["a"]) };
        assert!(matches!(embed_allo(&u), Err(Error::NonFinite(_))));
    }

    #[test]
    fn kind_parsing() {
        assert_eq!("Allo".parse::<FrontEndKind>().unwrap(), FrontEndKind::Allo);
        assert!("mfcc".parse::<FrontEndKind>().is_err());
    }

    #[test]
    fn standardizer_centers_training_frames() {
        let rows = |v: &[f64]| Matrix::from_vec(v.len(), 1, v.to_vec()).unwrap();
        let d = Dataset::new(
            "d",
            vec![
                Utterance::new("a", "x", vec!["a".into()]).with_embedding(rows(&[1.0, 3.0])),
                Utterance::new("b", "x", vec!["a".into()]).with_embedding(rows(&[5.0, 7.0])),
            ],
        )
        .unwrap();
        let s = Standardizer::fit(&d).unwrap();
        let mut m = rows(&[4.0]);
        s.apply(&mut m);
        assert!(m.get(0, 0).abs() < 1e-12);
    }
}
