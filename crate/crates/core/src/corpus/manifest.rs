use std::collections::HashSet;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{load_embedding_file, write_embedding_file, Dataset, Utterance};
use crate::error::{Error, Result};

/// One manifest line. Unknown fields are ignored on read.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub id: String,
    pub label: String,
    pub phones: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub emb: Option<String>,
}

/// Loads a line-delimited JSON manifest. Embedding paths are resolved
/// relative to the manifest's directory; all embeddings must share one
/// dimension.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Dataset> {
    load_manifest_with_dim(path, None)
}

/// Like [`load_manifest`], but every embedding must have exactly
/// `expected_dim` columns when a dimension is given.
pub fn load_manifest_with_dim(path: impl AsRef<Path>, expected_dim: Option<usize>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let bad_line = |line: usize, message: String| Error::Manifest {
        path: path.into(),
        line,
        message,
    };

    let mut utterances = Vec::new();
    let mut seen = HashSet::new();
    let mut dim = expected_dim;
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: ManifestRecord =
            serde_json::from_str(&line).map_err(|e| bad_line(lineno, e.to_string()))?;
        if record.phones.is_empty() {
            return Err(bad_line(lineno, "empty phone sequence".into()));
        }
        if !seen.insert(record.id.clone()) {
            return Err(bad_line(lineno, format!("duplicate id {:?}", record.id)));
        }
        let mut utt = Utterance::new(record.id, record.label, record.phones);
        if let Some(rel) = record.emb {
            let emb_path = base.join(rel);
            let emb = load_embedding_file(&emb_path)?;
            match dim {
                Some(d) if d != emb.cols() => {
                    return Err(Error::DimensionMismatch {
                        what: format!("{} (line {lineno})", emb_path.display()),
                        expected: d,
                        found: emb.cols(),
                    })
                }
                _ => dim = Some(emb.cols()),
            }
            if !emb.is_finite() {
                return Err(Error::NonFinite(emb_path.display().to_string()));
            }
            utt.emb = Some(emb);
        }
        utterances.push(utt);
    }
    Dataset::new(dataset_name(path), utterances)
}

/// The file stem, or the parent directory's name for a file called
/// `manifest.jsonl`.
fn dataset_name(path: &Path) -> String {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    if stem != "manifest" {
        return stem;
    }
    path.parent()
        .and_then(|p| p.canonicalize().ok())
        .and_then(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
        .unwrap_or(stem)
}

/// Writes `manifest.jsonl` into `dir`, plus one `emb/<id>.allo` file per
/// utterance that carries an embedding. Returns the manifest path.
pub fn write_manifest(dataset: &Dataset, dir: impl AsRef<Path>) -> Result<PathBuf> {
    let dir = dir.as_ref();
    let emb_dir = dir.join("emb");
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    if dataset.iter().any(|u| u.emb.is_some()) {
        fs::create_dir_all(&emb_dir).map_err(|e| Error::io(&emb_dir, e))?;
    }
    let manifest = dir.join("manifest.jsonl");
    let mut out = Vec::new();
    for u in dataset {
        let emb = match &u.emb {
            Some(m) => {
                let rel = format!("emb/{}.allo", u.id);
                write_embedding_file(dir.join(&rel), m)?;
                Some(rel)
            }
            None => None,
        };
        let record = ManifestRecord {
            id: u.id.clone(),
            label: u.label.clone(),
            phones: u.phones.clone(),
            emb,
        };
        serde_json::to_writer(&mut out, &record)?;
        out.push(b'\n');
    }
    let mut f = fs::File::create(&manifest).map_err(|e| Error::io(&manifest, e))?;
    f.write_all(&out).map_err(|e| Error::io(&manifest, e))?;
    Ok(manifest)
}
