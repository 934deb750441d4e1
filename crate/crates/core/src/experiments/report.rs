use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frontend::FrontEndKind;
use crate::trainer::mean_std;

pub const CSV_HEADER: &str = "experiment,dataset,frontend,config,receptive_field,split,fold,seed,accuracy";

/// One trained-and-scored model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    pub dataset: String,
    pub frontend: FrontEndKind,
    pub config: String,
    pub receptive_field: usize,
    pub split: Option<usize>,
    pub fold: Option<usize>,
    pub seed: u64,
    pub accuracy: f64,
    /// Number of utterances scored.
    pub evaluated: usize,
    /// Number of utterances trained on.
    pub train_size: usize,
}

/// Aggregate over the seeds of one grid cell. For cross-validated cells each
/// seed's accuracy is the fold mean weighted by fold size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub experiment: String,
    pub dataset: String,
    pub frontend: FrontEndKind,
    pub config: String,
    pub receptive_field: usize,
    pub split: Option<usize>,
    /// Utterances per training run (mean over folds when cross-validated).
    pub train_size: usize,
    pub seeds: Vec<u64>,
    pub accuracies: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

/// A published accuracy the desk-scale harness cannot reproduce but records
/// for comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceTarget {
    pub dataset: String,
    pub frontend: FrontEndKind,
    pub config: String,
    pub accuracy: f64,
}

/// Published accuracies with the C5 layout on the three real corpora.
pub fn reference_targets() -> Vec<ReferenceTarget> {
    let table = [
        ("english", [0.9299, 0.9296, 0.9908]),
        ("sinhala", [0.9705, 0.9736, 0.9942]),
        ("tamil", [0.9725, 0.9775, 0.9850]),
    ];
    table
        .iter()
        .flat_map(|(dataset, accs)| {
            FrontEndKind::ALL.iter().zip(accs).map(|(&frontend, &accuracy)| ReferenceTarget {
                dataset: dataset.to_string(),
                frontend,
                config: "C5".into(),
                accuracy,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub rows: Vec<ResultRow>,
    pub notes: Vec<String>,
}

fn cell_key(r: &ResultRow) -> (&str, &str, FrontEndKind, &str, Option<usize>) {
    (&r.experiment, &r.dataset, r.frontend, &r.config, r.split)
}

impl ExperimentReport {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn note(&mut self, note: String) {
        if !self.notes.contains(&note) {
            self.notes.push(note);
        }
    }

    pub fn extend(&mut self, other: ExperimentReport) {
        self.rows.extend(other.rows);
        for n in other.notes {
            self.note(n);
        }
    }

    /// Cells in order of first appearance, seeds in order of appearance.
    pub fn cells(&self) -> Vec<CellSummary> {
        let mut keys = Vec::new();
        for r in &self.rows {
            if !keys.contains(&cell_key(r)) {
                keys.push(cell_key(r));
            }
        }
        keys.into_iter()
            .map(|key| {
                let rows: Vec<&ResultRow> = self.rows.iter().filter(|r| cell_key(r) == key).collect();
                let mut seeds: Vec<u64> = Vec::new();
                for r in &rows {
                    if !seeds.contains(&r.seed) {
                        seeds.push(r.seed);
                    }
                }
                let accuracies: Vec<f64> = seeds
                    .iter()
                    .map(|&s| {
                        let runs: Vec<&&ResultRow> = rows.iter().filter(|r| r.seed == s).collect();
                        let scored: usize = runs.iter().map(|r| r.evaluated).sum();
                        if scored == 0 {
                            runs.iter().map(|r| r.accuracy).sum::<f64>() / runs.len() as f64
                        } else {
                            runs.iter().map(|r| r.accuracy * r.evaluated as f64).sum::<f64>() / scored as f64
                        }
                    })
                    .collect();
                let train_size = rows.iter().map(|r| r.train_size).sum::<usize>() / rows.len();
                let (mean, std) = mean_std(&accuracies);
                let first = rows[0];
                CellSummary {
                    experiment: first.experiment.clone(),
                    dataset: first.dataset.clone(),
                    frontend: first.frontend,
                    config: first.config.clone(),
                    receptive_field: first.receptive_field,
                    split: first.split,
                    train_size,
                    seeds,
                    accuracies,
                    mean,
                    std,
                }
            })
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        let opt = |v: Option<usize>| v.map(|v| v.to_string()).unwrap_or_default();
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.experiment,
                r.dataset,
                r.frontend,
                r.config,
                r.receptive_field,
                opt(r.split),
                opt(r.fold),
                r.seed,
                r.accuracy
            )
            .expect("writing to a string");
        }
        out
    }

    pub fn summary_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Summary<'a> {
            rows: usize,
            notes: &'a [String],
            cells: Vec<CellSummary>,
            reference_targets: Vec<ReferenceTarget>,
        }
        let mut text = serde_json::to_string_pretty(&Summary {
            rows: self.rows.len(),
            notes: &self.notes,
            cells: self.cells(),
            reference_targets: reference_targets(),
        })?;
        text.push('\n');
        Ok(text)
    }
}

/// Path of the JSON summary written next to a CSV report.
pub fn summary_path(csv: &Path) -> PathBuf {
    csv.with_extension("summary.json")
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes the CSV table to `csv` and the per-cell summary beside it.
/// Returns both paths.
pub fn emit_report(report: &ExperimentReport, csv: impl AsRef<Path>) -> Result<(PathBuf, PathBuf)> {
    if report.is_empty() {
        return Err(Error::Invalid("refusing to write an empty report".into()));
    }
    let csv = csv.as_ref();
    write(csv, &report.to_csv())?;
    let summary = summary_path(csv);
    write(&summary, &report.summary_json()?)?;
    Ok((csv.to_path_buf(), summary))
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    write(path, text)
}
