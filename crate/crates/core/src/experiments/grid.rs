use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::configs::NamedConfig;
use super::report::{ExperimentReport, ResultRow};
use crate::corpus::{build_label_vocab, kfold_split, subsample_per_class, Dataset, FoldPlan};
use crate::error::{Error, Result};
use crate::frontend::FrontEndKind;
use crate::trainer::{evaluate, train, train_with_labels, Setup};

/// How a grid cell is trained and scored.
#[derive(Debug, Clone, Copy)]
pub enum Protocol<'a> {
    /// Train (selecting on `dev` when given) and score on `test`.
    Holdout {
        train: &'a Dataset,
        dev: Option<&'a Dataset>,
        test: &'a Dataset,
    },
    /// k-fold cross-validation with one fixed fold assignment for all cells.
    CrossValidation { data: &'a Dataset, k: usize, fold_seed: u64 },
}

impl Protocol<'_> {
    fn tag(&self) -> String {
        match self {
            Protocol::Holdout { .. } => "holdout".into(),
            Protocol::CrossValidation { k, .. } => format!("cv{k}"),
        }
    }

    fn dataset_name(&self) -> &str {
        match self {
            Protocol::Holdout { train, .. } => train.name(),
            Protocol::CrossValidation { data, .. } => data.name(),
        }
    }
}

fn cell_setup(base: &Setup, frontend: FrontEndKind, config: &NamedConfig) -> Setup {
    Setup {
        frontend,
        kernels: config.kernels,
        dilations: config.dilations,
        ..base.clone()
    }
}

fn check_seeds(seeds: &[u64]) -> Result<()> {
    let mut s = seeds.to_vec();
    s.sort_unstable();
    s.dedup();
    if seeds.is_empty() || s.len() != seeds.len() {
        return Err(Error::Invalid("seeds must be distinct and non-empty".into()));
    }
    Ok(())
}

/// Per-fold outcome of one cross-validation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvPrediction {
    pub id: String,
    pub fold: usize,
    pub truth: String,
    pub predicted: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvOutcome {
    /// Fold accuracies averaged with fold sizes as weights.
    pub mean: f64,
    pub fold_accuracies: Vec<f64>,
    pub fold_sizes: Vec<usize>,
    /// One entry per utterance, in dataset order.
    pub predictions: Vec<CvPrediction>,
}

fn run_fold(d: &Dataset, plan: &FoldPlan, fold: usize, setup: &Setup, seed: u64) -> Result<(f64, Vec<(usize, String)>)> {
    let test_idx = plan.test_indices(fold);
    let train_set = d.select(format!("{}-train{fold}", d.name()), &plan.train_indices(fold))?;
    let test_set = d.select(format!("{}-test{fold}", d.name()), &test_idx)?;
    let (model, _) = train_with_labels(&train_set, None, setup, seed, build_label_vocab(d))?;
    let predicted = model.predictions(&test_set)?;
    let labels = model.labels();
    let accuracy = evaluate(&model, &test_set)?;
    let named = test_idx
        .into_iter()
        .zip(predicted)
        .map(|(i, p)| (i, labels.label(p).to_string()))
        .collect();
    Ok((accuracy, named))
}

/// Trains on all folds but one and scores the held-out fold, for every fold.
/// The same seed drives the fold assignment and every training run. Labels
/// are indexed over the whole corpus, so a class that only occurs in the
/// held-out fold is scored as a miss.
pub fn cross_validate(d: &Dataset, k: usize, setup: &Setup, seed: u64) -> Result<CvOutcome> {
    let plan = kfold_split(d, k, seed)?;
    cross_validate_with_plan(d, &plan, setup, seed)
}

pub fn cross_validate_with_plan(d: &Dataset, plan: &FoldPlan, setup: &Setup, seed: u64) -> Result<CvOutcome> {
    let folds = (0..plan.k())
        .into_par_iter()
        .map(|f| run_fold(d, plan, f, setup, seed))
        .collect::<Result<Vec<_>>>()?;
    let fold_sizes = plan.fold_sizes();
    let mut predictions: Vec<Option<CvPrediction>> = vec![None; d.len()];
    for (f, (_, named)) in folds.iter().enumerate() {
        for (i, label) in named {
            let u = &d.utterances()[*i];
            predictions[*i] = Some(CvPrediction {
                id: u.id.clone(),
                fold: f,
                truth: u.label.clone(),
                predicted: label.clone(),
            });
        }
    }
    let predictions = predictions
        .into_iter()
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| Error::Invalid("fold plan left an utterance unscored".into()))?;
    let fold_accuracies: Vec<f64> = folds.iter().map(|(a, _)| *a).collect();
    let total: usize = fold_sizes.iter().sum();
    let mean = fold_accuracies
        .iter()
        .zip(&fold_sizes)
        .map(|(a, &n)| a * n as f64)
        .sum::<f64>()
        / total as f64;
    Ok(CvOutcome {
        mean,
        fold_accuracies,
        fold_sizes,
        predictions,
    })
}

struct Job<'a> {
    frontend: FrontEndKind,
    config: &'a NamedConfig,
    seed: u64,
    fold: Option<usize>,
}

/// Trains and scores every front-end × config × seed cell (× fold under
/// cross-validation). Cells run on the current rayon pool; rows come back in
/// grid order regardless of scheduling.
pub fn sweep_context(
    protocol: &Protocol,
    frontends: &[FrontEndKind],
    configs: &[NamedConfig],
    base: &Setup,
    seeds: &[u64],
) -> Result<ExperimentReport> {
    if configs.is_empty() || frontends.is_empty() {
        return Err(Error::Invalid("the sweep needs at least one config and one front-end".into()));
    }
    check_seeds(seeds)?;
    let plan = match protocol {
        Protocol::CrossValidation { data, k, fold_seed } => Some(kfold_split(data, *k, *fold_seed)?),
        Protocol::Holdout { .. } => None,
    };
    let folds: Vec<Option<usize>> = match &plan {
        Some(p) => (0..p.k()).map(Some).collect(),
        None => vec![None],
    };
    let mut jobs = Vec::new();
    for &frontend in frontends {
        for config in configs {
            for &seed in seeds {
                for &fold in &folds {
                    jobs.push(Job {
                        frontend,
                        config,
                        seed,
                        fold,
                    });
                }
            }
        }
    }
    let experiment = format!("context-{}", protocol.tag());
    let dataset = protocol.dataset_name().to_string();
    let rows = jobs
        .par_iter()
        .map(|job| {
            let setup = cell_setup(base, job.frontend, job.config);
            let (accuracy, evaluated, train_size) = match (protocol, &plan, job.fold) {
                (Protocol::Holdout { train: t, dev, test }, _, _) => {
                    let (model, _) = train(t, *dev, &setup, job.seed)?;
                    (evaluate(&model, test)?, test.len(), t.len())
                }
                (Protocol::CrossValidation { data, .. }, Some(plan), Some(fold)) => {
                    let (acc, named) = run_fold(data, plan, fold, &setup, job.seed)?;
                    (acc, named.len(), data.len() - named.len())
                }
                _ => unreachable!("fold jobs exist only under cross-validation"),
            };
            Ok(ResultRow {
                experiment: experiment.clone(),
                dataset: dataset.clone(),
                frontend: job.frontend,
                config: job.config.name.clone(),
                receptive_field: job.config.receptive_field(),
                split: None,
                fold: job.fold,
                seed: job.seed,
                accuracy,
                evaluated,
                train_size,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut report = ExperimentReport {
        rows,
        notes: vec![format!("protocol: {}", protocol.tag())],
    };
    for c in configs {
        if let Some(note) = c.context_note() {
            report.note(note);
        }
    }
    Ok(report)
}

pub const DEFAULT_SPLITS: [usize; 5] = [32, 64, 128, 256, 512];

/// Trains on `split` utterances per class drawn from `pool`, for every split,
/// and scores each model on the same `eval` set.
#[allow(clippy::too_many_arguments)]
pub fn sweep_size(
    pool: &Dataset,
    eval: &Dataset,
    splits: &[usize],
    frontends: &[FrontEndKind],
    config: &NamedConfig,
    base: &Setup,
    seeds: &[u64],
    sample_seed: u64,
) -> Result<ExperimentReport> {
    if splits.is_empty() || frontends.is_empty() {
        return Err(Error::Invalid("the size sweep needs splits and front-ends".into()));
    }
    check_seeds(seeds)?;
    let subsets = splits
        .iter()
        .map(|&s| subsample_per_class(pool, s, sample_seed))
        .collect::<Result<Vec<_>>>()?;
    let mut jobs = Vec::new();
    for &frontend in frontends {
        for (i, &split) in splits.iter().enumerate() {
            for &seed in seeds {
                jobs.push((frontend, i, split, seed));
            }
        }
    }
    let rows = jobs
        .par_iter()
        .map(|&(frontend, i, split, seed)| {
            let setup = cell_setup(base, frontend, config);
            let (model, _) = train(&subsets[i], None, &setup, seed)?;
            Ok(ResultRow {
                experiment: "size".into(),
                dataset: pool.name().to_string(),
                frontend,
                config: config.name.clone(),
                receptive_field: config.receptive_field(),
                split: Some(split),
                fold: None,
                seed,
                accuracy: evaluate(&model, eval)?,
                evaluated: eval.len(),
                train_size: subsets[i].len(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut report = ExperimentReport {
        rows,
        notes: vec![format!("evaluation set: {} ({} utterances, fixed across splits)", eval.name(), eval.len())],
    };
    if let Some(note) = config.context_note() {
        report.note(note);
    }
    Ok(report)
}

/// Moves `per_class` utterances of every class into a held-out set and
/// returns `(rest, held_out)`, both in the original order.
pub fn hold_out_per_class(d: &Dataset, per_class: usize, seed: u64) -> Result<(Dataset, Dataset)> {
    let held = subsample_per_class(d, per_class, seed)?;
    let held_ids: std::collections::HashSet<&str> = held.iter().map(|u| u.id.as_str()).collect();
    let rest: Vec<usize> = (0..d.len())
        .filter(|&i| !held_ids.contains(d.utterances()[i].id.as_str()))
        .collect();
    if rest.is_empty() {
        return Err(Error::Invalid("holding out that many leaves nothing to train on".into()));
    }
    let rest = d.select(format!("{}-pool", d.name()), &rest)?;
    let held = held.renamed(format!("{}-heldout", d.name()));
    Ok((rest, held))
}
