//! The training loop, evaluation, multi-seed runs and model persistence.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{build_label_vocab, Dataset, LabelVocab};
use crate::error::{Error, Result};
use crate::frontend::{Encoded, FrontEnd, FrontEndKind, FrontEndOptions};
use crate::net::{
    init_params, loss_and_grads, model_forward, predict, read_checkpoint, write_checkpoint, DropoutKey, Mode,
    ModelConfig, ModelInput, ModelParams,
};
use crate::corpus::{generate_synthetic, FeatureTable, SyntheticSpec};
use crate::frontend::{ALLO_DIM, PHONE_EMBED_DIM};
use crate::optim::{adam_step, grad_check, lr_at, AdamState, GradCheckOptions, GradCheckReport, LR_FINAL, LR_INITIAL};
use crate::seed;

pub const DEFAULT_SEEDS: [u64; 5] = [0, 1, 2, 3, 4];
const EVAL_BATCH: usize = 64;
const INIT_STREAM: u64 = 0x1417;
const DROPOUT_STREAM: u64 = 0xD209;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainHyper {
    pub lr0: f64,
    pub lr_final: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub epochs: usize,
}

impl Default for TrainHyper {
    fn default() -> Self {
        Self {
            lr0: LR_INITIAL,
            lr_final: LR_FINAL,
            weight_decay: 1e-4,
            batch_size: 32,
            epochs: 50,
        }
    }
}

impl TrainHyper {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr0 > self.lr_final && self.lr_final > 0.0) {
            return Err(Error::Invalid("learning rates must satisfy lr0 > lr_final > 0".into()));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::Invalid("batch size and epochs must be at least 1".into()));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::Invalid("weight decay must be finite and non-negative".into()));
        }
        Ok(())
    }
}

/// Everything needed to train one model apart from the data and the seed.
#[derive(Debug, Clone)]
pub struct Setup {
    pub frontend: FrontEndKind,
    pub options: FrontEndOptions,
    pub kernels: [usize; 4],
    pub dilations: [usize; 4],
    pub channels: usize,
    pub dropout_rate: f64,
    pub hyper: TrainHyper,
}

impl Setup {
    pub fn new(frontend: FrontEndKind, kernels: [usize; 4], dilations: [usize; 4]) -> Self {
        Self {
            frontend,
            options: FrontEndOptions::default(),
            kernels,
            dilations,
            channels: 128,
            dropout_rate: 0.3,
            hyper: TrainHyper::default(),
        }
    }

    fn model_config(&self, input_dim: usize, n_classes: usize) -> Result<ModelConfig> {
        ModelConfig::new(
            self.kernels,
            self.dilations,
            self.channels,
            self.dropout_rate,
            input_dim,
            n_classes,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    /// Accuracy of the training-mode predictions seen during the epoch.
    pub train_accuracy: f64,
    pub dev_accuracy: Option<f64>,
}

/// Log of one training run. Equality ignores the wall-clock time.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub seed: u64,
    pub epochs: Vec<EpochRecord>,
    pub steps: usize,
    /// Epoch whose parameters were kept (1-based); the last one without a
    /// dev set.
    pub selected_epoch: usize,
    pub best_dev_accuracy: Option<f64>,
    pub final_dev_accuracy: Option<f64>,
    /// Accuracy on a held-out evaluation set, when one was scored.
    pub eval_accuracy: Option<f64>,
    pub wall_seconds: f64,
}

impl PartialEq for RunRecord {
    fn eq(&self, other: &Self) -> bool {
        self.seed == other.seed
            && self.epochs == other.epochs
            && self.steps == other.steps
            && self.selected_epoch == other.selected_epoch
            && self.best_dev_accuracy == other.best_dev_accuracy
            && self.final_dev_accuracy == other.final_dev_accuracy
            && self.eval_accuracy == other.eval_accuracy
    }
}

/// A fitted front-end together with the network that consumes it.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub frontend: FrontEnd,
    pub config: ModelConfig,
    pub params: ModelParams,
}

fn batch_input(encoded: &[(Encoded, usize)], indices: &[usize]) -> Result<(ModelInput, Vec<usize>)> {
    let items: Vec<&Encoded> = indices.iter().map(|&i| &encoded[i].0).collect();
    let labels = indices.iter().map(|&i| encoded[i].1).collect();
    Ok((ModelInput::from_encoded(&items, 0)?, labels))
}

impl TrainedModel {
    pub fn labels(&self) -> &LabelVocab {
        self.frontend.labels()
    }

    /// Eval-mode logits, one row per utterance in dataset order.
    pub fn logits(&self, d: &Dataset) -> Result<Vec<Vec<f64>>> {
        let encoded: Vec<Encoded> = d.iter().map(|u| self.frontend.encode(u)).collect::<Result<_>>()?;
        let mut out = Vec::with_capacity(encoded.len());
        for chunk in encoded.chunks(EVAL_BATCH) {
            let items: Vec<&Encoded> = chunk.iter().collect();
            let input = ModelInput::from_encoded(&items, 0)?;
            let (logits, _) = model_forward(&input, &self.params, &self.config, Mode::Eval, DropoutKey::default())?;
            out.extend((0..logits.rows()).map(|r| logits.row(r).to_vec()));
        }
        Ok(out)
    }

    /// Predicted class index per utterance.
    pub fn predictions(&self, d: &Dataset) -> Result<Vec<usize>> {
        let encoded: Vec<Encoded> = d.iter().map(|u| self.frontend.encode(u)).collect::<Result<_>>()?;
        let mut out = Vec::with_capacity(encoded.len());
        for chunk in encoded.chunks(EVAL_BATCH) {
            let items: Vec<&Encoded> = chunk.iter().collect();
            let input = ModelInput::from_encoded(&items, 0)?;
            let (logits, _) = model_forward(&input, &self.params, &self.config, Mode::Eval, DropoutKey::default())?;
            out.extend(predict(&logits));
        }
        Ok(out)
    }

    /// Path of the JSON sidecar holding the front-end next to a checkpoint.
    pub fn meta_path(checkpoint: &Path) -> PathBuf {
        checkpoint.with_extension("meta.json")
    }

    /// Writes the checkpoint and its front-end sidecar.
    pub fn save(&self, checkpoint: impl AsRef<Path>) -> Result<()> {
        let checkpoint = checkpoint.as_ref();
        write_checkpoint(checkpoint, &self.config, &self.params)?;
        let meta = Self::meta_path(checkpoint);
        let mut json = serde_json::to_string_pretty(&self.frontend)?;
        json.push('\n');
        fs::write(&meta, json).map_err(|e| Error::io(&meta, e))
    }

    pub fn load(checkpoint: impl AsRef<Path>) -> Result<Self> {
        let checkpoint = checkpoint.as_ref();
        let (config, params) = read_checkpoint(checkpoint)?;
        let meta = Self::meta_path(checkpoint);
        let text = fs::read_to_string(&meta).map_err(|e| Error::io(&meta, e))?;
        let frontend: FrontEnd = serde_json::from_str(&text)?;
        if frontend.input_dim() != config.input_dim || frontend.labels().len() != config.n_classes {
            return Err(Error::Shape(format!(
                "{} does not match the checkpoint's input or class count",
                meta.display()
            )));
        }
        Ok(Self {
            frontend,
            config,
            params,
        })
    }
}

/// Accuracy in eval mode (running statistics, no dropout).
pub fn evaluate(model: &TrainedModel, d: &Dataset) -> Result<f64> {
    if d.is_empty() {
        return Err(Error::Invalid("cannot evaluate on an empty dataset".into()));
    }
    let truth = d
        .iter()
        .map(|u| model.labels().index_of(&u.label))
        .collect::<Result<Vec<_>>>()?;
    let predicted = model.predictions(d)?;
    let correct = truth.iter().zip(&predicted).filter(|(a, b)| a == b).count();
    Ok(correct as f64 / d.len() as f64)
}

/// Trains one model. With a dev set, the parameters of the epoch with the
/// best dev accuracy are returned (earliest on ties); otherwise the final
/// ones.
pub fn train(train_set: &Dataset, dev: Option<&Dataset>, setup: &Setup, seed: u64) -> Result<(TrainedModel, RunRecord)> {
    train_with_labels(train_set, dev, setup, seed, build_label_vocab(train_set))
}

/// [`train`] with a fixed label vocabulary, which may name classes absent
/// from `train_set`.
pub fn train_with_labels(
    train_set: &Dataset,
    dev: Option<&Dataset>,
    setup: &Setup,
    seed: u64,
    labels: LabelVocab,
) -> Result<(TrainedModel, RunRecord)> {
    let started = Instant::now();
    setup.hyper.validate()?;
    for u in train_set {
        labels.index_of(&u.label)?;
    }
    if let Some(dev) = dev {
        for u in dev {
            labels.index_of(&u.label)?;
        }
    }
    let frontend = FrontEnd::fit(setup.frontend, train_set, labels, &setup.options)?;
    let config = setup.model_config(frontend.input_dim(), frontend.labels().len().max(2))?;
    let params = init_params(&config, frontend.phone_rows(), seed::mix(&[seed, INIT_STREAM]))?;
    let encoded = frontend.encode_dataset(train_set)?;
    let mut model = TrainedModel {
        frontend,
        config,
        params,
    };

    let hyper = setup.hyper;
    let n = encoded.len();
    let total_steps = hyper.epochs * n.div_ceil(hyper.batch_size);
    let mut adam = AdamState::new(&model.params);
    let dropout_seed = seed::mix(&[seed, DROPOUT_STREAM]);
    let mut step = 0;
    let mut epochs = Vec::with_capacity(hyper.epochs);
    let mut best: Option<(f64, usize, ModelParams)> = None;

    for epoch in 0..hyper.epochs {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut seed::rng(&[seed, epoch as u64]));
        let (mut loss_sum, mut correct) = (0.0, 0);
        for batch in order.chunks(hyper.batch_size) {
            let diverged = |loss: f64| Error::Diverged { epoch, step, loss };
            let (input, targets) = batch_input(&encoded, batch)?;
            let key = DropoutKey {
                seed: dropout_seed,
                step: step as u64,
            };
            let out = match loss_and_grads(&input, &targets, &model.params, &model.config, key) {
                Ok(out) => out,
                Err(Error::NonFinite(_)) => return Err(diverged(f64::NAN)),
                Err(e) => return Err(e),
            };
            let loss = out.loss;
            if !loss.is_finite() {
                return Err(diverged(loss));
            }
            correct += predict(&out.logits).iter().zip(&targets).filter(|(p, t)| p == t).count();
            loss_sum += loss * batch.len() as f64;
            model.params.update_running_stats(&out.cache);
            let lr = lr_at(step, total_steps, hyper.lr0, hyper.lr_final)?;
            match adam_step(&mut model.params, &out.grads, &mut adam, lr, hyper.weight_decay) {
                Ok(()) => {}
                Err(Error::NonFinite(_)) => return Err(diverged(loss)),
                Err(e) => return Err(e),
            }
            step += 1;
        }
        let dev_accuracy = dev.map(|d| evaluate(&model, d)).transpose()?;
        if let Some(acc) = dev_accuracy {
            if best.as_ref().is_none_or(|(b, _, _)| acc > *b) {
                best = Some((acc, epoch + 1, model.params.clone()));
            }
        }
        epochs.push(EpochRecord {
            epoch: epoch + 1,
            train_loss: loss_sum / n as f64,
            train_accuracy: correct as f64 / n as f64,
            dev_accuracy,
        });
    }

    let final_dev_accuracy = epochs.last().and_then(|e| e.dev_accuracy);
    let (best_dev_accuracy, selected_epoch) = match best {
        Some((acc, epoch, params)) => {
            model.params = params;
            (Some(acc), epoch)
        }
        None => (None, hyper.epochs),
    };
    let record = RunRecord {
        seed,
        epochs,
        steps: step,
        selected_epoch,
        best_dev_accuracy,
        final_dev_accuracy,
        eval_accuracy: None,
        wall_seconds: started.elapsed().as_secs_f64(),
    };
    Ok((model, record))
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedSummary {
    pub mean: f64,
    pub std: f64,
    pub runs: Vec<RunRecord>,
}

/// Trains and scores once per seed. Runs execute on the current rayon pool;
/// results are aggregated in seed order.
pub fn run_seeds(
    train_set: &Dataset,
    dev: Option<&Dataset>,
    eval_set: &Dataset,
    setup: &Setup,
    seeds: &[u64],
) -> Result<SeedSummary> {
    let mut distinct = seeds.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    if seeds.is_empty() || distinct.len() != seeds.len() {
        return Err(Error::Invalid("seeds must be distinct and non-empty".into()));
    }
    let runs = seeds
        .par_iter()
        .map(|&s| {
            let (model, mut record) = train(train_set, dev, setup, s)?;
            record.eval_accuracy = Some(evaluate(&model, eval_set)?);
            Ok(record)
        })
        .collect::<Result<Vec<_>>>()?;
    let accs: Vec<f64> = runs.iter().filter_map(|r| r.eval_accuracy).collect();
    let (mean, std) = mean_std(&accs);
    Ok(SeedSummary { mean, std, runs })
}

/// Appends records as one JSON object per line.
pub fn append_run_log(path: impl AsRef<Path>, records: &[RunRecord]) -> Result<()> {
    let path = path.as_ref();
    let mut file = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    for r in records {
        let line = serde_json::to_string(r)?;
        writeln!(file, "{line}").map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

pub fn read_run_log(path: impl AsRef<Path>) -> Result<Vec<RunRecord>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(Error::from))
        .collect()
}

/// Runs the finite-difference check on a small network fed by `kind` at its
/// full input width: six short utterances, four channels, dilated kernels and
/// a frozen dropout mask.
pub fn gradcheck_micro(kind: FrontEndKind, seed: u64, opts: GradCheckOptions) -> Result<GradCheckReport> {
    let spec = SyntheticSpec {
        n_classes: 3,
        per_class: 2,
        vocab_size: 12,
        signature_len: 3,
        min_len: 5,
        max_len: 8,
        emb_dim: ALLO_DIM,
        noise_sigma: 0.5,
    };
    let data = generate_synthetic(&spec, seed)?;
    let options = FrontEndOptions {
        phone_dim: Some(PHONE_EMBED_DIM),
        table: Some(FeatureTable::synthetic(&spec.phone_inventory(), seed)),
        standardize: false,
    };
    let frontend = FrontEnd::fit(kind, &data, build_label_vocab(&data), &options)?;
    let config = ModelConfig::new([3, 3, 3, 3], [1, 2, 1, 2], 4, 0.3, frontend.input_dim(), 3)?;
    let params = init_params(&config, frontend.phone_rows(), seed)?;
    let encoded = frontend.encode_dataset(&data)?;
    let all: Vec<usize> = (0..encoded.len()).collect();
    let (input, labels) = batch_input(&encoded, &all)?;
    let key = DropoutKey { seed, step: 0 };
    grad_check(
        |p: &ModelParams| loss_and_grads(&input, &labels, p, &config, key).map(|s| (s.loss, s.grads)),
        &params,
        opts,
    )
}
