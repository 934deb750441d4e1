use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use phonintent::corpus::{
    generate_synthetic, load_manifest_with_dim, load_panphone_table, subsample_per_class, write_manifest,
    write_panphone_table, Dataset, FeatureTable, SyntheticSpec,
};
use phonintent::experiments::{
    cross_validate, emit_plot, emit_report, hold_out_per_class, sweep_context, sweep_size, ExperimentReport,
    NamedConfig, Protocol,
};
use phonintent::frontend::{FrontEndKind, FrontEndOptions};
use phonintent::optim::{GradCheckOptions, GRADCHECK_TOLERANCE};
use phonintent::trainer::{
    append_run_log, evaluate, gradcheck_micro, train, Setup, TrainHyper, TrainedModel,
};

#[derive(Debug)]
struct UsageError(String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

#[derive(Parser, Debug)]
#[command(name = "phonintent", version, about = "Spoken-intent classification over phonetic embeddings")]
struct Cli {
    /// Read `key = value` settings from this file; flags given on the command line win
    #[arg(long, global = true, value_name = "PATH")]
    config_file: Option<PathBuf>,

    /// Worker threads for independent training runs
    #[arg(long, global = true, default_value_t = 1, value_parser = positive)]
    jobs: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic order-discriminative corpus to disk
    Synth(SynthArgs),
    /// Train one model and save its checkpoint
    Train(TrainArgs),
    /// Score a saved checkpoint on a manifest
    Eval(EvalArgs),
    /// k-fold cross-validation of one model setup
    Cv(CvArgs),
    /// Grid over front-ends, layouts and seeds
    SweepContext(SweepContextArgs),
    /// Grid over per-class training-set sizes
    SweepSize(SweepSizeArgs),
    /// Finite-difference check of the analytic gradients on a micro model
    Gradcheck(GradcheckArgs),
}

fn positive(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(v) => Ok(v),
        Err(e) => Err(e.to_string()),
    }
}

fn layout(s: &str) -> Result<[usize; 4], String> {
    let parts: Vec<usize> = s
        .split([',', '-'])
        .map(|p| p.trim().parse::<usize>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<_, _>>()?;
    parts
        .try_into()
        .map_err(|v: Vec<usize>| format!("expected four values, got {}", v.len()))
}

fn frontend(s: &str) -> Result<FrontEndKind, String> {
    s.parse::<FrontEndKind>().map_err(|e| e.to_string())
}

fn config_name(s: &str) -> Result<NamedConfig, String> {
    NamedConfig::by_name(s).map_err(|e| e.to_string())
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// Number of intent classes
    #[arg(long, default_value_t = 6, value_parser = positive)]
    classes: usize,
    /// Utterances per class
    #[arg(long, default_value_t = 64, value_parser = positive)]
    per_class: usize,
    /// Phone inventory size (at least 3 x classes)
    #[arg(long, default_value_t = 18, value_parser = positive)]
    vocab: usize,
    /// Length of each class's ordered phone signature
    #[arg(long, default_value_t = 3, value_parser = positive)]
    signature_len: usize,
    /// Shortest utterance in phones
    #[arg(long, default_value_t = 12, value_parser = positive)]
    min_len: usize,
    /// Longest utterance in phones
    #[arg(long, default_value_t = 24, value_parser = positive)]
    max_len: usize,
    /// Width of the per-frame acoustic embedding
    #[arg(long, default_value_t = 16, value_parser = positive)]
    emb_dim: usize,
    /// Standard deviation of the frame noise
    #[arg(long, default_value_t = 0.5)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory
    #[arg(long, default_value = "synthetic")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct DataArgs {
    /// Training manifest (JSON lines)
    #[arg(long, value_name = "PATH")]
    manifest: PathBuf,
    /// Development manifest used for checkpoint selection
    #[arg(long, value_name = "PATH")]
    dev: Option<PathBuf>,
    /// Test manifest scored after training
    #[arg(long, value_name = "PATH")]
    test: Option<PathBuf>,
    /// Required width of every acoustic embedding
    #[arg(long, value_parser = positive)]
    allo_dim: Option<usize>,
}

#[derive(Args, Debug)]
struct ArchArgs {
    /// Channels in every conv layer
    #[arg(long, default_value_t = 128, value_parser = positive)]
    channels: usize,
    /// Dropout rate after each block and before the head
    #[arg(long, default_value_t = 0.3)]
    dropout: f64,
    /// Width of the learned phone embedding
    #[arg(long, default_value_t = 256, value_parser = positive)]
    phone_dim: usize,
    /// Articulatory feature table (defaults to panphone.tsv beside the manifest)
    #[arg(long, value_name = "PATH")]
    panphone_table: Option<PathBuf>,
    /// Standardize acoustic embeddings with training-set statistics
    #[arg(long)]
    standardize: bool,
    /// Initial learning rate
    #[arg(long, default_value_t = 0.0015)]
    lr: f64,
    /// Learning rate reached at the last step
    #[arg(long, default_value_t = 1e-6)]
    lr_final: f64,
    /// L2 coefficient on conv and linear weights
    #[arg(long, default_value_t = 1e-4)]
    weight_decay: f64,
    #[arg(long, default_value_t = 32, value_parser = positive)]
    batch_size: usize,
    #[arg(long, default_value_t = 50, value_parser = positive)]
    epochs: usize,
}

#[derive(Args, Debug)]
struct LayoutArgs {
    /// Front-end: phone, panphone or allo
    #[arg(long, value_parser = frontend)]
    frontend: FrontEndKind,
    /// Standard layout C1 to C5
    #[arg(long, default_value = "C5", value_parser = config_name, conflicts_with = "kernels")]
    config: NamedConfig,
    /// Explicit kernel sizes, e.g. 3,5,7,9
    #[arg(long, value_parser = layout, requires = "dilations")]
    kernels: Option<[usize; 4]>,
    /// Explicit dilation rates, e.g. 1,2,3,4
    #[arg(long, value_parser = layout, requires = "kernels")]
    dilations: Option<[usize; 4]>,
}

impl LayoutArgs {
    fn named(&self) -> NamedConfig {
        match (self.kernels, self.dilations) {
            (Some(k), Some(d)) => NamedConfig::custom(k, d),
            _ => self.config.clone(),
        }
    }
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    layout: LayoutArgs,
    #[command(flatten)]
    arch: ArchArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory for model.picm, model.meta.json and runs.jsonl
    #[arg(long, default_value = "run")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Checkpoint written by `train`
    #[arg(long, value_name = "PATH")]
    checkpoint: PathBuf,
    #[arg(long, value_name = "PATH")]
    manifest: PathBuf,
    #[arg(long, value_parser = positive)]
    allo_dim: Option<usize>,
    /// Write per-utterance predictions as CSV
    #[arg(long, value_name = "PATH")]
    predictions: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CvArgs {
    #[arg(long, value_name = "PATH")]
    manifest: PathBuf,
    #[arg(long, value_parser = positive)]
    allo_dim: Option<usize>,
    #[command(flatten)]
    layout: LayoutArgs,
    #[command(flatten)]
    arch: ArchArgs,
    /// Number of folds
    #[arg(long, default_value_t = 5, value_parser = positive)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write per-utterance predictions as CSV
    #[arg(long, value_name = "PATH")]
    predictions: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
enum ProtocolArg {
    Holdout,
    Cv,
}

#[derive(Args, Debug)]
struct SweepContextArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    arch: ArchArgs,
    /// Front-ends to compare
    #[arg(long, value_delimiter = ',', value_parser = frontend, default_value = "phone,panphone,allo")]
    frontends: Vec<FrontEndKind>,
    /// Layouts to compare
    #[arg(long, value_delimiter = ',', value_parser = config_name, default_value = "C1,C2,C3,C4,C5")]
    configs: Vec<NamedConfig>,
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4")]
    seeds: Vec<u64>,
    /// holdout needs --test; cv splits the manifest into folds (default: holdout when --test is given)
    #[arg(long, value_enum)]
    protocol: Option<ProtocolArg>,
    /// Folds under cross-validation
    #[arg(long, default_value_t = 5, value_parser = positive)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    fold_seed: u64,
    /// Keep only N training utterances per class before the sweep
    #[arg(long, value_parser = positive)]
    downsample_to: Option<usize>,
    #[arg(long, default_value_t = 0)]
    downsample_seed: u64,
    /// Directory for context.csv, context.summary.json and context.svg
    #[arg(long, default_value = "reports")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SweepSizeArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    arch: ArchArgs,
    #[arg(long, value_delimiter = ',', value_parser = frontend, default_value = "phone,panphone,allo")]
    frontends: Vec<FrontEndKind>,
    #[arg(long, default_value = "C5", value_parser = config_name)]
    config: NamedConfig,
    /// Training utterances per class
    #[arg(long, value_delimiter = ',', default_value = "32,64,128,256,512")]
    splits: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4")]
    seeds: Vec<u64>,
    /// Without --test, hold out this many utterances per class for scoring
    #[arg(long, default_value_t = 128, value_parser = positive)]
    eval_per_class: usize,
    #[arg(long, default_value_t = 0)]
    sample_seed: u64,
    /// Directory for size.csv, size.summary.json and size.svg
    #[arg(long, default_value = "reports")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct GradcheckArgs {
    /// Front-ends to check
    #[arg(long, value_delimiter = ',', value_parser = frontend, default_value = "phone,panphone,allo")]
    frontends: Vec<FrontEndKind>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Central-difference step
    #[arg(long, default_value_t = 1e-4)]
    h: f64,
    /// Coordinates probed per parameter entry
    #[arg(long, default_value_t = 20, value_parser = positive)]
    samples: usize,
}

/// Turns `key = value` lines into flags, skipping keys already given on the
/// command line. `true`/`false` values toggle switches.
fn expand_config_file(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let mut path = None;
    for (i, a) in args.iter().enumerate() {
        let s = a.to_string_lossy();
        if s == "--config-file" {
            path = args.get(i + 1).map(PathBuf::from);
        } else if let Some(p) = s.strip_prefix("--config-file=") {
            path = Some(PathBuf::from(p));
        }
    }
    let Some(path) = path else {
        return Ok(args);
    };
    let text = fs::read_to_string(&path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    let given: Vec<String> = args
        .iter()
        .filter_map(|a| a.to_str())
        .filter_map(|a| a.strip_prefix("--"))
        .map(|a| a.split('=').next().unwrap_or(a).to_string())
        .collect();
    let mut out = args.clone();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| usage(format!("{}:{}: expected `key = value`", path.display(), n + 1)))?;
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        if key.is_empty() {
            return Err(usage(format!("{}:{}: empty key", path.display(), n + 1)));
        }
        if given.contains(&key) {
            continue;
        }
        match value {
            "true" => out.push(format!("--{key}").into()),
            "false" => {}
            _ => {
                out.push(format!("--{key}").into());
                out.push(value.into());
            }
        }
    }
    Ok(out)
}

fn load(path: &Path, allo_dim: Option<usize>) -> Result<Dataset> {
    load_manifest_with_dim(path, allo_dim).with_context(|| format!("loading {}", path.display()))
}

fn feature_table(arch: &ArchArgs, manifest: &Path, needed: bool) -> Result<Option<FeatureTable>> {
    let path = match &arch.panphone_table {
        Some(p) => Some(p.clone()),
        None => {
            let beside = manifest.parent().unwrap_or(Path::new(".")).join("panphone.tsv");
            beside.exists().then_some(beside)
        }
    };
    match path {
        Some(p) if needed => Ok(Some(load_panphone_table(&p).with_context(|| format!("loading {}", p.display()))?)),
        None if needed => Err(usage("the panphone front-end needs --panphone-table")),
        _ => Ok(None),
    }
}

fn setup(arch: &ArchArgs, frontend: FrontEndKind, config: &NamedConfig, table: Option<FeatureTable>) -> Result<Setup> {
    let hyper = TrainHyper {
        lr0: arch.lr,
        lr_final: arch.lr_final,
        weight_decay: arch.weight_decay,
        batch_size: arch.batch_size,
        epochs: arch.epochs,
    };
    hyper.validate().map_err(|e| usage(e.to_string()))?;
    if !(0.0..1.0).contains(&arch.dropout) {
        return Err(usage("--dropout must lie in [0, 1)"));
    }
    if config.kernels.iter().any(|k| k % 2 == 0) || config.dilations.contains(&0) {
        return Err(usage("kernel sizes must be odd and dilations positive"));
    }
    Ok(Setup {
        frontend,
        options: FrontEndOptions {
            phone_dim: Some(arch.phone_dim),
            table,
            standardize: arch.standardize,
        },
        kernels: config.kernels,
        dilations: config.dilations,
        channels: arch.channels,
        dropout_rate: arch.dropout,
        hyper,
    })
}

fn write_predictions(path: &Path, d: &Dataset, predicted: &[String]) -> Result<()> {
    let mut csv = String::from("id,label,predicted\n");
    for (u, p) in d.iter().zip(predicted) {
        csv.push_str(&format!("{},{},{}\n", u.id, u.label, p));
    }
    fs::write(path, csv).with_context(|| format!("writing {}", path.display()))
}

fn cmd_synth(a: &SynthArgs) -> Result<()> {
    let spec = SyntheticSpec {
        n_classes: a.classes,
        per_class: a.per_class,
        vocab_size: a.vocab,
        signature_len: a.signature_len,
        min_len: a.min_len,
        max_len: a.max_len,
        emb_dim: a.emb_dim,
        noise_sigma: a.noise,
    };
    spec.validate().map_err(|e| usage(e.to_string()))?;
    let d = generate_synthetic(&spec, a.seed)?;
    let manifest = write_manifest(&d, &a.out)?;
    let table = FeatureTable::synthetic(&spec.phone_inventory(), a.seed);
    write_panphone_table(a.out.join("panphone.tsv"), &table)?;
    println!("utterances={}", d.len());
    println!("classes={}", d.class_counts().len());
    println!("manifest={}", manifest.display());
    Ok(())
}

fn cmd_train(a: &TrainArgs) -> Result<()> {
    let train_set = load(&a.data.manifest, a.data.allo_dim)?;
    let dev = a.data.dev.as_deref().map(|p| load(p, a.data.allo_dim)).transpose()?;
    let test = a.data.test.as_deref().map(|p| load(p, a.data.allo_dim)).transpose()?;
    let needs_table = a.layout.frontend == FrontEndKind::Panphone;
    let table = feature_table(&a.arch, &a.data.manifest, needs_table)?;
    let s = setup(&a.arch, a.layout.frontend, &a.layout.named(), table)?;
    let (model, mut record) = train(&train_set, dev.as_ref(), &s, a.seed)?;
    for e in &record.epochs {
        let dev = e.dev_accuracy.map(|v| format!(" dev_accuracy={v}")).unwrap_or_default();
        println!("epoch={} loss={:.6} train_accuracy={}{dev}", e.epoch, e.train_loss, e.train_accuracy);
    }
    let headline = match (&test, record.best_dev_accuracy) {
        (Some(t), _) => {
            let acc = evaluate(&model, t)?;
            record.eval_accuracy = Some(acc);
            acc
        }
        (None, Some(dev)) => dev,
        (None, None) => evaluate(&model, &train_set)?,
    };
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let checkpoint = a.out.join("model.picm");
    model.save(&checkpoint)?;
    append_run_log(a.out.join("runs.jsonl"), std::slice::from_ref(&record))?;
    println!("selected_epoch={}", record.selected_epoch);
    println!("checkpoint={}", checkpoint.display());
    println!("accuracy={headline}");
    Ok(())
}

fn cmd_eval(a: &EvalArgs) -> Result<()> {
    let model = TrainedModel::load(&a.checkpoint).with_context(|| format!("loading {}", a.checkpoint.display()))?;
    let d = load(&a.manifest, a.allo_dim)?;
    let acc = evaluate(&model, &d)?;
    if let Some(path) = &a.predictions {
        let labels = model.labels();
        let named: Vec<String> = model.predictions(&d)?.into_iter().map(|p| labels.label(p).to_string()).collect();
        write_predictions(path, &d, &named)?;
    }
    println!("utterances={}", d.len());
    println!("accuracy={acc}");
    Ok(())
}

fn cmd_cv(a: &CvArgs) -> Result<()> {
    let d = load(&a.manifest, a.allo_dim)?;
    if a.k < 2 || a.k > d.len() {
        return Err(usage(format!("--k must lie in [2, {}]", d.len())));
    }
    let table = feature_table(&a.arch, &a.manifest, a.layout.frontend == FrontEndKind::Panphone)?;
    let s = setup(&a.arch, a.layout.frontend, &a.layout.named(), table)?;
    let out = cross_validate(&d, a.k, &s, a.seed)?;
    for (f, (acc, n)) in out.fold_accuracies.iter().zip(&out.fold_sizes).enumerate() {
        println!("fold={f} size={n} accuracy_fold={acc}");
    }
    if let Some(path) = &a.predictions {
        let named: Vec<String> = out.predictions.iter().map(|p| p.predicted.clone()).collect();
        write_predictions(path, &d, &named)?;
    }
    println!("accuracy={}", out.mean);
    Ok(())
}

fn finish_report(report: &ExperimentReport, out: &Path, stem: &str) -> Result<()> {
    let (csv, summary) = emit_report(report, out.join(format!("{stem}.csv")))?;
    let plot = out.join(format!("{stem}.svg"));
    emit_plot(report, &plot)?;
    for note in &report.notes {
        println!("note: {note}");
    }
    let cells = report.cells();
    for c in &cells {
        let split = c.split.map(|s| format!(" split={s} train_size={}", c.train_size)).unwrap_or_default();
        println!(
            "cell frontend={} config={} receptive_field={}{split} mean={} std={}",
            c.frontend, c.config, c.receptive_field, c.mean, c.std
        );
    }
    println!("report={}", csv.display());
    println!("summary={}", summary.display());
    println!("plot={}", plot.display());
    let best = cells.iter().map(|c| c.mean).fold(f64::NEG_INFINITY, f64::max);
    println!("accuracy={best}");
    Ok(())
}

fn cmd_sweep_context(a: &SweepContextArgs) -> Result<()> {
    let mut data = load(&a.data.manifest, a.data.allo_dim)?;
    if let Some(n) = a.downsample_to {
        data = subsample_per_class(&data, n, a.downsample_seed)?;
    }
    let dev = a.data.dev.as_deref().map(|p| load(p, a.data.allo_dim)).transpose()?;
    let test = a.data.test.as_deref().map(|p| load(p, a.data.allo_dim)).transpose()?;
    let protocol = a
        .protocol
        .unwrap_or(if test.is_some() { ProtocolArg::Holdout } else { ProtocolArg::Cv });
    let needs_table = a.frontends.contains(&FrontEndKind::Panphone);
    let table = feature_table(&a.arch, &a.data.manifest, needs_table)?;
    let base = setup(&a.arch, FrontEndKind::Allo, &a.configs[0], table)?;
    let protocol = match protocol {
        ProtocolArg::Holdout => Protocol::Holdout {
            train: &data,
            dev: dev.as_ref(),
            test: test.as_ref().ok_or_else(|| usage("the holdout protocol needs --test"))?,
        },
        ProtocolArg::Cv => {
            if a.k < 2 || a.k > data.len() {
                return Err(usage(format!("--k must lie in [2, {}]", data.len())));
            }
            Protocol::CrossValidation {
                data: &data,
                k: a.k,
                fold_seed: a.fold_seed,
            }
        }
    };
    let report = sweep_context(&protocol, &a.frontends, &a.configs, &base, &a.seeds)?;
    finish_report(&report, &a.out, "context")
}

fn cmd_sweep_size(a: &SweepSizeArgs) -> Result<()> {
    let data = load(&a.data.manifest, a.data.allo_dim)?;
    let (pool, eval) = match &a.data.test {
        Some(p) => (data, load(p, a.data.allo_dim)?),
        None => hold_out_per_class(&data, a.eval_per_class, a.sample_seed)?,
    };
    let needs_table = a.frontends.contains(&FrontEndKind::Panphone);
    let table = feature_table(&a.arch, &a.data.manifest, needs_table)?;
    let base = setup(&a.arch, FrontEndKind::Allo, &a.config, table)?;
    let report = sweep_size(&pool, &eval, &a.splits, &a.frontends, &a.config, &base, &a.seeds, a.sample_seed)?;
    finish_report(&report, &a.out, "size")
}

fn cmd_gradcheck(a: &GradcheckArgs) -> Result<bool> {
    if !(a.h > 0.0 && a.h.is_finite()) {
        return Err(usage("--h must be positive"));
    }
    let opts = GradCheckOptions {
        h: a.h,
        samples_per_entry: a.samples,
        seed: a.seed,
    };
    let mut worst = 0.0f64;
    for &kind in &a.frontends {
        let r = gradcheck_micro(kind, a.seed, opts)?;
        let (name, index) = r.worst.clone().unwrap_or_default();
        println!(
            "frontend={kind} coordinates={} max_rel_error={:e} worst={name}[{index}]",
            r.coordinates, r.max_rel_error
        );
        worst = worst.max(r.max_rel_error);
    }
    println!("max_rel_error={worst:e}");
    Ok(worst < GRADCHECK_TOLERANCE)
}

fn run(cli: Cli) -> Result<ExitCode> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs)
        .build()
        .context("starting the worker pool")?;
    pool.install(|| {
        match &cli.command {
            Command::Synth(a) => cmd_synth(a)?,
            Command::Train(a) => cmd_train(a)?,
            Command::Eval(a) => cmd_eval(a)?,
            Command::Cv(a) => cmd_cv(a)?,
            Command::SweepContext(a) => cmd_sweep_context(a)?,
            Command::SweepSize(a) => cmd_sweep_size(a)?,
            Command::Gradcheck(a) => {
                if !cmd_gradcheck(a)? {
                    eprintln!("error: gradient check exceeded {GRADCHECK_TOLERANCE:e}");
                    return Ok(ExitCode::from(1));
                }
            }
        }
        Ok(ExitCode::SUCCESS)
    })
}

fn main() -> ExitCode {
    let args = match expand_config_file(std::env::args_os().collect()) {
        Ok(args) => args,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let cli = Cli::parse_from(args);
    match run(cli) {
        Ok(code) => code,
        Err(e) if e.is::<UsageError>() => {
            eprintln!("error: {e}");
            eprintln!("Run with --help for usage.");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn os(args: &[&str]) -> Vec<OsString> {
        args.iter().map(OsString::from).collect()
    }

    #[test]
    fn value_parsers() {
        assert_eq!(positive("3"), Ok(3));
        assert!(positive("0").is_err());
        assert!(positive("-1").is_err());
        assert_eq!(layout("3,5,7,9"), Ok([3, 5, 7, 9]));
        assert!(layout("3,5,7").is_err());
        assert_eq!(frontend("allo"), Ok(FrontEndKind::Allo));
        assert_eq!(config_name("c3").unwrap().receptive_field(), 21);
    }

    #[test]
    fn config_file_appends_only_missing_keys() {
        let dir = tempfile::tempdir().unwrap();
        let conf = dir.path().join("c.conf");
        fs::write(&conf, "epochs = 7  # short\nstandardize = true\nno_thing = false\nper_class = 9\n").unwrap();
        let c = conf.to_str().unwrap();
        let out = expand_config_file(os(&["x", "--config-file", c, "train", "--per-class=2"])).unwrap();
        assert_eq!(
            out,
            os(&["x", "--config-file", c, "train", "--per-class=2", "--epochs", "7", "--standardize"])
        );
    }

    #[test]
    fn config_file_errors_are_usage_errors() {
        let dir = tempfile::tempdir().unwrap();
        let conf = dir.path().join("c.conf");
        fs::write(&conf, "just words\n").unwrap();
        let e = expand_config_file(os(&["x", &format!("--config-file={}", conf.display())])).unwrap_err();
        assert!(e.downcast_ref::<UsageError>().is_some());
        let missing = dir.path().join("none.conf");
        let e = expand_config_file(os(&["x", "--config-file", missing.to_str().unwrap()])).unwrap_err();
        assert!(e.downcast_ref::<UsageError>().is_some());
    }

    #[test]
    fn no_config_file_is_identity() {
        let args = os(&["x", "gradcheck", "--seed", "2"]);
        assert_eq!(expand_config_file(args.clone()).unwrap(), args);
    }
}
