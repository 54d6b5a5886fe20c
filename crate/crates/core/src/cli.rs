//! Command-line front end. Every command is a plain function over parsed
//! arguments so it can be driven from tests as well as from `main`.
//!
//! Exit codes: 0 success, 1 validation or check failure, 2 usage error.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::data::{
    generate_synthetic, parse_dataset, save_dataset, split_dataset, AdjacencyOptions, DynamicGraphDataset, Pattern,
    SynthSpec,
};
use crate::error::{Error, Result};
use crate::gtcn::{Activation, AdjacencyMode};
use crate::head::Regularizer;
use crate::training::checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
use crate::training::{
    evaluate, grad_check, train, EpochRecord, FeatureMode, GradCheckReport, GradCheckSpec, Metrics, ModelParams,
    PreparedGraph, TrainConfig, TransformSelection, GRAD_CHECK_TOLERANCE,
};
use crate::transforms::{TransformKind, TransformMatrix};

pub const SPLIT_RATIOS: (f64, f64, f64) = (0.6, 0.2, 0.2);

#[derive(Debug, Parser)]
#[command(name = "mgcn", version, about = "M-product graph convolution for dynamic link-weight estimation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dynamic graph dataset.
    GenSynth(GenSynthArgs),
    /// Train a model and write a checkpoint and a run report.
    Train(TrainArgs),
    /// Recompute metrics of a checkpoint on its dataset.
    Eval(EvalArgs),
    /// Dump a transform matrix as CSV.
    TransformMatrix(TransformMatrixArgs),
    /// Compare analytic gradients with central finite differences.
    GradCheck(GradCheckArgs),
    /// Train every transform scheme over several seeds and tabulate metrics.
    Ablation(AblationArgs),
}

#[derive(Debug, Clone, Args)]
pub struct GenSynthArgs {
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub nodes: u64,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub slots: u64,
    #[arg(long, default_value = "mixed")]
    pub pattern: Pattern,
    #[arg(long, default_value_t = 0.05)]
    pub density: f64,
    #[arg(long, default_value_t = 0.02)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

/// Model and optimizer flags shared by `train` and `ablation`.
#[derive(Debug, Clone, Args)]
pub struct ModelFlags {
    #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u64).range(1..))]
    pub embedding_dim: u64,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub layers: u64,
    #[arg(long, default_value = "per-slot")]
    pub features: FeatureMode,
    #[arg(long, default_value = "sigmoid")]
    pub activation: Activation,
    #[arg(long, default_value = "sym-normalized")]
    pub adjacency: AdjacencyMode,
    #[arg(long)]
    pub binarize: bool,
    #[arg(long)]
    pub symmetrize: bool,
    #[arg(long, default_value_t = 0.01)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub kappa: f64,
    #[arg(long, default_value = "norm")]
    pub regularizer: Regularizer,
    #[arg(long, default_value_t = 1000)]
    pub max_epochs: usize,
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
    pub patience: u64,
}

impl ModelFlags {
    pub fn config(&self, transform: TransformSelection, seed: u64) -> TrainConfig {
        TrainConfig {
            embedding_dim: self.embedding_dim as usize,
            learning_rate: self.learning_rate,
            kappa: self.kappa,
            regularizer: self.regularizer,
            max_epochs: self.max_epochs,
            patience: self.patience as usize,
            seed,
            activation: self.activation,
            adjacency_mode: self.adjacency,
            adjacency: AdjacencyOptions { binarize: self.binarize, symmetrize: self.symmetrize },
            transform,
            features: self.features,
            layers: self.layers as usize,
            ..TrainConfig::default()
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "ensemble")]
    pub transform: TransformSelection,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub model: ModelFlags,
    #[arg(long, default_value = "model.ckpt")]
    pub checkpoint: PathBuf,
    #[arg(long, default_value = "report.txt")]
    pub report: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Accepted for symmetry with `train`; the loss is not recomputed.
    #[arg(long)]
    pub kappa: Option<f64>,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct TransformMatrixArgs {
    #[arg(long)]
    pub kind: TransformKind,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub size: u64,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct GradCheckArgs {
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(2..))]
    pub nodes: u64,
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u64).range(1..))]
    pub features: u64,
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u64).range(1..))]
    pub slots: u64,
    #[arg(long, default_value = "dft")]
    pub transform: TransformSelection,
    #[arg(long, default_value = "per-slot")]
    pub feature_mode: FeatureMode,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub layers: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct AblationArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Number of seeds; runs use seeds `first_seed .. first_seed + seeds`.
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..))]
    pub seeds: u64,
    #[arg(long, default_value_t = 0)]
    pub first_seed: u64,
    #[command(flatten)]
    pub model: ModelFlags,
    #[arg(long, default_value = "ablation.csv")]
    pub out: PathBuf,
}

/// Everything a training or evaluation run reports. The serialized form
/// leaves out the wall-clock time so identical runs produce identical files.
#[derive(Clone, Debug)]
pub struct RunReport {
    pub command: &'static str,
    pub data: PathBuf,
    pub checkpoint: PathBuf,
    pub n_nodes: usize,
    pub n_slots: usize,
    pub split_sizes: (usize, usize, usize),
    pub config: TrainConfig,
    pub best_epoch: Option<usize>,
    pub stopped_early: Option<bool>,
    pub metrics: [(&'static str, Metrics); 3],
    pub history: Vec<EpochRecord>,
    pub wall_clock_seconds: f64,
}

impl RunReport {
    pub fn seed(&self) -> u64 {
        self.config.seed
    }

    pub fn metrics_for(&self, split: &str) -> Option<Metrics> {
        self.metrics.iter().find(|(name, _)| *name == split).map(|(_, m)| *m)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "# mgcn run report").unwrap();
        writeln!(s, "[run]").unwrap();
        writeln!(s, "command={}", self.command).unwrap();
        writeln!(s, "data={}", self.data.display()).unwrap();
        writeln!(s, "checkpoint={}", self.checkpoint.display()).unwrap();
        writeln!(s, "nodes={}", self.n_nodes).unwrap();
        writeln!(s, "slots={}", self.n_slots).unwrap();
        let (a, b, c) = self.split_sizes;
        writeln!(s, "split_sizes={a},{b},{c}").unwrap();
        if let Some(e) = self.best_epoch {
            writeln!(s, "best_epoch={e}").unwrap();
        }
        if let Some(stopped) = self.stopped_early {
            writeln!(s, "stopped_early={stopped}").unwrap();
        }
        writeln!(s, "[config]").unwrap();
        for (k, v) in self.config.to_pairs() {
            writeln!(s, "{k}={v}").unwrap();
        }
        writeln!(s, "[metrics]").unwrap();
        writeln!(s, "split,mae,rmse").unwrap();
        for (name, m) in &self.metrics {
            writeln!(s, "{name},{},{}", m.mae, m.rmse).unwrap();
        }
        if !self.history.is_empty() {
            writeln!(s, "[history]").unwrap();
            writeln!(s, "epoch,train_loss,train_mae,validation_mae").unwrap();
            for r in &self.history {
                writeln!(s, "{},{},{},{}", r.epoch, r.train_loss, r.train_mae, r.validation_mae).unwrap();
            }
        }
        s
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn split_metrics(
    params: &ModelParams,
    graph: &PreparedGraph,
    ds: &DynamicGraphDataset,
) -> Result<[(&'static str, Metrics); 3]> {
    let s = ds.require_splits()?;
    Ok([
        ("train", evaluate(params, graph, &ds.subset(&s.train))?),
        ("validation", evaluate(params, graph, &ds.subset(&s.validation))?),
        ("test", evaluate(params, graph, &ds.subset(&s.test))?),
    ])
}

fn sizes(ds: &DynamicGraphDataset) -> Result<(usize, usize, usize)> {
    let s = ds.require_splits()?;
    Ok((s.train.len(), s.validation.len(), s.test.len()))
}

pub fn cmd_gen_synth(args: &GenSynthArgs) -> Result<DynamicGraphDataset> {
    let spec = SynthSpec {
        nodes: args.nodes as usize,
        slots: args.slots as usize,
        density: args.density,
        pattern: args.pattern,
        noise: args.noise,
        seed: args.seed,
    };
    let ds = generate_synthetic(&spec)?;
    save_dataset(&ds, &args.out)?;
    Ok(ds)
}

pub fn cmd_train(args: &TrainArgs) -> Result<RunReport> {
    let started = Instant::now();
    let config = args.model.config(args.transform, args.seed);
    config.validate()?;
    let ds = split_dataset(&parse_dataset(&args.data)?, SPLIT_RATIOS, config.seed)?;
    let outcome = train(&ds, &config)?;
    let graph = PreparedGraph::new(&ds, &config)?;
    let metrics = split_metrics(&outcome.params, &graph, &ds)?;
    save_checkpoint(
        &Checkpoint { n_nodes: ds.n_nodes(), n_slots: ds.n_slots(), config: config.clone(), params: outcome.params },
        &args.checkpoint,
    )?;
    let report = RunReport {
        command: "train",
        data: args.data.clone(),
        checkpoint: args.checkpoint.clone(),
        n_nodes: ds.n_nodes(),
        n_slots: ds.n_slots(),
        split_sizes: sizes(&ds)?,
        config,
        best_epoch: Some(outcome.best_epoch),
        stopped_early: Some(outcome.stopped_early),
        metrics,
        history: outcome.history,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    };
    write_file(&args.report, &report.to_text())?;
    Ok(report)
}

pub fn cmd_eval(args: &EvalArgs) -> Result<RunReport> {
    let started = Instant::now();
    let ck = load_checkpoint(&args.checkpoint)?;
    let raw = parse_dataset(&args.data)?;
    if raw.n_nodes() != ck.n_nodes {
        return Err(Error::ShapeMismatch { what: "node count", expected: ck.n_nodes, actual: raw.n_nodes() });
    }
    if raw.n_slots() != ck.n_slots {
        return Err(Error::ShapeMismatch { what: "slot count", expected: ck.n_slots, actual: raw.n_slots() });
    }
    let ds = split_dataset(&raw, SPLIT_RATIOS, ck.config.seed)?;
    let graph = PreparedGraph::new(&ds, &ck.config)?;
    let metrics = split_metrics(&ck.params, &graph, &ds)?;
    let report = RunReport {
        command: "eval",
        data: args.data.clone(),
        checkpoint: args.checkpoint.clone(),
        n_nodes: ds.n_nodes(),
        n_slots: ds.n_slots(),
        split_sizes: sizes(&ds)?,
        config: ck.config,
        best_epoch: None,
        stopped_early: None,
        metrics,
        history: Vec::new(),
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    };
    if let Some(path) = &args.report {
        write_file(path, &report.to_text())?;
    }
    Ok(report)
}

fn matrix_csv(m: &TransformMatrix, part: impl Fn(num_complex::Complex64) -> f64) -> String {
    let mut s = String::new();
    for u in 0..m.size() {
        let row: Vec<String> = m.matrix().row(u).iter().map(|v| (part(*v) + 0.0).to_string()).collect();
        writeln!(s, "{}", row.join(",")).unwrap();
    }
    s
}

/// Writes `<kind>_<size>.csv`, or `dft_<size>_real.csv` and
/// `dft_<size>_imag.csv` for the complex DFT matrix. Returns the paths.
pub fn cmd_transform_matrix(args: &TransformMatrixArgs) -> Result<Vec<PathBuf>> {
    let size = args.size as usize;
    let m = TransformMatrix::build(args.kind, size)?;
    let mut written = Vec::new();
    if args.kind == TransformKind::Dft {
        let re = args.out_dir.join(format!("dft_{size}_real.csv"));
        let im = args.out_dir.join(format!("dft_{size}_imag.csv"));
        write_file(&re, &matrix_csv(&m, |v| v.re))?;
        write_file(&im, &matrix_csv(&m, |v| v.im))?;
        written.push(re);
        written.push(im);
    } else {
        let path = args.out_dir.join(format!("{}_{size}.csv", args.kind));
        write_file(&path, &matrix_csv(&m, |v| v.re))?;
        written.push(path);
    }
    Ok(written)
}

pub fn cmd_grad_check(args: &GradCheckArgs) -> Result<GradCheckReport> {
    grad_check(&GradCheckSpec {
        nodes: args.nodes as usize,
        features: args.features as usize,
        slots: args.slots as usize,
        transform: args.transform,
        feature_mode: args.feature_mode,
        layers: args.layers as usize,
        seed: args.seed,
        ..GradCheckSpec::default()
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct AblationRow {
    pub scheme: TransformSelection,
    pub test_mae: Vec<f64>,
    pub test_rmse: Vec<f64>,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

impl AblationRow {
    pub fn mae(&self) -> (f64, f64) {
        mean_std(&self.test_mae)
    }

    pub fn rmse(&self) -> (f64, f64) {
        mean_std(&self.test_rmse)
    }
}

/// Mean and sample standard deviation of test metrics per scheme, plus the
/// relative improvement of each mean over the identity baseline (percent).
pub fn ablation_table(rows: &[AblationRow]) -> String {
    let baseline = rows.iter().find(|r| r.scheme == TransformSelection::Single(TransformKind::Identity));
    let mut s =
        String::from("scheme,mae_mean,mae_std,rmse_mean,rmse_std,mae_gain_vs_identity_pct,rmse_gain_vs_identity_pct\n");
    for r in rows {
        let (mm, ms) = r.mae();
        let (rm, rs) = r.rmse();
        let (gm, gr) = match baseline {
            Some(b) => (100.0 * (b.mae().0 - mm) / b.mae().0, 100.0 * (b.rmse().0 - rm) / b.rmse().0),
            None => (f64::NAN, f64::NAN),
        };
        writeln!(s, "{},{mm:.6},{ms:.6},{rm:.6},{rs:.6},{gm:.3},{gr:.3}", r.scheme).unwrap();
    }
    s
}

/// Trains every scheme on every seed (split and initialization both use the
/// seed); `base` supplies everything except transform and seed. Runs are
/// independent, so they are evaluated in parallel; the results do not depend
/// on scheduling.
pub fn run_ablation(ds: &DynamicGraphDataset, base: &TrainConfig, seeds: &[u64]) -> Result<Vec<AblationRow>> {
    base.validate()?;
    let jobs: Vec<(TransformSelection, u64)> =
        TransformSelection::ALL.iter().flat_map(|&s| seeds.iter().map(move |&seed| (s, seed))).collect();
    let results: Vec<Result<Metrics>> = jobs
        .par_iter()
        .map(|&(scheme, seed)| {
            let config = TrainConfig { transform: scheme, seed, ..base.clone() };
            let split = split_dataset(ds, SPLIT_RATIOS, seed)?;
            let outcome = train(&split, &config)?;
            let graph = PreparedGraph::new(&split, &config)?;
            evaluate(&outcome.params, &graph, &split.subset(&split.require_splits()?.test))
        })
        .collect();
    let mut rows: Vec<AblationRow> = TransformSelection::ALL
        .iter()
        .map(|&scheme| AblationRow { scheme, test_mae: Vec::new(), test_rmse: Vec::new() })
        .collect();
    for ((scheme, _), result) in jobs.iter().zip(results) {
        let m = result?;
        let row = rows.iter_mut().find(|r| r.scheme == *scheme).expect("scheme row exists");
        row.test_mae.push(m.mae);
        row.test_rmse.push(m.rmse);
    }
    Ok(rows)
}

pub fn cmd_ablation(args: &AblationArgs) -> Result<Vec<AblationRow>> {
    let ds = parse_dataset(&args.data)?;
    let seeds: Vec<u64> = (args.first_seed..args.first_seed + args.seeds).collect();
    let rows = run_ablation(&ds, &args.model.config(TransformSelection::Ensemble, args.first_seed), &seeds)?;
    write_file(&args.out, &ablation_table(&rows))?;
    Ok(rows)
}

fn print_metrics(report: &RunReport) {
    for (name, m) in &report.metrics {
        println!("{name:<10} mae={} rmse={}", m.mae, m.rmse);
    }
}

/// Parse `args` and run the selected command; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let outcome: Result<bool> = match &cli.command {
        Command::GenSynth(a) => cmd_gen_synth(a).map(|ds| {
            println!(
                "wrote {} ({} nodes, {} slots, {} observations)",
                a.out.display(),
                ds.n_nodes(),
                ds.n_slots(),
                ds.observations().len()
            );
            true
        }),
        Command::Train(a) => cmd_train(a).map(|r| {
            print_metrics(&r);
            println!(
                "best_epoch={} epochs={} wall_clock_seconds={:.3}",
                r.best_epoch.unwrap_or(0),
                r.history.len(),
                r.wall_clock_seconds
            );
            true
        }),
        Command::Eval(a) => cmd_eval(a).map(|r| {
            if a.kappa.is_some() {
                eprintln!("note: --kappa is ignored by eval");
            }
            print_metrics(&r);
            true
        }),
        Command::TransformMatrix(a) => cmd_transform_matrix(a).map(|paths| {
            for p in paths {
                println!("wrote {}", p.display());
            }
            true
        }),
        Command::GradCheck(a) => cmd_grad_check(a).map(|r| {
            for g in &r.groups {
                println!("{:<16} entries={:<5} max_rel_error={:e}", g.name, g.entries, g.max_relative_error);
            }
            println!(
                "{} max_rel_error={:e} tolerance={:e}",
                if r.passed { "PASS" } else { "FAIL" },
                r.max_relative_error,
                GRAD_CHECK_TOLERANCE
            );
            r.passed
        }),
        Command::Ablation(a) => cmd_ablation(a).map(|rows| {
            print!("{}", ablation_table(&rows));
            true
        }),
    };
    match outcome {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
