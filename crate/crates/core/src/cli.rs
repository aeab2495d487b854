//! Experiment harness: configuration parsing, training runs over seed grids,
//! comparison tables, the descent check, and dataset generation.
//!
//! Subcommands: `run`, `compare`, `descent-check`, `gen-data`. Exit code 0 on
//! success, 2 on configuration errors, 3 on a failed check. The environment
//! variable `GDOD_OUT_DIR` overrides the output directory.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};

use crate::combiners::{combine, CombinerConfig, GradientBundle};
use crate::data::{generate_synthetic, load_csv, split, write_csv, MultiTaskDataset, SyntheticSpec};
use crate::error::{Error, Result};
use crate::metrics::{auc, logloss};
use crate::model::{
    train_step, LossWeights, ModelShape, OptKind, SharedBottomModel, TrainState,
};
use crate::numerics::{Matrix, Rng};

/// Where the training data comes from.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetSpec {
    Synthetic(SyntheticSpec),
    Csv { path: String, num_features: usize, num_tasks: usize },
}

/// One full experiment: dataset × model profile × combiner × optimizer,
/// repeated over a list of seeds.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ExperimentConfig {
    pub dataset: DatasetSpec,
    /// "desk" | "paper"
    #[serde(default = "default_profile")]
    pub model_profile: String,
    pub combiner: CombinerConfig,
    /// Per-task loss weights; defaults to all ones.
    #[serde(default)]
    pub task_weights: Option<Vec<f64>>,
    /// Learnable uncertainty weighting instead of fixed task weights.
    #[serde(default)]
    pub uncertainty_weighting: bool,
    /// "adam" | "sgd"
    #[serde(default = "default_optimizer")]
    pub optimizer: String,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    #[serde(default)]
    pub output_dir: Option<String>,
}

fn default_profile() -> String {
    "desk".into()
}

fn default_optimizer() -> String {
    "adam".into()
}

fn default_lr() -> f64 {
    1e-3
}

fn default_batch() -> usize {
    256
}

fn default_epochs() -> usize {
    10
}

fn default_seeds() -> Vec<u64> {
    vec![1, 2, 3, 4, 5]
}

fn default_test_fraction() -> f64 {
    0.2
}

impl ExperimentConfig {
    /// The desk profile: small synthetic two-task problem trainable in
    /// seconds (N=10 000, F=16, K=2, ρ=0.2, batch 256, γ=1e-3, Adam,
    /// 10 epochs, seeds 1–5).
    pub fn desk(combiner: CombinerConfig) -> Self {
        Self {
            dataset: DatasetSpec::Synthetic(SyntheticSpec {
                n: 10_000,
                num_features: 16,
                num_tasks: 2,
                correlation: 0.2,
                nonlinearity: 0.5,
                seed: 0,
            }),
            model_profile: default_profile(),
            combiner,
            task_weights: None,
            uncertainty_weighting: false,
            optimizer: default_optimizer(),
            learning_rate: default_lr(),
            batch_size: default_batch(),
            epochs: default_epochs(),
            seeds: default_seeds(),
            test_fraction: default_test_fraction(),
            output_dir: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds list must be non-empty".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be positive and finite".into()));
        }
        match self.model_profile.as_str() {
            "desk" | "paper" => {}
            other => return Err(Error::Config(format!("unknown model profile '{other}'"))),
        }
        self.opt_kind()?;
        if let Some(w) = &self.task_weights {
            if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::Config("task_weights must be finite and non-negative".into()));
            }
        }
        Ok(())
    }

    fn opt_kind(&self) -> Result<OptKind> {
        match self.optimizer.as_str() {
            "adam" => Ok(OptKind::Adam),
            "sgd" => Ok(OptKind::Sgd),
            other => Err(Error::Config(format!("unknown optimizer '{other}'"))),
        }
    }

    fn shape(&self, input: usize, tasks: usize) -> ModelShape {
        match self.model_profile.as_str() {
            "paper" => ModelShape::paper(input, tasks),
            _ => ModelShape::desk(input, tasks),
        }
    }

    fn loss_weights(&self, tasks: usize) -> Result<LossWeights> {
        if self.uncertainty_weighting {
            return Ok(LossWeights::Uncertainty(vec![0.0; tasks]));
        }
        match &self.task_weights {
            None => Ok(LossWeights::uniform(tasks)),
            Some(w) => {
                if w.len() != tasks {
                    return Err(Error::Config(format!(
                        "task_weights length {} does not match task count {tasks}",
                        w.len()
                    )));
                }
                Ok(LossWeights::Fixed(w.clone()))
            }
        }
    }

    /// Dataset for one seeded run. Synthetic data is re-drawn per run with
    /// seed = spec.seed + run seed so each repetition sees fresh data.
    fn build_dataset(&self, run_seed: u64) -> Result<MultiTaskDataset> {
        match &self.dataset {
            DatasetSpec::Synthetic(spec) => {
                let mut spec = spec.clone();
                spec.seed = spec.seed.wrapping_add(run_seed);
                generate_synthetic(&spec)
            }
            DatasetSpec::Csv { path, num_features, num_tasks } => {
                load_csv(Path::new(path), *num_features, *num_tasks)
            }
        }
    }
}

/// Per-task metrics for one (seed, epoch) point. Epoch 0 is the untrained
/// model; epoch e ≥ 1 is the state after e full passes.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: Vec<f64>,
    pub test_auc: Vec<f64>,
    pub test_logloss: Vec<f64>,
    /// Mean over the epoch's steps, when the combiner reports it.
    pub shared_mass_fraction: Option<f64>,
    /// Mean subspace rank over the epoch's steps, when reported.
    pub subspace_rank: Option<f64>,
}

/// One seed's trajectory; failed runs carry the error instead of aggregates.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct SeedRun {
    pub seed: u64,
    pub status: String,
    pub epochs: Vec<EpochRecord>,
}

/// Mean and sample standard deviation of the final-epoch metrics across the
/// seeds that completed.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct Aggregate {
    pub seeds_completed: usize,
    pub final_auc_mean: Vec<f64>,
    pub final_auc_std: Vec<f64>,
    pub final_logloss_mean: Vec<f64>,
    pub final_logloss_std: Vec<f64>,
}

/// Machine-readable result of `run`: the echoed config, per-seed curves, and
/// the cross-seed aggregate. Serialized bytes depend only on (config, seeds);
/// wall-clock is reported on stderr, never in the artifact.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub combiner_name: String,
    pub seed_runs: Vec<SeedRun>,
    pub aggregate: Option<Aggregate>,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

fn evaluate(
    model: &SharedBottomModel,
    train: &MultiTaskDataset,
    test: &MultiTaskDataset,
    epoch: usize,
) -> Result<EpochRecord> {
    let train_loss = model.batch_losses(&train.features, &train.labels)?;
    let probs = model.forward(&test.features)?;
    let mut test_auc = Vec::new();
    let mut test_logloss = Vec::new();
    for t in 0..test.num_tasks() {
        let labels = test.task_labels(t);
        test_auc.push(auc(&labels, &probs[t])?);
        test_logloss.push(logloss(&labels, &probs[t])?);
    }
    if train_loss.iter().chain(&test_logloss).any(|v| !v.is_finite()) {
        return Err(Error::Value(format!("non-finite metrics at epoch {epoch}")));
    }
    Ok(EpochRecord {
        epoch,
        train_loss,
        test_auc,
        test_logloss,
        shared_mass_fraction: None,
        subspace_rank: None,
    })
}

fn run_one_seed(cfg: &ExperimentConfig, seed: u64) -> Result<Vec<EpochRecord>> {
    let dataset = cfg.build_dataset(seed)?;
    let (train, test) = split(&dataset, cfg.test_fraction, seed)?;
    let shape = cfg.shape(dataset.num_features(), dataset.num_tasks());
    let mut model = SharedBottomModel::init(&shape, &mut Rng::new(seed).derive(1))?;
    let mut state = TrainState::new(
        &model,
        cfg.opt_kind()?,
        cfg.learning_rate,
        cfg.loss_weights(dataset.num_tasks())?,
    );
    let mut train_rng = Rng::new(seed).derive(2);

    let mut records = vec![evaluate(&model, &train, &test, 0)?];
    for epoch in 1..=cfg.epochs {
        let order = train_rng.permutation(train.len());
        let mut mass = Vec::new();
        let mut ranks = Vec::new();
        for batch in order.chunks(cfg.batch_size) {
            let features = Matrix::from_rows(
                &batch.iter().map(|&i| train.features.row(i).to_vec()).collect::<Vec<_>>(),
            );
            let labels: Vec<Vec<u8>> = batch.iter().map(|&i| train.labels[i].clone()).collect();
            let diag =
                train_step(&mut model, &features, &labels, &cfg.combiner, &mut state, &mut train_rng)?;
            if let Some(f) = diag.shared_mass_fraction {
                mass.push(f);
            }
            if let Some(r) = diag.subspace_rank {
                ranks.push(r as f64);
            }
        }
        let mut rec = evaluate(&model, &train, &test, epoch)?;
        rec.shared_mass_fraction = if mass.is_empty() { None } else { Some(mean(&mass)) };
        rec.subspace_rank = if ranks.is_empty() { None } else { Some(mean(&ranks)) };
        records.push(rec);
    }
    Ok(records)
}

/// Train the configured model once per seed and aggregate the final-epoch
/// metrics. Individual seed failures are recorded, not fatal; `aggregate` is
/// `None` only when every seed failed.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let mut seed_runs = Vec::new();
    for &seed in &cfg.seeds {
        match run_one_seed(cfg, seed) {
            Ok(epochs) => seed_runs.push(SeedRun { seed, status: "ok".into(), epochs }),
            Err(e) => {
                seed_runs.push(SeedRun { seed, status: format!("failed: {e}"), epochs: Vec::new() })
            }
        }
    }
    let finished: Vec<&SeedRun> = seed_runs.iter().filter(|r| r.status == "ok").collect();
    let aggregate = if finished.is_empty() {
        None
    } else {
        let tasks = finished[0].epochs[0].test_auc.len();
        let collect = |f: &dyn Fn(&EpochRecord) -> &Vec<f64>, t: usize| -> Vec<f64> {
            finished.iter().map(|r| f(r.epochs.last().unwrap())[t]).collect()
        };
        let mut auc_mean = Vec::new();
        let mut auc_std = Vec::new();
        let mut ll_mean = Vec::new();
        let mut ll_std = Vec::new();
        for t in 0..tasks {
            let aucs = collect(&|r| &r.test_auc, t);
            let lls = collect(&|r| &r.test_logloss, t);
            auc_mean.push(mean(&aucs));
            auc_std.push(sample_std(&aucs));
            ll_mean.push(mean(&lls));
            ll_std.push(sample_std(&lls));
        }
        Some(Aggregate {
            seeds_completed: finished.len(),
            final_auc_mean: auc_mean,
            final_auc_std: auc_std,
            final_logloss_mean: ll_mean,
            final_logloss_std: ll_std,
        })
    };
    Ok(ExperimentReport {
        config: cfg.clone(),
        combiner_name: cfg.combiner.name.clone(),
        seed_runs,
        aggregate,
    })
}

/// Plot-ready long-format curves: one row per (seed, epoch, task).
pub fn curves_csv(report: &ExperimentReport) -> String {
    let mut out = String::from("seed,epoch,task,train_loss,test_auc,test_logloss\n");
    for run in &report.seed_runs {
        for rec in &run.epochs {
            for t in 0..rec.test_auc.len() {
                out.push_str(&format!(
                    "{},{},{},{:?},{:?},{:?}\n",
                    run.seed, rec.epoch, t, rec.train_loss[t], rec.test_auc[t], rec.test_logloss[t]
                ));
            }
        }
    }
    out
}

/// Serialize the report pair (JSON summary + CSV curves) into `dir`.
pub fn write_report(report: &ExperimentReport, dir: &Path) -> Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(dir)?;
    let stem = report.combiner_name.replace(['/', ' '], "_");
    let json_path = dir.join(format!("report_{stem}.json"));
    let csv_path = dir.join(format!("curves_{stem}.csv"));
    let mut json = serde_json::to_string_pretty(report)?;
    json.push('\n');
    std::fs::write(&json_path, json)?;
    std::fs::write(&csv_path, curves_csv(report))?;
    Ok((json_path, csv_path))
}

/// Comparison table across methods: per-task mean final AUC and Gain vs the
/// named baseline (Gain = AUC − AUC_baseline). Rows keep input order.
pub fn compare_table(reports: &[ExperimentReport], baseline: &str) -> Result<String> {
    if reports.is_empty() {
        return Err(Error::InvalidInput("compare: no input reports".into()));
    }
    let base = reports
        .iter()
        .find(|r| r.combiner_name == baseline)
        .ok_or_else(|| Error::InvalidInput(format!("compare: baseline '{baseline}' not among inputs")))?;
    let base_auc = base
        .aggregate
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("compare: baseline report has no completed seeds".into()))?
        .final_auc_mean
        .clone();
    let tasks = base_auc.len();

    let mut out = String::from("method");
    for t in 0..tasks {
        out.push_str(&format!(",task{t}_auc,task{t}_gain"));
    }
    out.push('\n');
    for r in reports {
        let agg = r.aggregate.as_ref().ok_or_else(|| {
            Error::InvalidInput(format!("compare: report '{}' has no completed seeds", r.combiner_name))
        })?;
        if agg.final_auc_mean.len() != tasks {
            return Err(Error::InvalidInput(format!(
                "compare: report '{}' has {} tasks, baseline has {tasks}",
                r.combiner_name,
                agg.final_auc_mean.len()
            )));
        }
        out.push_str(&r.combiner_name);
        for t in 0..tasks {
            let a = agg.final_auc_mean[t];
            out.push_str(&format!(",{:?},{:?}", a, a - base_auc[t]));
        }
        out.push('\n');
    }
    Ok(out)
}

/// One step of the descent check's trace.
#[derive(Debug, Clone, serde::Serialize)]
pub struct DescentStep {
    pub loss_before: f64,
    pub loss_after: f64,
    pub bound: f64,
}

/// Result of [`descent_check`].
#[derive(Debug, Clone, serde::Serialize)]
pub struct DescentTrace {
    pub gamma: f64,
    pub lipschitz: f64,
    pub passed: bool,
    pub steps: Vec<DescentStep>,
}

fn quadratic_instance(dim: usize, rng: &mut Rng) -> (Vec<Matrix>, Vec<Vec<f64>>) {
    // A_i = BᵀB/dim + 0.1·I (PSD, well conditioned), random centers c_i.
    let mut mats = Vec::new();
    let mut centers = Vec::new();
    for _ in 0..2 {
        let b = Matrix::from_rows(&(0..dim).map(|_| rng.normal_vec(dim)).collect::<Vec<_>>());
        let mut a = Matrix::zeros(dim, dim);
        for i in 0..dim {
            for j in 0..dim {
                let mut s = 0.0;
                for k in 0..dim {
                    s += b.get(k, i) * b.get(k, j);
                }
                a.set(i, j, s / dim as f64 + if i == j { 0.1 } else { 0.0 });
            }
        }
        mats.push(a);
        centers.push(rng.normal_vec(dim));
    }
    (mats, centers)
}

/// Full-batch GDOD on a seeded two-task quadratic L_i = ½(θ−c_i)ᵀA_i(θ−c_i).
/// Passes iff every step obeys
/// L(θ⁺) ≤ L(θ) − ½γ‖Σᵢ gᵢ^sh‖² + 1e-9 and the total loss never increases.
/// Requires γ ≤ 1/L with L = λ_max(A₁+A₂).
pub fn descent_check(dim: usize, seed: u64, steps: usize, gamma: Option<f64>) -> Result<DescentTrace> {
    if dim == 0 {
        return Err(Error::InvalidInput("descent_check: dim must be positive".into()));
    }
    let mut rng = Rng::new(seed);
    let (mats, centers) = quadratic_instance(dim, &mut rng);
    let mut total = Matrix::zeros(dim, dim);
    for i in 0..dim {
        for j in 0..dim {
            total.set(i, j, mats[0].get(i, j) + mats[1].get(i, j));
        }
    }
    let lipschitz = crate::combiners::spectral_max(&total);
    let gamma = gamma.unwrap_or(1.0 / lipschitz);
    if !(gamma > 0.0) || gamma > 1.0 / lipschitz + 1e-12 {
        return Err(Error::InvalidInput(format!(
            "descent_check: gamma {gamma} violates 0 < gamma <= 1/L = {}",
            1.0 / lipschitz
        )));
    }

    let loss = |theta: &[f64]| -> f64 {
        let mut l = 0.0;
        for (a, c) in mats.iter().zip(&centers) {
            let d: Vec<f64> = theta.iter().zip(c).map(|(t, ci)| t - ci).collect();
            let ad = a.matvec(&d);
            l += 0.5 * d.iter().zip(&ad).map(|(x, y)| x * y).sum::<f64>();
        }
        l
    };
    let cfg = CombinerConfig::gdod();
    let mut theta = rng.normal_vec(dim);
    let mut trace = Vec::new();
    let mut passed = true;
    for _ in 0..steps {
        let grads: Vec<Matrix> = mats
            .iter()
            .zip(&centers)
            .map(|(a, c)| {
                let d: Vec<f64> = theta.iter().zip(c).map(|(t, ci)| t - ci).collect();
                Matrix::from_rows(&[a.matvec(&d)])
            })
            .collect();
        let bundle = GradientBundle::uniform(grads)?;
        let update = combine(&cfg, &bundle, &mut rng)?.update;
        let loss_before = loss(&theta);
        for (t, u) in theta.iter_mut().zip(&update) {
            *t -= gamma * u;
        }
        let loss_after = loss(&theta);
        let bound =
            loss_before - 0.5 * gamma * update.iter().map(|u| u * u).sum::<f64>() + 1e-9;
        if loss_after > bound {
            passed = false;
        }
        trace.push(DescentStep { loss_before, loss_after, bound });
    }
    Ok(DescentTrace { gamma, lipschitz, passed, steps: trace })
}

#[derive(Parser)]
#[command(name = "gdod", about = "Multi-task gradient decomposition experiment harness", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train over the configured seed grid and write report artifacts.
    Run {
        /// JSON experiment configuration.
        #[arg(long)]
        config: PathBuf,
        /// Override the combiner name from the config.
        #[arg(long)]
        combiner: Option<String>,
        /// Override the seed list, comma separated.
        #[arg(long, value_delimiter = ',')]
        seed_list: Option<Vec<u64>>,
        /// Override the epoch count.
        #[arg(long)]
        epochs: Option<usize>,
        /// Output directory (config and GDOD_OUT_DIR also apply).
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Tabulate reports against a baseline method.
    Compare {
        #[arg(long, default_value = "sum")]
        baseline: String,
        /// Report JSON files produced by `run`.
        #[arg(long, num_args = 1.., required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Verify the per-step descent inequality on a seeded two-task quadratic.
    DescentCheck {
        /// Step size; defaults to 1/L for the instance's smoothness L.
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long, default_value_t = 500)]
        steps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 6)]
        dim: usize,
    },
    /// Generate a synthetic dataset CSV from a JSON spec.
    GenData {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn resolve_out_dir(flag: Option<PathBuf>, config_dir: &Option<String>) -> PathBuf {
    if let Ok(dir) = std::env::var("GDOD_OUT_DIR") {
        if !dir.is_empty() {
            return PathBuf::from(dir);
        }
    }
    flag.or_else(|| config_dir.as_ref().map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("."))
}

fn execute(cmd: Cmd) -> Result<i32> {
    match cmd {
        Cmd::Run { config, combiner, seed_list, epochs, out_dir } => {
            let raw = std::fs::read_to_string(&config)?;
            let mut cfg: ExperimentConfig = serde_json::from_str(&raw)?;
            if let Some(name) = combiner {
                cfg.combiner.name = name;
            }
            if let Some(seeds) = seed_list {
                cfg.seeds = seeds;
            }
            if let Some(e) = epochs {
                cfg.epochs = e;
            }
            let started = Instant::now();
            let report = run_experiment(&cfg)?;
            let dir = resolve_out_dir(out_dir, &cfg.output_dir);
            let (json_path, csv_path) = write_report(&report, &dir)?;
            eprintln!("run finished in {:.2}s", started.elapsed().as_secs_f64());
            println!("{}", json_path.display());
            println!("{}", csv_path.display());
            match &report.aggregate {
                Some(agg) => {
                    println!(
                        "combiner={} seeds={} final_auc_mean={:?}",
                        report.combiner_name, agg.seeds_completed, agg.final_auc_mean
                    );
                    Ok(0)
                }
                None => {
                    eprintln!("all seeds failed; see {}", json_path.display());
                    Ok(3)
                }
            }
        }
        Cmd::Compare { baseline, inputs, out } => {
            let mut reports = Vec::new();
            for p in &inputs {
                let raw = std::fs::read_to_string(p)?;
                reports.push(serde_json::from_str::<ExperimentReport>(&raw)?);
            }
            let table = compare_table(&reports, &baseline)?;
            std::fs::write(&out, &table)?;
            print!("{table}");
            Ok(0)
        }
        Cmd::DescentCheck { gamma, steps, seed, dim } => {
            let trace = descent_check(dim, seed, steps, gamma)?;
            println!(
                "descent-check seed={seed} dim={dim} steps={} gamma={:?} L={:?}: {}",
                trace.steps.len(),
                trace.gamma,
                trace.lipschitz,
                if trace.passed { "PASS" } else { "FAIL" }
            );
            if let Some(last) = trace.steps.last() {
                println!(
                    "final loss {:?} (started at {:?})",
                    last.loss_after,
                    trace.steps[0].loss_before
                );
            }
            Ok(if trace.passed { 0 } else { 3 })
        }
        Cmd::GenData { spec, out } => {
            let raw = std::fs::read_to_string(&spec)?;
            let spec: SyntheticSpec = serde_json::from_str(&raw)?;
            let ds = generate_synthetic(&spec)?;
            write_csv(&ds, &out)?;
            println!("wrote {} examples to {}", ds.len(), out.display());
            Ok(0)
        }
    }
}

/// Binary entry point; returns the process exit code.
pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap handles --help/--version via "errors" that should exit 0
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.cmd) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}
