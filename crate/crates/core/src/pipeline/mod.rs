//! End-to-end experiments: construct, train, sample, select, evaluate.
//!
//! Every stage reads the artifacts of the previous one from the seed's run
//! directory and writes its own, so any stage can be re-run in isolation and
//! an interrupted experiment can resume from the last finished artifact.

mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ndarray::{s, Array2};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

pub use config::{ExperimentConfig, TargetMode, CONFIG_VERSION};

use crate::dataset::{DataFormat, NeighborIndex, OfflineDataset};
use crate::denoiser::{self, Denoiser, TrainOutput, TrainingSet};
use crate::diffusion::{sample_with_context, GuidanceConfig, NoiseSchedule};
use crate::nn::{cast, Precision, Scalar};
use crate::proxy::{self, ProxyModel, ValidationReport};
use crate::stats;
use crate::tasks::{self, CandidateSet, EvalReport, Metric, Oracle, Provenance};
use crate::trajectory::{self, Trajectory, TrajectoryDataset};
use crate::{rng, Error, Result};

/// File layout of one seed's run directory.
#[derive(Debug, Clone)]
pub struct SeedPaths {
    pub dir: PathBuf,
}

impl SeedPaths {
    pub fn new(out: &Path, seed: u64) -> Self {
        Self {
            dir: out.join(format!("seed-{seed}")),
        }
    }

    pub fn dataset(&self) -> PathBuf {
        self.dir.join("dataset.csv")
    }
    pub fn trajectories(&self) -> PathBuf {
        self.dir.join("trajs.json")
    }
    pub fn denoiser(&self) -> PathBuf {
        self.dir.join("denoiser.ckpt")
    }
    pub fn denoiser_loss(&self) -> PathBuf {
        self.dir.join("denoiser_loss.csv")
    }
    pub fn proxy(&self) -> PathBuf {
        self.dir.join("proxy.ckpt")
    }
    pub fn proxy_report(&self) -> PathBuf {
        self.dir.join("proxy_report.json")
    }
    pub fn samples(&self) -> PathBuf {
        self.dir.join("samples.json")
    }
    pub fn candidates(&self) -> PathBuf {
        self.dir.join("candidates.json")
    }
    pub fn report(&self) -> PathBuf {
        self.dir.join("report.json")
    }
    pub fn timings(&self) -> PathBuf {
        self.dir.join("timings.csv")
    }

    /// Artifacts produced before sampling; reused by sampling-only ablations.
    fn trained_artifacts(&self) -> [PathBuf; 5] {
        [
            self.dataset(),
            self.trajectories(),
            self.denoiser(),
            self.proxy(),
            self.proxy_report(),
        ]
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write(path, &(serde_json::to_string_pretty(value)? + "\n"))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&read(path)?)?)
}

/// Upsert one `stage,seconds` row.
fn record_timing(paths: &SeedPaths, stage: &str, seconds: f64) -> Result<()> {
    let path = paths.timings();
    let mut rows: Vec<(String, String)> = match fs::read_to_string(&path) {
        Ok(text) => text
            .lines()
            .skip(1)
            .filter_map(|l| l.split_once(',').map(|(a, b)| (a.to_string(), b.to_string())))
            .collect(),
        Err(_) => Vec::new(),
    };
    let value = format!("{seconds:.6}");
    match rows.iter_mut().find(|(s, _)| s == stage) {
        Some(row) => row.1 = value,
        None => rows.push((stage.to_string(), value)),
    }
    let mut text = String::from("stage,seconds\n");
    for (s, v) in rows {
        text.push_str(&format!("{s},{v}\n"));
    }
    write(&path, &text)
}

pub fn oracle(cfg: &ExperimentConfig) -> Result<Box<dyn Oracle>> {
    tasks::oracle_by_name(&cfg.task, cfg.dim)
}

/// Normalized per-step optimum used in the conditioning target.
pub fn estimate_target(ds: &OfflineDataset, oracle: &dyn Oracle, mode: TargetMode, gamma: f64) -> Result<f64> {
    match mode {
        TargetMode::Known => {
            let (y, _) = oracle
                .known_optimum()
                .ok_or_else(|| Error::Config(format!("task {} has no known optimum; use target_mode = \"gamma\"", oracle.name())))?;
            Ok(ds.normalize_score(y))
        }
        TargetMode::Gamma => {
            if !(gamma > 0.0) {
                return Err(Error::InvalidArgument(format!("gamma must be > 0, got {gamma}")));
            }
            Ok(gamma * ds.normalize_score(ds.y_max()))
        }
    }
}

/// Generated trajectories together with the stored trajectories their contexts came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedSet {
    pub context_len: usize,
    pub target: f64,
    pub context_sources: Vec<usize>,
    pub trajectories: Vec<Trajectory>,
}

impl GeneratedSet {
    /// Designs at 1-based positions `C+1..=H`, with provenance.
    pub fn harvest(&self) -> (Vec<Vec<f64>>, Vec<Provenance>) {
        let mut designs = Vec::new();
        let mut prov = Vec::new();
        for (b, t) in self.trajectories.iter().enumerate() {
            for (h, x) in t.designs.iter().enumerate().skip(self.context_len) {
                designs.push(x.clone());
                prov.push(Provenance { trajectory: b, step: h + 1 });
            }
        }
        (designs, prov)
    }
}

// Stages. Each reads its inputs from `paths` and writes its outputs there.

pub fn stage_dataset(cfg: &ExperimentConfig, seed: u64, paths: &SeedPaths) -> Result<OfflineDataset> {
    let start = Instant::now();
    fs::create_dir_all(&paths.dir).map_err(|e| Error::io(&paths.dir, e))?;
    let oracle = oracle(cfg)?;
    let mut ds = match &cfg.dataset_path {
        Some(p) => OfflineDataset::load(p, DataFormat::from_path(p), None)?,
        None => tasks::make_dataset(
            oracle.as_ref(),
            cfg.n_samples,
            cfg.trim_fraction,
            &mut rng::stream(seed, "dataset", 0),
        )?,
    };
    if ds.dim() != oracle.dim() {
        return Err(Error::Config(format!(
            "dataset has {} design columns but task {} expects {}",
            ds.dim(),
            oracle.name(),
            oracle.dim()
        )));
    }
    if let Some(mode) = cfg.corruption {
        ds = tasks::corrupt_dataset(&ds, mode, cfg.corruption_level, &mut rng::stream(seed, "corrupt", 0))?;
    }
    ds.save(&paths.dataset(), DataFormat::Csv)?;
    record_timing(paths, "dataset", start.elapsed().as_secs_f64())?;
    Ok(ds)
}

fn load_dataset(paths: &SeedPaths) -> Result<OfflineDataset> {
    OfflineDataset::load(&paths.dataset(), DataFormat::Csv, None)
}

pub fn stage_trajectories(cfg: &ExperimentConfig, seed: u64, paths: &SeedPaths) -> Result<TrajectoryDataset> {
    let ds = load_dataset(paths)?;
    let start = Instant::now();
    let idx = NeighborIndex::build(&ds);
    let traj = trajectory::build_trajectories(&ds, &idx, &cfg.construction(), seed)?;
    traj.save(&paths.trajectories())?;
    record_timing(paths, "neighbor_index", idx.build_time().as_secs_f64())?;
    record_timing(paths, "trajectories", start.elapsed().as_secs_f64())?;
    Ok(traj)
}

fn train_denoiser_as<F: Scalar>(
    cfg: &ExperimentConfig,
    seed: u64,
    ds: &OfflineDataset,
    traj: &TrajectoryDataset,
    paths: &SeedPaths,
) -> Result<TrainOutput> {
    let arch = cfg.denoiser_arch(ds.dim());
    let mut model = Denoiser::<F>::new(arch, seed)?;
    let data = TrainingSet::<F>::from_trajectories(traj, ds)?;
    let sched = NoiseSchedule::new(cfg.diffusion_steps, cfg.schedule)?;
    let out = denoiser::train(&mut model, &data, &sched, &cfg.denoiser_train(seed))?;
    let meta = serde_json::json!({
        "seed": seed,
        "steps": cfg.den_steps,
        "schedule": cfg.schedule,
        "diffusion_steps": cfg.diffusion_steps,
        "final_loss": out.last_decile_mean(),
    });
    model.save(&paths.denoiser(), meta)?;
    write(&paths.denoiser_loss(), &out.curve_csv())?;
    Ok(out)
}

pub fn stage_train_denoiser(cfg: &ExperimentConfig, seed: u64, paths: &SeedPaths) -> Result<TrainOutput> {
    let ds = load_dataset(paths)?;
    let traj = TrajectoryDataset::load(&paths.trajectories())?;
    if traj.horizon() != cfg.horizon {
        return Err(Error::Config(format!(
            "trajectories have horizon {} but config says {}",
            traj.horizon(),
            cfg.horizon
        )));
    }
    let start = Instant::now();
    let out = match cfg.precision {
        Precision::F32 => train_denoiser_as::<f32>(cfg, seed, &ds, &traj, paths)?,
        Precision::F64 => train_denoiser_as::<f64>(cfg, seed, &ds, &traj, paths)?,
    };
    record_timing(paths, "train_denoiser", start.elapsed().as_secs_f64())?;
    Ok(out)
}

pub fn stage_train_proxy(cfg: &ExperimentConfig, seed: u64, paths: &SeedPaths) -> Result<ValidationReport> {
    let ds = load_dataset(paths)?;
    let start = Instant::now();
    let weights = proxy::rank_weights(ds.scores(), cfg.rank_k)?;
    let (report, save) = match cfg.precision {
        Precision::F32 => {
            let (m, r) = proxy::train_proxy::<f32>(&ds, cfg.proxy_arch(ds.dim()), &cfg.proxy_train(seed), &weights)?;
            (r, m.save(&paths.proxy(), serde_json::json!({ "seed": seed })))
        }
        Precision::F64 => {
            let (m, r) = proxy::train_proxy::<f64>(&ds, cfg.proxy_arch(ds.dim()), &cfg.proxy_train(seed), &weights)?;
            (r, m.save(&paths.proxy(), serde_json::json!({ "seed": seed })))
        }
    };
    save?;
    write_json(&paths.proxy_report(), &report)?;
    record_timing(paths, "train_proxy", start.elapsed().as_secs_f64())?;
    Ok(report)
}

fn sample_as<F: Scalar>(
    cfg: &ExperimentConfig,
    seed: u64,
    ds: &OfflineDataset,
    traj: &TrajectoryDataset,
    paths: &SeedPaths,
) -> Result<GeneratedSet> {
    let (model, _) = Denoiser::<F>::load(&paths.denoiser())?;
    let arch = model.arch().clone();
    if arch.horizon != cfg.horizon || arch.max_timestep != cfg.diffusion_steps {
        return Err(Error::Config("denoiser checkpoint does not match the configured horizon/steps".into()));
    }
    let sched = NoiseSchedule::new(cfg.diffusion_steps, cfg.schedule)?;
    let oracle = oracle(cfg)?;
    let y_star = estimate_target(ds, oracle.as_ref(), cfg.target_mode, cfg.gamma)?;
    let guidance = GuidanceConfig {
        omega: cfg.omega,
        alpha_level: cfg.alpha,
        y_star,
        horizon: cfg.horizon,
    };
    // Contexts: without replacement while there are enough stored trajectories.
    let mut ctx_rng = rng::stream(seed, "context", 0);
    let sources: Vec<usize> = if cfg.n_generated <= traj.len() {
        rand::seq::index::sample(&mut ctx_rng, traj.len(), cfg.n_generated).into_vec()
    } else {
        (0..cfg.n_generated).map(|_| ctx_rng.random_range(0..traj.len())).collect()
    };
    let contexts: Vec<Array2<F>> = sources
        .iter()
        .map(|&i| {
            traj.trajectories[i]
                .to_model_array(ds)
                .slice(s![..cfg.context_len, ..])
                .mapv(cast::<F>)
        })
        .collect();
    let mut rngs: Vec<rng::Rng> = (0..cfg.n_generated)
        .map(|b| rng::stream(seed, "sample", b as u64))
        .collect();
    let out = sample_with_context(
        &model,
        &sched,
        Some(&guidance),
        cfg.clip(),
        cfg.horizon,
        arch.channels,
        &contexts,
        &mut rngs,
    )?;
    let trajectories = out
        .iter()
        .map(|a| Trajectory::from_model_array(ds, &a.mapv(|v| v.to_f64().unwrap_or(f64::NAN))))
        .collect();
    Ok(GeneratedSet {
        context_len: cfg.context_len,
        target: guidance.target(),
        context_sources: sources,
        trajectories,
    })
}

pub fn stage_sample(cfg: &ExperimentConfig, seed: u64, paths: &SeedPaths) -> Result<GeneratedSet> {
    let ds = load_dataset(paths)?;
    let traj = TrajectoryDataset::load(&paths.trajectories())?;
    let start = Instant::now();
    let set = match cfg.precision {
        Precision::F32 => sample_as::<f32>(cfg, seed, &ds, &traj, paths)?,
        Precision::F64 => sample_as::<f64>(cfg, seed, &ds, &traj, paths)?,
    };
    write_json(&paths.samples(), &set)?;
    record_timing(paths, "sample", start.elapsed().as_secs_f64())?;
    Ok(set)
}

pub fn stage_select(cfg: &ExperimentConfig, paths: &SeedPaths) -> Result<CandidateSet> {
    let set: GeneratedSet = read_json(&paths.samples())?;
    let start = Instant::now();
    let (designs, prov) = set.harvest();
    let cands = match cfg.precision {
        Precision::F32 => proxy::filter_top_q(designs, prov, &ProxyModel::<f32>::load(&paths.proxy())?.0, cfg.q)?,
        Precision::F64 => proxy::filter_top_q(designs, prov, &ProxyModel::<f64>::load(&paths.proxy())?.0, cfg.q)?,
    };
    write(&paths.candidates(), &(cands.to_json()? + "\n"))?;
    record_timing(paths, "select", start.elapsed().as_secs_f64())?;
    Ok(cands)
}

/// Per-seed summary written to `report.json`; deterministic for a fixed config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedReport {
    pub seed: u64,
    pub config_hash: String,
    pub dataset_size: usize,
    pub dataset_best: f64,
    pub evaluation: EvalReport,
    pub diversity: Option<f64>,
    pub harvested: usize,
    pub target: f64,
}

pub fn stage_evaluate(cfg: &ExperimentConfig, seed: u64, paths: &SeedPaths) -> Result<SeedReport> {
    let ds = load_dataset(paths)?;
    let cands = CandidateSet::from_json(&read(&paths.candidates())?)?;
    let set: GeneratedSet = read_json(&paths.samples())?;
    let start = Instant::now();
    let oracle = oracle(cfg)?;
    let (scored, evaluation) = tasks::evaluate_candidates(cands, oracle.as_ref(), &ds, cfg.bounds)?;
    let diversity = (scored.len() >= 2)
        .then(|| tasks::diversity(&scored.designs, Metric::Euclidean))
        .transpose()?;
    write(&paths.candidates(), &(scored.to_json()? + "\n"))?;
    let report = SeedReport {
        seed,
        config_hash: cfg.hash(),
        dataset_size: ds.len(),
        dataset_best: ds.y_max(),
        evaluation,
        diversity,
        harvested: set.harvest().0.len(),
        target: set.target,
    };
    write_json(&paths.report(), &report)?;
    record_timing(paths, "evaluate", start.elapsed().as_secs_f64())?;
    Ok(report)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Skip stages whose output artifact already exists.
    pub resume: bool,
}

/// Everything produced for one seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub seed: u64,
    pub config_hash: String,
    pub denoiser_loss: Option<TrainOutput>,
    pub proxy: ValidationReport,
    pub candidates: CandidateSet,
    pub report: SeedReport,
    /// `(stage, seconds)`; absent for stages skipped on resume.
    pub timings: Vec<(String, f64)>,
}

pub fn run_seed(cfg: &ExperimentConfig, seed: u64, out: &Path, opts: RunOptions) -> Result<RunRecord> {
    let paths = SeedPaths::new(out, seed);
    fs::create_dir_all(&paths.dir).map_err(|e| Error::io(&paths.dir, e))?;
    let mut timings = Vec::new();
    let skip = |p: &Path| opts.resume && p.exists();
    let mut timed = |name: &str, f: &mut dyn FnMut() -> Result<()>| -> Result<()> {
        let t = Instant::now();
        f()?;
        timings.push((name.to_string(), t.elapsed().as_secs_f64()));
        Ok(())
    };
    if !skip(&paths.dataset()) {
        timed("dataset", &mut || stage_dataset(cfg, seed, &paths).map(drop))?;
    }
    if !skip(&paths.trajectories()) {
        timed("trajectories", &mut || stage_trajectories(cfg, seed, &paths).map(drop))?;
    }
    let mut loss = None;
    if !skip(&paths.denoiser()) {
        timed("train_denoiser", &mut || {
            loss = Some(stage_train_denoiser(cfg, seed, &paths)?);
            Ok(())
        })?;
    }
    if !skip(&paths.proxy()) || !paths.proxy_report().exists() {
        timed("train_proxy", &mut || stage_train_proxy(cfg, seed, &paths).map(drop))?;
    }
    if !skip(&paths.samples()) {
        timed("sample", &mut || stage_sample(cfg, seed, &paths).map(drop))?;
    }
    // Selection and evaluation are cheap and always re-run, so a resumed run
    // with a different budget Q stays consistent.
    timed("select", &mut || stage_select(cfg, &paths).map(drop))?;
    let mut report = None;
    timed("evaluate", &mut || {
        report = Some(stage_evaluate(cfg, seed, &paths)?);
        Ok(())
    })?;
    Ok(RunRecord {
        seed,
        config_hash: cfg.hash(),
        denoiser_loss: loss,
        proxy: read_json(&paths.proxy_report())?,
        candidates: CandidateSet::from_json(&read(&paths.candidates())?)?,
        report: report.expect("evaluate ran"),
        timings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub seed: u64,
    pub best_raw: f64,
    pub p100: f64,
    pub p80: f64,
    pub p50: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedFailure {
    pub seed: u64,
    pub error: String,
}

/// Aggregate over seeds, written to `<out>/report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config_hash: String,
    pub task: String,
    pub seeds: Vec<u64>,
    pub completed: Vec<SeedSummary>,
    pub failed: Vec<SeedFailure>,
    /// Best raw oracle score: mean and sample standard deviation over completed seeds.
    pub best_mean: f64,
    pub best_std: f64,
    pub p100_mean: f64,
    pub p100_std: f64,
    /// Generated designs available to the proxy filter per seed.
    pub harvested_per_seed: usize,
    pub q: usize,
}

pub fn aggregate(cfg: &ExperimentConfig, records: &[RunRecord], failed: Vec<SeedFailure>) -> ExperimentReport {
    let completed: Vec<SeedSummary> = records
        .iter()
        .map(|r| SeedSummary {
            seed: r.seed,
            best_raw: r.report.evaluation.best_raw,
            p100: r.report.evaluation.p100,
            p80: r.report.evaluation.p80,
            p50: r.report.evaluation.p50,
        })
        .collect();
    let best: Vec<f64> = completed.iter().map(|s| s.best_raw).collect();
    let p100: Vec<f64> = completed.iter().map(|s| s.p100).collect();
    let (best_mean, p100_mean) = if completed.is_empty() {
        (f64::NAN, f64::NAN)
    } else {
        (stats::mean(&best), stats::mean(&p100))
    };
    ExperimentReport {
        config_hash: cfg.hash(),
        task: cfg.task.clone(),
        seeds: cfg.seeds.clone(),
        completed,
        failed,
        best_mean,
        best_std: stats::sample_std(&best),
        p100_mean,
        p100_std: stats::sample_std(&p100),
        harvested_per_seed: cfg.harvested_per_seed(),
        q: cfg.q,
    }
}

/// Run every seed; a failing seed is recorded and skipped. Errors only if no seed completes.
pub fn run_experiment(cfg: &ExperimentConfig, out: &Path, opts: RunOptions) -> Result<(Vec<RunRecord>, ExperimentReport)> {
    cfg.validate()?;
    let mut records = Vec::new();
    let mut failed = Vec::new();
    for &seed in &cfg.seeds {
        log::info!("seed {seed}: starting");
        match run_seed(cfg, seed, out, opts) {
            Ok(r) => {
                log::info!("seed {seed}: best raw score {:.4}", r.report.evaluation.best_raw);
                records.push(r);
            }
            Err(e) => {
                log::warn!("seed {seed} failed: {e}");
                failed.push(SeedFailure {
                    seed,
                    error: e.to_string(),
                });
            }
        }
    }
    if records.is_empty() {
        let first = failed.first().map(|f| f.error.clone()).unwrap_or_default();
        return Err(Error::Empty(format!("no seed completed (first error: {first})")));
    }
    if !failed.is_empty() {
        log::warn!("aggregating over {} of {} seeds", records.len(), cfg.seeds.len());
    }
    let report = aggregate(cfg, &records, failed);
    write_json(&out.join("report.json"), &report)?;
    Ok((records, report))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AblationAxis {
    H,
    C,
    Alpha,
    K,
    Epsilon,
    Q,
}

impl std::str::FromStr for AblationAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "H" | "h" | "horizon" => Ok(Self::H),
            "C" | "c" | "context" => Ok(Self::C),
            "alpha" => Ok(Self::Alpha),
            "K" | "k" => Ok(Self::K),
            "epsilon" | "eps" => Ok(Self::Epsilon),
            "Q" | "q" => Ok(Self::Q),
            other => Err(Error::Config(format!(
                "unknown ablation axis {other:?} (expected H, C, alpha, K, epsilon or Q)"
            ))),
        }
    }
}

impl AblationAxis {
    pub fn name(self) -> &'static str {
        match self {
            Self::H => "H",
            Self::C => "C",
            Self::Alpha => "alpha",
            Self::K => "K",
            Self::Epsilon => "epsilon",
            Self::Q => "Q",
        }
    }

    /// Axes that leave the dataset, trajectories and trained models untouched.
    pub fn sampling_only(self) -> bool {
        matches!(self, Self::C | Self::Alpha | Self::Q)
    }

    pub fn apply(self, cfg: &ExperimentConfig, value: f64) -> Result<ExperimentConfig> {
        let count = || -> Result<usize> {
            if value >= 0.0 && value.fract() == 0.0 {
                Ok(value as usize)
            } else {
                Err(Error::Config(format!("{} needs a non-negative integer, got {value}", self.name())))
            }
        };
        let mut c = cfg.clone();
        match self {
            Self::H => c.horizon = count()?,
            Self::C => c.context_len = count()?,
            Self::Alpha => c.alpha = value,
            Self::K => c.knn_k = count()?,
            Self::Epsilon => c.epsilon = value,
            Self::Q => c.q = count()?,
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub value: f64,
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

pub fn ablation_csv(axis: AblationAxis, rows: &[AblationRow]) -> String {
    let mut s = format!("{},mean,std,n\n", axis.name());
    for r in rows {
        s.push_str(&format!("{:?},{:?},{:?},{}\n", r.value, r.mean, r.std, r.n));
    }
    s
}

/// One experiment per value, everything else fixed. For sampling-only axes the
/// models are trained once per seed under `<out>/base` and reused.
pub fn ablate(
    cfg: &ExperimentConfig,
    axis: AblationAxis,
    values: &[f64],
    out: &Path,
    opts: RunOptions,
) -> Result<Vec<AblationRow>> {
    if values.is_empty() {
        return Err(Error::Config("ablation needs at least one value".into()));
    }
    let configs = values
        .iter()
        .map(|&v| axis.apply(cfg, v))
        .collect::<Result<Vec<_>>>()?;
    if axis.sampling_only() {
        let base = out.join("base");
        for &seed in &cfg.seeds {
            let paths = SeedPaths::new(&base, seed);
            fs::create_dir_all(&paths.dir).map_err(|e| Error::io(&paths.dir, e))?;
            let skip = |p: &Path| opts.resume && p.exists();
            if !skip(&paths.dataset()) {
                stage_dataset(cfg, seed, &paths)?;
            }
            if !skip(&paths.trajectories()) {
                stage_trajectories(cfg, seed, &paths)?;
            }
            if !skip(&paths.denoiser()) {
                stage_train_denoiser(cfg, seed, &paths)?;
            }
            if !skip(&paths.proxy()) || !paths.proxy_report().exists() {
                stage_train_proxy(cfg, seed, &paths)?;
            }
        }
    }
    let mut rows = Vec::with_capacity(values.len());
    for (&value, vcfg) in values.iter().zip(&configs) {
        let dir = out.join(format!("{}={value}", axis.name()));
        let mut vopts = opts;
        if axis.sampling_only() {
            for &seed in &cfg.seeds {
                let from = SeedPaths::new(&out.join("base"), seed);
                let to = SeedPaths::new(&dir, seed);
                fs::create_dir_all(&to.dir).map_err(|e| Error::io(&to.dir, e))?;
                for (src, dst) in from.trained_artifacts().iter().zip(to.trained_artifacts()) {
                    fs::copy(src, &dst).map_err(|e| Error::io(src, e))?;
                }
            }
            vopts.resume = true;
        }
        let (_, report) = run_experiment(vcfg, &dir, vopts)?;
        rows.push(AblationRow {
            value,
            mean: report.best_mean,
            std: report.best_std,
            n: report.completed.len(),
        });
    }
    write(&out.join(format!("ablation_{}.csv", axis.name())), &ablation_csv(axis, &rows))?;
    Ok(rows)
}
