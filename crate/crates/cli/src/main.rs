use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use gtg_core::pipeline::{self, AblationAxis, ExperimentConfig, RunOptions, SeedPaths};

mod plots;

/// Guided trajectory generation for offline black-box optimization.
#[derive(Debug, Parser)]
#[command(name = "gtg", version)]
struct Cli {
    /// Experiment config (TOML). Defaults to the built-in Branin protocol.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run a single seed. Overrides GTG_SEED and the config's seed list.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Run directory.
    #[arg(long, global = true, default_value = "runs/gtg")]
    out: PathBuf,
    #[arg(long, short, global = true)]
    verbose: bool,
    /// Overwrite existing artifacts.
    #[arg(long, global = true)]
    force: bool,
    /// Reuse existing artifacts instead of recomputing them.
    #[arg(long, global = true)]
    resume: bool,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample (or load) the offline dataset.
    GenData,
    /// Build the trajectory dataset.
    BuildTrajs,
    /// Train the denoiser and the proxy.
    Train,
    /// Generate trajectories with guidance and context inpainting.
    Sample,
    /// Keep the top-Q generated designs by proxy score.
    Select,
    /// Score the selected designs with the oracle.
    Evaluate,
    /// All stages for every seed, then aggregate.
    Run,
    /// Sweep one hyperparameter.
    Ablate {
        /// H, C, alpha, K, epsilon or Q.
        #[arg(long)]
        axis: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
    /// Emit plot-ready CSVs from a finished run.
    Stats {
        #[arg(long, default_value_t = 20)]
        bins: usize,
    },
}

/// Problems with the configuration or invocation; exit code 2.
#[derive(Debug)]
struct ConfigError(String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn config_error(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

fn is_config_error(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        c.is::<ConfigError>() || matches!(c.downcast_ref::<gtg_core::Error>(), Some(gtg_core::Error::Config(_)))
    })
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p).map_err(|e| config_error(e.to_string()))?,
        None => ExperimentConfig::default(),
    };
    let env_seed = match std::env::var("GTG_SEED") {
        Ok(v) => Some(
            v.trim()
                .parse::<u64>()
                .map_err(|_| config_error(format!("GTG_SEED must be a non-negative integer, got {v:?}")))?,
        ),
        Err(_) => None,
    };
    if let Some(seed) = cli.seed.or(env_seed) {
        cfg.seeds = vec![seed];
    }
    cfg.validate().map_err(|e| config_error(e.to_string()))?;
    Ok(cfg)
}

fn dir_has_entries(p: &Path) -> bool {
    std::fs::read_dir(p).map(|mut d| d.next().is_some()).unwrap_or(false)
}

/// Refuse to overwrite an existing artifact unless `--force` was given.
fn guard(cli: &Cli, artifact: &Path) -> Result<()> {
    if artifact.exists() && !cli.force {
        return Err(config_error(format!(
            "{} already exists; pass --force to overwrite",
            artifact.display()
        )));
    }
    Ok(())
}

fn require(artifact: &Path) -> Result<()> {
    if !artifact.exists() {
        anyhow::bail!("missing artifact {}; run the earlier stage first", artifact.display());
    }
    Ok(())
}

fn execute(cli: &Cli) -> Result<()> {
    let cfg = load_config(cli)?;
    let out = &cli.out;
    match &cli.cmd {
        Command::Run => {
            if dir_has_entries(out) && !cli.force && !cli.resume {
                return Err(config_error(format!(
                    "{} is not empty; pass --force to overwrite or --resume to continue",
                    out.display()
                )));
            }
            std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
            std::fs::write(out.join("config.toml"), cfg.to_toml_string()?)?;
            let (_, report) = pipeline::run_experiment(&cfg, out, RunOptions { resume: cli.resume })?;
            for s in &report.completed {
                println!("seed {}: best {:.4} (normalized {:.4})", s.seed, s.best_raw, s.p100);
            }
            for f in &report.failed {
                println!("seed {}: failed: {}", f.seed, f.error);
            }
            println!("best: {:.4} ± {:.4}", report.best_mean, report.best_std);
        }
        Command::Ablate { axis, values } => {
            let axis: AblationAxis = axis.parse().map_err(|e: gtg_core::Error| config_error(e.to_string()))?;
            for &v in values {
                axis.apply(&cfg, v).map_err(|e| config_error(e.to_string()))?;
            }
            if dir_has_entries(out) && !cli.force && !cli.resume {
                return Err(config_error(format!(
                    "{} is not empty; pass --force to overwrite or --resume to continue",
                    out.display()
                )));
            }
            let rows = pipeline::ablate(&cfg, axis, values, out, RunOptions { resume: cli.resume })?;
            print!("{}", pipeline::ablation_csv(axis, &rows));
        }
        Command::Stats { bins } => {
            for &seed in &cfg.seeds {
                let paths = SeedPaths::new(out, seed);
                for f in plots::emit(&cfg, &paths, *bins)? {
                    println!("{}", f.display());
                }
            }
        }
        stage => {
            for &seed in &cfg.seeds {
                run_stage(cli, stage, &cfg, seed)?;
            }
        }
    }
    Ok(())
}

fn run_stage(cli: &Cli, stage: &Command, cfg: &ExperimentConfig, seed: u64) -> Result<()> {
    let paths = SeedPaths::new(&cli.out, seed);
    match stage {
        Command::GenData => {
            guard(cli, &paths.dataset())?;
            let ds = pipeline::stage_dataset(cfg, seed, &paths)?;
            println!(
                "seed {seed}: {} rows, d = {}, best {:.4} -> {}",
                ds.len(),
                ds.dim(),
                ds.y_max(),
                paths.dataset().display()
            );
        }
        Command::BuildTrajs => {
            require(&paths.dataset())?;
            guard(cli, &paths.trajectories())?;
            let traj = pipeline::stage_trajectories(cfg, seed, &paths)?;
            let ds = gtg_core::dataset::OfflineDataset::load(
                &paths.dataset(),
                gtg_core::dataset::DataFormat::Csv,
                None,
            )?;
            let shift = gtg_core::trajectory::score_shift_stats(&traj, &ds)?;
            println!(
                "seed {seed}: {} trajectories of length {}; mean score {:.4} (dataset {:.4})",
                traj.len(),
                traj.horizon(),
                shift.trajectories.mean,
                shift.dataset.mean
            );
        }
        Command::Train => {
            require(&paths.trajectories())?;
            guard(cli, &paths.denoiser())?;
            guard(cli, &paths.proxy())?;
            let loss = pipeline::stage_train_denoiser(cfg, seed, &paths)?;
            let val = pipeline::stage_train_proxy(cfg, seed, &paths)?;
            println!(
                "seed {seed}: denoiser loss {:.4} -> {:.4}; proxy val rmse {:.4}, spearman {:.4}",
                loss.first_decile_mean(),
                loss.last_decile_mean(),
                val.val_rmse,
                val.val_spearman
            );
        }
        Command::Sample => {
            require(&paths.denoiser())?;
            guard(cli, &paths.samples())?;
            let set = pipeline::stage_sample(cfg, seed, &paths)?;
            println!(
                "seed {seed}: {} trajectories, target {:.4} -> {}",
                set.trajectories.len(),
                set.target,
                paths.samples().display()
            );
        }
        Command::Select => {
            require(&paths.samples())?;
            require(&paths.proxy())?;
            guard(cli, &paths.candidates())?;
            let c = pipeline::stage_select(cfg, &paths)?;
            println!("seed {seed}: kept {} candidates -> {}", c.len(), paths.candidates().display());
        }
        Command::Evaluate => {
            require(&paths.candidates())?;
            guard(cli, &paths.report())?;
            let r = pipeline::stage_evaluate(cfg, seed, &paths)?;
            println!(
                "seed {seed}: best {:.4}; normalized p100 {:.4} p80 {:.4} p50 {:.4}",
                r.evaluation.best_raw, r.evaluation.p100, r.evaluation.p80, r.evaluation.p50
            );
        }
        Command::Run | Command::Ablate { .. } | Command::Stats { .. } => unreachable!("handled by execute"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .filter_level(if cli.verbose {
            log::LevelFilter::Info
        } else {
            log::LevelFilter::Warn
        })
        .parse_env("GTG_LOG")
        .init();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (kind, code) = if is_config_error(&e) { ("config", 2) } else { ("runtime", 1) };
            let msg = serde_json::json!({ "error": kind, "message": format!("{e:#}") });
            eprintln!("{msg}");
            ExitCode::from(code)
        }
    }
}
