//! Plot-ready CSV emission for a finished seed directory.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use gtg_core::dataset::{DataFormat, OfflineDataset};
use gtg_core::pipeline::{self, ExperimentConfig, GeneratedSet, SeedPaths};
use gtg_core::stats::Histogram;
use gtg_core::tasks::{CandidateSet, Oracle};
use gtg_core::trajectory::{self, Trajectory, TrajectoryDataset};

pub const GRID: usize = 101;

fn header(d: usize, lead: &str) -> String {
    let cols: Vec<String> = (0..d).map(|j| format!("x{j}")).collect();
    format!("{lead}{},y\n", cols.join(","))
}

fn polyline_csv(trajs: &[Trajectory], d: usize) -> String {
    let mut s = header(d, "trajectory,step,");
    for (i, t) in trajs.iter().enumerate() {
        for (h, (x, y)) in t.designs.iter().zip(&t.raw_scores).enumerate() {
            let xs: Vec<String> = x.iter().map(|v| format!("{v:?}")).collect();
            s.push_str(&format!("{i},{},{},{y:?}\n", h + 1, xs.join(",")));
        }
    }
    s
}

/// Oracle values on a `GRID x GRID` lattice spanning the box, `x0` varying fastest.
pub fn contour_csv(oracle: &dyn Oracle) -> String {
    let b = oracle.bounds();
    let mut s = header(2, "");
    let at = |(lo, hi): (f64, f64), i: usize| lo + (hi - lo) * i as f64 / (GRID - 1) as f64;
    for j in 0..GRID {
        for i in 0..GRID {
            let x = [at(b[0], i), at(b[1], j)];
            s.push_str(&format!("{:?},{:?},{:?}\n", x[0], x[1], oracle.evaluate(&x)));
        }
    }
    s
}

fn save(dir: &Path, name: &str, text: &str, written: &mut Vec<PathBuf>) -> Result<()> {
    let p = dir.join(name);
    fs::write(&p, text).with_context(|| format!("writing {}", p.display()))?;
    written.push(p);
    Ok(())
}

pub fn emit(cfg: &ExperimentConfig, paths: &SeedPaths, bins: usize) -> Result<Vec<PathBuf>> {
    if !paths.dataset().exists() {
        bail!("missing artifact {}", paths.dataset().display());
    }
    let ds = OfflineDataset::load(&paths.dataset(), DataFormat::Csv, None)?;
    let traj = paths
        .trajectories()
        .exists()
        .then(|| TrajectoryDataset::load(&paths.trajectories()))
        .transpose()?;
    let generated: Option<GeneratedSet> = paths
        .samples()
        .exists()
        .then(|| -> Result<GeneratedSet> { Ok(serde_json::from_str(&fs::read_to_string(paths.samples())?)?) })
        .transpose()?;
    let cands = paths
        .candidates()
        .exists()
        .then(|| -> Result<CandidateSet> { Ok(CandidateSet::from_json(&fs::read_to_string(paths.candidates())?)?) })
        .transpose()?;

    let dir = paths.dir.join("stats");
    fs::create_dir_all(&dir)?;
    let mut written = Vec::new();

    let data_scores = ds.normalized_scores();
    let traj_scores: Vec<f64> = traj
        .iter()
        .flat_map(|t| t.trajectories.iter().flat_map(|t| t.normalized_scores.clone()))
        .collect();
    let cand_scores: Vec<f64> = cands
        .iter()
        .flat_map(|c| c.oracle_scores.iter().flatten().map(|&y| ds.normalize_score(y)))
        .collect();
    let all = data_scores.iter().chain(&traj_scores).chain(&cand_scores);
    let lo = all.clone().copied().fold(0.0, f64::min);
    let hi = all.copied().fold(1.0, f64::max);
    for (name, values) in [
        ("hist_dataset.csv", &data_scores),
        ("hist_trajectories.csv", &traj_scores),
        ("hist_candidates.csv", &cand_scores),
    ] {
        save(&dir, name, &Histogram::new(values, lo, hi, bins).to_csv(), &mut written)?;
    }

    if let Some(t) = &traj {
        let shift = trajectory::score_shift_stats(t, &ds)?;
        save(&dir, "score_shift.json", &serde_json::to_string_pretty(&shift)?, &mut written)?;
    }
    if ds.dim() == 2 {
        if let Some(t) = &traj {
            save(&dir, "trajectories_polyline.csv", &polyline_csv(&t.trajectories, 2), &mut written)?;
        }
        if let Some(g) = &generated {
            save(&dir, "generated_polyline.csv", &polyline_csv(&g.trajectories, 2), &mut written)?;
        }
        let oracle = pipeline::oracle(cfg)?;
        if oracle.dim() == 2 {
            save(&dir, "contour.csv", &contour_csv(oracle.as_ref()), &mut written)?;
        }
    }
    Ok(written)
}
