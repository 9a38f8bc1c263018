//! Locality-biased improvement trajectories built from an offline dataset.
//!
//! Each trajectory starts from a low-percentile point and repeatedly hops to
//! a random member of the K nearest neighbors whose score beats the running
//! maximum minus a tolerance.

use std::fs;
use std::path::Path;

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{NeighborIndex, OfflineDataset};
use crate::{rng, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstructionConfig {
    /// Starting percentile, in `(0, 100]`.
    pub percentile: f64,
    pub horizon: usize,
    pub count: usize,
    pub k: usize,
    /// Tolerance in normalized-score units; converted to raw units internally.
    pub epsilon: f64,
}

impl ConstructionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon < 2 {
            return Err(Error::InvalidArgument("horizon must be >= 2".into()));
        }
        if self.k < 1 {
            return Err(Error::InvalidArgument("k must be >= 1".into()));
        }
        if self.count < 1 {
            return Err(Error::InvalidArgument("trajectory count must be >= 1".into()));
        }
        if self.epsilon.is_nan() || self.epsilon < 0.0 {
            return Err(Error::InvalidArgument("epsilon must be >= 0".into()));
        }
        if !(self.percentile > 0.0 && self.percentile <= 100.0) {
            return Err(Error::InvalidArgument("percentile must be in (0, 100]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub designs: Vec<Vec<f64>>,
    pub raw_scores: Vec<f64>,
    pub normalized_scores: Vec<f64>,
    /// Dataset rows the steps came from; absent for generated trajectories.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub indices: Option<Vec<usize>>,
}

impl Trajectory {
    pub fn from_indices(ds: &OfflineDataset, indices: Vec<usize>) -> Self {
        Self {
            designs: indices.iter().map(|&i| ds.design(i).to_vec()).collect(),
            raw_scores: indices.iter().map(|&i| ds.score(i)).collect(),
            normalized_scores: indices.iter().map(|&i| ds.normalize_score(ds.score(i))).collect(),
            indices: Some(indices),
        }
    }

    pub fn len(&self) -> usize {
        self.designs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.designs.is_empty()
    }

    /// Condition value: sum of normalized scores.
    pub fn score_sum(&self) -> f64 {
        self.normalized_scores.iter().sum()
    }

    /// Model-space array `H x (d + 1)`: designs scaled to `[-1, 1]`, then the normalized score.
    pub fn to_model_array(&self, ds: &OfflineDataset) -> Array2<f64> {
        let d = ds.dim();
        let mut out = Array2::zeros((self.len(), d + 1));
        for (h, (x, &y)) in self.designs.iter().zip(&self.normalized_scores).enumerate() {
            for (j, v) in ds.x_stats().normalize(x).into_iter().enumerate() {
                out[[h, j]] = v;
            }
            out[[h, d]] = y;
        }
        out
    }

    /// Inverse of [`Trajectory::to_model_array`]; the score channel is the model's own estimate.
    pub fn from_model_array(ds: &OfflineDataset, values: &Array2<f64>) -> Self {
        let d = ds.dim();
        let mut designs = Vec::with_capacity(values.nrows());
        let mut raw = Vec::with_capacity(values.nrows());
        let mut norm = Vec::with_capacity(values.nrows());
        for row in values.rows() {
            let row = row.to_vec();
            designs.push(ds.x_stats().denormalize(&row[..d]));
            norm.push(row[d]);
            raw.push(ds.denormalize_score(row[d]));
        }
        Self {
            designs,
            raw_scores: raw,
            normalized_scores: norm,
            indices: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryDataset {
    pub config: ConstructionConfig,
    pub trajectories: Vec<Trajectory>,
}

impl TrajectoryDataset {
    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn horizon(&self) -> usize {
        self.config.horizon
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ds: Self = serde_json::from_str(text)?;
        if ds.trajectories.is_empty() {
            return Err(Error::Empty("trajectory dataset".into()));
        }
        if ds.trajectories.iter().any(|t| t.len() != ds.config.horizon) {
            return Err(Error::shape(
                format!("uniform horizon {}", ds.config.horizon),
                "ragged trajectories",
            ));
        }
        Ok(ds)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Grow one trajectory from `start`; returns dataset row indices.
pub fn walk<R: Rng + ?Sized>(
    ds: &OfflineDataset,
    idx: &NeighborIndex,
    cfg: &ConstructionConfig,
    start: usize,
    rng: &mut R,
) -> Vec<usize> {
    let eps_raw = cfg.epsilon * (ds.y_max() - ds.y_min());
    let mut path = Vec::with_capacity(cfg.horizon);
    path.push(start);
    let mut running_max = ds.score(start);
    while path.len() < cfg.horizon {
        let current = *path.last().expect("nonempty");
        let mut neighbors = idx.knn_above_threshold(ds, current, cfg.k, running_max - eps_raw);
        if neighbors.is_empty() {
            // Nothing qualifies: take the unconstrained K nearest for this step.
            neighbors = idx.knn_above_threshold(ds, current, cfg.k, f64::NEG_INFINITY);
        }
        let next = neighbors[rng.random_range(0..neighbors.len())];
        running_max = running_max.max(ds.score(next));
        path.push(next);
    }
    path
}

/// Build `cfg.count` trajectories; trajectory `n` draws from its own stream `(seed, n)`.
pub fn build_trajectories(
    ds: &OfflineDataset,
    idx: &NeighborIndex,
    cfg: &ConstructionConfig,
    seed: u64,
) -> Result<TrajectoryDataset> {
    cfg.validate()?;
    if ds.len() < 2 {
        return Err(Error::InvalidArgument("need at least two dataset rows".into()));
    }
    let trajectories = (0..cfg.count)
        .map(|n| {
            let mut r = rng::stream(seed, "trajectory", n as u64);
            let start = ds.sample_low_percentile(cfg.percentile, &mut r)?;
            Ok(Trajectory::from_indices(ds, walk(ds, idx, cfg, start, &mut r)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TrajectoryDataset {
        config: *cfg,
        trajectories,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub std: f64,
    /// 10th, 20th, ..., 100th nearest-rank percentiles.
    pub deciles: Vec<f64>,
}

impl Summary {
    pub fn of(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty("no values to summarize".into()));
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let deciles = (1..=10)
            .map(|k| crate::dataset::nearest_rank(&sorted, 10.0 * k as f64))
            .collect();
        Ok(Self {
            count: values.len(),
            mean,
            std: var.sqrt(),
            deciles,
        })
    }
}

/// Raw-score distribution of trajectory steps next to the dataset's own.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreShift {
    pub dataset: Summary,
    pub trajectories: Summary,
}

impl ScoreShift {
    pub fn mean_shift(&self) -> f64 {
        self.trajectories.mean - self.dataset.mean
    }
}

pub fn score_shift_stats(traj: &TrajectoryDataset, ds: &OfflineDataset) -> Result<ScoreShift> {
    let steps: Vec<f64> = traj
        .trajectories
        .iter()
        .flat_map(|t| t.raw_scores.iter().copied())
        .collect();
    Ok(ScoreShift {
        dataset: Summary::of(ds.scores())?,
        trajectories: Summary::of(&steps)?,
    })
}
