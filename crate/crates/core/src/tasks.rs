//! Black-box oracles, synthetic offline datasets, dataset corrupters and
//! candidate evaluation.

use std::f64::consts::PI;

use ndarray::{Array2, ArrayView1};
use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::{euclidean, hamming, nearest_rank, OfflineDataset, SpaceKind};
use crate::{Error, Result};

pub const BRANIN_OPTIMUM: f64 = -0.397_887_357_729_738_1;
pub const BRANIN_ARGMAX: [[f64; 2]; 3] = [[-PI, 12.275], [PI, 2.275], [9.424_78, 2.475]];

/// Negated Branin with the standard constants (inner offset 6).
pub fn branin(x1: f64, x2: f64) -> f64 {
    let b = 5.1 / (4.0 * PI * PI);
    let c = 5.0 / PI;
    let t = 1.0 / (8.0 * PI);
    let q = x2 - b * x1 * x1 + c * x1 - 6.0;
    -q * q - 10.0 * (1.0 - t) * x1.cos() - 10.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum BoundsPolicy {
    #[default]
    Clamp,
    Reject,
}

pub trait Oracle: Send + Sync {
    fn name(&self) -> &str;
    fn dim(&self) -> usize {
        self.bounds().len()
    }
    /// Per-dimension `(low, high)`.
    fn bounds(&self) -> Vec<(f64, f64)>;
    /// Raw score; callers are responsible for bounds.
    fn evaluate(&self, x: &[f64]) -> f64;
    fn known_optimum(&self) -> Option<(f64, Vec<Vec<f64>>)> {
        None
    }

    /// Apply the bounds policy. Returns the (possibly clamped) design and whether it was out of bounds.
    fn enforce_bounds(&self, x: &[f64], policy: BoundsPolicy) -> Result<(Vec<f64>, bool)> {
        let bounds = self.bounds();
        if x.len() != bounds.len() {
            return Err(Error::shape(bounds.len(), x.len()));
        }
        let mut out = x.to_vec();
        let mut clipped = false;
        for (dim, (v, &(lo, hi))) in out.iter_mut().zip(&bounds).enumerate() {
            if *v < lo || *v > hi || v.is_nan() {
                if policy == BoundsPolicy::Reject {
                    return Err(Error::OutOfBounds {
                        dim,
                        value: *v,
                        low: lo,
                        high: hi,
                    });
                }
                clipped = true;
                *v = if v.is_nan() { lo } else { v.clamp(lo, hi) };
            }
        }
        Ok((out, clipped))
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Branin;

impl Oracle for Branin {
    fn name(&self) -> &str {
        "branin"
    }

    fn bounds(&self) -> Vec<(f64, f64)> {
        vec![(-5.0, 10.0), (0.0, 15.0)]
    }

    fn evaluate(&self, x: &[f64]) -> f64 {
        branin(x[0], x[1])
    }

    fn known_optimum(&self) -> Option<(f64, Vec<Vec<f64>>)> {
        Some((BRANIN_OPTIMUM, BRANIN_ARGMAX.iter().map(|p| p.to_vec()).collect()))
    }
}

/// `-|x - center|^2` on a box; a smooth unimodal landscape for tests.
#[derive(Debug, Clone)]
pub struct NegSphere {
    pub center: Vec<f64>,
    pub low: f64,
    pub high: f64,
}

impl Oracle for NegSphere {
    fn name(&self) -> &str {
        "sphere"
    }

    fn bounds(&self) -> Vec<(f64, f64)> {
        vec![(self.low, self.high); self.center.len()]
    }

    fn evaluate(&self, x: &[f64]) -> f64 {
        -x.iter().zip(&self.center).map(|(a, c)| (a - c).powi(2)).sum::<f64>()
    }

    fn known_optimum(&self) -> Option<(f64, Vec<Vec<f64>>)> {
        Some((0.0, vec![self.center.clone()]))
    }
}

pub fn oracle_by_name(name: &str, dim: usize) -> Result<Box<dyn Oracle>> {
    match name {
        "branin" => Ok(Box::new(Branin)),
        "sphere" => Ok(Box::new(NegSphere {
            center: vec![0.5; dim.max(1)],
            low: -2.0,
            high: 2.0,
        })),
        other => Err(Error::Config(format!("unknown task {other:?} (expected branin or sphere)"))),
    }
}

/// Uniform samples over the oracle box with the top `trim` fraction by score removed.
pub fn make_dataset<R: Rng + ?Sized>(oracle: &dyn Oracle, n: usize, trim: f64, rng: &mut R) -> Result<OfflineDataset> {
    if n < 10 {
        return Err(Error::InvalidArgument(format!("need at least 10 samples, got {n}")));
    }
    if !(0.0..1.0).contains(&trim) {
        return Err(Error::InvalidArgument(format!("trim fraction must be in [0, 1), got {trim}")));
    }
    let bounds = oracle.bounds();
    let d = bounds.len();
    let mut designs = Array2::<f64>::zeros((n, d));
    let mut scores = Vec::with_capacity(n);
    for i in 0..n {
        for (j, &(lo, hi)) in bounds.iter().enumerate() {
            designs[[i, j]] = rng.random_range(lo..=hi);
        }
        scores.push(oracle.evaluate(designs.row(i).as_slice().expect("row-major")));
    }
    let removed = (trim * n as f64 + 1e-9).floor() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    // Stable ascending sort; the last `removed` entries are the best scores.
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut keep = order[..n - removed].to_vec();
    keep.sort_unstable();
    let rows: Vec<Vec<f64>> = keep.iter().map(|&i| designs.row(i).to_vec()).collect();
    OfflineDataset::from_rows(&rows, keep.iter().map(|&i| scores[i]).collect(), SpaceKind::Continuous)
}

pub fn make_branin_dataset<R: Rng + ?Sized>(n: usize, trim: f64, rng: &mut R) -> Result<OfflineDataset> {
    make_dataset(&Branin, n, trim, rng)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Corruption {
    Sparse,
    Noisy,
}

impl std::str::FromStr for Corruption {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sparse" => Ok(Self::Sparse),
            "noisy" => Ok(Self::Noisy),
            other => Err(Error::Config(format!("unknown corruption {other:?}"))),
        }
    }
}

/// Sparse keeps a uniform `level` fraction of rows in their original order;
/// noisy perturbs normalized scores by `level * N(0, 1)`.
pub fn corrupt_dataset<R: Rng + ?Sized>(
    ds: &OfflineDataset,
    mode: Corruption,
    level: f64,
    rng: &mut R,
) -> Result<OfflineDataset> {
    if !(level > 0.0 && level <= 1.0) {
        return Err(Error::InvalidArgument(format!("corruption level must be in (0, 1], got {level}")));
    }
    match mode {
        Corruption::Sparse => {
            let keep = (level * ds.len() as f64 + 1e-9).floor() as usize;
            if keep < 10 {
                return Err(Error::InvalidArgument(format!(
                    "sparse corruption leaves {keep} rows; at least 10 are required"
                )));
            }
            let mut rows = index::sample(rng, ds.len(), keep).into_vec();
            rows.sort_unstable();
            ds.subset(&rows)
        }
        Corruption::Noisy => {
            let scores = ds
                .scores()
                .iter()
                .map(|&y| {
                    let z: f64 = StandardNormal.sample(rng);
                    ds.denormalize_score(ds.normalize_score(y) + level * z)
                })
                .collect();
            ds.with_scores(scores)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub trajectory: usize,
    /// 1-based position inside the trajectory.
    pub step: usize,
}

/// Parallel arrays describing the selected designs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub designs: Vec<Vec<f64>>,
    pub proxy_scores: Vec<f64>,
    pub oracle_scores: Option<Vec<f64>>,
    pub provenance: Vec<Provenance>,
}

impl CandidateSet {
    pub fn len(&self) -> usize {
        self.designs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.designs.is_empty()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let set: Self = serde_json::from_str(text)?;
        let n = set.designs.len();
        let oracle_len = set.oracle_scores.as_ref().map_or(n, Vec::len);
        if set.proxy_scores.len() != n || set.provenance.len() != n || oracle_len != n {
            return Err(Error::Serde("candidate arrays differ in length".into()));
        }
        Ok(set)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub count: usize,
    pub best_raw: f64,
    pub best_normalized: f64,
    pub p100: f64,
    pub p80: f64,
    pub p50: f64,
    pub clamped: usize,
    pub oracle: String,
    pub y_min: f64,
    pub y_max: f64,
}

/// Score every candidate once. Normalization uses the dataset's score range, so
/// values above 1 beat the best offline design.
pub fn evaluate_candidates(
    mut cands: CandidateSet,
    oracle: &dyn Oracle,
    ds: &OfflineDataset,
    policy: BoundsPolicy,
) -> Result<(CandidateSet, EvalReport)> {
    if cands.is_empty() {
        return Err(Error::Empty("candidate set".into()));
    }
    let mut clamped = 0;
    let mut scores = Vec::with_capacity(cands.len());
    for x in &cands.designs {
        let (x, clipped) = oracle.enforce_bounds(x, policy)?;
        clamped += clipped as usize;
        scores.push(oracle.evaluate(&x));
    }
    if clamped > 0 {
        log::warn!("{clamped} of {} candidates were outside the oracle box and clamped", cands.len());
    }
    let mut norm: Vec<f64> = scores.iter().map(|&y| ds.normalize_score(y)).collect();
    norm.sort_by(f64::total_cmp);
    let best_raw = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let report = EvalReport {
        count: scores.len(),
        best_raw,
        best_normalized: ds.normalize_score(best_raw),
        p100: nearest_rank(&norm, 100.0),
        p80: nearest_rank(&norm, 80.0),
        p50: nearest_rank(&norm, 50.0),
        clamped,
        oracle: oracle.name().to_string(),
        y_min: ds.y_min(),
        y_max: ds.y_max(),
    };
    cands.oracle_scores = Some(scores);
    Ok((cands, report))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Euclidean,
    Hamming,
}

/// Mean pairwise distance over ordered pairs of distinct candidates.
pub fn diversity(designs: &[Vec<f64>], metric: Metric) -> Result<f64> {
    let n = designs.len();
    if n < 2 {
        return Err(Error::InvalidArgument(format!("diversity needs at least 2 designs, got {n}")));
    }
    let d = match metric {
        Metric::Euclidean => euclidean,
        Metric::Hamming => hamming,
    };
    let mut total = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            total += d(ArrayView1::from(&designs[i][..]), ArrayView1::from(&designs[j][..]));
        }
    }
    Ok(2.0 * total / (n * (n - 1)) as f64)
}
