//! Offline dataset of (design, score) pairs, its normalization state, and
//! the pairwise-distance index used for locality-biased neighbor queries.

use std::cmp::Ordering;
use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::time::{Duration, Instant};

use ndarray::{Array2, ArrayView1};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SpaceKind {
    #[default]
    Continuous,
    Discrete,
}

impl FromStr for SpaceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "continuous" => Ok(SpaceKind::Continuous),
            "discrete" => Ok(SpaceKind::Discrete),
            other => Err(Error::InvalidArgument(format!("unknown space kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataFormat {
    Csv,
    Json,
}

impl DataFormat {
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => DataFormat::Json,
            _ => DataFormat::Csv,
        }
    }
}

impl FromStr for DataFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(DataFormat::Csv),
            "json" => Ok(DataFormat::Json),
            other => Err(Error::InvalidArgument(format!("unknown data format {other:?}"))),
        }
    }
}

/// Per-dimension min/max of the designs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignStats {
    pub low: Vec<f64>,
    pub high: Vec<f64>,
}

impl DesignStats {
    pub fn from_designs(designs: &Array2<f64>) -> Self {
        let d = designs.ncols();
        let mut low = vec![f64::INFINITY; d];
        let mut high = vec![f64::NEG_INFINITY; d];
        for row in designs.rows() {
            for (j, &v) in row.iter().enumerate() {
                low[j] = low[j].min(v);
                high[j] = high[j].max(v);
            }
        }
        Self { low, high }
    }

    pub fn dim(&self) -> usize {
        self.low.len()
    }

    /// Map into `[-1, 1]` per dimension; degenerate dimensions map to 0.
    pub fn normalize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(j, &v)| {
                let span = self.high[j] - self.low[j];
                if span > 0.0 {
                    2.0 * (v - self.low[j]) / span - 1.0
                } else {
                    0.0
                }
            })
            .collect()
    }

    pub fn denormalize(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .enumerate()
            .map(|(j, &v)| {
                let span = self.high[j] - self.low[j];
                self.low[j] + (v + 1.0) * 0.5 * span
            })
            .collect()
    }
}

/// Offline dataset `D = {(x_i, y_i)}`.
#[derive(Debug, Clone, PartialEq)]
pub struct OfflineDataset {
    designs: Array2<f64>,
    scores: Vec<f64>,
    x_stats: DesignStats,
    y_min: f64,
    y_max: f64,
    space: SpaceKind,
}

#[derive(Serialize, Deserialize)]
struct DatasetFile {
    designs: Vec<Vec<f64>>,
    scores: Vec<f64>,
    #[serde(default)]
    space: SpaceKind,
}

impl OfflineDataset {
    /// Build from rows; computes normalization statistics.
    pub fn new(designs: Array2<f64>, scores: Vec<f64>, space: SpaceKind) -> Result<Self> {
        if scores.is_empty() {
            return Err(Error::Empty("dataset has no rows".into()));
        }
        if designs.nrows() != scores.len() {
            return Err(Error::shape(
                format!("{} designs", scores.len()),
                format!("{} designs", designs.nrows()),
            ));
        }
        if let Some(i) = scores.iter().position(|y| !y.is_finite()) {
            return Err(Error::MalformedRow {
                row: i,
                reason: "non-finite score".into(),
            });
        }
        if let Some((i, _)) = designs
            .rows()
            .into_iter()
            .enumerate()
            .find(|(_, r)| r.iter().any(|v| !v.is_finite()))
        {
            return Err(Error::MalformedRow {
                row: i,
                reason: "non-finite design value".into(),
            });
        }
        let y_min = scores.iter().copied().fold(f64::INFINITY, f64::min);
        let y_max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if y_min >= y_max {
            return Err(Error::ConstantScores(y_min));
        }
        let x_stats = DesignStats::from_designs(&designs);
        Ok(Self {
            designs,
            scores,
            x_stats,
            y_min,
            y_max,
            space,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], scores: Vec<f64>, space: SpaceKind) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        let mut flat = Vec::with_capacity(rows.len() * d);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != d {
                return Err(Error::InconsistentDim {
                    row: i,
                    expected: d,
                    found: r.len(),
                });
            }
            flat.extend_from_slice(r);
        }
        let designs = Array2::from_shape_vec((rows.len(), d), flat)
            .map_err(|e| Error::shape("rectangular designs", e))?;
        Self::new(designs, scores, space)
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.designs.ncols()
    }

    pub fn designs(&self) -> &Array2<f64> {
        &self.designs
    }

    pub fn design(&self, i: usize) -> ArrayView1<'_, f64> {
        self.designs.row(i)
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn score(&self, i: usize) -> f64 {
        self.scores[i]
    }

    pub fn y_min(&self) -> f64 {
        self.y_min
    }

    pub fn y_max(&self) -> f64 {
        self.y_max
    }

    pub fn x_stats(&self) -> &DesignStats {
        &self.x_stats
    }

    pub fn space(&self) -> SpaceKind {
        self.space
    }

    pub fn best_index(&self) -> usize {
        (0..self.len())
            .max_by(|&a, &b| self.scores[a].total_cmp(&self.scores[b]).then(b.cmp(&a)))
            .expect("nonempty")
    }

    /// `(y - y_min) / (y_max - y_min)`; values outside the dataset range map outside `[0, 1]`.
    pub fn normalize_score(&self, y: f64) -> f64 {
        (y - self.y_min) / (self.y_max - self.y_min)
    }

    pub fn denormalize_score(&self, z: f64) -> f64 {
        self.y_min + z * (self.y_max - self.y_min)
    }

    pub fn normalized_scores(&self) -> Vec<f64> {
        self.scores.iter().map(|&y| self.normalize_score(y)).collect()
    }

    /// Keep the given rows, in the given order, recomputing statistics.
    pub fn subset(&self, rows: &[usize]) -> Result<Self> {
        let d = self.dim();
        let mut flat = Vec::with_capacity(rows.len() * d);
        for &i in rows {
            flat.extend(self.designs.row(i).iter().copied());
        }
        let designs = Array2::from_shape_vec((rows.len(), d), flat).expect("shape");
        let scores = rows.iter().map(|&i| self.scores[i]).collect();
        Self::new(designs, scores, self.space)
    }

    pub fn with_scores(&self, scores: Vec<f64>) -> Result<Self> {
        Self::new(self.designs.clone(), scores, self.space)
    }

    /// Nearest-rank p-th percentile of the scores, `p` in `(0, 100]`.
    pub fn score_percentile(&self, p: f64) -> Result<f64> {
        check_percentile(p)?;
        let mut sorted = self.scores.clone();
        sorted.sort_by(f64::total_cmp);
        Ok(nearest_rank(&sorted, p))
    }

    /// Uniform draw among points whose score is at most the p-th percentile.
    pub fn sample_low_percentile<R: Rng + ?Sized>(&self, p: f64, rng: &mut R) -> Result<usize> {
        let cut = self.score_percentile(p)?;
        let eligible: Vec<usize> = (0..self.len()).filter(|&i| self.scores[i] <= cut).collect();
        Ok(eligible[rng.random_range(0..eligible.len())])
    }

    pub fn load(path: &Path, format: DataFormat, space: Option<SpaceKind>) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        match format {
            DataFormat::Csv => Self::parse_csv(&text, space),
            DataFormat::Json => Self::parse_json(&text, space),
        }
    }

    /// CSV with header `x0,...,x{d-1},y`. An optional first line
    /// `# space=discrete` marks integer-coded designs; `space` overrides it.
    pub fn parse_csv(text: &str, space: Option<SpaceKind>) -> Result<Self> {
        let mut flagged = None;
        if let Some(first) = text.lines().next() {
            if let Some(rest) = first.trim().strip_prefix('#') {
                if let Some(v) = rest.trim().strip_prefix("space=") {
                    flagged = Some(v.parse::<SpaceKind>()?);
                }
            }
        }
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let header_len = reader.headers()?.len();
        if header_len < 2 {
            return Err(Error::MalformedRow {
                row: 0,
                reason: "header needs at least one design column and a score column".into(),
            });
        }
        let d = header_len - 1;
        let mut flat = Vec::new();
        let mut scores = Vec::new();
        for (i, rec) in reader.records().enumerate() {
            let rec = rec.map_err(|e| match e.kind() {
                csv::ErrorKind::UnequalLengths { len, .. } => Error::InconsistentDim {
                    row: i,
                    expected: d,
                    found: (*len as usize).saturating_sub(1),
                },
                _ => Error::MalformedRow {
                    row: i,
                    reason: e.to_string(),
                },
            })?;
            let mut values = Vec::with_capacity(header_len);
            for field in rec.iter() {
                values.push(field.parse::<f64>().map_err(|_| Error::MalformedRow {
                    row: i,
                    reason: format!("not a number: {field:?}"),
                })?);
            }
            scores.push(values.pop().expect("nonempty record"));
            flat.extend(values);
        }
        let n = scores.len();
        let designs = Array2::from_shape_vec((n, d), flat).expect("validated widths");
        Self::new(designs, scores, space.or(flagged).unwrap_or_default())
    }

    pub fn parse_json(text: &str, space: Option<SpaceKind>) -> Result<Self> {
        let file: DatasetFile = serde_json::from_str(text)?;
        if file.designs.len() != file.scores.len() {
            return Err(Error::shape(
                format!("{} designs", file.scores.len()),
                format!("{} designs", file.designs.len()),
            ));
        }
        Self::from_rows(&file.designs, file.scores, space.unwrap_or(file.space))
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        if self.space == SpaceKind::Discrete {
            out.push_str("# space=discrete\n");
        }
        let header: Vec<String> = (0..self.dim())
            .map(|j| format!("x{j}"))
            .chain(std::iter::once("y".to_string()))
            .collect();
        out.push_str(&header.join(","));
        out.push('\n');
        for (row, y) in self.designs.rows().into_iter().zip(&self.scores) {
            let fields: Vec<String> = row
                .iter()
                .chain(std::iter::once(y))
                .map(|v| format!("{v:?}"))
                .collect();
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_json_string(&self) -> Result<String> {
        let file = DatasetFile {
            designs: self.designs.rows().into_iter().map(|r| r.to_vec()).collect(),
            scores: self.scores.clone(),
            space: self.space,
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn save(&self, path: &Path, format: DataFormat) -> Result<()> {
        let text = match format {
            DataFormat::Csv => self.to_csv_string(),
            DataFormat::Json => self.to_json_string()?,
        };
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

fn check_percentile(p: f64) -> Result<()> {
    if !(p > 0.0 && p <= 100.0) {
        return Err(Error::InvalidArgument(format!(
            "percentile {p} outside (0, 100]"
        )));
    }
    Ok(())
}

/// Nearest-rank percentile of ascending `sorted`: element at rank `ceil(p/100 * n)`.
pub fn nearest_rank(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let rank = ((p / 100.0) * n as f64).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

pub fn euclidean(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn hamming(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).filter(|(x, y)| x != y).count() as f64
}

fn distance(space: SpaceKind, a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    match space {
        SpaceKind::Continuous => euclidean(a, b),
        SpaceKind::Discrete => hamming(a, b),
    }
}

fn by_distance(row: &[f64]) -> impl Fn(&u32, &u32) -> Ordering + '_ {
    move |&a, &b| {
        row[a as usize]
            .total_cmp(&row[b as usize])
            .then(a.cmp(&b))
    }
}

#[derive(Debug, Clone)]
enum Storage {
    /// Dense N x N distances plus per-row orderings (self first).
    Dense {
        distances: Array2<f64>,
        order: Vec<Vec<u32>>,
    },
    /// Distances computed per query; for datasets too large for a dense matrix.
    OnTheFly,
}

/// Pairwise design distances (Euclidean or Hamming) with sorted neighbor orderings.
///
/// The dense form costs `N^2 * 12` bytes (about 240 MB at N = 4500).
#[derive(Debug, Clone)]
pub struct NeighborIndex {
    space: SpaceKind,
    n: usize,
    storage: Storage,
    build_time: Duration,
}

impl NeighborIndex {
    pub fn build(ds: &OfflineDataset) -> Self {
        let start = Instant::now();
        let n = ds.len();
        let mut distances = Array2::<f64>::zeros((n, n));
        for i in 0..n {
            for j in (i + 1)..n {
                let v = distance(ds.space(), ds.design(i), ds.design(j));
                distances[[i, j]] = v;
                distances[[j, i]] = v;
            }
        }
        let order = (0..n)
            .map(|i| {
                let row = distances.row(i);
                let row = row.as_slice().expect("standard layout");
                let mut idx: Vec<u32> = (0..n as u32).collect();
                idx.sort_unstable_by(by_distance(row));
                idx
            })
            .collect();
        Self {
            space: ds.space(),
            n,
            storage: Storage::Dense { distances, order },
            build_time: start.elapsed(),
        }
    }

    pub fn on_the_fly(ds: &OfflineDataset) -> Self {
        Self {
            space: ds.space(),
            n: ds.len(),
            storage: Storage::OnTheFly,
            build_time: Duration::ZERO,
        }
    }

    pub fn build_time(&self) -> Duration {
        self.build_time
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.storage, Storage::Dense { .. })
    }

    pub fn distance(&self, ds: &OfflineDataset, i: usize, j: usize) -> f64 {
        match &self.storage {
            Storage::Dense { distances, .. } => distances[[i, j]],
            Storage::OnTheFly => distance(self.space, ds.design(i), ds.design(j)),
        }
    }

    /// The K nearest neighbors of `center` (excluding itself) whose raw score is
    /// strictly above `threshold`, in non-decreasing distance order with ties
    /// broken toward the smaller index.
    pub fn knn_above_threshold(
        &self,
        ds: &OfflineDataset,
        center: usize,
        k: usize,
        threshold: f64,
    ) -> Vec<usize> {
        let qualifies = |j: usize| j != center && ds.score(j) > threshold;
        match &self.storage {
            Storage::Dense { order, .. } => order[center]
                .iter()
                .map(|&j| j as usize)
                .filter(|&j| qualifies(j))
                .take(k)
                .collect(),
            Storage::OnTheFly => {
                let row: Vec<f64> = (0..self.n)
                    .map(|j| distance(self.space, ds.design(center), ds.design(j)))
                    .collect();
                let mut idx: Vec<u32> = (0..self.n as u32)
                    .filter(|&j| qualifies(j as usize))
                    .collect();
                idx.sort_unstable_by(by_distance(&row));
                idx.truncate(k);
                idx.into_iter().map(|j| j as usize).collect()
            }
        }
    }
}
