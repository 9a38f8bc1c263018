//! Forward surrogate trained with rank-based sample weights, used to pick the
//! most promising generated designs.

use std::path::Path;

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::checkpoint;
use crate::dataset::{DesignStats, OfflineDataset};
use crate::denoiser::{optimize, TrainConfig, TrainOutput};
use crate::nn::{cast, relu, relu_backward, Init, Linear, ParamStore, Scalar};
use crate::stats;
use crate::tasks::{CandidateSet, Provenance};
use crate::{rng, Error, Result};

pub const CHECKPOINT_KIND: &str = "proxy";
pub const DEFAULT_RANK_K: f64 = 0.01;

/// Per-example weights `w_i ∝ 1 / (k N + rank_i)`, rescaled to sum to `N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankWeights {
    pub k: f64,
    pub weights: Vec<f64>,
}

/// Dense ranks from the best score (rank 0); tied scores share a rank.
pub fn dense_ranks_desc(scores: &[f64]) -> Vec<usize> {
    let mut distinct = scores.to_vec();
    distinct.sort_by(|a, b| b.total_cmp(a));
    distinct.dedup();
    scores
        .iter()
        .map(|s| distinct.partition_point(|d| d > s))
        .collect()
}

pub fn rank_weights(scores: &[f64], k: f64) -> Result<RankWeights> {
    if scores.is_empty() {
        return Err(Error::Empty("scores".into()));
    }
    if !(k > 0.0) {
        return Err(Error::InvalidArgument(format!("rank kernel k must be > 0, got {k}")));
    }
    let n = scores.len() as f64;
    let raw: Vec<f64> = dense_ranks_desc(scores)
        .into_iter()
        .map(|r| 1.0 / (k * n + r as f64))
        .collect();
    let total: f64 = raw.iter().sum();
    Ok(RankWeights {
        k,
        weights: raw.iter().map(|w| w * n / total).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProxyArch {
    pub input_dim: usize,
    pub hidden: usize,
    pub layers: usize,
}

/// ReLU MLP from a normalized design to a normalized score.
#[derive(Debug, Clone)]
pub struct ProxyModel<F> {
    arch: ProxyArch,
    x_stats: DesignStats,
    params: ParamStore<F>,
    layers: Vec<Linear>,
}

#[derive(Serialize, Deserialize)]
struct ProxyHeader {
    arch: ProxyArch,
    x_stats: DesignStats,
}

impl<F: Scalar> ProxyModel<F> {
    pub fn new(arch: ProxyArch, x_stats: DesignStats, seed: u64) -> Result<Self> {
        if arch.input_dim == 0 || arch.hidden == 0 {
            return Err(Error::InvalidArgument("proxy dimensions must be positive".into()));
        }
        if x_stats.dim() != arch.input_dim {
            return Err(Error::shape(arch.input_dim, x_stats.dim()));
        }
        let mut r = rng::stream(seed, "proxy-init", 0);
        let mut params = ParamStore::new();
        let mut layers = Vec::with_capacity(arch.layers + 1);
        let mut fan_in = arch.input_dim;
        for l in 0..arch.layers {
            layers.push(Linear::new(&mut params, &format!("fc{l}"), fan_in, arch.hidden, true, Init::Uniform, &mut r));
            fan_in = arch.hidden;
        }
        layers.push(Linear::new(&mut params, "head", fan_in, 1, true, Init::Uniform, &mut r));
        Ok(Self {
            arch,
            x_stats,
            params,
            layers,
        })
    }

    fn from_params(arch: ProxyArch, x_stats: DesignStats, params: ParamStore<F>) -> Result<Self> {
        let mut c = 0;
        let mut layers = Vec::with_capacity(arch.layers + 1);
        let mut fan_in = arch.input_dim;
        for _ in 0..arch.layers {
            layers.push(Linear::bind(&params, &mut c, fan_in, arch.hidden, true)?);
            fan_in = arch.hidden;
        }
        layers.push(Linear::bind(&params, &mut c, fan_in, 1, true)?);
        if c != params.tensors().len() {
            return Err(Error::Checkpoint("extra tensors in proxy checkpoint".into()));
        }
        Ok(Self {
            arch,
            x_stats,
            params,
            layers,
        })
    }

    pub fn arch(&self) -> &ProxyArch {
        &self.arch
    }

    pub fn params(&self) -> &ParamStore<F> {
        &self.params
    }

    fn normalize_rows(&self, designs: &[Vec<f64>]) -> Result<Array2<F>> {
        let d = self.arch.input_dim;
        let mut x = Array2::<F>::zeros((designs.len(), d));
        for (i, row) in designs.iter().enumerate() {
            if row.len() != d {
                return Err(Error::shape(d, row.len()));
            }
            for (j, v) in self.x_stats.normalize(row).into_iter().enumerate() {
                x[[i, j]] = cast(v);
            }
        }
        Ok(x)
    }

    fn forward_cached(&self, p: &ParamStore<F>, x: ArrayView2<'_, F>) -> (Array2<F>, Vec<Array2<F>>, Vec<Array2<F>>) {
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len() - 1);
        let mut h = x.to_owned();
        for (l, layer) in self.layers.iter().enumerate() {
            let z = layer.forward(p, h.view());
            inputs.push(h);
            if l + 1 == self.layers.len() {
                return (z, inputs, pre);
            }
            h = relu(&z);
            pre.push(z);
        }
        unreachable!("proxy has a head layer")
    }

    fn backward(
        &self,
        p: &ParamStore<F>,
        inputs: &[Array2<F>],
        pre: &[Array2<F>],
        grad_out: Array2<F>,
        grads: &mut ParamStore<F>,
    ) {
        let mut g = grad_out;
        for l in (0..self.layers.len()).rev() {
            if l == 0 {
                self.layers[0].backward_params(grads, inputs[0].view(), g.view());
            } else {
                let gx = self.layers[l].backward(p, grads, inputs[l].view(), g.view());
                g = relu_backward(&pre[l - 1], &gx);
            }
        }
    }

    /// Predicted normalized scores for raw designs.
    pub fn predict(&self, designs: &[Vec<f64>]) -> Result<Vec<f64>> {
        if designs.is_empty() {
            return Ok(Vec::new());
        }
        let x = self.normalize_rows(designs)?;
        let (y, _, _) = self.forward_cached(&self.params, x.view());
        Ok(y.column(0).iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).collect())
    }

    pub fn save(&self, path: &Path, metadata: serde_json::Value) -> Result<()> {
        let arch = serde_json::to_value(ProxyHeader {
            arch: self.arch.clone(),
            x_stats: self.x_stats.clone(),
        })?;
        let bytes = checkpoint::encode(CHECKPOINT_KIND, arch, metadata, &self.params)?;
        checkpoint::write_file(path, &bytes)
    }

    pub fn load(path: &Path) -> Result<(Self, serde_json::Value)> {
        let bytes = checkpoint::read_file(path)?;
        let (header, params) = checkpoint::decode::<F>(&bytes)?;
        if header.kind != CHECKPOINT_KIND {
            return Err(Error::Checkpoint(format!("expected proxy, found {}", header.kind)));
        }
        let h: ProxyHeader = serde_json::from_value(header.arch)?;
        Ok((Self::from_params(h.arch, h.x_stats, params)?, header.metadata))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub n_train: usize,
    pub n_val: usize,
    pub split_seed: u64,
    /// On the normalized score scale.
    pub val_rmse: f64,
    pub val_spearman: f64,
    pub final_train_loss: f64,
}

/// Weighted least squares on arbitrary normalized targets.
pub fn fit_regressor<F: Scalar>(
    model: &mut ProxyModel<F>,
    designs: &[Vec<f64>],
    targets: &[f64],
    weights: &[f64],
    cfg: &TrainConfig,
) -> Result<TrainOutput> {
    if designs.len() != targets.len() || targets.len() != weights.len() {
        return Err(Error::shape(designs.len(), format!("{} / {}", targets.len(), weights.len())));
    }
    let x = model.normalize_rows(designs)?;
    let y: Vec<F> = targets.iter().map(|&v| cast(v)).collect();
    let w: Vec<F> = weights.iter().map(|&v| cast(v)).collect();
    let mut params = std::mem::take(&mut model.params);
    let shell = &*model;
    let result = optimize(&mut params, designs.len(), cfg, "proxy-train", |p, batch, _, grads| {
        let xb = x.select(Axis(0), batch);
        let (pred, inputs, pre) = shell.forward_cached(p, xb.view());
        let scale = cast::<F>(2.0 / batch.len() as f64);
        let mut loss = 0.0;
        let mut g = Array2::<F>::zeros((batch.len(), 1));
        for (r, &i) in batch.iter().enumerate() {
            let diff = pred[[r, 0]] - y[i];
            loss += (w[i] * diff * diff).to_f64().unwrap_or(f64::NAN);
            g[[r, 0]] = scale * w[i] * diff;
        }
        loss /= batch.len() as f64;
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { step: 0, value: loss });
        }
        shell.backward(p, &inputs, &pre, g, grads);
        Ok(loss)
    });
    model.params = params;
    result
}

/// Train on a seeded 90/10 split of the dataset with the given per-row weights.
pub fn train_proxy<F: Scalar>(
    ds: &OfflineDataset,
    arch: ProxyArch,
    cfg: &TrainConfig,
    weights: &RankWeights,
) -> Result<(ProxyModel<F>, ValidationReport)> {
    if ds.len() < 10 {
        return Err(Error::InvalidArgument(format!(
            "proxy training needs at least 10 rows, dataset has {}",
            ds.len()
        )));
    }
    if weights.weights.len() != ds.len() {
        return Err(Error::shape(ds.len(), weights.weights.len()));
    }
    let mut order: Vec<usize> = (0..ds.len()).collect();
    rand::seq::SliceRandom::shuffle(&mut order[..], &mut rng::stream(cfg.seed, "proxy-split", 0));
    let n_val = (ds.len() / 10).max(1);
    let (val, train) = order.split_at(n_val);
    let rows = |ix: &[usize]| -> Vec<Vec<f64>> { ix.iter().map(|&i| ds.design(i).to_vec()).collect() };
    let targets: Vec<f64> = train.iter().map(|&i| ds.normalize_score(ds.score(i))).collect();
    let w: Vec<f64> = train.iter().map(|&i| weights.weights[i]).collect();
    let mut model = ProxyModel::new(arch, ds.x_stats().clone(), cfg.seed)?;
    let out = fit_regressor(&mut model, &rows(train), &targets, &w, cfg)?;
    let val_pred = model.predict(&rows(val))?;
    let val_true: Vec<f64> = val.iter().map(|&i| ds.normalize_score(ds.score(i))).collect();
    let report = ValidationReport {
        n_train: train.len(),
        n_val: val.len(),
        split_seed: cfg.seed,
        val_rmse: stats::rmse(&val_pred, &val_true),
        val_spearman: stats::spearman(&val_pred, &val_true),
        final_train_loss: out.last_decile_mean(),
    };
    Ok((model, report))
}

/// Keep the `q` designs with the highest proxy predictions, best first; ties keep insertion order.
pub fn filter_top_q<F: Scalar>(
    designs: Vec<Vec<f64>>,
    provenance: Vec<Provenance>,
    proxy: &ProxyModel<F>,
    q: usize,
) -> Result<CandidateSet> {
    if q < 1 {
        return Err(Error::InvalidArgument("budget Q must be >= 1".into()));
    }
    if designs.is_empty() {
        return Err(Error::Empty("candidate list".into()));
    }
    if provenance.len() != designs.len() {
        return Err(Error::shape(designs.len(), provenance.len()));
    }
    let predictions = proxy.predict(&designs)?;
    Ok(select_by_score(designs, provenance, predictions, q))
}

pub(crate) fn select_by_score(
    designs: Vec<Vec<f64>>,
    provenance: Vec<Provenance>,
    predictions: Vec<f64>,
    q: usize,
) -> CandidateSet {
    let mut order: Vec<usize> = (0..designs.len()).collect();
    order.sort_by(|&a, &b| predictions[b].total_cmp(&predictions[a]));
    order.truncate(q);
    CandidateSet {
        designs: order.iter().map(|&i| designs[i].clone()).collect(),
        proxy_scores: order.iter().map(|&i| predictions[i]).collect(),
        oracle_scores: None,
        provenance: order.iter().map(|&i| provenance[i]).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_weight_examples() {
        let w = rank_weights(&[5.0, 5.0, 5.0], 0.01).unwrap();
        assert!(w.weights.iter().all(|&v| (v - 1.0).abs() < 1e-12));
        let w = rank_weights(&[2.0, 1.0], 0.5).unwrap();
        assert!((w.weights[0] - 4.0 / 3.0).abs() < 1e-12);
        assert!((w.weights[1] - 2.0 / 3.0).abs() < 1e-12);
        let w = rank_weights(&[3.0, 1.0, 2.0, 0.5], 1e9).unwrap();
        assert!(w.weights.iter().all(|&v| (v - 1.0).abs() < 1e-6));
        assert!(rank_weights(&[1.0], 0.0).is_err());
        assert!(rank_weights(&[], 1.0).is_err());
    }

    #[test]
    fn dense_ranks_share_ties() {
        assert_eq!(dense_ranks_desc(&[1.0, 3.0, 3.0, 2.0]), vec![2, 0, 0, 1]);
    }

    fn tiny_proxy() -> ProxyModel<f64> {
        let stats = DesignStats { low: vec![0.0], high: vec![9.0] };
        ProxyModel::new(ProxyArch { input_dim: 1, hidden: 4, layers: 1 }, stats, 0).unwrap()
    }

    #[test]
    fn select_keeps_highest_in_order() {
        let designs: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let prov: Vec<Provenance> = (0..10).map(|i| Provenance { trajectory: 0, step: i }).collect();
        let preds: Vec<f64> = (0..10).map(f64::from).collect();
        let set = select_by_score(designs, prov, preds, 3);
        assert_eq!(set.proxy_scores, vec![9.0, 8.0, 7.0]);
        assert_eq!(set.designs, vec![vec![9.0], vec![8.0], vec![7.0]]);
    }

    #[test]
    fn ties_keep_insertion_order() {
        let designs: Vec<Vec<f64>> = (0..4).map(|i| vec![i as f64]).collect();
        let prov: Vec<Provenance> = (0..4).map(|i| Provenance { trajectory: i, step: 0 }).collect();
        let set = select_by_score(designs, prov, vec![1.0, 2.0, 1.0, 2.0], 4);
        let t: Vec<usize> = set.provenance.iter().map(|p| p.trajectory).collect();
        assert_eq!(t, vec![1, 3, 0, 2]);
    }

    #[test]
    fn filter_errors() {
        let p = tiny_proxy();
        assert!(filter_top_q(vec![], vec![], &p, 3).is_err());
        assert!(filter_top_q(vec![vec![1.0]], vec![Provenance { trajectory: 0, step: 0 }], &p, 0).is_err());
        let set = filter_top_q(
            vec![vec![1.0], vec![2.0]],
            vec![Provenance { trajectory: 0, step: 0 }; 2],
            &p,
            10,
        )
        .unwrap();
        assert_eq!(set.len(), 2);
        assert!(set.proxy_scores[0] >= set.proxy_scores[1]);
    }

    #[test]
    fn constant_target_is_learned() {
        let stats = DesignStats { low: vec![0.0], high: vec![9.0] };
        let mut p = ProxyModel::<f64>::new(ProxyArch { input_dim: 1, hidden: 16, layers: 2 }, stats, 0).unwrap();
        let designs: Vec<Vec<f64>> = (0..40).map(|i| vec![(i % 10) as f64]).collect();
        let cfg = TrainConfig {
            batch_size: 16,
            learning_rate: 3e-3,
            train_steps: 3000,
            dropout_p: 0.0,
            seed: 3,
            ema_decay: None,
            log_interval: 100,
        };
        fit_regressor(&mut p, &designs, &vec![0.7; 40], &vec![1.0; 40], &cfg).unwrap();
        for y in p.predict(&designs).unwrap() {
            assert!((y - 0.7).abs() < 1e-2, "{y}");
        }
    }

    #[test]
    fn checkpoint_round_trip() {
        let p = tiny_proxy();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.ckpt");
        p.save(&path, serde_json::json!({})).unwrap();
        let (q, _) = ProxyModel::<f64>::load(&path).unwrap();
        assert_eq!(q.params(), p.params());
        assert_eq!(q.predict(&[vec![3.0]]).unwrap(), p.predict(&[vec![3.0]]).unwrap());
    }
}
