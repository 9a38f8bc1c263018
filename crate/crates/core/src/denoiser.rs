//! Residual MLP noise predictor over flattened trajectory arrays.
//!
//! ```text
//! e     = silu(time_mlp(sinusoid(t)) + cond_mlp(c / cond_scale) | null_embedding)
//! h     = x W_in + b_in
//! h    += fc2(silu(fc1(h) + emb(e)))          (per block)
//! eps   = out(silu(h))                          (out is zero-initialized)
//! ```

use std::path::Path;

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::checkpoint;
use crate::diffusion::{cfg_loss, Cond, EpsModel, NoiseSchedule, TrainableEpsModel};
use crate::nn::{cast, silu, silu_backward, Adam, Ema, Init, Linear, ParamId, ParamStore, Scalar};
use crate::trajectory::TrajectoryDataset;
use crate::dataset::OfflineDataset;
use crate::{rng, Error, Result};

pub const CHECKPOINT_KIND: &str = "denoiser";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenoiserArch {
    pub horizon: usize,
    pub channels: usize,
    pub hidden: usize,
    pub blocks: usize,
    pub time_dim: usize,
    /// Condition values are divided by this before embedding (the horizon, for score sums).
    pub cond_scale: f64,
    pub max_timestep: usize,
}

impl DenoiserArch {
    pub fn width(&self) -> usize {
        self.horizon * self.channels
    }

    pub fn validate(&self) -> Result<()> {
        if self.width() == 0 || self.hidden == 0 || self.max_timestep == 0 {
            return Err(Error::InvalidArgument("denoiser dimensions must be positive".into()));
        }
        if self.time_dim < 2 || self.time_dim % 2 != 0 {
            return Err(Error::InvalidArgument("time_dim must be even and >= 2".into()));
        }
        if !(self.cond_scale > 0.0) {
            return Err(Error::InvalidArgument("cond_scale must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
struct Block {
    fc1: Linear,
    emb: Linear,
    fc2: Linear,
}

#[derive(Debug, Clone)]
pub struct Denoiser<F> {
    arch: DenoiserArch,
    params: ParamStore<F>,
    time_fc1: Linear,
    time_fc2: Linear,
    cond_fc1: Linear,
    cond_fc2: Linear,
    null_emb: ParamId,
    input: Linear,
    blocks: Vec<Block>,
    out: Linear,
}

pub struct DenoiserCache<F> {
    x: Array2<F>,
    t_in: Array2<F>,
    t_pre: Array2<F>,
    t_act: Array2<F>,
    c_in: Array2<F>,
    c_pre: Array2<F>,
    c_act: Array2<F>,
    null_rows: Vec<bool>,
    e_pre: Array2<F>,
    e: Array2<F>,
    block_in: Vec<Array2<F>>,
    block_pre: Vec<Array2<F>>,
    block_act: Vec<Array2<F>>,
    h_last: Array2<F>,
    out_in: Array2<F>,
}

/// Sinusoidal embedding of integer timesteps.
pub fn timestep_embedding<F: Scalar>(t: &[usize], dim: usize) -> Array2<F> {
    let half = dim / 2;
    let mut out = Array2::<F>::zeros((t.len(), dim));
    for (i, &step) in t.iter().enumerate() {
        for k in 0..half {
            let freq = (-(10_000f64.ln()) * k as f64 / half as f64).exp();
            let arg = step as f64 * freq;
            out[[i, k]] = cast(arg.sin());
            out[[i, half + k]] = cast(arg.cos());
        }
    }
    out
}

impl<F: Scalar> Denoiser<F> {
    pub fn new(arch: DenoiserArch, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut r = rng::stream(seed, "denoiser-init", 0);
        let mut p = ParamStore::new();
        let (w, hd) = (arch.width(), arch.hidden);
        let time_fc1 = Linear::new(&mut p, "time.fc1", arch.time_dim, hd, true, Init::Uniform, &mut r);
        let time_fc2 = Linear::new(&mut p, "time.fc2", hd, hd, true, Init::Uniform, &mut r);
        let cond_fc1 = Linear::new(&mut p, "cond.fc1", 1, hd, true, Init::Uniform, &mut r);
        let cond_fc2 = Linear::new(&mut p, "cond.fc2", hd, hd, true, Init::Uniform, &mut r);
        let bound = 1.0 / (hd as f64).sqrt();
        let null_data = (0..hd)
            .map(|_| cast(rand::Rng::random_range(&mut r, -bound..bound)))
            .collect();
        let null_emb = p.add("cond.null", vec![hd], null_data);
        let input = Linear::new(&mut p, "input", w, hd, true, Init::Uniform, &mut r);
        let blocks = (0..arch.blocks)
            .map(|l| Block {
                fc1: Linear::new(&mut p, &format!("block{l}.fc1"), hd, hd, true, Init::Uniform, &mut r),
                emb: Linear::new(&mut p, &format!("block{l}.emb"), hd, hd, false, Init::Uniform, &mut r),
                fc2: Linear::new(&mut p, &format!("block{l}.fc2"), hd, hd, true, Init::Uniform, &mut r),
            })
            .collect();
        let out = Linear::new(&mut p, "out", hd, w, true, Init::Zero, &mut r);
        Ok(Self {
            arch,
            params: p,
            time_fc1,
            time_fc2,
            cond_fc1,
            cond_fc2,
            null_emb,
            input,
            blocks,
            out,
        })
    }

    /// Rebuild from a parameter store whose layout matches `arch`.
    pub fn from_params(arch: DenoiserArch, params: ParamStore<F>) -> Result<Self> {
        arch.validate()?;
        let (w, hd) = (arch.width(), arch.hidden);
        let mut c = 0;
        let time_fc1 = Linear::bind(&params, &mut c, arch.time_dim, hd, true)?;
        let time_fc2 = Linear::bind(&params, &mut c, hd, hd, true)?;
        let cond_fc1 = Linear::bind(&params, &mut c, 1, hd, true)?;
        let cond_fc2 = Linear::bind(&params, &mut c, hd, hd, true)?;
        let null_emb = crate::nn::take(&params, &mut c, &[hd])?;
        let input = Linear::bind(&params, &mut c, w, hd, true)?;
        let mut blocks = Vec::with_capacity(arch.blocks);
        for _ in 0..arch.blocks {
            blocks.push(Block {
                fc1: Linear::bind(&params, &mut c, hd, hd, true)?,
                emb: Linear::bind(&params, &mut c, hd, hd, false)?,
                fc2: Linear::bind(&params, &mut c, hd, hd, true)?,
            });
        }
        let out = Linear::bind(&params, &mut c, hd, w, true)?;
        if c != params.tensors().len() {
            return Err(Error::Checkpoint(format!(
                "{} extra tensors beyond the architecture",
                params.tensors().len() - c
            )));
        }
        Ok(Self {
            arch,
            params,
            time_fc1,
            time_fc2,
            cond_fc1,
            cond_fc2,
            null_emb,
            input,
            blocks,
            out,
        })
    }

    pub fn arch(&self) -> &DenoiserArch {
        &self.arch
    }

    pub fn num_params(&self) -> usize {
        self.params.num_params()
    }

    fn check_inputs(&self, x: &ArrayView2<'_, F>, cond: &[Cond], t: &[usize]) -> Result<()> {
        if x.ncols() != self.arch.width() {
            return Err(Error::shape(self.arch.width(), x.ncols()));
        }
        if cond.len() != x.nrows() || t.len() != x.nrows() {
            return Err(Error::shape(
                format!("{} conditions and timesteps", x.nrows()),
                format!("{} / {}", cond.len(), t.len()),
            ));
        }
        if let Some(&bad) = t.iter().find(|&&s| s < 1 || s > self.arch.max_timestep) {
            return Err(Error::InvalidArgument(format!(
                "timestep {bad} outside [1, {}]",
                self.arch.max_timestep
            )));
        }
        Ok(())
    }

    fn run_with(
        &self,
        p: &ParamStore<F>,
        x: ArrayView2<'_, F>,
        cond: &[Cond],
        t: &[usize],
    ) -> (Array2<F>, DenoiserCache<F>) {
        let t_in = timestep_embedding::<F>(t, self.arch.time_dim);
        let t_pre = self.time_fc1.forward(p, t_in.view());
        let t_act = silu(&t_pre);
        let temb = self.time_fc2.forward(p, t_act.view());

        let null_rows: Vec<bool> = cond.iter().map(|c| matches!(c, Cond::Null)).collect();
        let c_in = Array2::from_shape_fn((cond.len(), 1), |(i, _)| match cond[i] {
            Cond::Null => F::zero(),
            Cond::Value(v) => cast(v / self.arch.cond_scale),
        });
        let c_pre = self.cond_fc1.forward(p, c_in.view());
        let c_act = silu(&c_pre);
        let mut cemb = self.cond_fc2.forward(p, c_act.view());
        let null = p.vector(self.null_emb);
        for (i, _) in null_rows.iter().enumerate().filter(|(_, &n)| n) {
            cemb.row_mut(i).assign(&null);
        }

        let e_pre = temb + cemb;
        let e = silu(&e_pre);
        let mut h = self.input.forward(p, x);
        let mut block_in = Vec::with_capacity(self.blocks.len());
        let mut block_pre = Vec::with_capacity(self.blocks.len());
        let mut block_act = Vec::with_capacity(self.blocks.len());
        for b in &self.blocks {
            let z = b.fc1.forward(p, h.view()) + b.emb.forward(p, e.view());
            let u = silu(&z);
            let next = &h + &b.fc2.forward(p, u.view());
            block_in.push(h);
            block_pre.push(z);
            block_act.push(u);
            h = next;
        }
        let out_in = silu(&h);
        let y = self.out.forward(p, out_in.view());
        let cache = DenoiserCache {
            x: x.to_owned(),
            t_in,
            t_pre,
            t_act,
            c_in,
            c_pre,
            c_act,
            null_rows,
            e_pre,
            e,
            block_in,
            block_pre,
            block_act,
            h_last: h,
            out_in,
        };
        (y, cache)
    }

    pub fn save(&self, path: &Path, metadata: serde_json::Value) -> Result<()> {
        let arch = serde_json::to_value(&self.arch)?;
        let bytes = checkpoint::encode(CHECKPOINT_KIND, arch, metadata, &self.params)?;
        checkpoint::write_file(path, &bytes)
    }

    pub fn load(path: &Path) -> Result<(Self, serde_json::Value)> {
        Self::decode(&checkpoint::read_file(path)?)
    }

    pub fn decode(bytes: &[u8]) -> Result<(Self, serde_json::Value)> {
        let (header, params) = checkpoint::decode::<F>(bytes)?;
        if header.kind != CHECKPOINT_KIND {
            return Err(Error::Checkpoint(format!("expected denoiser, found {}", header.kind)));
        }
        let arch: DenoiserArch = serde_json::from_value(header.arch)?;
        Ok((Self::from_params(arch, params)?, header.metadata))
    }
}

impl<F: Scalar> EpsModel<F> for Denoiser<F> {
    fn width(&self) -> usize {
        self.arch.width()
    }

    fn predict(&self, x_t: ArrayView2<'_, F>, cond: &[Cond], t: &[usize]) -> Result<Array2<F>> {
        self.check_inputs(&x_t, cond, t)?;
        Ok(self.run_with(&self.params, x_t, cond, t).0)
    }
}

impl<F: Scalar> TrainableEpsModel<F> for Denoiser<F> {
    type Cache = DenoiserCache<F>;

    fn forward_train(
        &self,
        x_t: ArrayView2<'_, F>,
        cond: &[Cond],
        t: &[usize],
    ) -> Result<(Array2<F>, Self::Cache)> {
        self.check_inputs(&x_t, cond, t)?;
        Ok(self.run_with(&self.params, x_t, cond, t))
    }

    fn backward(&self, cache: &DenoiserCache<F>, grad_out: &Array2<F>, grads: &mut ParamStore<F>) {
        self.backward_with(&self.params, cache, grad_out, grads);
    }
}

impl<F: Scalar> Denoiser<F> {
    fn backward_with(
        &self,
        p: &ParamStore<F>,
        c: &DenoiserCache<F>,
        grad_out: &Array2<F>,
        grads: &mut ParamStore<F>,
    ) {
        let g_out_in = self.out.backward(p, grads, c.out_in.view(), grad_out.view());
        let mut g_h = silu_backward(&c.h_last, &g_out_in);
        let mut g_e = Array2::<F>::zeros(c.e.dim());
        for (l, b) in self.blocks.iter().enumerate().rev() {
            let g_u = b.fc2.backward(p, grads, c.block_act[l].view(), g_h.view());
            let g_z = silu_backward(&c.block_pre[l], &g_u);
            g_h = g_h + b.fc1.backward(p, grads, c.block_in[l].view(), g_z.view());
            g_e = g_e + b.emb.backward(p, grads, c.e.view(), g_z.view());
        }
        self.input.backward_params(grads, c.x.view(), g_h.view());

        let g_e_pre = silu_backward(&c.e_pre, &g_e);
        let g_t_act = self.time_fc2.backward(p, grads, c.t_act.view(), g_e_pre.view());
        let g_t_pre = silu_backward(&c.t_pre, &g_t_act);
        self.time_fc1.backward_params(grads, c.t_in.view(), g_t_pre.view());

        let mut g_cemb = g_e_pre;
        {
            let mut g_null = grads.vector_mut(self.null_emb);
            for (i, _) in c.null_rows.iter().enumerate().filter(|(_, &n)| n) {
                g_null += &g_cemb.row(i);
                g_cemb.row_mut(i).fill(F::zero());
            }
        }
        let g_c_act = self.cond_fc2.backward(p, grads, c.c_act.view(), g_cemb.view());
        let g_c_pre = silu_backward(&c.c_pre, &g_c_act);
        self.cond_fc1.backward_params(grads, c.c_in.view(), g_c_pre.view());
    }

    pub fn params(&self) -> &ParamStore<F> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore<F> {
        &mut self.params
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub train_steps: usize,
    pub dropout_p: f64,
    pub seed: u64,
    #[serde(default)]
    pub ema_decay: Option<f64>,
    pub log_interval: usize,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 1 {
            return Err(Error::InvalidArgument("batch_size must be >= 1".into()));
        }
        if !(self.learning_rate >= 0.0) {
            return Err(Error::InvalidArgument("learning_rate must be >= 0".into()));
        }
        if !(0.0..=1.0).contains(&self.dropout_p) {
            return Err(Error::InvalidArgument("dropout_p must be in [0, 1]".into()));
        }
        if let Some(d) = self.ema_decay {
            if !(0.0..1.0).contains(&d) {
                return Err(Error::InvalidArgument("ema_decay must be in [0, 1)".into()));
            }
        }
        if self.log_interval < 1 {
            return Err(Error::InvalidArgument("log_interval must be >= 1".into()));
        }
        Ok(())
    }
}

/// Rows fed to the denoiser with their condition values.
#[derive(Debug, Clone)]
pub struct TrainingSet<F> {
    pub inputs: Array2<F>,
    pub conds: Vec<f64>,
}

impl<F: Scalar> TrainingSet<F> {
    /// Flatten each trajectory into model space; the condition is its normalized score sum.
    pub fn from_trajectories(traj: &TrajectoryDataset, ds: &OfflineDataset) -> Result<Self> {
        if traj.is_empty() {
            return Err(Error::Empty("trajectory dataset".into()));
        }
        let width = traj.horizon() * (ds.dim() + 1);
        let mut inputs = Array2::<F>::zeros((traj.len(), width));
        for (i, t) in traj.trajectories.iter().enumerate() {
            let arr = t.to_model_array(ds);
            for (dst, &src) in inputs.row_mut(i).iter_mut().zip(arr.iter()) {
                *dst = cast(src);
            }
        }
        let conds = traj.trajectories.iter().map(|t| t.score_sum()).collect();
        Ok(Self { inputs, conds })
    }

    pub fn len(&self) -> usize {
        self.conds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.conds.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOutput {
    /// Loss of every optimizer step.
    pub step_losses: Vec<f64>,
    /// `(last step of interval, mean loss over the interval)`.
    pub curve: Vec<(usize, f64)>,
}

impl TrainOutput {
    fn decile_mean(&self, last: bool) -> f64 {
        let n = self.step_losses.len();
        let k = (n / 10).max(1);
        let slice = if last { &self.step_losses[n - k..] } else { &self.step_losses[..k] };
        slice.iter().sum::<f64>() / slice.len() as f64
    }

    pub fn first_decile_mean(&self) -> f64 {
        self.decile_mean(false)
    }

    pub fn last_decile_mean(&self) -> f64 {
        self.decile_mean(true)
    }

    pub fn curve_csv(&self) -> String {
        let mut s = String::from("step,loss\n");
        for (step, loss) in &self.curve {
            s.push_str(&format!("{step},{loss:?}\n"));
        }
        s
    }
}

/// Shared mini-batch loop: epochs of seeded shuffles, Adam updates, optional EMA.
pub(crate) fn optimize<F: Scalar>(
    params: &mut ParamStore<F>,
    n_rows: usize,
    cfg: &TrainConfig,
    tag: &str,
    mut loss_and_grad: impl FnMut(&ParamStore<F>, &[usize], &mut rng::Rng, &mut ParamStore<F>) -> Result<f64>,
) -> Result<TrainOutput> {
    cfg.validate()?;
    if n_rows == 0 {
        return Err(Error::Empty("training rows".into()));
    }
    let mut order_rng = rng::stream(cfg.seed, tag, 0);
    let mut draw_rng = rng::stream(cfg.seed, tag, 1);
    let mut opt = Adam::new(params, cfg.learning_rate);
    let mut ema = cfg.ema_decay.map(|d| Ema::new(params, d));
    let mut grads = params.zeros_like();
    let mut order: Vec<usize> = (0..n_rows).collect();
    let mut cursor = n_rows;
    let mut out = TrainOutput {
        step_losses: Vec::with_capacity(cfg.train_steps),
        curve: Vec::new(),
    };
    let mut acc = 0.0;
    let mut acc_n = 0usize;
    for step in 1..=cfg.train_steps {
        let mut batch = Vec::with_capacity(cfg.batch_size);
        while batch.len() < cfg.batch_size {
            if cursor == n_rows {
                rand::seq::SliceRandom::shuffle(&mut order[..], &mut order_rng);
                cursor = 0;
            }
            batch.push(order[cursor]);
            cursor += 1;
        }
        grads.fill_zero();
        let loss = loss_and_grad(params, &batch, &mut draw_rng, &mut grads).map_err(|e| match e {
            Error::NonFiniteLoss { value, .. } => Error::NonFiniteLoss { step, value },
            other => other,
        })?;
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { step, value: loss });
        }
        opt.step(params, &grads);
        if let Some(e) = ema.as_mut() {
            e.update(params);
        }
        out.step_losses.push(loss);
        acc += loss;
        acc_n += 1;
        if step % cfg.log_interval == 0 || step == cfg.train_steps {
            out.curve.push((step, acc / acc_n as f64));
            log::debug!("{tag} step {step}: loss {:.5}", acc / acc_n as f64);
            acc = 0.0;
            acc_n = 0;
        }
    }
    if let Some(e) = ema {
        *params = e.shadow;
    }
    Ok(out)
}

/// Train with the classifier-free-guidance objective.
pub fn train<F: Scalar>(
    model: &mut Denoiser<F>,
    data: &TrainingSet<F>,
    sched: &NoiseSchedule,
    cfg: &TrainConfig,
) -> Result<TrainOutput> {
    if data.inputs.ncols() != model.width() {
        return Err(Error::shape(model.width(), data.inputs.ncols()));
    }
    if sched.steps() != model.arch.max_timestep {
        return Err(Error::shape(
            format!("schedule of {} steps", model.arch.max_timestep),
            sched.steps(),
        ));
    }
    let mut params = std::mem::take(&mut model.params);
    let result = optimize(&mut params, data.len(), cfg, "denoiser-train", |p, batch, r, grads| {
        let x0 = data.inputs.select(Axis(0), batch);
        let conds: Vec<f64> = batch.iter().map(|&i| data.conds[i]).collect();
        let view = ParamView { model: &*model, params: p };
        cfg_loss(&view, x0.view(), &conds, sched, cfg.dropout_p, r, Some(grads))
    });
    model.params = params;
    result
}

/// A model's layer structure paired with an externally held parameter store.
struct ParamView<'a, F> {
    model: &'a Denoiser<F>,
    params: &'a ParamStore<F>,
}

impl<F: Scalar> EpsModel<F> for ParamView<'_, F> {
    fn width(&self) -> usize {
        self.model.width()
    }

    fn predict(&self, x_t: ArrayView2<'_, F>, cond: &[Cond], t: &[usize]) -> Result<Array2<F>> {
        self.model.check_inputs(&x_t, cond, t)?;
        Ok(self.model.run_with(self.params, x_t, cond, t).0)
    }
}

impl<F: Scalar> TrainableEpsModel<F> for ParamView<'_, F> {
    type Cache = DenoiserCache<F>;

    fn forward_train(
        &self,
        x_t: ArrayView2<'_, F>,
        cond: &[Cond],
        t: &[usize],
    ) -> Result<(Array2<F>, Self::Cache)> {
        self.model.check_inputs(&x_t, cond, t)?;
        Ok(self.model.run_with(self.params, x_t, cond, t))
    }

    fn backward(&self, cache: &DenoiserCache<F>, grad_out: &Array2<F>, grads: &mut ParamStore<F>) {
        self.model.backward_with(self.params, cache, grad_out, grads);
    }
}
