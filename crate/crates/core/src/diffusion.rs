//! Denoising diffusion over flattened trajectory arrays: noise schedule,
//! closed-form forward noising, the classifier-free-guidance training loss,
//! guided reverse sampling and context inpainting.
//!
//! Timesteps are 1-based throughout (`t` in `1..=T`).

use ndarray::{s, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::nn::{cast, ParamStore, Scalar};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleKind {
    #[default]
    Cosine,
    Linear,
}

impl std::str::FromStr for ScheduleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cosine" => Ok(ScheduleKind::Cosine),
            "linear" => Ok(ScheduleKind::Linear),
            other => Err(Error::InvalidArgument(format!("unknown schedule {other:?}"))),
        }
    }
}

const COSINE_OFFSET: f64 = 0.008;
const MAX_BETA: f64 = 0.999;
const LINEAR_START: f64 = 1e-4;
const LINEAR_END: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSchedule {
    betas: Vec<f64>,
    alphas: Vec<f64>,
    alpha_bars: Vec<f64>,
}

impl NoiseSchedule {
    pub fn new(steps: usize, kind: ScheduleKind) -> Result<Self> {
        if steps < 1 {
            return Err(Error::InvalidArgument("schedule needs T >= 1".into()));
        }
        let betas = match kind {
            ScheduleKind::Cosine => {
                let f = |t: f64| {
                    let arg = (t / steps as f64 + COSINE_OFFSET) / (1.0 + COSINE_OFFSET)
                        * std::f64::consts::FRAC_PI_2;
                    arg.cos().powi(2)
                };
                (1..=steps)
                    .map(|t| (1.0 - f(t as f64) / f(t as f64 - 1.0)).min(MAX_BETA))
                    .collect()
            }
            ScheduleKind::Linear if steps == 1 => vec![LINEAR_END],
            ScheduleKind::Linear => (0..steps)
                .map(|i| {
                    LINEAR_START + (LINEAR_END - LINEAR_START) * i as f64 / (steps - 1) as f64
                })
                .collect(),
        };
        Self::from_betas(betas)
    }

    pub fn from_betas(betas: Vec<f64>) -> Result<Self> {
        if betas.is_empty() {
            return Err(Error::InvalidArgument("schedule needs T >= 1".into()));
        }
        if let Some(b) = betas.iter().find(|&&b| !(b > 0.0 && b < 1.0)) {
            return Err(Error::InvalidArgument(format!("beta {b} outside (0, 1)")));
        }
        let alphas: Vec<f64> = betas.iter().map(|b| 1.0 - b).collect();
        let alpha_bars = alphas
            .iter()
            .scan(1.0, |acc, a| {
                *acc *= a;
                Some(*acc)
            })
            .collect();
        Ok(Self {
            betas,
            alphas,
            alpha_bars,
        })
    }

    pub fn steps(&self) -> usize {
        self.betas.len()
    }

    pub fn beta(&self, t: usize) -> f64 {
        self.betas[t - 1]
    }

    pub fn alpha(&self, t: usize) -> f64 {
        self.alphas[t - 1]
    }

    pub fn alpha_bar(&self, t: usize) -> f64 {
        self.alpha_bars[t - 1]
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn alpha_bars(&self) -> &[f64] {
        &self.alpha_bars
    }

    fn check_t(&self, t: usize) -> Result<()> {
        if t < 1 || t > self.steps() {
            return Err(Error::InvalidArgument(format!(
                "timestep {t} outside [1, {}]",
                self.steps()
            )));
        }
        Ok(())
    }
}

/// Condition token: a score-sum value or the learned null embedding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cond {
    Null,
    Value(f64),
}

/// A noise-prediction network `eps(x_t, cond, t)` over rows of width [`EpsModel::width`].
pub trait EpsModel<F: Scalar> {
    fn width(&self) -> usize;

    fn predict(&self, x_t: ArrayView2<'_, F>, cond: &[Cond], t: &[usize]) -> Result<Array2<F>>;
}

/// An [`EpsModel`] with exact reverse-mode gradients.
pub trait TrainableEpsModel<F: Scalar>: EpsModel<F> {
    type Cache;

    fn forward_train(
        &self,
        x_t: ArrayView2<'_, F>,
        cond: &[Cond],
        t: &[usize],
    ) -> Result<(Array2<F>, Self::Cache)>;

    /// Accumulate `d loss / d params` into `grads` given `d loss / d output`.
    fn backward(&self, cache: &Self::Cache, grad_out: &Array2<F>, grads: &mut ParamStore<F>);
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoisedTrajectory<F> {
    pub values: Array2<F>,
    pub t: usize,
}

/// `sqrt(ab) * x0 + sqrt(1 - ab) * noise`.
pub fn noise_with_alpha_bar<F: Scalar>(
    x0: ArrayView2<'_, F>,
    noise: ArrayView2<'_, F>,
    alpha_bar: f64,
) -> Array2<F> {
    let a = cast::<F>(alpha_bar.sqrt());
    let b = cast::<F>((1.0 - alpha_bar).sqrt());
    let mut out = x0.to_owned();
    out.zip_mut_with(&noise, |x, &n| *x = a * *x + b * n);
    out
}

/// Closed-form marginal `q(x_t | x_0)`.
pub fn forward_noise<F: Scalar>(
    sched: &NoiseSchedule,
    tau0: ArrayView2<'_, F>,
    t: usize,
    noise: ArrayView2<'_, F>,
) -> Result<NoisedTrajectory<F>> {
    sched.check_t(t)?;
    if tau0.dim() != noise.dim() {
        return Err(Error::shape(format!("{:?}", tau0.dim()), format!("{:?}", noise.dim())));
    }
    Ok(NoisedTrajectory {
        values: noise_with_alpha_bar(tau0, noise, sched.alpha_bar(t)),
        t,
    })
}

/// One single-step forward transition `q(x_t | x_{t-1})`.
pub fn forward_step<F: Scalar>(
    sched: &NoiseSchedule,
    x_prev: ArrayView2<'_, F>,
    t: usize,
    noise: ArrayView2<'_, F>,
) -> Array2<F> {
    noise_with_alpha_bar(x_prev, noise, sched.alpha(t))
}

pub fn standard_normal<F: Scalar, R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Array2<F> {
    Array2::from_shape_simple_fn((rows, cols), || cast(rng.sample::<f64, _>(StandardNormal)))
}

/// Classifier-free-guidance objective on a batch of clean rows.
///
/// Per row: `t ~ U{1..T}`, dropout of the condition with probability
/// `dropout_p`, then `eps ~ N(0, I)`. Returns the batch mean of
/// `||eps - eps_model(x_t, cond, t)||^2`; gradients for these draws are added to
/// `grads` when given.
pub fn cfg_loss<F, M, R>(
    model: &M,
    x0: ArrayView2<'_, F>,
    conds: &[f64],
    sched: &NoiseSchedule,
    dropout_p: f64,
    rng: &mut R,
    grads: Option<&mut ParamStore<F>>,
) -> Result<f64>
where
    F: Scalar,
    M: TrainableEpsModel<F>,
    R: Rng + ?Sized,
{
    let (batch, width) = x0.dim();
    if batch == 0 {
        return Err(Error::Empty("loss batch".into()));
    }
    if conds.len() != batch {
        return Err(Error::shape(format!("{batch} conditions"), conds.len()));
    }
    if !(0.0..=1.0).contains(&dropout_p) {
        return Err(Error::InvalidArgument(format!("dropout {dropout_p} outside [0, 1]")));
    }
    let mut ts = Vec::with_capacity(batch);
    let mut cond = Vec::with_capacity(batch);
    let mut noise = Array2::<F>::zeros((batch, width));
    let mut x_t = Array2::<F>::zeros((batch, width));
    for b in 0..batch {
        let t = rng.random_range(1..=sched.steps());
        let dropped = rng.random::<f64>() < dropout_p;
        ts.push(t);
        cond.push(if dropped { Cond::Null } else { Cond::Value(conds[b]) });
        let ab = sched.alpha_bar(t);
        let (sa, sb) = (cast::<F>(ab.sqrt()), cast::<F>((1.0 - ab).sqrt()));
        for j in 0..width {
            let e: F = cast(rng.sample::<f64, _>(StandardNormal));
            noise[[b, j]] = e;
            x_t[[b, j]] = sa * x0[[b, j]] + sb * e;
        }
    }
    let (pred, cache) = model.forward_train(x_t.view(), &cond, &ts)?;
    let diff = &pred - &noise;
    let loss = diff
        .iter()
        .map(|v| v.to_f64().unwrap_or(f64::NAN).powi(2))
        .sum::<f64>()
        / batch as f64;
    if !loss.is_finite() {
        return Err(Error::NonFiniteLoss { step: 0, value: loss });
    }
    if let Some(grads) = grads {
        let scale = cast::<F>(2.0 / batch as f64);
        let grad_out = diff.mapv(|v| v * scale);
        model.backward(&cache, &grad_out, grads);
    }
    Ok(loss)
}

/// `eps_null + omega * (eps_cond - eps_null)`, evaluated as the equivalent
/// `(1 - omega) * eps_null + omega * eps_cond` so that `omega = 0` and `omega = 1`
/// reproduce the unconditional and conditional predictions exactly.
pub fn combine_guidance<F: Scalar>(eps_null: &Array2<F>, eps_cond: &Array2<F>, omega: f64) -> Array2<F> {
    let w = cast::<F>(omega);
    let u = cast::<F>(1.0 - omega);
    let mut out = eps_null.clone();
    out.zip_mut_with(eps_cond, |n, &c| *n = u * *n + w * c);
    out
}

/// Guided noise estimate. Conditional and unconditional passes share one batched call:
/// rows `0..B` carry `target`, rows `B..2B` the null token.
pub fn guided_epsilon<F: Scalar, M: EpsModel<F> + ?Sized>(
    model: &M,
    x_t: ArrayView2<'_, F>,
    t: usize,
    target: f64,
    omega: f64,
) -> Result<Array2<F>> {
    let batch = x_t.nrows();
    let stacked = ndarray::concatenate(Axis(0), &[x_t, x_t]).expect("same width");
    let cond: Vec<Cond> = (0..2 * batch)
        .map(|i| if i < batch { Cond::Value(target) } else { Cond::Null })
        .collect();
    let eps = model.predict(stacked.view(), &cond, &vec![t; 2 * batch])?;
    let eps_cond = eps.slice(s![..batch, ..]).to_owned();
    let eps_null = eps.slice(s![batch.., ..]).to_owned();
    Ok(combine_guidance(&eps_null, &eps_cond, omega))
}

/// Re-express `eps_hat` so the implied clean estimate
/// `x0 = (x_t - sqrt(1 - ab_t) eps) / sqrt(ab_t)` lies in `[-bound, bound]`.
/// Entries whose estimate is already inside are returned unchanged.
pub fn clip_epsilon<F: Scalar>(
    sched: &NoiseSchedule,
    x_t: ArrayView2<'_, F>,
    t: usize,
    eps_hat: ArrayView2<'_, F>,
    bound: f64,
) -> Result<Array2<F>> {
    sched.check_t(t)?;
    if x_t.dim() != eps_hat.dim() {
        return Err(Error::shape(format!("{:?}", x_t.dim()), format!("{:?}", eps_hat.dim())));
    }
    let ab = sched.alpha_bar(t);
    let (sa, sn) = (cast::<F>(ab.sqrt()), cast::<F>((1.0 - ab).sqrt()));
    let (lo, hi) = (cast::<F>(-bound), cast::<F>(bound));
    let mut out = eps_hat.to_owned();
    out.zip_mut_with(&x_t, |e, &x| {
        let x0 = (x - sn * *e) / sa;
        if x0 < lo || x0 > hi {
            *e = (x - sa * x0.max(lo).min(hi)) / sn;
        }
    });
    Ok(out)
}

/// Reverse transition `x_{t-1} = (x_t - beta_t / sqrt(1 - ab_t) * eps) / sqrt(alpha_t) + sigma_t z`
/// with `sigma_t^2 = beta_t`; no noise is injected at `t = 1`.
pub fn denoise_step<F: Scalar>(
    sched: &NoiseSchedule,
    x_t: ArrayView2<'_, F>,
    t: usize,
    eps_hat: ArrayView2<'_, F>,
    noise: Option<ArrayView2<'_, F>>,
) -> Result<Array2<F>> {
    sched.check_t(t)?;
    if x_t.dim() != eps_hat.dim() {
        return Err(Error::shape(format!("{:?}", x_t.dim()), format!("{:?}", eps_hat.dim())));
    }
    let beta = sched.beta(t);
    let inv_sqrt_alpha = cast::<F>(1.0 / sched.alpha(t).sqrt());
    let eps_coef = cast::<F>(beta / (1.0 - sched.alpha_bar(t)).sqrt());
    let mut out = x_t.to_owned();
    out.zip_mut_with(&eps_hat, |x, &e| *x = inv_sqrt_alpha * (*x - eps_coef * e));
    if t > 1 {
        if let Some(z) = noise {
            if z.dim() != out.dim() {
                return Err(Error::shape(format!("{:?}", out.dim()), format!("{:?}", z.dim())));
            }
            let sigma = cast::<F>(beta.sqrt());
            out.zip_mut_with(&z, |x, &n| *x = *x + sigma * n);
        }
    }
    Ok(out)
}

/// Conditioning target and guidance strength for sampling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GuidanceConfig {
    pub omega: f64,
    /// Exploration level multiplying the per-step optimum.
    pub alpha_level: f64,
    /// Per-step optimum in normalized score units.
    pub y_star: f64,
    pub horizon: usize,
}

impl GuidanceConfig {
    /// Score-sum target `alpha * H * y_star`.
    pub fn target(&self) -> f64 {
        self.alpha_level * self.horizon as f64 * self.y_star
    }

    pub fn validate(&self) -> Result<()> {
        if self.omega.is_nan() || self.omega < 0.0 {
            return Err(Error::InvalidArgument("guidance scale must be >= 0".into()));
        }
        Ok(())
    }
}

/// Batched reverse sampling with context inpainting.
///
/// Each entry of `contexts` is a `C x channels` block written over the first
/// `C` rows of its trajectory after every reverse step. Row `b` draws all of
/// its noise from `rngs[b]`. With `guidance = None` only the null condition is
/// used. With `clip_x0 = Some(b)` every prediction is passed through
/// [`clip_epsilon`]. Returns one `horizon x channels` array per context.
pub fn sample_with_context<F, M, R>(
    model: &M,
    sched: &NoiseSchedule,
    guidance: Option<&GuidanceConfig>,
    clip_x0: Option<f64>,
    horizon: usize,
    channels: usize,
    contexts: &[Array2<F>],
    rngs: &mut [R],
) -> Result<Vec<Array2<F>>>
where
    F: Scalar,
    M: EpsModel<F> + ?Sized,
    R: Rng,
{
    let batch = contexts.len();
    let width = horizon * channels;
    if model.width() != width {
        return Err(Error::shape(model.width(), width));
    }
    if rngs.len() != batch {
        return Err(Error::shape(format!("{batch} rngs"), rngs.len()));
    }
    if let Some(g) = guidance {
        g.validate()?;
    }
    let ctx_len = contexts.first().map_or(0, |c| c.nrows());
    if ctx_len >= horizon {
        return Err(Error::InvalidArgument(format!(
            "context length {ctx_len} must be < horizon {horizon}"
        )));
    }
    for c in contexts {
        if c.dim() != (ctx_len, channels) {
            return Err(Error::shape(format!("({ctx_len}, {channels})"), format!("{:?}", c.dim())));
        }
    }
    let masked = ctx_len * channels;
    let mut x = Array2::<F>::zeros((batch, width));
    for (b, r) in rngs.iter_mut().enumerate() {
        let row = standard_normal::<F, _>(1, width, r);
        x.row_mut(b).assign(&row.row(0));
    }
    for t in (1..=sched.steps()).rev() {
        let eps = match guidance {
            Some(g) => guided_epsilon(model, x.view(), t, g.target(), g.omega)?,
            None => model.predict(x.view(), &vec![Cond::Null; batch], &vec![t; batch])?,
        };
        let eps = match clip_x0 {
            Some(b) => clip_epsilon(sched, x.view(), t, eps.view(), b)?,
            None => eps,
        };
        let z = (t > 1).then(|| {
            let mut z = Array2::<F>::zeros((batch, width));
            for (b, r) in rngs.iter_mut().enumerate() {
                z.row_mut(b).assign(&standard_normal::<F, _>(1, width, r).row(0));
            }
            z
        });
        x = denoise_step(sched, x.view(), t, eps.view(), z.as_ref().map(|z| z.view()))?;
        for (b, c) in contexts.iter().enumerate() {
            let flat = c.as_standard_layout();
            let flat = flat.as_slice().expect("standard layout");
            x.slice_mut(s![b, ..masked])
                .iter_mut()
                .zip(flat)
                .for_each(|(dst, &src)| *dst = src);
        }
    }
    Ok(x
        .rows()
        .into_iter()
        .map(|r| r.to_owned().into_shape_with_order((horizon, channels)).expect("width"))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use ndarray::array;

    #[test]
    fn single_step_linear() {
        let s = NoiseSchedule::new(1, ScheduleKind::Linear).unwrap();
        assert_eq!(s.alpha_bars(), &[0.98]);
        let s = NoiseSchedule::from_betas(vec![0.02]).unwrap();
        assert_eq!(s.alpha_bars(), &[0.98]);
    }

    #[test]
    fn two_step_product() {
        let s = NoiseSchedule::from_betas(vec![0.1, 0.2]).unwrap();
        assert!((s.alpha_bar(1) - 0.9).abs() < 1e-15);
        assert!((s.alpha_bar(2) - 0.72).abs() < 1e-15);
    }

    #[test]
    fn cosine_is_near_total_noise_at_200() {
        let s = NoiseSchedule::new(200, ScheduleKind::Cosine).unwrap();
        assert!(s.alpha_bar(200) < 0.01);
        assert!(s.alpha_bar(1) < 1.0);
        for w in s.alpha_bars().windows(2) {
            assert!(w[1] < w[0]);
        }
    }

    #[test]
    fn schedule_rejects_bad_input() {
        assert!(NoiseSchedule::new(0, ScheduleKind::Cosine).is_err());
        assert!(NoiseSchedule::from_betas(vec![0.0]).is_err());
        assert!(NoiseSchedule::from_betas(vec![1.0]).is_err());
    }

    #[test]
    fn noising_limits_and_arithmetic() {
        let x0 = array![[1.0f64, -2.0]];
        let n = array![[0.5f64, 0.25]];
        assert_eq!(noise_with_alpha_bar(x0.view(), n.view(), 1.0), x0);
        assert_eq!(noise_with_alpha_bar(x0.view(), n.view(), 0.0), n);
        let one = array![[1.0f64]];
        let v = noise_with_alpha_bar(one.view(), one.view(), 0.25)[[0, 0]];
        assert!((v - (0.5 + 0.75f64.sqrt())).abs() < 1e-15);
        assert!((v - 1.3660).abs() < 1e-4);
    }

    #[test]
    fn forward_noise_checks_shape_and_t() {
        let s = NoiseSchedule::new(10, ScheduleKind::Cosine).unwrap();
        let a = Array2::<f64>::zeros((2, 3));
        let b = Array2::<f64>::zeros((3, 2));
        assert!(forward_noise(&s, a.view(), 1, b.view()).is_err());
        assert!(forward_noise(&s, a.view(), 0, a.view()).is_err());
        assert!(forward_noise(&s, a.view(), 11, a.view()).is_err());
    }

    #[test]
    fn denoise_step_arithmetic() {
        // alpha = 0.96, beta = 0.04 at t = 2 with alpha_bar_2 = 0.5.
        let s = NoiseSchedule::from_betas(vec![1.0 - 0.5 / 0.96, 0.04]).unwrap();
        assert!((s.alpha_bar(2) - 0.5).abs() < 1e-15);
        let x = array![[1.0f64]];
        let out = denoise_step(&s, x.view(), 2, x.view(), Some(Array2::zeros((1, 1)).view())).unwrap();
        let expect = (1.0 - 0.04 / 0.5f64.sqrt()) / 0.96f64.sqrt();
        assert!((out[[0, 0]] - expect).abs() < 1e-12);
        assert!((out[[0, 0]] - 0.963).abs() < 5e-4);
    }

    #[test]
    fn denoise_step_identity_limit() {
        let s = NoiseSchedule::from_betas(vec![1e-12, 1e-12]).unwrap();
        let x = array![[0.7f64, -1.1]];
        let out = denoise_step(&s, x.view(), 2, Array2::zeros((1, 2)).view(), None).unwrap();
        for (a, b) in out.iter().zip(x.iter()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn no_noise_injected_at_t1() {
        let s = NoiseSchedule::from_betas(vec![0.1]).unwrap();
        let x = array![[1.0f64]];
        let big = array![[100.0f64]];
        let a = denoise_step(&s, x.view(), 1, x.view(), Some(big.view())).unwrap();
        let b = denoise_step(&s, x.view(), 1, x.view(), None).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn guidance_combination_endpoints_exact() {
        let mut r = rng::seeded(4);
        let u: Array2<f64> = standard_normal(3, 5, &mut r);
        let c: Array2<f64> = standard_normal(3, 5, &mut r);
        assert_eq!(combine_guidance(&u, &c, 0.0), u);
        assert_eq!(combine_guidance(&u, &c, 1.0), c);
        let mid = combine_guidance(&u, &c, 1.2);
        for ((m, a), b) in mid.iter().zip(&u).zip(&c) {
            assert!((m - (a + 1.2 * (b - a))).abs() < 1e-12);
        }
    }

    /// Predicts `eps = scale * x_t`, ignoring the condition.
    struct Linear {
        width: usize,
        scale: f64,
    }

    impl EpsModel<f64> for Linear {
        fn width(&self) -> usize {
            self.width
        }

        fn predict(&self, x_t: ArrayView2<'_, f64>, _: &[Cond], _: &[usize]) -> Result<Array2<f64>> {
            Ok(x_t.mapv(|v| self.scale * v))
        }
    }

    #[test]
    fn clip_is_identity_inside_bound() {
        let s = NoiseSchedule::new(50, ScheduleKind::Cosine).unwrap();
        let mut r = rng::seeded(1);
        let x: Array2<f64> = standard_normal(4, 6, &mut r);
        let e: Array2<f64> = standard_normal(4, 6, &mut r);
        assert_eq!(clip_epsilon(&s, x.view(), 30, e.view(), 1e9).unwrap(), e);
        let c = clip_epsilon(&s, x.view(), 30, e.view(), 0.5).unwrap();
        let ab = s.alpha_bar(30);
        for (xv, ev) in x.iter().zip(&c) {
            let x0 = (xv - (1.0 - ab).sqrt() * ev) / ab.sqrt();
            assert!(x0.abs() <= 0.5 + 1e-9);
        }
    }

    #[test]
    fn inpainting_is_exact_and_shapes_checked() {
        let s = NoiseSchedule::new(20, ScheduleKind::Cosine).unwrap();
        let (h, ch) = (8, 3);
        let model = Linear { width: h * ch, scale: 0.3 };
        let mut r = rng::seeded(2);
        let ctx: Vec<Array2<f64>> = (0..3).map(|_| standard_normal(5, ch, &mut r)).collect();
        let g = GuidanceConfig { omega: 1.2, alpha_level: 0.8, y_star: 1.0, horizon: h };
        let mut rngs: Vec<_> = (0..3).map(|b| rng::stream(0, "sample", b)).collect();
        let out = sample_with_context(&model, &s, Some(&g), Some(1.0), h, ch, &ctx, &mut rngs).unwrap();
        for (o, c) in out.iter().zip(&ctx) {
            assert_eq!(o.dim(), (h, ch));
            assert_eq!(o.slice(s![..5, ..]), c.view());
        }

        let long: Vec<Array2<f64>> = vec![Array2::zeros((h, ch))];
        let mut one = vec![rng::seeded(0)];
        assert!(sample_with_context(&model, &s, None, None, h, ch, &long, &mut one).is_err());
        let narrow: Vec<Array2<f64>> = vec![Array2::zeros((2, ch + 1))];
        assert!(sample_with_context(&model, &s, None, None, h, ch, &narrow, &mut one).is_err());
        assert!(sample_with_context(&model, &s, None, None, h, ch, &ctx, &mut one).is_err());
    }

    #[test]
    fn sampling_is_reproducible_per_stream() {
        let s = NoiseSchedule::new(10, ScheduleKind::Linear).unwrap();
        let model = Linear { width: 6, scale: 0.1 };
        let ctx: Vec<Array2<f64>> = vec![Array2::zeros((1, 2)); 2];
        let run = || {
            let mut rngs: Vec<_> = (0..2).map(|b| rng::stream(9, "sample", b)).collect();
            sample_with_context(&model, &s, None, Some(1.0), 3, 2, &ctx, &mut rngs).unwrap()
        };
        let (a, b) = (run(), run());
        assert_eq!(a, b);
        assert_ne!(a[0], a[1]);
    }
}
