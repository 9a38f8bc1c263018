//! Minimal dense-network toolkit with hand-written backpropagation.
//!
//! Parameters live in a [`ParamStore`]: an ordered list of named, row-major
//! tensors. Gradients and optimizer moments are stores with the same layout,
//! which keeps checkpointing and the optimizer independent of architecture.

use std::fmt::{Debug, Display};

use ndarray::linalg::general_mat_mul;
use ndarray::{Array2, ArrayView1, ArrayView2, ArrayViewMut1, ArrayViewMut2, Axis, NdFloat};
use num_traits::FromPrimitive;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Floating-point element type for networks.
pub trait Scalar: NdFloat + FromPrimitive + Default + Display + Debug {
    const PRECISION: Precision;

    fn from_f64_lossy(v: f64) -> Self;
    fn write_le(self, out: &mut Vec<u8>);
    fn read_le(bytes: &[u8]) -> Self;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    F32,
    F64,
}

impl Precision {
    pub fn byte_width(self) -> usize {
        match self {
            Precision::F32 => 4,
            Precision::F64 => 8,
        }
    }
}

impl Scalar for f32 {
    const PRECISION: Precision = Precision::F32;

    fn from_f64_lossy(v: f64) -> Self {
        v as f32
    }
    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
    fn read_le(bytes: &[u8]) -> Self {
        f32::from_le_bytes(bytes.try_into().expect("4 bytes"))
    }
}

impl Scalar for f64 {
    const PRECISION: Precision = Precision::F64;

    fn from_f64_lossy(v: f64) -> Self {
        v
    }
    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
    fn read_le(bytes: &[u8]) -> Self {
        f64::from_le_bytes(bytes.try_into().expect("8 bytes"))
    }
}

#[inline]
pub fn cast<F: Scalar>(v: f64) -> F {
    F::from_f64_lossy(v)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<F> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<F>,
}

impl<F> Tensor<F> {
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamId(usize);

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamStore<F> {
    tensors: Vec<Tensor<F>>,
}

impl<F: Scalar> ParamStore<F> {
    pub fn new() -> Self {
        Self {
            tensors: Vec::new(),
        }
    }

    pub fn from_tensors(tensors: Vec<Tensor<F>>) -> Self {
        Self { tensors }
    }

    pub fn add(&mut self, name: impl Into<String>, shape: Vec<usize>, data: Vec<F>) -> ParamId {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        self.tensors.push(Tensor {
            name: name.into(),
            shape,
            data,
        });
        ParamId(self.tensors.len() - 1)
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            tensors: self
                .tensors
                .iter()
                .map(|t| Tensor {
                    name: t.name.clone(),
                    shape: t.shape.clone(),
                    data: vec![F::zero(); t.data.len()],
                })
                .collect(),
        }
    }

    pub fn fill_zero(&mut self) {
        for t in &mut self.tensors {
            t.data.iter_mut().for_each(|v| *v = F::zero());
        }
    }

    pub fn tensors(&self) -> &[Tensor<F>] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor<F>] {
        &mut self.tensors
    }

    pub fn tensor(&self, id: ParamId) -> &Tensor<F> {
        &self.tensors[id.0]
    }

    pub fn num_params(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    /// True when both stores have identical names and shapes in the same order.
    pub fn same_layout(&self, other: &Self) -> bool {
        self.tensors.len() == other.tensors.len()
            && self
                .tensors
                .iter()
                .zip(&other.tensors)
                .all(|(a, b)| a.name == b.name && a.shape == b.shape)
    }

    pub fn matrix(&self, id: ParamId) -> ArrayView2<'_, F> {
        let t = &self.tensors[id.0];
        ArrayView2::from_shape((t.shape[0], t.shape[1]), &t.data).expect("matrix shape")
    }

    pub fn matrix_mut(&mut self, id: ParamId) -> ArrayViewMut2<'_, F> {
        let t = &mut self.tensors[id.0];
        ArrayViewMut2::from_shape((t.shape[0], t.shape[1]), &mut t.data).expect("matrix shape")
    }

    pub fn vector(&self, id: ParamId) -> ArrayView1<'_, F> {
        ArrayView1::from(&self.tensors[id.0].data[..])
    }

    pub fn vector_mut(&mut self, id: ParamId) -> ArrayViewMut1<'_, F> {
        ArrayViewMut1::from(&mut self.tensors[id.0].data[..])
    }

    pub fn flat(&self) -> Vec<F> {
        self.tensors.iter().flat_map(|t| t.data.iter().copied()).collect()
    }

    /// Apply `f` to every scalar, in layout order.
    pub fn for_each_mut(&mut self, mut f: impl FnMut(&mut F)) {
        for t in &mut self.tensors {
            t.data.iter_mut().for_each(&mut f);
        }
    }

    pub fn all_finite(&self) -> bool {
        self.tensors
            .iter()
            .all(|t| t.data.iter().all(|v| v.is_finite()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Init {
    /// U(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases.
    Uniform,
    Zero,
}

/// Affine layer `y = x W + b` with `W: fan_in x fan_out`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Linear {
    pub w: ParamId,
    pub b: Option<ParamId>,
    pub fan_in: usize,
    pub fan_out: usize,
}

impl Linear {
    pub fn new<F: Scalar, R: Rng + ?Sized>(
        store: &mut ParamStore<F>,
        name: &str,
        fan_in: usize,
        fan_out: usize,
        bias: bool,
        init: Init,
        rng: &mut R,
    ) -> Self {
        let bound = 1.0 / (fan_in as f64).sqrt();
        let mut draw = |n: usize| -> Vec<F> {
            match init {
                Init::Zero => vec![F::zero(); n],
                Init::Uniform => (0..n)
                    .map(|_| cast(rng.random_range(-bound..bound)))
                    .collect(),
            }
        };
        let w_data = draw(fan_in * fan_out);
        let b_data = bias.then(|| draw(fan_out));
        let w = store.add(format!("{name}.weight"), vec![fan_in, fan_out], w_data);
        let b = b_data.map(|d| store.add(format!("{name}.bias"), vec![fan_out], d));
        Self {
            w,
            b,
            fan_in,
            fan_out,
        }
    }

    /// Rebind a layer to tensors already present in `store` (checkpoint loading).
    pub fn bind<F: Scalar>(
        store: &ParamStore<F>,
        cursor: &mut usize,
        fan_in: usize,
        fan_out: usize,
        bias: bool,
    ) -> crate::Result<Self> {
        let w = take(store, cursor, &[fan_in, fan_out])?;
        let b = if bias {
            Some(take(store, cursor, &[fan_out])?)
        } else {
            None
        };
        Ok(Self {
            w,
            b,
            fan_in,
            fan_out,
        })
    }

    pub fn forward<F: Scalar>(&self, p: &ParamStore<F>, x: ArrayView2<'_, F>) -> Array2<F> {
        let mut y = x.dot(&p.matrix(self.w));
        if let Some(b) = self.b {
            y += &p.vector(b);
        }
        y
    }

    /// Accumulate parameter gradients and return the gradient w.r.t. `x`.
    pub fn backward<F: Scalar>(
        &self,
        p: &ParamStore<F>,
        grads: &mut ParamStore<F>,
        x: ArrayView2<'_, F>,
        grad_out: ArrayView2<'_, F>,
    ) -> Array2<F> {
        self.backward_params(grads, x, grad_out);
        grad_out.dot(&p.matrix(self.w).t())
    }

    /// Accumulate parameter gradients only.
    pub fn backward_params<F: Scalar>(
        &self,
        grads: &mut ParamStore<F>,
        x: ArrayView2<'_, F>,
        grad_out: ArrayView2<'_, F>,
    ) {
        general_mat_mul(F::one(), &x.t(), &grad_out, F::one(), &mut grads.matrix_mut(self.w));
        if let Some(b) = self.b {
            let mut gb = grads.vector_mut(b);
            gb += &grad_out.sum_axis(Axis(0));
        }
    }
}

pub(crate) fn take<F: Scalar>(
    store: &ParamStore<F>,
    cursor: &mut usize,
    shape: &[usize],
) -> crate::Result<ParamId> {
    let t = store
        .tensors
        .get(*cursor)
        .ok_or_else(|| crate::Error::Checkpoint(format!("missing tensor #{cursor}")))?;
    if t.shape != shape {
        return Err(crate::Error::Checkpoint(format!(
            "tensor {} has shape {:?}, architecture expects {:?}",
            t.name, t.shape, shape
        )));
    }
    let id = ParamId(*cursor);
    *cursor += 1;
    Ok(id)
}

#[inline]
fn sigmoid<F: Scalar>(z: F) -> F {
    F::one() / (F::one() + (-z).exp())
}

pub fn silu<F: Scalar>(z: &Array2<F>) -> Array2<F> {
    z.mapv(|v| v * sigmoid(v))
}

/// `grad_out * silu'(z)`.
pub fn silu_backward<F: Scalar>(z: &Array2<F>, grad_out: &Array2<F>) -> Array2<F> {
    let mut g = grad_out.clone();
    g.zip_mut_with(z, |g, &v| {
        let s = sigmoid(v);
        *g = *g * s * (F::one() + v * (F::one() - s));
    });
    g
}

pub fn relu<F: Scalar>(z: &Array2<F>) -> Array2<F> {
    z.mapv(|v| if v > F::zero() { v } else { F::zero() })
}

pub fn relu_backward<F: Scalar>(z: &Array2<F>, grad_out: &Array2<F>) -> Array2<F> {
    let mut g = grad_out.clone();
    g.zip_mut_with(z, |g, &v| {
        if v <= F::zero() {
            *g = F::zero();
        }
    });
    g
}

/// Adaptive moment estimation without weight decay.
#[derive(Debug, Clone)]
pub struct Adam<F> {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: ParamStore<F>,
    v: ParamStore<F>,
    t: u64,
}

impl<F: Scalar> Adam<F> {
    pub fn new(params: &ParamStore<F>, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: params.zeros_like(),
            v: params.zeros_like(),
            t: 0,
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self, params: &mut ParamStore<F>, grads: &ParamStore<F>) {
        self.t += 1;
        let b1 = cast::<F>(self.beta1);
        let b2 = cast::<F>(self.beta2);
        let one = F::one();
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        let step_size = cast::<F>(self.lr / bc1);
        let bc2_sqrt = cast::<F>(bc2.sqrt());
        let eps = cast::<F>(self.eps);
        for (((p, g), m), v) in params
            .tensors
            .iter_mut()
            .zip(&grads.tensors)
            .zip(&mut self.m.tensors)
            .zip(&mut self.v.tensors)
        {
            for i in 0..p.data.len() {
                let gi = g.data[i];
                m.data[i] = b1 * m.data[i] + (one - b1) * gi;
                v.data[i] = b2 * v.data[i] + (one - b2) * gi * gi;
                let update = step_size * m.data[i] / (v.data[i].sqrt() / bc2_sqrt + eps);
                if update != F::zero() {
                    p.data[i] -= update;
                }
            }
        }
    }
}

/// Exponential moving average of parameters.
#[derive(Debug, Clone)]
pub struct Ema<F> {
    pub decay: f64,
    pub shadow: ParamStore<F>,
}

impl<F: Scalar> Ema<F> {
    pub fn new(params: &ParamStore<F>, decay: f64) -> Self {
        Self {
            decay,
            shadow: params.clone(),
        }
    }

    pub fn update(&mut self, params: &ParamStore<F>) {
        let d = cast::<F>(self.decay);
        let one = F::one();
        for (s, p) in self.shadow.tensors.iter_mut().zip(&params.tensors) {
            for (a, &b) in s.data.iter_mut().zip(&p.data) {
                *a = d * *a + (one - d) * b;
            }
        }
    }
}
