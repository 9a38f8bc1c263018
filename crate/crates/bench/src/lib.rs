//! Fixtures shared by the kernel benchmarks.

use gtg_core::dataset::{OfflineDataset, SpaceKind};
use gtg_core::denoiser::{Denoiser, DenoiserArch, TrainingSet};
use gtg_core::diffusion::standard_normal;
use gtg_core::rng;
use gtg_core::tasks::branin;
use ndarray::Array2;
use rand::Rng;

/// `n` uniform Branin samples.
pub fn branin_dataset(n: usize, seed: u64) -> OfflineDataset {
    let mut r = rng::seeded(seed);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| vec![r.random_range(-5.0..10.0), r.random_range(0.0..15.0)])
        .collect();
    let scores = rows.iter().map(|x| branin(x[0], x[1])).collect();
    OfflineDataset::from_rows(&rows, scores, SpaceKind::Continuous).expect("valid rows")
}

pub fn arch(horizon: usize, hidden: usize, steps: usize) -> DenoiserArch {
    DenoiserArch {
        horizon,
        channels: 3,
        hidden,
        blocks: 2,
        time_dim: 32,
        cond_scale: horizon as f64,
        max_timestep: steps,
    }
}

pub fn denoiser(arch: DenoiserArch) -> Denoiser<f32> {
    Denoiser::new(arch, 0).expect("valid arch")
}

/// Random model-space inputs with condition values.
pub fn training_set(rows: usize, width: usize) -> TrainingSet<f32> {
    let mut r = rng::seeded(1);
    TrainingSet {
        inputs: standard_normal(rows, width, &mut r),
        conds: (0..rows).map(|_| r.random_range(0.0..40.0)).collect(),
    }
}

pub fn noise(rows: usize, width: usize, seed: u64) -> Array2<f32> {
    standard_normal(rows, width, &mut rng::seeded(seed))
}
