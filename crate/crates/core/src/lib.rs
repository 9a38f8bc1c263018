//! Guided trajectory generation for offline model-based optimization.
//!
//! The crate builds improvement trajectories from a fixed dataset of
//! (design, score) pairs, trains a conditional diffusion model over whole
//! trajectories, samples new trajectories with classifier-free guidance and
//! context inpainting, and filters the generated designs with a
//! rank-reweighted surrogate.
//!
//! Stages, in pipeline order:
//!
//! 1. [`trajectory::build_trajectories`] over an [`dataset::OfflineDataset`]
//! 2. [`denoiser::train`] (diffusion model) and [`proxy::train_proxy`]
//! 3. [`diffusion::sample_with_context`]
//! 4. [`proxy::filter_top_q`], then [`tasks::evaluate_candidates`]
//!
//! [`pipeline::run_experiment`] strings these together per seed.

pub mod checkpoint;
pub mod dataset;
pub mod denoiser;
pub mod diffusion;
mod error;
pub mod nn;
pub mod pipeline;
pub mod proxy;
pub mod rng;
pub mod stats;
pub mod tasks;
pub mod trajectory;

pub use error::{Error, Result};
