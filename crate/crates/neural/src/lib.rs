// SPDX-License-Identifier: Apache-2.0

//! Diffusion model, cost predictor and guided sampler for design tensors.
//!
//! Everything runs on a small `f64` reverse-mode tape ([`graph::Graph`]).
//! Images are `[N, H, W, C]`; [`encode`] converts to and from the
//! `[C, H, W]` design codec.

pub mod checkpoint;
pub mod encode;
pub mod error;
pub mod graph;
pub mod nets;
pub mod sampler;
pub mod schedule;
pub mod stats;
pub mod tensor;
pub mod train;

pub use encode::{batch_rows, encode_designs, DesignLayout};
pub use error::{Error, Result};
pub use nets::{DenoiserNet, ItemShape, NetConfig, ParamSet, PredictorNet};
pub use sampler::{guided_step, sample_chains, sample_guided, sample_unconditional, GuidanceConfig, Sample};
pub use schedule::{NoiseSchedule, ScheduleKind, DEFAULT_TIMESTEPS};
pub use tensor::Tensor;
pub use train::{train_diffusion, train_predictor, Adam, TrainConfig, TrainReport};
