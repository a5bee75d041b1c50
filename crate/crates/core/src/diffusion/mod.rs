//! Noise schedules, the DDIM sampler and the synchronized multi-view loop.

mod engine;
mod rng;
mod sampler;
mod schedule;

use thiserror::Error;

pub use engine::{
    background_latent, AttentionSettings, Engine, EngineConfig, EngineError, Phase, SamplerState, Scene, StepRecord,
    SyncMode, TextureResult,
};
pub use rng::{normal_grid, stream_rng, Stream};
pub use sampler::{ddim_update, estimate_clean, forward_noise, step_to_prev};
pub use schedule::{NoiseSchedule, SamplerKind, TERMINAL_ALPHA_BAR};

#[derive(Debug, Error)]
pub enum DiffusionError {
    #[error("invalid schedule: {0}")]
    Schedule(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite clean estimate at t={t} (element {element})")]
    NonFinite { t: usize, element: usize },
}
