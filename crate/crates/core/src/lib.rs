//! Mesh texturing by synchronized multi-view diffusion.
//!
//! One diffusion trajectory runs per camera view. Every step, each view's
//! clean estimate is projected into UV space, the partial textures are
//! blended into one latent texture, and the texture is rendered back to all
//! views, so the trajectories stay consistent on shared surface points.
//!
//! The pipeline is split into [`geometry`] (meshes, cameras, rasterization),
//! [`transport`] (screen/texture transport), [`diffusion`] (schedule, sampler
//! and the synchronized loop), [`denoise`] (noise predictors), [`bridge`]
//! (an external model process), [`metrics`] and the run-level [`config`],
//! [`experiment`] and [`export`] modules.

pub mod bridge;
pub mod config;
pub mod denoise;
pub mod diffusion;
pub mod experiment;
pub mod export;
pub mod geometry;
pub mod grid;
pub mod metrics;
pub mod transport;

pub use config::{ConfigError, MeshSource, PredictorKind, RunConfig};
pub use denoise::{AttentionPlan, NoisePredictor, PredictBatch, PredictError};
pub use diffusion::{Engine, EngineConfig, EngineError, NoiseSchedule, SamplerKind, Scene, SyncMode, TextureResult};
pub use geometry::{Camera, GBuffer, Mesh, MeshError};
pub use grid::{GridRole, LatentGrid};
pub use metrics::ConsistencyReport;
pub use transport::{Aggregate, PartialTexture};
