//! The noise-predictor contract and the built-in predictors.

mod attention;
mod gaussian;
mod pattern;

use thiserror::Error;

use crate::geometry::{mirror_view_index, previous_view_index, Camera, GBuffer};
use crate::grid::LatentGrid;

pub use attention::{AttentionMatrix, AttentionReport, AttentionWeights, TinyAttentionDenoiser, ViewAttention};
pub use gaussian::{gaussian_posterior_eps, AnalyticGaussianDenoiser};
pub use pattern::{front_back_bias, offset_perturbations, PatternDenoiser};

#[derive(Debug, Error)]
pub enum PredictError {
    #[error("view {view}: {msg}")]
    View { view: usize, msg: String },
    #[error("invalid attention plan: {0}")]
    InvalidPlan(String),
    #[error("batch has {got} views, predictor expects {expected}")]
    BatchSize { got: usize, expected: usize },
    #[error("invalid predictor parameter: {0}")]
    InvalidParameter(String),
    #[error("bridge: {0}")]
    Bridge(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Capabilities {
    pub attention_reuse: bool,
    pub decode: bool,
}

/// Cross-view attention routing for one run.
///
/// View `i` attends to the tokens of `sources[i]`; while `t > t_ref` the
/// result is blended as `beta·SA(i, sources) + (1 - beta)·SA(i, reference)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionPlan {
    pub sources: Vec<Vec<usize>>,
    pub reference: usize,
    pub beta: f64,
    pub t_ref: usize,
}

impl AttentionPlan {
    /// Each view attends to itself only; the reference term is off.
    pub fn isolated(views: usize) -> Self {
        Self {
            sources: (0..views).map(|i| vec![i]).collect(),
            reference: 0,
            beta: 1.0,
            t_ref: 0,
        }
    }

    /// Attention reuse over `{i-1, i, mirror(i)}` (deduplicated, in that
    /// order) plus the reference view.
    pub fn reuse(rig: &[Camera], reference: usize, beta: f64, t_ref: usize) -> Self {
        let n = rig.len();
        let sources = (0..n)
            .map(|i| {
                let mut set = Vec::with_capacity(3);
                for s in [previous_view_index(i, rig), i, mirror_view_index(i, rig)] {
                    if !set.contains(&s) {
                        set.push(s);
                    }
                }
                set
            })
            .collect();
        Self {
            sources,
            reference,
            beta,
            t_ref,
        }
    }

    pub fn validate(&self, views: usize) -> Result<(), PredictError> {
        if self.sources.len() != views {
            return Err(PredictError::InvalidPlan(format!(
                "{} source sets for {views} views",
                self.sources.len()
            )));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(PredictError::InvalidPlan(format!("beta {} outside [0, 1]", self.beta)));
        }
        if self.reference >= views {
            return Err(PredictError::InvalidPlan(format!("reference view {} out of range", self.reference)));
        }
        for (i, set) in self.sources.iter().enumerate() {
            if set.is_empty() {
                return Err(PredictError::InvalidPlan(format!("view {i} has no sources")));
            }
            if let Some(bad) = set.iter().find(|&&s| s >= views) {
                return Err(PredictError::InvalidPlan(format!("view {i} source {bad} out of range")));
            }
        }
        Ok(())
    }

    /// Whether the reference-view term contributes at timestep `t`.
    pub fn reference_active(&self, t: usize) -> bool {
        t > self.t_ref && self.beta < 1.0
    }
}

/// Everything a predictor sees for one timestep: all views at once, so
/// that cross-view attention can be computed as a single batch.
#[derive(Debug, Clone, Copy)]
pub struct PredictBatch<'a> {
    pub latents: &'a [LatentGrid],
    pub cameras: &'a [Camera],
    pub gbuffers: &'a [GBuffer],
    pub t: usize,
    pub alpha_bar: f64,
    pub plan: &'a AttentionPlan,
}

/// A noise predictor ε(z_t, t) over a batch of views.
///
/// Implementations must be pure: identical batches give identical output.
pub trait NoisePredictor: Send + Sync {
    fn predict(&self, batch: &PredictBatch<'_>) -> Result<Vec<LatentGrid>, PredictError>;

    fn capabilities(&self) -> Capabilities {
        Capabilities::default()
    }

    /// Maps fully denoised latents to images. Toy predictors live directly
    /// in colour space, so the default is the identity.
    fn decode(&self, latents: &[LatentGrid]) -> Result<Vec<LatentGrid>, PredictError> {
        Ok(latents.to_vec())
    }
}

/// Returns its input as the noise estimate.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityPredictor;

impl NoisePredictor for IdentityPredictor {
    fn predict(&self, batch: &PredictBatch<'_>) -> Result<Vec<LatentGrid>, PredictError> {
        Ok(batch.latents.to_vec())
    }
}
