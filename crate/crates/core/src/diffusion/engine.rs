use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::denoise::{AttentionPlan, NoisePredictor, PredictBatch, PredictError};
use crate::geometry::{rasterize, Camera, GBuffer, Mesh};
use crate::grid::{GridRole, LatentGrid};
use crate::metrics::disagreement;
use crate::transport::{
    aggregate, alpha_schedule, render_from_texture, scatter_to_uv, visibility_mask, voronoi_fill, Aggregate,
    PartialTexture, TexelFootprint, TransportError,
};

use super::rng::{normal_grid, stream_rng, Stream};
use super::sampler::{estimate_clean, step_to_prev};
use super::schedule::{NoiseSchedule, SamplerKind};
use super::DiffusionError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SyncMode {
    /// Views are synchronized through the latent texture every step.
    Mvd,
    /// Views share the initial noise but are denoised independently.
    AsyncBaseline,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    TextureSync,
    ScreenSpace,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttentionSettings {
    /// Attend over `{i-1, i, mirror(i)}`; otherwise each view attends to itself.
    pub reuse: bool,
    pub beta: f64,
    pub t_ref: usize,
    pub reference_view: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub steps: usize,
    pub sampler: SamplerKind,
    pub channels: usize,
    pub texture_width: usize,
    pub texture_height: usize,
    pub alpha_start: f64,
    pub alpha_end: f64,
    /// Blending exponent for the final RGB bake.
    pub final_alpha: f64,
    pub gamma: f64,
    /// Steps `t < t_switch` run in screen space.
    pub t_switch: usize,
    pub mode: SyncMode,
    pub seed: u64,
    pub attention: AttentionSettings,
    /// Keep ŵ_{0|t} for every step.
    pub snapshots: bool,
}

impl EngineConfig {
    /// Defaults scaled to `steps`: screen-space phase over the last 20%,
    /// reference attention over the first half.
    pub fn for_steps(steps: usize) -> Self {
        Self {
            steps,
            sampler: SamplerKind::Deterministic,
            channels: 4,
            texture_width: 512,
            texture_height: 512,
            alpha_start: 1.0,
            alpha_end: 5.0,
            final_alpha: 6.0,
            gamma: 1e-8,
            t_switch: (steps as f64 * 0.2).round() as usize,
            mode: SyncMode::Mvd,
            seed: 0,
            attention: AttentionSettings {
                reuse: true,
                beta: 1.0,
                t_ref: steps / 2,
                reference_view: 0,
            },
            snapshots: false,
        }
    }

    pub fn validate(&self, views: usize) -> Result<(), EngineError> {
        let bad = |m: String| Err(EngineError::Config(m));
        if self.steps == 0 {
            return bad("steps must be positive".into());
        }
        if self.channels == 0 || self.texture_width == 0 || self.texture_height == 0 {
            return bad("channels and texture size must be positive".into());
        }
        if self.t_switch > self.steps {
            return bad(format!("t_switch {} beyond {} steps", self.t_switch, self.steps));
        }
        if !(self.alpha_start >= 0.0 && self.alpha_end >= self.alpha_start && self.final_alpha >= 0.0) {
            return bad(format!(
                "alpha endpoints need 0 <= start <= end (got {} and {}), final alpha >= 0",
                self.alpha_start, self.alpha_end
            ));
        }
        if self.gamma.is_nan() || self.gamma <= 0.0 {
            return bad(format!("gamma {} must be > 0", self.gamma));
        }
        if !(0.0..=1.0).contains(&self.attention.beta) {
            return bad(format!("beta {} outside [0, 1]", self.attention.beta));
        }
        if views == 0 {
            return bad("camera rig is empty".into());
        }
        if self.attention.reference_view >= views {
            return bad(format!("reference view {} out of range", self.attention.reference_view));
        }
        Ok(())
    }
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self::for_steps(50)
    }
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("t={t}{}: {source}", view.map(|v| format!(", view {v}")).unwrap_or_default())]
    Predict {
        t: usize,
        view: Option<usize>,
        source: PredictError,
    },
    #[error("t={t}{}: {source}", view.map(|v| format!(", view {v}")).unwrap_or_default())]
    Transport {
        t: usize,
        view: Option<usize>,
        source: TransportError,
    },
    #[error("t={t}, view {view}: {source}")]
    Diffusion {
        t: usize,
        view: usize,
        source: DiffusionError,
    },
}

/// Mesh, cameras and everything precomputed from them.
#[derive(Debug, Clone)]
pub struct Scene {
    pub mesh: Mesh,
    pub cameras: Vec<Camera>,
    pub gbuffers: Vec<GBuffer>,
    pub footprint: TexelFootprint,
}

impl Scene {
    pub fn new(mesh: Mesh, cameras: Vec<Camera>, texture_width: usize, texture_height: usize) -> Self {
        let gbuffers = cameras.par_iter().map(|c| rasterize(&mesh, c)).collect();
        let footprint = TexelFootprint::build(&mesh, texture_width, texture_height);
        Self {
            mesh,
            cameras,
            gbuffers,
            footprint,
        }
    }

    /// G-buffers of the same cameras at another resolution.
    pub fn gbuffers_at(&self, resolution: usize) -> Vec<GBuffer> {
        self.cameras
            .par_iter()
            .map(|c| {
                let mut cam = c.clone();
                cam.resolution = resolution;
                rasterize(&self.mesh, &cam)
            })
            .collect()
    }

    pub fn view_resolution(&self) -> usize {
        self.cameras.first().map_or(0, |c| c.resolution)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerState {
    pub t: usize,
    pub views: Vec<LatentGrid>,
    pub texture: LatentGrid,
    pub phase: Phase,
}

/// Diagnostics of one step t -> t-1.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub t: usize,
    pub phase: Phase,
    /// D(t) over the views' clean estimates.
    pub disagreement: f64,
    /// ŵ_{0|t}, when snapshots are on.
    pub clean_texture: Option<LatentGrid>,
}

#[derive(Debug, Clone)]
pub struct TextureResult {
    /// Final baked texture in decoded space.
    pub texture: LatentGrid,
    pub bake: Aggregate,
    pub final_views: Vec<LatentGrid>,
    /// G-buffers at the resolution of `final_views`.
    pub final_gbuffers: Vec<GBuffer>,
    pub latent_texture: LatentGrid,
    pub records: Vec<StepRecord>,
    /// D over the decoded final views.
    pub final_disagreement: f64,
}

/// Solid background colour in [-1, 1] per channel, fixed by the seed.
pub fn background_latent(seed: u64, channels: usize) -> Vec<f32> {
    let mut rng = stream_rng(seed, Stream::BackgroundColor);
    (0..channels).map(|_| rng.random_range(-1.0f32..1.0)).collect()
}

pub struct Engine<'a> {
    scene: &'a Scene,
    predictor: &'a dyn NoisePredictor,
    cfg: EngineConfig,
    schedule: NoiseSchedule,
    plan: AttentionPlan,
    background: Vec<f32>,
}

impl<'a> Engine<'a> {
    pub fn new(scene: &'a Scene, predictor: &'a dyn NoisePredictor, cfg: EngineConfig) -> Result<Self, EngineError> {
        cfg.validate(scene.cameras.len())?;
        if scene.footprint.width != cfg.texture_width || scene.footprint.height != cfg.texture_height {
            return Err(EngineError::Config(format!(
                "scene built for {}x{} texture, config asks {}x{}",
                scene.footprint.width, scene.footprint.height, cfg.texture_width, cfg.texture_height
            )));
        }
        let schedule = NoiseSchedule::cosine(cfg.steps, cfg.sampler);
        let a = &cfg.attention;
        let plan = if a.reuse {
            AttentionPlan::reuse(&scene.cameras, a.reference_view, a.beta, a.t_ref)
        } else {
            AttentionPlan::isolated(scene.cameras.len())
        };
        let background = background_latent(cfg.seed, cfg.channels);
        Ok(Self {
            scene,
            predictor,
            cfg,
            schedule,
            plan,
            background,
        })
    }

    pub fn config(&self) -> &EngineConfig {
        &self.cfg
    }

    pub fn schedule(&self) -> &NoiseSchedule {
        &self.schedule
    }

    pub fn plan(&self) -> &AttentionPlan {
        &self.plan
    }

    pub fn background(&self) -> &[f32] {
        &self.background
    }

    /// w_T ~ N(0, I), rendered to every view; uncovered pixels get
    /// independent N(0, I) samples.
    pub fn init_state(&self) -> SamplerState {
        let c = self.cfg.channels;
        let mut rng = stream_rng(self.cfg.seed, Stream::TextureInit);
        let texture = normal_grid(&mut rng, self.cfg.texture_width, self.cfg.texture_height, c, GridRole::LatentTexture);
        let views = self
            .scene
            .gbuffers
            .par_iter()
            .enumerate()
            .map(|(view, g)| {
                let mut rng = stream_rng(self.cfg.seed, Stream::InitBackground { view });
                let noise = normal_grid(&mut rng, g.width, g.height, c, GridRole::ViewLatent);
                composite(&texture, g, |p| noise.texel(p).to_vec())
            })
            .collect();
        SamplerState {
            t: self.cfg.steps,
            views,
            texture,
            phase: Phase::TextureSync,
        }
    }

    /// Per-view clean estimates z_{0|t}.
    pub fn clean_estimates(&self, state: &SamplerState) -> Result<Vec<LatentGrid>, EngineError> {
        let t = state.t;
        let batch = PredictBatch {
            latents: &state.views,
            cameras: &self.scene.cameras,
            gbuffers: &self.scene.gbuffers,
            t,
            alpha_bar: self.schedule.alpha_bar(t),
            plan: &self.plan,
        };
        let eps = self.predictor.predict(&batch).map_err(|e| predict_error(t, e))?;
        if eps.len() != state.views.len() {
            return Err(EngineError::Predict {
                t,
                view: None,
                source: PredictError::BatchSize {
                    got: eps.len(),
                    expected: state.views.len(),
                },
            });
        }
        state
            .views
            .par_iter()
            .zip(eps.par_iter())
            .enumerate()
            .map(|(view, (z, e))| {
                estimate_clean(z, e, t, &self.schedule).map_err(|source| EngineError::Diffusion { t, view, source })
            })
            .collect()
    }

    /// Scatter every view, then fill and mask. Returns the raw scatters
    /// alongside the masked partials; views that cover nothing yield an
    /// all-invalid partial.
    fn transport_views(
        &self,
        views: &[LatentGrid],
        gbufs: &[GBuffer],
        alpha: f64,
        t: usize,
    ) -> Result<(Vec<PartialTexture>, Vec<PartialTexture>), EngineError> {
        let (w, h) = (self.cfg.texture_width, self.cfg.texture_height);
        let pairs: Vec<(PartialTexture, PartialTexture)> = views
            .par_iter()
            .zip(gbufs.par_iter())
            .enumerate()
            .map(|(view, (z, g))| {
                let err = |source| EngineError::Transport {
                    t,
                    view: Some(view),
                    source,
                };
                let partial = scatter_to_uv(z, g, alpha, w, h).map_err(err)?;
                if partial.valid_count() == 0 {
                    return Ok((partial.clone(), partial));
                }
                let filled = voronoi_fill(&partial).map_err(err)?;
                let masked = visibility_mask(&filled, &self.scene.footprint, g);
                Ok((partial, masked))
            })
            .collect::<Result<_, EngineError>>()?;
        Ok(pairs.into_iter().unzip())
    }

    fn scatter_views(
        &self,
        views: &[LatentGrid],
        gbufs: &[GBuffer],
        alpha: f64,
        t: usize,
    ) -> Result<Vec<PartialTexture>, EngineError> {
        let (w, h) = (self.cfg.texture_width, self.cfg.texture_height);
        views
            .par_iter()
            .zip(gbufs.par_iter())
            .enumerate()
            .map(|(view, (z, g))| {
                scatter_to_uv(z, g, alpha, w, h).map_err(|source| EngineError::Transport {
                    t,
                    view: Some(view),
                    source,
                })
            })
            .collect()
    }

    fn aggregate_at(&self, partials: &[PartialTexture], t: usize) -> Result<Aggregate, EngineError> {
        aggregate(partials, self.cfg.gamma).map_err(|source| EngineError::Transport { t, view: None, source })
    }

    /// One synchronized step t -> t-1 through the latent texture.
    pub fn mvd_step(&self, state: &SamplerState) -> Result<(SamplerState, StepRecord), EngineError> {
        let t = state.t;
        assert!(t >= 1, "no step below t = 0");
        let clean = self.clean_estimates(state)?;
        let alpha = alpha_schedule(t, self.cfg.steps, self.cfg.alpha_start, self.cfg.alpha_end);
        let (scattered, partials) = self.transport_views(&clean, &self.scene.gbuffers, alpha, t)?;
        let agg = self.aggregate_at(&partials, t)?;
        let mut rng = stream_rng(self.cfg.seed, Stream::AncestralTexture { t });
        let texture = step_to_prev(&state.texture, &agg.texture, t, &self.schedule, &mut rng);
        let a_prev = self.schedule.alpha_bar(t - 1);
        let (sa, sn) = (a_prev.sqrt(), (1.0 - a_prev).sqrt());
        let views = self
            .scene
            .gbuffers
            .par_iter()
            .enumerate()
            .map(|(view, g)| {
                let mut rng = stream_rng(self.cfg.seed, Stream::StepBackground { t, view });
                let noise = normal_grid(&mut rng, g.width, g.height, self.cfg.channels, GridRole::ViewLatent);
                composite(&texture, g, |p| {
                    self.background
                        .iter()
                        .zip(noise.texel(p))
                        .map(|(&b, &e)| (sa * f64::from(b) + sn * f64::from(e)) as f32)
                        .collect()
                })
            })
            .collect();
        let record = StepRecord {
            t,
            phase: Phase::TextureSync,
            disagreement: disagreement(&scattered),
            clean_texture: self.cfg.snapshots.then_some(agg.texture),
        };
        Ok((
            SamplerState {
                t: t - 1,
                views,
                texture,
                phase: Phase::TextureSync,
            },
            record,
        ))
    }

    /// One independent per-view step t -> t-1. Used for the async baseline
    /// and for the final screen-space phase.
    pub fn screen_step(&self, state: &SamplerState, phase: Phase) -> Result<(SamplerState, StepRecord), EngineError> {
        let t = state.t;
        assert!(t >= 1, "no step below t = 0");
        let clean = self.clean_estimates(state)?;
        let views = state
            .views
            .par_iter()
            .zip(clean.par_iter())
            .enumerate()
            .map(|(view, (z, x0))| {
                let mut rng = stream_rng(self.cfg.seed, Stream::AncestralView { t, view });
                step_to_prev(z, x0, t, &self.schedule, &mut rng)
            })
            .collect();
        let alpha = alpha_schedule(t, self.cfg.steps, self.cfg.alpha_start, self.cfg.alpha_end);
        let clean_texture = if self.cfg.snapshots {
            let (_, partials) = self.transport_views(&clean, &self.scene.gbuffers, alpha, t)?;
            Some(self.aggregate_at(&partials, t)?.texture)
        } else {
            None
        };
        let record = StepRecord {
            t,
            phase,
            disagreement: disagreement(&self.scatter_views(&clean, &self.scene.gbuffers, alpha, t)?),
            clean_texture,
        };
        Ok((
            SamplerState {
                t: t - 1,
                views,
                texture: state.texture.clone(),
                phase,
            },
            record,
        ))
    }

    /// Full trajectory from T to 0, then decode and bake.
    pub fn run(&self) -> Result<TextureResult, EngineError> {
        let mut state = self.init_state();
        let mut records = Vec::with_capacity(self.cfg.steps);
        let sync_until = self.cfg.t_switch.max(1);
        while state.t >= 1 {
            let (next, record) = if state.t >= sync_until && state.phase == Phase::TextureSync {
                match self.cfg.mode {
                    SyncMode::Mvd => self.mvd_step(&state)?,
                    SyncMode::AsyncBaseline => self.screen_step(&state, Phase::TextureSync)?,
                }
            } else {
                self.screen_step(&state, Phase::ScreenSpace)?
            };
            records.push(record);
            state = next;
        }
        let decoded = self.predictor.decode(&state.views).map_err(|e| predict_error(0, e))?;
        let res = decoded.first().map_or(0, |v| v.width);
        let final_gbuffers = if res == self.scene.view_resolution() {
            self.scene.gbuffers.clone()
        } else {
            self.scene.gbuffers_at(res)
        };
        let unfilled = self.scatter_views(&decoded, &final_gbuffers, self.cfg.final_alpha, 0)?;
        let bake = self.aggregate_at(&unfilled, 0)?;
        Ok(TextureResult {
            texture: bake.texture.clone().with_role(GridRole::Rgb),
            bake,
            final_views: decoded,
            final_gbuffers,
            latent_texture: state.texture,
            records,
            final_disagreement: disagreement(&unfilled),
        })
    }
}

fn predict_error(t: usize, source: PredictError) -> EngineError {
    let view = match &source {
        PredictError::View { view, .. } => Some(*view),
        _ => None,
    };
    EngineError::Predict { t, view, source }
}

/// Renders `texture` into the view and fills uncovered pixels from `bg`.
fn composite(texture: &LatentGrid, gbuf: &GBuffer, bg: impl Fn(usize) -> Vec<f32>) -> LatentGrid {
    let r = render_from_texture(texture, gbuf);
    let mut latent = r.latent;
    for p in (0..gbuf.len()).filter(|&p| r.background[p]) {
        latent.texel_mut(p).copy_from_slice(&bg(p));
    }
    latent
}
