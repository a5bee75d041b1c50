//! Drivers tying a [`RunConfig`] to a scene, a predictor and a report, plus
//! the paired runs used by the ablations.

use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::bridge::BridgePredictor;
use crate::config::{MeshSource, PredictorKind, RunConfig};
use crate::denoise::{
    front_back_bias, offset_perturbations, AnalyticGaussianDenoiser, NoisePredictor, PatternDenoiser, PredictError,
    TinyAttentionDenoiser,
};
use crate::diffusion::{background_latent, stream_rng, Engine, EngineError, Scene, Stream, TextureResult};
use crate::geometry::{build_camera_rig, fixtures, load_mesh, Mesh, MeshError, RigConfig};
use crate::grid::{GridRole, LatentGrid};
use crate::metrics::{
    bake_seam_energy, densify, front_back_gap, view_variance, ConsistencyReport, CurvePoint,
};
use crate::transport::{render_from_texture, scatter_to_uv, visibility_mask, voronoi_fill, PartialTexture};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("mesh: {0}")]
    Mesh(#[from] MeshError),
    #[error("config: {0}")]
    Config(String),
    #[error("predictor: {0}")]
    Predictor(#[from] PredictError),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

pub fn load_source(src: &MeshSource) -> Result<Mesh, MeshError> {
    match src {
        MeshSource::Path(p) => load_mesh(p),
        MeshSource::Fixture(name) => Ok(match name.as_str() {
            "cube" => fixtures::cube(),
            "quad" => fixtures::quad(1.0),
            "back-to-back" => fixtures::back_to_back_quads(),
            "icosphere" => fixtures::icosphere(2),
            other => return Err(MeshError::Parse {
                line: 0,
                msg: format!("unknown fixture {other:?}"),
            }),
        }),
    }
}

pub fn rig_config(cfg: &RunConfig, mesh: &Mesh) -> RigConfig {
    RigConfig {
        equatorial_count: cfg.equatorial_views,
        elevated_count: cfg.elevated_views,
        elevation_deg: cfg.elevation_deg,
        ..RigConfig::for_bounding_radius(mesh.bounding_radius(), cfg.view_resolution)
    }
}

pub fn build_scene(cfg: &RunConfig, mesh: Mesh) -> Scene {
    let rig = build_camera_rig(&rig_config(cfg, &mesh));
    Scene::new(mesh, rig, cfg.texture_resolution, cfg.texture_resolution)
}

/// Smooth seeded colour field in about [-0.7, 0.7]: a product of a few
/// low-frequency sinusoids per channel.
pub fn procedural_target(width: usize, height: usize, channels: usize, seed: u64) -> LatentGrid {
    let mut rng = stream_rng(seed, Stream::Target);
    let params: Vec<[f64; 5]> = (0..channels)
        .map(|_| {
            [
                rng.random_range(1..=4) as f64,
                rng.random_range(1..=4) as f64,
                rng.random(),
                rng.random(),
                rng.random_range(-0.2..0.2),
            ]
        })
        .collect();
    let tau = std::f64::consts::TAU;
    let mut g = LatentGrid::zeros(width, height, channels, GridRole::LatentTexture);
    for y in 0..height {
        let v = 1.0 - (y as f64 + 0.5) / height as f64;
        for x in 0..width {
            let u = (x as f64 + 0.5) / width as f64;
            for (ch, [fu, fv, pu, pv, off]) in params.iter().enumerate() {
                let val = off + 0.5 * (tau * (fu * u + pu)).sin() * (tau * (fv * v + pv)).cos();
                g.texel_mut(y * width + x)[ch] = val as f32;
            }
        }
    }
    g
}

/// Per-view offsets from the random perturbation and the front/back bias.
pub fn view_offsets(cfg: &RunConfig, scene: &Scene) -> Vec<Vec<f32>> {
    let c = cfg.channels();
    let n = scene.cameras.len();
    let random = offset_perturbations(n, c, cfg.perturbation, cfg.seed);
    let bias = front_back_bias(&scene.cameras, c, cfg.front_back_bias as f32);
    random
        .into_iter()
        .zip(bias)
        .map(|(r, b)| r.iter().zip(&b).map(|(x, y)| x + y).collect())
        .collect()
}

/// The predictor named by the config, with the toy target it was built
/// around (if any).
pub fn build_predictor(
    cfg: &RunConfig,
    scene: &Scene,
) -> Result<(Box<dyn NoisePredictor>, Option<LatentGrid>), ExperimentError> {
    let c = cfg.channels();
    let toy_pattern = || -> Result<(PatternDenoiser, LatentGrid), PredictError> {
        let target = procedural_target(cfg.texture_resolution, cfg.texture_resolution, c, cfg.seed);
        let bg = background_latent(cfg.seed, c);
        let p = PatternDenoiser::new(&target, &scene.gbuffers, &bg, cfg.spread)?
            .with_offsets(&view_offsets(cfg, scene), &scene.gbuffers)?;
        Ok((p, target))
    };
    Ok(match &cfg.predictor {
        PredictorKind::ToyPattern => {
            let (p, target) = toy_pattern()?;
            (Box::new(p), Some(target))
        }
        PredictorKind::ToyGaussian => {
            let (p, target) = toy_pattern()?;
            let g = AnalyticGaussianDenoiser::new(p.targets().to_vec(), cfg.spread)?;
            (Box::new(g), Some(target))
        }
        PredictorKind::TinyAttention => {
            let (p, target) = toy_pattern()?;
            let d = TinyAttentionDenoiser::new(cfg.weights_seed, c).with_base(p);
            (Box::new(d), Some(target))
        }
        PredictorKind::Bridge(addr) => {
            let mut b = BridgePredictor::new(addr.clone(), cfg.prompt.clone());
            b.conditioning = cfg.conditioning;
            (Box::new(b), None)
        }
    })
}

/// Filled and masked partials of the final views.
fn final_partials(result: &TextureResult, scene: &Scene, alpha: f64) -> Vec<PartialTexture> {
    let (w, h) = (scene.footprint.width, scene.footprint.height);
    result
        .final_views
        .par_iter()
        .zip(result.final_gbuffers.par_iter())
        .filter_map(|(v, g)| {
            let p = scatter_to_uv(v, g, alpha, w, h).ok()?;
            if p.valid_count() == 0 {
                return Some(p);
            }
            let f = voronoi_fill(&p).ok()?;
            Some(visibility_mask(&f, &scene.footprint, g))
        })
        .collect()
}

/// Per-texel standard deviation across the final views, 0 where fewer than
/// two views see the texel. Single channel.
pub fn variance_map(result: &TextureResult, scene: &Scene, final_alpha: f64) -> LatentGrid {
    let (w, h) = (scene.footprint.width, scene.footprint.height);
    let values = view_variance(&final_partials(result, scene, final_alpha))
        .into_iter()
        .map(|v| v.unwrap_or(0.0) as f32)
        .collect();
    LatentGrid::from_vec(w, h, 1, GridRole::LatentTexture, values).expect("one value per texel")
}

pub fn summarize(result: &TextureResult, scene: &Scene, final_alpha: f64) -> ConsistencyReport {
    let variance = view_variance(&final_partials(result, scene, final_alpha));
    let shared: Vec<f64> = variance.iter().flatten().copied().collect();
    let gap = densify(&result.bake).and_then(|(dense, _)| {
        let renders: Vec<LatentGrid> = result
            .final_gbuffers
            .iter()
            .map(|g| render_from_texture(&dense, g).latent)
            .collect();
        front_back_gap(&renders, &result.final_gbuffers, &scene.cameras)
    });
    ConsistencyReport {
        curve: result
            .records
            .iter()
            .map(|r| CurvePoint {
                t: r.t,
                phase: r.phase,
                disagreement: r.disagreement,
            })
            .collect(),
        final_disagreement: result.final_disagreement,
        seam_energy: bake_seam_energy(&result.bake, &scene.footprint),
        mean_view_variance: (!shared.is_empty()).then(|| shared.iter().sum::<f64>() / shared.len() as f64),
        shared_texels: shared.len(),
        front_back_gap: gap,
    }
}

pub struct RunOutcome {
    pub result: TextureResult,
    pub report: ConsistencyReport,
    pub target: Option<LatentGrid>,
}

pub fn execute(cfg: &RunConfig, scene: &Scene) -> Result<RunOutcome, ExperimentError> {
    cfg.validate().map_err(|e| ExperimentError::Config(e.to_string()))?;
    let (predictor, target) = build_predictor(cfg, scene)?;
    let engine = Engine::new(scene, predictor.as_ref(), cfg.engine_config())?;
    let result = engine.run()?;
    let report = summarize(&result, scene, cfg.final_alpha);
    Ok(RunOutcome { result, report, target })
}

/// The same config under MVD and under the async baseline.
pub fn compare_modes(cfg: &RunConfig, scene: &Scene) -> Result<(RunOutcome, RunOutcome), ExperimentError> {
    use crate::diffusion::SyncMode;
    let mvd = execute(&RunConfig { mode: SyncMode::Mvd, ..cfg.clone() }, scene)?;
    let asy = execute(&RunConfig { mode: SyncMode::AsyncBaseline, ..cfg.clone() }, scene)?;
    Ok((mvd, asy))
}

/// The same config with attention reuse on and off.
pub fn compare_sar(cfg: &RunConfig, scene: &Scene) -> Result<(RunOutcome, RunOutcome), ExperimentError> {
    let on = execute(&RunConfig { sar: true, ..cfg.clone() }, scene)?;
    let off = execute(&RunConfig { sar: false, ..cfg.clone() }, scene)?;
    Ok((on, off))
}
