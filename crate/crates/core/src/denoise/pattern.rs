use crate::bridge::{view_bucket, ViewBucket};
use crate::diffusion::{stream_rng, Stream};
use crate::geometry::{Camera, GBuffer};
use crate::grid::LatentGrid;
use crate::transport::render_from_texture;

use rand_distr::{Distribution, Normal};

use super::gaussian::{gaussian_posterior_mean, predict_gaussian};
use super::{NoisePredictor, PredictBatch, PredictError};

/// Toy condition-dependent denoiser: each view's data distribution is
/// `N(target_i, spread·I)`, where `target_i` is the view's render of a shared
/// texture (background pixels target the run's background latent).
///
/// With `spread = 0` every view collapses onto its own target at the last
/// step regardless of how it got there. A positive spread lets the final
/// sample keep what the trajectory agreed on.
#[derive(Debug, Clone)]
pub struct PatternDenoiser {
    targets: Vec<LatentGrid>,
    spread: f64,
}

impl PatternDenoiser {
    pub fn new(
        texture_target: &LatentGrid,
        gbufs: &[GBuffer],
        background: &[f32],
        spread: f64,
    ) -> Result<Self, PredictError> {
        if spread.is_nan() || spread < 0.0 {
            return Err(PredictError::InvalidParameter(format!("spread {spread} must be >= 0")));
        }
        if background.len() != texture_target.channels {
            return Err(PredictError::InvalidParameter(format!(
                "background has {} channels, texture {}",
                background.len(),
                texture_target.channels
            )));
        }
        let targets = gbufs
            .iter()
            .map(|g| {
                let r = render_from_texture(texture_target, g);
                let mut latent = r.latent;
                for p in (0..g.len()).filter(|&p| r.background[p]) {
                    latent.texel_mut(p).copy_from_slice(background);
                }
                latent
            })
            .collect();
        Ok(Self { targets, spread })
    }

    /// Adds a constant per-view offset to the covered pixels of each target.
    pub fn with_offsets(mut self, offsets: &[Vec<f32>], gbufs: &[GBuffer]) -> Result<Self, PredictError> {
        if offsets.len() != self.targets.len() || gbufs.len() != self.targets.len() {
            return Err(PredictError::BatchSize {
                got: offsets.len(),
                expected: self.targets.len(),
            });
        }
        for (view, ((target, off), g)) in self.targets.iter_mut().zip(offsets).zip(gbufs).enumerate() {
            if off.len() != target.channels {
                return Err(PredictError::View {
                    view,
                    msg: format!("offset has {} channels", off.len()),
                });
            }
            for p in (0..g.len()).filter(|&p| g.mask[p]) {
                for (v, o) in target.texel_mut(p).iter_mut().zip(off) {
                    *v += o;
                }
            }
        }
        Ok(self)
    }

    pub fn targets(&self) -> &[LatentGrid] {
        &self.targets
    }

    pub fn spread(&self) -> f64 {
        self.spread
    }

    /// Posterior means E[x | z_t] for every view of the batch.
    pub(crate) fn posterior_means(&self, batch: &PredictBatch<'_>) -> Result<Vec<LatentGrid>, PredictError> {
        if batch.latents.len() != self.targets.len() {
            return Err(PredictError::BatchSize {
                got: batch.latents.len(),
                expected: self.targets.len(),
            });
        }
        batch
            .latents
            .iter()
            .zip(&self.targets)
            .enumerate()
            .map(|(view, (z, m))| {
                if !z.same_shape(m) {
                    return Err(PredictError::View {
                        view,
                        msg: "latent and target shapes differ".into(),
                    });
                }
                let mut x = z.clone();
                for (o, (&zv, &mv)) in x.data.iter_mut().zip(z.data.iter().zip(&m.data)) {
                    *o = gaussian_posterior_mean(f64::from(zv), f64::from(mv), self.spread, batch.alpha_bar) as f32;
                }
                Ok(x)
            })
            .collect()
    }
}

impl NoisePredictor for PatternDenoiser {
    fn predict(&self, batch: &PredictBatch<'_>) -> Result<Vec<LatentGrid>, PredictError> {
        predict_gaussian(batch, &self.targets, self.spread)
    }
}

/// Independent `N(0, sigma²)` colour offsets per view and channel.
pub fn offset_perturbations(views: usize, channels: usize, sigma: f64, seed: u64) -> Vec<Vec<f32>> {
    let mut rng = stream_rng(seed, Stream::Perturbation);
    let normal = Normal::new(0.0, sigma.max(0.0)).expect("finite sigma");
    (0..views)
        .map(|_| (0..channels).map(|_| normal.sample(&mut rng) as f32).collect())
        .collect()
}

/// `+amplitude` on every channel for front-facing cameras, `-amplitude` for
/// back-facing ones, zero for side and top views.
pub fn front_back_bias(cameras: &[Camera], channels: usize, amplitude: f32) -> Vec<Vec<f32>> {
    cameras
        .iter()
        .map(|cam| {
            let v = match view_bucket(cam) {
                ViewBucket::Front => amplitude,
                ViewBucket::Back => -amplitude,
                _ => 0.0,
            };
            vec![v; channels]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::denoise::AttentionPlan;
    use crate::geometry::{build_camera_rig, fixtures, rasterize, RigConfig};
    use crate::grid::GridRole;

    fn scene() -> (Vec<Camera>, Vec<GBuffer>) {
        let cube = fixtures::cube();
        let rig = build_camera_rig(&RigConfig::for_bounding_radius(cube.bounding_radius(), 16));
        let gbufs = rig.iter().map(|c| rasterize(&cube, c)).collect();
        (rig, gbufs)
    }

    #[test]
    fn background_targets_the_background_latent() {
        let (_, gbufs) = scene();
        let tex = LatentGrid::filled(32, 32, 3, GridRole::LatentTexture, 0.5);
        let d = PatternDenoiser::new(&tex, &gbufs, &[0.1, 0.2, 0.3], 0.0).unwrap();
        for (g, t) in gbufs.iter().zip(d.targets()) {
            for p in 0..g.len() {
                let expect: &[f32] = if g.mask[p] { &[0.5, 0.5, 0.5] } else { &[0.1, 0.2, 0.3] };
                assert_eq!(t.texel(p), expect);
            }
        }
    }

    #[test]
    fn shared_target_gives_agreeing_estimates() {
        let (rig, gbufs) = scene();
        let tex = LatentGrid::filled(32, 32, 1, GridRole::LatentTexture, -0.4);
        let d = PatternDenoiser::new(&tex, &gbufs, &[0.0], 0.0).unwrap();
        let latents: Vec<LatentGrid> = gbufs.iter().map(|_| LatentGrid::filled(16, 16, 1, GridRole::ViewLatent, 0.3)).collect();
        let plan = AttentionPlan::isolated(rig.len());
        let batch = PredictBatch {
            latents: &latents,
            cameras: &rig,
            gbuffers: &gbufs,
            t: 20,
            alpha_bar: 0.4,
            plan: &plan,
        };
        let means = d.posterior_means(&batch).unwrap();
        for (g, m) in gbufs.iter().zip(&means) {
            for p in (0..g.len()).filter(|&p| g.mask[p]) {
                assert!((m.texel(p)[0] + 0.4).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn bias_signs_follow_buckets() {
        let (rig, _) = scene();
        let bias = front_back_bias(&rig, 2, 0.5);
        assert_eq!(bias[0], vec![0.5, 0.5]);
        assert_eq!(bias[4], vec![-0.5, -0.5]);
        assert_eq!(bias[2], vec![0.0, 0.0]);
        assert_eq!(bias[8], vec![0.0, 0.0]);
    }

    #[test]
    fn perturbations_are_seeded() {
        assert_eq!(offset_perturbations(4, 3, 0.3, 9), offset_perturbations(4, 3, 0.3, 9));
        assert_ne!(offset_perturbations(4, 3, 0.3, 9), offset_perturbations(4, 3, 0.3, 10));
    }
}
