use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::grid::LatentGrid;

use super::schedule::{NoiseSchedule, SamplerKind};
use super::DiffusionError;

/// Removes predicted noise: `(z_t - sqrt(1 - ᾱ_t)·eps) / sqrt(ᾱ_t)`.
pub fn estimate_clean(
    z_t: &LatentGrid,
    eps: &LatentGrid,
    t: usize,
    schedule: &NoiseSchedule,
) -> Result<LatentGrid, DiffusionError> {
    if !z_t.same_shape(eps) {
        return Err(DiffusionError::Shape(format!(
            "latent {}x{}x{} vs noise {}x{}x{}",
            z_t.width, z_t.height, z_t.channels, eps.width, eps.height, eps.channels
        )));
    }
    let a = schedule.alpha_bar(t);
    let (sa, sn) = (a.sqrt(), (1.0 - a).sqrt());
    let mut out = z_t.clone();
    for (o, &e) in out.data.iter_mut().zip(&eps.data) {
        *o = ((f64::from(*o) - sn * f64::from(e)) / sa) as f32;
    }
    if let Some(i) = out.data.iter().position(|v| !v.is_finite()) {
        return Err(DiffusionError::NonFinite { t, element: i });
    }
    Ok(out)
}

/// Noise implied by a latent and its clean estimate.
fn implied_noise(z: f64, z0: f64, sa: f64, sn: f64) -> f64 {
    if sn == 0.0 {
        0.0
    } else {
        (z - sa * z0) / sn
    }
}

/// DDIM update from ᾱ_t to ᾱ_prev with noise level `sigma`. `noise` must
/// yield one standard normal per element when `sigma > 0`.
pub fn ddim_update(
    z_t: &LatentGrid,
    z0: &LatentGrid,
    abar_t: f64,
    abar_prev: f64,
    sigma: f64,
    mut noise: impl FnMut() -> f64,
) -> LatentGrid {
    assert!(z_t.same_shape(z0));
    let (sa, sn) = (abar_t.sqrt(), (1.0 - abar_t).sqrt());
    let sa_prev = abar_prev.sqrt();
    let dir = (1.0 - abar_prev - sigma * sigma).max(0.0).sqrt();
    let mut out = z_t.clone();
    for (o, &x0) in out.data.iter_mut().zip(&z0.data) {
        let x0 = f64::from(x0);
        let eps = implied_noise(f64::from(*o), x0, sa, sn);
        let mut v = sa_prev * x0 + dir * eps;
        if sigma > 0.0 {
            v += sigma * noise();
        }
        *o = v as f32;
    }
    out
}

/// One sampler step t -> t-1 combining `z_t` and its clean estimate.
pub fn step_to_prev<R: Rng + ?Sized>(
    z_t: &LatentGrid,
    z0: &LatentGrid,
    t: usize,
    schedule: &NoiseSchedule,
    rng: &mut R,
) -> LatentGrid {
    assert!(t >= 1 && t <= schedule.steps(), "timestep {t} outside 1..={}", schedule.steps());
    let (a, a_prev) = (schedule.alpha_bar(t), schedule.alpha_bar(t - 1));
    let sigma = match schedule.kind {
        SamplerKind::Deterministic => 0.0,
        SamplerKind::Ancestral => ((1.0 - a_prev) / (1.0 - a) * (1.0 - a / a_prev)).max(0.0).sqrt(),
    };
    ddim_update(z_t, z0, a, a_prev, sigma, || StandardNormal.sample(rng))
}

/// Forward process: `sqrt(ᾱ)·x + sqrt(1 - ᾱ)·noise`.
pub fn forward_noise(x: &LatentGrid, noise: &LatentGrid, abar: f64) -> LatentGrid {
    assert!(x.same_shape(noise));
    let (sa, sn) = (abar.sqrt(), (1.0 - abar).sqrt());
    let mut out = x.clone();
    for (o, &e) in out.data.iter_mut().zip(&noise.data) {
        *o = (sa * f64::from(*o) + sn * f64::from(e)) as f32;
    }
    out
}
