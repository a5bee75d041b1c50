use crate::grid::LatentGrid;

use super::{NoisePredictor, PredictBatch, PredictError};

/// Optimal noise estimate for data `x ~ N(mean, var·I)` observed as
/// `z = √ᾱ·x + √(1-ᾱ)·ε`.
///
/// The posterior mean is `mean + var·√ᾱ / (ᾱ·var + 1 - ᾱ) · (z - √ᾱ·mean)`;
/// the returned ε is the one that maps `z` back to it.
pub fn gaussian_posterior_eps(z: f64, mean: f64, var: f64, alpha_bar: f64) -> f64 {
    let sa = alpha_bar.sqrt();
    let gain = var * sa / (alpha_bar * var + 1.0 - alpha_bar);
    let x = mean + gain * (z - sa * mean);
    (z - sa * x) / (1.0 - alpha_bar).sqrt()
}

/// Posterior mean matching [`gaussian_posterior_eps`].
pub(crate) fn gaussian_posterior_mean(z: f64, mean: f64, var: f64, alpha_bar: f64) -> f64 {
    let sa = alpha_bar.sqrt();
    mean + var * sa / (alpha_bar * var + 1.0 - alpha_bar) * (z - sa * mean)
}

/// Closed-form denoiser for Gaussian data around a per-view mean.
#[derive(Debug, Clone)]
pub struct AnalyticGaussianDenoiser {
    means: Vec<LatentGrid>,
    var: f64,
}

impl AnalyticGaussianDenoiser {
    pub fn new(means: Vec<LatentGrid>, var: f64) -> Result<Self, PredictError> {
        if var.is_nan() || var < 0.0 {
            return Err(PredictError::InvalidParameter(format!("target variance {var} must be >= 0")));
        }
        Ok(Self { means, var })
    }

    pub fn means(&self) -> &[LatentGrid] {
        &self.means
    }

    pub fn var(&self) -> f64 {
        self.var
    }
}

/// Per-view Gaussian posterior ε against `means`.
pub(crate) fn predict_gaussian(
    batch: &PredictBatch<'_>,
    means: &[LatentGrid],
    var: f64,
) -> Result<Vec<LatentGrid>, PredictError> {
    if batch.latents.len() != means.len() {
        return Err(PredictError::BatchSize {
            got: batch.latents.len(),
            expected: means.len(),
        });
    }
    if batch.alpha_bar >= 1.0 {
        return Err(PredictError::InvalidParameter("noise prediction at alpha_bar = 1".into()));
    }
    batch
        .latents
        .iter()
        .zip(means)
        .enumerate()
        .map(|(view, (z, m))| {
            if !z.same_shape(m) {
                return Err(PredictError::View {
                    view,
                    msg: format!("latent {}x{}x{} vs target {}x{}x{}", z.width, z.height, z.channels, m.width, m.height, m.channels),
                });
            }
            let mut eps = z.clone();
            for (e, (&zv, &mv)) in eps.data.iter_mut().zip(z.data.iter().zip(&m.data)) {
                *e = gaussian_posterior_eps(f64::from(zv), f64::from(mv), var, batch.alpha_bar) as f32;
            }
            Ok(eps)
        })
        .collect()
}

impl NoisePredictor for AnalyticGaussianDenoiser {
    fn predict(&self, batch: &PredictBatch<'_>) -> Result<Vec<LatentGrid>, PredictError> {
        predict_gaussian(batch, &self.means, self.var)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_variance_posterior_is_the_mean() {
        for &a in &[0.001, 0.3, 0.99] {
            for &z in &[-2.0, 0.0, 1.7] {
                assert!((gaussian_posterior_mean(z, 0.4, 0.0, a) - 0.4).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn clean_input_has_zero_noise() {
        let a: f64 = 0.37;
        let eps = gaussian_posterior_eps(a.sqrt() * 0.8, 0.8, 0.0, a);
        assert!(eps.abs() < 1e-6);
    }

    #[test]
    fn unit_variance_zero_mean_is_standard_normal() {
        // x ~ N(0, 1) makes z ~ N(0, 1) and E[x|z] = √ᾱ·z
        let a: f64 = 0.6;
        assert!((gaussian_posterior_mean(1.5, 0.0, 1.0, a) - a.sqrt() * 1.5).abs() < 1e-12);
    }

    #[test]
    fn negative_variance_is_rejected() {
        assert!(AnalyticGaussianDenoiser::new(vec![], -0.1).is_err());
    }
}
