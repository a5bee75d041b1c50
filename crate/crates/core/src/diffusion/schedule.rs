use serde::{Deserialize, Serialize};

use super::DiffusionError;

/// ᾱ at the last step. Keeps 1/sqrt(ᾱ) small enough that clean estimates
/// recovered from f32 latents stay accurate to ~1e-5.
pub const TERMINAL_ALPHA_BAR: f64 = 1e-3;
/// Offset keeping the first cosine steps from being too small.
const COSINE_OFFSET: f64 = 0.008;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerKind {
    /// DDIM with eta = 0.
    Deterministic,
    /// DDIM with eta = 1: fresh noise is injected every step.
    Ancestral,
}

/// Cumulative signal retention ᾱ_t for t = 0..=T, with ᾱ_0 = 1 and
/// strictly decreasing thereafter.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    alpha_bar: Vec<f64>,
    pub kind: SamplerKind,
}

impl NoiseSchedule {
    /// Squared-cosine ᾱ over `steps` steps, with the cosine's time axis
    /// truncated so that ᾱ_T equals [`TERMINAL_ALPHA_BAR`].
    pub fn cosine(steps: usize, kind: SamplerKind) -> Self {
        assert!(steps > 0, "schedule needs at least one step");
        let f = |u: f64| ((u + COSINE_OFFSET) / (1.0 + COSINE_OFFSET) * std::f64::consts::FRAC_PI_2).cos().powi(2);
        let f0 = f(0.0);
        let u_max = (TERMINAL_ALPHA_BAR * f0).sqrt().acos() / std::f64::consts::FRAC_PI_2 * (1.0 + COSINE_OFFSET)
            - COSINE_OFFSET;
        let alpha_bar = (0..=steps)
            .map(|t| f(u_max * t as f64 / steps as f64) / f0)
            .collect();
        Self { alpha_bar, kind }
    }

    /// Schedule from explicit ᾱ values (index = timestep).
    pub fn from_alpha_bar(alpha_bar: Vec<f64>, kind: SamplerKind) -> Result<Self, DiffusionError> {
        if alpha_bar.len() < 2 || alpha_bar[0] != 1.0 {
            return Err(DiffusionError::Schedule("need at least one step and alpha_bar[0] = 1".into()));
        }
        if alpha_bar.iter().any(|&a| !(a > 0.0 && a <= 1.0)) {
            return Err(DiffusionError::Schedule("alpha_bar values must lie in (0, 1]".into()));
        }
        if alpha_bar.windows(2).any(|w| w[1] >= w[0]) {
            return Err(DiffusionError::Schedule("alpha_bar must be strictly decreasing".into()));
        }
        Ok(Self { alpha_bar, kind })
    }

    pub fn steps(&self) -> usize {
        self.alpha_bar.len() - 1
    }

    pub fn alpha_bar(&self, t: usize) -> f64 {
        self.alpha_bar[t]
    }

    pub fn alpha_bars(&self) -> &[f64] {
        &self.alpha_bar
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_is_monotone_and_bounded() {
        for steps in [1, 2, 10, 50, 1000] {
            let s = NoiseSchedule::cosine(steps, SamplerKind::Deterministic);
            assert_eq!(s.steps(), steps);
            assert_eq!(s.alpha_bar(0), 1.0);
            assert!(s.alpha_bars().windows(2).all(|w| w[1] < w[0]), "T={steps}");
            assert!(s.alpha_bars().iter().all(|&a| a > 0.0 && a <= 1.0));
            assert!((s.alpha_bar(steps) - TERMINAL_ALPHA_BAR).abs() < 1e-12);
        }
        let rebuilt = NoiseSchedule::from_alpha_bar(
            NoiseSchedule::cosine(50, SamplerKind::Deterministic).alpha_bars().to_vec(),
            SamplerKind::Deterministic,
        );
        assert!(rebuilt.is_ok());
    }

    #[test]
    fn invalid_explicit_schedules() {
        let k = SamplerKind::Deterministic;
        assert!(NoiseSchedule::from_alpha_bar(vec![1.0], k).is_err());
        assert!(NoiseSchedule::from_alpha_bar(vec![0.9, 0.5], k).is_err());
        assert!(NoiseSchedule::from_alpha_bar(vec![1.0, 0.5, 0.5], k).is_err());
        assert!(NoiseSchedule::from_alpha_bar(vec![1.0, 0.0], k).is_err());
    }
}
