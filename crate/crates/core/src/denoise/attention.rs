//! A one-block, untrained attention denoiser: patch embedding, one head of
//! self-attention with cross-view key/value concatenation, linear head.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::grid::LatentGrid;

use super::pattern::PatternDenoiser;
use super::{Capabilities, NoisePredictor, PredictBatch, PredictError};

/// Randomly initialized parameters. Matrices are row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionWeights {
    pub patch: usize,
    pub dim: usize,
    pub channels: usize,
    /// `dim x (patch² · channels)`.
    pub embed: Vec<f64>,
    /// `dim x dim`.
    pub query: Vec<f64>,
    /// `dim x dim`.
    pub key: Vec<f64>,
    /// `channels x channels`, identity plus a small random part.
    pub head: Vec<f64>,
    /// Scale of the attention correction added to the base estimate.
    pub strength: f64,
}

impl AttentionWeights {
    pub fn random(seed: u64, channels: usize, patch: usize, dim: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let feat = patch * patch * channels;
        let mut draw = |n: usize, std: f64| -> Vec<f64> {
            let normal = Normal::new(0.0, std).expect("positive std");
            (0..n).map(|_| normal.sample(&mut rng)).collect()
        };
        let embed = draw(dim * feat, (1.0 / feat as f64).sqrt());
        let query = draw(dim * dim, (1.0 / dim as f64).sqrt());
        let key = draw(dim * dim, (1.0 / dim as f64).sqrt());
        let mut head = draw(channels * channels, 0.1);
        for c in 0..channels {
            head[c * channels + c] += 1.0;
        }
        Self {
            patch,
            dim,
            channels,
            embed,
            query,
            key,
            head,
            strength: 0.5,
        }
    }
}

/// Per-view token data: queries, keys and values (patch means).
#[derive(Debug, Clone)]
struct Tokens {
    q: Vec<Vec<f64>>,
    k: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

/// Attention of one view's queries over a key set: row-major
/// `rows x keys` softmax weights.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionMatrix {
    pub rows: usize,
    pub keys: usize,
    pub weights: Vec<f64>,
}

impl AttentionMatrix {
    pub fn row(&self, r: usize) -> &[f64] {
        &self.weights[r * self.keys..(r + 1) * self.keys]
    }
}

/// Everything computed for one view at one timestep.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewAttention {
    pub sources: AttentionMatrix,
    /// Present only while the reference term is active.
    pub reference: Option<AttentionMatrix>,
    /// Blended attention output per token, `tokens x channels`.
    pub output: Vec<f64>,
}

/// Result of checking that attention rows are probability vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionReport {
    pub rows: usize,
    pub max_row_error: f64,
    pub min_weight: f64,
    pub passed: bool,
}

pub struct TinyAttentionDenoiser {
    weights: AttentionWeights,
    base: Option<PatternDenoiser>,
}

impl TinyAttentionDenoiser {
    pub fn new(weights_seed: u64, channels: usize) -> Self {
        Self {
            weights: AttentionWeights::random(weights_seed, channels, 8, 16),
            base: None,
        }
    }

    pub fn from_weights(weights: AttentionWeights) -> Self {
        Self { weights, base: None }
    }

    /// Uses the pattern posterior as the base clean estimate instead of
    /// `z / √ᾱ`.
    pub fn with_base(mut self, base: PatternDenoiser) -> Self {
        self.base = Some(base);
        self
    }

    pub fn weights(&self) -> &AttentionWeights {
        &self.weights
    }

    fn base_estimates(&self, batch: &PredictBatch<'_>) -> Result<Vec<LatentGrid>, PredictError> {
        match &self.base {
            Some(p) => p.posterior_means(batch),
            None => {
                let s = batch.alpha_bar.sqrt();
                Ok(batch
                    .latents
                    .iter()
                    .map(|z| {
                        let mut x = z.clone();
                        x.data.iter_mut().for_each(|v| *v = (f64::from(*v) / s) as f32);
                        x
                    })
                    .collect())
            }
        }
    }

    fn check_batch(&self, batch: &PredictBatch<'_>) -> Result<(), PredictError> {
        batch.plan.validate(batch.latents.len())?;
        let p = self.weights.patch;
        for (view, z) in batch.latents.iter().enumerate() {
            if z.channels != self.weights.channels || z.width % p != 0 || z.height % p != 0 {
                return Err(PredictError::View {
                    view,
                    msg: format!(
                        "latent {}x{}x{} incompatible with patch {p} and {} channels",
                        z.width, z.height, z.channels, self.weights.channels
                    ),
                });
            }
        }
        Ok(())
    }

    fn tokens(&self, x: &LatentGrid) -> Tokens {
        let w = &self.weights;
        let (p, c, d) = (w.patch, w.channels, w.dim);
        let (px, py) = (x.width / p, x.height / p);
        let feat_len = p * p * c;
        let mut out = Tokens {
            q: Vec::with_capacity(px * py),
            k: Vec::with_capacity(px * py),
            v: Vec::with_capacity(px * py),
        };
        let mut feat = vec![0.0; feat_len];
        for ty in 0..py {
            for tx in 0..px {
                let mut mean = vec![0.0; c];
                for dy in 0..p {
                    for dx in 0..p {
                        let texel = x.texel((ty * p + dy) * x.width + tx * p + dx);
                        for ch in 0..c {
                            let v = f64::from(texel[ch]);
                            feat[(dy * p + dx) * c + ch] = v;
                            mean[ch] += v;
                        }
                    }
                }
                mean.iter_mut().for_each(|m| *m /= (p * p) as f64);
                let e = matvec(&w.embed, &feat, d);
                out.q.push(matvec(&w.query, &e, d));
                out.k.push(matvec(&w.key, &e, d));
                out.v.push(mean);
            }
        }
        out
    }

    /// Attention for every view of the batch, following the plan's routing.
    pub fn attend(&self, batch: &PredictBatch<'_>) -> Result<Vec<ViewAttention>, PredictError> {
        self.check_batch(batch)?;
        let base = self.base_estimates(batch)?;
        Ok(self.attend_on(batch, &base))
    }

    fn attend_on(&self, batch: &PredictBatch<'_>, base: &[LatentGrid]) -> Vec<ViewAttention> {
        let tokens: Vec<Tokens> = base.par_iter().map(|x| self.tokens(x)).collect();
        let plan = batch.plan;
        let use_ref = plan.reference_active(batch.t);
        (0..tokens.len())
            .into_par_iter()
            .map(|i| {
                let q = &tokens[i].q;
                let keys: Vec<&Vec<f64>> = plan.sources[i].iter().flat_map(|&s| &tokens[s].k).collect();
                let vals: Vec<&Vec<f64>> = plan.sources[i].iter().flat_map(|&s| &tokens[s].v).collect();
                let (sources, mut output) = self.single_head(q, &keys, &vals);
                let reference = use_ref.then(|| {
                    let r = &tokens[plan.reference];
                    let rk: Vec<&Vec<f64>> = r.k.iter().collect();
                    let rv: Vec<&Vec<f64>> = r.v.iter().collect();
                    let (m, ref_out) = self.single_head(q, &rk, &rv);
                    for (o, r) in output.iter_mut().zip(&ref_out) {
                        *o = plan.beta * *o + (1.0 - plan.beta) * r;
                    }
                    m
                });
                ViewAttention {
                    sources,
                    reference,
                    output,
                }
            })
            .collect()
    }

    fn single_head(&self, q: &[Vec<f64>], k: &[&Vec<f64>], v: &[&Vec<f64>]) -> (AttentionMatrix, Vec<f64>) {
        let c = self.weights.channels;
        let scale = 1.0 / (self.weights.dim as f64).sqrt();
        let mut weights = Vec::with_capacity(q.len() * k.len());
        let mut output = vec![0.0; q.len() * c];
        let mut row = vec![0.0; k.len()];
        for (r, qr) in q.iter().enumerate() {
            for (slot, kr) in row.iter_mut().zip(k) {
                *slot = dot(qr, kr) * scale;
            }
            softmax(&mut row);
            for (wt, vr) in row.iter().zip(v) {
                for ch in 0..c {
                    output[r * c + ch] += wt * vr[ch];
                }
            }
            weights.extend_from_slice(&row);
        }
        (
            AttentionMatrix {
                rows: q.len(),
                keys: k.len(),
                weights,
            },
            output,
        )
    }

    /// Verifies that every attention row in the batch is nonnegative and
    /// sums to 1 within 1e-6.
    pub fn attention_rows_stochastic_check(&self, batch: &PredictBatch<'_>) -> Result<AttentionReport, PredictError> {
        let mut report = AttentionReport {
            rows: 0,
            max_row_error: 0.0,
            min_weight: f64::INFINITY,
            passed: true,
        };
        for va in self.attend(batch)? {
            for m in std::iter::once(&va.sources).chain(va.reference.as_ref()) {
                for r in 0..m.rows {
                    let row = m.row(r);
                    let sum: f64 = row.iter().sum();
                    report.rows += 1;
                    report.max_row_error = report.max_row_error.max((sum - 1.0).abs());
                    report.min_weight = row.iter().copied().fold(report.min_weight, f64::min);
                }
            }
        }
        report.passed = report.max_row_error <= 1e-6 && report.min_weight >= 0.0;
        Ok(report)
    }
}

impl NoisePredictor for TinyAttentionDenoiser {
    fn predict(&self, batch: &PredictBatch<'_>) -> Result<Vec<LatentGrid>, PredictError> {
        self.check_batch(batch)?;
        if batch.alpha_bar >= 1.0 {
            return Err(PredictError::InvalidParameter("noise prediction at alpha_bar = 1".into()));
        }
        let base = self.base_estimates(batch)?;
        let attn = self.attend_on(batch, &base);
        let w = &self.weights;
        let (p, c) = (w.patch, w.channels);
        let sa = batch.alpha_bar.sqrt();
        let sn = (1.0 - batch.alpha_bar).sqrt();
        Ok(batch
            .latents
            .par_iter()
            .zip(base.par_iter().zip(attn.par_iter()))
            .map(|(z, (x, va))| {
                let tokens = self.tokens(x);
                let px = z.width / p;
                let mut eps = z.clone();
                for pix in 0..z.pixels() {
                    let tok = (pix / z.width / p) * px + (pix % z.width) / p;
                    let o = &va.output[tok * c..(tok + 1) * c];
                    for ch in 0..c {
                        let head: f64 = (0..c).map(|j| w.head[ch * c + j] * o[j]).sum();
                        let clean = f64::from(x.texel(pix)[ch]) + w.strength * (head - tokens.v[tok][ch]);
                        eps.texel_mut(pix)[ch] = ((f64::from(z.texel(pix)[ch]) - sa * clean) / sn) as f32;
                    }
                }
                eps
            })
            .collect())
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            attention_reuse: true,
            decode: false,
        }
    }
}

fn matvec(m: &[f64], x: &[f64], rows: usize) -> Vec<f64> {
    let cols = x.len();
    (0..rows).map(|r| dot(&m[r * cols..(r + 1) * cols], x)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn softmax(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    row.iter_mut().for_each(|v| *v /= sum);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_of_singleton_is_one() {
        let mut r = [3.7];
        softmax(&mut r);
        assert_eq!(r, [1.0]);
    }

    #[test]
    fn softmax_is_shift_invariant() {
        let mut a = [1.0, 2.0, 3.0];
        let mut b = [1001.0, 1002.0, 1003.0];
        softmax(&mut a);
        softmax(&mut b);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn weights_are_seeded() {
        assert_eq!(AttentionWeights::random(4, 3, 8, 16), AttentionWeights::random(4, 3, 8, 16));
        assert_ne!(AttentionWeights::random(4, 3, 8, 16).embed, AttentionWeights::random(5, 3, 8, 16).embed);
    }
}
