use rayon::prelude::*;

use crate::grid::{GridRole, LatentGrid};

use super::scatter::PartialTexture;
use super::TransportError;

/// Result of cosine-weighted multi-view blending.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub texture: LatentGrid,
    /// Σ weight over views per texel.
    pub total_weight: Vec<f64>,
    /// Partial with the largest weight per texel (lowest index on ties),
    /// `None` where no view contributes.
    pub owner: Vec<Option<u16>>,
}

/// Per texel: `Σ value·weight / (Σ weight + gamma)` over the valid texels of
/// all partials.
///
/// Contributions are sorted by (weight, values) before summation, so the
/// result is bitwise independent of the order of `partials`.
pub fn aggregate(partials: &[PartialTexture], gamma: f64) -> Result<Aggregate, TransportError> {
    let first = partials
        .first()
        .ok_or_else(|| TransportError::Shape("no partial textures to aggregate".into()))?;
    if gamma.is_nan() || gamma <= 0.0 {
        return Err(TransportError::InvalidParameter(format!("gamma {gamma} must be > 0")));
    }
    if let Some(bad) = partials.iter().find(|p| !p.values.same_shape(&first.values)) {
        return Err(TransportError::Shape(format!(
            "partial {}x{}x{} vs {}x{}x{}",
            bad.width(),
            bad.height(),
            bad.values.channels,
            first.width(),
            first.height(),
            first.values.channels
        )));
    }
    let (w, h, c) = (first.width(), first.height(), first.values.channels);
    let mut texture = LatentGrid::zeros(w, h, c, GridRole::LatentTexture);
    let mut total_weight = vec![0.0; w * h];
    let mut owner = vec![None; w * h];

    texture
        .data
        .par_chunks_mut(w * c)
        .zip(total_weight.par_chunks_mut(w))
        .zip(owner.par_chunks_mut(w))
        .enumerate()
        .for_each(|(y, ((row, row_weight), row_owner))| {
            let mut contrib: Vec<(f64, &[f32])> = Vec::with_capacity(partials.len());
            let mut num = vec![0.0f64; c];
            for x in 0..w {
                let t = y * w + x;
                contrib.clear();
                let mut best: Option<(f64, u16)> = None;
                for (v, p) in partials.iter().enumerate() {
                    let wt = p.weight[t];
                    if !p.valid[t] || wt <= 0.0 {
                        continue;
                    }
                    contrib.push((wt, p.values.texel(t)));
                    if best.is_none_or(|(bw, _)| wt > bw) {
                        best = Some((wt, v as u16));
                    }
                }
                contrib.sort_unstable_by(|a, b| {
                    a.0.total_cmp(&b.0).then_with(|| {
                        a.1.iter()
                            .zip(b.1)
                            .map(|(x, y)| x.total_cmp(y))
                            .find(|o| o.is_ne())
                            .unwrap_or(std::cmp::Ordering::Equal)
                    })
                });
                num.fill(0.0);
                let mut den = 0.0;
                for &(wt, vals) in &contrib {
                    for (acc, &v) in num.iter_mut().zip(vals) {
                        *acc += f64::from(v) * wt;
                    }
                    den += wt;
                }
                for (out, acc) in row[x * c..(x + 1) * c].iter_mut().zip(&num) {
                    *out = (acc / (den + gamma)) as f32;
                }
                row_weight[x] = den;
                row_owner[x] = best.map(|(_, v)| v);
            }
        });

    Ok(Aggregate {
        texture,
        total_weight,
        owner,
    })
}
