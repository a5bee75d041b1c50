use crate::geometry::{GBuffer, Vec2};
use crate::grid::{GridRole, LatentGrid};

use super::TransportError;

/// A texture-space projection of one view.
///
/// `weight` is the accumulated θ^α mass per texel. `seed` marks texels that
/// received at least one pixel directly; it survives Voronoi filling so
/// that masking can tell original deposits from propagated ones.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialTexture {
    pub values: LatentGrid,
    pub weight: Vec<f64>,
    pub valid: Vec<bool>,
    pub seed: Vec<bool>,
    /// Pixels whose UV fell outside [0, 1]² and were clamped.
    pub clamped_uv: usize,
}

impl PartialTexture {
    pub fn width(&self) -> usize {
        self.values.width
    }

    pub fn height(&self) -> usize {
        self.values.height
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    /// Checks `weight > 0 => valid` and `!valid => weight == 0`.
    pub fn invariants_hold(&self) -> bool {
        self.weight
            .iter()
            .zip(&self.valid)
            .all(|(&w, &v)| w >= 0.0 && (v || w == 0.0))
    }
}

/// Texel containing `uv`, with texture rows running top-down (v = 1 is row
/// 0). The second value reports whether the UV had to be clamped.
pub fn uv_to_texel(uv: Vec2, width: usize, height: usize) -> (usize, bool) {
    let inside = (0.0..=1.0).contains(&uv.x) && (0.0..=1.0).contains(&uv.y);
    let u = uv.x.clamp(0.0, 1.0);
    let v = uv.y.clamp(0.0, 1.0);
    let tx = ((u * width as f64) as usize).min(width - 1);
    let ty = (((1.0 - v) * height as f64) as usize).min(height - 1);
    (ty * width + tx, !inside)
}

/// Projects a view into a `tex_width x tex_height` texture.
///
/// Each covered pixel deposits its value with weight θ^α into the texel its
/// UV falls in; collisions are weight-averaged (plain average when all the
/// colliding weights are zero). Texels receiving nothing stay invalid.
pub fn scatter_to_uv(
    view: &LatentGrid,
    gbuf: &GBuffer,
    alpha: f64,
    tex_width: usize,
    tex_height: usize,
) -> Result<PartialTexture, TransportError> {
    if view.width != gbuf.width || view.height != gbuf.height {
        return Err(TransportError::Shape(format!(
            "view {}x{} vs gbuffer {}x{}",
            view.width, view.height, gbuf.width, gbuf.height
        )));
    }
    if alpha.is_nan() || alpha < 0.0 {
        return Err(TransportError::InvalidParameter(format!("alpha {alpha} must be >= 0")));
    }
    let c = view.channels;
    let texels = tex_width * tex_height;
    let mut weighted = vec![0.0f64; texels * c];
    let mut plain = vec![0.0f64; texels * c];
    let mut weight = vec![0.0f64; texels];
    let mut count = vec![0u32; texels];
    let mut clamped_uv = 0;

    for p in (0..gbuf.len()).filter(|&p| gbuf.mask[p]) {
        let (t, clamped) = uv_to_texel(gbuf.uv[p], tex_width, tex_height);
        clamped_uv += usize::from(clamped);
        let w = gbuf.theta[p].powf(alpha);
        for (k, &v) in view.texel(p).iter().enumerate() {
            weighted[t * c + k] += f64::from(v) * w;
            plain[t * c + k] += f64::from(v);
        }
        weight[t] += w;
        count[t] += 1;
    }

    let mut values = LatentGrid::zeros(tex_width, tex_height, c, GridRole::LatentTexture);
    for t in (0..texels).filter(|&t| count[t] > 0) {
        let out = values.texel_mut(t);
        for k in 0..c {
            out[k] = if weight[t] > 0.0 {
                (weighted[t * c + k] / weight[t]) as f32
            } else {
                (plain[t * c + k] / f64::from(count[t])) as f32
            };
        }
    }
    let valid: Vec<bool> = count.iter().map(|&n| n > 0).collect();
    Ok(PartialTexture {
        values,
        weight,
        seed: valid.clone(),
        valid,
        clamped_uv,
    })
}
