use crate::geometry::GBuffer;
use crate::grid::{GridRole, LatentGrid};

use super::scatter::uv_to_texel;

/// A view rendered from a texture. Pixels with `background[p]` set are
/// not covered by the mesh and hold zeros until composited.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedView {
    pub latent: LatentGrid,
    pub background: Vec<bool>,
}

/// Samples the nearest texel at each covered pixel's UV.
///
/// Bilinear filtering would mix latents across chart seams, so lookups are
/// nearest-texel only, using the same texel mapping as the scatter.
pub fn render_from_texture(texture: &LatentGrid, gbuf: &GBuffer) -> RenderedView {
    let c = texture.channels;
    let mut latent = LatentGrid::zeros(gbuf.width, gbuf.height, c, GridRole::ViewLatent);
    let mut background = vec![true; gbuf.len()];
    for p in (0..gbuf.len()).filter(|&p| gbuf.mask[p]) {
        let (t, _) = uv_to_texel(gbuf.uv[p], texture.width, texture.height);
        latent.texel_mut(p).copy_from_slice(texture.texel(t));
        background[p] = false;
    }
    RenderedView { latent, background }
}
