//! Screen <-> texture transport: scatter, Voronoi fill, visibility masking,
//! multi-view aggregation and rendering back to views.

mod aggregate;
mod mask;
mod render;
mod scatter;
pub mod voronoi;

use thiserror::Error;

pub use aggregate::{aggregate, Aggregate};
pub use mask::{visibility_mask, visibility_mask_for_mesh, visible_triangle_flags, TexelFootprint};
pub use render::{render_from_texture, RenderedView};
pub use scatter::{scatter_to_uv, uv_to_texel, PartialTexture};
pub use voronoi::voronoi_fill;

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("no seeds to fill from")]
    NoSeeds,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Blending exponent at timestep `t` of `total`: a linear ramp from
/// `start` (at `t = total`) to `end` (at `t = 0`).
pub fn alpha_schedule(t: usize, total: usize, start: f64, end: f64) -> f64 {
    assert!(t <= total, "timestep {t} beyond {total}");
    if total == 0 {
        return end;
    }
    start + (end - start) * (total - t) as f64 / total as f64
}
