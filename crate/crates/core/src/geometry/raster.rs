//! Orthographic software rasterizer producing per-view G-buffers.

use super::camera::Camera;
use super::mesh::{Mesh, Vec2, Vec3};

/// Screen-space triangles with |twice-area| below this (in pixels²) are
/// edge-on and produce no coverage.
pub const DEGENERATE_AREA: f64 = 1e-12;

/// Per-pixel rasterization output of one view. Row-major, `y` down.
///
/// Uncovered pixels carry `uv = 0`, `normal = 0`, `theta = 0`,
/// `depth = +inf` and `tri_id = None`.
#[derive(Debug, Clone, PartialEq)]
pub struct GBuffer {
    pub width: usize,
    pub height: usize,
    pub uv: Vec<Vec2>,
    pub normal: Vec<Vec3>,
    pub depth: Vec<f64>,
    pub mask: Vec<bool>,
    pub theta: Vec<f64>,
    pub tri_id: Vec<Option<u32>>,
}

impl GBuffer {
    pub fn empty(width: usize, height: usize) -> Self {
        let n = width * height;
        Self {
            width,
            height,
            uv: vec![Vec2::zeros(); n],
            normal: vec![Vec3::zeros(); n],
            depth: vec![f64::INFINITY; n],
            mask: vec![false; n],
            theta: vec![0.0; n],
            tri_id: vec![None; n],
        }
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn covered(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Sorted, deduplicated set of triangles visible in this view.
    pub fn visible_triangles(&self) -> Vec<u32> {
        let mut ids: Vec<u32> = self.tri_id.iter().flatten().copied().collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }
}

/// Rasterizes `mesh` from `camera` with a nearest-surface depth test.
///
/// One sample per pixel center. Triangles are visited in index order and
/// only a strictly nearer sample replaces the stored one, so exact depth
/// ties resolve to the lower triangle index. Back faces are rasterized
/// (they can occlude) but get `theta = 0`.
pub fn rasterize(mesh: &Mesh, camera: &Camera) -> GBuffer {
    let res = camera.resolution;
    let mut gbuf = GBuffer::empty(res, res);
    let to_camera = -camera.view_dir;

    for tri in 0..mesh.triangle_count() {
        let world = mesh.corners(tri);
        let screen = world.map(|p| camera.project(&p));
        let [a, b, c] = screen;
        let area = edge(a, b, c[0], c[1]);
        if area.abs() <= DEGENERATE_AREA {
            continue;
        }
        let back_facing = mesh.face_normal(tri).dot(&camera.view_dir) >= 0.0;
        let uvs = mesh.corner_uvs(tri);
        let normals = mesh.corner_normals(tri);

        let (x0, x1) = pixel_span(a[0].min(b[0]).min(c[0]), a[0].max(b[0]).max(c[0]), res);
        let (y0, y1) = pixel_span(a[1].min(b[1]).min(c[1]), a[1].max(b[1]).max(c[1]), res);
        for py in y0..y1 {
            let cy = py as f64 + 0.5;
            for px in x0..x1 {
                let cx = px as f64 + 0.5;
                let w0 = edge(b, c, cx, cy) / area;
                let w1 = edge(c, a, cx, cy) / area;
                let w2 = edge(a, b, cx, cy) / area;
                if w0 < 0.0 || w1 < 0.0 || w2 < 0.0 {
                    continue;
                }
                let depth = w0 * a[2] + w1 * b[2] + w2 * c[2];
                let idx = py * res + px;
                if depth >= gbuf.depth[idx] {
                    continue;
                }
                let n = normals[0] * w0 + normals[1] * w1 + normals[2] * w2;
                let n = if n.norm() > 0.0 { n.normalize() } else { n };
                let theta = if back_facing {
                    0.0
                } else {
                    n.dot(&to_camera).clamp(0.0, 1.0)
                };
                gbuf.depth[idx] = depth;
                gbuf.mask[idx] = true;
                gbuf.uv[idx] = uvs[0] * w0 + uvs[1] * w1 + uvs[2] * w2;
                gbuf.normal[idx] = n;
                gbuf.theta[idx] = theta;
                gbuf.tri_id[idx] = Some(tri as u32);
            }
        }
    }
    gbuf
}

/// Twice the signed area of (a, b, p) in screen space.
fn edge(a: [f64; 3], b: [f64; 3], px: f64, py: f64) -> f64 {
    (b[0] - a[0]) * (py - a[1]) - (b[1] - a[1]) * (px - a[0])
}

/// Pixel index range whose centers may fall inside [lo, hi].
fn pixel_span(lo: f64, hi: f64, res: usize) -> (usize, usize) {
    let start = (lo - 0.5).ceil().max(0.0);
    let end = ((hi - 0.5).floor() + 1.0).min(res as f64);
    // NaN bounds fall through to the empty span as well
    if start.is_nan() || end.is_nan() || start >= end {
        return (0, 0);
    }
    (start as usize, end as usize)
}
