//! Triangle visibility masking in texture space.

use rayon::prelude::*;

use crate::geometry::{GBuffer, Mesh, Vec2};

use super::scatter::PartialTexture;

/// For every texel, the triangles whose UV footprint overlaps the texel
/// square with positive area. Stored in compressed-row form.
#[derive(Debug, Clone, PartialEq)]
pub struct TexelFootprint {
    pub width: usize,
    pub height: usize,
    pub triangle_count: usize,
    offsets: Vec<u32>,
    triangles: Vec<u32>,
}

impl TexelFootprint {
    pub fn build(mesh: &Mesh, width: usize, height: usize) -> Self {
        let mut pairs: Vec<(u32, u32)> = (0..mesh.triangle_count())
            .into_par_iter()
            .flat_map_iter(|tri| {
                let corners = mesh
                    .corner_uvs(tri)
                    .map(|uv| Vec2::new(uv.x * width as f64, (1.0 - uv.y) * height as f64));
                texels_overlapping(corners, width, height)
                    .into_iter()
                    .map(move |t| (t as u32, tri as u32))
            })
            .collect();
        pairs.par_sort_unstable();
        let mut offsets = vec![0u32; width * height + 1];
        for &(t, _) in &pairs {
            offsets[t as usize + 1] += 1;
        }
        for i in 0..width * height {
            offsets[i + 1] += offsets[i];
        }
        Self {
            width,
            height,
            triangle_count: mesh.triangle_count(),
            offsets,
            triangles: pairs.into_iter().map(|(_, tri)| tri).collect(),
        }
    }

    pub fn triangles_at(&self, texel: usize) -> &[u32] {
        &self.triangles[self.offsets[texel] as usize..self.offsets[texel + 1] as usize]
    }

    /// Whether any triangle overlaps the texel.
    pub fn covered(&self, texel: usize) -> bool {
        self.offsets[texel] != self.offsets[texel + 1]
    }

    /// Texels overlapped by at least one triangle in `visible`.
    pub fn texels_of(&self, visible: &[bool]) -> Vec<bool> {
        (0..self.width * self.height)
            .map(|t| self.triangles_at(t).iter().any(|&tri| visible[tri as usize]))
            .collect()
    }
}

/// Texels (in texel-space coordinates, y down) whose unit square overlaps
/// the triangle's interior.
fn texels_overlapping(c: [Vec2; 3], width: usize, height: usize) -> Vec<usize> {
    let min_x = c.iter().map(|p| p.x).fold(f64::INFINITY, f64::min);
    let max_x = c.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max);
    let min_y = c.iter().map(|p| p.y).fold(f64::INFINITY, f64::min);
    let max_y = c.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max);
    let x0 = min_x.floor().max(0.0) as usize;
    let y0 = min_y.floor().max(0.0) as usize;
    let x1 = (max_x.ceil().max(0.0) as usize).min(width);
    let y1 = (max_y.ceil().max(0.0) as usize).min(height);
    let mut out = Vec::new();
    for ty in y0..y1 {
        for tx in x0..x1 {
            if square_overlaps_triangle(tx as f64, ty as f64, &c) {
                out.push(ty * width + tx);
            }
        }
    }
    out
}

/// Separating-axis test between the open unit square at (x, y) and the open
/// triangle; touching shapes do not overlap.
pub(crate) fn square_overlaps_triangle(x: f64, y: f64, tri: &[Vec2; 3]) -> bool {
    let square = [
        Vec2::new(x, y),
        Vec2::new(x + 1.0, y),
        Vec2::new(x + 1.0, y + 1.0),
        Vec2::new(x, y + 1.0),
    ];
    let mut axes = vec![Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)];
    for i in 0..3 {
        let e = tri[(i + 1) % 3] - tri[i];
        axes.push(Vec2::new(-e.y, e.x));
    }
    axes.iter().all(|axis| {
        let (a0, a1) = project(&square, axis);
        let (b0, b1) = project(tri, axis);
        a0.max(b0) < a1.min(b1)
    })
}

fn project(points: &[Vec2], axis: &Vec2) -> (f64, f64) {
    points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
        let d = p.dot(axis);
        (lo.min(d), hi.max(d))
    })
}

/// Per-triangle visibility flags of one view.
pub fn visible_triangle_flags(gbuf: &GBuffer, triangle_count: usize) -> Vec<bool> {
    let mut flags = vec![false; triangle_count];
    for tri in gbuf.tri_id.iter().flatten() {
        flags[*tri as usize] = true;
    }
    flags
}

/// Invalidates filled texels outside the view's visible triangles.
///
/// A texel survives if it was a direct deposit (seed) or if any triangle
/// overlapping it is visible in `gbuf`.
pub fn visibility_mask(filled: &PartialTexture, footprint: &TexelFootprint, gbuf: &GBuffer) -> PartialTexture {
    let visible = visible_triangle_flags(gbuf, footprint.triangle_count);
    let keep: Vec<bool> = (0..filled.valid.len())
        .into_par_iter()
        .map(|t| {
            filled.valid[t]
                && (filled.seed[t] || footprint.triangles_at(t).iter().any(|&tri| visible[tri as usize]))
        })
        .collect();
    let weight = filled
        .weight
        .iter()
        .zip(&keep)
        .map(|(&w, &k)| if k { w } else { 0.0 })
        .collect();
    PartialTexture {
        values: filled.values.clone(),
        weight,
        valid: keep,
        seed: filled.seed.clone(),
        clamped_uv: filled.clamped_uv,
    }
}

/// Convenience form of [`visibility_mask`] that builds the footprint.
pub fn visibility_mask_for_mesh(filled: &PartialTexture, mesh: &Mesh, gbuf: &GBuffer) -> PartialTexture {
    let footprint = TexelFootprint::build(mesh, filled.width(), filled.height());
    visibility_mask(filled, &footprint, gbuf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::fixtures;

    #[test]
    fn sat_touching_is_not_overlap() {
        let tri = [Vec2::new(1.0, 0.0), Vec2::new(3.0, 0.0), Vec2::new(1.0, 2.0)];
        assert!(!square_overlaps_triangle(0.0, 0.0, &tri));
        assert!(square_overlaps_triangle(1.0, 0.0, &tri));
        // square beyond the hypotenuse: corner (2,1) lies on it
        assert!(!square_overlaps_triangle(2.0, 1.0, &tri));
        assert!(square_overlaps_triangle(1.0, 1.0, &tri));
    }

    #[test]
    fn cube_charts_are_disjoint() {
        let cube = fixtures::cube();
        let fp = TexelFootprint::build(&cube, 96, 64);
        for t in 0..96 * 64 {
            let tris = fp.triangles_at(t);
            // both triangles of a face may share a texel, never two faces
            if let (Some(a), Some(b)) = (tris.first(), tris.last()) {
                assert_eq!(a / 2, b / 2, "texel {t} overlaps {tris:?}");
            }
        }
    }
}
