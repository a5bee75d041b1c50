//! Triangle meshes with a UV atlas, and a Wavefront OBJ reader/writer.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{Vector2, Vector3};
use thiserror::Error;

pub type Vec3 = Vector3<f64>;
pub type Vec2 = Vector2<f64>;

/// UV triangles with twice-area below this are treated as degenerate.
const MIN_UV_AREA: f64 = 1e-14;
const UNIT_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("failed to read mesh: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("mesh lacks UV atlas")]
    MissingUv,
    #[error("line {line}: face has {count} vertices, only triangles are supported")]
    NonTriangle { line: usize, count: usize },
    #[error("triangle {tri}: {kind} index {index} out of range (have {len})")]
    IndexOutOfRange {
        tri: usize,
        kind: &'static str,
        index: usize,
        len: usize,
    },
    #[error("triangle {0} has a degenerate UV footprint")]
    DegenerateUv(usize),
    #[error("normal {0} has zero length")]
    ZeroNormal(usize),
    #[error("mesh has no triangles")]
    Empty,
}

/// A triangle mesh with per-corner UV and normal indices, OBJ style.
///
/// Normals are per-vertex in the usual case (`normal_indices == triangles`)
/// but files may share one normal across a face's corners, so the
/// indirection is kept.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub positions: Vec<Vec3>,
    pub triangles: Vec<[u32; 3]>,
    pub uvs: Vec<Vec2>,
    pub uv_indices: Vec<[u32; 3]>,
    pub normals: Vec<Vec3>,
    pub normal_indices: Vec<[u32; 3]>,
}

impl Mesh {
    /// Builds a mesh and checks every invariant. When `normals` is `None`
    /// per-vertex normals are computed by area-weighted face averaging.
    pub fn new(
        positions: Vec<Vec3>,
        triangles: Vec<[u32; 3]>,
        uvs: Vec<Vec2>,
        uv_indices: Vec<[u32; 3]>,
        normals: Option<(Vec<Vec3>, Vec<[u32; 3]>)>,
    ) -> Result<Self, MeshError> {
        if triangles.is_empty() {
            return Err(MeshError::Empty);
        }
        if uvs.is_empty() || uv_indices.len() != triangles.len() {
            return Err(MeshError::MissingUv);
        }
        check_indices(&triangles, positions.len(), "position")?;
        check_indices(&uv_indices, uvs.len(), "uv")?;
        for (i, tri) in uv_indices.iter().enumerate() {
            let [a, b, c] = tri.map(|k| uvs[k as usize]);
            if cross2(b - a, c - a).abs() < MIN_UV_AREA {
                return Err(MeshError::DegenerateUv(i));
            }
        }
        let (normals, normal_indices) = match normals {
            Some((mut normals, indices)) => {
                if indices.len() != triangles.len() {
                    return Err(MeshError::Parse {
                        line: 0,
                        msg: "normal indices do not match triangle count".into(),
                    });
                }
                check_indices(&indices, normals.len(), "normal")?;
                for (i, n) in normals.iter_mut().enumerate() {
                    let len = n.norm();
                    if len == 0.0 || !len.is_finite() {
                        return Err(MeshError::ZeroNormal(i));
                    }
                    *n /= len;
                }
                (normals, indices)
            }
            None => (vertex_normals(&positions, &triangles), triangles.clone()),
        };
        debug_assert!(normals
            .iter()
            .all(|n| (n.norm() - 1.0).abs() < UNIT_TOLERANCE));
        Ok(Self {
            positions,
            triangles,
            uvs,
            uv_indices,
            normals,
            normal_indices,
        })
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn corners(&self, tri: usize) -> [Vec3; 3] {
        self.triangles[tri].map(|i| self.positions[i as usize])
    }

    pub fn corner_uvs(&self, tri: usize) -> [Vec2; 3] {
        self.uv_indices[tri].map(|i| self.uvs[i as usize])
    }

    pub fn corner_normals(&self, tri: usize) -> [Vec3; 3] {
        self.normal_indices[tri].map(|i| self.normals[i as usize])
    }

    /// Unnormalized geometric normal, oriented by the corner winding.
    pub fn face_normal(&self, tri: usize) -> Vec3 {
        let [a, b, c] = self.corners(tri);
        (b - a).cross(&(c - a))
    }

    /// Radius of the origin-centred sphere enclosing every vertex.
    pub fn bounding_radius(&self) -> f64 {
        self.positions.iter().map(|p| p.norm()).fold(0.0, f64::max)
    }

    /// Serializes to OBJ text that [`parse_obj`] reads back losslessly
    /// (up to float formatting).
    pub fn to_obj(&self) -> String {
        let mut out = String::new();
        for p in &self.positions {
            let _ = writeln!(out, "v {} {} {}", p.x, p.y, p.z);
        }
        for t in &self.uvs {
            let _ = writeln!(out, "vt {} {}", t.x, t.y);
        }
        for n in &self.normals {
            let _ = writeln!(out, "vn {} {} {}", n.x, n.y, n.z);
        }
        for i in 0..self.triangles.len() {
            let (p, t, n) = (self.triangles[i], self.uv_indices[i], self.normal_indices[i]);
            let _ = writeln!(
                out,
                "f {}/{}/{} {}/{}/{} {}/{}/{}",
                p[0] + 1,
                t[0] + 1,
                n[0] + 1,
                p[1] + 1,
                t[1] + 1,
                n[1] + 1,
                p[2] + 1,
                t[2] + 1,
                n[2] + 1
            );
        }
        out
    }
}

fn check_indices(tris: &[[u32; 3]], len: usize, kind: &'static str) -> Result<(), MeshError> {
    for (tri, idx) in tris.iter().enumerate() {
        for &i in idx {
            if i as usize >= len {
                return Err(MeshError::IndexOutOfRange {
                    tri,
                    kind,
                    index: i as usize,
                    len,
                });
            }
        }
    }
    Ok(())
}

pub(crate) fn cross2(a: Vec2, b: Vec2) -> f64 {
    a.x * b.y - a.y * b.x
}

/// Area-weighted average of incident face normals.
pub fn vertex_normals(positions: &[Vec3], triangles: &[[u32; 3]]) -> Vec<Vec3> {
    let mut acc = vec![Vec3::zeros(); positions.len()];
    for tri in triangles {
        let [a, b, c] = tri.map(|i| positions[i as usize]);
        // cross product length is twice the area, so this is area-weighted
        let n = (b - a).cross(&(c - a));
        for &i in tri {
            acc[i as usize] += n;
        }
    }
    acc.into_iter()
        .map(|n| {
            let len = n.norm();
            if len > 0.0 {
                n / len
            } else {
                Vec3::new(0.0, 0.0, 1.0)
            }
        })
        .collect()
}

pub fn load_mesh(path: impl AsRef<Path>) -> Result<Mesh, MeshError> {
    let text = std::fs::read_to_string(path)?;
    parse_obj(&text)
}

/// Parses the subset of OBJ used for textured triangle meshes: `v`, `vt`,
/// `vn` and `f` records with 1-based (or negative relative) indices. Other
/// record types are ignored.
pub fn parse_obj(text: &str) -> Result<Mesh, MeshError> {
    let mut positions = Vec::new();
    let mut uvs = Vec::new();
    let mut normals = Vec::new();
    let mut triangles = Vec::new();
    let mut uv_indices = Vec::new();
    let mut normal_indices = Vec::new();
    let mut any_face_without_uv = false;
    let mut any_face_without_normal = false;

    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        let mut fields = content.split_whitespace();
        let Some(tag) = fields.next() else { continue };
        let rest: Vec<&str> = fields.collect();
        match tag {
            "v" => positions.push(Vec3::from(parse_floats::<3>(&rest, line)?)),
            "vt" => {
                // a third (w) coordinate is allowed and ignored
                let [u, v] = parse_floats::<2>(&rest, line)?;
                uvs.push(Vec2::new(u, v));
            }
            "vn" => normals.push(Vec3::from(parse_floats::<3>(&rest, line)?)),
            "f" => {
                if rest.len() != 3 {
                    return Err(MeshError::NonTriangle {
                        line,
                        count: rest.len(),
                    });
                }
                let mut p = [0u32; 3];
                let mut t = [0u32; 3];
                let mut n = [0u32; 3];
                for (k, corner) in rest.iter().enumerate() {
                    let mut parts = corner.split('/');
                    let pi = parts.next().unwrap_or("");
                    let ti = parts.next().unwrap_or("");
                    let ni = parts.next().unwrap_or("");
                    p[k] = resolve_index(pi, positions.len(), line)?;
                    if ti.is_empty() {
                        any_face_without_uv = true;
                    } else {
                        t[k] = resolve_index(ti, uvs.len(), line)?;
                    }
                    if ni.is_empty() {
                        any_face_without_normal = true;
                    } else {
                        n[k] = resolve_index(ni, normals.len(), line)?;
                    }
                }
                triangles.push(p);
                uv_indices.push(t);
                normal_indices.push(n);
            }
            _ => {}
        }
    }

    if any_face_without_uv || uvs.is_empty() {
        return Err(MeshError::MissingUv);
    }
    let normals = if any_face_without_normal || normals.is_empty() {
        None
    } else {
        Some((normals, normal_indices))
    };
    Mesh::new(positions, triangles, uvs, uv_indices, normals)
}

fn parse_floats<const N: usize>(fields: &[&str], line: usize) -> Result<[f64; N], MeshError> {
    if fields.len() < N {
        return Err(MeshError::Parse {
            line,
            msg: format!("expected {N} numbers, found {}", fields.len()),
        });
    }
    let mut out = [0.0f64; N];
    for (o, f) in out.iter_mut().zip(fields) {
        *o = f.parse().map_err(|_| MeshError::Parse {
            line,
            msg: format!("invalid number {f:?}"),
        })?;
        if !o.is_finite() {
            return Err(MeshError::Parse {
                line,
                msg: format!("non-finite number {f:?}"),
            });
        }
    }
    Ok(out)
}

/// Resolves a 1-based or negative OBJ index against the records seen so far.
fn resolve_index(field: &str, len: usize, line: usize) -> Result<u32, MeshError> {
    let raw: i64 = field.parse().map_err(|_| MeshError::Parse {
        line,
        msg: format!("invalid index {field:?}"),
    })?;
    let idx = match raw {
        0 => None,
        r if r > 0 => Some(r as usize - 1),
        r => (len as i64 + r).try_into().ok(),
    };
    match idx {
        Some(i) if i < len => Ok(i as u32),
        _ => Err(MeshError::Parse {
            line,
            msg: format!("index {raw} out of range (have {len})"),
        }),
    }
}
