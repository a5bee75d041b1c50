//! Procedural test meshes with hand-made UV atlases.

use std::collections::HashMap;

use super::mesh::{Mesh, Vec2, Vec3};

/// Axis-aligned unit cube centred at the origin: 8 shared positions,
/// 12 triangles, one flat normal per face and one UV chart per face laid
/// out on a 3x2 grid with gutters.
pub fn cube() -> Mesh {
    let faces = [
        Vec3::x(),
        -Vec3::x(),
        Vec3::y(),
        -Vec3::y(),
        Vec3::z(),
        -Vec3::z(),
    ];
    let mut positions: Vec<Vec3> = Vec::new();
    let index_of = |p: Vec3, positions: &mut Vec<Vec3>| -> u32 {
        match positions.iter().position(|q| (q - p).norm() < 1e-12) {
            Some(i) => i as u32,
            None => {
                positions.push(p);
                (positions.len() - 1) as u32
            }
        }
    };
    let margin = 0.04;
    let mut triangles = Vec::new();
    let mut uvs = Vec::new();
    let mut uv_indices = Vec::new();
    let mut normal_indices = Vec::new();
    for (f, n) in faces.iter().enumerate() {
        let t = if n.y.abs() > 0.5 { Vec3::new(0.0, 0.0, -n.y) } else { Vec3::y() };
        let s = t.cross(n);
        let corner = |a: f64, b: f64| n * 0.5 + s * (a - 0.5) + t * (b - 0.5);
        let quad = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)];
        let ids: Vec<u32> = quad
            .iter()
            .map(|&(a, b)| index_of(corner(a, b), &mut positions))
            .collect();
        let (col, row) = ((f % 3) as f64, (f / 3) as f64);
        let uv_base = uvs.len() as u32;
        for &(a, b) in &quad {
            uvs.push(Vec2::new(
                (col + margin + (1.0 - 2.0 * margin) * a) / 3.0,
                (row + margin + (1.0 - 2.0 * margin) * b) / 2.0,
            ));
        }
        for [i, j, k] in [[0usize, 1, 2], [0, 2, 3]] {
            triangles.push([ids[i], ids[j], ids[k]]);
            uv_indices.push([uv_base + i as u32, uv_base + j as u32, uv_base + k as u32]);
            normal_indices.push([f as u32; 3]);
        }
    }
    Mesh::new(
        positions,
        triangles,
        uvs,
        uv_indices,
        Some((faces.to_vec(), normal_indices)),
    )
    .expect("cube fixture is valid")
}

/// Square of side `size` in the z = 0 plane facing +z, UV-mapped to
/// [0.05, 0.95]².
pub fn quad(size: f64) -> Mesh {
    quad_at(size, 0.0, true, [0.05, 0.05, 0.95, 0.95])
}

/// Two parallel quads a small distance apart, facing away from each other.
/// A camera on +z sees only the first, a camera on -z only the second; the
/// charts occupy the left and right halves of the atlas.
pub fn back_to_back_quads() -> Mesh {
    let a = quad_at(1.0, 0.25, true, [0.05, 0.05, 0.45, 0.95]);
    let b = quad_at(1.0, -0.25, false, [0.55, 0.05, 0.95, 0.95]);
    merge(&a, &b)
}

fn quad_at(size: f64, z: f64, facing_pos_z: bool, uv_rect: [f64; 4]) -> Mesh {
    let h = size / 2.0;
    let positions = vec![
        Vec3::new(-h, -h, z),
        Vec3::new(h, -h, z),
        Vec3::new(h, h, z),
        Vec3::new(-h, h, z),
    ];
    let [u0, v0, u1, v1] = uv_rect;
    let uvs = vec![
        Vec2::new(u0, v0),
        Vec2::new(u1, v0),
        Vec2::new(u1, v1),
        Vec2::new(u0, v1),
    ];
    let tris = if facing_pos_z {
        vec![[0, 1, 2], [0, 2, 3]]
    } else {
        vec![[0, 2, 1], [0, 3, 2]]
    };
    Mesh::new(positions, tris.clone(), uvs, tris, None).expect("quad fixture is valid")
}

fn merge(a: &Mesh, b: &Mesh) -> Mesh {
    let off = |t: &[u32; 3], k: usize| t.map(|i| i + k as u32);
    let mut positions = a.positions.clone();
    positions.extend(&b.positions);
    let mut uvs = a.uvs.clone();
    uvs.extend(&b.uvs);
    let mut normals = a.normals.clone();
    normals.extend(&b.normals);
    let cat = |xa: &[[u32; 3]], xb: &[[u32; 3]], k: usize| -> Vec<[u32; 3]> {
        xa.iter().copied().chain(xb.iter().map(|t| off(t, k))).collect()
    };
    Mesh::new(
        positions,
        cat(&a.triangles, &b.triangles, a.positions.len()),
        uvs,
        cat(&a.uv_indices, &b.uv_indices, a.uvs.len()),
        Some((normals, cat(&a.normal_indices, &b.normal_indices, a.normals.len()))),
    )
    .expect("merged fixture is valid")
}

/// Unit icosphere with `subdivisions` midpoint subdivisions
/// (20·4ⁿ triangles) and a per-triangle atlas: two triangles per square
/// cell, every triangle its own chart.
pub fn icosphere(subdivisions: u32) -> Mesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut positions: Vec<Vec3> = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
    .collect();
    let mut faces: Vec<[u32; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut midpoints: HashMap<(u32, u32), u32> = HashMap::new();
        let mut mid = |a: u32, b: u32, positions: &mut Vec<Vec3>| -> u32 {
            let key = (a.min(b), a.max(b));
            *midpoints.entry(key).or_insert_with(|| {
                let p = (positions[a as usize] + positions[b as usize]).normalize();
                positions.push(p);
                (positions.len() - 1) as u32
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = mid(a, b, &mut positions);
            let bc = mid(b, c, &mut positions);
            let ca = mid(c, a, &mut positions);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    for f in &mut faces {
        let [a, b, c] = f.map(|i| positions[i as usize]);
        if (b - a).cross(&(c - a)).dot(&(a + b + c)) < 0.0 {
            f.swap(1, 2);
        }
    }

    let cells = faces.len().div_ceil(2);
    let grid = (cells as f64).sqrt().ceil() as usize;
    let cell = 1.0 / grid as f64;
    let m = 0.1;
    let mut uvs = Vec::with_capacity(faces.len() * 3);
    let mut uv_indices = Vec::with_capacity(faces.len());
    for (i, _) in faces.iter().enumerate() {
        let k = i / 2;
        let (cx, cy) = ((k % grid) as f64, (k / grid) as f64);
        let local = if i % 2 == 0 {
            [(m, m), (1.0 - 2.0 * m, m), (m, 1.0 - 2.0 * m)]
        } else {
            [(1.0 - m, 1.0 - m), (2.0 * m, 1.0 - m), (1.0 - m, 2.0 * m)]
        };
        let base = uvs.len() as u32;
        for (a, b) in local {
            uvs.push(Vec2::new((cx + a) * cell, (cy + b) * cell));
        }
        uv_indices.push([base, base + 1, base + 2]);
    }
    let normals = positions.clone();
    Mesh::new(positions, faces.clone(), uvs, uv_indices, Some((normals, faces)))
        .expect("icosphere fixture is valid")
}
