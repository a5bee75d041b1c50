//! Nearest-seed assignment on a texel grid.
//!
//! Every texel is assigned the seed minimizing squared Euclidean distance in
//! texel coordinates; among equidistant seeds the one with the lowest linear
//! index (`y * width + x`) wins. [`nearest_seed`] computes this exactly in
//! linear time with a separable lower-envelope transform, [`nearest_seed_brute`]
//! is the quadratic reference and [`jump_flood`] the classic approximate
//! GPU-style variant.

use rayon::prelude::*;

use super::scatter::PartialTexture;
use super::TransportError;

/// Marker for "no seed" in assignment vectors.
pub const NO_SEED: u32 = u32::MAX;

/// Exact nearest seed for every texel.
///
/// Distances and the tie rule are folded into one integer key
/// `d² · N + seed_index` (N = texel count), which is unique per seed, so
/// the separable column/row passes never see ties. Returns `None` when
/// there are no seeds.
pub fn nearest_seed(seeds: &[bool], width: usize, height: usize) -> Option<Vec<u32>> {
    assert_eq!(seeds.len(), width * height);
    if !seeds.iter().any(|&s| s) {
        return None;
    }
    let n = (width * height) as i64;

    // column pass: best key restricted to the texel's own column
    let mut col_key = vec![i64::MAX; width * height];
    let mut last = vec![usize::MAX; width];
    for y in 0..height {
        for x in 0..width {
            if seeds[y * width + x] {
                last[x] = y;
            }
            if last[x] != usize::MAX {
                let dy = (y - last[x]) as i64;
                col_key[y * width + x] = dy * dy * n + (last[x] * width + x) as i64;
            }
        }
    }
    last.fill(usize::MAX);
    for y in (0..height).rev() {
        for x in 0..width {
            if seeds[y * width + x] {
                last[x] = y;
            }
            if last[x] != usize::MAX {
                let dy = (last[x] - y) as i64;
                let key = dy * dy * n + (last[x] * width + x) as i64;
                let slot = &mut col_key[y * width + x];
                *slot = (*slot).min(key);
            }
        }
    }

    // row pass: lower envelope of parabolas n·(x - c)² + col_key(c)
    let mut out = vec![NO_SEED; width * height];
    out.par_chunks_mut(width)
        .zip(col_key.par_chunks(width))
        .for_each_init(
            || (Vec::with_capacity(width), Vec::with_capacity(width)),
            |(hull, starts): &mut (Vec<usize>, Vec<i64>), (row_out, keys)| {
                hull.clear();
                starts.clear();
                for q in (0..width).filter(|&q| keys[q] != i64::MAX) {
                    loop {
                        let Some(&p) = hull.last() else {
                            hull.push(q);
                            starts.push(i64::MIN);
                            break;
                        };
                        let b = takeover(p, keys[p], q, keys[q], n);
                        if b <= *starts.last().unwrap() {
                            hull.pop();
                            starts.pop();
                        } else {
                            hull.push(q);
                            starts.push(b);
                            break;
                        }
                    }
                }
                let mut k = 0;
                for (x, slot) in row_out.iter_mut().enumerate() {
                    while k + 1 < hull.len() && starts[k + 1] <= x as i64 {
                        k += 1;
                    }
                    let c = hull[k];
                    let dx = x as i64 - c as i64;
                    let key = dx * dx * n + keys[c];
                    *slot = (key % n) as u32;
                }
            },
        );
    Some(out)
}

/// First integer x at which column `q`'s parabola undercuts column `p`'s
/// (`p < q`). Keys are unique mod `n`, so the crossing is never exactly on
/// an integer.
fn takeover(p: usize, hp: i64, q: usize, hq: i64, n: i64) -> i64 {
    let (p, q) = (p as i128, q as i128);
    let num = i128::from(hq) - i128::from(hp) + i128::from(n) * (q * q - p * p);
    let den = 2 * i128::from(n) * (q - p);
    (num.div_euclid(den) + 1) as i64
}

/// Reference O(texels · seeds) assignment.
pub fn nearest_seed_brute(seeds: &[bool], width: usize, height: usize) -> Option<Vec<u32>> {
    let sites: Vec<(usize, usize, usize)> = seeds
        .iter()
        .enumerate()
        .filter(|(_, &s)| s)
        .map(|(i, _)| (i % width, i / width, i))
        .collect();
    if sites.is_empty() {
        return None;
    }
    let mut out = Vec::with_capacity(width * height);
    for y in 0..height {
        for x in 0..width {
            let best = sites
                .iter()
                .map(|&(sx, sy, i)| {
                    let dx = sx as i64 - x as i64;
                    let dy = sy as i64 - y as i64;
                    (dx * dx + dy * dy, i)
                })
                .min()
                .unwrap();
            out.push(best.1 as u32);
        }
    }
    Some(out)
}

/// Jump flooding (with a final step-1 refinement pass). Fast and usually
/// right, but not guaranteed to find the true nearest seed.
pub fn jump_flood(seeds: &[bool], width: usize, height: usize) -> Option<Vec<u32>> {
    if !seeds.iter().any(|&s| s) {
        return None;
    }
    let dist = |x: usize, y: usize, s: u32| -> (i64, u32) {
        let (sx, sy) = ((s as usize % width) as i64, (s as usize / width) as i64);
        let (dx, dy) = (sx - x as i64, sy - y as i64);
        (dx * dx + dy * dy, s)
    };
    let mut cur: Vec<u32> = seeds
        .iter()
        .enumerate()
        .map(|(i, &s)| if s { i as u32 } else { NO_SEED })
        .collect();
    let mut steps = Vec::new();
    let mut step = width.max(height).next_power_of_two() / 2;
    while step > 0 {
        steps.push(step);
        step /= 2;
    }
    steps.push(1);
    for step in steps {
        let prev = cur.clone();
        cur.par_chunks_mut(width).enumerate().for_each(|(y, row)| {
            for (x, slot) in row.iter_mut().enumerate() {
                let mut best = (*slot != NO_SEED).then(|| dist(x, y, *slot));
                for oy in [-1i64, 0, 1] {
                    for ox in [-1i64, 0, 1] {
                        let nx = x as i64 + ox * step as i64;
                        let ny = y as i64 + oy * step as i64;
                        if nx < 0 || ny < 0 || nx >= width as i64 || ny >= height as i64 {
                            continue;
                        }
                        let s = prev[ny as usize * width + nx as usize];
                        if s == NO_SEED {
                            continue;
                        }
                        let cand = dist(x, y, s);
                        if best.is_none_or(|b| cand < b) {
                            best = Some(cand);
                        }
                    }
                }
                if let Some((_, s)) = best {
                    *slot = s;
                }
            }
        });
    }
    Some(cur)
}

/// Propagates every valid texel to the texels nearest to it. All texels
/// become valid; `seed` is set to the pre-fill valid set.
pub fn voronoi_fill(partial: &PartialTexture) -> Result<PartialTexture, TransportError> {
    let (w, h) = (partial.width(), partial.height());
    let nearest = nearest_seed(&partial.valid, w, h).ok_or(TransportError::NoSeeds)?;
    Ok(apply_assignment(partial, &nearest))
}

pub(crate) fn apply_assignment(partial: &PartialTexture, nearest: &[u32]) -> PartialTexture {
    let c = partial.values.channels;
    let mut values = partial.values.clone();
    values
        .data
        .par_chunks_mut(c)
        .zip(nearest.par_iter())
        .for_each(|(out, &s)| out.copy_from_slice(partial.values.texel(s as usize)));
    let weight = nearest.iter().map(|&s| partial.weight[s as usize]).collect();
    PartialTexture {
        values,
        weight,
        valid: vec![true; nearest.len()],
        seed: partial.valid.clone(),
        clamped_uv: partial.clamped_uv,
    }
}
