//! Consistency metrics: cross-view disagreement, seam energy and the
//! front/back colour gap.

use serde::{Deserialize, Serialize};

use crate::bridge::{view_bucket, ViewBucket};
use crate::diffusion::{Phase, StepRecord};
use crate::geometry::{Camera, GBuffer};
use crate::grid::LatentGrid;
use crate::transport::voronoi::nearest_seed;
use crate::transport::{Aggregate, PartialTexture, TexelFootprint};

/// Per-texel population variance across the partials that are valid there,
/// averaged over channels. Texels valid in fewer than two partials get
/// `None`.
pub fn view_variance(partials: &[PartialTexture]) -> Vec<Option<f64>> {
    let Some(first) = partials.first() else {
        return Vec::new();
    };
    let c = first.values.channels;
    (0..first.valid.len())
        .map(|t| {
            let vals: Vec<&[f32]> = partials.iter().filter(|p| p.valid[t]).map(|p| p.values.texel(t)).collect();
            if vals.len() < 2 {
                return None;
            }
            let n = vals.len() as f64;
            let var = (0..c)
                .map(|ch| {
                    let mean = vals.iter().map(|v| f64::from(v[ch])).sum::<f64>() / n;
                    vals.iter().map(|v| (f64::from(v[ch]) - mean).powi(2)).sum::<f64>() / n
                })
                .sum::<f64>()
                / c as f64;
            Some(var)
        })
        .collect()
}

/// D: mean over texels valid in at least two partials of the per-texel
/// standard deviation across views (channel-averaged). Zero when no texel
/// is shared.
pub fn disagreement(partials: &[PartialTexture]) -> f64 {
    let Some(first) = partials.first() else {
        return 0.0;
    };
    let c = first.values.channels;
    let mut sum = 0.0;
    let mut count = 0usize;
    for t in 0..first.valid.len() {
        let vals: Vec<&[f32]> = partials.iter().filter(|p| p.valid[t]).map(|p| p.values.texel(t)).collect();
        if vals.len() < 2 {
            continue;
        }
        let n = vals.len() as f64;
        let mut std = 0.0;
        for ch in 0..c {
            let mean = vals.iter().map(|v| f64::from(v[ch])).sum::<f64>() / n;
            std += (vals.iter().map(|v| (f64::from(v[ch]) - mean).powi(2)).sum::<f64>() / n).sqrt();
        }
        sum += std / c as f64;
        count += 1;
    }
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

/// D(t) for every recorded step, in step order.
pub fn disagreement_curve(records: &[StepRecord]) -> Vec<(usize, f64)> {
    records.iter().map(|r| (r.t, r.disagreement)).collect()
}

/// Propagates the baked texels (total weight > 0) and their owners to every
/// texel by nearest-seed fill. Returns `None` when nothing was baked.
pub fn densify(bake: &Aggregate) -> Option<(LatentGrid, Vec<Option<u16>>)> {
    let tex = &bake.texture;
    let seeds: Vec<bool> = bake.total_weight.iter().map(|&w| w > 0.0).collect();
    let nearest = nearest_seed(&seeds, tex.width, tex.height)?;
    let mut values = tex.clone();
    for (t, &s) in nearest.iter().enumerate() {
        values.texel_mut(t).copy_from_slice(tex.texel(s as usize));
    }
    let owner = nearest.iter().map(|&s| bake.owner[s as usize]).collect();
    Some((values, owner))
}

/// Ratio of the mean absolute difference across adjacent texel pairs with
/// different owners to that across pairs with the same owner.
///
/// Only pairs where both texels are owned (and inside `region`, when
/// given) count. A small epsilon keeps featureless textures at 1.0. Returns
/// `None` when no pair crosses an ownership boundary.
pub fn seam_energy(texture: &LatentGrid, owner: &[Option<u16>], region: Option<&[bool]>) -> Option<f64> {
    const EPS: f64 = 1e-12;
    let (w, h, c) = (texture.width, texture.height, texture.channels);
    let inside = |t: usize| owner[t].is_some() && region.is_none_or(|r| r[t]);
    let diff = |a: usize, b: usize| {
        texture
            .texel(a)
            .iter()
            .zip(texture.texel(b))
            .map(|(x, y)| f64::from((x - y).abs()))
            .sum::<f64>()
            / c as f64
    };
    let (mut cross, mut n_cross, mut same, mut n_same) = (0.0, 0usize, 0.0, 0usize);
    for y in 0..h {
        for x in 0..w {
            let a = y * w + x;
            if !inside(a) {
                continue;
            }
            let right = (x + 1 < w).then(|| a + 1);
            let down = (y + 1 < h).then(|| a + w);
            for b in [right, down].into_iter().flatten().filter(|&b| inside(b)) {
                if owner[a] == owner[b] {
                    same += diff(a, b);
                    n_same += 1;
                } else {
                    cross += diff(a, b);
                    n_cross += 1;
                }
            }
        }
    }
    if n_cross == 0 {
        return None;
    }
    let same_mean = if n_same == 0 { 0.0 } else { same / n_same as f64 };
    Some((cross / n_cross as f64 + EPS) / (same_mean + EPS))
}

/// Seam energy of a final bake, densified and restricted to texels inside
/// the UV atlas.
pub fn bake_seam_energy(bake: &Aggregate, footprint: &TexelFootprint) -> Option<f64> {
    let (values, owner) = densify(bake)?;
    let region: Vec<bool> = (0..owner.len()).map(|t| footprint.covered(t)).collect();
    seam_energy(&values, &owner, Some(&region))
}

/// Channel-averaged absolute difference between the mean covered-pixel
/// colour of front-facing views and that of back-facing views.
pub fn front_back_gap(views: &[LatentGrid], gbufs: &[GBuffer], cameras: &[Camera]) -> Option<f64> {
    let c = views.first()?.channels;
    let mean_of = |bucket: ViewBucket| -> Option<Vec<f64>> {
        let mut acc = vec![0.0; c];
        let mut n = 0usize;
        for ((v, g), cam) in views.iter().zip(gbufs).zip(cameras) {
            if view_bucket(cam) != bucket {
                continue;
            }
            for p in (0..g.len()).filter(|&p| g.mask[p]) {
                for (a, &x) in acc.iter_mut().zip(v.texel(p)) {
                    *a += f64::from(x);
                }
                n += 1;
            }
        }
        (n > 0).then(|| acc.into_iter().map(|a| a / n as f64).collect())
    };
    let front = mean_of(ViewBucket::Front)?;
    let back = mean_of(ViewBucket::Back)?;
    Some(front.iter().zip(&back).map(|(f, b)| (f - b).abs()).sum::<f64>() / c as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub t: usize,
    pub phase: Phase,
    pub disagreement: f64,
}

/// Run summary written next to the texture. Contains only quantities that
/// are a deterministic function of (config, seed).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub curve: Vec<CurvePoint>,
    pub final_disagreement: f64,
    pub seam_energy: Option<f64>,
    /// Mean of the per-texel view-variance map over shared texels.
    pub mean_view_variance: Option<f64>,
    /// Texels seen by at least two views at the final bake.
    pub shared_texels: usize,
    pub front_back_gap: Option<f64>,
}

impl ConsistencyReport {
    pub fn all_finite(&self) -> bool {
        self.curve.iter().all(|p| p.disagreement.is_finite())
            && self.final_disagreement.is_finite()
            && self.seam_energy.is_none_or(f64::is_finite)
            && self.mean_view_variance.is_none_or(f64::is_finite)
            && self.front_back_gap.is_none_or(f64::is_finite)
    }

    pub fn to_text(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridRole;

    fn partial(values: Vec<f32>, valid: Vec<bool>, w: usize) -> PartialTexture {
        let h = valid.len() / w;
        PartialTexture {
            values: LatentGrid::from_vec(w, h, 1, GridRole::LatentTexture, values).unwrap(),
            weight: valid.iter().map(|&v| if v { 1.0 } else { 0.0 }).collect(),
            seed: valid.clone(),
            valid,
            clamped_uv: 0,
        }
    }

    #[test]
    fn identical_views_have_zero_disagreement() {
        let p = partial(vec![1.0, 2.0, 3.0, 4.0], vec![true; 4], 2);
        assert_eq!(disagreement(&[p.clone(), p.clone(), p]), 0.0);
    }

    #[test]
    fn two_view_band() {
        // view A covers columns 0..3, view B columns 2..5 of a 5-wide strip,
        // B offset by c: shared band columns 2,3 each have std c/2
        let w = 5;
        let c = 0.6f32;
        let a = partial(vec![0.0; 5], vec![true, true, true, true, false], w);
        let b = partial(vec![c; 5], vec![false, false, true, true, true], w);
        let d = disagreement(&[a.clone(), b.clone()]);
        assert!((d - f64::from(c) / 2.0).abs() < 1e-7);
        let var = view_variance(&[a, b]);
        assert_eq!(var[0], None);
        assert!((var[2].unwrap() - f64::from(c * c) / 4.0).abs() < 1e-7);
    }

    #[test]
    fn constant_texture_seam_is_one() {
        let tex = LatentGrid::filled(4, 4, 3, GridRole::Rgb, 0.5);
        let owner: Vec<Option<u16>> = (0..16).map(|t| Some(u16::from(t % 4 >= 2))).collect();
        assert_eq!(seam_energy(&tex, &owner, None), Some(1.0));
    }

    #[test]
    fn step_on_boundary_is_a_seam() {
        let w = 8;
        let mut data = Vec::new();
        let mut owner = Vec::new();
        for _y in 0..w {
            for x in 0..w {
                // gentle ramp plus a jump of 1 at the owner boundary
                data.push(x as f32 * 0.01 + if x >= 4 { 1.0 } else { 0.0 });
                owner.push(Some(u16::from(x >= 4)));
            }
        }
        let tex = LatentGrid::from_vec(w, w, 1, GridRole::Rgb, data).unwrap();
        let e = seam_energy(&tex, &owner, None).unwrap();
        assert!(e > 50.0, "{e}");
    }

    #[test]
    fn single_owner_is_not_applicable() {
        let tex = LatentGrid::filled(3, 3, 1, GridRole::Rgb, 0.0);
        assert_eq!(seam_energy(&tex, &[Some(2); 9], None), None);
    }

    #[test]
    fn report_round_trips() {
        let r = ConsistencyReport {
            curve: vec![CurvePoint {
                t: 3,
                phase: Phase::TextureSync,
                disagreement: 0.25,
            }],
            final_disagreement: 0.1,
            seam_energy: None,
            mean_view_variance: Some(0.01),
            shared_texels: 12,
            front_back_gap: None,
        };
        assert!(r.all_finite());
        let back: ConsistencyReport = serde_json::from_str(&r.to_text()).unwrap();
        assert_eq!(back, r);
    }
}
