//! Seeded noise streams. Every random draw in a run comes from a stream
//! keyed by (seed, purpose, timestep, view), so results do not depend on
//! evaluation order or worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::grid::{GridRole, LatentGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    TextureInit,
    BackgroundColor,
    InitBackground { view: usize },
    StepBackground { t: usize, view: usize },
    AncestralTexture { t: usize },
    AncestralView { t: usize, view: usize },
    Perturbation,
    Target,
}

impl Stream {
    fn id(self) -> u64 {
        let (purpose, t, view) = match self {
            Stream::TextureInit => (1, 0, 0),
            Stream::BackgroundColor => (2, 0, 0),
            Stream::InitBackground { view } => (3, 0, view),
            Stream::StepBackground { t, view } => (4, t, view),
            Stream::AncestralTexture { t } => (5, t, 0),
            Stream::AncestralView { t, view } => (6, t, view),
            Stream::Perturbation => (7, 0, 0),
            Stream::Target => (8, 0, 0),
        };
        (purpose << 56) | ((t as u64 & 0xff_ffff) << 32) | (view as u64 & 0xffff_ffff)
    }
}

pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream.id());
    rng
}

pub fn normal_grid(rng: &mut ChaCha8Rng, width: usize, height: usize, channels: usize, role: GridRole) -> LatentGrid {
    let data = (0..width * height * channels)
        .map(|_| {
            let v: f64 = StandardNormal.sample(rng);
            v as f32
        })
        .collect();
    LatentGrid {
        width,
        height,
        channels,
        role,
        data,
    }
}
