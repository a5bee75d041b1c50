//! Multi-channel float images: view latents, latent textures and RGB.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Magic bytes of the raw float dump format.
pub const RAW_MAGIC: [u8; 4] = *b"MVTL";

#[derive(Debug, Error)]
pub enum GridError {
    #[error("grid shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite value at element {0}")]
    NonFinite(usize),
    #[error("raw dump: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GridRole {
    ViewLatent,
    LatentTexture,
    Rgb,
}

/// A `height x width x channels` image stored pixel-interleaved.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentGrid {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub role: GridRole,
    pub data: Vec<f32>,
}

impl LatentGrid {
    pub fn zeros(width: usize, height: usize, channels: usize, role: GridRole) -> Self {
        Self::filled(width, height, channels, role, 0.0)
    }

    pub fn filled(width: usize, height: usize, channels: usize, role: GridRole, value: f32) -> Self {
        Self {
            width,
            height,
            channels,
            role,
            data: vec![value; width * height * channels],
        }
    }

    pub fn from_vec(
        width: usize,
        height: usize,
        channels: usize,
        role: GridRole,
        data: Vec<f32>,
    ) -> Result<Self, GridError> {
        if data.len() != width * height * channels {
            return Err(GridError::Shape(format!(
                "{} values for {width}x{height}x{channels}",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            role,
            data,
        })
    }

    pub fn pixels(&self) -> usize {
        self.width * self.height
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    pub fn texel(&self, index: usize) -> &[f32] {
        &self.data[index * self.channels..(index + 1) * self.channels]
    }

    pub fn texel_mut(&mut self, index: usize) -> &mut [f32] {
        &mut self.data[index * self.channels..(index + 1) * self.channels]
    }

    pub fn with_role(mut self, role: GridRole) -> Self {
        self.role = role;
        self
    }

    /// First non-finite element, if any.
    pub fn check_finite(&self) -> Result<(), GridError> {
        match self.data.iter().position(|v| !v.is_finite()) {
            Some(i) => Err(GridError::NonFinite(i)),
            None => Ok(()),
        }
    }

    /// Writes the raw dump: magic, then width, height and channels as
    /// little-endian u32, then the data as little-endian f32.
    pub fn write_raw<W: Write>(&self, mut w: W) -> Result<(), GridError> {
        w.write_all(&RAW_MAGIC)?;
        for dim in [self.width, self.height, self.channels] {
            let dim = u32::try_from(dim).map_err(|_| GridError::Format("dimension exceeds u32".into()))?;
            w.write_all(&dim.to_le_bytes())?;
        }
        let mut buf = Vec::with_capacity(self.data.len() * 4);
        for v in &self.data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_raw<R: Read>(mut r: R, role: GridRole) -> Result<Self, GridError> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if magic != RAW_MAGIC {
            return Err(GridError::Format(format!("bad magic {magic:?}")));
        }
        let mut dims = [0usize; 3];
        for d in &mut dims {
            let mut b = [0u8; 4];
            r.read_exact(&mut b)?;
            *d = u32::from_le_bytes(b) as usize;
        }
        let [width, height, channels] = dims;
        let len = width
            .checked_mul(height)
            .and_then(|n| n.checked_mul(channels))
            .ok_or_else(|| GridError::Format("dimensions overflow".into()))?;
        let mut bytes = vec![0u8; len * 4];
        r.read_exact(&mut bytes)?;
        let data = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        Self::from_vec(width, height, channels, role, data)
    }

    /// Mean squared difference over the texels selected by `mask`
    /// (all channels). `None` when nothing is selected.
    pub fn masked_mse(&self, other: &Self, mask: &[bool]) -> Option<f64> {
        assert!(self.same_shape(other));
        let mut sum = 0.0;
        let mut n = 0usize;
        for (i, _) in mask.iter().enumerate().filter(|(_, &m)| m) {
            for (a, b) in self.texel(i).iter().zip(other.texel(i)) {
                let d = f64::from(*a) - f64::from(*b);
                sum += d * d;
                n += 1;
            }
        }
        (n > 0).then(|| sum / n as f64)
    }
}
