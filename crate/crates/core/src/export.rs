//! Image and raw-float output.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use image::{ImageBuffer, Rgb};
use thiserror::Error;

use crate::grid::{GridError, GridRole, LatentGrid};

#[derive(Debug, Error)]
pub enum ExportError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Image(#[from] image::ImageError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("{0}")]
    Shape(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BitDepth {
    Eight,
    Sixteen,
}

/// Maps [-1, 1] to [0, 1] and clamps. One channel becomes grey; beyond
/// three channels only the first three are shown.
fn display_rgb(grid: &LatentGrid, pixel: usize) -> [f64; 3] {
    let px = grid.texel(pixel);
    let get = |c: usize| {
        let v = if grid.channels == 1 { px[0] } else { px.get(c).copied().unwrap_or(0.0) };
        ((f64::from(v) + 1.0) * 0.5).clamp(0.0, 1.0)
    };
    [get(0), get(1), get(2)]
}

pub fn write_png(grid: &LatentGrid, path: impl AsRef<Path>, depth: BitDepth) -> Result<(), ExportError> {
    if grid.width == 0 || grid.height == 0 {
        return Err(ExportError::Shape("empty image".into()));
    }
    let (w, h) = (grid.width as u32, grid.height as u32);
    match depth {
        BitDepth::Eight => {
            let img = ImageBuffer::from_fn(w, h, |x, y| {
                let c = display_rgb(grid, (y * w + x) as usize);
                Rgb(c.map(|v| (v * 255.0).round() as u8))
            });
            img.save(path)?;
        }
        BitDepth::Sixteen => {
            let img: ImageBuffer<Rgb<u16>, Vec<u16>> = ImageBuffer::from_fn(w, h, |x, y| {
                let c = display_rgb(grid, (y * w + x) as usize);
                Rgb(c.map(|v| (v * 65535.0).round() as u16))
            });
            img.save(path)?;
        }
    }
    Ok(())
}

pub fn write_raw_file(grid: &LatentGrid, path: impl AsRef<Path>) -> Result<(), ExportError> {
    grid.write_raw(BufWriter::new(File::create(path)?))?;
    Ok(())
}

pub fn read_raw_file(path: impl AsRef<Path>, role: GridRole) -> Result<LatentGrid, ExportError> {
    Ok(LatentGrid::read_raw(std::io::BufReader::new(File::open(path)?), role)?)
}

/// Tiles equally sized grids row by row, `columns` per row.
pub fn snapshot_grid(tiles: &[LatentGrid], columns: usize) -> Result<LatentGrid, ExportError> {
    let first = tiles.first().ok_or_else(|| ExportError::Shape("no snapshots".into()))?;
    if tiles.iter().any(|t| !t.same_shape(first)) {
        return Err(ExportError::Shape("snapshots differ in shape".into()));
    }
    let cols = columns.clamp(1, tiles.len());
    let rows = tiles.len().div_ceil(cols);
    let (tw, th, c) = (first.width, first.height, first.channels);
    let mut out = LatentGrid::zeros(tw * cols, th * rows, c, first.role);
    for (i, tile) in tiles.iter().enumerate() {
        let (ox, oy) = ((i % cols) * tw, (i / cols) * th);
        for y in 0..th {
            for x in 0..tw {
                out.texel_mut((oy + y) * out.width + ox + x).copy_from_slice(tile.texel(y * tw + x));
            }
        }
    }
    Ok(out)
}
