//! Sample dumps: CSV point clouds and binary PGM image grids.

use std::fs;
use std::path::Path;

use crate::data::{points_of, write_points_csv};
use crate::error::{Error, Result};
use crate::tensor::DenseTensor;

/// Tile extents for image-shaped samples: the sample extents themselves if
/// there are two of them, otherwise a square of the flattened size.
pub fn tile_extents(sample_extents: &[usize]) -> Option<(usize, usize)> {
    let size: usize = sample_extents.iter().product();
    let nontrivial: Vec<usize> = sample_extents.iter().copied().filter(|&e| e > 1).collect();
    if nontrivial.len() == 2 {
        return Some((nontrivial[0], nontrivial[1]));
    }
    let side = (size as f64).sqrt().round() as usize;
    (side > 1 && side * side == size).then_some((side, side))
}

/// A binary P5 grid of `n` tiles, `ceil(√n)` tiles per row, unused cells
/// black. Tile pixel `(r, c)` of sample `k` is entry `(r, c, k)`, scaled by
/// `round(255·v)` after clamping to `[0, 1]`.
pub fn pgm_grid(samples: &DenseTensor, tile: (usize, usize)) -> Result<Vec<u8>> {
    let (h, w) = tile;
    let n = *samples.dims().last().unwrap_or(&0);
    if samples.order() < 2 || n == 0 || samples.len() != h * w * n {
        return Err(Error::shape(format!(
            "{:?} is not a stack of {h}×{w} images",
            samples.shape()
        )));
    }
    let cols = (n as f64).sqrt().ceil() as usize;
    let rows = n.div_ceil(cols);
    let (width, height) = (cols * w, rows * h);
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    let header = out.len();
    out.resize(header + width * height, 0);
    let data = samples.data();
    for k in 0..n {
        let (tr, tc) = (k / cols, k % cols);
        for r in 0..h {
            for c in 0..w {
                let v = data[r + h * (c + w * k)];
                let px = (255.0 * v.clamp(0.0, 1.0)).round() as u8;
                out[header + (tr * h + r) * width + tc * w + c] = px;
            }
        }
    }
    Ok(out)
}

/// Writes `samples` (trailing sample mode) as CSV when each sample has two
/// entries, otherwise as a PGM grid.
pub fn write_samples(path: &Path, samples: &DenseTensor) -> Result<()> {
    let dims = samples.dims();
    let extents = &dims[..dims.len().saturating_sub(1)];
    let size: usize = extents.iter().product();
    let bytes = if size == 2 {
        let mut buf = Vec::new();
        write_points_csv(&mut buf, &points_of(samples)?)?;
        buf
    } else {
        let tile = tile_extents(extents).ok_or_else(|| {
            Error::Argument(format!("samples of extents {extents:?} are neither points nor images"))
        })?;
        pgm_grid(samples, tile)?
    };
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
