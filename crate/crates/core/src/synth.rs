//! Synthetic scenes, mask generators and cropping.

use alloc::format;

use crate::error::{Result, SciError};
use crate::rng;
use crate::tensor::{DataCube, MaskSet};

/// Moving-square video: background 0.2, a 0.9 square drifting two rows and
/// one column per frame.
pub fn moving_square(nx: usize, ny: usize, frames: usize) -> DataCube {
    let side = (nx.min(ny) * 5 / 16).max(1);
    DataCube::from_fn(nx, ny, frames, |i, j, b| {
        let r0 = nx / 8 + 2 * b;
        let c0 = ny * 3 / 16 + b;
        if i >= r0 && i < r0 + side && j >= c0 && j < c0 + side {
            0.9
        } else {
            0.2
        }
    })
}

/// Piecewise-constant spectral scene: vertical blocks whose spectra vary smoothly with the band.
pub fn spectral_blocks(nx: usize, ny: usize, bands: usize) -> DataCube {
    DataCube::from_fn(nx, ny, bands, |i, j, b| {
        let block = (i * 4 / nx.max(1)) * 4 + j * 4 / ny.max(1);
        let t = b as f64 / bands.max(1) as f64;
        let phase = block as f64 * 0.7;
        0.5 + 0.4 * libm::sin(core::f64::consts::TAU * t + phase)
    })
}

/// Binary masks with `P(1) = p`.
pub fn bernoulli_masks(nx: usize, ny: usize, bands: usize, p: f64, seed: u64) -> Result<MaskSet> {
    if !(0.0..=1.0).contains(&p) {
        return Err(SciError::InvalidConfig(format!("bernoulli probability {p} outside [0, 1]")));
    }
    let mut r = rng::seeded(seed);
    Ok(MaskSet::new(DataCube::from_fn(nx, ny, bands, |_, _, _| {
        if rng::bernoulli(&mut r, p) {
            1.0
        } else {
            0.0
        }
    })))
}

/// i.i.d. standard normal masks.
pub fn gaussian_masks(nx: usize, ny: usize, bands: usize, seed: u64) -> MaskSet {
    let mut r = rng::seeded(seed);
    MaskSet::new(DataCube::from_fn(nx, ny, bands, |_, _, _| rng::normal(&mut r)))
}

/// Spatial crop of every band; `offset` and `size` are `(row, col)`.
pub fn crop(cube: &DataCube, offset: (usize, usize), size: (usize, usize)) -> Result<DataCube> {
    let (nx, ny, nb) = cube.dims();
    if offset.0 + size.0 > nx || offset.1 + size.1 > ny {
        return Err(SciError::CropOutOfBounds { offset, size, source_dims: (nx, ny) });
    }
    Ok(DataCube::from_fn(size.0, size.1, nb, |i, j, b| cube.get(offset.0 + i, offset.1 + j, b)))
}
