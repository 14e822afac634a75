//! Hardware encoders.
//!
//! Video SCI: each frame is modulated by its own mask and the modulated frames
//! are summed on the detector, `Y = Σ_b C_b ⊙ X_b + Z`.
//!
//! Spectral SCI (CASSI): every channel of the scene is modulated by the same
//! 2-D coded aperture, then the disperser shifts channel `b` by
//! `shift_step·b` columns before integration. The same measurement is
//! obtained by shearing the scene and using per-channel shifted copies of the
//! aperture, which is how the spectral path is implemented.

use alloc::format;

use crate::error::{Result, SciError};
use crate::rng;
use crate::tensor::{DataCube, Frame2D, MaskSet};

/// Dispersion geometry. Shifts are non-negative: channel `b` moves
/// `shift_step·b` columns to the right.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpectralGeometry {
    pub n_lambda: usize,
    pub shift_step: usize,
}

impl SpectralGeometry {
    pub fn new(n_lambda: usize, shift_step: usize) -> Self {
        Self { n_lambda, shift_step }
    }

    /// Column offset of channel `b`.
    #[inline]
    pub fn shift(&self, b: usize) -> usize {
        self.shift_step * b
    }

    /// Detector width for a scene of width `ny`.
    pub fn sheared_width(&self, ny: usize) -> usize {
        ny + self.n_lambda.saturating_sub(1) * self.shift_step
    }

    /// Scene width recovered from a sheared width.
    pub fn scene_width(&self, sheared: usize) -> Option<usize> {
        sheared.checked_sub(self.n_lambda.saturating_sub(1) * self.shift_step)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum NoiseKind {
    #[default]
    None,
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub sigma: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn gaussian(sigma: f64, seed: u64) -> Result<Self> {
        if !(sigma >= 0.0) {
            return Err(SciError::InvalidConfig(format!("noise sigma must be >= 0, got {sigma}")));
        }
        Ok(Self { kind: NoiseKind::Gaussian, sigma, seed })
    }

    fn apply(&self, y: &mut Frame2D) {
        if self.kind == NoiseKind::Gaussian && self.sigma > 0.0 {
            let mut r = rng::seeded(self.seed);
            for v in y.as_mut_slice() {
                *v += self.sigma * rng::normal(&mut r);
            }
        }
    }
}

/// `Y = Σ_b C_b ⊙ X_b + Z`.
pub fn video_forward(cube: &DataCube, masks: &MaskSet, noise: &NoiseSpec) -> Result<Frame2D> {
    cube.ensure_dims(masks.dims(), "video_forward cube vs masks")?;
    let mut y = Frame2D::zeros(cube.nx(), cube.ny());
    let out = y.as_mut_slice();
    for b in 0..cube.bands() {
        for ((o, &x), &c) in out.iter_mut().zip(cube.slice_data(b)).zip(masks.slice_data(b)) {
            *o += c * x;
        }
    }
    noise.apply(&mut y);
    Ok(y)
}

/// Per-channel copies of the aperture placed at their dispersion offsets.
pub fn build_shifted_masks(mask2d: &Frame2D, geom: &SpectralGeometry) -> MaskSet {
    let (nx, ny) = mask2d.dims();
    let width = geom.sheared_width(ny);
    let mut out = DataCube::zeros(nx, width, geom.n_lambda);
    for b in 0..geom.n_lambda {
        let s = geom.shift(b);
        for i in 0..nx {
            for j in 0..ny {
                out.set(i, j + s, b, mask2d.get(i, j));
            }
        }
    }
    MaskSet::new(out)
}

/// Shifts channel `b` right by `shift_step·b` columns, zero-filling.
pub fn shear(cube: &DataCube, geom: &SpectralGeometry) -> Result<DataCube> {
    let (nx, ny, nb) = cube.dims();
    if nb != geom.n_lambda {
        return Err(SciError::ShapeMismatch(format!(
            "shear: cube has {nb} channels, geometry expects {}",
            geom.n_lambda
        )));
    }
    let mut out = DataCube::zeros(nx, geom.sheared_width(ny), nb);
    for b in 0..nb {
        let s = geom.shift(b);
        for i in 0..nx {
            for j in 0..ny {
                out.set(i, j + s, b, cube.get(i, j, b));
            }
        }
    }
    Ok(out)
}

/// Inverse of [`shear`] on the original support; output width is the scene
/// width implied by the geometry.
pub fn unshear(cube: &DataCube, geom: &SpectralGeometry) -> Result<DataCube> {
    let (nx, wide, nb) = cube.dims();
    if nb != geom.n_lambda {
        return Err(SciError::ShapeMismatch(format!(
            "unshear: cube has {nb} channels, geometry expects {}",
            geom.n_lambda
        )));
    }
    let ny = geom.scene_width(wide).filter(|&w| w > 0).ok_or_else(|| {
        SciError::ShapeMismatch(format!(
            "unshear: width {wide} too small for {} channels at step {}",
            geom.n_lambda, geom.shift_step
        ))
    })?;
    Ok(DataCube::from_fn(nx, ny, nb, |i, j, b| cube.get(i, j + geom.shift(b), b)))
}

/// Modulate by the aperture, shear, integrate.
pub fn spectral_forward(
    cube0: &DataCube,
    mask2d: &Frame2D,
    geom: &SpectralGeometry,
    noise: &NoiseSpec,
) -> Result<Frame2D> {
    cube0.ensure_dims((mask2d.nx(), mask2d.ny(), geom.n_lambda), "spectral_forward scene vs mask")?;
    let sheared = shear(cube0, geom)?;
    let masks = build_shifted_masks(mask2d, geom);
    video_forward(&sheared, &masks, noise)
}
