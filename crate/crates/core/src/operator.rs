//! The SCI sensing operator `H = [D_1, ..., D_B]`.
//!
//! Each `D_b` is diagonal, so `H` never needs to be materialised: the forward
//! map sums masked slices, the adjoint replicates a frame through every mask,
//! and `R = HHᵀ` is the per-pixel sum of squared mask values. Everything here
//! is O(nB).

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Result, SciError};
use crate::math;
use crate::rng;
use crate::tensor::{DataCube, Frame2D, MaskSet};
use crate::verify::DenseMatrix;

/// Relative floor applied to `diag(HHᵀ)`.
pub const R_FLOOR_RELATIVE: f64 = 1e-12;

/// Largest `rows × cols` accepted by [`SciOperator::build_dense`].
pub const DENSE_GUARD: usize = 1_000_000;

/// How far the GAP projection moves along the measurement residual.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ProjectionScale {
    /// Euclidean projection onto `{x : Hx = y}`.
    #[default]
    Unit,
    /// Residual step multiplied by `B`, for i.i.d. Gaussian masks.
    Bands,
}

impl ProjectionScale {
    pub fn factor(self, bands: usize) -> f64 {
        match self {
            ProjectionScale::Unit => 1.0,
            ProjectionScale::Bands => bands as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SciOperator {
    masks: MaskSet,
    r_raw: Vec<f64>,
    r_diag: Vec<f64>,
    floored: Vec<bool>,
    r_floor: f64,
}

impl SciOperator {
    /// Builds the operator with the default floor `1e-12·max(R)`.
    pub fn new(masks: MaskSet) -> Self {
        let raw = raw_r(&masks);
        let max = raw.iter().cloned().fold(0.0_f64, f64::max);
        let floor = if max > 0.0 { R_FLOOR_RELATIVE * max } else { R_FLOOR_RELATIVE };
        Self::assemble(masks, raw, floor)
    }

    pub fn with_floor(masks: MaskSet, r_floor: f64) -> Result<Self> {
        if !(r_floor > 0.0) {
            return Err(SciError::InvalidConfig(format!("r_floor must be positive, got {r_floor}")));
        }
        let raw = raw_r(&masks);
        Ok(Self::assemble(masks, raw, r_floor))
    }

    fn assemble(masks: MaskSet, r_raw: Vec<f64>, r_floor: f64) -> Self {
        let floored = r_raw.iter().map(|&r| r < r_floor).collect();
        let r_diag = r_raw.iter().map(|&r| r.max(r_floor)).collect();
        Self { masks, r_raw, r_diag, floored, r_floor }
    }

    pub fn masks(&self) -> &MaskSet {
        &self.masks
    }

    /// Cube dims `(n_x, n_y, B)` the operator acts on.
    pub fn dims(&self) -> (usize, usize, usize) {
        self.masks.dims()
    }

    pub fn frame_dims(&self) -> (usize, usize) {
        (self.masks.nx(), self.masks.ny())
    }

    pub fn bands(&self) -> usize {
        self.masks.bands()
    }

    pub fn pixels(&self) -> usize {
        self.masks.pixels()
    }

    pub fn r_floor(&self) -> f64 {
        self.r_floor
    }

    /// Per-pixel flag, row-major: `true` where `R` was raised to the floor.
    pub fn floored_pixels(&self) -> &[bool] {
        &self.floored
    }

    /// `Hx` (noiseless forward map).
    pub fn apply_h(&self, x: &DataCube) -> Result<Frame2D> {
        x.ensure_dims(self.dims(), "apply_H")?;
        let (nx, ny) = self.frame_dims();
        let mut y = Frame2D::zeros(nx, ny);
        let out = y.as_mut_slice();
        for b in 0..self.bands() {
            for ((o, &v), &c) in out.iter_mut().zip(x.slice_data(b)).zip(self.masks.slice_data(b)) {
                *o += c * v;
            }
        }
        Ok(y)
    }

    /// `Hᵀy`: slice `b` is `C_b ⊙ Y`.
    pub fn apply_ht(&self, y: &Frame2D) -> Result<DataCube> {
        y.ensure_dims(self.frame_dims(), "apply_Ht")?;
        let (nx, ny, nb) = self.dims();
        let mut out = DataCube::zeros(nx, ny, nb);
        for b in 0..nb {
            for ((o, &c), &v) in out.slice_data_mut(b).iter_mut().zip(self.masks.slice_data(b)).zip(y.as_slice()) {
                *o = c * v;
            }
        }
        Ok(out)
    }

    /// `diag(HHᵀ)` after flooring.
    pub fn r_diagonal(&self) -> Frame2D {
        let (nx, ny) = self.frame_dims();
        Frame2D::from_vec(nx, ny, self.r_diag.clone()).expect("r_diag has one entry per pixel")
    }

    /// `x = v + s·HᵀR⁻¹(y − Hv)`.
    pub fn project_to_manifold(&self, v: &DataCube, y: &Frame2D, scale: f64) -> Result<DataCube> {
        let hv = self.apply_h(v)?;
        y.ensure_dims(self.frame_dims(), "project_to_manifold measurement")?;
        let weights: Vec<f64> = y
            .as_slice()
            .iter()
            .zip(hv.as_slice())
            .zip(&self.r_diag)
            .map(|((&yi, &hvi), &r)| scale * (yi - hvi) / r)
            .collect();
        let mut x = v.clone();
        for b in 0..self.bands() {
            for ((o, &c), &w) in x.slice_data_mut(b).iter_mut().zip(self.masks.slice_data(b)).zip(&weights) {
                *o += c * w;
            }
        }
        Ok(x)
    }

    /// Closed-form ADMM x-step: the solution of `(HᵀH + γI)x = Hᵀy + γ(v+u)`.
    ///
    /// With `w = v + u` the solution is `w + Hᵀ(γI + HHᵀ)⁻¹(y − Hw)`, which is the
    /// matrix-inversion-lemma form `(I − Hᵀ(γI + HHᵀ)⁻¹H)/γ` applied to the
    /// right-hand side, rearranged so that small `γ` does not cancel.
    pub fn admm_x_update(&self, y: &Frame2D, v: &DataCube, u: &DataCube, gamma: f64) -> Result<DataCube> {
        if !(gamma > 0.0) {
            return Err(SciError::NonPositiveGamma(gamma));
        }
        v.ensure_dims(self.dims(), "admm_x_update v")?;
        u.ensure_dims(self.dims(), "admm_x_update u")?;
        y.ensure_dims(self.frame_dims(), "admm_x_update measurement")?;
        let w = v.axpy(1.0, u);
        let hw = self.apply_h(&w)?;
        let weights: Vec<f64> = y
            .as_slice()
            .iter()
            .zip(hw.as_slice())
            .zip(&self.r_raw)
            .map(|((&yi, &hwi), &r)| (yi - hwi) / (gamma + r))
            .collect();
        let mut x = w;
        for b in 0..self.bands() {
            for ((o, &c), &wt) in x.slice_data_mut(b).iter_mut().zip(self.masks.slice_data(b)).zip(&weights) {
                *o += c * wt;
            }
        }
        Ok(x)
    }

    /// Explicit `n × nB` matrix in vectorized (column-stacked) coordinates.
    pub fn build_dense(&self) -> Result<DenseMatrix> {
        let n = self.pixels();
        let nb = self.bands();
        let (rows, cols) = (n, n * nb);
        if rows.saturating_mul(cols) > DENSE_GUARD {
            return Err(SciError::TooLarge { rows, cols });
        }
        let (nx, _) = self.frame_dims();
        let mut h = DenseMatrix::zeros(rows, cols);
        for b in 0..nb {
            let slice = self.masks.slice(b);
            for (row, value) in slice.vectorize().into_iter().enumerate() {
                debug_assert_eq!(slice.get(row % nx, row / nx), value);
                h.set(row, b * n + row, value);
            }
        }
        Ok(h)
    }

    /// `x ↦ HᵀR⁻¹Hx`.
    pub fn apply_gram_normalized(&self, x: &DataCube) -> Result<DataCube> {
        let hx = self.apply_h(x)?;
        let (nx, ny) = self.frame_dims();
        let q: Vec<f64> = hx.as_slice().iter().zip(&self.r_diag).map(|(v, r)| v / r).collect();
        self.apply_ht(&Frame2D::from_vec(nx, ny, q)?)
    }

    /// Power-iteration estimate of `σ_max(HᵀR⁻¹H)`, returned as the final
    /// Rayleigh quotient.
    pub fn operator_norm(&self) -> f64 {
        self.operator_norm_with(200, 0x5EED)
    }

    pub fn operator_norm_with(&self, max_iters: usize, seed: u64) -> f64 {
        let (nx, ny, nb) = self.dims();
        let mut r = rng::seeded(seed);
        let mut x = DataCube::from_vec(nx, ny, nb, rng::normal_vec(&mut r, nx * ny * nb))
            .expect("length matches dims");
        let norm = x.norm();
        if norm == 0.0 {
            return 0.0;
        }
        x = x.scaled(1.0 / norm);
        let mut estimate = 0.0;
        for _ in 0..max_iters {
            let ax = self.apply_gram_normalized(&x).expect("dims match by construction");
            let rq = x.dot(&ax);
            let an = ax.norm();
            if an == 0.0 {
                return 0.0;
            }
            let converged = (rq - estimate).abs() <= 1e-15 * rq.abs().max(1.0);
            estimate = rq;
            x = ax.scaled(1.0 / an);
            if converged {
                break;
            }
        }
        estimate
    }
}

fn raw_r(masks: &MaskSet) -> Vec<f64> {
    let mut r = alloc::vec![0.0; masks.pixels()];
    for b in 0..masks.bands() {
        for (acc, &c) in r.iter_mut().zip(masks.slice_data(b)) {
            *acc += c * c;
        }
    }
    r
}

/// Relative Euclidean error `‖a − b‖ / ‖b‖` (absolute when `b = 0`).
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let den = math::norm2(b);
    let num = math::dist2(a, b);
    if den == 0.0 {
        num
    } else {
        num / den
    }
}
