//! Dense real tensors used throughout the crate.
//!
//! A [`DataCube`] is an `n_x × n_y × B` stack of slices stored slice-major:
//! element `(i, j, b)` lives at `(b·n_x + i)·n_y + j`, i.e. each slice is
//! row-major and the channel index varies slowest. The mathematical vector
//! form `x = [Vec(X_1); ...; Vec(X_B)]` column-stacks each slice; see
//! [`DataCube::vectorize`].

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Deref, DerefMut};

use crate::error::{Result, SciError};
use crate::math;

pub mod sct;

/// A single 2-D frame (measurement, 2-D mask, noise image).
#[derive(Debug, Clone, PartialEq)]
pub struct Frame2D {
    nx: usize,
    ny: usize,
    data: Vec<f64>,
}

impl Frame2D {
    pub fn zeros(nx: usize, ny: usize) -> Self {
        Self { nx, ny, data: vec![0.0; nx * ny] }
    }

    pub fn filled(nx: usize, ny: usize, value: f64) -> Self {
        Self { nx, ny, data: vec![value; nx * ny] }
    }

    /// Wraps row-major `data`.
    pub fn from_vec(nx: usize, ny: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != nx * ny {
            return Err(SciError::ShapeMismatch(format!(
                "frame {}x{} needs {} values, got {}",
                nx,
                ny,
                nx * ny,
                data.len()
            )));
        }
        Ok(Self { nx, ny, data })
    }

    pub fn from_fn(nx: usize, ny: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(nx * ny);
        for i in 0..nx {
            for j in 0..ny {
                data.push(f(i, j));
            }
        }
        Self { nx, ny, data }
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    #[inline]
    pub fn nx(&self) -> usize {
        self.nx
    }

    #[inline]
    pub fn ny(&self) -> usize {
        self.ny
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.ny + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.ny + j] = value;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Column-stacked vector `Vec(Y)`.
    pub fn vectorize(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.data.len());
        for j in 0..self.ny {
            for i in 0..self.nx {
                out.push(self.get(i, j));
            }
        }
        out
    }

    pub fn unvectorize(nx: usize, ny: usize, v: &[f64]) -> Result<Self> {
        if v.len() != nx * ny {
            return Err(SciError::ShapeMismatch(format!(
                "vector of length {} cannot fill a {}x{} frame",
                v.len(),
                nx,
                ny
            )));
        }
        Ok(Self::from_fn(nx, ny, |i, j| v[j * nx + i]))
    }

    pub fn norm(&self) -> f64 {
        math::norm2(&self.data)
    }

    pub fn ensure_dims(&self, dims: (usize, usize), what: &str) -> Result<()> {
        if self.dims() != dims {
            return Err(SciError::ShapeMismatch(format!(
                "{what}: expected {:?}, got {:?}",
                dims,
                self.dims()
            )));
        }
        Ok(())
    }
}

/// An `n_x × n_y × B` stack of slices (video frames or spectral channels).
#[derive(Debug, Clone, PartialEq)]
pub struct DataCube {
    nx: usize,
    ny: usize,
    nb: usize,
    data: Vec<f64>,
}

impl DataCube {
    pub fn zeros(nx: usize, ny: usize, nb: usize) -> Self {
        Self { nx, ny, nb, data: vec![0.0; nx * ny * nb] }
    }

    pub fn filled(nx: usize, ny: usize, nb: usize, value: f64) -> Self {
        Self { nx, ny, nb, data: vec![value; nx * ny * nb] }
    }

    /// Wraps slice-major storage (see the module docs for the layout).
    pub fn from_vec(nx: usize, ny: usize, nb: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != nx * ny * nb {
            return Err(SciError::ShapeMismatch(format!(
                "cube {}x{}x{} needs {} values, got {}",
                nx,
                ny,
                nb,
                nx * ny * nb,
                data.len()
            )));
        }
        Ok(Self { nx, ny, nb, data })
    }

    pub fn from_fn(nx: usize, ny: usize, nb: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(nx * ny * nb);
        for b in 0..nb {
            for i in 0..nx {
                for j in 0..ny {
                    data.push(f(i, j, b));
                }
            }
        }
        Self { nx, ny, nb, data }
    }

    /// Stacks equally sized frames as slices.
    pub fn from_slices(slices: &[Frame2D]) -> Result<Self> {
        let first = slices
            .first()
            .ok_or_else(|| SciError::ShapeMismatch("no slices to stack".into()))?;
        let (nx, ny) = first.dims();
        let mut data = Vec::with_capacity(nx * ny * slices.len());
        for s in slices {
            s.ensure_dims((nx, ny), "slice")?;
            data.extend_from_slice(s.as_slice());
        }
        Ok(Self { nx, ny, nb: slices.len(), data })
    }

    /// `(n_x, n_y, B)`.
    #[inline]
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.nx, self.ny, self.nb)
    }

    #[inline]
    pub fn nx(&self) -> usize {
        self.nx
    }

    #[inline]
    pub fn ny(&self) -> usize {
        self.ny
    }

    /// Number of slices `B`.
    #[inline]
    pub fn bands(&self) -> usize {
        self.nb
    }

    /// Pixels per slice, `n = n_x·n_y`.
    #[inline]
    pub fn pixels(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, b: usize) -> f64 {
        self.data[(b * self.nx + i) * self.ny + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, b: usize, value: f64) {
        self.data[(b * self.nx + i) * self.ny + j] = value;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Storage of slice `b`, row-major.
    pub fn slice_data(&self, b: usize) -> &[f64] {
        let n = self.pixels();
        &self.data[b * n..(b + 1) * n]
    }

    pub fn slice_data_mut(&mut self, b: usize) -> &mut [f64] {
        let n = self.pixels();
        &mut self.data[b * n..(b + 1) * n]
    }

    pub fn slice(&self, b: usize) -> Frame2D {
        Frame2D { nx: self.nx, ny: self.ny, data: self.slice_data(b).to_vec() }
    }

    /// `x = [Vec(X_1); ...; Vec(X_B)]` with column-stacking inside each slice.
    pub fn vectorize(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.data.len());
        for b in 0..self.nb {
            for j in 0..self.ny {
                for i in 0..self.nx {
                    out.push(self.get(i, j, b));
                }
            }
        }
        out
    }

    pub fn unvectorize(nx: usize, ny: usize, nb: usize, v: &[f64]) -> Result<Self> {
        if v.len() != nx * ny * nb {
            return Err(SciError::ShapeMismatch(format!(
                "vector of length {} cannot fill a {}x{}x{} cube",
                v.len(),
                nx,
                ny,
                nb
            )));
        }
        let n = nx * ny;
        Ok(Self::from_fn(nx, ny, nb, |i, j, b| v[b * n + j * nx + i]))
    }

    pub fn norm(&self) -> f64 {
        math::norm2(&self.data)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn distance(&self, other: &DataCube) -> f64 {
        math::dist2(&self.data, &other.data)
    }

    pub fn dot(&self, other: &DataCube) -> f64 {
        math::dot(&self.data, &other.data)
    }

    /// `self + alpha·other`, elementwise.
    pub fn axpy(&self, alpha: f64, other: &DataCube) -> DataCube {
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + alpha * b).collect();
        DataCube { data, ..*self }
    }

    pub fn scaled(&self, alpha: f64) -> DataCube {
        let data = self.data.iter().map(|a| alpha * a).collect();
        DataCube { data, ..*self }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> DataCube {
        let data = self.data.iter().map(|&a| f(a)).collect();
        DataCube { data, ..*self }
    }

    pub fn ensure_dims(&self, dims: (usize, usize, usize), what: &str) -> Result<()> {
        if self.dims() != dims {
            return Err(SciError::ShapeMismatch(format!(
                "{what}: expected {:?}, got {:?}",
                dims,
                self.dims()
            )));
        }
        Ok(())
    }
}

/// Modulation patterns `C`, one slice per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskSet(DataCube);

impl MaskSet {
    pub fn new(masks: DataCube) -> Self {
        Self(masks)
    }

    pub fn into_cube(self) -> DataCube {
        self.0
    }

    pub fn as_cube(&self) -> &DataCube {
        &self.0
    }
}

impl From<DataCube> for MaskSet {
    fn from(c: DataCube) -> Self {
        Self(c)
    }
}

impl Deref for MaskSet {
    type Target = DataCube;
    fn deref(&self) -> &DataCube {
        &self.0
    }
}

impl DerefMut for MaskSet {
    fn deref_mut(&mut self) -> &mut DataCube {
        &mut self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn degenerate_cube_vectorizes_in_slice_order() {
        let c = DataCube::from_vec(1, 1, 2, vec![3.0, -4.0]).unwrap();
        assert_eq!(c.vectorize(), vec![3.0, -4.0]);
    }

    #[test]
    fn vectorize_column_stacks_each_slice() {
        // [[1,2],[3,4]] column-stacked is [1,3,2,4]
        let c = DataCube::from_vec(2, 2, 1, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(c.vectorize(), vec![1.0, 3.0, 2.0, 4.0]);
        let f = Frame2D::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(f.vectorize(), vec![1.0, 3.0, 2.0, 4.0]);
    }

    #[test]
    fn rejects_wrong_length() {
        assert!(matches!(DataCube::from_vec(2, 2, 2, vec![0.0; 7]), Err(SciError::ShapeMismatch(_))));
        assert!(Frame2D::from_vec(3, 1, vec![0.0; 2]).is_err());
    }

    fn cube_strategy() -> impl Strategy<Value = DataCube> {
        (1usize..5, 1usize..5, 1usize..4).prop_flat_map(|(nx, ny, nb)| {
            proptest::collection::vec(-1e3f64..1e3, nx * ny * nb)
                .prop_map(move |d| DataCube::from_vec(nx, ny, nb, d).unwrap())
        })
    }

    proptest! {
        #[test]
        fn vectorize_round_trips(c in cube_strategy()) {
            let (nx, ny, nb) = c.dims();
            let back = DataCube::unvectorize(nx, ny, nb, &c.vectorize()).unwrap();
            prop_assert_eq!(back, c);
        }

        #[test]
        fn vectorize_blocks_match_slices(c in cube_strategy()) {
            let n = c.pixels();
            let v = c.vectorize();
            for b in 0..c.bands() {
                let slice = c.slice(b).vectorize();
                prop_assert_eq!(&v[b * n..(b + 1) * n], slice.as_slice());
            }
        }
    }
}
