//! Orthonormal subspace bases and the oracle projector `x ↦ QQᵀx`.
//!
//! Basis vectors are stored in the cube's storage layout, so coefficients are
//! plain dot products with [`DataCube::as_slice`].

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Result, SciError};
use crate::math;
use crate::rng;
use crate::tensor::DataCube;

#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceBasis {
    dims: (usize, usize, usize),
    rank: usize,
    // column k occupies [k·len, (k+1)·len)
    columns: Vec<f64>,
}

impl SubspaceBasis {
    /// Orthonormalises `vectors` (modified Gram-Schmidt, two passes).
    pub fn orthonormalize(dims: (usize, usize, usize), vectors: &[Vec<f64>]) -> Result<Self> {
        let len = dims.0 * dims.1 * dims.2;
        let mut columns: Vec<f64> = Vec::with_capacity(len * vectors.len());
        for (k, v) in vectors.iter().enumerate() {
            if v.len() != len {
                return Err(SciError::ShapeMismatch(format!("basis vector {k} has length {}, expected {len}", v.len())));
            }
            let mut w = v.clone();
            for _ in 0..2 {
                for c in 0..k {
                    let q = &columns[c * len..(c + 1) * len];
                    let d = math::dot(q, &w);
                    for (wi, qi) in w.iter_mut().zip(q) {
                        *wi -= d * qi;
                    }
                }
            }
            let n = math::norm2(&w);
            if !(n > 1e-12 * math::norm2(v).max(f64::MIN_POSITIVE)) {
                return Err(SciError::InvalidConfig(format!("basis vector {k} is linearly dependent")));
            }
            columns.extend(w.iter().map(|x| x / n));
        }
        Ok(Self { dims, rank: vectors.len(), columns })
    }

    /// Random `rank`-dimensional subspace from Gaussian vectors.
    pub fn random(dims: (usize, usize, usize), rank: usize, seed: u64) -> Result<Self> {
        let len = dims.0 * dims.1 * dims.2;
        if rank == 0 || rank > len {
            return Err(SciError::InvalidConfig(format!("subspace rank {rank} must be in 1..={len}")));
        }
        let mut r = rng::seeded(seed);
        let vectors: Vec<Vec<f64>> = (0..rank).map(|_| rng::normal_vec(&mut r, len)).collect();
        Self::orthonormalize(dims, &vectors)
    }

    /// The full standard basis (the projector is the identity).
    pub fn full(dims: (usize, usize, usize)) -> Self {
        let len = dims.0 * dims.1 * dims.2;
        let mut columns = alloc::vec![0.0; len * len];
        for k in 0..len {
            columns[k * len + k] = 1.0;
        }
        Self { dims, rank: len, columns }
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn ambient_len(&self) -> usize {
        self.dims.0 * self.dims.1 * self.dims.2
    }

    pub fn column(&self, k: usize) -> &[f64] {
        let len = self.ambient_len();
        &self.columns[k * len..(k + 1) * len]
    }

    /// `Qᵀx`.
    pub fn coefficients(&self, x: &[f64]) -> Vec<f64> {
        (0..self.rank).map(|k| math::dot(self.column(k), x)).collect()
    }

    /// `Qf`.
    pub fn synthesize(&self, f: &[f64]) -> Vec<f64> {
        let mut out = alloc::vec![0.0; self.ambient_len()];
        for (k, &c) in f.iter().enumerate() {
            for (o, q) in out.iter_mut().zip(self.column(k)) {
                *o += c * q;
            }
        }
        out
    }

    /// `QQᵀx`.
    pub fn project(&self, x: &DataCube) -> Result<DataCube> {
        x.ensure_dims(self.dims, "subspace projection")?;
        let (nx, ny, nb) = self.dims;
        DataCube::from_vec(nx, ny, nb, self.synthesize(&self.coefficients(x.as_slice())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::relative_error;

    #[test]
    fn random_basis_is_orthonormal() {
        let q = SubspaceBasis::random((4, 4, 2), 5, 3).unwrap();
        for a in 0..5 {
            for b in 0..5 {
                let d = math::dot(q.column(a), q.column(b));
                let e = if a == b { 1.0 } else { 0.0 };
                assert!((d - e).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn projector_matches_dense_qqt_and_is_idempotent() {
        let dims = (3, 3, 2);
        let q = SubspaceBasis::random(dims, 4, 8).unwrap();
        let mut r = rng::seeded(9);
        let x = DataCube::from_vec(3, 3, 2, rng::normal_vec(&mut r, 18)).unwrap();
        let p = q.project(&x).unwrap();
        // dense P = Σ_k q_k q_kᵀ
        let len = 18;
        let mut dense = alloc::vec![0.0; len];
        for row in 0..len {
            for col in 0..len {
                let pij: f64 = (0..4).map(|k| q.column(k)[row] * q.column(k)[col]).sum();
                dense[row] += pij * x.as_slice()[col];
            }
        }
        assert!(relative_error(p.as_slice(), &dense) <= 1e-12);
        let pp = q.project(&p).unwrap();
        assert!(relative_error(pp.as_slice(), p.as_slice()) <= 1e-10);
    }

    #[test]
    fn dependent_vectors_rejected() {
        let v = alloc::vec![1.0, 2.0];
        assert!(SubspaceBasis::orthonormalize((1, 2, 1), &[v.clone(), v]).is_err());
        assert!(SubspaceBasis::random((1, 2, 1), 3, 0).is_err());
    }
}
