//! Numerical verification helpers.
//!
//! [`DenseMatrix`] and its LU solver are deliberately naive: they are the
//! independent route the structured operator is checked against, and they
//! never touch the pixelwise code paths.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::Result;
use crate::math;
use crate::operator::{relative_error, SciOperator};
use crate::rng;
use crate::tensor::{DataCube, Frame2D};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.set(c, r, self.get(r, c));
            }
        }
        t
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "matvec dimension");
        (0..self.rows).map(|r| math::dot(self.row(r), x)).collect()
    }

    pub fn matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.cols, other.rows, "matmul dimension");
        let mut out = Self::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(r, k);
                if a == 0.0 {
                    continue;
                }
                for c in 0..other.cols {
                    out.data[r * other.cols + c] += a * other.get(k, c);
                }
            }
        }
        out
    }

    pub fn add_scaled_identity(&self, gamma: f64) -> DenseMatrix {
        let mut out = self.clone();
        for i in 0..self.rows.min(self.cols) {
            out.set(i, i, out.get(i, i) + gamma);
        }
        out
    }

    /// Solves `Ax = b` by Gaussian elimination with partial pivoting.
    /// Returns `None` for a (numerically) singular matrix.
    pub fn solve(&self, b: &[f64]) -> Option<Vec<f64>> {
        let n = self.rows;
        assert_eq!(n, self.cols, "solve needs a square matrix");
        assert_eq!(b.len(), n, "solve rhs length");
        let mut a = self.data.clone();
        let mut x = b.to_vec();
        for k in 0..n {
            let (piv, pmax) = (k..n)
                .map(|r| (r, a[r * n + k].abs()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pmax == 0.0 {
                return None;
            }
            if piv != k {
                for c in 0..n {
                    a.swap(k * n + c, piv * n + c);
                }
                x.swap(k, piv);
            }
            let d = a[k * n + k];
            for r in k + 1..n {
                let f = a[r * n + k] / d;
                if f == 0.0 {
                    continue;
                }
                for c in k..n {
                    a[r * n + c] -= f * a[k * n + c];
                }
                x[r] -= f * x[k];
            }
        }
        for k in (0..n).rev() {
            let s: f64 = (k + 1..n).map(|c| a[k * n + c] * x[c]).sum();
            x[k] = (x[k] - s) / a[k * n + k];
        }
        Some(x)
    }
}

/// Outcome of one oracle comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleCheck {
    pub name: String,
    pub relative_error: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub tolerance: f64,
    pub checks: Vec<OracleCheck>,
}

impl OracleReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn worst(&self) -> f64 {
        self.checks.iter().map(|c| c.relative_error).fold(0.0, f64::max)
    }
}

/// Tolerance used by [`dense_oracle_suite`].
pub const ORACLE_TOLERANCE: f64 = 1e-10;

/// Compares every structured operation against the explicitly assembled
/// `H` on random inputs drawn from `seed`.
pub fn dense_oracle_suite(op: &SciOperator, seed: u64) -> Result<OracleReport> {
    let h = op.build_dense()?;
    let ht = h.transpose();
    let (nx, ny, nb) = op.dims();
    let n = nx * ny;
    let mut r = rng::seeded(seed);
    let x = DataCube::from_vec(nx, ny, nb, rng::normal_vec(&mut r, n * nb))?;
    let u = DataCube::from_vec(nx, ny, nb, rng::normal_vec(&mut r, n * nb))?;
    let y = Frame2D::from_vec(nx, ny, rng::normal_vec(&mut r, n))?;
    let gamma = 0.5;

    let mut checks = Vec::new();
    let mut push = |name: &str, got: &[f64], want: &[f64]| {
        let e = relative_error(got, want);
        checks.push(OracleCheck { name: name.into(), relative_error: e, passed: e <= ORACLE_TOLERANCE });
    };

    let xv = x.vectorize();
    let yv = y.vectorize();
    push("apply_H", &op.apply_h(&x)?.vectorize(), &h.matvec(&xv));
    push("apply_Ht", &op.apply_ht(&y)?.vectorize(), &ht.matvec(&yv));

    let hht = h.matmul(&ht);
    let dense_r: Vec<f64> = (0..n).map(|i| hht.get(i, i)).collect();
    push("r_diagonal", &op.r_diagonal().vectorize(), &dense_r);

    // x = v + Hᵀ(HHᵀ)⁻¹(y − Hv)
    let resid: Vec<f64> = yv.iter().zip(h.matvec(&xv)).map(|(a, b)| a - b).collect();
    let proj = match hht.solve(&resid) {
        Some(z) => xv.iter().zip(ht.matvec(&z)).map(|(a, b)| a + b).collect::<Vec<_>>(),
        None => vec![f64::NAN; n * nb],
    };
    push("project_to_manifold", &op.project_to_manifold(&x, &y, 1.0)?.vectorize(), &proj);

    // (HᵀH + γI)x = Hᵀy + γ(v + u)
    let lhs = ht.matmul(&h).add_scaled_identity(gamma);
    let uv = u.vectorize();
    let rhs: Vec<f64> = ht
        .matvec(&yv)
        .iter()
        .zip(xv.iter().zip(&uv))
        .map(|(a, (v, w))| a + gamma * (v + w))
        .collect();
    let admm = lhs.solve(&rhs).unwrap_or_else(|| vec![f64::NAN; n * nb]);
    push("admm_x_update", &op.admm_x_update(&y, &x, &u, gamma)?.vectorize(), &admm);

    Ok(OracleReport { tolerance: ORACLE_TOLERANCE, checks })
}

/// Central-difference gradient check. Returns the largest per-coordinate
/// discrepancy `|fd − g| / max(|g|, |fd|, 1)`.
pub fn finite_diff_check(
    objective: impl Fn(&[f64]) -> f64,
    gradient: impl Fn(&[f64]) -> Vec<f64>,
    point: &[f64],
    eps: f64,
) -> f64 {
    assert!(eps > 0.0, "finite_diff_check needs eps > 0");
    let analytic = gradient(point);
    let mut probe = point.to_vec();
    let mut worst = 0.0_f64;
    for k in 0..point.len() {
        probe[k] = point[k] + eps;
        let fp = objective(&probe);
        probe[k] = point[k] - eps;
        let fm = objective(&probe);
        probe[k] = point[k];
        let fd = (fp - fm) / (2.0 * eps);
        let scale = analytic[k].abs().max(fd.abs()).max(1.0);
        worst = worst.max((fd - analytic[k]).abs() / scale);
    }
    worst
}

/// Default step for [`finite_diff_check`].
pub const FD_EPS: f64 = 1e-5;
/// Minimum distance from a ReLU kink for a point to be used in a gradient check.
pub const KINK_MARGIN: f64 = 1e-3;
