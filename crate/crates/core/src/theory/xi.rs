//! Per-pixel statistics `X_i = Σ_b e_bi e′_bi − (B/R_i)(Σ_b D_bi e_bi)(Σ_b D_bi e′_bi)`
//! over fresh Gaussian operators.

use alloc::vec::Vec;

use crate::error::{Result, SciError};
use crate::math;
use crate::operator::SciOperator;
use crate::rng;
use crate::tensor::DataCube;

use super::sample_gaussian_operator;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XiSample {
    pub value: f64,
    /// `Σ_b e_bi e′_bi`, the mean of `X_i` plus the subtracted term's mean.
    pub direct: f64,
    /// `B √(Σ_b e_bi²) √(Σ_b e′_bi²)`.
    pub bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XiTail {
    pub lambda: f64,
    /// Empirical `P(Σ_i X_i ≥ λ)`.
    pub upper: f64,
    /// Empirical `P(Σ_i X_i ≤ −λ)`.
    pub lower: f64,
    /// `exp(−2λ² / (4B² Σ_i (Σ_b e²)(Σ_b e′²)))`.
    pub hoeffding: f64,
}

impl XiTail {
    pub fn holds(&self) -> bool {
        self.upper <= self.hoeffding && self.lower <= self.hoeffding
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct XiReport {
    pub samples: usize,
    pub mean: f64,
    pub std_error: f64,
    /// Largest `|X_i − Σ_b e e′| / bound` seen over all pixels and samples.
    pub max_bound_ratio: f64,
    pub bound_violations: usize,
    pub tails: Vec<XiTail>,
}

impl XiReport {
    /// Mean within three standard errors of zero.
    pub fn mean_ok(&self) -> bool {
        self.mean.abs() <= 3.0 * self.std_error
    }

    pub fn passed(&self) -> bool {
        self.mean_ok() && self.bound_violations == 0 && self.tails.iter().all(XiTail::holds)
    }
}

/// `X_i` for every pixel of one operator.
pub fn xi_samples(op: &SciOperator, e: &DataCube, e2: &DataCube) -> Result<Vec<XiSample>> {
    e.ensure_dims(op.dims(), "e vs operator")?;
    e2.ensure_dims(op.dims(), "e' vs operator")?;
    let nb = op.bands();
    let b = nb as f64;
    let masks = op.masks();
    let r = op.r_diagonal();
    Ok((0..op.pixels())
        .map(|p| {
            let (mut direct, mut se, mut se2, mut de, mut de2) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for band in 0..nb {
                let (a, a2, d) = (e.slice_data(band)[p], e2.slice_data(band)[p], masks.slice_data(band)[p]);
                direct += a * a2;
                se += a * a;
                se2 += a2 * a2;
                de += d * a;
                de2 += d * a2;
            }
            let value = direct - b / r.as_slice()[p] * de * de2;
            XiSample { value, direct, bound: b * math::sqrt(se) * math::sqrt(se2) }
        })
        .collect())
}

/// Monte Carlo over `samples` fresh Gaussian operators of the shape of `e`.
///
/// `e` and `e2` must have unit norm. Per-pixel boundedness is checked with a
/// relative rounding allowance of `1e-12` since it is tight at `B = 1`.
pub fn xi_statistics(e: &DataCube, e2: &DataCube, samples: usize, lambdas: &[f64], seed: u64) -> Result<XiReport> {
    for (name, v) in [("e", e), ("e'", e2)] {
        if (v.norm() - 1.0).abs() > 1e-9 {
            return Err(SciError::InvalidConfig(alloc::format!("{name} must have unit norm, got {}", v.norm())));
        }
    }
    if samples < 2 {
        return Err(SciError::InvalidConfig("need at least two samples".into()));
    }
    e.ensure_dims(e2.dims(), "e vs e'")?;
    let (nx, ny, nb) = e.dims();
    let b = nb as f64;
    let spread: f64 = (0..nx * ny)
        .map(|p| {
            let s: f64 = (0..nb).map(|k| { let a = e.slice_data(k)[p]; a * a }).sum();
            let s2: f64 = (0..nb).map(|k| { let a = e2.slice_data(k)[p]; a * a }).sum();
            s * s2
        })
        .sum();
    let mut sums = Vec::with_capacity(samples);
    let mut max_ratio: f64 = 0.0;
    let mut violations = 0;
    for t in 0..samples {
        let op = sample_gaussian_operator(nx, ny, nb, rng::derive_seed(seed, t as u64));
        let xs = xi_samples(&op, e, e2)?;
        for x in &xs {
            let dev = (x.value - x.direct).abs();
            if x.bound > 0.0 {
                max_ratio = max_ratio.max(dev / x.bound);
            }
            if dev > x.bound * (1.0 + 1e-12) {
                violations += 1;
            }
        }
        sums.push(xs.iter().map(|x| x.value).sum::<f64>());
    }
    let n = samples as f64;
    let mean = sums.iter().sum::<f64>() / n;
    let var = sums.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (n - 1.0);
    let tails = lambdas
        .iter()
        .map(|&lambda| XiTail {
            lambda,
            upper: sums.iter().filter(|&&s| s >= lambda).count() as f64 / n,
            lower: sums.iter().filter(|&&s| s <= -lambda).count() as f64 / n,
            hoeffding: math::exp(-2.0 * lambda * lambda / (4.0 * b * b * spread)),
        })
        .collect();
    Ok(XiReport {
        samples,
        mean,
        std_error: math::sqrt(var / n),
        max_bound_ratio: max_ratio,
        bound_violations: violations,
        tails,
    })
}
