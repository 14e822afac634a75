//! Closed-form quantities of the GAP-net convergence bound and Monte Carlo
//! checks of the steps behind it.
//!
//! Logarithms of `1/δ` are taken in base 2 throughout, matching the `2^{-b}`
//! latent quantization.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Result, SciError};
use crate::math;
use crate::operator::SciOperator;
use crate::synth;

mod experiment;
mod xi;

pub use experiment::{
    aggregate_contraction, contraction_instance, run_contraction_experiment, run_contraction_trial, ContractionInstance, ContractionReport, ContractionSetup,
    StageObservation, TrialOutcome, ROUNDOFF_FLOOR,
};
pub use xi::{xi_samples, xi_statistics, XiReport, XiSample, XiTail};

/// Generative parameters of one stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageParams {
    /// Latent dimension `η_k`.
    pub eta: usize,
    /// Lipschitz constant `L_k`.
    pub lipschitz: f64,
    /// Covering distortion `δ_k`.
    pub delta: f64,
    /// Quantization bits `b_k`; `None` uses [`distortion_bits`].
    pub bits: Option<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TheoremParams {
    /// Pixels per band.
    pub n: usize,
    pub bands: usize,
    pub stages: Vec<StageParams>,
    pub zeta: f64,
    pub lambda: f64,
    /// Amplitude bound: signals live in `[-ρ/2, ρ/2]`.
    pub rho: f64,
}

/// Which closed form of `γ_k` to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GammaForm {
    /// `L δ^ζ √(η/nB)`.
    Distortion,
    /// `L 2^{-b} √η / (δ √(nB))`.
    Quantized,
}

impl TheoremParams {
    /// `count` identical stages.
    pub fn uniform(n: usize, bands: usize, stage: StageParams, count: usize, zeta: f64, lambda: f64, rho: f64) -> Self {
        Self { n, bands, stages: alloc::vec![stage; count], zeta, lambda, rho }
    }

    pub fn nb(&self) -> f64 {
        (self.n * self.bands) as f64
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: alloc::string::String| Err(SciError::InvalidConfig(m));
        if self.n == 0 || self.bands == 0 {
            return bad(format!("n and B must be positive, got n={} B={}", self.n, self.bands));
        }
        if self.stages.is_empty() {
            return bad("at least one stage is required".into());
        }
        if !(self.zeta > 0.0 && self.zeta < 1.0) {
            return bad(format!("zeta must lie in (0, 1), got {}", self.zeta));
        }
        if !(self.lambda > 0.0) || !(self.rho > 0.0) {
            return bad(format!("lambda and rho must be positive, got {} and {}", self.lambda, self.rho));
        }
        for (k, s) in self.stages.iter().enumerate() {
            if !(s.delta > 0.0) || !(s.lipschitz >= 0.0) || s.eta == 0 {
                return bad(format!("stage {k}: need delta > 0, L >= 0, eta >= 1"));
            }
        }
        for (k, w) in self.stages.windows(2).enumerate() {
            if w[1].delta > w[0].delta {
                return bad(format!("delta must be non-increasing (stage {} > stage {k})", k + 1));
            }
            if w[1].eta < w[0].eta {
                return bad(format!("eta must be non-decreasing (stage {} < stage {k})", k + 1));
            }
        }
        Ok(())
    }

    pub fn gamma(&self, k: usize, form: GammaForm) -> f64 {
        let s = &self.stages[k];
        match form {
            GammaForm::Distortion => gamma_distortion(s.lipschitz, s.delta, self.zeta, s.eta, self.nb()),
            GammaForm::Quantized => {
                let bits = s.bits.unwrap_or_else(|| distortion_bits(s.delta, self.zeta));
                gamma_quantized(s.lipschitz, bits, s.eta, s.delta, self.nb())
            }
        }
    }

    pub fn alpha(&self, k: usize) -> Result<f64> {
        alpha(self.gamma(k, GammaForm::Distortion), self.bands)
    }

    /// Whether `λ < 0.5 − α_k`.
    pub fn lambda_admissible(&self, k: usize) -> Result<bool> {
        Ok(self.lambda < 0.5 - self.alpha(k)?)
    }
}

/// `γ = L δ^ζ √(η/nB)`.
pub fn gamma_distortion(lipschitz: f64, delta: f64, zeta: f64, eta: usize, nb: f64) -> f64 {
    lipschitz * math::powf(delta, zeta) * math::sqrt(eta as f64 / nb)
}

/// `γ = L 2^{-b} √η / (δ √(nB))`.
pub fn gamma_quantized(lipschitz: f64, bits: u32, eta: usize, delta: f64, nb: f64) -> f64 {
    lipschitz * math::powi(2.0, -(bits as i32)) * math::sqrt(eta as f64) / (delta * math::sqrt(nb))
}

/// `b = ⌈(1−ζ) log₂(1/δ)⌉`, at least 1.
pub fn distortion_bits(delta: f64, zeta: f64) -> u32 {
    bits_for_exponent(delta, 1.0 - zeta)
}

/// `b = ⌈(1+ζ) log₂(1/δ)⌉`, at least 1: the smallest bit count for which the
/// quantized `γ` never exceeds the distortion form.
pub fn matched_bits(delta: f64, zeta: f64) -> u32 {
    bits_for_exponent(delta, 1.0 + zeta)
}

fn bits_for_exponent(delta: f64, exponent: f64) -> u32 {
    let b = math::ceil(exponent * math::log2(1.0 / delta));
    if b < 1.0 {
        1
    } else {
        b as u32
    }
}

/// `α = 2(1+2B) √(γ(1 + 1/(1−γ)))`.
pub fn alpha(gamma: f64, bands: usize) -> Result<f64> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(SciError::GammaOutOfRange(gamma));
    }
    let b = bands as f64;
    Ok(2.0 * (1.0 + 2.0 * b) * math::sqrt(gamma * (1.0 + 1.0 / (1.0 - gamma))))
}

/// Per-stage contraction factor `2(λ+α)`.
pub fn contraction_factor(lambda: f64, alpha: f64) -> f64 {
    2.0 * (lambda + alpha)
}

/// Exponent of stage `k`'s failure term.
fn failure_exponent(p: &TheoremParams, k: usize) -> Result<f64> {
    let s = &p.stages[k];
    let gamma = p.gamma(k, GammaForm::Distortion);
    if !(gamma < 1.0) {
        return Err(SciError::GammaOutOfRange(gamma));
    }
    let b = p.bands as f64;
    let concentration = 2.0 * p.lambda * p.lambda * p.n as f64 * math::powi(s.delta, 4) * math::powi(1.0 - gamma, 4)
        / (4.0 * b * b * math::powi(p.rho, 4));
    let covering = 2.0 * core::f64::consts::LN_2 * ((1.0 - p.zeta) * math::log2(1.0 / s.delta) + 1.0) * s.eta as f64;
    Ok(-concentration + covering)
}

/// `Σ_k exp[−2λ²nδ_k⁴(1−γ_k)⁴/(4B²ρ⁴) + 2 ln2 ((1−ζ) log₂(1/δ_k) + 1) η_k]`, clamped to `[0, 1]`.
pub fn failure_probability(p: &TheoremParams) -> Result<f64> {
    p.validate()?;
    let mut total = 0.0;
    for k in 0..p.stages.len() {
        total += math::exp(failure_exponent(p, k)?);
    }
    Ok(total.clamp(0.0, 1.0))
}

/// Masks with i.i.d. standard normal entries.
pub fn sample_gaussian_operator(nx: usize, ny: usize, bands: usize, seed: u64) -> SciOperator {
    SciOperator::new(synth::gaussian_masks(nx, ny, bands, seed))
}

/// Uniform `bits`-bit quantization of `[-1, 1]` to cell midpoints.
pub fn quantize_latent(f: &[f64], bits: u32) -> Result<Vec<f64>> {
    if bits == 0 || bits > 52 {
        return Err(SciError::InvalidConfig(format!("bits must be in 1..=52, got {bits}")));
    }
    let cells = (1u64 << bits) as f64;
    let width = 2.0 / cells;
    f.iter()
        .map(|&v| {
            if !(-1.0..=1.0).contains(&v) {
                return Err(SciError::OutOfAlphabet(v));
            }
            let idx = math::floor((v + 1.0) / width).min(cells - 1.0);
            Ok(-1.0 + width * (idx + 0.5))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::denoise::{lipschitz_estimate, GenerativeModel, SubspaceBasis};
    use crate::rng;
    use alloc::vec;

    fn stage(eta: usize, delta: f64) -> StageParams {
        StageParams { eta, lipschitz: 1.0, delta, bits: None }
    }

    #[test]
    fn gamma_plug_in_values() {
        assert!((gamma_distortion(1.0, 1.0, 0.5, 256, 256.0) - 1.0).abs() < 1e-15);
        let g = gamma_distortion(1.0, 0.01, 0.5, 4, 256.0);
        assert!((g - 0.0125).abs() < 1e-15);
        assert!((gamma_distortion(2.0, 0.01, 0.5, 4, 256.0) - 2.0 * g).abs() < 1e-15);
        let p = TheoremParams::uniform(64, 4, stage(4, 0.01), 1, 0.5, 0.1, 1.0);
        assert_eq!(p.gamma(0, GammaForm::Distortion), g);
    }

    #[test]
    fn alpha_plug_in_and_shape() {
        assert!((alpha(0.5, 1).unwrap() - 6.0 * 1.5f64.sqrt()).abs() < 1e-12);
        assert!(alpha(1e-14, 4).unwrap() < 1e-5);
        let mut prev = 0.0;
        for i in 1..1000 {
            let a = alpha(i as f64 / 1000.0, 3).unwrap();
            assert!(a > prev);
            prev = a;
        }
        for g in [0.0, 1.0, -0.1, f64::NAN] {
            assert!(matches!(alpha(g, 2), Err(SciError::GammaOutOfRange(_))));
        }
    }

    #[test]
    fn quantized_gamma_with_distortion_bits_is_bounded_by_delta_power() {
        // With b = ⌈(1−ζ)log₂(1/δ)⌉ the quantized form is only bounded by
        // L δ^{−ζ} √(η/nB), which exceeds the distortion form whenever δ < 1.
        let (zeta, eta, nb) = (0.5, 4, 256.0);
        let mut exceeded = 0;
        for i in 1..200 {
            let delta = i as f64 / 200.0;
            let gq = gamma_quantized(1.0, distortion_bits(delta, zeta), eta, delta, nb);
            let gd = gamma_distortion(1.0, delta, zeta, eta, nb);
            assert!(gq <= gd * delta.powf(-2.0 * zeta) * (1.0 + 1e-12));
            if gq > gd {
                exceeded += 1;
            }
            let gm = gamma_quantized(1.0, matched_bits(delta, zeta), eta, delta, nb);
            assert!(gm <= gd * (1.0 + 1e-12), "delta={delta}");
        }
        assert!(exceeded >= 100);
    }

    #[test]
    fn bit_counts() {
        assert_eq!(distortion_bits(0.01, 0.5), 4);
        assert_eq!(matched_bits(0.01, 0.5), 10);
        assert_eq!(distortion_bits(0.9, 0.5), 1);
        assert_eq!(distortion_bits(1.0 / 1024.0, 0.5), 5);
    }

    #[test]
    fn failure_probability_limits() {
        let big = TheoremParams::uniform(1_000_000, 1, stage(4, 0.5), 3, 0.5, 0.2, 1.0);
        assert!(failure_probability(&big).unwrap() < 1e-9);
        let tiny = TheoremParams::uniform(256, 4, stage(5, 1e-6), 3, 0.5, 0.2, 1.0);
        assert_eq!(failure_probability(&tiny).unwrap(), 1.0);
        let mut prev = 1.0;
        for e in 2..8 {
            let p = TheoremParams::uniform(10usize.pow(e), 2, stage(4, 0.3), 5, 0.5, 0.2, 1.0);
            let f = failure_probability(&p).unwrap();
            assert!(f <= prev);
            prev = f;
        }
        assert!(prev < 1e-6);
    }

    #[test]
    fn failure_probability_matches_covering_form() {
        // Product form: |U_Q|^{2η} exp(−c) with |U_Q| = 2^{(1−ζ)log₂(1/δ)+1}.
        let p = TheoremParams::uniform(200_000, 2, stage(3, 0.4), 4, 0.6, 0.3, 1.2);
        let s = p.stages[0];
        let gamma = s.lipschitz * s.delta.powf(p.zeta) * (s.eta as f64 / p.nb()).sqrt();
        let card = 2f64.powf((1.0 - p.zeta) * (1.0 / s.delta).log2() + 1.0);
        let c = 2.0 * p.lambda.powi(2) * p.n as f64 * s.delta.powi(4) * (1.0 - gamma).powi(4)
            / (4.0 * (p.bands as f64).powi(2) * p.rho.powi(4));
        let expected = 4.0 * card.powf(2.0 * s.eta as f64) * (-c).exp();
        let got = failure_probability(&p).unwrap();
        assert!(expected < 1.0);
        assert!((got - expected).abs() <= 1e-12 * expected);
    }

    #[test]
    fn params_validation() {
        let ok = TheoremParams::uniform(16, 2, stage(2, 0.1), 2, 0.5, 0.1, 1.0);
        assert!(ok.validate().is_ok());
        let mut p = ok.clone();
        p.stages[1].delta = 0.2;
        assert!(p.validate().is_err());
        let mut p = ok.clone();
        p.stages[0].eta = 3;
        assert!(p.validate().is_err());
        let mut p = ok.clone();
        p.zeta = 1.0;
        assert!(p.validate().is_err());
        let mut p = ok;
        p.stages[0].lipschitz = 1e6;
        p.stages[1].lipschitz = 1e6;
        assert!(matches!(failure_probability(&p), Err(SciError::GammaOutOfRange(_))));
    }

    #[test]
    fn gaussian_operator_moments() {
        let op = sample_gaussian_operator(50, 50, 40, 9);
        assert_eq!(op, sample_gaussian_operator(50, 50, 40, 9));
        let m = op.masks().as_slice();
        let n = m.len() as f64;
        let mean = m.iter().sum::<f64>() / n;
        let var = m.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() < 3.0 / n.sqrt());
        assert!((var - 1.0).abs() < 3.0 * (2.0 / n).sqrt());
        let op = sample_gaussian_operator(64, 64, 4, 10);
        let r = op.r_diagonal();
        let rn = r.len() as f64;
        let rmean = r.as_slice().iter().sum::<f64>() / rn;
        // χ²_B has variance 2B.
        assert!((rmean - 4.0).abs() < 3.0 * (8.0 / rn).sqrt());
    }

    #[test]
    fn normalized_gram_is_contractive() {
        for seed in 0..5 {
            let op = sample_gaussian_operator(6, 5, 3, seed);
            assert!(op.operator_norm() <= 1.0 + 1e-8);
        }
    }

    #[test]
    fn quantization_levels() {
        assert_eq!(quantize_latent(&[-1.0, -0.2, 0.0, 0.7, 1.0], 1).unwrap(), vec![-0.5, -0.5, 0.5, 0.5, 0.5]);
        let grid = quantize_latent(&[-0.9, 0.3], 3).unwrap();
        assert_eq!(quantize_latent(&grid, 3).unwrap(), grid);
        assert_eq!(grid, vec![-0.875, 0.375]);
        let mut r = rng::seeded(4);
        let f: Vec<f64> = (0..1000).map(|_| rng::uniform(&mut r, -1.0, 1.0)).collect();
        let q = quantize_latent(&f, 8).unwrap();
        assert!(f.iter().zip(&q).all(|(a, b)| (a - b).abs() <= 2f64.powi(-8)));
        assert_eq!(quantize_latent(&[1.5], 2).unwrap_err(), SciError::OutOfAlphabet(1.5));
        assert!(quantize_latent(&[0.0], 0).is_err());
    }

    #[test]
    fn quantization_error_through_linear_decoder() {
        let basis = SubspaceBasis::random((4, 4, 2), 6, 11).unwrap();
        let model = GenerativeModel::linear(basis, 1.0);
        let l = lipschitz_estimate(&model, 64, 3).unwrap();
        let mut r = rng::seeded(12);
        for bits in 1..10 {
            let f: Vec<f64> = (0..6).map(|_| rng::uniform(&mut r, -1.0, 1.0)).collect();
            let q = quantize_latent(&f, bits).unwrap();
            let d = crate::math::dist2(&model.decode(&f), &model.decode(&q));
            assert!(d <= l * 2f64.powi(-(bits as i32)) * 6f64.sqrt() * (1.0 + 1e-12));
        }
    }
}
