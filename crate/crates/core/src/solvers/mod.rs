//! Unfolded reconstruction loops.
//!
//! All loops run exactly `K` stages, with no early stopping.
//!
//! * GAP-net: `x⁽ᵏ⁺¹⁾ = v⁽ᵏ⁾ + s·HᵀR⁻¹(y − Hv⁽ᵏ⁾)`, `v⁽ᵏ⁺¹⁾ = 𝒟_{k+1}(x⁽ᵏ⁺¹⁾)`.
//! * ADMM-net: closed-form x-step, `v⁽ᵏ⁺¹⁾ = 𝒟(x⁽ᵏ⁺¹⁾ − u⁽ᵏ⁾)`,
//!   `u⁽ᵏ⁺¹⁾ = u⁽ᵏ⁾ − (x⁽ᵏ⁺¹⁾ − v⁽ᵏ⁺¹⁾)`.
//! * PnP-GAP: GAP with one shared denoiser, optionally with the accelerated
//!   (residual-accumulating) projection.
//! * GAP-TV: accelerated PnP-GAP with an anisotropic TV denoiser.
//!
//! Every loop starts from `v⁽⁰⁾ = Hᵀy`.

use alloc::format;
use alloc::vec::Vec;

use crate::denoise::{DenoiserStage, TvParams};
use crate::error::{Result, SciError};
use crate::operator::{ProjectionScale, SciOperator};
use crate::tensor::{DataCube, Frame2D};

pub mod metrics;

pub use metrics::{mse, psnr, rmse_loss, ssim, weighted_loss, DEFAULT_BETAS};

/// Inner TV iterations used by [`gap_tv_reconstruct`].
pub const GAP_TV_INNER_ITERS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    GapNet,
    AdmmNet,
    GapTv,
    PnpGap,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::GapNet => "gap_net",
            Algorithm::AdmmNet => "admm_net",
            Algorithm::GapTv => "gap_tv",
            Algorithm::PnpGap => "pnp_gap",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "gap_net" => Algorithm::GapNet,
            "admm_net" => Algorithm::AdmmNet,
            "gap_tv" => Algorithm::GapTv,
            "pnp_gap" => Algorithm::PnpGap,
            _ => return None,
        })
    }
}

/// Either one denoiser per stage (unfolding) or one reused everywhere (PnP).
#[derive(Debug, Clone)]
pub enum Stages {
    PerStage(Vec<DenoiserStage>),
    Shared(DenoiserStage),
}

impl Stages {
    fn get(&self, k: usize) -> &DenoiserStage {
        match self {
            Stages::PerStage(v) => &v[k],
            Stages::Shared(d) => d,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub algorithm: Algorithm,
    pub stages: usize,
    pub denoisers: Stages,
    pub gamma: f64,
    pub projection_scale: ProjectionScale,
    /// Accumulate measurement residuals in the GAP projection (PnP-GAP / GAP-TV).
    pub accelerate: bool,
    /// Keep a copy of every `v⁽ᵏ⁾` in the trace.
    pub record_iterates: bool,
    /// Ground truth for per-stage error and PSNR.
    pub reference: Option<DataCube>,
    pub peak: f64,
}

impl SolverConfig {
    pub fn new(algorithm: Algorithm, stages: usize, denoisers: Stages) -> Self {
        Self {
            algorithm,
            stages,
            denoisers,
            gamma: 1.0,
            projection_scale: ProjectionScale::Unit,
            accelerate: false,
            record_iterates: false,
            reference: None,
            peak: 1.0,
        }
    }

    pub fn gap_net(denoisers: Vec<DenoiserStage>) -> Self {
        Self::new(Algorithm::GapNet, denoisers.len(), Stages::PerStage(denoisers))
    }

    pub fn admm_net(denoisers: Vec<DenoiserStage>, gamma: f64) -> Self {
        Self { gamma, ..Self::new(Algorithm::AdmmNet, denoisers.len(), Stages::PerStage(denoisers)) }
    }

    pub fn pnp_gap(denoiser: DenoiserStage, iters: usize) -> Self {
        Self::new(Algorithm::PnpGap, iters, Stages::Shared(denoiser))
    }

    pub fn with_reference(mut self, truth: DataCube) -> Self {
        self.reference = Some(truth);
        self
    }

    pub fn with_scale(mut self, scale: ProjectionScale) -> Self {
        self.projection_scale = scale;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.stages == 0 {
            return Err(SciError::InvalidConfig("stage count K must be >= 1".into()));
        }
        if matches!(self.algorithm, Algorithm::GapNet | Algorithm::AdmmNet) {
            match &self.denoisers {
                Stages::PerStage(v) if v.len() == self.stages => {}
                Stages::PerStage(v) => {
                    return Err(SciError::InvalidConfig(format!(
                        "{} needs exactly {} denoisers, got {}",
                        self.algorithm.name(),
                        self.stages,
                        v.len()
                    )))
                }
                Stages::Shared(_) => {
                    return Err(SciError::InvalidConfig(format!("{} needs per-stage denoisers", self.algorithm.name())))
                }
            }
        } else if let Stages::PerStage(v) = &self.denoisers {
            if v.len() != self.stages {
                return Err(SciError::InvalidConfig(format!("{} stages but {} denoisers", self.stages, v.len())));
            }
        }
        if self.algorithm == Algorithm::AdmmNet && !(self.gamma > 0.0) {
            return Err(SciError::NonPositiveGamma(self.gamma));
        }
        if !(self.peak > 0.0) {
            return Err(SciError::InvalidConfig(format!("peak must be positive, got {}", self.peak)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageRecord {
    /// `‖y − Hv⁽ᵏ⁾‖₂`.
    pub residual: f64,
    /// `‖y − Hx⁽ᵏ⁾‖₂` right after the x-step (absent for stage 0).
    pub x_residual: Option<f64>,
    /// `‖x⁽ᵏ⁾ − v⁽ᵏ⁾‖₂` (ADMM primal residual).
    pub primal_residual: Option<f64>,
    /// `‖v⁽ᵏ⁾ − x*‖₂` when a reference is configured.
    pub error: Option<f64>,
    pub psnr: Option<f64>,
    pub iterate: Option<DataCube>,
}

/// Per-stage record; entry 0 describes `v⁽⁰⁾ = Hᵀy`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReconTrace {
    pub stages: Vec<StageRecord>,
}

impl ReconTrace {
    pub fn len(&self) -> usize {
        self.stages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stages.is_empty()
    }

    pub fn residuals(&self) -> Vec<f64> {
        self.stages.iter().map(|s| s.residual).collect()
    }

    pub fn errors(&self) -> Option<Vec<f64>> {
        self.stages.iter().map(|s| s.error).collect()
    }
}

struct Recorder<'a> {
    op: &'a SciOperator,
    y: &'a Frame2D,
    cfg: &'a SolverConfig,
    trace: ReconTrace,
}

impl Recorder<'_> {
    fn record(&mut self, v: &DataCube, x: Option<&DataCube>) -> Result<()> {
        let residual = measurement_residual(self.op, self.y, v)?;
        let x_residual = x.map(|x| measurement_residual(self.op, self.y, x)).transpose()?;
        let primal_residual = x.map(|x| x.distance(v));
        let (error, psnr) = match &self.cfg.reference {
            Some(truth) => (Some(v.distance(truth)), Some(metrics::psnr(v, truth, self.cfg.peak)?)),
            None => (None, None),
        };
        let iterate = self.cfg.record_iterates.then(|| v.clone());
        self.trace.stages.push(StageRecord { residual, x_residual, primal_residual, error, psnr, iterate });
        Ok(())
    }
}

fn measurement_residual(op: &SciOperator, y: &Frame2D, v: &DataCube) -> Result<f64> {
    let hv = op.apply_h(v)?;
    Ok(crate::math::dist2(hv.as_slice(), y.as_slice()))
}

fn check_inputs(op: &SciOperator, y: &Frame2D, cfg: &SolverConfig) -> Result<()> {
    cfg.validate()?;
    y.ensure_dims(op.frame_dims(), "measurement vs operator")?;
    if let Some(r) = &cfg.reference {
        r.ensure_dims(op.dims(), "reference vs operator")?;
    }
    Ok(())
}

fn gap_loop(op: &SciOperator, y: &Frame2D, cfg: &SolverConfig) -> Result<(DataCube, ReconTrace)> {
    check_inputs(op, y, cfg)?;
    let scale = cfg.projection_scale.factor(op.bands());
    let mut rec = Recorder { op, y, cfg, trace: ReconTrace::default() };
    let mut v = op.apply_ht(y)?;
    rec.record(&v, None)?;
    let mut target = if cfg.accelerate { Frame2D::zeros(y.nx(), y.ny()) } else { y.clone() };
    for k in 0..cfg.stages {
        if cfg.accelerate {
            let hv = op.apply_h(&v)?;
            for ((t, &yi), &hi) in target.as_mut_slice().iter_mut().zip(y.as_slice()).zip(hv.as_slice()) {
                *t += yi - hi;
            }
        }
        let x = op.project_to_manifold(&v, &target, scale)?;
        v = cfg.denoisers.get(k).denoise(&x)?;
        rec.record(&v, Some(&x))?;
    }
    Ok((v, rec.trace))
}

/// GAP-net with `K` per-stage denoisers.
pub fn gap_net_reconstruct(op: &SciOperator, y: &Frame2D, cfg: &SolverConfig) -> Result<(DataCube, ReconTrace)> {
    if cfg.algorithm != Algorithm::GapNet {
        return Err(SciError::InvalidConfig(format!("expected gap_net, got {}", cfg.algorithm.name())));
    }
    gap_loop(op, y, cfg)
}

/// PnP-GAP: GAP with a shared (or per-stage) denoiser.
pub fn pnp_gap_reconstruct(op: &SciOperator, y: &Frame2D, cfg: &SolverConfig) -> Result<(DataCube, ReconTrace)> {
    if !matches!(cfg.algorithm, Algorithm::PnpGap | Algorithm::GapTv) {
        return Err(SciError::InvalidConfig(format!("expected pnp_gap, got {}", cfg.algorithm.name())));
    }
    gap_loop(op, y, cfg)
}

/// ADMM-net with `K` per-stage denoisers.
pub fn admm_net_reconstruct(op: &SciOperator, y: &Frame2D, cfg: &SolverConfig) -> Result<(DataCube, ReconTrace)> {
    if cfg.algorithm != Algorithm::AdmmNet {
        return Err(SciError::InvalidConfig(format!("expected admm_net, got {}", cfg.algorithm.name())));
    }
    check_inputs(op, y, cfg)?;
    let mut rec = Recorder { op, y, cfg, trace: ReconTrace::default() };
    let mut v = op.apply_ht(y)?;
    let (nx, ny, nb) = op.dims();
    let mut u = DataCube::zeros(nx, ny, nb);
    rec.record(&v, None)?;
    for k in 0..cfg.stages {
        let x = op.admm_x_update(y, &v, &u, cfg.gamma)?;
        v = cfg.denoisers.get(k).denoise(&x.axpy(-1.0, &u))?;
        u = u.axpy(-1.0, &x.axpy(-1.0, &v));
        rec.record(&v, Some(&x))?;
    }
    Ok((v, rec.trace))
}

/// Configuration used by [`gap_tv_reconstruct`].
pub fn gap_tv_config(iters: usize, lambda_tv: f64) -> SolverConfig {
    let tv = DenoiserStage::Tv(TvParams { weight: lambda_tv, iters: GAP_TV_INNER_ITERS });
    SolverConfig { accelerate: true, ..SolverConfig::new(Algorithm::GapTv, iters, Stages::Shared(tv)) }
}

/// GAP-TV baseline: accelerated GAP with a TV denoiser every iteration.
pub fn gap_tv_reconstruct(op: &SciOperator, y: &Frame2D, iters: usize, lambda_tv: f64) -> Result<(DataCube, ReconTrace)> {
    gap_loop(op, y, &gap_tv_config(iters, lambda_tv))
}

/// Dispatches on `cfg.algorithm`.
pub fn reconstruct(op: &SciOperator, y: &Frame2D, cfg: &SolverConfig) -> Result<(DataCube, ReconTrace)> {
    match cfg.algorithm {
        Algorithm::GapNet => gap_net_reconstruct(op, y, cfg),
        Algorithm::AdmmNet => admm_net_reconstruct(op, y, cfg),
        Algorithm::GapTv | Algorithm::PnpGap => pnp_gap_reconstruct(op, y, cfg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::denoise::SubspaceBasis;
    use crate::operator::relative_error;
    use crate::rng;
    use crate::synth;
    use crate::tensor::MaskSet;
    use alloc::vec;

    fn gaussian_op(nx: usize, ny: usize, nb: usize, seed: u64) -> SciOperator {
        let mut r = rng::seeded(seed);
        SciOperator::new(MaskSet::new(DataCube::from_vec(nx, ny, nb, rng::normal_vec(&mut r, nx * ny * nb)).unwrap()))
    }

    fn subspace_instance(seed: u64) -> (SciOperator, SubspaceBasis, DataCube, Frame2D) {
        let op = gaussian_op(8, 8, 4, seed);
        let q = SubspaceBasis::random((8, 8, 4), 5, seed + 1).unwrap();
        let mut r = rng::seeded(seed + 2);
        let f: Vec<f64> = (0..5).map(|_| rng::uniform(&mut r, -1.0, 1.0)).collect();
        let x = DataCube::from_vec(8, 8, 4, q.synthesize(&f)).unwrap();
        let y = op.apply_h(&x).unwrap();
        (op, q, x, y)
    }

    #[test]
    fn single_band_identity_recovers_exactly() {
        let op = SciOperator::new(MaskSet::new(DataCube::filled(4, 5, 1, 1.0)));
        let x = DataCube::from_fn(4, 5, 1, |i, j, _| (i * 5 + j) as f64 * 0.1);
        let y = op.apply_h(&x).unwrap();
        let (v, trace) = gap_net_reconstruct(&op, &y, &SolverConfig::gap_net(vec![DenoiserStage::Identity])).unwrap();
        assert_eq!(trace.len(), 2);
        assert!(relative_error(v.as_slice(), x.as_slice()) <= 1e-15);
    }

    #[test]
    fn identity_gap_is_stationary_after_one_stage() {
        let op = gaussian_op(4, 4, 3, 1);
        let mut r = rng::seeded(2);
        let y = Frame2D::from_vec(4, 4, rng::normal_vec(&mut r, 16)).unwrap();
        let mut cfg = SolverConfig::gap_net(vec![DenoiserStage::Identity; 4]);
        cfg.record_iterates = true;
        let (_, trace) = gap_net_reconstruct(&op, &y, &cfg).unwrap();
        let v1 = trace.stages[1].iterate.as_ref().unwrap();
        let v2 = trace.stages[2].iterate.as_ref().unwrap();
        assert!(relative_error(v2.as_slice(), v1.as_slice()) <= 1e-12);
        let p = op.project_to_manifold(&op.apply_ht(&y).unwrap(), &y, 1.0).unwrap();
        assert!(relative_error(v1.as_slice(), p.as_slice()) <= 1e-12);
    }

    #[test]
    fn projection_residual_vanishes_each_stage() {
        let op = gaussian_op(6, 6, 4, 3);
        let x = synth::moving_square(6, 6, 4);
        let y = op.apply_h(&x).unwrap();
        let cfg = SolverConfig::pnp_gap(DenoiserStage::Tv(TvParams { weight: 0.05, iters: 5 }), 5);
        let (_, trace) = pnp_gap_reconstruct(&op, &y, &cfg).unwrap();
        for s in &trace.stages[1..] {
            assert!(s.x_residual.unwrap() / y.norm() <= 1e-10);
        }
    }

    #[test]
    fn subspace_oracle_contracts_with_band_scaling() {
        let (op, q, x, y) = subspace_instance(10);
        let cfg = SolverConfig::gap_net(vec![DenoiserStage::Subspace(q); 30])
            .with_scale(ProjectionScale::Bands)
            .with_reference(x.clone());
        let (v, trace) = gap_net_reconstruct(&op, &y, &cfg).unwrap();
        assert!(relative_error(v.as_slice(), x.as_slice()) <= 1e-6);
        assert_eq!(trace.errors().unwrap().len(), 31);
    }

    #[test]
    fn admm_small_gamma_matches_gap_stage() {
        let op = gaussian_op(4, 4, 3, 20);
        let mut r = rng::seeded(21);
        let y = Frame2D::from_vec(4, 4, rng::normal_vec(&mut r, 16)).unwrap();
        let (va, _) = admm_net_reconstruct(&op, &y, &SolverConfig::admm_net(vec![DenoiserStage::Identity], 1e-6)).unwrap();
        let (vg, _) = gap_net_reconstruct(&op, &y, &SolverConfig::gap_net(vec![DenoiserStage::Identity])).unwrap();
        assert!(relative_error(va.as_slice(), vg.as_slice()) <= 1e-3);
    }

    #[test]
    fn admm_zero_measurement_stays_zero() {
        let op = gaussian_op(3, 3, 2, 22);
        let (v, trace) = admm_net_reconstruct(&op, &Frame2D::zeros(3, 3), &SolverConfig::admm_net(vec![DenoiserStage::Identity; 3], 0.5))
            .unwrap();
        assert!(v.as_slice().iter().all(|x| *x == 0.0));
        assert!(trace.residuals().iter().all(|r| *r == 0.0));
    }

    #[test]
    fn admm_and_gap_agree_on_subspace_oracle() {
        let (op, q, x, y) = subspace_instance(30);
        let gap = SolverConfig::gap_net(vec![DenoiserStage::Subspace(q.clone()); 30]).with_scale(ProjectionScale::Bands);
        let admm = SolverConfig::admm_net(vec![DenoiserStage::Subspace(q); 100], 4.0).with_reference(x.clone());
        let (vg, _) = gap_net_reconstruct(&op, &y, &gap).unwrap();
        let (va, _) = admm_net_reconstruct(&op, &y, &admm).unwrap();
        assert!(relative_error(va.as_slice(), vg.as_slice()) <= 1e-5);
    }

    #[test]
    fn admm_primal_residual_vanishes() {
        for seed in 0..5 {
            let (op, q, _, y) = subspace_instance(100 + 3 * seed);
            let admm = SolverConfig::admm_net(vec![DenoiserStage::Subspace(q); 100], 4.0);
            let (_, trace) = admm_net_reconstruct(&op, &y, &admm).unwrap();
            let r: Vec<f64> = trace.stages[1..].iter().map(|s| s.primal_residual.unwrap()).collect();
            assert!(r[99] < 1e-6, "seed {seed}: {:e}", r[99]);
            assert!(r[99] < 1e-3 * r[0]);
        }
    }

    #[test]
    fn gap_tv_with_zero_weight_is_identity_pnp() {
        let op = gaussian_op(5, 5, 3, 40);
        let y = op.apply_h(&synth::moving_square(5, 5, 3)).unwrap();
        let (a, _) = gap_tv_reconstruct(&op, &y, 10, 0.0).unwrap();
        let mut cfg = SolverConfig::pnp_gap(DenoiserStage::Identity, 10);
        cfg.accelerate = true;
        let (b, _) = pnp_gap_reconstruct(&op, &y, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn config_validation() {
        let op = gaussian_op(2, 2, 2, 50);
        let y = Frame2D::zeros(2, 2);
        let mut cfg = SolverConfig::gap_net(vec![DenoiserStage::Identity; 2]);
        cfg.stages = 3;
        assert!(gap_net_reconstruct(&op, &y, &cfg).is_err());
        let cfg = SolverConfig::admm_net(vec![DenoiserStage::Identity], 0.0);
        assert_eq!(admm_net_reconstruct(&op, &y, &cfg).unwrap_err(), SciError::NonPositiveGamma(0.0));
        let cfg = SolverConfig::new(Algorithm::GapNet, 1, Stages::Shared(DenoiserStage::Identity));
        assert!(gap_net_reconstruct(&op, &y, &cfg).is_err());
        let cfg = SolverConfig::gap_net(vec![]);
        assert!(gap_net_reconstruct(&op, &y, &cfg).is_err());
        assert!(gap_net_reconstruct(&op, &Frame2D::zeros(3, 2), &SolverConfig::gap_net(vec![DenoiserStage::Identity])).is_err());
    }
}
