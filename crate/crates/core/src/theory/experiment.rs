//! Contraction experiment: GAP-net with subspace-oracle decoders on Gaussian
//! operators, compared against the per-stage bound `2(λ+α_k)`.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::denoise::{DenoiserStage, SubspaceBasis};
use crate::error::{Result, SciError};
use crate::math;
use crate::operator::ProjectionScale;
use crate::rng;
use crate::solvers::{gap_net_reconstruct, SolverConfig};
use crate::operator::SciOperator;
use crate::tensor::{DataCube, Frame2D};

use super::{alpha, contraction_factor, failure_probability, sample_gaussian_operator, GammaForm, StageParams, TheoremParams};

/// Errors below this fraction of `‖x*‖` are treated as converged to roundoff
/// when counting monotone transitions.
pub const ROUNDOFF_FLOOR: f64 = 1e-12;

/// Stages skipped before monotonicity is counted.
pub const BURN_IN: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct ContractionSetup {
    pub nx: usize,
    pub ny: usize,
    pub bands: usize,
    /// Subspace dimension `η`.
    pub eta: usize,
    pub stages: usize,
    pub trials: usize,
    pub seed: u64,
    pub lambda: f64,
    /// Surrogate covering distortion; the oracle decoders have `δ = 0`.
    pub delta: f64,
    pub zeta: f64,
    pub rho: f64,
    /// Relative error that counts as converged.
    pub tolerance: f64,
}

impl Default for ContractionSetup {
    fn default() -> Self {
        Self {
            nx: 16,
            ny: 16,
            bands: 4,
            eta: 5,
            stages: 30,
            trials: 100,
            seed: 0,
            lambda: 0.2,
            delta: 1e-3,
            zeta: 0.95,
            rho: 1.0,
            tolerance: 1e-6,
        }
    }
}

impl ContractionSetup {
    pub fn theorem_params(&self) -> TheoremParams {
        let stage = StageParams { eta: self.eta, lipschitz: 1.0, delta: self.delta, bits: None };
        TheoremParams::uniform(self.nx * self.ny, self.bands, stage, self.stages, self.zeta, self.lambda, self.rho)
    }

    pub fn validate(&self) -> Result<()> {
        let dims = self.nx * self.ny * self.bands;
        if dims == 0 || self.eta == 0 || self.eta > dims || self.stages == 0 || self.trials == 0 {
            return Err(SciError::InvalidConfig(alloc::format!(
                "need positive dims, 1 <= eta <= nB, stages >= 1, trials >= 1 (eta={}, nB={dims})",
                self.eta
            )));
        }
        let p = self.theorem_params();
        p.validate()?;
        let a = p.alpha(0)?;
        if !(self.lambda < 0.5 - a) {
            return Err(SciError::InvalidConfig(alloc::format!(
                "lambda={} must lie in (0, 0.5 - alpha) with alpha={a}",
                self.lambda
            )));
        }
        Ok(())
    }

    fn alpha(&self) -> Result<f64> {
        alpha(self.theorem_params().gamma(0, GammaForm::Distortion), self.bands)
    }
}

/// Stage `k ≥ 1` of one trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageObservation {
    pub stage: usize,
    /// `‖v⁽ᵏ⁾ − x*‖`.
    pub error: f64,
    /// `‖v⁽ᵏ⁾ − ṽ_k‖` with `ṽ_k` the decoder's closest point to `x*`.
    pub tilde_error: f64,
    /// `‖v⁽ᵏ⁾ − x*‖ / ‖v⁽ᵏ⁻¹⁾ − x*‖`.
    pub ratio: f64,
    /// `‖v⁽ᵏ⁾ − ṽ_k‖ / ‖v⁽ᵏ⁻¹⁾ − ṽ_{k−1}‖`.
    pub tilde_ratio: f64,
    /// Both distance preconditions `‖·‖/√(nB) ≥ δ` hold.
    pub preconditions: bool,
    /// `tilde_ratio > 2(λ+α)` while the preconditions hold.
    pub ratio_violation: bool,
    /// The bound including its additive distortion terms fails while the preconditions hold.
    pub bound_violation: bool,
    /// Both errors are below the roundoff floor.
    pub at_floor: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub trial: usize,
    pub initial_error: f64,
    pub final_relative_error: f64,
    pub converged: bool,
    pub observations: Vec<StageObservation>,
    /// Transitions counted for monotonicity (after burn-in).
    pub transitions: usize,
    pub monotone: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContractionReport {
    pub setup: ContractionSetup,
    pub gamma: f64,
    pub alpha: f64,
    pub factor: f64,
    pub failure_probability: f64,
    pub converged: usize,
    pub transitions: usize,
    pub monotone: usize,
    pub checked_stages: usize,
    pub ratio_violations: usize,
    pub bound_violations: usize,
    /// Stages after burn-in whose errors are above the roundoff floor; the
    /// ratio statistics below cover these stages only.
    pub ratio_count: usize,
    pub ratios_below_one: usize,
    pub median_ratio: f64,
    pub max_ratio: f64,
    pub worst_final_error: f64,
    /// Largest error ratio seen during burn-in.
    pub burn_in_max_ratio: f64,
    pub trials: Vec<TrialOutcome>,
}

impl ContractionReport {
    pub fn monotone_fraction(&self) -> f64 {
        fraction(self.monotone, self.transitions)
    }

    pub fn violation_fraction(&self) -> f64 {
        fraction(self.ratio_violations, self.checked_stages)
    }

    pub fn bound_violation_fraction(&self) -> f64 {
        fraction(self.bound_violations, self.checked_stages)
    }

    pub fn below_one_fraction(&self) -> f64 {
        fraction(self.ratios_below_one, self.ratio_count)
    }
}

fn fraction(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl fmt::Display for ContractionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = &self.setup;
        writeln!(f, "experiment=contraction")?;
        writeln!(f, "nx={}\nny={}\nbands={}\neta={}\nstages={}\ntrials={}\nseed={}", s.nx, s.ny, s.bands, s.eta, s.stages, s.trials, s.seed)?;
        writeln!(f, "lambda={}\ndelta={}\nzeta={}\nrho={}", s.lambda, s.delta, s.zeta, s.rho)?;
        writeln!(f, "gamma={:e}\nalpha={}\ncontraction_factor={}", self.gamma, self.alpha, self.factor)?;
        writeln!(f, "converged={}\nworst_final_relative_error={:e}", self.converged, self.worst_final_error)?;
        writeln!(f, "transitions={}\nmonotone_transitions={}\nmonotone_fraction={}", self.transitions, self.monotone, self.monotone_fraction())?;
        writeln!(f, "checked_stages={}\nratio_violations={}\nviolation_fraction={}", self.checked_stages, self.ratio_violations, self.violation_fraction())?;
        writeln!(f, "bound_violations={}\nbound_violation_fraction={}", self.bound_violations, self.bound_violation_fraction())?;
        writeln!(f, "failure_probability={}", self.failure_probability)?;
        writeln!(f, "burn_in_max_ratio={}", self.burn_in_max_ratio)?;
        writeln!(f, "median_ratio={}\nmax_ratio={}\nratios_below_one_fraction={}", self.median_ratio, self.max_ratio, self.below_one_fraction())
    }
}

/// Problem data of one trial: Gaussian operator, oracle subspace, a signal
/// with latent coordinates uniform in `[-1, 1]^η`, and its measurement.
#[derive(Debug, Clone)]
pub struct ContractionInstance {
    pub op: SciOperator,
    pub basis: SubspaceBasis,
    pub truth: DataCube,
    pub y: Frame2D,
}

/// Seeds derive from `(setup.seed, trial)`.
pub fn contraction_instance(setup: &ContractionSetup, trial: usize) -> Result<ContractionInstance> {
    let dims = (setup.nx, setup.ny, setup.bands);
    let root = rng::derive_seed(setup.seed, trial as u64);
    let op = sample_gaussian_operator(setup.nx, setup.ny, setup.bands, rng::derive_seed(root, 0));
    let basis = SubspaceBasis::random(dims, setup.eta, rng::derive_seed(root, 1))?;
    let mut r = rng::seeded(rng::derive_seed(root, 2));
    let latent: Vec<f64> = (0..setup.eta).map(|_| rng::uniform(&mut r, -1.0, 1.0)).collect();
    let truth = DataCube::from_vec(setup.nx, setup.ny, setup.bands, basis.synthesize(&latent))?;
    let y = op.apply_h(&truth)?;
    Ok(ContractionInstance { op, basis, truth, y })
}

/// One independent trial on [`contraction_instance`].
pub fn run_contraction_trial(setup: &ContractionSetup, trial: usize) -> Result<TrialOutcome> {
    setup.validate()?;
    let ContractionInstance { op, basis, truth, y } = contraction_instance(setup, trial)?;

    let mut cfg = SolverConfig::gap_net(vec![DenoiserStage::Subspace(basis.clone()); setup.stages]).with_scale(ProjectionScale::Bands);
    cfg.record_iterates = true;
    let (_, trace) = gap_net_reconstruct(&op, &y, &cfg)?;
    let iterates: Vec<&DataCube> = trace.stages.iter().map(|s| s.iterate.as_ref().expect("iterates recorded")).collect();

    // All stages share one decoder, so the closest in-range point is the same each stage.
    let tilde = basis.project(&truth)?;
    let scale = math::sqrt((setup.nx * setup.ny * setup.bands) as f64);
    let norm = truth.norm();
    let floor = ROUNDOFF_FLOOR * norm;
    let a = setup.alpha()?;
    let factor = contraction_factor(setup.lambda, a);
    let additive = (setup.lambda + a) * 2.0 * setup.delta + 2.0 * setup.bands as f64 * setup.delta;

    let errors: Vec<f64> = iterates.iter().map(|v| v.distance(&truth)).collect();
    let tilde_errors: Vec<f64> = iterates.iter().map(|v| v.distance(&tilde)).collect();
    let mut observations = Vec::with_capacity(setup.stages);
    let (mut transitions, mut monotone) = (0, 0);
    for k in 1..=setup.stages {
        let preconditions = tilde_errors[k] / scale >= setup.delta && iterates[k - 1].distance(&tilde) / scale >= setup.delta;
        let tilde_ratio = tilde_errors[k] / tilde_errors[k - 1];
        let bound = 2.0 / scale * (setup.lambda + a) * tilde_errors[k - 1] + additive;
        let at_floor = errors[k] < floor && errors[k - 1] < floor;
        observations.push(StageObservation {
            stage: k,
            error: errors[k],
            tilde_error: tilde_errors[k],
            ratio: errors[k] / errors[k - 1],
            tilde_ratio,
            preconditions,
            ratio_violation: preconditions && tilde_ratio > factor,
            bound_violation: preconditions && tilde_errors[k] / scale > bound,
            at_floor,
        });
        if k > BURN_IN {
            transitions += 1;
            if errors[k] <= errors[k - 1] || at_floor {
                monotone += 1;
            }
        }
    }
    let final_relative_error = if norm > 0.0 { errors[setup.stages] / norm } else { errors[setup.stages] };
    Ok(TrialOutcome {
        trial,
        initial_error: errors[0],
        final_relative_error,
        converged: final_relative_error <= setup.tolerance,
        observations,
        transitions,
        monotone,
    })
}

/// Folds trial outcomes (in any order) into a report.
pub fn aggregate_contraction(setup: &ContractionSetup, mut trials: Vec<TrialOutcome>) -> Result<ContractionReport> {
    setup.validate()?;
    trials.sort_by_key(|t| t.trial);
    let params = setup.theorem_params();
    let gamma = params.gamma(0, GammaForm::Distortion);
    let a = setup.alpha()?;
    let mut ratios = Vec::new();
    let mut rep = ContractionReport {
        setup: setup.clone(),
        gamma,
        alpha: a,
        factor: contraction_factor(setup.lambda, a),
        failure_probability: failure_probability(&params)?,
        converged: 0,
        transitions: 0,
        monotone: 0,
        checked_stages: 0,
        ratio_violations: 0,
        bound_violations: 0,
        ratio_count: 0,
        ratios_below_one: 0,
        median_ratio: f64::NAN,
        max_ratio: f64::NAN,
        worst_final_error: 0.0,
        burn_in_max_ratio: 0.0,
        trials: Vec::new(),
    };
    for t in &trials {
        rep.converged += t.converged as usize;
        rep.transitions += t.transitions;
        rep.monotone += t.monotone;
        rep.worst_final_error = rep.worst_final_error.max(t.final_relative_error);
        for o in &t.observations {
            rep.checked_stages += o.preconditions as usize;
            rep.ratio_violations += o.ratio_violation as usize;
            rep.bound_violations += o.bound_violation as usize;
            if o.stage <= BURN_IN {
                rep.burn_in_max_ratio = rep.burn_in_max_ratio.max(o.ratio);
            } else if !o.at_floor {
                ratios.push(o.ratio);
                rep.ratios_below_one += (o.ratio < 1.0) as usize;
            }
        }
    }
    rep.ratio_count = ratios.len();
    if !ratios.is_empty() {
        ratios.sort_by(f64::total_cmp);
        rep.median_ratio = ratios[ratios.len() / 2];
        rep.max_ratio = ratios[ratios.len() - 1];
    }
    rep.trials = trials;
    Ok(rep)
}

/// Runs every trial sequentially and aggregates.
pub fn run_contraction_experiment(setup: &ContractionSetup) -> Result<ContractionReport> {
    let trials = (0..setup.trials).map(|t| run_contraction_trial(setup, t)).collect::<Result<Vec<_>>>()?;
    aggregate_contraction(setup, trials)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    #[test]
    fn full_subspace_single_band_recovers_in_one_stage() {
        let setup = ContractionSetup { nx: 4, ny: 4, bands: 1, eta: 16, stages: 1, trials: 3, delta: 1e-6, ..Default::default() };
        let rep = run_contraction_experiment(&setup).unwrap();
        assert_eq!(rep.converged, 3);
        for t in &rep.trials {
            assert!(t.final_relative_error <= 1e-12);
        }
    }

    #[test]
    fn default_regime_contracts() {
        let setup = ContractionSetup { trials: 10, ..Default::default() };
        let rep = run_contraction_experiment(&setup).unwrap();
        assert_eq!(rep.converged, 10);
        assert!(rep.monotone_fraction() >= 0.95);
        assert!(rep.violation_fraction() <= rep.failure_probability);
        assert!(rep.median_ratio < rep.factor);
    }

    #[test]
    fn near_critical_lambda_keeps_ratios_below_one() {
        let a = ContractionSetup::default().alpha().unwrap();
        let setup = ContractionSetup { trials: 10, lambda: 0.5 - a - 1e-3, ..Default::default() };
        let rep = run_contraction_experiment(&setup).unwrap();
        assert!((rep.factor - 1.0).abs() < 1e-2);
        assert!(rep.below_one_fraction() >= 0.95, "{rep}");
    }

    #[test]
    fn trial_order_does_not_matter() {
        let setup = ContractionSetup { trials: 4, stages: 5, ..Default::default() };
        let mut trials: Vec<_> = (0..4).map(|t| run_contraction_trial(&setup, t).unwrap()).collect();
        let a = aggregate_contraction(&setup, trials.clone()).unwrap();
        trials.reverse();
        assert_eq!(a, aggregate_contraction(&setup, trials).unwrap());
        assert_eq!(a, run_contraction_experiment(&setup).unwrap());
    }

    #[test]
    fn setup_rejects_inadmissible_lambda() {
        let setup = ContractionSetup { lambda: 0.4, ..Default::default() };
        assert!(setup.validate().is_err());
        let setup = ContractionSetup { zeta: 0.5, ..Default::default() };
        assert!(setup.validate().is_err());
    }

    #[test]
    fn report_renders_key_values() {
        let setup = ContractionSetup { trials: 2, stages: 3, ..Default::default() };
        let text = run_contraction_experiment(&setup).unwrap().to_string();
        for line in text.lines() {
            let (k, v) = line.split_once('=').unwrap();
            assert!(!k.is_empty() && !v.is_empty());
        }
        assert!(text.contains("monotone_fraction="));
    }
}
