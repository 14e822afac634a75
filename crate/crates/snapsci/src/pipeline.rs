//! Forward simulation and reconstruction shared by the subcommands.

use std::time::Instant;

use sci_core::denoise::{DenoiserStage, TvParams};
use sci_core::forward::{self, NoiseSpec, SpectralGeometry};
use sci_core::operator::SciOperator;
use sci_core::rng;
use sci_core::solvers::{self, gap_tv_config, Algorithm, ReconTrace, SolverConfig, Stages};
use sci_core::synth;
use sci_core::{DataCube, Frame2D, MaskSet};

use crate::config::{DenoiserKind, MaskKind, Model, RunConfig, DEFAULT_ITERATIONS};
use crate::error::{AppError, AppResult};
use crate::io;

/// Video masks are one cube per measurement; a spectral system has one aperture.
#[derive(Debug, Clone, PartialEq)]
pub enum Coding {
    Video(MaskSet),
    Spectral(Frame2D),
}

impl Coding {
    pub fn load(cfg: &RunConfig, path: &std::path::Path) -> AppResult<Self> {
        Ok(match cfg.model {
            Model::Video => Coding::Video(MaskSet::new(io::read_cube(path)?)),
            Model::Spectral => Coding::Spectral(io::read_frame(path)?),
        })
    }

    /// Random masks for a scene of `dims` (`bands` ignored for spectral).
    pub fn generate(cfg: &RunConfig, kind: MaskKind, dims: (usize, usize, usize), seed: u64) -> AppResult<Self> {
        let (nx, ny, nb) = dims;
        let bands = if cfg.model == Model::Spectral { 1 } else { nb };
        let masks = match kind {
            MaskKind::Bernoulli => synth::bernoulli_masks(nx, ny, bands, cfg.mask_p, seed)?,
            MaskKind::Gaussian => synth::gaussian_masks(nx, ny, bands, seed),
            MaskKind::Crop => return Err(AppError::validation("crop masks must be made with make-masks")),
        };
        Ok(match cfg.model {
            Model::Video => Coding::Video(masks),
            Model::Spectral => Coding::Spectral(masks.slice(0)),
        })
    }

    pub fn write(&self, path: &std::path::Path) -> AppResult<()> {
        match self {
            Coding::Video(m) => io::write_cube(path, m.as_cube()),
            Coding::Spectral(f) => io::write_frame(path, f),
        }
    }
}

pub fn geometry(cfg: &RunConfig) -> SpectralGeometry {
    SpectralGeometry::new(cfg.n_lambda, cfg.shift_step)
}

pub fn noise(cfg: &RunConfig, seed: u64) -> AppResult<NoiseSpec> {
    if cfg.noise_sigma > 0.0 {
        Ok(NoiseSpec::gaussian(cfg.noise_sigma, seed)?)
    } else {
        Ok(NoiseSpec::none())
    }
}

pub fn measure(cfg: &RunConfig, truth: &DataCube, coding: &Coding, noise: &NoiseSpec) -> AppResult<Frame2D> {
    Ok(match coding {
        Coding::Video(m) => forward::video_forward(truth, m, noise)?,
        Coding::Spectral(a) => {
            if truth.bands() != cfg.n_lambda {
                return Err(AppError::validation(format!(
                    "spectral scene has {} channels but n_lambda={}",
                    truth.bands(),
                    cfg.n_lambda
                )));
            }
            forward::spectral_forward(truth, a, &geometry(cfg), noise)?
        }
    })
}

/// Solver configuration for `cfg`; `reference` enables per-stage PSNR.
pub fn solver_config(cfg: &RunConfig, reference: Option<DataCube>) -> AppResult<SolverConfig> {
    let k = cfg.stages_or(DEFAULT_ITERATIONS);
    let mut sc = if cfg.algorithm == Algorithm::GapTv {
        let mut c = gap_tv_config(k, cfg.tv_weight);
        if let Stages::Shared(DenoiserStage::Tv(p)) = &mut c.denoisers {
            p.iters = cfg.tv_iters;
        }
        c
    } else {
        let stages = match cfg.denoiser {
            DenoiserKind::Identity => Stages::Shared(DenoiserStage::Identity),
            DenoiserKind::Tv => Stages::Shared(DenoiserStage::Tv(TvParams { weight: cfg.tv_weight, iters: cfg.tv_iters })),
            DenoiserKind::Network => {
                let nets = cfg.weights.iter().map(|p| io::read_weights(p).map(DenoiserStage::Network)).collect::<AppResult<Vec<_>>>()?;
                if nets.len() == 1 && k > 1 {
                    Stages::Shared(nets.into_iter().next().expect("one network"))
                } else {
                    Stages::PerStage(nets)
                }
            }
        };
        let stages = match (cfg.algorithm, stages) {
            (Algorithm::GapNet | Algorithm::AdmmNet, Stages::Shared(d)) => Stages::PerStage(vec![d; k]),
            (_, s) => s,
        };
        let mut c = SolverConfig::new(cfg.algorithm, k, stages);
        c.gamma = cfg.gamma;
        c.accelerate = cfg.accelerate;
        c
    };
    sc.projection_scale = cfg.projection_scale;
    sc.peak = cfg.peak;
    sc.reference = reference;
    Ok(sc)
}

pub struct Reconstruction {
    pub cube: DataCube,
    pub trace: ReconTrace,
    pub seconds: f64,
}

/// Solves for the scene. Spectral measurements are solved on the sheared
/// cube and unsheared at the end; `truth` is the unsheared scene.
pub fn reconstruct(cfg: &RunConfig, y: &Frame2D, coding: &Coding, truth: Option<&DataCube>) -> AppResult<Reconstruction> {
    let start = Instant::now();
    let (op, reference) = match coding {
        Coding::Video(m) => (SciOperator::new(m.clone()), truth.cloned()),
        Coding::Spectral(a) => {
            let geom = geometry(cfg);
            let reference = truth.map(|t| forward::shear(t, &geom)).transpose()?;
            (SciOperator::new(forward::build_shifted_masks(a, &geom)), reference)
        }
    };
    let sc = solver_config(cfg, reference)?;
    let (v, trace) = solvers::reconstruct(&op, y, &sc)?;
    let cube = match coding {
        Coding::Video(_) => v,
        Coding::Spectral(_) => forward::unshear(&v, &geometry(cfg))?,
    };
    Ok(Reconstruction { cube, trace, seconds: start.elapsed().as_secs_f64() })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scores {
    pub psnr: f64,
    pub ssim: f64,
}

pub fn score(cfg: &RunConfig, estimate: &DataCube, truth: &DataCube) -> AppResult<Scores> {
    let psnr = if cfg.psnr { solvers::psnr(estimate, truth, cfg.peak)? } else { f64::NAN };
    let ssim = if cfg.ssim { solvers::metrics::ssim_with_range(estimate, truth, cfg.peak)? } else { f64::NAN };
    Ok(Scores { psnr, ssim })
}

/// Per-scene noise seed derived from the root seed.
pub fn scene_seed(cfg: &RunConfig, index: usize) -> u64 {
    rng::derive_seed(cfg.seed, index as u64)
}
