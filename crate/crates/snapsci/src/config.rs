//! Flat `key=value` run configuration shared by the config file and CLI flags.

use std::fmt::Display;
use std::path::PathBuf;
use std::str::FromStr;

use sci_core::operator::ProjectionScale;
use sci_core::solvers::Algorithm;

use crate::error::{AppError, AppResult};
use crate::io::parse_key_values;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Simulate,
    Reconstruct,
    Benchmark,
    VerifyTheory,
    MakeMasks,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Model {
    Video,
    Spectral,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DenoiserKind {
    Identity,
    Tv,
    Network,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskKind {
    Bernoulli,
    Gaussian,
    Crop,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SceneKind {
    MovingSquare,
    SpectralBlocks,
}

macro_rules! named_enum {
    ($t:ty { $($v:path => $s:literal),+ $(,)? }) => {
        impl FromStr for $t {
            type Err = String;
            fn from_str(s: &str) -> Result<Self, String> {
                match s {
                    $($s => Ok($v),)+
                    _ => Err(format!("expected one of {}", [$($s),+].join("|"))),
                }
            }
        }
        impl $t {
            pub fn as_str(&self) -> &'static str {
                match self { $($v => $s,)+ }
            }
        }
    };
}

named_enum!(Mode { Mode::Simulate => "simulate", Mode::Reconstruct => "reconstruct", Mode::Benchmark => "benchmark", Mode::VerifyTheory => "verify-theory", Mode::MakeMasks => "make-masks" });
named_enum!(Model { Model::Video => "video", Model::Spectral => "spectral" });
named_enum!(DenoiserKind { DenoiserKind::Identity => "identity", DenoiserKind::Tv => "tv", DenoiserKind::Network => "network" });
named_enum!(MaskKind { MaskKind::Bernoulli => "bernoulli", MaskKind::Gaussian => "gaussian", MaskKind::Crop => "crop" });
named_enum!(SceneKind { SceneKind::MovingSquare => "moving_square", SceneKind::SpectralBlocks => "spectral_blocks" });

/// Reconstruction iterations when `stages` is unset.
pub const DEFAULT_ITERATIONS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    pub truth: Vec<PathBuf>,
    pub masks: Option<PathBuf>,
    pub measurement: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub truth_out: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub csv: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
    pub alt_masks: Vec<PathBuf>,
    pub weights: Vec<PathBuf>,
    pub source: Option<PathBuf>,
    pub scene: Option<SceneKind>,
    pub nx: Option<usize>,
    pub ny: Option<usize>,
    pub bands: Option<usize>,
    pub model: Model,
    pub n_lambda: usize,
    pub shift_step: usize,
    pub noise_sigma: f64,
    pub seed: u64,
    pub mask_kind: Option<MaskKind>,
    pub mask_p: f64,
    pub crop_offset: (usize, usize),
    pub crop_size: Option<(usize, usize)>,
    pub algorithm: Algorithm,
    /// Defaults to 100 iterations for reconstruction and 30 stages for verify-theory.
    pub stages: Option<usize>,
    pub gamma: f64,
    pub projection_scale: ProjectionScale,
    pub accelerate: bool,
    pub denoiser: DenoiserKind,
    pub tv_weight: f64,
    pub tv_iters: usize,
    pub psnr: bool,
    pub ssim: bool,
    pub peak: f64,
    pub eta: usize,
    pub trials: usize,
    pub lambda: f64,
    pub delta: f64,
    pub zeta: f64,
    pub rho: f64,
    pub xi_samples: usize,
    pub threads: Option<usize>,
}

/// Every recognised key with a one-line description, in serialization order.
pub const KEYS: &[(&str, &str)] = &[
    ("mode", "simulate | reconstruct | benchmark | verify-theory | make-masks"),
    ("truth", "ground-truth cube (.sct) or comma-separated frames (.sct/.pgm)"),
    ("masks", "mask file: cube for video, frame for spectral"),
    ("measurement", "measurement frame (.sct)"),
    ("output", "output file"),
    ("truth_out", "where simulate copies the ground truth"),
    ("report", "key=value report file"),
    ("csv", "CSV output (benchmark rows, per-stage trace or contraction ratios)"),
    ("dataset", "benchmark directory"),
    ("alt_masks", "comma-separated alternative masks for the mask-flexibility comparison"),
    ("weights", "comma-separated SCW1 files, one per stage"),
    ("source", "mother mask to crop from"),
    ("scene", "synthetic scene: moving_square | spectral_blocks"),
    ("nx", "rows"),
    ("ny", "columns"),
    ("bands", "frames or spectral channels"),
    ("model", "video | spectral"),
    ("n_lambda", "spectral channels of the disperser"),
    ("shift_step", "column shift between adjacent channels"),
    ("noise_sigma", "Gaussian measurement noise standard deviation"),
    ("seed", "root seed"),
    ("mask_kind", "bernoulli | gaussian | crop"),
    ("mask_p", "Bernoulli probability of a one"),
    ("crop_offset", "row,col of the crop"),
    ("crop_size", "rows,cols of the crop"),
    ("algorithm", "gap_net | admm_net | gap_tv | pnp_gap"),
    ("stages", "stages K (iterations for gap_tv / pnp_gap)"),
    ("gamma", "ADMM penalty"),
    ("projection_scale", "1 or B"),
    ("accelerate", "accumulate residuals in the GAP projection"),
    ("denoiser", "identity | tv | network"),
    ("tv_weight", "TV weight"),
    ("tv_iters", "inner TV iterations"),
    ("psnr", "report PSNR when ground truth is available"),
    ("ssim", "report SSIM when ground truth is available"),
    ("peak", "PSNR peak value"),
    ("eta", "subspace dimension for verify-theory"),
    ("trials", "Monte Carlo trials for verify-theory"),
    ("lambda", "concentration slack"),
    ("delta", "covering distortion surrogate"),
    ("zeta", "distortion exponent"),
    ("rho", "amplitude bound"),
    ("xi_samples", "operators sampled for the X_i statistics"),
    ("threads", "worker threads (default: all cores)"),
];

impl RunConfig {
    pub fn new(mode: Mode) -> Self {
        Self {
            mode,
            truth: Vec::new(),
            masks: None,
            measurement: None,
            output: None,
            truth_out: None,
            report: None,
            csv: None,
            dataset: None,
            alt_masks: Vec::new(),
            weights: Vec::new(),
            source: None,
            scene: None,
            nx: None,
            ny: None,
            bands: None,
            model: Model::Video,
            n_lambda: 28,
            shift_step: 2,
            noise_sigma: 0.0,
            seed: 0,
            mask_kind: None,
            mask_p: 0.5,
            crop_offset: (0, 0),
            crop_size: None,
            algorithm: Algorithm::GapTv,
            stages: None,
            gamma: 1.0,
            projection_scale: ProjectionScale::Unit,
            accelerate: false,
            denoiser: DenoiserKind::Tv,
            tv_weight: 0.1,
            tv_iters: 20,
            psnr: true,
            ssim: true,
            peak: 1.0,
            eta: 5,
            trials: 100,
            lambda: 0.2,
            delta: 1e-3,
            zeta: 0.95,
            rho: 1.0,
            xi_samples: 10_000,
            threads: None,
        }
    }

    pub fn parse(text: &str) -> AppResult<Self> {
        let entries = parse_key_values(text).map_err(AppError::Validation)?;
        let mode = entries
            .iter()
            .find(|(k, _)| k == "mode")
            .map(|(_, v)| parse_value::<Mode>("mode", v))
            .transpose()?
            .ok_or_else(|| AppError::validation("config is missing `mode`"))?;
        let mut cfg = RunConfig::new(mode);
        for (k, v) in &entries {
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }

    /// Applies one `key=value` pair.
    pub fn set(&mut self, key: &str, value: &str) -> AppResult<()> {
        let v = value.trim();
        match key {
            "mode" => self.mode = parse_value(key, v)?,
            "truth" => self.truth = parse_paths(v),
            "masks" => self.masks = parse_path(v),
            "measurement" => self.measurement = parse_path(v),
            "output" => self.output = parse_path(v),
            "truth_out" => self.truth_out = parse_path(v),
            "report" => self.report = parse_path(v),
            "csv" => self.csv = parse_path(v),
            "dataset" => self.dataset = parse_path(v),
            "alt_masks" => self.alt_masks = parse_paths(v),
            "weights" => self.weights = parse_paths(v),
            "source" => self.source = parse_path(v),
            "scene" => self.scene = parse_opt(key, v)?,
            "nx" => self.nx = parse_opt(key, v)?,
            "ny" => self.ny = parse_opt(key, v)?,
            "bands" => self.bands = parse_opt(key, v)?,
            "model" => self.model = parse_value(key, v)?,
            "n_lambda" => self.n_lambda = parse_value(key, v)?,
            "shift_step" => self.shift_step = parse_value(key, v)?,
            "noise_sigma" => self.noise_sigma = parse_value(key, v)?,
            "seed" => self.seed = parse_value(key, v)?,
            "mask_kind" => self.mask_kind = parse_opt(key, v)?,
            "mask_p" => self.mask_p = parse_value(key, v)?,
            "crop_offset" => self.crop_offset = parse_pair(key, v)?,
            "crop_size" => self.crop_size = if v.is_empty() { None } else { Some(parse_pair(key, v)?) },
            "algorithm" => {
                self.algorithm = Algorithm::parse(v)
                    .ok_or_else(|| AppError::validation(format!("algorithm: expected gap_net|admm_net|gap_tv|pnp_gap, got {v:?}")))?
            }
            "stages" => self.stages = parse_opt(key, v)?,
            "gamma" => self.gamma = parse_value(key, v)?,
            "projection_scale" => {
                self.projection_scale = match v {
                    "1" | "unit" => ProjectionScale::Unit,
                    "B" | "b" | "bands" => ProjectionScale::Bands,
                    _ => return Err(AppError::validation(format!("projection_scale: expected 1 or B, got {v:?}"))),
                }
            }
            "accelerate" => self.accelerate = parse_bool(key, v)?,
            "denoiser" => self.denoiser = parse_value(key, v)?,
            "tv_weight" => self.tv_weight = parse_value(key, v)?,
            "tv_iters" => self.tv_iters = parse_value(key, v)?,
            "psnr" => self.psnr = parse_bool(key, v)?,
            "ssim" => self.ssim = parse_bool(key, v)?,
            "peak" => self.peak = parse_value(key, v)?,
            "eta" => self.eta = parse_value(key, v)?,
            "trials" => self.trials = parse_value(key, v)?,
            "lambda" => self.lambda = parse_value(key, v)?,
            "delta" => self.delta = parse_value(key, v)?,
            "zeta" => self.zeta = parse_value(key, v)?,
            "rho" => self.rho = parse_value(key, v)?,
            "xi_samples" => self.xi_samples = parse_value(key, v)?,
            "threads" => self.threads = parse_opt(key, v)?,
            _ => return Err(AppError::validation(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Every key with its current value; unset optional keys are omitted.
    pub fn entries(&self) -> Vec<(String, String)> {
        let mut out: Vec<(String, String)> = Vec::new();
        let mut put = |k: &str, v: String| out.push((k.to_string(), v));
        put("mode", self.mode.as_str().into());
        if !self.truth.is_empty() {
            put("truth", join_paths(&self.truth));
        }
        for (k, p) in [
            ("masks", &self.masks),
            ("measurement", &self.measurement),
            ("output", &self.output),
            ("truth_out", &self.truth_out),
            ("report", &self.report),
            ("csv", &self.csv),
            ("dataset", &self.dataset),
        ] {
            if let Some(p) = p {
                put(k, p.display().to_string());
            }
        }
        if !self.alt_masks.is_empty() {
            put("alt_masks", join_paths(&self.alt_masks));
        }
        if !self.weights.is_empty() {
            put("weights", join_paths(&self.weights));
        }
        if let Some(p) = &self.source {
            put("source", p.display().to_string());
        }
        if let Some(s) = self.scene {
            put("scene", s.as_str().into());
        }
        for (k, v) in [("nx", self.nx), ("ny", self.ny), ("bands", self.bands)] {
            if let Some(v) = v {
                put(k, v.to_string());
            }
        }
        put("model", self.model.as_str().into());
        put("n_lambda", self.n_lambda.to_string());
        put("shift_step", self.shift_step.to_string());
        put("noise_sigma", fmt_f64(self.noise_sigma));
        put("seed", self.seed.to_string());
        if let Some(m) = self.mask_kind {
            put("mask_kind", m.as_str().into());
        }
        put("mask_p", fmt_f64(self.mask_p));
        put("crop_offset", format!("{},{}", self.crop_offset.0, self.crop_offset.1));
        if let Some((a, b)) = self.crop_size {
            put("crop_size", format!("{a},{b}"));
        }
        put("algorithm", self.algorithm.name().into());
        if let Some(k) = self.stages {
            put("stages", k.to_string());
        }
        put("gamma", fmt_f64(self.gamma));
        put(
            "projection_scale",
            match self.projection_scale {
                ProjectionScale::Unit => "1".into(),
                ProjectionScale::Bands => "B".into(),
            },
        );
        put("accelerate", self.accelerate.to_string());
        put("denoiser", self.denoiser.as_str().into());
        put("tv_weight", fmt_f64(self.tv_weight));
        put("tv_iters", self.tv_iters.to_string());
        put("psnr", self.psnr.to_string());
        put("ssim", self.ssim.to_string());
        put("peak", fmt_f64(self.peak));
        put("eta", self.eta.to_string());
        put("trials", self.trials.to_string());
        put("lambda", fmt_f64(self.lambda));
        put("delta", fmt_f64(self.delta));
        put("zeta", fmt_f64(self.zeta));
        put("rho", fmt_f64(self.rho));
        put("xi_samples", self.xi_samples.to_string());
        if let Some(t) = self.threads {
            put("threads", t.to_string());
        }
        out
    }

    pub fn serialize(&self) -> String {
        self.entries().into_iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    /// Mode-specific required fields and value ranges.
    pub fn validate(&self) -> AppResult<()> {
        let need = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(AppError::validation(format!("{} requires {what}", self.mode.as_str())))
            }
        };
        let check = |ok: bool, msg: String| if ok { Ok(()) } else { Err(AppError::Validation(msg)) };
        check(self.gamma > 0.0, format!("gamma must be > 0, got {}", self.gamma))?;
        check(self.noise_sigma >= 0.0, format!("noise_sigma must be >= 0, got {}", self.noise_sigma))?;
        check((0.0..=1.0).contains(&self.mask_p), format!("mask_p must lie in [0, 1], got {}", self.mask_p))?;
        check(self.peak > 0.0, format!("peak must be > 0, got {}", self.peak))?;
        check(self.tv_weight >= 0.0, format!("tv_weight must be >= 0, got {}", self.tv_weight))?;
        check(self.n_lambda >= 1, "n_lambda must be >= 1".into())?;
        for (k, v) in [("nx", self.nx), ("ny", self.ny), ("bands", self.bands), ("stages", self.stages), ("threads", self.threads)] {
            check(v != Some(0), format!("{k} must be >= 1"))?;
        }
        match self.mode {
            Mode::Simulate => {
                need(self.output.is_some(), "output")?;
                need(self.masks.is_some() || self.mask_kind.is_some(), "masks or mask_kind")?;
                need(self.mask_kind != Some(MaskKind::Crop), "masks or a bernoulli/gaussian mask_kind")?;
            }
            Mode::Reconstruct => {
                need(self.measurement.is_some(), "measurement")?;
                need(self.masks.is_some(), "masks")?;
                need(self.output.is_some(), "output")?;
                self.validate_solver()?;
            }
            Mode::Benchmark => {
                need(self.dataset.is_some(), "dataset")?;
                self.validate_solver()?;
            }
            Mode::VerifyTheory => {
                check(self.trials >= 1, "trials must be >= 1".into())?;
                check(self.xi_samples >= 2, "xi_samples must be >= 2".into())?;
                check(self.zeta > 0.0 && self.zeta < 1.0, format!("zeta must lie in (0, 1), got {}", self.zeta))?;
                check(self.delta > 0.0, format!("delta must be > 0, got {}", self.delta))?;
                check(self.lambda > 0.0, format!("lambda must be > 0, got {}", self.lambda))?;
                check(self.rho > 0.0, format!("rho must be > 0, got {}", self.rho))?;
            }
            Mode::MakeMasks => {
                need(self.output.is_some(), "output")?;
                match self.mask_kind {
                    None => need(false, "mask_kind")?,
                    Some(MaskKind::Crop) => {
                        need(self.source.is_some(), "source for crop")?;
                        need(self.crop_size.is_some(), "crop_size for crop")?;
                    }
                    Some(_) => {}
                }
            }
        }
        Ok(())
    }

    fn validate_solver(&self) -> AppResult<()> {
        let unrolled = matches!(self.algorithm, Algorithm::GapNet | Algorithm::AdmmNet);
        let stages = self.stages_or(DEFAULT_ITERATIONS);
        if self.algorithm != Algorithm::GapTv && self.denoiser == DenoiserKind::Network {
            let n = self.weights.len();
            let ok = n == stages || (!unrolled && n == 1);
            if !ok {
                return Err(AppError::validation(format!(
                    "{} with network denoisers needs {} weight files, got {n}",
                    self.algorithm.name(),
                    if unrolled { stages.to_string() } else { format!("1 or {stages}") }
                )));
            }
        }
        Ok(())
    }

    pub fn stages_or(&self, default: usize) -> usize {
        self.stages.unwrap_or(default)
    }

    /// Frame count / channel count, falling back to a mode default.
    pub fn dims_or(&self, default: (usize, usize, usize)) -> (usize, usize, usize) {
        (self.nx.unwrap_or(default.0), self.ny.unwrap_or(default.1), self.bands.unwrap_or(default.2))
    }
}

fn fmt_f64(v: f64) -> String {
    // `{}` on f64 prints the shortest string that parses back to the same value.
    format!("{v}")
}

fn parse_value<T: FromStr>(key: &str, v: &str) -> AppResult<T>
where
    T::Err: Display,
{
    v.parse::<T>().map_err(|e| AppError::validation(format!("{key}: cannot parse {v:?}: {e}")))
}

fn parse_opt<T: FromStr>(key: &str, v: &str) -> AppResult<Option<T>>
where
    T::Err: Display,
{
    if v.is_empty() {
        Ok(None)
    } else {
        parse_value(key, v).map(Some)
    }
}

fn parse_bool(key: &str, v: &str) -> AppResult<bool> {
    match v {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(AppError::validation(format!("{key}: expected true or false, got {v:?}"))),
    }
}

fn parse_pair(key: &str, v: &str) -> AppResult<(usize, usize)> {
    let (a, b) = v.split_once(',').ok_or_else(|| AppError::validation(format!("{key}: expected a,b got {v:?}")))?;
    Ok((parse_value(key, a.trim())?, parse_value(key, b.trim())?))
}

fn parse_path(v: &str) -> Option<PathBuf> {
    (!v.is_empty()).then(|| PathBuf::from(v))
}

fn parse_paths(v: &str) -> Vec<PathBuf> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(PathBuf::from).collect()
}

fn join_paths(p: &[PathBuf]) -> String {
    p.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(",")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_key_is_settable_and_listed() {
        let mut cfg = RunConfig::new(Mode::Benchmark);
        for (k, _) in KEYS {
            let probe = match *k {
                "mode" => "benchmark",
                "scene" => "moving_square",
                "model" => "spectral",
                "mask_kind" => "crop",
                "algorithm" => "admm_net",
                "projection_scale" => "B",
                "denoiser" => "identity",
                "crop_offset" | "crop_size" => "3,4",
                "accelerate" | "psnr" | "ssim" => "false",
                "noise_sigma" | "mask_p" | "gamma" | "tv_weight" | "peak" | "lambda" | "delta" | "zeta" | "rho" => "0.25",
                "truth" | "alt_masks" | "weights" => "a.sct,b.sct",
                "masks" | "measurement" | "output" | "truth_out" | "report" | "csv" | "dataset" | "source" => "x/y.sct",
                _ => "7",
            };
            cfg.set(k, probe).unwrap_or_else(|e| panic!("{k}: {e}"));
        }
        let keys: Vec<String> = cfg.entries().into_iter().map(|(k, _)| k).collect();
        let expected: Vec<String> = KEYS.iter().map(|(k, _)| k.to_string()).collect();
        assert_eq!(keys, expected);
        assert_eq!(RunConfig::parse(&cfg.serialize()).unwrap(), cfg);
    }

    #[test]
    fn round_trip_defaults_and_floats() {
        let mut cfg = RunConfig::new(Mode::VerifyTheory);
        cfg.delta = 0.1 + 0.2;
        cfg.lambda = 1e-300;
        assert_eq!(RunConfig::parse(&cfg.serialize()).unwrap(), cfg);
    }

    #[test]
    fn parse_errors() {
        assert!(RunConfig::parse("seed=1").is_err());
        assert!(RunConfig::parse("mode=simulate\nbogus=1").is_err());
        assert!(RunConfig::parse("mode=simulate\nseed=-1").is_err());
        assert!(RunConfig::parse("mode=fly").is_err());
        assert!(RunConfig::parse("mode=simulate\nprojection_scale=3").is_err());
    }

    #[test]
    fn validation_is_mode_specific() {
        let mut cfg = RunConfig::new(Mode::Reconstruct);
        assert!(cfg.validate().is_err());
        cfg.measurement = Some("y.sct".into());
        cfg.masks = Some("m.sct".into());
        cfg.output = Some("x.sct".into());
        assert!(cfg.validate().is_ok());
        cfg.algorithm = Algorithm::GapNet;
        cfg.denoiser = DenoiserKind::Network;
        cfg.stages = Some(2);
        cfg.weights = vec!["w.scw1".into()];
        assert!(cfg.validate().is_err());
        cfg.weights.push("w2.scw1".into());
        assert!(cfg.validate().is_ok());
        cfg.gamma = 0.0;
        assert!(cfg.validate().is_err());

        let mut mm = RunConfig::new(Mode::MakeMasks);
        mm.output = Some("m.sct".into());
        mm.mask_kind = Some(MaskKind::Crop);
        assert!(mm.validate().is_err());
        mm.source = Some("mother.sct".into());
        mm.crop_size = Some((4, 4));
        assert!(mm.validate().is_ok());
        assert!(RunConfig::new(Mode::VerifyTheory).validate().is_ok());
    }
}
