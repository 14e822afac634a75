//! Subcommand bodies. Each returns the text printed on stdout.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use sci_core::rng;
use sci_core::synth;
use sci_core::theory::{
    self, aggregate_contraction, run_contraction_trial, xi_statistics, ContractionReport, ContractionSetup, GammaForm,
};
use sci_core::DataCube;

use crate::config::{MaskKind, Mode, Model, RunConfig, SceneKind};
use crate::error::{AppError, AppResult};
use crate::io;
use crate::pipeline::{self, Coding};
use crate::table;

pub fn run(cfg: &RunConfig) -> AppResult<String> {
    cfg.validate()?;
    let job = || match cfg.mode {
        Mode::Simulate => simulate(cfg),
        Mode::Reconstruct => reconstruct(cfg),
        Mode::Benchmark => benchmark(cfg),
        Mode::VerifyTheory => verify_theory(cfg),
        Mode::MakeMasks => make_masks(cfg),
    };
    match cfg.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| AppError::validation(format!("threads: {e}")))?
            .install(job),
        None => job(),
    }
}

fn write_text(path: &Path, text: &str) -> AppResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| AppError::io(path, e))
}

/// `y.sct` → `y.<tag>.sct`.
fn companion(path: &Path, tag: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.{tag}.sct"))
}

fn load_truth(cfg: &RunConfig) -> AppResult<Option<DataCube>> {
    match cfg.truth.as_slice() {
        [] => Ok(None),
        [one] => io::read_cube(one).map(Some),
        many => io::read_frames(many).map(Some),
    }
}

fn synthetic_scene(cfg: &RunConfig) -> DataCube {
    let scene = cfg.scene.unwrap_or(match cfg.model {
        Model::Video => SceneKind::MovingSquare,
        Model::Spectral => SceneKind::SpectralBlocks,
    });
    let (nx, ny, nb) = match cfg.model {
        Model::Video => cfg.dims_or((32, 32, 8)),
        Model::Spectral => {
            let (nx, ny, _) = cfg.dims_or((256, 256, cfg.n_lambda));
            (nx, ny, cfg.n_lambda)
        }
    };
    match scene {
        SceneKind::MovingSquare => synth::moving_square(nx, ny, nb),
        SceneKind::SpectralBlocks => synth::spectral_blocks(nx, ny, nb),
    }
}

fn simulate(cfg: &RunConfig) -> AppResult<String> {
    let output = cfg.output.as_deref().expect("validated");
    let truth = match load_truth(cfg)? {
        Some(t) => t,
        None => synthetic_scene(cfg),
    };
    let (coding, generated) = match (&cfg.masks, cfg.mask_kind) {
        (Some(p), _) => (Coding::load(cfg, p)?, false),
        (None, Some(kind)) => (Coding::generate(cfg, kind, truth.dims(), rng::derive_seed(cfg.seed, 0))?, true),
        (None, None) => unreachable!("validated"),
    };
    let noise = pipeline::noise(cfg, rng::derive_seed(cfg.seed, 1))?;
    let y = pipeline::measure(cfg, &truth, &coding, &noise)?;
    io::write_frame(output, &y)?;
    let truth_path = cfg.truth_out.clone().unwrap_or_else(|| companion(output, "truth"));
    io::write_cube(&truth_path, &truth)?;
    let masks_path = if generated {
        let p = companion(output, "masks");
        coding.write(&p)?;
        p
    } else {
        cfg.masks.clone().expect("masks given")
    };
    let (nx, ny, nb) = truth.dims();
    let meta: Vec<(String, String)> = [
        ("model", cfg.model.as_str().to_string()),
        ("nx", nx.to_string()),
        ("ny", ny.to_string()),
        ("bands", nb.to_string()),
        ("measurement_nx", y.nx().to_string()),
        ("measurement_ny", y.ny().to_string()),
        ("n_lambda", cfg.n_lambda.to_string()),
        ("shift_step", cfg.shift_step.to_string()),
        ("noise", if cfg.noise_sigma > 0.0 { "gaussian" } else { "none" }.to_string()),
        ("noise_sigma", cfg.noise_sigma.to_string()),
        ("noise_seed", noise.seed.to_string()),
        ("seed", cfg.seed.to_string()),
        ("masks", masks_path.display().to_string()),
        ("truth", truth_path.display().to_string()),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect();
    io::write_meta(&io::sidecar_path(output), &meta)?;
    let mut out = format!("measurement={}\n", output.display());
    for (k, v) in &meta {
        let _ = writeln!(out, "{k}={v}");
    }
    Ok(out)
}

fn reconstruct(cfg: &RunConfig) -> AppResult<String> {
    let y = io::read_frame(cfg.measurement.as_deref().expect("validated"))?;
    let coding = Coding::load(cfg, cfg.masks.as_deref().expect("validated"))?;
    let truth = load_truth(cfg)?;
    let rec = pipeline::reconstruct(cfg, &y, &coding, truth.as_ref())?;
    let output = cfg.output.as_deref().expect("validated");
    io::write_cube(output, &rec.cube)?;

    let mut report = String::new();
    let sc = pipeline::solver_config(cfg, None)?;
    let _ = writeln!(report, "algorithm={}", sc.algorithm.name());
    let _ = writeln!(report, "stages={}", sc.stages);
    let _ = writeln!(report, "output={}", output.display());
    let _ = writeln!(report, "seconds_per_measurement={:.6}", rec.seconds);
    let residuals = rec.trace.residuals();
    let _ = writeln!(report, "final_residual={:e}", residuals.last().copied().unwrap_or(f64::NAN));
    let _ = writeln!(report, "residuals={}", residuals.iter().map(|r| format!("{r:e}")).collect::<Vec<_>>().join(","));
    if let Some(t) = &truth {
        let s = pipeline::score(cfg, &rec.cube, t)?;
        if cfg.psnr {
            let _ = writeln!(report, "psnr={}", table::num(s.psnr, 4));
        }
        if cfg.ssim {
            let _ = writeln!(report, "ssim={}", table::num(s.ssim, 4));
        }
    }
    if let Some(p) = &cfg.report {
        write_text(p, &report)?;
    }
    if let Some(p) = &cfg.csv {
        let rows: Vec<Vec<String>> = rec
            .trace
            .stages
            .iter()
            .enumerate()
            .map(|(k, s)| {
                vec![
                    k.to_string(),
                    format!("{:e}", s.residual),
                    s.psnr.map(|v| table::num(v, 4)).unwrap_or_default(),
                ]
            })
            .collect();
        write_text(p, &table::to_csv(&["stage", "residual", "psnr"], &rows))?;
    }
    Ok(report)
}

/// One benchmark scene: a truth cube plus optional per-scene mask and measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneFiles {
    pub name: String,
    pub truth: PathBuf,
    pub mask: Option<PathBuf>,
    pub measurement: Option<PathBuf>,
}

/// Scenes of a dataset directory plus its shared mask.
///
/// Either subdirectories holding `truth.sct` (and optionally `mask.sct`,
/// `meas.sct`), or a flat directory of truth cubes. A top-level `mask.sct`
/// is shared by scenes without their own.
pub fn discover(dir: &Path) -> AppResult<(Vec<SceneFiles>, Option<PathBuf>)> {
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| AppError::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| AppError::io(dir, err)))
        .collect::<AppResult<_>>()?;
    entries.sort();
    let shared = Some(dir.join("mask.sct")).filter(|p| p.is_file());
    let mut scenes = Vec::new();
    for p in &entries {
        let name = p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        if p.is_dir() {
            let truth = p.join("truth.sct");
            if truth.is_file() {
                scenes.push(SceneFiles {
                    name,
                    truth,
                    mask: Some(p.join("mask.sct")).filter(|m| m.is_file()),
                    measurement: Some(p.join("meas.sct")).filter(|m| m.is_file()),
                });
            }
        } else if p.extension().is_some_and(|e| e == "sct") && name != "mask.sct" {
            let stem = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            scenes.push(SceneFiles { name: stem, truth: p.clone(), mask: None, measurement: None });
        }
    }
    if scenes.is_empty() {
        return Err(AppError::EmptyDataset(dir.to_path_buf()));
    }
    Ok((scenes, shared))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneResult {
    pub name: String,
    pub psnr: f64,
    pub ssim: f64,
    pub seconds: f64,
}

fn run_scene(
    cfg: &RunConfig,
    index: usize,
    scene: &SceneFiles,
    mask_override: Option<&Coding>,
    shared: Option<&Coding>,
) -> AppResult<SceneResult> {
    let truth = io::read_cube(&scene.truth)?;
    let coding = match (mask_override, &scene.mask, shared) {
        (Some(c), _, _) => c.clone(),
        (None, Some(p), _) => Coding::load(cfg, p)?,
        (None, None, Some(c)) => c.clone(),
        (None, None, None) => {
            Coding::generate(cfg, cfg.mask_kind.unwrap_or(MaskKind::Bernoulli), truth.dims(), rng::derive_seed(cfg.seed, 0))?
        }
    };
    let y = match (&scene.measurement, mask_override) {
        (Some(p), None) => io::read_frame(p)?,
        _ => pipeline::measure(cfg, &truth, &coding, &pipeline::noise(cfg, pipeline::scene_seed(cfg, index))?)?,
    };
    let rec = pipeline::reconstruct(cfg, &y, &coding, None)?;
    let s = pipeline::score(cfg, &rec.cube, &truth)?;
    Ok(SceneResult { name: scene.name.clone(), psnr: s.psnr, ssim: s.ssim, seconds: rec.seconds })
}

/// Scenes in parallel, rows in directory order.
pub fn benchmark_scenes(cfg: &RunConfig, dir: &Path, mask_override: Option<&Coding>) -> AppResult<Vec<SceneResult>> {
    let (scenes, shared) = discover(dir)?;
    let shared = shared.map(|p| Coding::load(cfg, &p)).transpose()?;
    scenes.par_iter().enumerate().map(|(i, s)| run_scene(cfg, i, s, mask_override, shared.as_ref())).collect()
}

pub fn mean_row(rows: &[SceneResult]) -> SceneResult {
    let n = rows.len() as f64;
    SceneResult {
        name: "average".into(),
        psnr: rows.iter().map(|r| r.psnr).sum::<f64>() / n,
        ssim: rows.iter().map(|r| r.ssim).sum::<f64>() / n,
        seconds: rows.iter().map(|r| r.seconds).sum::<f64>() / n,
    }
}

fn benchmark(cfg: &RunConfig) -> AppResult<String> {
    let dir = cfg.dataset.as_deref().expect("validated");
    let mut rows = benchmark_scenes(cfg, dir, None)?;
    let mean = mean_row(&rows);
    rows.push(mean.clone());
    let header = ["scene", "psnr_db", "ssim", "seconds"];
    let cells: Vec<Vec<String>> =
        rows.iter().map(|r| vec![r.name.clone(), table::num(r.psnr, 2), table::num(r.ssim, 4), table::num(r.seconds, 3)]).collect();
    let mut out = table::to_aligned(&header, &cells);
    if let Some(p) = &cfg.csv {
        let full: Vec<Vec<String>> =
            rows.iter().map(|r| vec![r.name.clone(), r.psnr.to_string(), r.ssim.to_string(), r.seconds.to_string()]).collect();
        write_text(p, &table::to_csv(&header, &full))?;
    }
    if !cfg.alt_masks.is_empty() {
        let mut alt = Vec::new();
        for p in &cfg.alt_masks {
            let coding = Coding::load(cfg, p)?;
            let m = mean_row(&benchmark_scenes(cfg, dir, Some(&coding))?);
            alt.push(vec![p.display().to_string(), table::num(m.psnr, 2), table::num(m.psnr - mean.psnr, 2)]);
        }
        out.push('\n');
        out += &table::to_aligned(&["mask", "psnr_db", "delta_db"], &alt);
    }
    Ok(out)
}

fn contraction_setup(cfg: &RunConfig) -> ContractionSetup {
    let (nx, ny, bands) = cfg.dims_or((16, 16, 4));
    ContractionSetup {
        nx,
        ny,
        bands,
        eta: cfg.eta,
        stages: cfg.stages_or(30),
        trials: cfg.trials,
        seed: cfg.seed,
        lambda: cfg.lambda,
        delta: cfg.delta,
        zeta: cfg.zeta,
        rho: cfg.rho,
        tolerance: 1e-6,
    }
}

/// Trials in parallel; the result is independent of the thread count.
pub fn contraction_parallel(setup: &ContractionSetup) -> AppResult<ContractionReport> {
    setup.validate()?;
    let trials = (0..setup.trials).into_par_iter().map(|t| run_contraction_trial(setup, t)).collect::<Result<Vec<_>, _>>()?;
    Ok(aggregate_contraction(setup, trials)?)
}

fn random_unit(dims: (usize, usize, usize), seed: u64) -> DataCube {
    let mut r = rng::seeded(seed);
    let v = DataCube::from_vec(dims.0, dims.1, dims.2, rng::normal_vec(&mut r, dims.0 * dims.1 * dims.2)).expect("sized");
    v.scaled(1.0 / v.norm())
}

fn verify_theory(cfg: &RunConfig) -> AppResult<String> {
    let setup = contraction_setup(cfg);
    let report = contraction_parallel(&setup)?;
    let params = setup.theorem_params();
    let stage = params.stages[0];
    let mut out = report.to_string();
    let _ = writeln!(out, "gamma_quantized={:e}", params.gamma(0, GammaForm::Quantized));
    let _ = writeln!(out, "quantization_bits={}", theory::distortion_bits(stage.delta, params.zeta));

    let dims = (setup.nx, setup.ny, setup.bands);
    let e = random_unit(dims, rng::derive_seed(cfg.seed, 101));
    let e2 = random_unit(dims, rng::derive_seed(cfg.seed, 102));
    let xi = xi_statistics(&e, &e2, cfg.xi_samples, &[0.1, 0.5, 1.0], rng::derive_seed(cfg.seed, 103))?;
    let _ = writeln!(out, "xi_samples={}\nxi_mean={:e}\nxi_std_error={:e}", xi.samples, xi.mean, xi.std_error);
    let _ = writeln!(out, "xi_max_bound_ratio={}\nxi_bound_violations={}", xi.max_bound_ratio, xi.bound_violations);
    for t in &xi.tails {
        let _ = writeln!(out, "xi_tail_{}={},{},{}", t.lambda, t.upper, t.lower, t.hoeffding);
    }
    let _ = writeln!(out, "xi_passed={}", xi.passed());

    if let Some(p) = &cfg.report {
        write_text(p, &out)?;
    }
    if let Some(p) = &cfg.csv {
        let rows: Vec<Vec<String>> = report
            .trials
            .iter()
            .flat_map(|t| {
                t.observations.iter().map(move |o| {
                    vec![
                        t.trial.to_string(),
                        o.stage.to_string(),
                        o.error.to_string(),
                        o.ratio.to_string(),
                        o.tilde_ratio.to_string(),
                        o.preconditions.to_string(),
                        o.ratio_violation.to_string(),
                    ]
                })
            })
            .collect();
        let header = ["trial", "stage", "error", "ratio", "tilde_ratio", "preconditions", "ratio_violation"];
        write_text(p, &table::to_csv(&header, &rows))?;
    }
    Ok(out)
}

fn make_masks(cfg: &RunConfig) -> AppResult<String> {
    let output = cfg.output.as_deref().expect("validated");
    let cube = match cfg.mask_kind.expect("validated") {
        MaskKind::Crop => {
            let source = io::read_cube(cfg.source.as_deref().expect("validated"))?;
            synth::crop(&source, cfg.crop_offset, cfg.crop_size.expect("validated"))?
        }
        kind => {
            let dims = cfg.dims_or((32, 32, 8));
            match Coding::generate(cfg, kind, dims, cfg.seed)? {
                Coding::Video(m) => m.into_cube(),
                Coding::Spectral(f) => DataCube::from_slices(&[f])?,
            }
        }
    };
    if cube.bands() == 1 {
        io::write_frame(output, &cube.slice(0))?;
    } else {
        io::write_cube(output, &cube)?;
    }
    let (nx, ny, nb) = cube.dims();
    let mean = cube.as_slice().iter().sum::<f64>() / cube.len() as f64;
    Ok(format!("masks={}\nnx={nx}\nny={ny}\nbands={nb}\nmean={mean}\n", output.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn companion_names() {
        assert_eq!(companion(Path::new("d/y.sct"), "truth"), PathBuf::from("d/y.truth.sct"));
    }

    #[test]
    fn mean_row_is_arithmetic_mean() {
        let rows: Vec<SceneResult> = (0..4)
            .map(|i| SceneResult { name: i.to_string(), psnr: i as f64, ssim: 0.1 * i as f64, seconds: 1.0 })
            .collect();
        let m = mean_row(&rows);
        assert_eq!(m.psnr, 1.5);
        assert!((m.ssim - 0.15).abs() < 1e-15);
        assert_eq!(m.seconds, 1.0);
    }

    #[test]
    fn empty_dataset_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(discover(dir.path()), Err(AppError::EmptyDataset(_))));
    }

    #[test]
    fn parallel_contraction_matches_sequential() {
        let setup = ContractionSetup { trials: 6, stages: 8, ..Default::default() };
        assert_eq!(contraction_parallel(&setup).unwrap(), theory::run_contraction_experiment(&setup).unwrap());
    }
}
