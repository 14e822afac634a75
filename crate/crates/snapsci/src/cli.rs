//! Argument parsing. Every config key is also a `--flag` (underscores become
//! dashes); flags override values read from `--config`.

use std::ffi::OsString;
use std::fs;

use clap::{Arg, ArgMatches, Command};

use crate::commands;
use crate::config::{Mode, RunConfig, KEYS};
use crate::error::{AppError, AppResult, EXIT_OK, EXIT_VALIDATION};

const SUBCOMMANDS: [(Mode, &str); 5] = [
    (Mode::Simulate, "Simulate a coded measurement and write it with a metadata sidecar"),
    (Mode::Reconstruct, "Reconstruct a cube from a measurement and its masks"),
    (Mode::Benchmark, "Reconstruct every scene of a dataset and tabulate PSNR/SSIM/time"),
    (Mode::VerifyTheory, "Monte Carlo checks of the convergence bound"),
    (Mode::MakeMasks, "Generate or crop a mask set"),
];

fn flag(key: &str) -> String {
    key.replace('_', "-")
}

pub fn command() -> Command {
    let mut cmd = Command::new("snapsci")
        .about("Snapshot compressive imaging: simulation, reconstruction, benchmarks and theory checks")
        .subcommand_required(true)
        .arg_required_else_help(true);
    for (mode, about) in SUBCOMMANDS {
        let mut sub = Command::new(mode.as_str())
            .about(about)
            .arg(Arg::new("config").long("config").value_name("FILE").help("key=value config file"));
        for (key, help) in KEYS.iter().filter(|(k, _)| *k != "mode") {
            sub = sub.arg(Arg::new(*key).long(flag(key)).value_name("VALUE").help(*help));
        }
        cmd = cmd.subcommand(sub);
    }
    cmd
}

/// Builds the config for the chosen subcommand.
pub fn config_from_matches(m: &ArgMatches) -> AppResult<RunConfig> {
    let (name, sub) = m.subcommand().ok_or_else(|| AppError::validation("missing subcommand"))?;
    let mode: Mode = name.parse().map_err(AppError::Validation)?;
    let mut cfg = match sub.get_one::<String>("config") {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
            let mut c = if text.lines().any(|l| l.trim_start().starts_with("mode")) {
                RunConfig::parse(&text)?
            } else {
                RunConfig::parse(&format!("mode={}\n{text}", mode.as_str()))?
            };
            c.mode = mode;
            c
        }
        None => RunConfig::new(mode),
    };
    for (key, _) in KEYS.iter().filter(|(k, _)| *k != "mode") {
        if let Some(v) = sub.get_one::<String>(key) {
            cfg.set(key, v)?;
        }
    }
    Ok(cfg)
}

/// Parses, runs and prints; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = match command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
        }
    };
    match config_from_matches(&matches).and_then(|cfg| commands::run(&cfg)) {
        Ok(out) => {
            print!("{out}");
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
