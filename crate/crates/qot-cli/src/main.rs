//! Command-line driver: solve instances, run perturbation studies, evaluate
//! constants, run the counterexample suite, and verify stability bounds.
//!
//! The command and its inputs come from a single JSON config; flags override
//! the output directory, tolerance, parallelism, and formats. Identical
//! config and inputs produce byte-identical reports.

// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use commands::{cmd_constants, cmd_example62, cmd_perturb, cmd_solve, cmd_verify, Ctx, EXIT_INPUT};
use config::{load_config, Command};

const USAGE: &str = "usage: qot --config PATH [--out DIR] [--jobs N] [--tol X] [--format json,csv]

The config file selects the command (solve | perturb | constants | example62 |
verify) and its inputs; the flags override the corresponding config fields.
Exit codes: 0 success, 1 input error, 2 solver non-convergence, 3 bound
violation.";

struct Flags {
    config: Option<PathBuf>,
    out: Option<PathBuf>,
    jobs: Option<usize>,
    tol: Option<f64>,
    formats: Option<Vec<String>>,
}

fn parse_flags(args: &[String]) -> Result<Flags, String> {
    let mut flags =
        Flags { config: None, out: None, jobs: None, tol: None, formats: None };
    let mut it = args.iter();
    while let Some(arg) = it.next() {
        let mut take = |name: &str| -> Result<String, String> {
            it.next().cloned().ok_or_else(|| format!("{name} expects a value"))
        };
        match arg.as_str() {
            "--config" => flags.config = Some(PathBuf::from(take("--config")?)),
            "--out" => flags.out = Some(PathBuf::from(take("--out")?)),
            "--jobs" => {
                flags.jobs = Some(
                    take("--jobs")?
                        .parse()
                        .map_err(|e| format!("--jobs: {e}"))?,
                )
            }
            "--tol" => {
                flags.tol =
                    Some(take("--tol")?.parse().map_err(|e| format!("--tol: {e}"))?)
            }
            "--format" => {
                flags.formats =
                    Some(take("--format")?.split(',').map(|s| s.trim().to_string()).collect())
            }
            "--help" | "-h" => return Err(String::new()),
            other => return Err(format!("unknown argument {other:?}")),
        }
    }
    Ok(flags)
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let flags = match parse_flags(&args) {
        Ok(f) => f,
        Err(msg) => {
            if !msg.is_empty() {
                eprintln!("error: {msg}");
            }
            eprintln!("{USAGE}");
            return ExitCode::from(EXIT_INPUT as u8);
        }
    };
    let config_path = match flags.config {
        Some(p) => p,
        None => {
            eprintln!("error: --config is required");
            eprintln!("{USAGE}");
            return ExitCode::from(EXIT_INPUT as u8);
        }
    };
    let mut cfg = match load_config(&config_path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_INPUT as u8);
        }
    };
    if let Some(out) = flags.out {
        cfg.out = out;
    }
    if let Some(jobs) = flags.jobs {
        if jobs == 0 {
            eprintln!("error: --jobs must be at least 1");
            return ExitCode::from(EXIT_INPUT as u8);
        }
        cfg.jobs = jobs;
    }
    if let Some(tol) = flags.tol {
        if !(tol > 0.0) {
            eprintln!("error: --tol must be positive");
            return ExitCode::from(EXIT_INPUT as u8);
        }
        cfg.solver.tol = tol;
    }
    if let Some(formats) = flags.formats {
        for f in &formats {
            if f != "json" && f != "csv" {
                eprintln!("error: unknown format {f:?}");
                return ExitCode::from(EXIT_INPUT as u8);
            }
        }
        cfg.formats = formats;
    }
    let base_dir = config_path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."))
        .to_path_buf();
    let ctx = Ctx { cfg: &cfg, base_dir: &base_dir };
    let code = match cfg.command {
        Command::Solve => cmd_solve(&ctx),
        Command::Perturb => cmd_perturb(&ctx),
        Command::Constants => cmd_constants(&ctx),
        Command::Example62 => cmd_example62(&ctx),
        Command::Verify => cmd_verify(&ctx),
    };
    ExitCode::from(code as u8)
}
