//! Thin command-line wrapper around the library's run modes.
//!
//! Usage:
//!   mantle <convergence-test | solver-bench | simulate> [flags]
//!
//! Flags:
//!   --config PATH       configuration file (key = value sections)
//!   --threads N         worker threads (0 = library default)
//!   --seed S            RNG seed override
//!   --output DIR        output directory override
//!   --checkpoint PATH   checkpoint file to write
//!   --resume PATH       resume a simulation from a checkpoint
//!
//! Exit codes: 0 success, 2 configuration error, 3 solver failure.

use mantle::app::{self, RunConfig, RunMode};
use mantle::physics;
use std::path::PathBuf;
use std::process::ExitCode;

struct CliArgs {
    mode: Option<RunMode>,
    config: Option<String>,
    threads: Option<usize>,
    seed: Option<u64>,
    output: Option<String>,
    checkpoint: Option<PathBuf>,
    resume: Option<PathBuf>,
}

fn usage() -> &'static str {
    "usage: mantle <convergence-test | solver-bench | simulate> \
     [--config PATH] [--threads N] [--seed S] [--output DIR] \
     [--checkpoint PATH] [--resume PATH]"
}

fn parse_args(args: &[String]) -> Result<CliArgs, String> {
    let mut out = CliArgs {
        mode: None,
        config: None,
        threads: None,
        seed: None,
        output: None,
        checkpoint: None,
        resume: None,
    };
    let mut it = args.iter();
    while let Some(arg) = it.next() {
        match arg.as_str() {
            "convergence-test" => out.mode = Some(RunMode::ConvergenceTest),
            "solver-bench" => out.mode = Some(RunMode::SolverBench),
            "simulate" => out.mode = Some(RunMode::Simulate),
            "--config" => out.config = Some(it.next().ok_or("--config needs a path")?.clone()),
            "--threads" => {
                out.threads = Some(
                    it.next()
                        .ok_or("--threads needs a count")?
                        .parse()
                        .map_err(|_| "--threads expects an integer")?,
                )
            }
            "--seed" => {
                out.seed = Some(
                    it.next()
                        .ok_or("--seed needs a value")?
                        .parse()
                        .map_err(|_| "--seed expects an integer")?,
                )
            }
            "--output" => out.output = Some(it.next().ok_or("--output needs a dir")?.clone()),
            "--checkpoint" => {
                out.checkpoint =
                    Some(PathBuf::from(it.next().ok_or("--checkpoint needs a path")?))
            }
            "--resume" => {
                out.resume = Some(PathBuf::from(it.next().ok_or("--resume needs a path")?))
            }
            "--help" | "-h" => return Err(usage().to_string()),
            other => return Err(format!("unknown argument '{other}'\n{}", usage())),
        }
    }
    Ok(out)
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let cli = match parse_args(&args) {
        Ok(c) => c,
        Err(msg) => {
            eprintln!("{msg}");
            return ExitCode::from(2);
        }
    };

    // Config file first, then CLI overrides.
    let mut cfg = match &cli.config {
        Some(path) => match RunConfig::from_file(path) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("config error: {e}");
                return ExitCode::from(2);
            }
        },
        None => RunConfig::default(),
    };
    if let Some(mode) = cli.mode {
        cfg.mode = mode;
    } else if cli.config.is_none() {
        eprintln!("no mode given\n{}", usage());
        return ExitCode::from(2);
    }
    if let Some(t) = cli.threads {
        cfg.threads = t;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = cli.output {
        cfg.output_dir = o;
    }

    if cfg.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build_global()
        {
            eprintln!("thread pool: {e}");
            return ExitCode::from(2);
        }
    }

    eprint!("{}", physics::derived_constants_report(&cfg.reference));
    eprintln!("mode: {}", cfg.mode.label());

    match app::modes::run(&cfg, cli.resume.as_deref(), cli.checkpoint.as_deref()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(app::ModeError::Geometry(e)) => {
            eprintln!("configuration error: {e}");
            ExitCode::from(2)
        }
        Err(app::ModeError::Checkpoint(e)) => {
            eprintln!("checkpoint error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("solver failure: {e}");
            ExitCode::from(3)
        }
    }
}
