use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use vfmprobe_core::reference::load_curve;
use vfmprobe_core::report::AlignmentReport;
use vfmprobe_core::runner::{self, ConfigError, RunConfig, RunError};
use vfmprobe_core::{DisplayModel, Renderer, SuiteOptions, TestId};

/// Psychophysical probes for image encoders.
#[derive(Parser)]
#[command(name = "vfmprobe", version)]
struct Cli {
    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    parallel: Option<usize>,
    /// Seed base for noise stimuli.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (or file, for `score` and `report`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Dump the stimulus lattice of one test.
    Stimuli {
        test: TestId,
        /// Lattice points per axis.
        #[arg(long, default_value_t = 20)]
        density: usize,
        #[arg(long, default_value_t = 5)]
        noise_seeds: usize,
    },
    /// Run every configured (encoder, test) pair.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Re-score a stored report against curve files without running the encoder.
    Score {
        /// Report JSON written by `run`.
        #[arg(long)]
        grid: PathBuf,
        #[arg(long, required = true, num_args = 1..)]
        curve: Vec<PathBuf>,
    },
    /// Aggregate table over every report below a directory.
    Report {
        #[arg(long)]
        dir: PathBuf,
    },
}

/// Errors that map to exit status 2.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() || e.downcast_ref::<ConfigError>().is_some()
            {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn pool(threads: Option<usize>) -> anyhow::Result<()> {
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()?;
    }
    Ok(())
}

fn dispatch(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Stimuli {
            test,
            density,
            noise_seeds,
        } => {
            pool(cli.parallel)?;
            if density < 1 || noise_seeds < 1 {
                return Err(UsageError("density and noise-seeds must be at least 1".into()).into());
            }
            let out = cli
                .out
                .unwrap_or_else(|| PathBuf::from(format!("stimuli/{test}")));
            let renderer = Renderer::new(DisplayModel::default())?;
            let opts = SuiteOptions {
                density,
                noise_seeds,
                seed_base: cli.seed.unwrap_or(0),
            };
            let m = runner::dump_stimuli(test, &renderer, &opts, &out)?;
            println!(
                "{}: {} test images, {} references, {} skipped -> {}",
                test,
                m.images.len(),
                m.references.len(),
                m.skipped.len(),
                out.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Run { config } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(n) = cli.parallel {
                cfg.parallelism = n;
            }
            if let Some(s) = cli.seed {
                cfg.seed_base = s;
            }
            if let Some(o) = cli.out {
                cfg.output_dir = o;
            }
            let summary = runner::run(&cfg).map_err(|e| match e {
                RunError::Config(c) => anyhow::Error::new(c),
                other => anyhow::Error::new(other),
            })?;
            for (enc, test, msg) in &summary.failures {
                eprintln!("failed: {enc}/{test}: {msg}");
            }
            print!(
                "{}",
                std::fs::read_to_string(cfg.output_dir.join("aggregate.csv"))?
            );
            Ok(if summary.all_failed() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            })
        }
        Command::Score { grid, curve } => {
            let text = std::fs::read_to_string(&grid)
                .with_context(|| format!("reading {}", grid.display()))?;
            let report = AlignmentReport::from_json(&text)
                .map_err(|e| UsageError(format!("{} is not a report: {e}", grid.display())))?;
            let curves = curve
                .iter()
                .map(|p| load_curve(p).map_err(|e| UsageError(e.to_string())))
                .collect::<Result<Vec<_>, _>>()?;
            let opts = runner::rescore_options(&report);
            let rescored = runner::score_report(&report, &curves, &opts)?;
            let json = serde_json::to_string_pretty(&rescored)? + "\n";
            match cli.out {
                Some(p) => {
                    std::fs::write(&p, &json).with_context(|| format!("writing {}", p.display()))?
                }
                None => print!("{json}"),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Report { dir } => {
            let csv = runner::report_dir(&dir)?;
            match cli.out {
                Some(p) => {
                    std::fs::write(&p, &csv).with_context(|| format!("writing {}", p.display()))?
                }
                None => print!("{csv}"),
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
