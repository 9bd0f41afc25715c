use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sst_core::estimator::{estimate, EstimatorConfig, PMode};
use sst_core::experiment::{self, BUILTIN_PRESETS};
use sst_core::isotonic::{ProjectionMethod, ProjectionOptions};
use sst_core::matrix::Kind;
use sst_core::models::{generate, Family, ModelParams, ModelSpec};
use sst_core::observation::{sample, ObservationMatrix};
use sst_core::{Error, Result};

#[derive(Parser)]
#[command(
    name = "sst-lab",
    version,
    about = "Estimate monotone tournament and graph matrices and run simulation grids"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run experiment presets and write CSV tables and SVG plots.
    Run {
        /// Config file with one table per preset; built-in presets if omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Run only this preset.
        #[arg(long)]
        preset: Option<String>,
        /// Worker threads (default: all cores).
        #[arg(long)]
        jobs: Option<usize>,
        /// Also write per-replicate projection diagnostics.
        #[arg(long)]
        projection_log: bool,
        /// Output directory, overriding the config.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Estimate a probability matrix from an observation CSV.
    Estimate {
        #[arg(long)]
        input: PathBuf,
        /// tournament or graph; read from the file header if omitted.
        #[arg(long)]
        kind: Option<Kind>,
        /// Divide by this sampling probability instead of the observed fraction.
        #[arg(long)]
        known_p: Option<f64>,
        #[arg(long, default_value_t = 0)]
        tie_seed: u64,
        #[arg(long, default_value = "partition")]
        projection: String,
        /// Matrix CSV destination; stdout if omitted.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Draw a model matrix and sample observations from it.
    Sample {
        #[arg(long)]
        family: Family,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        p: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Block count for the block family.
        #[arg(long)]
        k: Option<usize>,
        /// Observation CSV destination; stdout if omitted.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Also write the permuted true matrix here.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Print the built-in preset file.
    Presets,
}

fn write_or_print(path: Option<&Path>, body: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, body).map_err(|e| Error::Io {
            path: p.to_path_buf(),
            source: e,
        }),
        None => {
            print!("{body}");
            Ok(())
        }
    }
}

fn run_presets(
    config: Option<&Path>,
    preset: Option<&str>,
    jobs: Option<usize>,
    projection_log: bool,
    output: Option<&Path>,
) -> Result<usize> {
    let presets = match config {
        Some(path) => experiment::load_config(path)?,
        None => experiment::builtin_presets()?,
    };
    let selected = experiment::select(presets, preset)?;
    let many = selected.len() > 1;
    let mut failures = 0;
    for cfg in &selected {
        let dir = match output {
            Some(o) if many => o.join(&cfg.name),
            Some(o) => o.to_path_buf(),
            None => cfg.output_dir(),
        };
        eprintln!("running {} -> {}", cfg.name, dir.display());
        let result = experiment::run(cfg, jobs)?;
        experiment::write_outputs(&result, &dir, projection_log)?;
        for s in &result.slopes {
            println!(
                "{} {} p={} slope={:.4} r2={:.4}",
                cfg.name, s.family, s.p, s.fit.slope, s.fit.r2
            );
        }
        if !result.failures.is_empty() {
            eprintln!(
                "{}: {} replicate(s) failed, see failures.csv",
                cfg.name,
                result.failures.len()
            );
        }
        failures += result.failures.len();
    }
    Ok(failures)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run {
            config,
            preset,
            jobs,
            projection_log,
            output,
        } => run_presets(
            config.as_deref(),
            preset.as_deref(),
            jobs,
            projection_log,
            output.as_deref(),
        )
        .map(|failed| {
            if failed > 0 {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            }
        }),
        Command::Estimate {
            input,
            kind,
            known_p,
            tie_seed,
            projection,
            output,
        } => (|| {
            let text = fs::read_to_string(&input).map_err(|e| Error::Io {
                path: input.clone(),
                source: e,
            })?;
            let obs = ObservationMatrix::from_csv(&text, kind)?;
            let method = match projection.as_str() {
                "partition" => ProjectionMethod::Partition,
                "dykstra" => ProjectionMethod::Dykstra,
                other => {
                    return Err(Error::InvalidArgument(format!(
                        "unknown projection `{other}`"
                    )))
                }
            };
            let cfg = EstimatorConfig {
                p_mode: known_p.map_or(PMode::UseEstimatedP, PMode::UseKnownP),
                projection: ProjectionOptions {
                    method,
                    ..Default::default()
                },
                tie_seed,
            };
            let est = estimate(&obs, &cfg)?;
            if est.fallback {
                eprintln!("too few observations; returned the all-1/2 matrix");
            }
            write_or_print(output.as_deref(), &est.theta.to_csv())?;
            Ok(ExitCode::SUCCESS)
        })(),
        Command::Sample {
            family,
            n,
            p,
            seed,
            k,
            output,
            truth,
        } => (|| {
            let spec = ModelSpec {
                n,
                seed,
                params: ModelParams {
                    k,
                    ..ModelParams::new(family)
                },
            };
            let (theta, pi) = generate(&spec)?;
            let permuted = theta.permuted(&pi)?;
            let obs = sample(&permuted, p, seed)?;
            if let Some(t) = truth {
                write_or_print(Some(&t), &permuted.to_csv())?;
            }
            write_or_print(output.as_deref(), &obs.to_csv())?;
            Ok(ExitCode::SUCCESS)
        })(),
        Command::Presets => {
            print!("{BUILTIN_PRESETS}");
            Ok(ExitCode::SUCCESS)
        }
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
