//! `sparc` — experiment harness for sparse superposition codes.
//!
//! Every run is fully determined by the config file and the master seed:
//! identical inputs produce byte-identical outputs.

mod config;
mod experiments;

use clap::{Args, Parser, Subcommand};
use config::{config_hash, ExperimentConfig};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "sparc", version, about = "Sparse superposition code experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Master seed; overrides the config's seed field.
    #[arg(long)]
    seed: Option<u64>,
    /// Output JSON record; bulk CSV lands next to it with a .csv extension.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Monte-Carlo decoding sweep over rates and trials.
    Simulate(RunArgs),
    /// Decoder trajectory against the state-evolution prediction.
    SeTrack(RunArgs),
    /// Finite-B thresholds (underlying and potential) per section size.
    Thresholds {
        #[command(flatten)]
        run: RunArgs,
        /// Emit the large-alphabet closed forms instead.
        #[arg(long)]
        asymptotic: bool,
    },
    /// Coupled-threshold sweep over coupling windows.
    Saturation(RunArgs),
    /// Potential decomposition on a uniform error grid.
    PotentialCurve(RunArgs),
    /// Large-alphabet closed forms.
    Asymptotic(RunArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let kind = match &e {
                sparc::Error::Io(_) => "io",
                sparc::Error::Json(_) => "config-parse",
                sparc::Error::Precondition(_) => "precondition",
                _ => "runtime",
            };
            eprintln!(
                "{}",
                serde_json::json!({ "error": { "kind": kind, "message": e.to_string() } })
            );
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> sparc::Result<()> {
    match cli.command {
        Command::Simulate(args) => run(&args, "simulate", |cfg, seed| {
            Ok((experiments::run_simulate(cfg, seed)?, None))
        }),
        Command::SeTrack(args) => run(&args, "se-track", |cfg, seed| {
            if cfg.coupling.is_some() {
                let (v, csv) = experiments::run_coupled_profile(cfg, seed)?;
                Ok((v, Some(csv)))
            } else {
                let (v, csv) = experiments::run_se_track(cfg, seed)?;
                Ok((v, Some(csv)))
            }
        }),
        Command::Thresholds { run: args, asymptotic } => {
            if asymptotic {
                run(&args, "thresholds-asymptotic", |cfg, _| {
                    Ok((experiments::run_asymptotic(cfg)?, None))
                })
            } else {
                run(&args, "thresholds", |cfg, seed| {
                    Ok((experiments::run_thresholds(cfg, seed)?, None))
                })
            }
        }
        Command::Saturation(args) => run(&args, "saturation", |cfg, seed| {
            let (v, csv) = experiments::run_saturation(cfg, seed)?;
            Ok((v, Some(csv)))
        }),
        Command::PotentialCurve(args) => run(&args, "potential-curve", |cfg, seed| {
            let (v, csv) = experiments::run_potential_curve(cfg, seed)?;
            Ok((v, Some(csv)))
        }),
        Command::Asymptotic(args) => run(&args, "asymptotic", |cfg, _| {
            Ok((experiments::run_asymptotic(cfg)?, None))
        }),
    }
}

type RunOutput = (serde_json::Value, Option<String>);

fn run<F>(args: &RunArgs, kind: &str, body: F) -> sparc::Result<()>
where
    F: FnOnce(&ExperimentConfig, u64) -> sparc::Result<RunOutput>,
{
    let (cfg, raw) = ExperimentConfig::load(&args.config)?;
    let seed = args.seed.or(cfg.seed).ok_or_else(|| {
        sparc::Error::Precondition("seed is mandatory: pass --seed or set it in the config".into())
    })?;
    let (results, csv) = body(&cfg, seed)?;
    let record = serde_json::json!({
        "config_hash": config_hash(&raw, seed),
        "tool_version": env!("CARGO_PKG_VERSION"),
        "kind": kind,
        "seed": seed,
        "results": results,
    });
    let mut payload = serde_json::to_string_pretty(&record).map_err(sparc::Error::Json)?;
    payload.push('\n');
    std::fs::write(&args.out, payload)?;
    if let Some(csv) = csv {
        std::fs::write(args.out.with_extension("csv"), csv)?;
    }
    Ok(())
}
