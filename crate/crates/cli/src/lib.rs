//! Command-line front end for `trap-forge`.

pub mod config;
pub mod map;
pub mod pipeline;
pub mod render;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde_json::{json, Value};
use trap_forge::analysis::AnalysisOptions;
use trap_forge::{Error, Result};

use crate::config::RunConfig;
use crate::map::ElectrodeMap;

/// Environment variable capping the worker count.
pub const THREADS_ENV: &str = "TRAP_FORGE_THREADS";

#[derive(Debug, Parser)]
#[command(name = "trap-forge", version, about = "Linear-programming synthesis of periodic surface-electrode ion-trap lattices")]
pub struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory for all output files.
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    /// Worker threads (further capped by TRAP_FORGE_THREADS).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Solver seed, overriding the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Patches per lattice direction, overriding the config grid (cutoff reset to 2n).
    #[arg(long, global = true)]
    pub resolution_override: Option<usize>,
    /// error, warn, info, debug or trace.
    #[arg(long, global = true, default_value = "info")]
    pub log_level: log::LevelFilter,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the configured lattice; writes map, report, SVG and optional landscape.
    Optimize,
    /// Re-analyse a stored electrode map (analysis options from --config if given).
    Analyze {
        map: PathBuf,
        /// Report file name inside --out-dir.
        #[arg(long, default_value = "analysis.json")]
        report: String,
    },
    /// Render a stored electrode map to SVG.
    Render {
        map: PathBuf,
        /// SVG file name inside --out-dir; defaults to the map name with .svg.
        #[arg(long)]
        svg: Option<String>,
    },
    /// Optimize and analyse one trap per cell over the configured heights.
    Sweep,
}

/// Worker count from the flag, the machine and the environment cap.
pub fn worker_count(flag: Option<usize>, env: Option<&str>) -> Result<usize> {
    let available = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let mut n = flag.unwrap_or(available);
    if let Some(raw) = env {
        let cap: usize = raw.trim().parse().ok().filter(|c| *c > 0).ok_or_else(|| Error::Config {
            location: THREADS_ENV.into(),
            message: format!("expected a positive integer, got '{raw}'"),
        })?;
        n = n.min(cap);
    }
    Ok(n.max(1))
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let path = cli.config.as_deref().ok_or_else(|| Error::Config {
        location: "--config".into(),
        message: "this subcommand needs a configuration file".into(),
    })?;
    let mut config = RunConfig::load(path)?;
    if let Some(n) = cli.resolution_override {
        config.override_resolution(n);
    }
    if let Some(seed) = cli.seed {
        config.solver.seed = seed;
    }
    Ok(config)
}

fn load_map(path: &Path) -> Result<ElectrodeMap> {
    ElectrodeMap::parse(&std::fs::read_to_string(path)?)
}

/// Runs one subcommand on the current thread pool and returns its stdout summary.
pub fn run(cli: &Cli) -> Result<Value> {
    match &cli.command {
        Command::Optimize => {
            let config = load_config(cli)?;
            let (report, outputs) = pipeline::optimize(&config, &cli.out_dir)?;
            Ok(json!({
                "scale": report.scale,
                "kappa": report.analysis.traps.iter().map(|t| t.kappa).collect::<Vec<_>>(),
                "interior": report.railing.interior,
                "spurious": report.analysis.spurious.len(),
                "warnings": report.analysis.warnings,
                "files": outputs.files,
            }))
        }
        Command::Analyze { map, report } => {
            let opts = match &cli.config {
                Some(_) => load_config(cli)?.analysis,
                None => AnalysisOptions::default(),
            };
            let map = load_map(map)?;
            let (r, outputs) = pipeline::analyze_map(&map, &opts, Some(&cli.out_dir.join(report)))?;
            Ok(json!({
                "scale": r.scale_recomputed,
                "kappa": r.analysis.traps.iter().map(|t| t.kappa).collect::<Vec<_>>(),
                "tau": r.analysis.traps.iter().map(|t| t.depth.tau).collect::<Vec<_>>(),
                "spurious": r.analysis.spurious.len(),
                "warnings": r.analysis.warnings,
                "files": outputs.files,
            }))
        }
        Command::Render { map, svg } => {
            let name = match svg {
                Some(s) => s.clone(),
                None => format!("{}.svg", map.file_stem().and_then(|s| s.to_str()).unwrap_or("electrodes")),
            };
            let outputs = pipeline::render(&load_map(map)?, &cli.out_dir.join(name))?;
            Ok(json!({ "files": outputs.files }))
        }
        Command::Sweep => {
            let config = load_config(cli)?;
            let (rows, outputs) = pipeline::sweep(&config, &cli.out_dir)?;
            Ok(json!({ "points": rows, "files": outputs.files }))
        }
    }
}

/// Machine-readable error document printed on failure.
pub fn error_document(e: &Error) -> Value {
    json!({ "kind": e.kind(), "message": e.to_string() })
}
