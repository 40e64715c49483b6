//! The four subcommands as library functions.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;
use trap_forge::analysis::{analyze, pseudopotential_grid, AnalysisOptions, Report};
use trap_forge::constraints::{assemble, suggest_lambda};
use trap_forge::field::build_basis;
use trap_forge::optimize::{inhomogeneous_solution, project_scale, round_rails, Railing};
use trap_forge::synthesis::synthesize;
use trap_forge::{
    BravaisLattice, ElectrodeField, Error, ExtraConstraint, FourierBasis, PatchGrid, Result, TrapSpec,
};

use crate::config::RunConfig;
use crate::map::{snap_rails, ElectrodeMap, MapTrap};
use crate::render::render_svg;

/// Relative disagreement between the stored and the recomputed `C` that triggers a warning.
pub const SCALE_MISMATCH: f64 = 1e-6;

#[derive(Debug, Clone, Serialize)]
pub struct RoundingSummary {
    pub flipped: usize,
    /// Worst normalized field at a trap after rounding.
    pub max_field: f64,
    /// Worst relative curvature deviation after rounding.
    pub max_curvature_deviation: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct OptimizeReport {
    pub scale: f64,
    pub railing: Railing,
    pub residual: f64,
    pub gap: f64,
    pub basic: bool,
    pub iterations: usize,
    pub pseudoinverse_rank: usize,
    pub suppression_rounds: usize,
    pub kappa_unsuppressed: Vec<f64>,
    pub rounding: RoundingSummary,
    pub analysis: Report<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalyzeReport {
    pub scale_header: f64,
    pub scale_recomputed: f64,
    pub interior: usize,
    pub analysis: Report<f64>,
}

/// Files written by a subcommand.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Outputs {
    pub files: Vec<PathBuf>,
}

fn write(path: PathBuf, contents: &str, outputs: &mut Outputs) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(&path, contents)?;
    info!("wrote {}", path.display());
    outputs.files.push(path);
    Ok(())
}

struct Setup {
    lattice: BravaisLattice,
    grid: PatchGrid,
    n_cut: usize,
}

impl Setup {
    fn basis(&self) -> Result<FourierBasis> {
        build_basis(&self.lattice, &self.grid, self.n_cut)
    }
}

fn setup(config: &RunConfig) -> Result<Setup> {
    let lattice = config.lattice()?;
    let grid = PatchGrid::new(&lattice, config.grid)?;
    Ok(Setup { lattice, grid, n_cut: config.n_cut() })
}

/// Resolves `"auto"` strengths against the unconstrained solution.
fn resolve_extras(config: &RunConfig, basis: &FourierBasis, traps: &[TrapSpec]) -> Result<Vec<ExtraConstraint>> {
    let requests = config.extras();
    let reference = if requests.iter().any(|r| r.lambda.is_none()) {
        let system = assemble(basis, traps, &[])?;
        Some(trap_forge::optimize::solve(&system, &config.solver)?)
    } else {
        None
    };
    let field = reference.as_ref().map(|r| basis.field(&r.a)).transpose()?;
    requests
        .into_iter()
        .map(|r| {
            let lambda = match (r.lambda, &field, &reference) {
                (Some(v), _, _) => v,
                (None, Some(f), Some(res)) => suggest_lambda(f, res.scale, r.position)?,
                _ => unreachable!("reference solved when any lambda is auto"),
            };
            Ok(ExtraConstraint { position: r.position, component: r.component, relation: r.relation, lambda })
        })
        .collect()
}

fn map_traps(traps: &[TrapSpec], report: &Report<f64>) -> Vec<MapTrap> {
    traps
        .iter()
        .zip(&report.traps)
        .map(|(t, r)| MapTrap { label: t.label.clone(), position: t.position, gamma: t.gamma, kappa: r.kappa })
        .collect()
}

fn write_landscape(field: &ElectrodeField<'_>, lattice: &BravaisLattice, opts: &AnalysisOptions, z_max: f64, path: PathBuf, outputs: &mut Outputs) -> Result<()> {
    let grid = pseudopotential_grid(field, &opts.grid, z_max)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(["x", "y", "z", "psi"]).map_err(csv_err)?;
    for (idx, psi) in grid.values().iter().enumerate() {
        let p = grid.position(idx);
        let c = lattice.to_cartesian(p.frac);
        w.write_record([c[0].to_string(), c[1].to_string(), p.z.to_string(), psi.to_string()]).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    write(path, &String::from_utf8_lossy(&bytes), outputs)
}

/// Solves the configured lattice and writes map, report, SVG and landscape.
pub fn optimize(config: &RunConfig, out_dir: &Path) -> Result<(OptimizeReport, Outputs)> {
    let s = setup(config)?;
    let basis = s.basis()?;
    let traps = config.traps()?;
    let extras = resolve_extras(config, &basis, &traps)?;
    let synth = synthesize(&basis, &traps, &extras, &config.solver, &config.analysis, config.suppression.as_ref())?;
    let result = &synth.result;
    let rounding = round_rails(result, &basis, &synth.system, 0.5)?;
    let worst = |f: fn(&trap_forge::optimize::TrapRounding<f64>) -> f64| {
        rounding.traps.iter().map(f).fold(0.0, f64::max)
    };
    let map = ElectrodeMap {
        a1: s.lattice.a1(),
        a2: s.lattice.a2(),
        grid: config.grid,
        n_cut: s.n_cut,
        rail_tol: config.solver.rail_tol,
        scale: result.scale,
        traps: map_traps(&synth.system.traps, &synth.report),
        values: snap_rails(&result.a, config.solver.rail_tol),
    };
    let report = OptimizeReport {
        scale: result.scale,
        railing: result.railing,
        residual: result.residual,
        gap: result.gap,
        basic: result.basic,
        iterations: result.iterations,
        pseudoinverse_rank: result.inhom.rank,
        suppression_rounds: synth.suppression_rounds,
        kappa_unsuppressed: synth.kappa_unsuppressed.clone(),
        rounding: RoundingSummary {
            flipped: rounding.flipped,
            max_field: worst(|t| t.field_after),
            max_curvature_deviation: worst(|t| t.curvature_deviation_after),
        },
        analysis: synth.report.clone(),
    };
    let mut outputs = Outputs::default();
    let o = &config.outputs;
    write(out_dir.join(&o.map), &map.to_text(), &mut outputs)?;
    write(out_dir.join(&o.report), &serde_json::to_string_pretty(&report)?, &mut outputs)?;
    if let Some(svg) = &o.svg {
        write(out_dir.join(svg), &render_svg(&map)?, &mut outputs)?;
    }
    if let Some(csv_name) = &o.landscape_csv {
        let field = basis.field(&map.values)?;
        let z_max = traps.iter().map(|t| t.position.z).fold(0.0, f64::max);
        write_landscape(&field, &s.lattice, &config.analysis, z_max, out_dir.join(csv_name), &mut outputs)?;
    }
    Ok((report, outputs))
}

/// Re-analyses a stored map. `C` is recomputed by projecting the amplitudes
/// onto the minimum-norm solution of the trap rows.
pub fn analyze_map(map: &ElectrodeMap, opts: &AnalysisOptions, out: Option<&Path>) -> Result<(AnalyzeReport, Outputs)> {
    if map.traps.is_empty() {
        return Err(Error::EmptyTraps);
    }
    let lattice = BravaisLattice::new(map.a1, map.a2)?;
    let grid = PatchGrid::new(&lattice, map.grid)?;
    let basis = build_basis(&lattice, &grid, map.n_cut)?;
    let traps: Vec<TrapSpec> =
        map.traps.iter().map(|t| TrapSpec::new(t.label.clone(), t.position, t.gamma)).collect();
    let system = assemble(&basis, &traps, &[])?;
    let inhom = inhomogeneous_solution(&system.rows, &system.rhs)?;
    let scale = project_scale(&map.values, &inhom.g);
    let mut analysis = analyze(&basis.field(&map.values)?, scale, &system.traps, opts)?;
    let mismatch = (scale - map.scale).abs() / map.scale.abs().max(f64::MIN_POSITIVE);
    if mismatch > SCALE_MISMATCH {
        let msg = format!("recomputed C = {scale} differs from the stored {} (relative {mismatch:.2e})", map.scale);
        warn!("{msg}");
        analysis.warnings.push(msg);
    }
    let report = AnalyzeReport { scale_header: map.scale, scale_recomputed: scale, interior: map.interior_count(), analysis };
    let mut outputs = Outputs::default();
    if let Some(path) = out {
        write(path.to_path_buf(), &serde_json::to_string_pretty(&report)?, &mut outputs)?;
    }
    Ok((report, outputs))
}

pub fn render(map: &ElectrodeMap, out: &Path) -> Result<Outputs> {
    let mut outputs = Outputs::default();
    write(out.to_path_buf(), &render_svg(map)?, &mut outputs)?;
    Ok(outputs)
}

/// One sweep point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub z_over_d: f64,
    pub kappa: Option<f64>,
    pub tau: Option<f64>,
    pub interior: Option<usize>,
    pub runtime_s: f64,
    /// `ok` or the error kind and message.
    pub status: String,
}

fn sweep_point(config: &RunConfig, z_over_d: f64) -> SweepRow {
    let start = Instant::now();
    let run = || -> Result<(f64, f64, usize)> {
        let c = config.at_height(z_over_d)?;
        let s = setup(&c)?;
        let basis = s.basis()?;
        let traps = c.traps()?;
        let extras = resolve_extras(&c, &basis, &traps)?;
        let synth = synthesize(&basis, &traps, &extras, &c.solver, &c.analysis, c.suppression.as_ref())?;
        let t = &synth.report.traps[0];
        Ok((t.kappa, t.depth.tau, synth.result.railing.interior))
    };
    let outcome = run();
    let runtime_s = start.elapsed().as_secs_f64();
    match outcome {
        Ok((kappa, tau, interior)) => {
            SweepRow { z_over_d, kappa: Some(kappa), tau: Some(tau), interior: Some(interior), runtime_s, status: "ok".into() }
        }
        Err(e) => {
            warn!("sweep point z/d = {z_over_d}: {e}");
            SweepRow {
                z_over_d,
                kappa: None,
                tau: None,
                interior: None,
                runtime_s,
                status: format!("{}: {e}", e.kind()),
            }
        }
    }
}

/// Runs every height in `config.sweep` on the current rayon pool; per-point
/// failures land in the `status` column.
pub fn sweep(config: &RunConfig, out_dir: &Path) -> Result<(Vec<SweepRow>, Outputs)> {
    let heights = config.sweep.as_ref().map(|s| s.z_over_d.clone()).unwrap_or_default();
    let rows: Vec<SweepRow> = heights.par_iter().map(|&z| sweep_point(config, z)).collect();
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(["z_over_d", "kappa", "tau", "interior", "runtime_s", "status"]).map_err(csv_err)?;
    let opt = |v: Option<String>| v.unwrap_or_default();
    for r in &rows {
        w.write_record([
            r.z_over_d.to_string(),
            opt(r.kappa.map(|v| v.to_string())),
            opt(r.tau.map(|v| v.to_string())),
            opt(r.interior.map(|v| v.to_string())),
            format!("{:.3}", r.runtime_s),
            r.status.clone(),
        ])
        .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    let mut outputs = Outputs::default();
    write(out_dir.join(&config.outputs.sweep_csv), &String::from_utf8_lossy(&bytes), &mut outputs)?;
    Ok((rows, outputs))
}
