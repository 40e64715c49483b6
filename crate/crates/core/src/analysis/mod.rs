//! Landscape analysis of an electrode pattern: curvatures, rf nulls,
//! spurious minima, depths and physical scales.

mod depth;
mod grid;
mod minima;
mod units;

use log::warn;
use serde::{Deserialize, Serialize};

pub use depth::{trap_depths, Depth, Escape, Site};
pub use grid::{pseudopotential_grid, GridOptions, PseudoGrid, MAX_GRID_CELLS};
pub use minima::{find_minima, Minimum};
pub use units::{physical_units, PhysicalParams, PhysicalReport, ATOMIC_MASS, ELEMENTARY_CHARGE};

use crate::constraints::TrapSpec;
use crate::error::Result;
use crate::field::{ElectrodeField, Order, Position};
use crate::scalar::{det3, frobenius, norm3, Real};

/// `|C|·z²·|det Γ|^{1/3}` per trap (Γ as normalized at assembly).
pub fn kappa<T: Real>(scale: T, traps: &[TrapSpec<T>]) -> Vec<T> {
    traps
        .iter()
        .map(|t| {
            let det = det3(&t.gamma).abs();
            if det == T::zero() {
                warn!("trap '{}': target curvature is singular, kappa is zero", t.label);
            }
            scale.abs() * t.position.z * t.position.z * det.cbrt()
        })
        .collect()
}

/// Depth of a single trap among `sites`.
pub fn trap_depth<T: Real>(grid: &PseudoGrid<T>, sites: &[Site<T>], index: usize) -> Depth<T> {
    trap_depths(grid, sites).swap_remove(index)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisOptions {
    pub grid: GridOptions,
    /// Minima closer than this to a designed trap are attributed to it.
    pub classification_radius: f64,
    pub physical: Option<PhysicalParams>,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions { grid: GridOptions::default(), classification_radius: 0.05, physical: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrapReport<T> {
    pub label: String,
    pub position: Position<T>,
    /// From the scale: `|C|·z²·|det Γ|^{1/3}`.
    pub kappa: T,
    /// From the evaluated Hessian: `z²·|det H|^{1/3}`.
    pub kappa_evaluated: T,
    /// `‖∇φ‖` at the trap position (U_rf/L0).
    pub field_residual: T,
    /// `‖H − C·Γ‖_F / (|C|·‖Γ‖_F)`.
    pub curvature_deviation: T,
    /// A landscape minimum was attributed to this trap.
    pub minimum_found: bool,
    pub depth: Depth<T>,
    pub physical: Option<PhysicalReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominantMode<T> {
    pub m1: isize,
    pub m2: isize,
    /// `|G|` in units of 1/L0.
    pub wavenumber: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report<T> {
    pub scale: T,
    pub fill_fraction: T,
    pub dominant_mode: Option<DominantMode<T>>,
    pub traps: Vec<TrapReport<T>>,
    pub spurious: Vec<Minimum<T>>,
    pub warnings: Vec<String>,
}

impl<T: Real> Report<T> {
    /// Spurious minima that are strict minima of the landscape at non-designed sites.
    pub fn spurious_count(&self) -> usize {
        self.spurious.len()
    }
}

/// Full analysis of `field` for the designed `traps` at curvature scale `scale`.
pub fn analyze<T: Real>(
    field: &ElectrodeField<'_, T>,
    scale: T,
    traps: &[TrapSpec<T>],
    opts: &AnalysisOptions,
) -> Result<Report<T>> {
    let z_max = traps.iter().map(|t| t.position.z).fold(T::zero(), T::max);
    let grid = pseudopotential_grid(field, &opts.grid, z_max)?;
    let minima = find_minima(&grid, field, traps, T::lit(opts.classification_radius))?;
    let mut warnings = Vec::new();
    if minima.is_empty() {
        warnings.push("no pseudopotential minima found".to_string());
    }
    let kappas = kappa(scale, traps);
    let mut sites = Vec::with_capacity(traps.len());
    let mut partial = Vec::with_capacity(traps.len());
    for (t, trap) in traps.iter().enumerate() {
        let s = field.evaluate(trap.position, Order::Hessian)?;
        let z = trap.position.z;
        let found = minima.iter().find(|m| m.designed == Some(t));
        let (pos, psi) = match found {
            Some(m) => (m.position, m.psi),
            None => {
                warnings.push(format!("trap '{}': no landscape minimum near the design position", trap.label));
                (trap.position, s.gradient.iter().map(|g| *g * *g).sum())
            }
        };
        sites.push(Site { label: trap.label.clone(), position: pos, psi });
        let mut dev = s.hessian;
        for r in 0..3 {
            for c in 0..3 {
                dev[r][c] = dev[r][c] - scale * trap.gamma[r][c];
            }
        }
        let norm = scale.abs() * frobenius(&trap.gamma);
        partial.push((
            trap,
            kappas[t],
            z * z * det3(&s.hessian).abs().cbrt(),
            norm3(&s.gradient),
            if norm > T::zero() { frobenius(&dev) / norm } else { T::infinity() },
            found.is_some(),
        ));
    }
    let depths = trap_depths(&grid, &sites);
    let mut reports = Vec::with_capacity(traps.len());
    for ((trap, kappa, kappa_evaluated, field_residual, curvature_deviation, minimum_found), depth) in
        partial.into_iter().zip(depths)
    {
        if depth.unresolved {
            warnings.push(format!("trap '{}': depth not resolved by the landscape grid", trap.label));
        }
        let physical = opts.physical.as_ref().map(|p| {
            let gamma = trap.gamma.map(|row| row.map(|v| v.to_f64_lossy()));
            let height = trap.position.z.to_f64_lossy() * p.length_unit_m;
            physical_units(kappa.to_f64_lossy(), &gamma, height, p)
        });
        if let Some(p) = &physical {
            warnings.extend(p.warnings.iter().map(|w| format!("trap '{}': {w}", trap.label)));
        }
        reports.push(TrapReport {
            label: trap.label.clone(),
            position: trap.position,
            kappa,
            kappa_evaluated,
            field_residual,
            curvature_deviation,
            minimum_found,
            depth,
            physical,
        });
    }
    for w in &warnings {
        warn!("{w}");
    }
    let spurious = minima.into_iter().filter(|m| m.designed.is_none()).collect();
    Ok(Report {
        scale,
        fill_fraction: field.mean(),
        dominant_mode: field.dominant_mode().map(|(m1, m2, wavenumber)| DominantMode { m1, m2, wavenumber }),
        traps: reports,
        spurious,
        warnings,
    })
}
