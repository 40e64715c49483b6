//! End-to-end synthesis: assemble, solve, analyse, and optionally add
//! `E_z` constraints at spurious minima until none remain.

use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::analysis::{analyze, AnalysisOptions, Report};
use crate::constraints::{assemble, suggest_lambda, ConstraintSystem, ExtraConstraint, Relation, TrapSpec};
use crate::field::{Derivative, FourierBasis, Order};
use crate::optimize::{solve, OptimizationResult, SolverOptions};
use crate::{Error, Real, Result};

/// Constraint points closer than this (L0) count as repeats.
const DUPLICATE: f64 = 1e-3;

/// Sign rule for automatic `E_z` constraints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuppressionMode {
    /// `E_z/C ≥ +λ`.
    AtLeast,
    /// `E_z/C ≤ −λ`.
    AtMost,
    /// `E_z/C = λ`, signed like the present field at the point.
    Equal,
    /// Same sign as `E_z` at twice the highest constraint height above the
    /// site, so that `E_z` cannot change sign along the vertical line.
    FollowAbove,
}

/// Automatic suppression of spurious minima.
///
/// Each round adds, for every spurious minimum at height `z_s`, one `E_z`
/// constraint per entry of `heights` at `(x_s, y_s, h·z_s)` with strength
/// `λ = fraction·|suggest_lambda|` signed according to `mode`. Points that
/// repeat an earlier constraint are skipped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuppressionPolicy {
    pub rounds: usize,
    pub fraction: f64,
    pub mode: SuppressionMode,
    pub heights: Vec<f64>,
}

impl Default for SuppressionPolicy {
    fn default() -> Self {
        SuppressionPolicy { rounds: 4, fraction: 0.01, mode: SuppressionMode::AtMost, heights: vec![1.0] }
    }
}

#[derive(Debug, Clone)]
pub struct Synthesis<T: Real> {
    pub system: ConstraintSystem<T>,
    pub result: OptimizationResult<T>,
    pub report: Report<T>,
    /// κ of each trap before any suppression constraint was added.
    pub kappa_unsuppressed: Vec<T>,
    pub suppression_rounds: usize,
}

fn policy_extras<T: Real>(
    basis: &FourierBasis<T>,
    result: &OptimizationResult<T>,
    report: &Report<T>,
    policy: &SuppressionPolicy,
    existing: &[ExtraConstraint<T>],
) -> Result<Vec<ExtraConstraint<T>>> {
    let field = basis.field(&result.a)?;
    let lattice = basis.lattice();
    let top = policy.heights.iter().copied().fold(1.0, f64::max) * 2.0;
    let mut out: Vec<ExtraConstraint<T>> = Vec::new();
    for m in &report.spurious {
        let mut above = m.position;
        above.z = m.position.z * T::lit(top);
        let upward = field.evaluate(above, Order::Gradient)?.gradient[2] >= T::zero();
        for &h in &policy.heights {
            let mut p = m.position;
            p.z = p.z * T::lit(h);
            let repeated = existing.iter().chain(&out).any(|e| {
                e.component == Derivative::Dz
                    && lattice.periodic_distance(e.position.frac, p.frac) < T::lit(DUPLICATE)
                    && (e.position.z - p.z).abs() < T::lit(DUPLICATE)
            });
            if repeated {
                continue;
            }
            let suggested = suggest_lambda(&field, result.scale, p)?;
            let magnitude = suggested.abs() * T::lit(policy.fraction);
            let (relation, lambda) = match policy.mode {
                SuppressionMode::AtLeast => (Relation::AtLeast, magnitude),
                SuppressionMode::AtMost => (Relation::AtMost, -magnitude),
                SuppressionMode::Equal => (Relation::Equal, suggested * T::lit(policy.fraction)),
                SuppressionMode::FollowAbove if upward => (Relation::AtLeast, magnitude),
                SuppressionMode::FollowAbove => (Relation::AtMost, -magnitude),
            };
            out.push(ExtraConstraint::ez(p, relation, lambda));
        }
    }
    Ok(out)
}

/// Solves for `traps` with user `extras` and, when `policy` is given,
/// suppresses spurious minima for up to `policy.rounds` rounds. A round
/// whose program becomes infeasible is discarded with a report warning.
pub fn synthesize<T: Real>(
    basis: &FourierBasis<T>,
    traps: &[TrapSpec<T>],
    extras: &[ExtraConstraint<T>],
    solver: &SolverOptions,
    analysis: &AnalysisOptions,
    policy: Option<&SuppressionPolicy>,
) -> Result<Synthesis<T>> {
    let system = assemble(basis, traps, extras)?;
    let result = solve(&system, solver)?;
    let report = analyze(&basis.field(&result.a)?, result.scale, &system.traps, analysis)?;
    let kappa_unsuppressed = report.traps.iter().map(|t| t.kappa).collect();
    let mut state = Synthesis { system, result, report, kappa_unsuppressed, suppression_rounds: 0 };
    let Some(policy) = policy else { return Ok(state) };
    let mut all_extras = extras.to_vec();
    while !state.report.spurious.is_empty() && state.suppression_rounds < policy.rounds {
        let fresh = policy_extras(basis, &state.result, &state.report, policy, &all_extras)?;
        if fresh.is_empty() {
            break;
        }
        all_extras.extend(fresh);
        let system = assemble(basis, traps, &all_extras)?;
        let result = match solve(&system, solver) {
            Ok(r) => r,
            Err(e @ (Error::Infeasible { .. } | Error::Solver(_))) => {
                let msg = format!("suppression round {} abandoned: {e}", state.suppression_rounds + 1);
                warn!("{msg}");
                state.report.warnings.push(msg);
                break;
            }
            Err(e) => return Err(e),
        };
        let report = analyze(&basis.field(&result.a)?, result.scale, &system.traps, analysis)?;
        state.suppression_rounds += 1;
        info!(
            "suppression round {}: {} extra constraints, {} spurious minima left",
            state.suppression_rounds,
            all_extras.len(),
            report.spurious.len()
        );
        state.system = system;
        state.result = result;
        state.report = report;
    }
    if !state.report.spurious.is_empty() {
        state.report
            .warnings
            .push(format!("{} spurious minima remain after suppression", state.report.spurious.len()));
    }
    Ok(state)
}
