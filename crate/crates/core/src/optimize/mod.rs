//! Relaxed linear program for the patch amplitudes and rounding to a binary
//! electrode map.
//!
//! The program is
//!
//! ```text
//! maximize C   subject to   A·a − C·b = 0,   extra inequalities,   0 ≤ a_i ≤ 1
//! ```
//!
//! with `C` free. Because the uniform plane `a = 1` lies in the null space of
//! every row, `a → 1 − a` maps a solution with scale `C` onto one with `−C`,
//! so only the max-`C` branch has to be solved when all extra rows are
//! equalities.

mod pinv;
mod simplex;

use log::info;
use serde::{Deserialize, Serialize};

pub use pinv::{inhomogeneous_solution, Inhomogeneous, RANK_TOLERANCE};
pub use simplex::{solve_lp, BoundedLp, LpSolution, SimplexOptions};

use crate::constraints::{dot, ConstraintSystem, Relation};
use crate::error::{Error, Result};
use crate::field::{FourierBasis, Order};
use crate::scalar::{frobenius, norm3, Real};

/// Tolerances and limits of the optimizer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    pub equality_tol: f64,
    pub rail_tol: f64,
    pub gap_tol: f64,
    pub max_iterations: usize,
    /// Fail unless the solver reports a basic (vertex) solution.
    pub require_basic: bool,
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            equality_tol: 1e-8,
            rail_tol: 1e-7,
            gap_tol: 1e-9,
            max_iterations: 2_000_000,
            require_basic: true,
            seed: 0,
        }
    }
}

/// How many amplitudes sit on each rail.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Railing {
    pub zeros: usize,
    pub ones: usize,
    pub interior: usize,
}

impl Railing {
    pub fn count<T: Real>(a: &[T], tol: T) -> Railing {
        let mut r = Railing { zeros: 0, ones: 0, interior: 0 };
        for &v in a {
            if v <= tol {
                r.zeros += 1;
            } else if v >= T::one() - tol {
                r.ones += 1;
            } else {
                r.interior += 1;
            }
        }
        r
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationResult<T> {
    /// Optimal amplitudes in `[0, 1]`.
    pub a: Vec<T>,
    /// Curvature scale of the max-`C` branch (positive).
    pub scale: T,
    pub railing: Railing,
    /// `max |A·a − C·b|`.
    pub residual: T,
    /// Dual bound minus objective, relative to `max(1, C)`.
    pub gap: T,
    pub basic: bool,
    pub iterations: usize,
    pub inhom: Inhomogeneous<T>,
    /// Amplitudes rounded at 1/2 and the scale implied by projecting them on `g`.
    pub rounded_a: Vec<T>,
    pub rounded_scale: T,
    /// Row duals of the final basis (scaled rows).
    pub duals: Vec<T>,
}

/// Builds and solves the relaxed program for `system`.
pub fn solve<T: Real>(system: &ConstraintSystem<T>, opts: &SolverOptions) -> Result<OptimizationResult<T>> {
    if system.rhs.iter().all(|b| *b == T::zero()) {
        return Err(Error::ZeroTarget);
    }
    let inhom = inhomogeneous_solution(&system.rows, &system.rhs)?;
    let (mut a, scale, lp) = solve_branch(system, opts)?;
    let eq_tol = T::lit(opts.equality_tol);
    if !(scale.abs() > eq_tol) {
        let mut rows: Vec<usize> = lp
            .duals
            .iter()
            .enumerate()
            .filter(|(_, y)| y.abs() > T::lit(1e-9))
            .map(|(r, _)| r)
            .collect();
        rows.sort_unstable();
        return Err(Error::Infeasible { rows });
    }
    // Variables pinned at a bound by the simplex are exact; clean the basic ones.
    for v in a.iter_mut() {
        *v = v.max(T::zero()).min(T::one());
    }
    let residual = system.residual(&a, scale);
    let limit = eq_tol * (T::one() + scale.abs() * system.rhs_norm());
    if residual > limit {
        return Err(Error::Solver(format!("equality residual {residual} exceeds {limit}")));
    }
    let railing = Railing::count(&a, T::lit(opts.rail_tol));
    let gap = (lp.dual_bound - lp.objective) / scale.abs().max(T::one());
    let rows = system.equality_count() + system.inequalities.len();
    let basic = railing.interior <= rows;
    if opts.require_basic && !basic {
        return Err(Error::Solver(format!(
            "{} interior amplitudes exceed the {rows} constraint rows of a basic solution",
            railing.interior
        )));
    }
    info!(
        "LP optimum C = {:.6e} after {} iterations, interior {}, gap {:e}",
        scale.to_f64_lossy(),
        lp.iterations,
        railing.interior,
        gap.to_f64_lossy()
    );
    let rounded_a = round_at(&a, T::lit(0.5));
    let rounded_scale = project_scale(&rounded_a, &inhom.g);
    Ok(OptimizationResult {
        a,
        scale,
        railing,
        residual,
        gap,
        basic,
        iterations: lp.iterations,
        inhom,
        rounded_a,
        rounded_scale,
        duals: lp.duals,
    })
}

/// One LP solve maximizing `C`.
fn solve_branch<T: Real>(
    system: &ConstraintSystem<T>,
    opts: &SolverOptions,
) -> Result<(Vec<T>, T, LpSolution<T>)> {
    let n = system.patch_count();
    let n_eq = system.equality_count();
    let n_ineq = system.inequalities.len();
    let m = n_eq + n_ineq;
    let c_var = n;
    let mut lp = BoundedLp::new(m, n + 1 + n_ineq);
    let put_row = |lp: &mut BoundedLp<T>, r: usize, row: &[T], b: T, slack: Option<usize>| {
        let scale = row.iter().fold(b.abs(), |s, v| s.max(v.abs()));
        let inv = if scale > T::zero() { T::one() / scale } else { T::one() };
        for (j, &v) in row.iter().enumerate() {
            lp.set_entry(r, j, v * inv);
        }
        lp.set_entry(r, c_var, -b * inv);
        if let Some(s) = slack {
            lp.set_entry(r, s, -inv);
        }
    };
    for (r, (row, &b)) in system.rows.iter().zip(&system.rhs).enumerate() {
        put_row(&mut lp, r, row, b, None);
    }
    for (k, ineq) in system.inequalities.iter().enumerate() {
        let s = n + 1 + k;
        put_row(&mut lp, n_eq + k, &ineq.row, ineq.lambda, Some(s));
        match ineq.relation {
            Relation::AtLeast => lp.set_bounds(s, T::zero(), T::infinity()),
            Relation::AtMost => lp.set_bounds(s, T::neg_infinity(), T::zero()),
            Relation::Equal => lp.set_bounds(s, T::zero(), T::zero()),
        }
    }
    lp.set_bounds(c_var, T::neg_infinity(), T::infinity());
    lp.set_cost(c_var, T::one());
    let simplex_opts = SimplexOptions { max_iterations: opts.max_iterations, seed: opts.seed, ..Default::default() };
    let sol = solve_lp(&lp, &simplex_opts)?;
    let a = sol.x[..n].to_vec();
    let c = sol.x[c_var];
    Ok((a, c, sol))
}

fn round_at<T: Real>(a: &[T], threshold: T) -> Vec<T> {
    a.iter().map(|&v| if v > threshold { T::one() } else { T::zero() }).collect()
}

/// `(a·g) / ‖g‖²`, the scale of `a` along the inhomogeneous solution.
pub fn project_scale<T: Real>(a: &[T], g: &[T]) -> T {
    dot(a, g) / dot(g, g)
}

/// Per-trap effect of rounding, in units of `|C|·‖Γ‖·z` (field) and
/// `|C|·‖Γ‖` (curvature).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrapRounding<T> {
    pub label: String,
    pub field_before: T,
    pub field_after: T,
    pub curvature_deviation_before: T,
    pub curvature_deviation_after: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundingReport<T> {
    pub a: Vec<T>,
    pub scale: T,
    pub flipped: usize,
    pub traps: Vec<TrapRounding<T>>,
}

/// Rounds amplitudes to a binary map (`a_i ≤ threshold → 0`, else 1) and
/// re-evaluates every trap with the rounded electrodes.
pub fn round_rails<T: Real>(
    result: &OptimizationResult<T>,
    basis: &FourierBasis<T>,
    system: &ConstraintSystem<T>,
    threshold: T,
) -> Result<RoundingReport<T>> {
    let a = round_at(&result.a, threshold);
    let flipped = a.iter().zip(&result.a).filter(|(r, o)| **r != **o).count();
    let scale = if flipped == 0 { result.scale } else { project_scale(&a, &result.inhom.g) };
    let before = basis.field(&result.a)?;
    let after = basis.field(&a)?;
    let c = result.scale.abs();
    let mut traps = Vec::with_capacity(system.traps.len());
    for t in &system.traps {
        let gnorm = frobenius(&t.gamma);
        let sb = before.evaluate(t.position, Order::Hessian)?;
        let sa = after.evaluate(t.position, Order::Hessian)?;
        let dev = |h: &[[T; 3]; 3], s: T| {
            let mut d = *h;
            for r in 0..3 {
                for k in 0..3 {
                    d[r][k] = d[r][k] - s * t.gamma[r][k];
                }
            }
            frobenius(&d) / (c * gnorm)
        };
        traps.push(TrapRounding {
            label: t.label.clone(),
            field_before: norm3(&sb.gradient) / (c * gnorm * t.position.z),
            field_after: norm3(&sa.gradient) / (c * gnorm * t.position.z),
            curvature_deviation_before: dev(&sb.hessian, result.scale),
            curvature_deviation_after: dev(&sa.hessian, result.scale),
        });
    }
    Ok(RoundingReport { a, scale, flipped, traps })
}
