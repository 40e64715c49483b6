use log::debug;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::grid::PseudoGrid;
use crate::constraints::TrapSpec;
use crate::error::Result;
use crate::field::{ElectrodeField, Order, Position};
use crate::scalar::{dot3, norm3, solve3, Real, Vec3};

/// A strict local minimum of `ψ`, refined off the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Minimum<T> {
    pub position: Position<T>,
    pub psi: T,
    /// `ψ` is below `(1e-4 / z)²`: an rf null.
    pub field_null: bool,
    /// Index of the designed trap within the classification radius.
    pub designed: Option<usize>,
    /// Newton refinement moved the point off the grid.
    pub refined: bool,
}

const NEWTON_STEPS: usize = 40;
const MERGE_RADIUS: f64 = 1e-4;

/// Strict minima of `ψ` under the 26-neighbour stencil, refined with damped
/// Newton steps on `∇ψ` and classified against `traps` within `radius`.
///
/// The lowest and highest grid layers never host a minimum.
pub fn find_minima<T: Real>(
    grid: &PseudoGrid<T>,
    field: &ElectrodeField<'_, T>,
    traps: &[TrapSpec<T>],
    radius: T,
) -> Result<Vec<Minimum<T>>> {
    let (_, _, nz) = grid.dims();
    let slice_max: Vec<T> = (0..nz).map(|k| grid.slice_max(k)).collect();
    let values = grid.values();
    let candidates: Vec<usize> = (0..grid.len())
        .into_par_iter()
        .filter(|&idx| {
            let (_, _, k) = grid.unravel(idx);
            if k == 0 || k + 1 == nz {
                return false;
            }
            let eps = T::lit(1e-10) * slice_max[k - 1].max(slice_max[k]).max(slice_max[k + 1]);
            let v = values[idx];
            let mut nb = Vec::with_capacity(26);
            grid.neighbors(idx, &mut nb);
            nb.iter().all(|&n| values[n] - v > eps)
        })
        .collect();
    debug!("{} grid minima before refinement", candidates.len());
    let lattice = field.basis().lattice();
    let (nx, ny, _) = grid.dims();
    let h = grid.heights();
    let cell = {
        let ca = lattice.to_cartesian([T::one() / T::of_usize(nx), T::zero()]);
        let cb = lattice.to_cartesian([T::zero(), T::one() / T::of_usize(ny)]);
        norm3(&[ca[0], ca[1], T::zero()]).max(norm3(&[cb[0], cb[1], T::zero()])).max(h[1] - h[0])
    };
    let refined = candidates
        .par_iter()
        .map(|&idx| refine(field, grid.position(idx), values[idx], T::lit(2.0) * cell))
        .collect::<Result<Vec<_>>>()?;
    let mut out: Vec<Minimum<T>> = Vec::new();
    for (position, psi, ok) in refined {
        let dup = out.iter().any(|m| {
            let d = lattice.periodic_distance(m.position.frac, position.frac);
            let dz = m.position.z - position.z;
            (d * d + dz * dz).sqrt() < T::lit(MERGE_RADIUS)
        });
        if dup {
            continue;
        }
        let designed = traps
            .iter()
            .enumerate()
            .map(|(t, trap)| {
                let d = lattice.periodic_distance(trap.position.frac, position.frac);
                let dz = trap.position.z - position.z;
                (t, (d * d + dz * dz).sqrt())
            })
            .filter(|(_, d)| *d < radius)
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .map(|(t, _)| t);
        let threshold = T::lit(1e-4) / position.z;
        out.push(Minimum { position, psi, field_null: psi < threshold * threshold, designed, refined: ok });
    }
    out.sort_by(|a, b| a.psi.partial_cmp(&b.psi).unwrap());
    Ok(out)
}

/// `ψ`, `∇ψ` and the Hessian of `ψ` at a point (Cartesian derivatives).
fn psi_derivatives<T: Real>(field: &ElectrodeField<'_, T>, pos: Position<T>) -> Result<(T, Vec3<T>, [[T; 3]; 3])> {
    let s = field.evaluate(pos, Order::Third)?;
    let e = s.gradient;
    let h = s.hessian;
    let t = s.third.expect("third derivatives requested");
    let two = T::lit(2.0);
    let mut grad = [T::zero(); 3];
    let mut hess = [[T::zero(); 3]; 3];
    for a in 0..3 {
        grad[a] = two * (e[0] * h[0][a] + e[1] * h[1][a] + e[2] * h[2][a]);
        for b in 0..3 {
            let mut acc = T::zero();
            for k in 0..3 {
                acc = acc + h[k][a] * h[k][b] + e[k] * t[k][a][b];
            }
            hess[a][b] = two * acc;
        }
    }
    Ok((dot3(&e, &e), grad, hess))
}

/// Damped Newton descent on `ψ` from a grid point, never leaving a ball of
/// radius `reach`. Falls back to the start point when it wanders off.
fn refine<T: Real>(
    field: &ElectrodeField<'_, T>,
    start: Position<T>,
    start_psi: T,
    reach: T,
) -> Result<(Position<T>, T, bool)> {
    let lattice = field.basis().lattice();
    let origin = lattice.to_cartesian(start.frac);
    let origin = [origin[0], origin[1], start.z];
    let mut x = origin;
    let at = |c: Vec3<T>| {
        let f = lattice.to_fractional([c[0], c[1]]);
        Position::new(f[0], f[1], c[2])
    };
    let (mut psi, mut grad, mut hess) = psi_derivatives(field, start)?;
    for _ in 0..NEWTON_STEPS {
        let Some(step) = solve3(&hess, &grad) else { break };
        let mut t = T::one();
        let mut accepted = false;
        for _ in 0..30 {
            let trial = [x[0] - t * step[0], x[1] - t * step[1], x[2] - t * step[2]];
            let moved = [trial[0] - origin[0], trial[1] - origin[1], trial[2] - origin[2]];
            if trial[2] > T::zero() && norm3(&moved) <= reach {
                let (p, g, hh) = psi_derivatives(field, at(trial))?;
                if p <= psi {
                    x = trial;
                    psi = p;
                    grad = g;
                    hess = hh;
                    accepted = true;
                    break;
                }
            }
            t = t * T::lit(0.5);
        }
        if !accepted || t * norm3(&step) < T::lit(1e-13) * (T::one() + x[2]) {
            break;
        }
    }
    if x == origin {
        return Ok((start, start_psi, false));
    }
    let mut pos = at(x);
    pos.frac = [pos.frac[0] - pos.frac[0].floor(), pos.frac[1] - pos.frac[1].floor()];
    Ok((pos, psi, true))
}
