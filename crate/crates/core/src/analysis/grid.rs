use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{ElectrodeField, Position};
use crate::scalar::Real;

/// Upper bound on the number of grid cells.
pub const MAX_GRID_CELLS: usize = 1 << 27;

/// Sampling of the landscape: one unit cell in-plane, `z ∈ [z_lo, z_hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridOptions {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    /// Lowest sampled height; 0.05 when unset.
    pub z_lo: Option<f64>,
    /// Highest sampled height; `max(3·z_max, 2·cell diameter)` when unset.
    pub z_hi: Option<f64>,
}

impl Default for GridOptions {
    fn default() -> Self {
        GridOptions { nx: 96, ny: 96, nz: 128, z_lo: None, z_hi: None }
    }
}

/// `ψ = ‖∇φ‖²` sampled on `(i/nx, j/ny)` in fractional coordinates and
/// evenly spaced heights. Periodic in-plane, open in `z`.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoGrid<T> {
    nx: usize,
    ny: usize,
    z: Vec<T>,
    psi: Vec<T>,
}

/// Samples `ψ` over the region described by `opts`; `z_max` is the highest
/// trap, used for the default upper bound.
pub fn pseudopotential_grid<T: Real>(
    field: &ElectrodeField<'_, T>,
    opts: &GridOptions,
    z_max: T,
) -> Result<PseudoGrid<T>> {
    let GridOptions { nx, ny, nz, .. } = *opts;
    if nx < 3 || ny < 3 || nz < 3 {
        return Err(Error::InvalidResolution(format!("landscape grid {nx}x{ny}x{nz} needs at least 3 points per axis")));
    }
    let cells = nx.saturating_mul(ny).saturating_mul(nz);
    if cells > MAX_GRID_CELLS {
        return Err(Error::TooLarge { what: "landscape grid", size: cells, limit: MAX_GRID_CELLS });
    }
    let z_lo = T::lit(opts.z_lo.unwrap_or(0.05));
    let diameter = field.basis().lattice().cell_diameter();
    let z_hi = opts.z_hi.map(T::lit).unwrap_or_else(|| (T::lit(3.0) * z_max).max(T::lit(2.0) * diameter));
    if !(z_lo > T::zero() && z_hi > z_lo) {
        return Err(Error::InvalidResolution(format!("landscape heights must satisfy 0 < z_lo < z_hi, got [{z_lo}, {z_hi}]")));
    }
    let dz = (z_hi - z_lo) / T::of_usize(nz - 1);
    let z: Vec<T> = (0..nz).map(|k| z_lo + dz * T::of_usize(k)).collect();
    let slicer = field.slicer(nx, ny);
    let slices = z
        .par_iter()
        .map(|&zk| {
            let [gx, gy, gz] = slicer.gradient(zk)?;
            Ok(gx.iter().zip(&gy).zip(&gz).map(|((x, y), z)| *x * *x + *y * *y + *z * *z).collect::<Vec<T>>())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PseudoGrid { nx, ny, z, psi: slices.concat() })
}

impl<T: Real> PseudoGrid<T> {
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.nx, self.ny, self.z.len())
    }

    pub fn len(&self) -> usize {
        self.psi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.psi.is_empty()
    }

    pub fn heights(&self) -> &[T] {
        &self.z
    }

    pub fn values(&self) -> &[T] {
        &self.psi
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.ny + j) * self.nx + i
    }

    #[inline]
    pub fn unravel(&self, idx: usize) -> (usize, usize, usize) {
        let i = idx % self.nx;
        let j = (idx / self.nx) % self.ny;
        (i, j, idx / (self.nx * self.ny))
    }

    pub fn value(&self, i: usize, j: usize, k: usize) -> T {
        self.psi[self.index(i, j, k)]
    }

    pub fn position(&self, idx: usize) -> Position<T> {
        let (i, j, k) = self.unravel(idx);
        Position::new(T::of_usize(i) / T::of_usize(self.nx), T::of_usize(j) / T::of_usize(self.ny), self.z[k])
    }

    /// Grid cell closest to `pos` (heights clamped to the sampled range).
    pub fn nearest(&self, pos: Position<T>) -> usize {
        let wrap = |f: T, n: usize| {
            let r = (f * T::of_usize(n)).round().to_f64_lossy() as i64;
            r.rem_euclid(n as i64) as usize
        };
        let nz = self.z.len();
        let dz = self.z[1] - self.z[0];
        let k = ((pos.z - self.z[0]) / dz).round().to_f64_lossy().clamp(0.0, (nz - 1) as f64) as usize;
        self.index(wrap(pos.frac[0], self.nx), wrap(pos.frac[1], self.ny), k)
    }

    pub fn max(&self) -> T {
        self.psi.iter().copied().fold(T::zero(), T::max)
    }

    pub fn slice_max(&self, k: usize) -> T {
        let n = self.nx * self.ny;
        self.psi[k * n..(k + 1) * n].iter().copied().fold(T::zero(), T::max)
    }

    /// Indices of the 26-neighbourhood, wrapping in-plane and truncated in `z`.
    pub fn neighbors(&self, idx: usize, out: &mut Vec<usize>) {
        out.clear();
        let (i, j, k) = self.unravel(idx);
        let nz = self.z.len();
        for dk in -1i64..=1 {
            let kk = k as i64 + dk;
            if kk < 0 || kk >= nz as i64 {
                continue;
            }
            for dj in -1i64..=1 {
                let jj = (j as i64 + dj).rem_euclid(self.ny as i64) as usize;
                for di in -1i64..=1 {
                    if di == 0 && dj == 0 && dk == 0 {
                        continue;
                    }
                    let ii = (i as i64 + di).rem_euclid(self.nx as i64) as usize;
                    out.push(self.index(ii, jj, kk as usize));
                }
            }
        }
    }
}
