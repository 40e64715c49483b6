//! Fourier representation of the periodic electrode potential above the
//! electrode plane.
//!
//! A boundary pattern `φ(x, y, 0) = Σ_G F(G) e^{iG·ρ}` extends into `z > 0`
//! as `Σ_G F(G) e^{iG·ρ − |G| z}`, which solves the Laplace equation mode by
//! mode. Only the half plane of reciprocal vectors is stored; the other half
//! follows from Hermitian symmetry since all amplitudes are real.

use num_complex::Complex;
use rustfft::FftDirection;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::Fft2;
use crate::lattice::{BravaisLattice, GridKind, PatchGrid};
use crate::scalar::{Mat3, Real, Vec2, Vec3};

/// Default cap on `stored modes × base shapes`.
pub const DEFAULT_TABLE_BUDGET: usize = 1 << 26;

/// Relative size below which a mode's derivative envelope is dropped.
const PRUNE_REL: f64 = 1e-17;

/// Point above the electrode plane: fractional in-plane coordinates and a
/// height in units of L0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position<T> {
    pub frac: Vec2<T>,
    pub z: T,
}

impl<T: Real> Position<T> {
    pub fn new(x: T, y: T, z: T) -> Self {
        Position { frac: [x, y], z }
    }
}

/// Single derivative of the potential selected for a constraint row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Derivative {
    Potential,
    Dx,
    Dy,
    Dz,
    Dxx,
    Dyy,
    Dzz,
    Dxy,
    Dxz,
    Dyz,
}

impl Derivative {
    pub const GRADIENT: [Derivative; 3] = [Derivative::Dx, Derivative::Dy, Derivative::Dz];
    /// Independent curvature components; `zz` follows from tracelessness.
    pub const CURVATURE: [Derivative; 5] =
        [Derivative::Dxx, Derivative::Dyy, Derivative::Dxy, Derivative::Dxz, Derivative::Dyz];

    pub fn axes(self) -> &'static [usize] {
        match self {
            Derivative::Potential => &[],
            Derivative::Dx => &[0],
            Derivative::Dy => &[1],
            Derivative::Dz => &[2],
            Derivative::Dxx => &[0, 0],
            Derivative::Dyy => &[1, 1],
            Derivative::Dzz => &[2, 2],
            Derivative::Dxy => &[0, 1],
            Derivative::Dxz => &[0, 2],
            Derivative::Dyz => &[1, 2],
        }
    }

    pub fn order(self) -> usize {
        self.axes().len()
    }

    /// Picks this component out of an evaluated sample.
    pub fn component<T: Real>(self, s: &FieldSample<T>) -> T {
        match self.axes() {
            [] => s.value,
            [a] => s.gradient[*a],
            [a, b] => s.hessian[*a][*b],
            _ => unreachable!(),
        }
    }
}

/// Highest derivative order to compute in [`ElectrodeField::evaluate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Order {
    Value,
    Gradient,
    Hessian,
    Third,
}

impl Order {
    fn degree(self) -> i32 {
        match self {
            Order::Value => 0,
            Order::Gradient => 1,
            Order::Hessian => 2,
            Order::Third => 3,
        }
    }
}

/// Potential (units of U_rf), gradient (U_rf/L0) and Hessian (U_rf/L0²) at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSample<T> {
    pub value: T,
    pub gradient: Vec3<T>,
    pub hessian: Mat3<T>,
    /// Third derivatives, only when requested with [`Order::Third`].
    pub third: Option<[Mat3<T>; 3]>,
}

#[derive(Debug, Clone)]
struct Mode<T> {
    m1: isize,
    m2: isize,
    g: Vec2<T>,
    norm: T,
    /// 1 for G = 0, 2 for every stored half-plane mode.
    weight: T,
}

impl<T: Real> Mode<T> {
    /// Complex factor of the spatial derivative along `axis`.
    #[inline]
    fn factor(&self, axis: usize) -> Complex<T> {
        match axis {
            0 => Complex::new(T::zero(), self.g[0]),
            1 => Complex::new(T::zero(), self.g[1]),
            _ => Complex::new(-self.norm, T::zero()),
        }
    }

    fn derivative_factor(&self, d: Derivative) -> Complex<T> {
        d.axes()
            .iter()
            .fold(Complex::new(T::one(), T::zero()), |acc, &a| acc * self.factor(a))
    }
}

#[inline]
fn sinc<T: Real>(x: T) -> T {
    if x.abs() < T::lit(1e-4) {
        T::one() - x * x / T::lit(6.0)
    } else {
        x.sin() / x
    }
}

/// `∫_0^1 e^{-iαt} dt`.
#[inline]
fn edge_phase<T: Real>(alpha: T) -> Complex<T> {
    let h = alpha * T::lit(0.5);
    Complex::from_polar(sinc(h), -h)
}

/// `∫_poly e^{-i k·s} d²s` for a simple counterclockwise polygon, by the
/// divergence theorem turned into a sum over edges.
pub fn polygon_transform<T: Real>(poly: &[Vec2<T>], k: Vec2<T>) -> Complex<T> {
    let k2 = k[0] * k[0] + k[1] * k[1];
    if k2 == T::zero() {
        return Complex::new(crate::lattice::polygon_area(poly), T::zero());
    }
    let n = poly.len();
    let mut acc = Complex::new(T::zero(), T::zero());
    for j in 0..n {
        let p = poly[j];
        let q = poly[(j + 1) % n];
        let e = [q[0] - p[0], q[1] - p[1]];
        let flux = k[0] * e[1] - k[1] * e[0];
        let start = Complex::from_polar(T::one(), -(k[0] * p[0] + k[1] * p[1]));
        acc = acc + start * edge_phase(k[0] * e[0] + k[1] * e[1]) * flux;
    }
    acc * Complex::new(T::zero(), T::one() / k2)
}

/// Separable closed form for the axis-aligned box `[0,h1] × [0,h2]`.
pub fn box_transform<T: Real>(h1: T, h2: T, k: Vec2<T>) -> Complex<T> {
    edge_phase(k[0] * h1) * edge_phase(k[1] * h2) * (h1 * h2)
}

/// Fourier coefficient `(1/A_cell) ∫_patch e^{-iG·r} d²r` for
/// `G = m1·g1 + m2·g2`, with the patch given in fractional coordinates.
pub fn patch_fourier_coeff<T: Real>(shape: &[Vec2<T>], m1: isize, m2: isize) -> Complex<T> {
    let k = [T::TAU() * T::of_isize(m1), T::TAU() * T::of_isize(m2)];
    polygon_transform(shape, k)
}

/// Mode table plus per-base-shape Fourier coefficients of a patch grid.
#[derive(Debug, Clone)]
pub struct FourierBasis<T: Real> {
    lattice: BravaisLattice<T>,
    grid: PatchGrid<T>,
    n_cut: usize,
    modes: Vec<Mode<T>>,
    /// `coeffs[s][k]`: coefficient of base shape `s` for stored mode `k`.
    coeffs: Vec<Vec<Complex<T>>>,
    forward: Fft2<T>,
}

/// Builds the basis with the default table budget.
pub fn build_basis<T: Real>(
    lattice: &BravaisLattice<T>,
    grid: &PatchGrid<T>,
    n_cut: usize,
) -> Result<FourierBasis<T>> {
    FourierBasis::with_budget(lattice, grid, n_cut, DEFAULT_TABLE_BUDGET)
}

/// Default cutoff: twice the finer patch resolution.
pub fn default_cutoff(kind: GridKind) -> usize {
    let (n1, n2) = kind.dims();
    2 * n1.max(n2)
}

impl<T: Real> FourierBasis<T> {
    pub fn with_budget(
        lattice: &BravaisLattice<T>,
        grid: &PatchGrid<T>,
        n_cut: usize,
        budget: usize,
    ) -> Result<Self> {
        if n_cut == 0 {
            return Err(Error::InvalidCutoff(n_cut));
        }
        let side = 2 * n_cut + 1;
        let stored = (side * side) / 2 + 1;
        let entries = stored * grid.base_shapes().len();
        if entries > budget {
            return Err(Error::MemoryBudget { entries, limit: budget });
        }
        let k = n_cut as isize;
        let mut modes = Vec::with_capacity(stored);
        for m1 in 0..=k {
            for m2 in -k..=k {
                if m1 == 0 && m2 < 0 {
                    continue;
                }
                let g = lattice.wavevector(m1, m2);
                let norm = (g[0] * g[0] + g[1] * g[1]).sqrt();
                let weight = if m1 == 0 && m2 == 0 { T::one() } else { T::lit(2.0) };
                modes.push(Mode { m1, m2, g, norm, weight });
            }
        }
        modes.sort_by(|a, b| {
            a.norm
                .partial_cmp(&b.norm)
                .unwrap()
                .then(a.m1.cmp(&b.m1))
                .then(a.m2.cmp(&b.m2))
        });
        let (n1, n2) = grid.dims();
        let coeffs = grid
            .base_shapes()
            .iter()
            .map(|shape| {
                modes
                    .iter()
                    .map(|md| base_coefficient(grid.kind(), shape, md.m1, md.m2, n1, n2))
                    .collect()
            })
            .collect();
        Ok(FourierBasis {
            lattice: lattice.clone(),
            grid: grid.clone(),
            n_cut,
            modes,
            coeffs,
            forward: Fft2::new(n1, n2, FftDirection::Forward),
        })
    }

    pub fn lattice(&self) -> &BravaisLattice<T> {
        &self.lattice
    }

    pub fn grid(&self) -> &PatchGrid<T> {
        &self.grid
    }

    pub fn n_cut(&self) -> usize {
        self.n_cut
    }

    /// Number of reciprocal vectors represented, `(2·n_cut + 1)²`.
    pub fn mode_count(&self) -> usize {
        let side = 2 * self.n_cut + 1;
        side * side
    }

    pub fn shape_count(&self) -> usize {
        self.coeffs.len()
    }

    /// Coefficient `c_i(G)` of patch `i` for `G = m1·g1 + m2·g2`.
    pub fn coefficient(&self, i: usize, m1: isize, m2: isize) -> Result<Complex<T>> {
        if i >= self.grid.len() {
            return Err(Error::PatchIndex { index: i, count: self.grid.len() });
        }
        let shape = &self.grid.base_shapes()[self.grid.shape_of(i)];
        let (n1, n2) = self.grid.dims();
        let c0 = base_coefficient(self.grid.kind(), shape, m1, m2, n1, n2);
        let t = self.grid.translation(i);
        let phase = -T::TAU() * (T::of_isize(m1) * t[0] + T::of_isize(m2) * t[1]);
        Ok(c0 * Complex::from_polar(T::one(), phase))
    }

    /// Number of leading (|G|-sorted) modes whose derivative envelope
    /// `|G|^order e^{-|G| z}` is not negligible at height `z`.
    fn mode_limit(&self, z: T, order: i32) -> usize {
        let order_t = T::from_i32(order).unwrap();
        let envelope = |g: T| g.powi(order) * (-g * z).exp();
        // envelope peaks at |G| = order / z
        let peak = if order == 0 { T::one() } else { envelope(order_t / z) };
        let floor = peak * T::lit(PRUNE_REL).max(T::EPS * T::lit(0.01));
        let first_past_peak = self.modes.partition_point(|m| m.norm * z <= order_t);
        let tail = &self.modes[first_past_peak..];
        first_past_peak + tail.partition_point(|m| envelope(m.norm) >= floor)
    }

    fn check_amplitudes(&self, a: &[T]) -> Result<()> {
        if a.len() != self.grid.len() {
            return Err(Error::LengthMismatch { expected: self.grid.len(), got: a.len() });
        }
        Ok(())
    }

    /// Aggregate boundary coefficients `F(G) = Σ_i a_i c_i(G)` via a patch-grid FFT.
    pub fn field(&self, a: &[T]) -> Result<ElectrodeField<'_, T>> {
        self.check_amplitudes(a)?;
        let (n1, n2) = self.grid.dims();
        let zero = Complex::new(T::zero(), T::zero());
        let mut coeffs = vec![zero; self.modes.len()];
        for (s, base) in self.coeffs.iter().enumerate() {
            let mut spectrum: Vec<Complex<T>> = (0..n1 * n2)
                .map(|cell| Complex::new(a[cell * self.coeffs.len() + s], T::zero()))
                .collect();
            self.forward.process(&mut spectrum);
            for (k, md) in self.modes.iter().enumerate() {
                let idx = fold_index(md.m1, md.m2, n1, n2);
                coeffs[k] = coeffs[k] + base[k] * spectrum[idx] * md.weight;
            }
        }
        Ok(ElectrodeField { basis: self, coeffs })
    }

    /// Same as [`FourierBasis::field`] but summing `a_i c_i(G)` patch by patch.
    pub fn field_direct(&self, a: &[T]) -> Result<ElectrodeField<'_, T>> {
        self.check_amplitudes(a)?;
        let zero = Complex::new(T::zero(), T::zero());
        let coeffs = self
            .modes
            .iter()
            .enumerate()
            .map(|(k, md)| {
                let mut acc = zero;
                for (i, &ai) in a.iter().enumerate() {
                    if ai == T::zero() {
                        continue;
                    }
                    let t = self.grid.translation(i);
                    let ph = -T::TAU() * (T::of_isize(md.m1) * t[0] + T::of_isize(md.m2) * t[1]);
                    acc = acc + self.coeffs[self.grid.shape_of(i)][k] * Complex::from_polar(ai, ph);
                }
                acc * md.weight
            })
            .collect();
        Ok(ElectrodeField { basis: self, coeffs })
    }

    /// Field built directly from boundary Fourier coefficients. Each entry
    /// `(m1, m2, F)` sets the amplitude of `e^{iG·ρ}`; its Hermitian partner
    /// is implied, so a pure cosine `cos(G·ρ)` is `F = 1/2`.
    pub fn field_from_modes(&self, entries: &[(isize, isize, Complex<T>)]) -> ElectrodeField<'_, T> {
        let zero = Complex::new(T::zero(), T::zero());
        let mut coeffs = vec![zero; self.modes.len()];
        for &(m1, m2, f) in entries {
            let (m1, m2, f) = if m1 < 0 || (m1 == 0 && m2 < 0) { (-m1, -m2, f.conj()) } else { (m1, m2, f) };
            if let Some(k) = self.modes.iter().position(|md| md.m1 == m1 && md.m2 == m2) {
                coeffs[k] = coeffs[k] + f * self.modes[k].weight;
            }
        }
        ElectrodeField { basis: self, coeffs }
    }

    /// Full potential, gradient and Hessian for amplitudes `a` at `pos`.
    pub fn evaluate(&self, a: &[T], pos: Position<T>, order: Order) -> Result<FieldSample<T>> {
        self.field(a)?.evaluate(pos, order)
    }

    /// Per-patch coefficients of one derivative at `pos`: `row[i]` is the
    /// derivative of the unit-amplitude potential of patch `i`.
    pub fn evaluate_row(&self, pos: Position<T>, derivative: Derivative) -> Result<Vec<T>> {
        Ok(self.evaluate_rows(pos, &[derivative])?.pop().unwrap())
    }

    pub fn evaluate_rows(&self, pos: Position<T>, derivatives: &[Derivative]) -> Result<Vec<Vec<T>>> {
        check_height(pos.z)?;
        let (n1, n2) = self.grid.dims();
        let shapes = self.coeffs.len();
        let max_order = derivatives.iter().map(|d| d.order()).max().unwrap_or(0) as i32;
        let limit = self.mode_limit(pos.z, max_order);
        let zero = Complex::new(T::zero(), T::zero());
        let mut rows = vec![vec![T::zero(); self.grid.len()]; derivatives.len()];
        let mut plane = vec![zero; n1 * n2];
        for s in 0..shapes {
            for (row, &d) in rows.iter_mut().zip(derivatives) {
                plane.iter_mut().for_each(|c| *c = zero);
                for (k, md) in self.modes[..limit].iter().enumerate() {
                    let ph = T::TAU() * (T::of_isize(md.m1) * pos.frac[0] + T::of_isize(md.m2) * pos.frac[1]);
                    let wave = Complex::from_polar((-md.norm * pos.z).exp() * md.weight, ph);
                    plane[fold_index(md.m1, md.m2, n1, n2)] =
                        plane[fold_index(md.m1, md.m2, n1, n2)] + self.coeffs[s][k] * wave * md.derivative_factor(d);
                }
                self.forward.process(&mut plane);
                for q in 0..n2 {
                    for p in 0..n1 {
                        row[self.grid.compose(p, q, s)] = plane[q * n1 + p].re;
                    }
                }
            }
        }
        Ok(rows)
    }
}

fn check_height<T: Real>(z: T) -> Result<()> {
    if !(z > T::zero()) {
        return Err(Error::BelowPlane { z: z.to_f64_lossy() });
    }
    Ok(())
}

#[inline]
fn fold_index(m1: isize, m2: isize, n1: usize, n2: usize) -> usize {
    let k1 = m1.rem_euclid(n1 as isize) as usize;
    let k2 = m2.rem_euclid(n2 as isize) as usize;
    k2 * n1 + k1
}

fn base_coefficient<T: Real>(
    kind: GridKind,
    shape: &[Vec2<T>],
    m1: isize,
    m2: isize,
    n1: usize,
    n2: usize,
) -> Complex<T> {
    match kind {
        GridKind::Oblique { .. } => {
            let k = [T::TAU() * T::of_isize(m1), T::TAU() * T::of_isize(m2)];
            box_transform(T::one() / T::of_usize(n1), T::one() / T::of_usize(n2), k)
        }
        GridKind::Hexagonal { .. } => patch_fourier_coeff(shape, m1, m2),
    }
}

/// Boundary coefficients of one electrode pattern, ready for evaluation.
#[derive(Debug, Clone)]
pub struct ElectrodeField<'a, T: Real> {
    basis: &'a FourierBasis<T>,
    /// Weighted half-plane coefficients, aligned with the basis mode table.
    coeffs: Vec<Complex<T>>,
}

impl<'a, T: Real> ElectrodeField<'a, T> {
    pub fn basis(&self) -> &'a FourierBasis<T> {
        self.basis
    }

    /// Mean boundary potential, i.e. the rf fill fraction for binary maps.
    pub fn mean(&self) -> T {
        self.basis
            .modes
            .iter()
            .zip(&self.coeffs)
            .find(|(m, _)| m.m1 == 0 && m.m2 == 0)
            .map(|(_, c)| c.re)
            .unwrap_or_else(T::zero)
    }

    /// Boundary coefficient `F(G)` for `G = m1·g1 + m2·g2`, if within the cutoff.
    pub fn coefficient(&self, m1: isize, m2: isize) -> Option<Complex<T>> {
        let (m1, m2, conj) = if m1 < 0 || (m1 == 0 && m2 < 0) { (-m1, -m2, true) } else { (m1, m2, false) };
        let k = self.basis.modes.iter().position(|md| md.m1 == m1 && md.m2 == m2)?;
        let c = self.coeffs[k] / self.basis.modes[k].weight;
        Some(if conj { c.conj() } else { c })
    }

    /// Nonzero reciprocal vector with the largest `|F(G)|`: `(m1, m2, |G|)`.
    pub fn dominant_mode(&self) -> Option<(isize, isize, T)> {
        self.basis
            .modes
            .iter()
            .zip(&self.coeffs)
            .filter(|(m, _)| m.m1 != 0 || m.m2 != 0)
            .max_by(|(_, a), (_, b)| a.norm().partial_cmp(&b.norm()).unwrap())
            .map(|(m, _)| (m.m1, m.m2, m.norm))
    }

    pub fn evaluate(&self, pos: Position<T>, order: Order) -> Result<FieldSample<T>> {
        check_height(pos.z)?;
        let degree = order.degree();
        let limit = self.basis.mode_limit(pos.z, degree.max(1));
        let mut value = T::zero();
        let mut grad = [Complex::new(T::zero(), T::zero()); 3];
        let mut hess = [[Complex::new(T::zero(), T::zero()); 3]; 3];
        let mut third = [[[Complex::new(T::zero(), T::zero()); 3]; 3]; 3];
        for (md, &c) in self.basis.modes[..limit].iter().zip(&self.coeffs) {
            let ph = T::TAU() * (T::of_isize(md.m1) * pos.frac[0] + T::of_isize(md.m2) * pos.frac[1]);
            let f = c * Complex::from_polar((-md.norm * pos.z).exp(), ph);
            value = value + f.re;
            if degree < 1 {
                continue;
            }
            let fac = [md.factor(0), md.factor(1), md.factor(2)];
            for a in 0..3 {
                let fa = f * fac[a];
                grad[a] = grad[a] + fa;
                if degree < 2 {
                    continue;
                }
                for b in a..3 {
                    let fab = fa * fac[b];
                    hess[a][b] = hess[a][b] + fab;
                    if degree < 3 {
                        continue;
                    }
                    for g in b..3 {
                        third[a][b][g] = third[a][b][g] + fab * fac[g];
                    }
                }
            }
        }
        let gradient = [grad[0].re, grad[1].re, grad[2].re];
        let mut hessian = [[T::zero(); 3]; 3];
        for a in 0..3 {
            for b in a..3 {
                hessian[a][b] = hess[a][b].re;
                hessian[b][a] = hess[a][b].re;
            }
        }
        let third = (degree >= 3).then(|| {
            let mut t = [[[T::zero(); 3]; 3]; 3];
            for a in 0..3 {
                for b in 0..3 {
                    for g in 0..3 {
                        let mut idx = [a, b, g];
                        idx.sort_unstable();
                        t[a][b][g] = third[idx[0]][idx[1]][idx[2]].re;
                    }
                }
            }
            t
        });
        Ok(FieldSample { value, gradient, hessian, third })
    }

    /// Prepares repeated gradient evaluation on an `nx × ny` in-plane grid.
    pub fn slicer(&self, nx: usize, ny: usize) -> Slicer<'_, 'a, T> {
        Slicer { field: self, nx, ny, inverse: Fft2::new(nx, ny, FftDirection::Inverse) }
    }
}

/// Gradient evaluation on the regular grid `(i/nx, j/ny)` of fractional
/// coordinates, one height at a time.
pub struct Slicer<'f, 'a, T: Real> {
    field: &'f ElectrodeField<'a, T>,
    nx: usize,
    ny: usize,
    inverse: Fft2<T>,
}

impl<T: Real> Slicer<'_, '_, T> {
    /// Gradient components at height `z`, each laid out as `[j * nx + i]`.
    ///
    /// Modes are folded modulo the grid size before the inverse transform,
    /// which is exact at the grid points.
    pub fn gradient(&self, z: T) -> Result<[Vec<T>; 3]> {
        check_height(z)?;
        let basis = self.field.basis;
        let limit = basis.mode_limit(z, 1);
        let zero = Complex::new(T::zero(), T::zero());
        let mut planes = [
            vec![zero; self.nx * self.ny],
            vec![zero; self.nx * self.ny],
            vec![zero; self.nx * self.ny],
        ];
        for (md, &c) in basis.modes[..limit].iter().zip(&self.field.coeffs) {
            let f = c * (-md.norm * z).exp();
            let idx = fold_index(md.m1, md.m2, self.nx, self.ny);
            for (axis, plane) in planes.iter_mut().enumerate() {
                plane[idx] = plane[idx] + f * md.factor(axis);
            }
        }
        let mut out: [Vec<T>; 3] = Default::default();
        for (axis, plane) in planes.iter_mut().enumerate() {
            self.inverse.process(plane);
            out[axis] = plane.iter().map(|c| c.re).collect();
        }
        Ok(out)
    }
}
