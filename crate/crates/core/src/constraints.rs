//! Linear constraints `A·a = C·b` expressing field-free traps with
//! prescribed curvature tensors, plus optional extra field constraints used
//! to suppress spurious traps.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Derivative, ElectrodeField, FourierBasis, Position};
use crate::scalar::{frobenius, trace, Mat3, Real, Vec3};

/// Minimum separation (L0) below which two positions are considered equal.
const COINCIDENCE: f64 = 1e-9;

/// One desired microtrap: where it sits and the shape of its potential
/// curvature tensor (scale is free and absorbed into `C`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrapSpec<T> {
    pub label: String,
    pub position: Position<T>,
    pub gamma: Mat3<T>,
}

impl<T: Real> TrapSpec<T> {
    pub fn new(label: impl Into<String>, position: Position<T>, gamma: Mat3<T>) -> Self {
        TrapSpec { label: label.into(), position, gamma }
    }

    /// Checks height, symmetry and tracelessness of the target tensor.
    pub fn validate(&self) -> Result<()> {
        if !(self.position.z > T::zero()) {
            return Err(Error::InvalidHeight { label: self.label.clone(), z: self.position.z.to_f64_lossy() });
        }
        let norm = frobenius(&self.gamma);
        let sym_tol = T::lit(1e-12) * (T::one() + norm);
        for r in 0..3 {
            for c in 0..r {
                if (self.gamma[r][c] - self.gamma[c][r]).abs() > sym_tol {
                    return Err(Error::NonSymmetric { label: self.label.clone() });
                }
            }
        }
        let tr = trace(&self.gamma);
        if !(tr.abs() <= T::lit(1e-10) * norm) {
            return Err(Error::NonTraceless { label: self.label.clone(), trace: tr.to_f64_lossy() });
        }
        Ok(())
    }

    /// Same trap with `gamma` rescaled so its largest |eigenvalue| is 1.
    pub fn normalized(&self) -> Self {
        let scale = max_abs_eigenvalue(&self.gamma);
        let mut out = self.clone();
        if scale > T::zero() {
            out.gamma.iter_mut().flatten().for_each(|g| *g = *g / scale);
        }
        out
    }
}

/// Cylindrically symmetric out-of-plane quadrupole `diag(-1/2, -1/2, 1)`.
pub fn cylindrical_quadrupole<T: Real>() -> Mat3<T> {
    let h = T::lit(-0.5);
    let z = T::zero();
    [[h, z, z], [z, h, z], [z, z, T::one()]]
}

/// Eigenvalues of a symmetric 3×3 matrix in ascending order (closed form).
pub fn symmetric_eigenvalues<T: Real>(m: &Mat3<T>) -> Vec3<T> {
    let p1 = m[0][1] * m[0][1] + m[0][2] * m[0][2] + m[1][2] * m[1][2];
    let q = trace(m) / T::lit(3.0);
    let d = [m[0][0] - q, m[1][1] - q, m[2][2] - q];
    let p2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2] + T::lit(2.0) * p1;
    if p2 == T::zero() {
        return [q, q, q];
    }
    let p = (p2 / T::lit(6.0)).sqrt();
    let mut b = *m;
    for (r, row) in b.iter_mut().enumerate() {
        for (c, v) in row.iter_mut().enumerate() {
            *v = (*v - if r == c { q } else { T::zero() }) / p;
        }
    }
    let r = (crate::scalar::det3(&b) / T::lit(2.0)).max(-T::one()).min(T::one());
    let phi = r.acos() / T::lit(3.0);
    let hi = q + T::lit(2.0) * p * phi.cos();
    let lo = q + T::lit(2.0) * p * (phi + T::TAU() / T::lit(3.0)).cos();
    [lo, T::lit(3.0) * q - hi - lo, hi]
}

fn max_abs_eigenvalue<T: Real>(m: &Mat3<T>) -> T {
    symmetric_eigenvalues(m).iter().fold(T::zero(), |acc, e| acc.max(e.abs()))
}

/// Potential curvature tensor that produces pseudopotential frequencies in
/// the given ratios along the given axes.
///
/// Pseudopotential curvature is the square of the potential curvature, so
/// the potential eigenvalues are `±ratio_k`; a sign pattern is chosen so
/// that they sum to zero, with the largest ratio positive. `axes[k]` is the
/// unit vector belonging to `ratios[k]`. Returns the tensor (largest
/// |eigenvalue| 1) and the chosen signs.
pub fn curvature_from_frequencies<T: Real>(ratios: Vec3<T>, axes: Mat3<T>) -> Result<(Mat3<T>, [i8; 3])> {
    if ratios.iter().any(|r| !(*r > T::zero())) {
        return Err(Error::InvalidFrequencies("ratios must be strictly positive".into()));
    }
    for i in 0..3 {
        for j in 0..3 {
            let d = crate::scalar::dot3(&axes[i], &axes[j]);
            let want = if i == j { T::one() } else { T::zero() };
            if (d - want).abs() > T::lit(1e-9) {
                return Err(Error::InvalidFrequencies("axes are not orthonormal".into()));
            }
        }
    }
    let total: T = ratios.iter().copied().sum();
    let largest = (0..3).max_by(|&a, &b| ratios[a].partial_cmp(&ratios[b]).unwrap()).unwrap();
    let signs = (0u8..8)
        .map(|bits| {
            let s: [i8; 3] = std::array::from_fn(|k| if bits >> k & 1 == 1 { -1 } else { 1 });
            s
        })
        .filter(|s| s[largest] > 0)
        .find(|s| {
            let sum = (0..3).fold(T::zero(), |acc, k| acc + T::lit(s[k] as f64) * ratios[k]);
            sum.abs() < T::lit(1e-9) * total
        })
        .ok_or_else(|| Error::InfeasibleRatios { ratios: ratios.map(|r| r.to_f64_lossy()) })?;
    let peak = ratios[largest];
    let mu: Vec3<T> = std::array::from_fn(|k| T::lit(signs[k] as f64) * ratios[k] / peak);
    let mut gamma = [[T::zero(); 3]; 3];
    for k in 0..3 {
        for r in 0..3 {
            for c in 0..3 {
                gamma[r][c] = gamma[r][c] + mu[k] * axes[k][r] * axes[k][c];
            }
        }
    }
    // restore exact tracelessness lost to rounding in the outer products
    let tr = trace(&gamma) / T::lit(3.0);
    for (k, row) in gamma.iter_mut().enumerate() {
        row[k] = row[k] - tr;
    }
    Ok((gamma, signs))
}

/// Comparison used by an extra constraint `row·a (rel) λ·C`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    Equal,
    AtLeast,
    AtMost,
}

impl Relation {
    pub fn flipped(self) -> Relation {
        match self {
            Relation::Equal => Relation::Equal,
            Relation::AtLeast => Relation::AtMost,
            Relation::AtMost => Relation::AtLeast,
        }
    }
}

/// Extra field constraint, typically `E_z(r) = λ·C` at a spurious trap site.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtraConstraint<T> {
    pub position: Position<T>,
    pub component: Derivative,
    pub relation: Relation,
    pub lambda: T,
}

impl<T: Real> ExtraConstraint<T> {
    pub fn ez(position: Position<T>, relation: Relation, lambda: T) -> Self {
        ExtraConstraint { position, component: Derivative::Dz, relation, lambda }
    }
}

/// What a constraint row encodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RowKind {
    /// Vanishing gradient component of trap `trap`.
    Field { trap: usize, component: Derivative },
    /// Curvature component of trap `trap` equal to `C·Γ`.
    Curvature { trap: usize, component: Derivative },
    /// Extra constraint number `index`.
    Extra { index: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct InequalityRow<T> {
    pub row: Vec<T>,
    pub relation: Relation,
    pub lambda: T,
    pub index: usize,
}

/// Dense constraint system over `N` patch amplitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSystem<T> {
    /// Equality rows of `A`, each of length `N`.
    pub rows: Vec<Vec<T>>,
    /// Coefficient of `C` for each equality row.
    pub rhs: Vec<T>,
    pub kinds: Vec<RowKind>,
    pub inequalities: Vec<InequalityRow<T>>,
    /// Traps with normalized target tensors, in assembly order.
    pub traps: Vec<TrapSpec<T>>,
    pub extras: Vec<ExtraConstraint<T>>,
    n: usize,
}

/// Assembles `A·a = C·b` for `traps` plus `extras`.
pub fn assemble<T: Real>(
    basis: &FourierBasis<T>,
    traps: &[TrapSpec<T>],
    extras: &[ExtraConstraint<T>],
) -> Result<ConstraintSystem<T>> {
    if traps.is_empty() {
        return Err(Error::EmptyTraps);
    }
    for t in traps {
        t.validate()?;
    }
    let lattice = basis.lattice();
    for (j, t) in traps.iter().enumerate() {
        for other in &traps[..j] {
            let d = lattice.periodic_distance(t.position.frac, other.position.frac);
            if d < T::lit(COINCIDENCE) && (t.position.z - other.position.z).abs() < T::lit(COINCIDENCE) {
                return Err(Error::DuplicateTrap { label: t.label.clone(), other: other.label.clone() });
            }
        }
    }
    let traps: Vec<TrapSpec<T>> = traps.iter().map(TrapSpec::normalized).collect();
    let mut kinds_all = [Derivative::GRADIENT.as_slice(), Derivative::CURVATURE.as_slice()].concat();
    kinds_all.shrink_to_fit();
    let per_trap: Vec<Vec<Vec<T>>> = traps
        .par_iter()
        .map(|t| basis.evaluate_rows(t.position, &kinds_all))
        .collect::<Result<_>>()?;
    let mut system = ConstraintSystem {
        rows: Vec::with_capacity(8 * traps.len()),
        rhs: Vec::with_capacity(8 * traps.len()),
        kinds: Vec::with_capacity(8 * traps.len()),
        inequalities: Vec::new(),
        traps,
        extras: Vec::new(),
        n: basis.grid().len(),
    };
    for (j, rows) in per_trap.into_iter().enumerate() {
        let gamma = system.traps[j].gamma;
        for (row, &d) in rows.into_iter().zip(&kinds_all) {
            let (kind, b) = if d.order() == 1 {
                (RowKind::Field { trap: j, component: d }, T::zero())
            } else {
                let ax = d.axes();
                (RowKind::Curvature { trap: j, component: d }, gamma[ax[0]][ax[1]])
            };
            system.rows.push(row);
            system.rhs.push(b);
            system.kinds.push(kind);
        }
    }
    if system.rhs.iter().all(|b| *b == T::zero()) {
        return Err(Error::ZeroTarget);
    }
    for extra in extras {
        add_suppression(&mut system, basis, extra.clone())?;
    }
    Ok(system)
}

/// Appends one extra field constraint. Equalities extend `A` and `b` with
/// `b`-entry `λ`; inequalities are kept separately.
pub fn add_suppression<T: Real>(
    system: &mut ConstraintSystem<T>,
    basis: &FourierBasis<T>,
    extra: ExtraConstraint<T>,
) -> Result<()> {
    let lattice = basis.lattice();
    for t in &system.traps {
        let d = lattice.periodic_distance(extra.position.frac, t.position.frac);
        let dz = extra.position.z - t.position.z;
        if (d * d + dz * dz).sqrt() < T::lit(1e-6) {
            return Err(Error::PointAtTrap { label: t.label.clone() });
        }
    }
    let row = basis.evaluate_row(extra.position, extra.component)?;
    let index = system.extras.len();
    match extra.relation {
        Relation::Equal => {
            system.rows.push(row);
            system.rhs.push(extra.lambda);
            system.kinds.push(RowKind::Extra { index });
        }
        relation => system.inequalities.push(InequalityRow { row, relation, lambda: extra.lambda, index }),
    }
    system.extras.push(extra);
    Ok(())
}

/// Default suppression strength: the RMS field magnitude over the cell at
/// the height of `position`, in units of `C`, signed like the present `E_z`
/// there so the imposed value pushes in the direction the field already has.
pub fn suggest_lambda<T: Real>(field: &ElectrodeField<'_, T>, scale: T, position: Position<T>) -> Result<T> {
    let n = 24;
    let grads = field.slicer(n, n).gradient(position.z)?;
    let mean_sq = (0..n * n)
        .map(|k| grads[0][k] * grads[0][k] + grads[1][k] * grads[1][k] + grads[2][k] * grads[2][k])
        .sum::<T>()
        / T::of_usize(n * n);
    let here = field.evaluate(position, crate::field::Order::Gradient)?.gradient[2];
    let sign = if here < T::zero() { -T::one() } else { T::one() };
    Ok(sign * mean_sq.sqrt() / scale.abs())
}

impl<T: Real> ConstraintSystem<T> {
    pub fn patch_count(&self) -> usize {
        self.n
    }

    pub fn equality_count(&self) -> usize {
        self.rows.len()
    }

    pub fn trap_count(&self) -> usize {
        self.traps.len()
    }

    /// `max_r |A_r·a − C·b_r|` over equality rows.
    pub fn residual(&self, a: &[T], scale: T) -> T {
        self.rows
            .iter()
            .zip(&self.rhs)
            .map(|(row, &b)| (dot(row, a) - scale * b).abs())
            .fold(T::zero(), T::max)
    }

    /// Largest violation of the inequality rows (zero when all hold).
    pub fn inequality_violation(&self, a: &[T], scale: T) -> T {
        self.inequalities
            .iter()
            .map(|ineq| {
                let gap = dot(&ineq.row, a) - ineq.lambda * scale;
                match ineq.relation {
                    Relation::AtLeast => (-gap).max(T::zero()),
                    Relation::AtMost => gap.max(T::zero()),
                    Relation::Equal => gap.abs(),
                }
            })
            .fold(T::zero(), T::max)
    }

    /// `‖b‖_∞`.
    pub fn rhs_norm(&self) -> T {
        self.rhs.iter().fold(T::zero(), |m, b| m.max(b.abs()))
    }
}

pub(crate) fn dot<T: Real>(x: &[T], y: &[T]) -> T {
    x.iter().zip(y).map(|(&a, &b)| a * b).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::build_basis;
    use crate::field::Order;
    use crate::lattice::{build_patch_grid, BravaisLattice, GridKind};

    fn basis(n: usize) -> FourierBasis<f64> {
        let l = BravaisLattice::square(1.0).unwrap();
        let g = build_patch_grid(&l, GridKind::Oblique { n1: n, n2: n }).unwrap();
        build_basis(&l, &g, 2 * n).unwrap()
    }

    fn cyl(label: &str, x: f64, y: f64, z: f64) -> TrapSpec<f64> {
        TrapSpec::new(label, Position::new(x, y, z), cylindrical_quadrupole())
    }

    #[test]
    fn one_trap_gives_eight_rows() {
        let b = basis(8);
        let s = assemble(&b, &[cyl("t", 0.5, 0.5, 0.3)], &[]).unwrap();
        assert_eq!(s.equality_count(), 8);
        assert_eq!(&s.rhs[..3], &[0.0, 0.0, 0.0]);
        assert_eq!(&s.rhs[3..], &[-0.5, -0.5, 0.0, 0.0, 0.0]);
        let ones = vec![1.0; 64];
        for row in &s.rows[..3] {
            assert!(dot(row, &ones).abs() < 1e-10);
        }
    }

    #[test]
    fn two_traps_give_sixteen_rows() {
        let l = BravaisLattice::hexagonal(1.0).unwrap();
        let g = build_patch_grid(&l, GridKind::Hexagonal { n: 6 }).unwrap();
        let b = build_basis(&l, &g, 12).unwrap();
        let s = assemble(&b, &[cyl("lo", 1.0 / 3.0, 1.0 / 3.0, 0.2), cyl("hi", 2.0 / 3.0, 2.0 / 3.0, 0.6)], &[])
            .unwrap();
        assert_eq!(s.equality_count(), 16);
    }

    #[test]
    fn validation_errors() {
        let b = basis(4);
        assert!(matches!(assemble(&b, &[], &[]), Err(Error::EmptyTraps)));
        let mut bad = cyl("skewed", 0.5, 0.5, 0.3);
        bad.gamma[2][2] = 1.1;
        match assemble(&b, &[bad], &[]) {
            Err(Error::NonTraceless { label, .. }) => assert_eq!(label, "skewed"),
            other => panic!("{other:?}"),
        }
        let dup = [cyl("a", 0.5, 0.5, 0.3), cyl("b", 1.5, 0.5, 0.3)];
        assert!(matches!(assemble(&b, &dup, &[]), Err(Error::DuplicateTrap { .. })));
        let mut asym = cyl("asym", 0.5, 0.5, 0.3);
        asym.gamma[0][1] = 0.2;
        assert!(matches!(assemble(&b, &[asym], &[]), Err(Error::NonSymmetric { .. })));
        let zero = TrapSpec::new("flat", Position::new(0.5, 0.5, 0.3), [[0.0; 3]; 3]);
        assert!(matches!(assemble(&b, &[zero], &[]), Err(Error::ZeroTarget)));
        assert!(matches!(assemble(&b, &[cyl("low", 0.5, 0.5, 0.0)], &[]), Err(Error::InvalidHeight { .. })));
    }

    #[test]
    fn gamma_is_normalized_before_assembly() {
        let b = basis(4);
        let mut t = cyl("t", 0.5, 0.5, 0.3);
        t.gamma.iter_mut().flatten().for_each(|g| *g *= 7.0);
        let s = assemble(&b, &[t], &[]).unwrap();
        assert!((s.traps[0].gamma[2][2] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn cylindrical_from_ratios() {
        let axes = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        let (g, signs) = curvature_from_frequencies([0.5, 0.5, 1.0], axes).unwrap();
        assert_eq!(signs, [-1, -1, 1]);
        let want = cylindrical_quadrupole::<f64>();
        for r in 0..3 {
            for c in 0..3 {
                assert!((g[r][c] - want[r][c]).abs() < 1e-15);
            }
        }
    }

    /// Brute-force sign enumeration over all 8 assignments.
    fn any_traceless_assignment(r: [f64; 3]) -> bool {
        (0..8).any(|bits: u32| {
            let s: f64 = (0..3).map(|k| if bits >> k & 1 == 1 { -r[k] } else { r[k] }).sum();
            s.abs() < 1e-9 * r.iter().sum::<f64>()
        })
    }

    #[test]
    fn equal_ratios_are_infeasible() {
        let axes = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        assert!(!any_traceless_assignment([1.0, 1.0, 1.0]));
        assert!(matches!(
            curvature_from_frequencies([1.0, 1.0, 1.0], axes),
            Err(Error::InfeasibleRatios { .. })
        ));
        for r in [[1.0, 2.0, 3.0], [0.3, 0.5, 0.7], [2.0, 1.0, 1.0]] {
            assert_eq!(any_traceless_assignment(r), curvature_from_frequencies(r, axes).is_ok(), "{r:?}");
        }
        assert!(curvature_from_frequencies([1.0, 0.0, 1.0], axes).is_err());
        let skew = [[1.0, 0.1, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        assert!(curvature_from_frequencies([0.5, 0.5, 1.0], skew).is_err());
    }

    #[test]
    fn eigenvalues_closed_form() {
        let m = [[2.0, 1.0, 0.0], [1.0, 2.0, 0.0], [0.0, 0.0, -4.0]];
        let e: [f64; 3] = symmetric_eigenvalues(&m);
        for (got, want) in e.iter().zip([-4.0, 1.0, 3.0]) {
            assert!((got - want).abs() < 1e-13);
        }
    }

    #[test]
    fn suppression_rows() {
        let b = basis(8);
        let mut s = assemble(&b, &[cyl("t", 0.5, 0.5, 0.3)], &[]).unwrap();
        add_suppression(&mut s, &b, ExtraConstraint::ez(Position::new(0.0, 0.0, 0.3), Relation::Equal, 0.5))
            .unwrap();
        assert_eq!(s.equality_count(), 9);
        assert_eq!(s.rhs[8], 0.5);
        add_suppression(&mut s, &b, ExtraConstraint::ez(Position::new(0.0, 0.5, 0.3), Relation::AtLeast, 0.1))
            .unwrap();
        assert_eq!(s.equality_count(), 9);
        assert_eq!(s.inequalities.len(), 1);
        let at_trap = ExtraConstraint::ez(Position::new(0.5, 0.5, 0.3), Relation::Equal, 0.5);
        assert!(matches!(add_suppression(&mut s, &b, at_trap), Err(Error::PointAtTrap { .. })));
    }

    #[test]
    fn rows_match_single_patch_fields() {
        let b = basis(6);
        let t = cyl("t", 0.4, 0.55, 0.25);
        let s = assemble(&b, &[t.clone()], &[]).unwrap();
        for i in [0, 11, 30] {
            let mut e = vec![0.0; 36];
            e[i] = 1.0;
            let sample = b.evaluate(&e, t.position, Order::Hessian).unwrap();
            for (row, kind) in s.rows.iter().zip(&s.kinds) {
                let d = match kind {
                    RowKind::Field { component, .. } | RowKind::Curvature { component, .. } => *component,
                    RowKind::Extra { .. } => unreachable!(),
                };
                assert!((row[i] - d.component(&sample)).abs() < 1e-12 * (1.0 + row[i].abs()));
            }
        }
    }
}
