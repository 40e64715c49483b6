//! Two-dimensional Bravais lattices and the decomposition of one unit cell
//! into patch electrodes.
//!
//! All in-plane geometry is held in fractional coordinates, i.e. in the basis
//! `(a1, a2)`. A point `s = (s1, s2)` sits at Cartesian `s1·a1 + s2·a2`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{Real, Vec2};

/// Primitive lattice vectors together with their reciprocal partners.
#[derive(Debug, Clone, PartialEq)]
pub struct BravaisLattice<T> {
    a1: Vec2<T>,
    a2: Vec2<T>,
    g1: Vec2<T>,
    g2: Vec2<T>,
    cell_area: T,
}

/// Reciprocal vectors `g1, g2` with `a_i · g_j = 2π δ_ij`.
pub fn reciprocal_vectors<T: Real>(a1: Vec2<T>, a2: Vec2<T>) -> Result<(Vec2<T>, Vec2<T>)> {
    let cross = a1[0] * a2[1] - a1[1] * a2[0];
    if !(cross.abs() >= T::lit(1e-12)) {
        return Err(Error::DegenerateLattice { cross: cross.to_f64_lossy() });
    }
    let s = T::TAU() / cross;
    let g1 = [a2[1] * s, -a2[0] * s];
    let g2 = [-a1[1] * s, a1[0] * s];
    Ok((g1, g2))
}

impl<T: Real> BravaisLattice<T> {
    pub fn new(a1: Vec2<T>, a2: Vec2<T>) -> Result<Self> {
        let (g1, g2) = reciprocal_vectors(a1, a2)?;
        let cell_area = (a1[0] * a2[1] - a1[1] * a2[0]).abs();
        Ok(BravaisLattice { a1, a2, g1, g2, cell_area })
    }

    /// Square lattice with lattice constant `spacing`.
    pub fn square(spacing: T) -> Result<Self> {
        Self::new([spacing, T::zero()], [T::zero(), spacing])
    }

    /// Hexagonal (triangular) lattice with lattice constant `spacing`; the
    /// primitive vectors enclose 60°.
    pub fn hexagonal(spacing: T) -> Result<Self> {
        let half = T::lit(0.5);
        Self::new(
            [spacing, T::zero()],
            [spacing * half, spacing * T::lit(3.0).sqrt() * half],
        )
    }

    pub fn a1(&self) -> Vec2<T> {
        self.a1
    }

    pub fn a2(&self) -> Vec2<T> {
        self.a2
    }

    pub fn g1(&self) -> Vec2<T> {
        self.g1
    }

    pub fn g2(&self) -> Vec2<T> {
        self.g2
    }

    pub fn cell_area(&self) -> T {
        self.cell_area
    }

    pub fn to_cartesian(&self, frac: Vec2<T>) -> Vec2<T> {
        [
            frac[0] * self.a1[0] + frac[1] * self.a2[0],
            frac[0] * self.a1[1] + frac[1] * self.a2[1],
        ]
    }

    pub fn to_fractional(&self, cart: Vec2<T>) -> Vec2<T> {
        // s_i = (r · g_i) / 2π
        let inv = T::one() / T::TAU();
        [
            (cart[0] * self.g1[0] + cart[1] * self.g1[1]) * inv,
            (cart[0] * self.g2[0] + cart[1] * self.g2[1]) * inv,
        ]
    }

    /// Cartesian reciprocal vector `m1·g1 + m2·g2`.
    pub fn wavevector(&self, m1: isize, m2: isize) -> Vec2<T> {
        let (f1, f2) = (T::of_isize(m1), T::of_isize(m2));
        [f1 * self.g1[0] + f2 * self.g2[0], f1 * self.g1[1] + f2 * self.g2[1]]
    }

    /// Length of the longer diagonal of the unit cell.
    pub fn cell_diameter(&self) -> T {
        let p = [self.a1[0] + self.a2[0], self.a1[1] + self.a2[1]];
        let m = [self.a1[0] - self.a2[0], self.a1[1] - self.a2[1]];
        (p[0] * p[0] + p[1] * p[1]).sqrt().max((m[0] * m[0] + m[1] * m[1]).sqrt())
    }

    /// Smallest Cartesian distance between `a` and any lattice image of `b`
    /// (both given in fractional coordinates).
    pub fn periodic_distance(&self, a: Vec2<T>, b: Vec2<T>) -> T {
        let mut d = [a[0] - b[0], a[1] - b[1]];
        d[0] = d[0] - d[0].round();
        d[1] = d[1] - d[1].round();
        let mut best = T::infinity();
        for s1 in -1..=1 {
            for s2 in -1..=1 {
                let f = [d[0] + T::of_isize(s1), d[1] + T::of_isize(s2)];
                let c = self.to_cartesian(f);
                best = best.min((c[0] * c[0] + c[1] * c[1]).sqrt());
            }
        }
        best
    }
}

/// How a unit cell is cut into patches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GridKind {
    /// `n1 × n2` congruent parallelograms, `n1` along `a1`.
    Oblique { n1: usize, n2: usize },
    /// `n × n` rhombs, each split along its `a1`–`a2` diagonal into two
    /// triangles (equilateral on a hexagonal lattice).
    Hexagonal { n: usize },
}

impl GridKind {
    pub fn patch_count(&self) -> usize {
        match *self {
            GridKind::Oblique { n1, n2 } => n1 * n2,
            GridKind::Hexagonal { n } => 2 * n * n,
        }
    }

    /// Number of cells along `a1` and `a2`.
    pub fn dims(&self) -> (usize, usize) {
        match *self {
            GridKind::Oblique { n1, n2 } => (n1, n2),
            GridKind::Hexagonal { n } => (n, n),
        }
    }

    pub fn shapes_per_cell(&self) -> usize {
        match self {
            GridKind::Oblique { .. } => 1,
            GridKind::Hexagonal { .. } => 2,
        }
    }

    /// Same kind with the linear resolution replaced by `n`.
    pub fn with_resolution(&self, n: usize) -> GridKind {
        match self {
            GridKind::Oblique { .. } => GridKind::Oblique { n1: n, n2: n },
            GridKind::Hexagonal { .. } => GridKind::Hexagonal { n },
        }
    }
}

/// Convex polygon, counterclockwise in fractional coordinates.
pub type Polygon<T> = Vec<Vec2<T>>;

/// Signed area of a polygon given in the coordinates of its vertices.
pub fn polygon_area<T: Real>(poly: &[Vec2<T>]) -> T {
    let n = poly.len();
    let mut acc = T::zero();
    for k in 0..n {
        let p = poly[k];
        let q = poly[(k + 1) % n];
        acc = acc + p[0] * q[1] - q[0] * p[1];
    }
    acc * T::lit(0.5)
}

/// Decomposition of one unit cell into `N` patch electrodes.
///
/// Patch indices are row-major over the `(n1, n2)` cell grid: cell
/// `(p, q)` (column `p` along `a1`, row `q` along `a2`) has index
/// `q·n1 + p` for oblique grids. Hexagonal grids store two triangles per
/// rhomb, `2·(q·n + p)` for the lower one (vertices `(0,0),(1,0),(0,1)`
/// in local units) and `2·(q·n + p) + 1` for the upper one.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchGrid<T> {
    kind: GridKind,
    base_shapes: Vec<Polygon<T>>,
    cell_area: T,
}

/// Builds the patch decomposition of `lattice`'s unit cell.
pub fn build_patch_grid<T: Real>(lattice: &BravaisLattice<T>, kind: GridKind) -> Result<PatchGrid<T>> {
    PatchGrid::new(lattice, kind)
}

impl<T: Real> PatchGrid<T> {
    pub fn new(lattice: &BravaisLattice<T>, kind: GridKind) -> Result<Self> {
        let (n1, n2) = kind.dims();
        if n1 == 0 || n2 == 0 {
            return Err(Error::InvalidResolution(format!("{kind:?} has an empty dimension")));
        }
        let h1 = T::one() / T::of_usize(n1);
        let h2 = T::one() / T::of_usize(n2);
        let z = T::zero();
        let base_shapes = match kind {
            GridKind::Oblique { .. } => vec![vec![[z, z], [h1, z], [h1, h2], [z, h2]]],
            GridKind::Hexagonal { .. } => vec![
                vec![[z, z], [h1, z], [z, h2]],
                vec![[h1, z], [h1, h2], [z, h2]],
            ],
        };
        Ok(PatchGrid { kind, base_shapes, cell_area: lattice.cell_area() })
    }

    pub fn kind(&self) -> GridKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.kind.patch_count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dims(&self) -> (usize, usize) {
        self.kind.dims()
    }

    pub fn base_shapes(&self) -> &[Polygon<T>] {
        &self.base_shapes
    }

    /// Cell-grid coordinates `(p, q, shape)` of patch `i`.
    pub fn decompose(&self, i: usize) -> (usize, usize, usize) {
        let (n1, _) = self.dims();
        let s = self.kind.shapes_per_cell();
        let cell = i / s;
        (cell % n1, cell / n1, i % s)
    }

    pub fn compose(&self, p: usize, q: usize, shape: usize) -> usize {
        let (n1, _) = self.dims();
        (q * n1 + p) * self.kind.shapes_per_cell() + shape
    }

    pub fn shape_of(&self, i: usize) -> usize {
        i % self.kind.shapes_per_cell()
    }

    /// Fractional offset of patch `i` relative to its base shape.
    pub fn translation(&self, i: usize) -> Vec2<T> {
        let (n1, n2) = self.dims();
        let (p, q, _) = self.decompose(i);
        [T::of_usize(p) / T::of_usize(n1), T::of_usize(q) / T::of_usize(n2)]
    }

    /// Area of one patch in L0² (all patches of a grid have equal area).
    pub fn patch_area(&self) -> T {
        self.cell_area / T::of_usize(self.len())
    }

    pub fn patch_polygon(&self, i: usize) -> Result<Polygon<T>> {
        if i >= self.len() {
            return Err(Error::PatchIndex { index: i, count: self.len() });
        }
        let t = self.translation(i);
        Ok(self.base_shapes[self.shape_of(i)]
            .iter()
            .map(|v| [v[0] + t[0], v[1] + t[1]])
            .collect())
    }

    pub fn patch_centroid(&self, i: usize) -> Vec2<T> {
        let t = self.translation(i);
        let shape = &self.base_shapes[self.shape_of(i)];
        let k = T::of_usize(shape.len());
        let sx = shape.iter().map(|v| v[0]).sum::<T>() / k;
        let sy = shape.iter().map(|v| v[1]).sum::<T>() / k;
        [t[0] + sx, t[1] + sy]
    }

    /// Patch owning the fractional point `frac` (wrapped into the cell).
    ///
    /// Edges belong to the patch on their upper/right side, so the lower-left
    /// boundary of every patch is inclusive and the tiling has no overlaps.
    pub fn locate(&self, frac: Vec2<T>) -> usize {
        let (n1, n2) = self.dims();
        let u = frac[0] - frac[0].floor();
        let v = frac[1] - frac[1].floor();
        let su = u * T::of_usize(n1);
        let sv = v * T::of_usize(n2);
        let p = (su.floor().to_usize().unwrap_or(0)).min(n1 - 1);
        let q = (sv.floor().to_usize().unwrap_or(0)).min(n2 - 1);
        match self.kind {
            GridKind::Oblique { .. } => self.compose(p, q, 0),
            GridKind::Hexagonal { .. } => {
                let lu = su - T::of_usize(p);
                let lv = sv - T::of_usize(q);
                let upper = lu + lv >= T::one();
                self.compose(p, q, usize::from(upper))
            }
        }
    }
}
