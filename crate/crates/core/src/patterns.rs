//! Reference electrode patterns expressed as patch amplitudes.

use crate::lattice::{BravaisLattice, PatchGrid};
use crate::scalar::{Real, Vec2};

/// Area fractions of each patch covered by `inside`, estimated with
/// `samples × samples` midpoints per patch-grid cell
/// (split between the patches that own them).
pub fn coverage<T: Real>(grid: &PatchGrid<T>, samples: usize, inside: impl Fn(Vec2<T>) -> bool) -> Vec<T> {
    let (n1, n2) = grid.dims();
    let mut hits = vec![0usize; grid.len()];
    let mut total = vec![0usize; grid.len()];
    let s = T::of_usize(samples);
    for q in 0..n2 {
        for p in 0..n1 {
            for v in 0..samples {
                for u in 0..samples {
                    let f = [
                        (T::of_usize(p) + (T::of_usize(u) + T::lit(0.5)) / s) / T::of_usize(n1),
                        (T::of_usize(q) + (T::of_usize(v) + T::lit(0.5)) / s) / T::of_usize(n2),
                    ];
                    let i = grid.locate(f);
                    total[i] += 1;
                    if inside(f) {
                        hits[i] += 1;
                    }
                }
            }
        }
    }
    hits.into_iter().zip(total).map(|(h, t)| T::of_usize(h) / T::of_usize(t.max(1))).collect()
}

/// Anti-aliased annulus `r_in ≤ ρ ≤ r_out` (Cartesian radii, L0) around the
/// fractional point `center`, repeated on every lattice site.
pub fn annulus<T: Real>(
    lattice: &BravaisLattice<T>,
    grid: &PatchGrid<T>,
    center: Vec2<T>,
    r_in: T,
    r_out: T,
    samples: usize,
) -> Vec<T> {
    coverage(grid, samples, |f| {
        let d = lattice.periodic_distance(f, center);
        d >= r_in && d <= r_out
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::GridKind;

    #[test]
    fn full_disk_area() {
        let lat = BravaisLattice::<f64>::square(1.0).unwrap();
        let grid = PatchGrid::new(&lat, GridKind::Oblique { n1: 32, n2: 32 }).unwrap();
        let a = annulus(&lat, &grid, [0.5, 0.5], 0.0, 0.3, 16);
        let area: f64 = a.iter().sum::<f64>() * grid.patch_area();
        assert!((area - std::f64::consts::PI * 0.09).abs() < 1e-3);
        assert!(a.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn hexagonal_coverage_is_complete() {
        let lat = BravaisLattice::<f64>::hexagonal(1.0).unwrap();
        let grid = PatchGrid::new(&lat, GridKind::Hexagonal { n: 8 }).unwrap();
        let a = coverage(&grid, 6, |_| true);
        assert!(a.iter().all(|&v| (v - 1.0).abs() < 1e-12));
    }
}
