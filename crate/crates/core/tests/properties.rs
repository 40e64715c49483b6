use approx::assert_relative_eq;
use proptest::prelude::*;
use trap_forge::field::{build_basis, Order};
use trap_forge::lattice::GridKind;
use trap_forge::{BravaisLattice, PatchGrid, Position};

fn lattice(kind: u8, spacing: f64, skew: f64) -> BravaisLattice {
    match kind {
        0 => BravaisLattice::square(spacing).unwrap(),
        1 => BravaisLattice::hexagonal(spacing).unwrap(),
        _ => BravaisLattice::new([spacing, 0.0], [skew * spacing, 1.3 * spacing]).unwrap(),
    }
}

proptest! {
    #[test]
    fn fractional_round_trip(kind in 0u8..3, spacing in 0.1f64..10.0, skew in -0.6f64..0.6,
                             f1 in -2.0f64..2.0, f2 in -2.0f64..2.0) {
        let l = lattice(kind, spacing, skew);
        let back = l.to_fractional(l.to_cartesian([f1, f2]));
        assert_relative_eq!(back[0], f1, epsilon = 1e-12);
        assert_relative_eq!(back[1], f2, epsilon = 1e-12);
    }

    #[test]
    fn periodic_distance_ignores_whole_cells(kind in 0u8..3, f1 in 0.0f64..1.0, f2 in 0.0f64..1.0,
                                             s1 in -3i32..3, s2 in -3i32..3) {
        let l = lattice(kind, 1.0, 0.3);
        let d = l.periodic_distance([f1, f2], [f1 + s1 as f64, f2 + s2 as f64]);
        prop_assert!(d < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn random_electrodes_satisfy_laplace(values in prop::collection::vec(0.0f64..1.0, 64),
                                         x in 0.0f64..1.0, y in 0.0f64..1.0, z in 0.1f64..1.0) {
        let l = BravaisLattice::hexagonal(1.0).unwrap();
        let grid = PatchGrid::new(&l, GridKind::Oblique { n1: 8, n2: 8 }).unwrap();
        let basis = build_basis(&l, &grid, 16).unwrap();
        let field = basis.field(&values).unwrap();
        let h = field.evaluate(Position::new(x, y, z), Order::Hessian).unwrap().hessian;
        let norm = h.iter().flatten().map(|v| v * v).sum::<f64>().sqrt();
        prop_assert!((h[0][0] + h[1][1] + h[2][2]).abs() <= 1e-10 * norm.max(1e-300));
        for i in 0..3 {
            for j in 0..3 {
                assert_relative_eq!(h[i][j], h[j][i], epsilon = 1e-12 * norm);
            }
        }
    }

    #[test]
    fn complementary_electrodes_negate_the_field(values in prop::collection::vec(0.0f64..1.0, 36),
                                                 x in 0.0f64..1.0, y in 0.0f64..1.0, z in 0.1f64..1.0) {
        let l = BravaisLattice::square(1.0).unwrap();
        let grid = PatchGrid::new(&l, GridKind::Oblique { n1: 6, n2: 6 }).unwrap();
        let basis = build_basis(&l, &grid, 12).unwrap();
        let flipped: Vec<f64> = values.iter().map(|v| 1.0 - v).collect();
        let p = Position::new(x, y, z);
        let a = basis.field(&values).unwrap().evaluate(p, Order::Gradient).unwrap().gradient;
        let b = basis.field(&flipped).unwrap().evaluate(p, Order::Gradient).unwrap().gradient;
        for k in 0..3 {
            prop_assert!((a[k] + b[k]).abs() <= 1e-12 * (1.0 + a[k].abs()));
        }
    }
}
