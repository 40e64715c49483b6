//! Minimum-norm solution `g = A⁺·b` through a truncated SVD.

use log::warn;
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Singular values below this fraction of the largest are treated as zero.
pub const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct Inhomogeneous<T> {
    pub g: Vec<T>,
    /// Number of singular values kept.
    pub rank: usize,
    pub singular_values: Vec<f64>,
}

impl<T> Inhomogeneous<T> {
    pub fn rank_deficient(&self) -> bool {
        self.rank < self.singular_values.len()
    }
}

/// Moore–Penrose solution of `rows · g = b`: the unique solution orthogonal
/// to the null space of `A`. Linearly dependent rows are truncated with a
/// warning rather than rejected.
pub fn inhomogeneous_solution<T: Real>(rows: &[Vec<T>], b: &[T]) -> Result<Inhomogeneous<T>> {
    let m = rows.len();
    if m == 0 || m != b.len() {
        return Err(Error::Solver(format!("pseudoinverse needs matching rows and rhs ({m} vs {})", b.len())));
    }
    let n = rows[0].len();
    let a = DMatrix::from_fn(m, n, |r, c| rows[r][c].to_f64_lossy());
    let rhs = DVector::from_iterator(m, b.iter().map(|v| v.to_f64_lossy()));
    let svd = a.svd(true, true);
    let sigma_max = svd.singular_values.max();
    let cutoff = RANK_TOLERANCE * sigma_max;
    let rank = svd.singular_values.iter().filter(|&&s| s > cutoff).count();
    if rank < m {
        warn!("constraint rows are linearly dependent: rank {rank} of {m} (truncated below {cutoff:e})");
    }
    let g = svd.solve(&rhs, cutoff).map_err(|e| Error::Solver(e.to_string()))?;
    Ok(Inhomogeneous {
        g: g.iter().map(|&v| T::lit(v)).collect(),
        rank,
        singular_values: svd.singular_values.iter().copied().collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_block() {
        let rows: Vec<Vec<f64>> = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]];
        let sol = inhomogeneous_solution(&rows, &[1.0, 0.0]).unwrap();
        assert!((sol.g[0] - 1.0).abs() < 1e-14 && sol.g[1].abs() < 1e-14 && sol.g[2].abs() < 1e-14);
        assert_eq!(sol.rank, 2);
    }

    #[test]
    fn single_row_minimum_norm() {
        let sol = inhomogeneous_solution::<f64>(&[vec![1.0, 1.0]], &[1.0]).unwrap();
        assert!((sol.g[0] - 0.5).abs() < 1e-14 && (sol.g[1] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn dependent_rows_are_truncated() {
        let rows: Vec<Vec<f64>> = vec![vec![1.0, 2.0, 0.0], vec![2.0, 4.0, 0.0], vec![0.0, 0.0, 1.0]];
        let sol = inhomogeneous_solution(&rows, &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(sol.rank, 2);
        assert!(sol.rank_deficient());
        assert!((sol.g[0] - 0.2).abs() < 1e-12 && (sol.g[1] - 0.4).abs() < 1e-12 && (sol.g[2] - 3.0).abs() < 1e-12);
    }
}
