//! Small 2D FFT helpers over row-major `n1 × n2` arrays (`data[q * n1 + p]`).

use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftDirection, FftPlanner};

use crate::scalar::Real;

/// Pair of 1D plans for a fixed 2D shape and direction.
#[derive(Clone)]
pub(crate) struct Fft2<T: Real> {
    n1: usize,
    n2: usize,
    along1: Arc<dyn Fft<T>>,
    along2: Arc<dyn Fft<T>>,
}

impl<T: Real> std::fmt::Debug for Fft2<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Fft2({}x{})", self.n1, self.n2)
    }
}

impl<T: Real> Fft2<T> {
    pub(crate) fn new(n1: usize, n2: usize, direction: FftDirection) -> Self {
        let mut planner = FftPlanner::new();
        Fft2 {
            n1,
            n2,
            along1: planner.plan_fft(n1, direction),
            along2: planner.plan_fft(n2, direction),
        }
    }

    /// Unnormalized in-place transform.
    pub(crate) fn process(&self, data: &mut [Complex<T>]) {
        debug_assert_eq!(data.len(), self.n1 * self.n2);
        self.along1.process(data);
        let mut t = vec![Complex::new(T::zero(), T::zero()); data.len()];
        transpose(data, &mut t, self.n1, self.n2);
        self.along2.process(&mut t);
        transpose(&t, data, self.n2, self.n1);
    }
}

/// `src` is `rows × cols` row-major (`src[r * cols + c]`); writes `cols × rows`.
fn transpose<T: Copy>(src: &[T], dst: &mut [T], cols: usize, rows: usize) {
    for r in 0..rows {
        for c in 0..cols {
            dst[c * rows + r] = src[r * cols + c];
        }
    }
}
