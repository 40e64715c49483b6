//! Scalar abstraction shared by every numeric module.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use rustfft::FftNum;
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating point type the geometry, field and optimizer code is generic over.
///
/// Implemented for `f32` and `f64`. Tolerances quoted throughout the crate
/// assume `f64`; `f32` is usable for quick landscape previews.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + FftNum
    + Sum
    + Debug
    + Display
    + LowerExp
    + Default
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Machine epsilon of the concrete type.
    const EPS: Self;

    /// Lossy conversion from an `f64` literal.
    fn lit(x: f64) -> Self;

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn of_usize(n: usize) -> Self {
        Self::lit(n as f64)
    }

    fn of_isize(n: isize) -> Self {
        Self::lit(n as f64)
    }
}

impl Real for f32 {
    const EPS: Self = f32::EPSILON;

    #[inline]
    fn lit(x: f64) -> Self {
        x as f32
    }
}

impl Real for f64 {
    const EPS: Self = f64::EPSILON;

    #[inline]
    fn lit(x: f64) -> Self {
        x
    }
}

pub type Vec2<T> = [T; 2];
pub type Vec3<T> = [T; 3];
pub type Mat3<T> = [[T; 3]; 3];

pub(crate) fn dot3<T: Real>(a: &Vec3<T>, b: &Vec3<T>) -> T {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn norm3<T: Real>(a: &Vec3<T>) -> T {
    dot3(a, a).sqrt()
}

pub(crate) fn frobenius<T: Real>(m: &Mat3<T>) -> T {
    m.iter().flatten().map(|&x| x * x).sum::<T>().sqrt()
}

pub(crate) fn trace<T: Real>(m: &Mat3<T>) -> T {
    m[0][0] + m[1][1] + m[2][2]
}

pub(crate) fn det3<T: Real>(m: &Mat3<T>) -> T {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Solves `m x = rhs` by Cramer's rule; `None` when `m` is (numerically) singular.
pub(crate) fn solve3<T: Real>(m: &Mat3<T>, rhs: &Vec3<T>) -> Option<Vec3<T>> {
    let det = det3(m);
    let scale = frobenius(m).powi(3);
    if !(det.abs() > T::lit(1e-14) * scale) {
        return None;
    }
    let mut out = [T::zero(); 3];
    for (k, slot) in out.iter_mut().enumerate() {
        let mut mk = *m;
        for r in 0..3 {
            mk[r][k] = rhs[r];
        }
        *slot = det3(&mk) / det;
    }
    Some(out)
}
