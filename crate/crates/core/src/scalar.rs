//! Scalar abstraction shared by every numerical routine in the crate.

use nalgebra as na;
use num_traits as nt;

pub use na::Complex;

/// Gathers traits useful for working with generic floating point types.
pub trait Float:
    Copy + nt::FloatConst + nt::FromPrimitive + nt::ToPrimitive + na::RealField + Send + Sync + 'static
{
    /// Converts an `f64` literal into the scalar type.
    #[inline]
    fn lit(x: f64) -> Self {
        <Self as nt::FromPrimitive>::from_f64(x).expect("finite literal")
    }

    /// Lossy conversion to `f64` (exact for `f32` and `f64`).
    #[inline]
    fn to_f64_lossy(self) -> f64 {
        nt::ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }

    /// Machine epsilon of the type.
    fn machine_eps() -> Self;

    #[inline]
    fn of_usize(n: usize) -> Self {
        <Self as nt::FromPrimitive>::from_usize(n).expect("representable count")
    }
}

impl Float for f32 {
    fn machine_eps() -> Self {
        f32::EPSILON
    }
}

impl Float for f64 {
    fn machine_eps() -> Self {
        f64::EPSILON
    }
}

/// Free-space wave impedance sqrt(mu0/eps0) in ohms.
pub const ETA0: f64 = 376.730_313_668;

#[inline]
pub(crate) fn cplx<T: Float>(re: T, im: T) -> Complex<T> {
    Complex::new(re, im)
}

#[inline]
pub(crate) fn czero<T: Float>() -> Complex<T> {
    Complex::new(T::zero(), T::zero())
}

/// `e^{-j x}` without going through `Complex::exp`.
#[inline]
pub(crate) fn expj_neg<T: Float>(x: T) -> Complex<T> {
    Complex::new(x.cos(), -x.sin())
}

/// Largest absolute entry of a complex matrix.
pub fn max_abs_complex<T: Float>(m: &na::DMatrix<Complex<T>>) -> T {
    m.iter().fold(T::zero(), |acc, z| acc.max(cabs(*z)))
}

/// Largest absolute entry of a real matrix.
pub fn max_abs_real<T: Float>(m: &na::DMatrix<T>) -> T {
    m.iter().fold(T::zero(), |acc, x| acc.max(x.abs()))
}

/// Modulus of a complex number.
#[inline]
pub fn cabs<T: Float>(z: Complex<T>) -> T {
    z.re.hypot(z.im)
}

#[inline]
fn two_sum<T: Float>(a: T, b: T) -> (T, T) {
    let s = a + b;
    let z = s - a;
    (s, (a - (s - z)) + (b - z))
}

/// Dot product evaluated as if in twice the working precision (compensated
/// products and sums). Forms like `Iᵀ Re{Z} I` for weakly radiating currents
/// cancel almost completely, and plain summation loses all significant digits.
pub fn dot2<T: Float>(x: &[T], y: &[T]) -> T {
    let (hi, lo) = dot2_split(x, y);
    hi + lo
}

/// [`dot2`] returned as an unevaluated sum `hi + lo` with `|lo| ≤ ε|hi|`.
pub fn dot2_split<T: Float>(x: &[T], y: &[T]) -> (T, T) {
    debug_assert_eq!(x.len(), y.len());
    let (mut s, mut c) = (T::zero(), T::zero());
    for (&a, &b) in x.iter().zip(y) {
        let p = a * b;
        let pe = a.mul_add(b, -p);
        let (t, se) = two_sum(s, p);
        s = t;
        c += pe + se;
    }
    two_sum(s, c)
}

/// `(X − λR) v` with the cancellation between the two terms resolved, for
/// symmetric `X` and `R`.
pub fn pencil_residual<T: Float>(x: &na::DMatrix<T>, r: &na::DMatrix<T>, lambda: T, v: &[T]) -> na::DVector<T> {
    na::DVector::from_fn(x.nrows(), |i, _| {
        let (xh, xl) = dot2_split(x.column(i).as_slice(), v);
        let (rh, rl) = dot2_split(r.column(i).as_slice(), v);
        let p = lambda * rh;
        let pe = lambda.mul_add(rh, -p);
        let (s, e) = two_sum(xh, -p);
        s + (e + xl - pe - lambda * rl)
    })
}

/// `aᵀ b` with every entry evaluated by [`dot2`].
pub fn tr_mul_accurate<T: Float>(a: &na::DMatrix<T>, b: &na::DMatrix<T>) -> na::DMatrix<T> {
    assert_eq!(a.nrows(), b.nrows(), "inner dimensions differ");
    na::DMatrix::from_fn(a.ncols(), b.ncols(), |i, j| {
        dot2(a.column(i).as_slice(), b.column(j).as_slice())
    })
}
