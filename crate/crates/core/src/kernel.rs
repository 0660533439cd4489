//! Free-space Green's function, the reduced thin-wire kernel, and quadrature settings.

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::scalar::{expj_neg, Complex, Float};

/// Free-space wavenumber `k = 2π/λ₀`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wavenumber<T: Float> {
    k: T,
}

impl<T: Float> Wavenumber<T> {
    pub fn new(k: T) -> Result<Self> {
        if !(k > T::zero()) || !k.is_finite() {
            return Err(Error::InvalidParameter("wavenumber must be positive".into()));
        }
        Ok(Self { k })
    }

    pub fn from_wavelength(lambda0: T) -> Result<Self> {
        if !(lambda0 > T::zero()) {
            return Err(Error::InvalidParameter("wavelength must be positive".into()));
        }
        Self::new(T::two_pi() / lambda0)
    }

    #[inline]
    pub fn k(&self) -> T {
        self.k
    }

    pub fn lambda0(&self) -> T {
        T::two_pi() / self.k
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SingularScheme {
    /// Static `1/R` part integrated in closed form for self, touching and nearby segment pairs.
    #[default]
    Subtraction,
    /// Closed-form static part on the self term only.
    SelfTermAnalytic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuadratureSpec {
    pub points_per_segment: usize,
    pub singular_scheme: SingularScheme,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            points_per_segment: 4,
            singular_scheme: SingularScheme::Subtraction,
        }
    }
}

impl QuadratureSpec {
    pub fn new(points_per_segment: usize, singular_scheme: SingularScheme) -> Result<Self> {
        let q = Self {
            points_per_segment,
            singular_scheme,
        };
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<()> {
        if self.points_per_segment < 2 {
            return Err(Error::InvalidParameter(format!(
                "quadrature needs at least 2 points per segment, got {}",
                self.points_per_segment
            )));
        }
        Ok(())
    }
}

/// `e^{-jkR} / (4πR)` with `R = |r - r'|`.
pub fn scalar_green<T: Float>(r: &Vector3<T>, r_prime: &Vector3<T>, k: Wavenumber<T>) -> Result<Complex<T>> {
    let dist = (r - r_prime).norm();
    if !(dist > T::zero()) {
        return Err(Error::SingularKernel);
    }
    Ok(green_of_distance(dist, k.k()))
}

#[inline]
pub(crate) fn green_of_distance<T: Float>(dist: T, k: T) -> Complex<T> {
    expj_neg(k * dist) / (T::lit(4.0) * T::pi() * dist)
}

/// Reduced kernel: source on the wire axis, observation displaced by the radius,
/// i.e. the scalar Green's function at `sqrt(|Δ|² + a²)`.
pub fn thin_wire_kernel<T: Float>(
    source_point_on_axis: &Vector3<T>,
    obs_point_on_surface: &Vector3<T>,
    radius: T,
    k: Wavenumber<T>,
) -> Complex<T> {
    let d2 = (obs_point_on_surface - source_point_on_axis).norm_squared();
    green_of_distance((d2 + radius * radius).sqrt(), k.k())
}

/// Closed-form `∫₀¹ u^j / R(u) du` for `j = 0, 1`, where
/// `R(u)² = (z - L u)² + c²` and `c² > 0`.
pub(crate) fn static_line_moments<T: Float>(z: T, c2: T, length: T) -> [T; 2] {
    let c = c2.sqrt();
    let lo = -z;
    let hi = length - z;
    let asinh_diff = asinh_ratio(hi, c) - asinh_ratio(lo, c);
    let r_hi = (hi * hi + c2).sqrt();
    let r_lo = (lo * lo + c2).sqrt();
    let m0 = asinh_diff / length;
    let m1 = ((r_hi - r_lo) + z * asinh_diff) / (length * length);
    [m0, m1]
}

#[inline]
fn asinh_ratio<T: Float>(x: T, c: T) -> T {
    // asinh(x/c) in a form that stays accurate for large negative x
    let t = x / c;
    if t >= T::zero() {
        (t + (t * t + T::one()).sqrt()).ln()
    } else {
        -((-t) + (t * t + T::one()).sqrt()).ln()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::GaussRule;
    use proptest::prelude::*;

    fn k1() -> Wavenumber<f64> {
        Wavenumber::from_wavelength(1.0).unwrap()
    }

    #[test]
    fn green_at_half_wavelength() {
        let g = scalar_green(&Vector3::zeros(), &Vector3::new(0.5, 0.0, 0.0), k1()).unwrap();
        let expected_mag = 1.0 / (4.0 * std::f64::consts::PI * 0.5);
        assert!((g.norm() - expected_mag).abs() < 1e-15);
        assert!((g.arg().abs() - std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn green_rejects_zero_distance() {
        let p = Vector3::new(1.0, 2.0, 3.0);
        assert_eq!(scalar_green(&p, &p, k1()), Err(Error::SingularKernel));
    }

    #[test]
    fn green_decays_as_inverse_distance() {
        let o = Vector3::zeros();
        let g1 = scalar_green(&o, &Vector3::new(100.0, 0.0, 0.0), k1()).unwrap();
        let g2 = scalar_green(&o, &Vector3::new(200.0, 0.0, 0.0), k1()).unwrap();
        assert!((g1.norm() / g2.norm() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn imaginary_part_limit_at_origin() {
        let k = k1();
        let g = scalar_green(&Vector3::zeros(), &Vector3::new(1e-7, 0.0, 0.0), k).unwrap();
        let lim = -k.k() / (4.0 * std::f64::consts::PI);
        assert!((g.im - lim).abs() < 1e-10);
    }

    #[test]
    fn thin_wire_kernel_at_zero_offset() {
        let k = k1();
        let a = 1e-3;
        let p = Vector3::new(0.1, 0.2, 0.3);
        let v = thin_wire_kernel(&p, &p, a, k);
        let expected = expj_neg(k.k() * a) / (4.0 * std::f64::consts::PI * a);
        assert!((v - expected).norm() < 1e-12 * expected.norm());
    }

    #[test]
    fn thin_wire_kernel_limits_to_green() {
        let k = k1();
        let p = Vector3::new(0.0, 0.0, 0.0);
        let q = Vector3::new(0.0, 0.0, 0.37);
        let g = scalar_green(&p, &q, k).unwrap();
        let v = thin_wire_kernel(&p, &q, 1e-9, k);
        assert!((v - g).norm() < 1e-12);
    }

    #[test]
    fn static_moments_match_fine_quadrature() {
        let rule = GaussRule::<f64>::new(200);
        for &(z, c2, len) in &[(0.3, 1e-4, 1.0), (-0.2, 0.01, 0.5), (0.05, 1e-6, 0.05)] {
            let [m0, m1] = static_line_moments(z, c2, len);
            // split the integral at the peak for accuracy
            let f = |u: f64, j: i32| u.powi(j) / (((z - len * u).powi(2) + c2).sqrt());
            let peak = (z / len).clamp(0.0, 1.0);
            let integrate = |j: i32| {
                let mut s = 0.0;
                for (a, b) in [(0.0, peak), (peak, 1.0)] {
                    if b > a {
                        s += rule
                            .iter()
                            .map(|(x, w)| w * (b - a) * f(a + (b - a) * x, j))
                            .sum::<f64>();
                    }
                }
                s
            };
            assert!((m0 - integrate(0)).abs() < 1e-8 * m0.abs(), "m0 z={z}");
            assert!((m1 - integrate(1)).abs() < 1e-8 * m1.abs().max(1e-12), "m1 z={z}");
        }
    }

    #[test]
    fn quadrature_spec_validation() {
        assert!(QuadratureSpec::new(1, SingularScheme::Subtraction).is_err());
        assert!(QuadratureSpec::new(2, SingularScheme::SelfTermAnalytic).is_ok());
    }

    proptest! {
        #[test]
        fn green_parts_and_bound(x in -5.0f64..5.0, y in -5.0f64..5.0, z in -5.0f64..5.0) {
            let r = Vector3::new(x, y, z);
            let dist = r.norm();
            prop_assume!(dist > 1e-6);
            let k = k1();
            let g = scalar_green(&Vector3::zeros(), &r, k).unwrap();
            let four_pi_r = 4.0 * std::f64::consts::PI * dist;
            prop_assert!((g.re - (k.k() * dist).cos() / four_pi_r).abs() < 1e-12 / dist.min(1.0));
            prop_assert!((g.im + (k.k() * dist).sin() / four_pi_r).abs() < 1e-12 / dist.min(1.0));
            prop_assert!(g.im.abs() <= k.k() / (4.0 * std::f64::consts::PI) + 1e-12);
        }

        #[test]
        fn thin_wire_kernel_finite_and_symmetric(d in -3.0f64..3.0, a in 1e-6f64..1e-2) {
            let k = k1();
            let o = Vector3::zeros();
            let p = Vector3::new(0.0, 0.0, d);
            let v1 = thin_wire_kernel(&o, &p, a, k);
            let v2 = thin_wire_kernel(&p, &o, a, k);
            prop_assert!(v1.re.is_finite() && v1.im.is_finite());
            prop_assert_eq!(v1, v2);
        }
    }
}
