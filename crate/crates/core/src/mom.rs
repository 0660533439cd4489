//! Galerkin EFIE assembly for thin wires with triangle basis functions, plane-wave
//! excitation, and the direct solution `Z I = V`.
//!
//! Entries use the mixed-potential form
//! `Z_mn = jkη ∫∫ ψ_m·ψ_n G − j(η/k) ∫∫ (∇·ψ_m)(∇·ψ_n) G`
//! with the reduced kernel `G = e^{-jkR}/(4πR)`, `R² = |Δ|² + a²`.

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector, Vector3};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{MeshId, Segment, WireMesh};
use crate::kernel::{static_line_moments, QuadratureSpec, SingularScheme, Wavenumber};
use crate::quadrature::GaussRule;
use crate::scalar::{cabs, cplx, czero, expj_neg, Complex, Float, ETA0};

/// Condition-number limit above which a solve is refused.
pub const CONDITION_LIMIT: f64 = 1e14;

#[derive(Debug, Clone, PartialEq)]
pub struct ImpedanceMatrix<T: Float> {
    pub entries: DMatrix<Complex<T>>,
    pub mesh_id: MeshId,
    pub k: Wavenumber<T>,
}

impl<T: Float> ImpedanceMatrix<T> {
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    /// Radiation matrix `Re{Z}`.
    pub fn re(&self) -> DMatrix<T> {
        self.entries.map(|z| z.re)
    }

    pub fn im(&self) -> DMatrix<T> {
        self.entries.map(|z| z.im)
    }

    /// 2-norm condition number from the singular values.
    pub fn condition_number(&self) -> T {
        condition_number(&self.entries)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExcitationVector<T: Float> {
    pub entries: DVector<Complex<T>>,
    pub mesh_id: MeshId,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurrentVector<T: Float> {
    pub entries: DVector<Complex<T>>,
    pub mesh_id: MeshId,
}

impl<T: Float> CurrentVector<T> {
    pub fn from_real(values: &[T], mesh_id: MeshId) -> Self {
        Self {
            entries: DVector::from_iterator(values.len(), values.iter().map(|&v| cplx(v, T::zero()))),
            mesh_id,
        }
    }
}

/// Time-harmonic plane wave `E(r) = A p̂ e^{-jk k̂·r}`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneWave<T: Float> {
    propagation_dir: Vector3<T>,
    polarization: Vector3<Complex<T>>,
    amplitude: T,
    k: Wavenumber<T>,
}

impl<T: Float> PlaneWave<T> {
    /// `direction` is normalized; `polarization` is normalized and must be
    /// orthogonal to the direction.
    pub fn new(
        direction: Vector3<T>,
        polarization: Vector3<Complex<T>>,
        amplitude: T,
        k: Wavenumber<T>,
    ) -> Result<Self> {
        let dn = direction.norm();
        if !(dn > T::zero()) {
            return Err(Error::InvalidParameter("propagation direction is zero".into()));
        }
        let dir = direction / dn;
        let pn = polarization.iter().fold(T::zero(), |a, c| a + c.norm_sqr()).sqrt();
        if !(pn > T::zero()) {
            return Err(Error::InvalidParameter("polarization is zero".into()));
        }
        let pol = polarization.map(|c| c / pn);
        let dot = pol.iter().zip(dir.iter()).fold(czero::<T>(), |a, (p, d)| a + *p * *d);
        if cabs(dot) > T::lit(1e-12) {
            return Err(Error::InvalidParameter(format!(
                "polarization not orthogonal to propagation (|p·k̂| = {:.3e})",
                cabs(dot).to_f64_lossy()
            )));
        }
        Ok(Self {
            propagation_dir: dir,
            polarization: pol,
            amplitude,
            k,
        })
    }

    /// Linear polarization helper.
    pub fn linear(direction: Vector3<T>, polarization: Vector3<T>, amplitude: T, k: Wavenumber<T>) -> Result<Self> {
        Self::new(direction, polarization.map(|p| cplx(p, T::zero())), amplitude, k)
    }

    pub fn direction(&self) -> &Vector3<T> {
        &self.propagation_dir
    }

    pub fn polarization(&self) -> &Vector3<Complex<T>> {
        &self.polarization
    }

    pub fn amplitude(&self) -> T {
        self.amplitude
    }

    pub fn k(&self) -> Wavenumber<T> {
        self.k
    }

    pub fn with_amplitude(&self, amplitude: T) -> Self {
        Self {
            amplitude,
            ..self.clone()
        }
    }

    pub fn field_at(&self, r: &Vector3<T>) -> Vector3<Complex<T>> {
        let phase = expj_neg(self.k.k() * self.propagation_dir.dot(r)) * self.amplitude;
        self.polarization.map(|p| p * phase)
    }

    pub fn describe(&self) -> String {
        let d = &self.propagation_dir;
        format!(
            "plane wave dir=({:.6},{:.6},{:.6}) amplitude={:.6} V/m",
            d.x.to_f64_lossy(),
            d.y.to_f64_lossy(),
            d.z.to_f64_lossy(),
            self.amplitude.to_f64_lossy()
        )
    }
}

/// `M[i][j] = ∫₀¹∫₀¹ u^i u'^j G(x(u), y(u')) du du'` for observation segment
/// `obs` and source segment `src`.
fn pair_moments<T: Float>(
    obs: &Segment<T>,
    src: &Segment<T>,
    a2: T,
    k: T,
    rule: &GaussRule<T>,
    analytic_static: bool,
) -> [[Complex<T>; 2]; 2] {
    let four_pi = T::lit(4.0) * T::pi();
    let mut m = [[czero::<T>(); 2]; 2];
    for (u, wu) in rule.iter() {
        let x = obs.point_at(u);
        let mut inner = [czero::<T>(); 2];
        for (v, wv) in rule.iter() {
            let y = src.point_at(v);
            let r = ((x - y).norm_squared() + a2).sqrt();
            let g = if analytic_static {
                // (e^{-jkR} - 1)/(4πR) without cancellation
                let half = (k * r / T::lit(2.0)).sin();
                cplx(-T::lit(2.0) * half * half, -(k * r).sin()) / (four_pi * r)
            } else {
                expj_neg(k * r) / (four_pi * r)
            };
            inner[0] += g * wv;
            inner[1] += g * (wv * v);
        }
        if analytic_static {
            let rel = x - src.start;
            let z = rel.dot(&src.tangent);
            let rho2 = (rel.norm_squared() - z * z).max(T::zero());
            let [s0, s1] = static_line_moments(z, rho2 + a2, src.length);
            inner[0] += cplx(s0 / four_pi, T::zero());
            inner[1] += cplx(s1 / four_pi, T::zero());
        }
        for j in 0..2 {
            m[0][j] += inner[j] * wu;
            m[1][j] += inner[j] * (wu * u);
        }
    }
    m
}

fn needs_static_subtraction<T: Float>(a: &Segment<T>, b: &Segment<T>, scheme: SingularScheme) -> bool {
    let same = a.key() == b.key();
    match scheme {
        SingularScheme::SelfTermAnalytic => same,
        SingularScheme::Subtraction => {
            let mid = |s: &Segment<T>| (s.start + s.end) / T::lit(2.0);
            same || (mid(a) - mid(b)).norm() < T::lit(1.5) * (a.length + b.length)
        }
    }
}

type Block<T> = [[Complex<T>; 2]; 2];

/// Interaction of the two local shapes (falling, rising) on `obs` with those on `src`.
fn compute_block<T: Float>(
    obs: &Segment<T>,
    src: &Segment<T>,
    a2: T,
    k: T,
    rule: &GaussRule<T>,
    scheme: SingularScheme,
) -> Block<T> {
    let m = pair_moments(obs, src, a2, k, rule, needs_static_subtraction(obs, src, scheme));
    // shape products: falling = 1-u, rising = u
    let shape = [
        [m[0][0] - m[1][0] - m[0][1] + m[1][1], m[0][1] - m[1][1]],
        [m[1][0] - m[1][1], m[1][1]],
    ];
    let eta = T::lit(ETA0);
    let vec_coef = cplx(
        T::zero(),
        k * eta * obs.tangent.dot(&src.tangent) * obs.length * src.length,
    );
    let sca_coef = cplx(T::zero(), -eta / k);
    let sign = [-T::one(), T::one()];
    let mut b = [[czero::<T>(); 2]; 2];
    for al in 0..2 {
        for be in 0..2 {
            b[al][be] = vec_coef * shape[al][be] + sca_coef * m[0][0] * (sign[al] * sign[be]);
        }
    }
    b
}

fn key_cmp<T: Float>(a: &Segment<T>, b: &Segment<T>) -> Ordering {
    let (ka, kb) = (a.key(), b.key());
    for i in 0..6 {
        match ka[i].partial_cmp(&kb[i]) {
            Some(Ordering::Equal) | None => continue,
            Some(o) => return o,
        }
    }
    Ordering::Equal
}

/// Block evaluated in a canonical segment order so that swapping the pair
/// yields the exact transpose, and geometrically identical pairs in different
/// meshes give bit-identical values.
fn pair_block<T: Float>(
    obs: &Segment<T>,
    src: &Segment<T>,
    a2: T,
    k: T,
    rule: &GaussRule<T>,
    scheme: SingularScheme,
) -> Block<T> {
    let tr = |b: Block<T>| [[b[0][0], b[1][0]], [b[0][1], b[1][1]]];
    match key_cmp(obs, src) {
        Ordering::Less => compute_block(obs, src, a2, k, rule, scheme),
        Ordering::Greater => tr(compute_block(src, obs, a2, k, rule, scheme)),
        Ordering::Equal => {
            let b = compute_block(obs, src, a2, k, rule, scheme);
            let t = tr(b);
            let half = T::lit(0.5);
            let mut s = b;
            for i in 0..2 {
                for j in 0..2 {
                    s[i][j] = (b[i][j] + t[i][j]) * half;
                }
            }
            s
        }
    }
}

fn check_quad(quad: &QuadratureSpec) -> Result<()> {
    quad.validate()
}

/// Interaction matrix between test functions of `mesh_a` (rows) and basis
/// functions of `mesh_b` (columns).
pub fn assemble_cross_z<T: Float>(
    mesh_a: &WireMesh<T>,
    mesh_b: &WireMesh<T>,
    k: Wavenumber<T>,
    quad: &QuadratureSpec,
) -> Result<DMatrix<Complex<T>>> {
    check_quad(quad)?;
    let rule = GaussRule::<T>::new(quad.points_per_segment);
    let a2 = (mesh_a.radius() * mesh_a.radius() + mesh_b.radius() * mesh_b.radius()) / T::lit(2.0);
    let sa = mesh_a.segments();
    let sb = mesh_b.segments();
    let nb_seg = sb.len();
    let blocks: Vec<Block<T>> = (0..sa.len() * nb_seg)
        .into_par_iter()
        .map(|idx| {
            let (i, j) = (idx / nb_seg, idx % nb_seg);
            pair_block(&sa[i], &sb[j], a2, k.k(), &rule, quad.singular_scheme)
        })
        .collect();
    let (na, nb) = (mesh_a.basis_count(), mesh_b.basis_count());
    let mut z = DMatrix::from_element(na, nb, czero::<T>());
    for m in 0..na {
        for mu in 0..nb {
            let (sup_a, sup_b) = (mesh_a.support(m), mesh_b.support(mu));
            let term = |p: usize, q: usize| {
                let ((s, al), (t, be)) = (sup_a[p], sup_b[q]);
                blocks[s * nb_seg + t][al.index()][be.index()]
            };
            // grouping invariant under swapping the two meshes keeps Z^BA = (Z^AB)ᵀ exact
            z[(m, mu)] = (term(0, 0) + term(1, 1)) + (term(0, 1) + term(1, 0));
        }
    }
    Ok(z)
}

/// Impedance matrix of a single mesh (the cross matrix of the mesh with itself).
pub fn assemble_z<T: Float>(mesh: &WireMesh<T>, k: Wavenumber<T>, quad: &QuadratureSpec) -> Result<ImpedanceMatrix<T>> {
    Ok(ImpedanceMatrix {
        entries: assemble_cross_z(mesh, mesh, k, quad)?,
        mesh_id: mesh.id().clone(),
        k,
    })
}

/// Tested incident field `V_μ = ∫ ψ_μ · E_inc dl`.
pub fn assemble_v_planewave<T: Float>(
    mesh: &WireMesh<T>,
    wave: &PlaneWave<T>,
    quad: &QuadratureSpec,
) -> Result<ExcitationVector<T>> {
    check_quad(quad)?;
    let rule = GaussRule::<T>::new(quad.points_per_segment);
    let segs = mesh.segments();
    // per segment: ∫ (1-u) t·E, ∫ u t·E
    let per_seg: Vec<[Complex<T>; 2]> = segs
        .iter()
        .map(|s| {
            let mut acc = [czero::<T>(); 2];
            for (u, w) in rule.iter() {
                let e = wave.field_at(&s.point_at(u));
                let te = e
                    .iter()
                    .zip(s.tangent.iter())
                    .fold(czero::<T>(), |a, (ei, ti)| a + *ei * *ti);
                acc[0] += te * (w * (T::one() - u) * s.length);
                acc[1] += te * (w * u * s.length);
            }
            acc
        })
        .collect();
    let n = mesh.basis_count();
    let entries = DVector::from_iterator(
        n,
        (0..n).map(|m| {
            mesh.support(m)
                .iter()
                .fold(czero::<T>(), |a, &(s, shape)| a + per_seg[s][shape.index()])
        }),
    );
    Ok(ExcitationVector {
        entries,
        mesh_id: mesh.id().clone(),
        description: wave.describe(),
    })
}

pub(crate) fn condition_number<T: Float>(m: &DMatrix<Complex<T>>) -> T {
    if m.is_empty() {
        return T::one();
    }
    let sv = m.clone().svd(false, false).singular_values;
    let smax = sv.iter().fold(T::zero(), |a, &b| a.max(b));
    let smin = sv.iter().fold(smax, |a, &b| a.min(b));
    if smin > T::zero() {
        smax / smin
    } else {
        T::max_value().unwrap_or(smax)
    }
}

/// LU factorization guarded by a condition-number check.
pub struct FactoredImpedance<T: Float> {
    lu: nalgebra::LU<Complex<T>, nalgebra::Dyn, nalgebra::Dyn>,
    pub condition: T,
}

impl<T: Float> FactoredImpedance<T> {
    pub fn new(z: &ImpedanceMatrix<T>) -> Result<Self> {
        let condition = z.condition_number();
        let limit = T::lit(CONDITION_LIMIT);
        if !(condition <= limit) {
            return Err(Error::IllConditioned {
                condition: condition.to_f64_lossy(),
                limit: CONDITION_LIMIT,
            });
        }
        Ok(Self {
            lu: z.entries.clone().lu(),
            condition,
        })
    }

    pub fn solve(&self, rhs: &DMatrix<Complex<T>>) -> Result<DMatrix<Complex<T>>> {
        self.lu.solve(rhs).ok_or(Error::IllConditioned {
            condition: f64::INFINITY,
            limit: CONDITION_LIMIT,
        })
    }
}

/// Direct solution of `Z I = V`.
pub fn solve_direct<T: Float>(z: &ImpedanceMatrix<T>, v: &ExcitationVector<T>) -> Result<CurrentVector<T>> {
    if z.mesh_id != v.mesh_id {
        return Err(Error::MeshMismatch(format!(
            "impedance matrix on {} but excitation on {}",
            z.mesh_id, v.mesh_id
        )));
    }
    if v.entries.len() != z.dim() {
        return Err(Error::DimensionMismatch {
            expected: z.dim(),
            actual: v.entries.len(),
            context: "excitation length",
        });
    }
    let f = FactoredImpedance::new(z)?;
    let rhs = DMatrix::from_column_slice(v.entries.len(), 1, v.entries.as_slice());
    let sol = f.solve(&rhs)?;
    Ok(CurrentVector {
        entries: sol.column(0).into_owned(),
        mesh_id: z.mesh_id.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::make_dipole;
    use crate::scalar::max_abs_complex;

    fn k1() -> Wavenumber<f64> {
        Wavenumber::from_wavelength(1.0).unwrap()
    }

    #[test]
    fn impedance_is_symmetric() {
        let m = make_dipole(1.3, 1e-3, 26).unwrap();
        let z = assemble_z(&m, k1(), &QuadratureSpec::default()).unwrap();
        let d = max_abs_complex(&(z.entries.clone() - z.entries.transpose()));
        assert!(d / max_abs_complex(&z.entries) < 1e-10);
    }

    #[test]
    fn cross_with_self_is_bit_identical() {
        let m = make_dipole(0.8, 1e-3, 16).unwrap();
        let q = QuadratureSpec::default();
        let z = assemble_z(&m, k1(), &q).unwrap();
        let c = assemble_cross_z(&m, &m, k1(), &q).unwrap();
        assert_eq!(z.entries, c);
    }

    #[test]
    fn cross_of_nested_is_column_selection() {
        let parent = make_dipole(2.0, 1e-3, 40).unwrap();
        let child = make_dipole(1.0, 1e-3, 20).unwrap();
        let q = QuadratureSpec::default();
        let zp = assemble_z(&parent, k1(), &q).unwrap();
        let c = assemble_cross_z(&parent, &child, k1(), &q).unwrap();
        let map = crate::geometry::nest(&child, &parent, 1e-12);
        for (mu, m) in map.index_map.iter().enumerate() {
            let m = m.unwrap();
            for r in 0..parent.basis_count() {
                assert!((c[(r, mu)] - zp.entries[(r, m)]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn distant_dipoles_couple_weakly() {
        let a = make_dipole(0.5, 1e-3, 10).unwrap();
        let nodes = a.nodes().iter().map(|p| p + Vector3::new(10.0, 0.0, 0.0)).collect();
        let b = WireMesh::from_nodes(nodes, 1e-3).unwrap();
        let q = QuadratureSpec::default();
        let zs = assemble_z(&a, k1(), &q).unwrap();
        let c = assemble_cross_z(&a, &b, k1(), &q).unwrap();
        assert!(max_abs_complex(&c) < max_abs_complex(&zs.entries) / 100.0);
    }

    #[test]
    fn short_dipole_is_capacitive() {
        let m = make_dipole(0.05, 1e-4, 4).unwrap();
        let q = QuadratureSpec::default();
        let z = assemble_z(&m, k1(), &q).unwrap();
        // fine-quadrature oracle on the same integrals
        let fine = assemble_z(&m, k1(), &QuadratureSpec::new(64, SingularScheme::Subtraction).unwrap()).unwrap();
        for zz in [&z, &fine] {
            let modes = crate::modes::characteristic_modes(zz, 1e-12).unwrap();
            assert!(modes.eigenvalues[0] < 0.0);
            // Rayleigh quotient of the uniform current as an independent check
            let ones = DVector::from_element(zz.dim(), Complex::new(1.0, 0.0));
            let q = (ones.transpose() * &zz.entries * &ones)[(0, 0)];
            assert!(q.im < 0.0);
        }
    }

    #[test]
    fn quadrature_refinement_for_separated_pairs() {
        let m = make_dipole(2.0, 1e-3, 40).unwrap();
        let z4 = assemble_z(&m, k1(), &QuadratureSpec::default()).unwrap();
        let z8 = assemble_z(&m, k1(), &QuadratureSpec::new(8, SingularScheme::Subtraction).unwrap()).unwrap();
        for i in 0..m.basis_count() {
            for j in 0..m.basis_count() {
                if i.abs_diff(j) >= 4 {
                    let rel = (z4.entries[(i, j)] - z8.entries[(i, j)]).norm() / z8.entries[(i, j)].norm();
                    assert!(rel < 1e-6, "({i},{j}) rel {rel}");
                }
            }
        }
    }

    #[test]
    fn excitation_properties() {
        let m = make_dipole(1.0, 1e-3, 20).unwrap();
        let q = QuadratureSpec::default();
        let k = k1();
        // polarization orthogonal to the wire
        let w = PlaneWave::linear(Vector3::new(1.0, 0.0, 0.0), Vector3::new(0.0, 1.0, 0.0), 1.0, k).unwrap();
        let v = assemble_v_planewave(&m, &w, &q).unwrap();
        assert!(v.entries.iter().all(|c| c.norm() == 0.0));
        // broadside, z-polarized: symmetric
        let w = PlaneWave::linear(Vector3::new(1.0, 0.0, 0.0), Vector3::new(0.0, 0.0, 1.0), 1.0, k).unwrap();
        let v = assemble_v_planewave(&m, &w, &q).unwrap();
        let n = v.entries.len();
        for i in 0..n {
            assert!((v.entries[i] - v.entries[n - 1 - i]).norm() < 1e-14);
        }
        let v2 = assemble_v_planewave(&m, &w.with_amplitude(2.0), &q).unwrap();
        assert!((v2.entries.clone() - v.entries.clone() * Complex::new(2.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn plane_wave_validation() {
        let k = k1();
        assert!(PlaneWave::linear(Vector3::new(1.0, 0.0, 0.0), Vector3::new(1.0, 0.0, 0.0), 1.0, k).is_err());
        assert!(PlaneWave::linear(Vector3::zeros(), Vector3::new(1.0, 0.0, 0.0), 1.0, k).is_err());
        let w = PlaneWave::linear(Vector3::new(2.0, 0.0, -2.0), Vector3::new(1.0, 0.0, 1.0), 1.0, k).unwrap();
        assert!((w.direction().norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn direct_solve_residual_and_zero_rhs() {
        let m = make_dipole(0.8, 1e-3, 16).unwrap();
        let q = QuadratureSpec::default();
        let z = assemble_z(&m, k1(), &q).unwrap();
        let n = z.dim();
        let v = ExcitationVector {
            entries: DVector::from_fn(n, |i, _| Complex::new((i as f64).sin(), (3.0 * i as f64).cos())),
            mesh_id: m.id().clone(),
            description: String::new(),
        };
        let i = solve_direct(&z, &v).unwrap();
        let res = (&z.entries * &i.entries - &v.entries).norm() / v.entries.norm();
        assert!(res < 1e-10);
        let v0 = ExcitationVector {
            entries: DVector::from_element(n, Complex::new(0.0, 0.0)),
            ..v.clone()
        };
        assert!(solve_direct(&z, &v0).unwrap().entries.iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn direct_solve_rejects_singular_and_mismatch() {
        let m = make_dipole(0.8, 1e-3, 16).unwrap();
        let n = m.basis_count();
        let z = ImpedanceMatrix {
            entries: DMatrix::from_element(n, n, Complex::new(1.0, 0.0)),
            mesh_id: m.id().clone(),
            k: k1(),
        };
        let v = ExcitationVector {
            entries: DVector::from_element(n, Complex::new(1.0, 0.0)),
            mesh_id: m.id().clone(),
            description: String::new(),
        };
        assert!(matches!(solve_direct(&z, &v), Err(Error::IllConditioned { .. })));
        let v_bad = ExcitationVector {
            mesh_id: MeshId("other".into()),
            ..v
        };
        assert!(matches!(solve_direct(&z, &v_bad), Err(Error::MeshMismatch(_))));
    }
}
