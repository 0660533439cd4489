//! Near and far fields of wire currents, modal coefficients, and scattered-field
//! reconstruction from modal expansions.
//!
//! [`near_field_of_current`] returns the physical field radiated by a current,
//! `E = −jωμA − ∇Φ`. A characteristic field `E_n` is the field operator whose
//! tangential trace tested on the wire reproduces `Z I_n`; it is the negative of
//! the radiated field of `I_n`. With this sign `E_sc = Σ f_n E_n` for `f = P a`.

use nalgebra::{DVector, Vector3};

use crate::error::{Error, Result};
use crate::geometry::{MeshId, WireMesh};
use crate::kernel::{QuadratureSpec, Wavenumber};
use crate::modes::ModalBasis;
use crate::mom::{CurrentVector, ExcitationVector, ImpedanceMatrix, PlaneWave};
use crate::quadrature::GaussRule;
use crate::scalar::{cabs, cplx, czero, expj_neg, Complex, Float, ETA0};
use crate::xform::PerturbationMatrix;

pub type CVec3<T> = Vector3<Complex<T>>;

#[derive(Debug, Clone, PartialEq)]
pub struct FieldSample<T: Float> {
    pub position: Vector3<T>,
    pub e: CVec3<T>,
}

impl<T: Float> FieldSample<T> {
    /// Euclidean magnitude of the complex 3-vector.
    pub fn magnitude(&self) -> T {
        cnorm(&self.e)
    }

    /// `|E − E_ref| / |E_ref|`.
    pub fn relative_error(&self, reference: &FieldSample<T>) -> Result<T> {
        let d = cnorm(&(self.e - reference.e));
        let n = reference.magnitude();
        if !(n > T::zero()) {
            return Err(Error::Degenerate("reference field is zero".into()));
        }
        Ok(d / n)
    }
}

pub fn cnorm<T: Float>(v: &CVec3<T>) -> T {
    v.iter().fold(T::zero(), |a, c| a + c.norm_sqr()).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoefficientKind {
    /// `a_n`, weights of the incident field.
    Excitation,
    /// `f_n`, weights of the scattered field.
    Scattered,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModalCoefficients<T: Float> {
    pub values: DVector<Complex<T>>,
    pub kind: CoefficientKind,
    pub basis_mesh: MeshId,
}

/// Far-zone amplitude `F = lim r e^{jkr} E` in spherical (θ, φ) components.
#[derive(Debug, Clone, PartialEq)]
pub struct FarFieldSample<T: Float> {
    pub direction: Vector3<T>,
    pub f: [Complex<T>; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FarFieldComponent {
    #[default]
    Theta,
    Phi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum FieldKernel {
    /// `e^{-jkR}/(4πR)`
    Outgoing,
    /// `−j sin(kR)/(4πR)`, the source-free part
    Standing,
}

fn check_off_wire<T: Float>(mesh: &WireMesh<T>, r: &Vector3<T>) -> Result<()> {
    // one full radius of clearance outside the wire surface
    let d = mesh.distance_to_axis(r);
    if !(d >= T::lit(2.0) * mesh.radius()) {
        return Err(Error::ObservationOnWire {
            distance: d.to_f64_lossy(),
            radius: mesh.radius().to_f64_lossy(),
        });
    }
    Ok(())
}

/// Radiated field at `r` of every basis function carrying unit coefficient.
fn basis_fields<T: Float>(
    mesh: &WireMesh<T>,
    r: &Vector3<T>,
    k: Wavenumber<T>,
    quad: &QuadratureSpec,
    kernel: FieldKernel,
) -> Result<Vec<CVec3<T>>> {
    quad.validate()?;
    check_off_wire(mesh, r)?;
    let rule = GaussRule::<T>::new(quad.points_per_segment);
    let k = k.k();
    let eta = T::lit(ETA0);
    let four_pi = T::lit(4.0) * T::pi();
    let zero3 = || CVec3::<T>::from_element(czero());
    // per segment: field of the falling and rising shapes
    let per_seg: Vec<[CVec3<T>; 2]> = mesh
        .segments()
        .iter()
        .map(|s| {
            let mut vec_part = [czero::<T>(); 2];
            let mut grad = zero3();
            for (u, w) in rule.iter() {
                let y = s.point_at(u);
                let d = r - y;
                let dist = d.norm();
                let (g, dg) = match kernel {
                    FieldKernel::Outgoing => {
                        let g = expj_neg(k * dist) / (four_pi * dist);
                        (g, -g * cplx(T::one(), k * dist) / dist)
                    }
                    FieldKernel::Standing => {
                        let (sn, cs) = ((k * dist).sin(), (k * dist).cos());
                        let g = cplx(T::zero(), -sn / (four_pi * dist));
                        let dg = cplx(T::zero(), -(k * dist * cs - sn) / (four_pi * dist * dist));
                        (g, dg)
                    }
                };
                vec_part[0] += g * (w * (T::one() - u));
                vec_part[1] += g * (w * u);
                let gd = d / dist;
                grad += gd.map(|c| dg * (c * w));
            }
            let a_coef = cplx(T::zero(), -k * eta * s.length);
            let phi_coef = cplx(T::zero(), -eta / k);
            let mut out = [zero3(), zero3()];
            for (al, sign) in [(0usize, -T::one()), (1, T::one())] {
                let t = s.tangent.map(|c| a_coef * vec_part[al] * c);
                out[al] = t + grad.map(|c| phi_coef * c * sign);
            }
            out
        })
        .collect();
    Ok((0..mesh.basis_count())
        .map(|m| {
            mesh.support(m)
                .iter()
                .fold(zero3(), |a, &(s, shape)| a + per_seg[s][shape.index()])
        })
        .collect())
}

fn combine<T: Float>(fields: &[CVec3<T>], coeffs: impl Iterator<Item = Complex<T>>) -> CVec3<T> {
    fields
        .iter()
        .zip(coeffs)
        .fold(CVec3::<T>::from_element(czero()), |a, (e, c)| a + e.map(|x| x * c))
}

/// Physical field radiated at `r` by `current` flowing on `mesh`.
pub fn near_field_of_current<T: Float>(
    mesh: &WireMesh<T>,
    current: &CurrentVector<T>,
    r: &Vector3<T>,
    k: Wavenumber<T>,
    quad: &QuadratureSpec,
) -> Result<FieldSample<T>> {
    check_current(mesh, current)?;
    let f = basis_fields(mesh, r, k, quad, FieldKernel::Outgoing)?;
    Ok(FieldSample {
        position: *r,
        e: combine(&f, current.entries.iter().copied()),
    })
}

fn check_current<T: Float>(mesh: &WireMesh<T>, current: &CurrentVector<T>) -> Result<()> {
    if &current.mesh_id != mesh.id() {
        return Err(Error::MeshMismatch(format!(
            "current on {} evaluated on {}",
            current.mesh_id,
            mesh.id()
        )));
    }
    if current.entries.len() != mesh.basis_count() {
        return Err(Error::DimensionMismatch {
            expected: mesh.basis_count(),
            actual: current.entries.len(),
            context: "current length",
        });
    }
    Ok(())
}

/// Standing-wave field of a real current: the radiation integral with the
/// source-free kernel. For real currents this equals `(E + E*)/2`.
pub fn standing_wave_field<T: Float>(
    mesh: &WireMesh<T>,
    modal_current: &DVector<T>,
    r: &Vector3<T>,
    k: Wavenumber<T>,
    quad: &QuadratureSpec,
) -> Result<FieldSample<T>> {
    if modal_current.len() != mesh.basis_count() {
        return Err(Error::DimensionMismatch {
            expected: mesh.basis_count(),
            actual: modal_current.len(),
            context: "modal current length",
        });
    }
    let f = basis_fields(mesh, r, k, quad, FieldKernel::Standing)?;
    Ok(FieldSample {
        position: *r,
        e: combine(&f, modal_current.iter().map(|&v| cplx(v, T::zero()))),
    })
}

fn check_basis_mesh<T: Float>(basis: &ModalBasis<T>, mesh: &WireMesh<T>) -> Result<()> {
    if &basis.mesh_id != mesh.id() {
        return Err(Error::MeshMismatch(format!(
            "basis computed on {} but mesh is {}",
            basis.mesh_id,
            mesh.id()
        )));
    }
    Ok(())
}

/// Characteristic fields `E_n(r)` of every mode in `basis`.
pub fn characteristic_fields<T: Float>(
    basis: &ModalBasis<T>,
    mesh: &WireMesh<T>,
    r: &Vector3<T>,
    quad: &QuadratureSpec,
) -> Result<Vec<CVec3<T>>> {
    check_basis_mesh(basis, mesh)?;
    let f = basis_fields(mesh, r, basis.k, quad, FieldKernel::Outgoing)?;
    Ok((0..basis.mode_count())
        .map(|n| -combine(&f, basis.currents.column(n).iter().map(|&v| cplx(v, T::zero()))))
        .collect())
}

/// `a = (I_CM)ᵀ V`.
pub fn modal_excitation<T: Float>(basis: &ModalBasis<T>, v: &ExcitationVector<T>) -> Result<ModalCoefficients<T>> {
    if basis.mesh_id != v.mesh_id {
        return Err(Error::MeshMismatch(format!(
            "basis on {} but excitation on {}",
            basis.mesh_id, v.mesh_id
        )));
    }
    if basis.dim() != v.entries.len() {
        return Err(Error::DimensionMismatch {
            expected: basis.dim(),
            actual: v.entries.len(),
            context: "excitation length",
        });
    }
    let ic = basis.currents.map(|x| cplx(x, T::zero()));
    Ok(ModalCoefficients {
        values: ic.transpose() * &v.entries,
        kind: CoefficientKind::Excitation,
        basis_mesh: basis.mesh_id.clone(),
    })
}

/// `f = P a`.
pub fn scatter<T: Float>(p: &PerturbationMatrix<T>, a: &ModalCoefficients<T>) -> Result<ModalCoefficients<T>> {
    if p.basis_mesh != a.basis_mesh {
        return Err(Error::MeshMismatch(format!(
            "perturbation in basis {} but coefficients in {}",
            p.basis_mesh, a.basis_mesh
        )));
    }
    if p.dim() != a.values.len() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            actual: a.values.len(),
            context: "coefficient count",
        });
    }
    Ok(ModalCoefficients {
        values: &p.entries * &a.values,
        kind: CoefficientKind::Scattered,
        basis_mesh: a.basis_mesh.clone(),
    })
}

/// `Σ_{n < n_trunc} f_n E_n(r)`.
pub fn reconstruct_field<T: Float>(
    basis: &ModalBasis<T>,
    mesh: &WireMesh<T>,
    f: &ModalCoefficients<T>,
    r: &Vector3<T>,
    n_trunc: usize,
    quad: &QuadratureSpec,
) -> Result<FieldSample<T>> {
    let fields = characteristic_fields(basis, mesh, r, quad)?;
    reconstruct_from_fields(&fields, f, n_trunc, r)
}

/// Same as [`reconstruct_field`] with the characteristic fields already evaluated.
pub fn reconstruct_from_fields<T: Float>(
    fields: &[CVec3<T>],
    f: &ModalCoefficients<T>,
    n_trunc: usize,
    r: &Vector3<T>,
) -> Result<FieldSample<T>> {
    if n_trunc > fields.len() || n_trunc > f.values.len() {
        return Err(Error::InvalidParameter(format!(
            "truncation {n_trunc} exceeds mode count {}",
            fields.len().min(f.values.len())
        )));
    }
    Ok(FieldSample {
        position: *r,
        e: combine(&fields[..n_trunc], f.values.iter().copied()),
    })
}

/// Scattered field of structure B from the direct solution `Z_B I = V_B`.
pub fn direct_scattered_field<T: Float>(
    mesh_b: &WireMesh<T>,
    z_b: &ImpedanceMatrix<T>,
    wave: &PlaneWave<T>,
    r: &Vector3<T>,
    quad: &QuadratureSpec,
) -> Result<FieldSample<T>> {
    let v = crate::mom::assemble_v_planewave(mesh_b, wave, quad)?;
    let i = crate::mom::solve_direct(z_b, &v)?;
    near_field_of_current(mesh_b, &i, r, z_b.k, quad)
}

/// Normalized error `|Σ_{n≤N} f_n E_n − E_direct| / |E_direct|` for `N = 1..=n_max`.
pub fn convergence_curve<T: Float>(
    fields_a: &[CVec3<T>],
    f: &ModalCoefficients<T>,
    direct: &FieldSample<T>,
    n_max: usize,
) -> Result<Vec<(usize, T)>> {
    if !(direct.magnitude() > T::zero()) {
        return Err(Error::Degenerate(
            "direct scattered field is zero; error undefined".into(),
        ));
    }
    let n_max = n_max.min(fields_a.len()).min(f.values.len());
    (1..=n_max)
        .map(|n| {
            let e = reconstruct_from_fields(fields_a, f, n, &direct.position)?;
            Ok((n, e.relative_error(direct)?))
        })
        .collect()
}

/// Straw-man field: A's characteristic fields weighted with B's own diagonal
/// perturbation, `f_n = −a_n/(1 + jλ_n^B)`.
pub fn naive_approx_field<T: Float>(
    fields_a: &[CVec3<T>],
    eigenvalues_b: &[T],
    a: &ModalCoefficients<T>,
    r: &Vector3<T>,
    n: usize,
) -> Result<FieldSample<T>> {
    let n = n.min(fields_a.len()).min(eigenvalues_b.len()).min(a.values.len());
    let coeffs = (0..n).map(|i| -a.values[i] / cplx(T::one(), eigenvalues_b[i]));
    Ok(FieldSample {
        position: *r,
        e: combine(&fields_a[..n], coeffs),
    })
}

/// Far-zone pattern of `current`, phase referenced to the origin.
pub fn far_field_of_current<T: Float>(
    mesh: &WireMesh<T>,
    current: &CurrentVector<T>,
    direction: &Vector3<T>,
    k: Wavenumber<T>,
    quad: &QuadratureSpec,
) -> Result<FarFieldSample<T>> {
    check_current(mesh, current)?;
    quad.validate()?;
    let dn = direction.norm();
    if !(dn > T::zero()) {
        return Err(Error::InvalidParameter("far-field direction is zero".into()));
    }
    let rhat = direction / dn;
    let rule = GaussRule::<T>::new(quad.points_per_segment);
    let kk = k.k();
    let mut acc = CVec3::<T>::from_element(czero());
    for (s_idx, s) in mesh.segments().iter().enumerate() {
        let mut along = czero::<T>();
        for (u, w) in rule.iter() {
            let y = s.point_at(u);
            let phase = expj_neg(-kk * rhat.dot(&y));
            let mut i_here = czero::<T>();
            for (m, shape) in mesh.basis_on_segment(s_idx) {
                i_here += current.entries[m] * shape.value(u);
            }
            along += i_here * phase * (w * s.length);
        }
        acc += s.tangent.map(|t| along * t);
    }
    // transverse part, scaled by −jkη/(4π)
    let radial = acc.iter().zip(rhat.iter()).fold(czero::<T>(), |a, (c, r)| a + *c * *r);
    let transverse = acc - rhat.map(|r| radial * r);
    let coef = cplx(T::zero(), -kk * T::lit(ETA0) / (T::lit(4.0) * T::pi()));
    let f = transverse.map(|c| c * coef);
    let (theta_hat, phi_hat) = spherical_unit_vectors(&rhat);
    let dot = |v: &Vector3<T>| f.iter().zip(v.iter()).fold(czero::<T>(), |a, (c, x)| a + *c * *x);
    Ok(FarFieldSample {
        direction: rhat,
        f: [dot(&theta_hat), dot(&phi_hat)],
    })
}

/// θ̂ and φ̂ at direction `rhat`; on the z-axis φ is taken as zero.
pub fn spherical_unit_vectors<T: Float>(rhat: &Vector3<T>) -> (Vector3<T>, Vector3<T>) {
    let rho = (rhat.x * rhat.x + rhat.y * rhat.y).sqrt();
    let (cp, sp) = if rho > T::zero() {
        (rhat.x / rho, rhat.y / rho)
    } else {
        (T::one(), T::zero())
    };
    let ct = rhat.z;
    let st = rho;
    (Vector3::new(ct * cp, ct * sp, -st), Vector3::new(-sp, cp, T::zero()))
}

/// Unit direction from polar angle `theta` and azimuth `phi` (radians).
pub fn direction_from_angles<T: Float>(theta: T, phi: T) -> Vector3<T> {
    Vector3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos())
}

/// Weight `ρ` such that `ρ F_a + F_b` vanishes in `component` at the common direction.
pub fn two_mode_null_ratio<T: Float>(
    f_a: &FarFieldSample<T>,
    f_b: &FarFieldSample<T>,
    component: FarFieldComponent,
) -> Result<Complex<T>> {
    if (f_a.direction - f_b.direction).norm() > T::lit(1e-12) {
        return Err(Error::InvalidParameter(
            "far-field samples at different directions".into(),
        ));
    }
    let idx = match component {
        FarFieldComponent::Theta => 0,
        FarFieldComponent::Phi => 1,
    };
    let (a, b) = (f_a.f[idx], f_b.f[idx]);
    if !(cabs(a) > T::zero()) {
        return Err(Error::Degenerate(if cabs(b) > T::zero() {
            "first mode has no amplitude in the working component".into()
        } else {
            "both modes vanish in the working component".into()
        }));
    }
    Ok(-b / a)
}

/// `V^B = (U^AB)ᵀ a^A`: incident excitation of B rebuilt from A's coefficients.
pub fn excitation_from_modal<T: Float>(
    u: &crate::xform::IncidentProjection<T>,
    a: &ModalCoefficients<T>,
) -> Result<ExcitationVector<T>> {
    if u.entries.nrows() != a.values.len() {
        return Err(Error::DimensionMismatch {
            expected: u.entries.nrows(),
            actual: a.values.len(),
            context: "coefficient count",
        });
    }
    let uc = u.entries.map(|x| cplx(x, T::zero()));
    Ok(ExcitationVector {
        entries: uc.transpose() * &a.values,
        mesh_id: u.mesh_b.clone(),
        description: "modal excitation".into(),
    })
}
