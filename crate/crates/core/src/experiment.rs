//! The dipole study: a fixed reference dipole supplies the modal basis, and shorter
//! dipoles cut from the same segmentation are described in that basis.

use nalgebra::{DMatrix, Vector3};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fields::{
    characteristic_fields, convergence_curve, direct_scattered_field, modal_excitation, naive_approx_field,
    reconstruct_from_fields, scatter, CVec3, FieldSample, ModalCoefficients,
};
use crate::geometry::{make_dipole, nest, WireMesh};
use crate::kernel::{QuadratureSpec, Wavenumber};
use crate::modes::{characteristic_modes, ModalBasis, ModalDiagnostics};
use crate::mom::{assemble_v_planewave, assemble_z, ImpedanceMatrix, PlaneWave};
use crate::scalar::{max_abs_complex, max_abs_real, Float};
use crate::xform::{
    cross_radiation, incident_projection, perturbation_in_foreign_basis, transform_matrix, transform_perturbation,
    PerturbationMatrix, TransformMatrix,
};

pub const SUBMATRIX_TOL: f64 = 1e-12;
pub const OWN_BASIS_TOL: f64 = 1e-10;
pub const ROUTE_TOL: f64 = 1e-8;
pub const SYMMETRY_TOL: f64 = 1e-8;
pub const ORACLE_TOL: f64 = 1e-3;

/// Everything that defines a study. Lengths are in metres.
#[derive(Debug, Clone)]
pub struct DipoleStudy<T: Float> {
    pub wavelength: T,
    pub reference_length: T,
    pub radius: T,
    pub segments: usize,
    pub wave: PlaneWave<T>,
    pub observation_points: Vec<Vector3<T>>,
    pub rank_tolerance: T,
    pub quadrature: QuadratureSpec,
}

/// Outcome of one identity check.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub limit: f64,
}

impl Check {
    pub fn new(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            value,
            limit,
        }
    }

    pub fn passed(&self) -> bool {
        self.value < self.limit
    }
}

/// The reference dipole and its modal basis.
pub struct Reference<T: Float> {
    pub study: DipoleStudy<T>,
    pub k: Wavenumber<T>,
    pub mesh: WireMesh<T>,
    pub z: ImpedanceMatrix<T>,
    pub basis: ModalBasis<T>,
    pub diagnostics: ModalDiagnostics,
}

/// Field comparison at one observation point.
#[derive(Debug, Clone)]
pub struct PointResult<T: Float> {
    pub direct: FieldSample<T>,
    pub reconstructed: FieldSample<T>,
    pub naive: FieldSample<T>,
    /// `(N, error)` for `N = 1..=M_A`.
    pub convergence: Vec<(usize, T)>,
}

impl<T: Float> PointResult<T> {
    pub fn reconstruction_error(&self) -> T {
        self.reconstructed
            .relative_error(&self.direct)
            .unwrap_or(T::lit(f64::NAN))
    }

    pub fn naive_error(&self) -> T {
        self.naive.relative_error(&self.direct).unwrap_or(T::lit(f64::NAN))
    }

    /// Error with the first `n` modes, if `n` was evaluated.
    pub fn error_at(&self, n: usize) -> Option<T> {
        self.convergence.iter().find(|(m, _)| *m == n).map(|&(_, e)| e)
    }
}

/// One swept dipole described in the reference basis.
#[derive(Debug, Clone)]
pub struct LengthResult<T: Float> {
    pub requested_length: T,
    pub length: T,
    pub first_segment: usize,
    pub mesh: WireMesh<T>,
    pub basis: ModalBasis<T>,
    /// `P^ABA` from the impedance of B.
    pub perturbation: PerturbationMatrix<T>,
    /// B's own diagonal perturbation.
    pub own_perturbation: PerturbationMatrix<T>,
    pub transform: TransformMatrix<T>,
    pub excitation: ModalCoefficients<T>,
    pub scattered: ModalCoefficients<T>,
    pub points: Vec<PointResult<T>>,
    pub checks: Vec<Check>,
}

impl<T: Float> LengthResult<T> {
    pub fn failed_checks(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed())
    }
}

impl<T: Float> DipoleStudy<T> {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("wavelength", self.wavelength),
            ("reference length", self.reference_length),
            ("radius", self.radius),
            ("rank tolerance", self.rank_tolerance),
        ] {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be positive and finite")));
            }
        }
        if self.observation_points.is_empty() {
            return Err(Error::InvalidParameter("no observation points".into()));
        }
        self.quadrature.validate()
    }

    pub fn segment_length(&self) -> T {
        self.reference_length / T::of_usize(self.segments)
    }

    /// Number of reference segments for a requested length and the index of the first
    /// one; lengths snap to whole segments and the sub-dipole is centred.
    pub fn snap(&self, length: T) -> Result<(usize, usize)> {
        if !(length > T::zero()) || length > self.reference_length * (T::one() + T::lit(1e-12)) {
            return Err(Error::InvalidParameter(format!(
                "length {} outside (0, {}]",
                length.to_f64_lossy(),
                self.reference_length.to_f64_lossy()
            )));
        }
        let count = (length / self.segment_length()).round().to_f64_lossy() as usize;
        if count < 2 {
            return Err(Error::InvalidParameter(format!(
                "length {} spans fewer than two reference segments",
                length.to_f64_lossy()
            )));
        }
        let count = count.min(self.segments);
        Ok((count, (self.segments - count) / 2))
    }
}

impl<T: Float> Reference<T> {
    pub fn build(study: DipoleStudy<T>) -> Result<Self> {
        study.validate()?;
        let k = Wavenumber::from_wavelength(study.wavelength)?;
        if study.wave.k() != k {
            return Err(Error::InvalidParameter(
                "incident wave built for a different wavenumber".into(),
            ));
        }
        let mesh = make_dipole(study.reference_length, study.radius, study.segments)?;
        let z = assemble_z(&mesh, k, &study.quadrature)?;
        let basis = characteristic_modes(&z, study.rank_tolerance)?;
        let diagnostics = basis.diagnostics(&z);
        Ok(Self {
            study,
            k,
            mesh,
            z,
            basis,
            diagnostics,
        })
    }

    /// Adopts a basis computed elsewhere after checking it belongs to this reference.
    pub fn with_basis(mut self, basis: ModalBasis<T>) -> Result<Self> {
        if basis.mesh_id != *self.mesh.id() {
            return Err(Error::MeshMismatch(format!(
                "basis was computed on mesh {} but the configured reference is {}",
                basis.mesh_id,
                self.mesh.id()
            )));
        }
        if basis.k != self.k {
            return Err(Error::MeshMismatch(
                "basis was computed at a different wavenumber".into(),
            ));
        }
        self.diagnostics = basis.diagnostics(&self.z);
        self.basis = basis;
        Ok(self)
    }

    pub fn checks(&self) -> Vec<Check> {
        let d = &self.diagnostics;
        vec![
            Check::new("modal normalization (allowance ratio)", d.normalization.ratio, 1.0),
            Check::new("modal orthogonality (allowance ratio)", d.orthogonality.ratio, 1.0),
            Check::new("modal reactance (allowance ratio)", d.reactance.ratio, 1.0),
            Check::new("eigen residual (allowance ratio)", d.eigen_residual.ratio, 1.0),
        ]
    }

    pub fn run_length(&self, requested: T) -> Result<LengthResult<T>> {
        let st = &self.study;
        let (count, first) = st.snap(requested)?;
        let mesh_b = self.mesh.submesh(first, count)?;
        let q = &st.quadrature;
        let z_b = assemble_z(&mesh_b, self.k, q)?;
        let basis_b = characteristic_modes(&z_b, st.rank_tolerance)?;
        let r_ab = cross_radiation(&self.mesh, &mesh_b, self.k, q)?;
        let u = incident_projection(&self.basis, &r_ab)?;
        let p = perturbation_in_foreign_basis(&u, &z_b)?;
        let transform = transform_matrix(&self.basis, &r_ab, &basis_b)?;
        let own = PerturbationMatrix::own_basis(&basis_b);
        let p42 = transform_perturbation(&transform, &own)?;

        let mut checks = Vec::new();
        let map = nest(&mesh_b, &self.mesh, T::zero());
        if !map.is_complete() {
            return Err(Error::MeshMismatch(
                "swept dipole is not nested in the reference".into(),
            ));
        }
        let sel = self.z.re().select_columns(map.mapped().iter());
        checks.push(Check::new(
            "cross-radiation equals column selection",
            max_abs_real(&(&r_ab.entries - sel)).to_f64_lossy(),
            SUBMATRIX_TOL,
        ));
        let pmax = max_abs_complex(&p.entries);
        checks.push(Check::new(
            "impedance route equals transform route",
            (max_abs_complex(&(&p.entries - &p42.entries)) / pmax).to_f64_lossy(),
            ROUTE_TOL,
        ));
        checks.push(Check::new(
            "perturbation symmetry",
            p.asymmetry().to_f64_lossy(),
            SYMMETRY_TOL,
        ));
        if mesh_b.id() == self.mesh.id() {
            let diag = PerturbationMatrix::own_basis(&self.basis);
            checks.push(Check::new(
                "own-basis perturbation is diagonal",
                (max_abs_complex(&(&p.entries - &diag.entries)) / pmax).to_f64_lossy(),
                OWN_BASIS_TOL,
            ));
            let m = self.basis.mode_count();
            checks.push(Check::new(
                "own-basis transform is identity",
                max_abs_real(&(&transform.entries - DMatrix::<T>::identity(m, m))).to_f64_lossy(),
                OWN_BASIS_TOL,
            ));
        }

        let v_a = assemble_v_planewave(&self.mesh, &st.wave, q)?;
        let a = modal_excitation(&self.basis, &v_a)?;
        let f = scatter(&p, &a)?;
        let points = st
            .observation_points
            .iter()
            .map(|r| {
                let fields: Vec<CVec3<T>> = characteristic_fields(&self.basis, &self.mesh, r, q)?;
                let direct = direct_scattered_field(&mesh_b, &z_b, &st.wave, r, q)?;
                let m = self.basis.mode_count();
                let reconstructed = reconstruct_from_fields(&fields, &f, m, r)?;
                let naive = naive_approx_field(&fields, &basis_b.eigenvalues, &a, r, m)?;
                let convergence = convergence_curve(&fields, &f, &direct, m)?;
                Ok(PointResult {
                    direct,
                    reconstructed,
                    naive,
                    convergence,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        for (i, pr) in points.iter().enumerate() {
            checks.push(Check::new(
                format!("full-rank reconstruction at point {i}"),
                pr.reconstruction_error().to_f64_lossy(),
                ORACLE_TOL,
            ));
        }
        Ok(LengthResult {
            requested_length: requested,
            length: st.segment_length() * T::of_usize(count),
            first_segment: first,
            mesh: mesh_b,
            basis: basis_b,
            perturbation: p,
            own_perturbation: own,
            transform,
            excitation: a,
            scattered: f,
            points,
            checks,
        })
    }

    /// Runs every length in parallel; results come back in input order.
    pub fn sweep(&self, lengths: &[T]) -> Result<Vec<LengthResult<T>>> {
        lengths.par_iter().map(|&l| self.run_length(l)).collect()
    }
}

/// Direction `(1, 0, −1)/√2` with polarization `(1, 0, 1)/√2`: oblique incidence
/// that couples to both symmetric and antisymmetric dipole modes.
pub fn default_wave<T: Float>(k: Wavenumber<T>) -> Result<PlaneWave<T>> {
    let s = T::lit(0.5).sqrt();
    PlaneWave::linear(
        Vector3::new(s, T::zero(), -s),
        Vector3::new(s, T::zero(), s),
        T::one(),
        k,
    )
}
