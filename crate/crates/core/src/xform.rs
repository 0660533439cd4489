//! Cross-structure formalism: the scattering of a structure B expressed in the
//! characteristic-mode basis of an enclosing structure A, and the real transform
//! matrices that move modal coefficients between the two bases.
//!
//! Conventions: `Q^AB` has one row per mode of A and one column per mode of B and
//! maps scattered coefficients of B onto A (`f^A = Q^AB f^B`); its transpose maps
//! incident coefficients the other way (`a^B = Q^BA a^A`).

use std::cmp::Ordering;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::geometry::{MeshId, WireMesh};
use crate::kernel::{QuadratureSpec, Wavenumber};
use crate::modes::{diag_perturbation, ModalBasis};
use crate::mom::{assemble_cross_z, FactoredImpedance, ImpedanceMatrix};
use crate::scalar::{cabs, cplx, tr_mul_accurate, Complex, Float};

/// Real-kernel interaction between test functions of A (rows) and basis
/// functions of B (columns).
#[derive(Debug, Clone, PartialEq)]
pub struct CrossRadiationMatrix<T: Float> {
    pub entries: DMatrix<T>,
    pub mesh_a: MeshId,
    pub mesh_b: MeshId,
    pub k: Wavenumber<T>,
}

impl<T: Float> CrossRadiationMatrix<T> {
    /// `R^BA = (R^AB)ᵀ`.
    pub fn transposed(&self) -> Self {
        Self {
            entries: self.entries.transpose(),
            mesh_a: self.mesh_b.clone(),
            mesh_b: self.mesh_a.clone(),
            k: self.k,
        }
    }
}

pub fn cross_radiation<T: Float>(
    mesh_a: &WireMesh<T>,
    mesh_b: &WireMesh<T>,
    k: Wavenumber<T>,
    quad: &QuadratureSpec,
) -> Result<CrossRadiationMatrix<T>> {
    let z = assemble_cross_z(mesh_a, mesh_b, k, quad)?;
    Ok(CrossRadiationMatrix {
        entries: z.map(|c| c.re),
        mesh_a: mesh_a.id().clone(),
        mesh_b: mesh_b.id().clone(),
        k,
    })
}

/// `U^AB = (I_CM^A)ᵀ R^AB`: the standing-wave modal fields of A tested on B.
#[derive(Debug, Clone, PartialEq)]
pub struct IncidentProjection<T: Float> {
    pub entries: DMatrix<T>,
    pub basis_mesh: MeshId,
    pub mesh_b: MeshId,
}

pub fn incident_projection<T: Float>(
    basis_a: &ModalBasis<T>,
    r_ab: &CrossRadiationMatrix<T>,
) -> Result<IncidentProjection<T>> {
    if basis_a.mesh_id != r_ab.mesh_a {
        return Err(Error::MeshMismatch(format!(
            "basis on {} but cross-radiation rows on {}",
            basis_a.mesh_id, r_ab.mesh_a
        )));
    }
    if basis_a.dim() != r_ab.entries.nrows() {
        return Err(Error::DimensionMismatch {
            expected: basis_a.dim(),
            actual: r_ab.entries.nrows(),
            context: "cross-radiation rows",
        });
    }
    Ok(IncidentProjection {
        entries: tr_mul_accurate(&basis_a.currents, &r_ab.entries),
        basis_mesh: basis_a.mesh_id.clone(),
        mesh_b: r_ab.mesh_b.clone(),
    })
}

/// Maps incident modal coefficients onto scattered ones: `f = P a`.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationMatrix<T: Float> {
    pub entries: DMatrix<Complex<T>>,
    /// Mesh whose modes the coefficients refer to.
    pub basis_mesh: MeshId,
    /// Mesh whose scattering is encoded.
    pub structure_mesh: MeshId,
}

impl<T: Float> PerturbationMatrix<T> {
    /// `−diag 1/(1 + jλ_n)` of a structure in its own modes.
    pub fn own_basis(basis: &ModalBasis<T>) -> Self {
        Self {
            entries: diag_perturbation(&basis.eigenvalues),
            basis_mesh: basis.mesh_id.clone(),
            structure_mesh: basis.mesh_id.clone(),
        }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    /// `‖offdiag(P)‖_F / ‖P‖_F`.
    pub fn off_diagonal_ratio(&self) -> T {
        let total = frobenius(&self.entries);
        if !(total > T::zero()) {
            return T::zero();
        }
        let mut off = T::zero();
        for ((i, j), z) in self
            .entries
            .iter()
            .enumerate()
            .map(|(idx, z)| ((idx % self.dim(), idx / self.dim()), z))
        {
            if i != j {
                off += z.norm_sqr();
            }
        }
        off.sqrt() / total
    }

    /// Leading `n × n` block, for presentation.
    pub fn truncated(&self, n: usize) -> Self {
        let n = n.min(self.dim());
        Self {
            entries: self.entries.view((0, 0), (n, n)).into_owned(),
            ..self.clone()
        }
    }

    /// `max |P − Pᵀ| / max |P|`.
    pub fn asymmetry(&self) -> T {
        let d = &self.entries - self.entries.transpose();
        let m = crate::scalar::max_abs_complex(&self.entries);
        if m > T::zero() {
            crate::scalar::max_abs_complex(&d) / m
        } else {
            T::zero()
        }
    }
}

fn frobenius<T: Float>(m: &DMatrix<Complex<T>>) -> T {
    m.iter().fold(T::zero(), |a, z| a + z.norm_sqr()).sqrt()
}

/// `P^ABA = −U^AB (Z^B)⁻¹ (U^AB)ᵀ`.
pub fn perturbation_in_foreign_basis<T: Float>(
    u: &IncidentProjection<T>,
    z_b: &ImpedanceMatrix<T>,
) -> Result<PerturbationMatrix<T>> {
    if u.mesh_b != z_b.mesh_id {
        return Err(Error::MeshMismatch(format!(
            "projection tested on {} but impedance of {}",
            u.mesh_b, z_b.mesh_id
        )));
    }
    if u.entries.ncols() != z_b.dim() {
        return Err(Error::DimensionMismatch {
            expected: z_b.dim(),
            actual: u.entries.ncols(),
            context: "projection columns",
        });
    }
    let uc = u.entries.map(|x| cplx(x, T::zero()));
    let fact = FactoredImpedance::new(z_b)?;
    let x = fact.solve(&uc.transpose())?;
    Ok(PerturbationMatrix {
        entries: -(uc * x),
        basis_mesh: u.basis_mesh.clone(),
        structure_mesh: z_b.mesh_id.clone(),
    })
}

/// Real modal transform `Q^AB = (I_CM^A)ᵀ R^AB I_CM^B`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformMatrix<T: Float> {
    pub entries: DMatrix<T>,
    /// Basis of the rows (A).
    pub to_basis: MeshId,
    /// Basis of the columns (B).
    pub from_basis: MeshId,
}

impl<T: Float> TransformMatrix<T> {
    pub fn transposed(&self) -> Self {
        Self {
            entries: self.entries.transpose(),
            to_basis: self.from_basis.clone(),
            from_basis: self.to_basis.clone(),
        }
    }

    /// Leading `rows × cols` block.
    pub fn truncated(&self, rows: usize, cols: usize) -> Self {
        let r = rows.min(self.entries.nrows());
        let c = cols.min(self.entries.ncols());
        Self {
            entries: self.entries.view((0, 0), (r, c)).into_owned(),
            ..self.clone()
        }
    }

    fn complex(&self) -> DMatrix<Complex<T>> {
        self.entries.map(|x| cplx(x, T::zero()))
    }
}

fn transform_product<T: Float>(a: &ModalBasis<T>, r_ab: &DMatrix<T>, b: &ModalBasis<T>) -> DMatrix<T> {
    let u = tr_mul_accurate(&a.currents, r_ab);
    tr_mul_accurate(&u.transpose(), &b.currents)
}

/// Computes `Q^AB`. The product is always evaluated in a fixed order of the two
/// bases, so `transform_matrix(B, R^BA, A)` is the exact transpose.
pub fn transform_matrix<T: Float>(
    basis_a: &ModalBasis<T>,
    r_ab: &CrossRadiationMatrix<T>,
    basis_b: &ModalBasis<T>,
) -> Result<TransformMatrix<T>> {
    if basis_a.mesh_id != r_ab.mesh_a || basis_b.mesh_id != r_ab.mesh_b {
        return Err(Error::MeshMismatch(format!(
            "bases on ({}, {}) but cross-radiation on ({}, {})",
            basis_a.mesh_id, basis_b.mesh_id, r_ab.mesh_a, r_ab.mesh_b
        )));
    }
    if basis_a.dim() != r_ab.entries.nrows() || basis_b.dim() != r_ab.entries.ncols() {
        return Err(Error::DimensionMismatch {
            expected: basis_a.dim() * basis_b.dim(),
            actual: r_ab.entries.len(),
            context: "cross-radiation shape",
        });
    }
    if basis_a.k != basis_b.k || basis_a.k != r_ab.k {
        return Err(Error::InvalidParameter(
            "bases computed at different wavenumbers".into(),
        ));
    }
    let entries = match basis_a.ordering_key().cmp(&basis_b.ordering_key()) {
        Ordering::Less => transform_product(basis_a, &r_ab.entries, basis_b),
        Ordering::Greater => transform_product(basis_b, &r_ab.entries.transpose(), basis_a).transpose(),
        Ordering::Equal => {
            let q = transform_product(basis_a, &r_ab.entries, basis_b);
            (&q + q.transpose()) * T::lit(0.5)
        }
    };
    Ok(TransformMatrix {
        entries,
        to_basis: basis_a.mesh_id.clone(),
        from_basis: basis_b.mesh_id.clone(),
    })
}

/// `P^ABA = Q^AB P^BBB Q^BA`.
pub fn transform_perturbation<T: Float>(
    q: &TransformMatrix<T>,
    p_bbb: &PerturbationMatrix<T>,
) -> Result<PerturbationMatrix<T>> {
    if p_bbb.basis_mesh != q.from_basis {
        return Err(Error::MeshMismatch(format!(
            "perturbation in basis {} but transform from {}",
            p_bbb.basis_mesh, q.from_basis
        )));
    }
    if q.entries.ncols() != p_bbb.dim() {
        return Err(Error::DimensionMismatch {
            expected: q.entries.ncols(),
            actual: p_bbb.dim(),
            context: "perturbation size",
        });
    }
    let qc = q.complex();
    Ok(PerturbationMatrix {
        entries: &qc * &p_bbb.entries * qc.transpose(),
        basis_mesh: q.to_basis.clone(),
        structure_mesh: p_bbb.structure_mesh.clone(),
    })
}

/// `S = I + 2P`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatteringMatrix<T: Float> {
    pub entries: DMatrix<Complex<T>>,
    pub basis_mesh: MeshId,
    pub structure_mesh: MeshId,
}

impl<T: Float> ScatteringMatrix<T> {
    pub fn from_perturbation(p: &PerturbationMatrix<T>) -> Self {
        let n = p.dim();
        let two = cplx(T::lit(2.0), T::zero());
        Self {
            entries: DMatrix::identity(n, n) + &p.entries * two,
            basis_mesh: p.basis_mesh.clone(),
            structure_mesh: p.structure_mesh.clone(),
        }
    }

    /// The scatterer-free matrix `S = I` in a basis of `n` modes.
    pub fn identity(n: usize, basis_mesh: MeshId) -> Self {
        Self {
            entries: DMatrix::identity(n, n),
            structure_mesh: basis_mesh.clone(),
            basis_mesh,
        }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn to_perturbation(&self) -> PerturbationMatrix<T> {
        let n = self.dim();
        let half = cplx(T::lit(0.5), T::zero());
        PerturbationMatrix {
            entries: (&self.entries - DMatrix::<Complex<T>>::identity(n, n)) * half,
            basis_mesh: self.basis_mesh.clone(),
            structure_mesh: self.structure_mesh.clone(),
        }
    }

    /// Largest deviation of `|s_nn|` from one.
    pub fn diagonal_unitarity_defect(&self) -> T {
        (0..self.dim()).fold(T::zero(), |a, i| a.max((cabs(self.entries[(i, i)]) - T::one()).abs()))
    }
}

/// `S^ABA = I + Q^AB (S^BBB − I) Q^BA`.
pub fn transform_scattering<T: Float>(
    q: &TransformMatrix<T>,
    s_bbb: &ScatteringMatrix<T>,
) -> Result<ScatteringMatrix<T>> {
    if s_bbb.basis_mesh != q.from_basis {
        return Err(Error::MeshMismatch(format!(
            "scattering matrix in basis {} but transform from {}",
            s_bbb.basis_mesh, q.from_basis
        )));
    }
    if q.entries.ncols() != s_bbb.dim() {
        return Err(Error::DimensionMismatch {
            expected: q.entries.ncols(),
            actual: s_bbb.dim(),
            context: "scattering matrix size",
        });
    }
    let qc = q.complex();
    let nb = s_bbb.dim();
    let na = q.entries.nrows();
    let inner = &s_bbb.entries - DMatrix::<Complex<T>>::identity(nb, nb);
    Ok(ScatteringMatrix {
        entries: DMatrix::identity(na, na) + &qc * inner * qc.transpose(),
        basis_mesh: q.to_basis.clone(),
        structure_mesh: s_bbb.structure_mesh.clone(),
    })
}
