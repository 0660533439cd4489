//! Characteristic modes of thin-wire structures and the machinery to describe
//! the scattering of one structure in the characteristic-mode basis of another,
//! enclosing structure.
//!
//! All numerics are generic over [`Float`] (`f32` or `f64`); the `*64` aliases
//! below fix the scalar to `f64`, which is what the tolerances in the tests assume.

pub mod bundle;
pub mod error;
pub mod experiment;
pub mod export;
pub mod fields;
pub mod geometry;
pub mod kernel;
pub mod modes;
pub mod mom;
pub mod quadrature;
pub mod scalar;
pub mod xform;

pub use error::{Error, Result};
pub use geometry::{make_dipole, nest, MeshId, NestingMap, WireMesh, WirePolyline};
pub use kernel::{QuadratureSpec, SingularScheme, Wavenumber};
pub use modes::{characteristic_modes, diag_perturbation, ModalBasis};
pub use mom::{assemble_cross_z, assemble_v_planewave, assemble_z, solve_direct, ImpedanceMatrix, PlaneWave};
pub use scalar::{Complex, Float};
pub use xform::{
    cross_radiation, incident_projection, perturbation_in_foreign_basis, transform_matrix, transform_perturbation,
    transform_scattering, CrossRadiationMatrix, PerturbationMatrix, ScatteringMatrix, TransformMatrix,
};

pub type WireMesh64 = geometry::WireMesh<f64>;
pub type Wavenumber64 = kernel::Wavenumber<f64>;
pub type ImpedanceMatrix64 = mom::ImpedanceMatrix<f64>;
pub type PlaneWave64 = mom::PlaneWave<f64>;
pub type ModalBasis64 = modes::ModalBasis<f64>;
pub type CrossRadiationMatrix64 = xform::CrossRadiationMatrix<f64>;
pub type PerturbationMatrix64 = xform::PerturbationMatrix<f64>;
pub type TransformMatrix64 = xform::TransformMatrix<f64>;
pub type ScatteringMatrix64 = xform::ScatteringMatrix<f64>;
pub type FieldSample64 = fields::FieldSample<f64>;
