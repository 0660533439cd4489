//! Random bent wires and the invariants every assembled wire must satisfy. Shared by
//! the property tests and the acceptance run.

#![allow(dead_code)]

use nalgebra::{DMatrix, SymmetricEigen, Vector3};
use proptest::prelude::*;
use wirecm::bundle::{bundle_from_bytes, bundle_to_bytes};
use wirecm::fields::{cnorm, near_field_of_current, standing_wave_field};
use wirecm::mom::CurrentVector;
use wirecm::scalar::{max_abs_real, tr_mul_accurate};
use wirecm::*;

pub type Check = Result<(), String>;

macro_rules! ensure {
    ($cond:expr, $($arg:tt)+) => {
        if !$cond {
            return Err(format!($($arg)+));
        }
    };
}

#[derive(Debug, Clone)]
pub struct Wire {
    pub vertices: Vec<Vector3<f64>>,
    pub radius: f64,
    pub max_segment: f64,
    pub wavelength: f64,
}

/// Polylines whose consecutive edges turn by at most 60°, so no part of the wire
/// folds back onto another.
pub fn wire() -> impl Strategy<Value = Wire> {
    (
        prop::collection::vec((0.2f64..0.7, -1.0f64..1.0, -1.0f64..1.0), 1..4),
        1e-3f64..5e-3,
        0.04f64..0.09,
        0.5f64..2.0,
    )
        .prop_map(|(edges, radius, max_segment, wavelength)| {
            let mut dir = Vector3::z();
            let mut p = Vector3::zeros();
            let mut vertices = vec![p];
            for (len, a, b) in edges {
                let turn = std::f64::consts::FRAC_PI_3 * a;
                let twist = std::f64::consts::PI * b;
                let side = dir.cross(&Vector3::x()).try_normalize(1e-9).unwrap_or_else(Vector3::y);
                let axis = nalgebra::Rotation3::new(dir * twist) * side;
                dir = nalgebra::Rotation3::new(axis * turn) * dir;
                p += dir * len;
                vertices.push(p);
            }
            Wire {
                vertices: vertices.into_iter().map(|v| v * wavelength).collect(),
                radius: radius * wavelength,
                max_segment: max_segment * wavelength,
                wavelength,
            }
        })
}

pub struct Setup {
    pub mesh: WireMesh64,
    pub k: Wavenumber64,
    pub z: ImpedanceMatrix64,
}

pub fn setup(w: &Wire) -> Setup {
    let poly = WirePolyline::new(w.vertices.clone(), w.radius).unwrap();
    let mesh = WireMesh::from_polyline(poly, w.max_segment).unwrap();
    let k = Wavenumber::from_wavelength(w.wavelength).unwrap();
    let z = assemble_z(&mesh, k, &QuadratureSpec::default()).unwrap();
    Setup { mesh, k, z }
}

fn bits(m: &DMatrix<f64>) -> Vec<u64> {
    m.iter().map(|x| x.to_bits()).collect()
}

fn basis(s: &Setup) -> ModalBasis64 {
    characteristic_modes(&s.z, modes::DEFAULT_RANK_TOL).unwrap()
}

pub fn impedance_is_symmetric(w: &Wire) -> Check {
    let s = setup(w);
    let (re, im) = (s.z.re(), s.z.im());
    let scale = max_abs_real(&re).max(max_abs_real(&im));
    let asym = max_abs_real(&(&re - re.transpose())).max(max_abs_real(&(&im - im.transpose())));
    ensure!(asym <= 1e-12 * scale, "asymmetry {asym:e} of {scale:e}");
    Ok(())
}

pub fn radiation_matrix_is_semidefinite(w: &Wire) -> Check {
    let s = setup(w);
    let e = SymmetricEigen::new(s.z.re()).eigenvalues;
    let (lo, hi) = (e.min(), e.max());
    ensure!(hi > 0.0 && lo >= -1e-8 * hi, "min {lo:e} max {hi:e}");
    Ok(())
}

/// `I_mᵀ R I_n = δ_mn` within 1e-6, evaluated with compensated dot products: the plain
/// product loses ~N·ε·‖I‖²‖R‖ to cancellation for weakly radiating, large-norm currents.
pub fn modes_are_orthonormal(w: &Wire) -> Check {
    let s = setup(w);
    let b = basis(&s);
    let i = &b.currents;
    let g = tr_mul_accurate(i, &tr_mul_accurate(&s.z.re(), i));
    let err = max_abs_real(&(g - DMatrix::identity(b.mode_count(), b.mode_count())));
    ensure!(err < 1e-6, "{err:e} with {} modes", b.mode_count());
    Ok(())
}

/// `dir` picks an observation point half a wavelength beyond the last vertex.
pub fn standing_field_is_half_sum(w: &Wire, dir: Vector3<f64>, n: usize) -> Check {
    let s = setup(w);
    let b = basis(&s);
    let i = b.current(n.min(b.mode_count() - 1));
    let r = w.vertices.last().unwrap() + dir.normalize() * (0.5 * w.wavelength);
    if s.mesh.distance_to_axis(&r) < 0.1 * w.wavelength {
        return Ok(());
    }
    let q = QuadratureSpec::default();
    let e0 = standing_wave_field(&s.mesh, &i, &r, s.k, &q).unwrap();
    let cur = CurrentVector::from_real(i.as_slice(), s.mesh.id().clone());
    let e = near_field_of_current(&s.mesh, &cur, &r, s.k, &q).unwrap();
    let half = (e.e + e.e.map(|c| c.conj())).map(|c| c * 0.5);
    let err = cnorm(&(e0.e - half)) / cnorm(&half);
    ensure!(err < 1e-10, "{err:e}");
    Ok(())
}

pub fn bundle_round_trips(w: &Wire) -> Check {
    let s = setup(w);
    let b = basis(&s);
    let back: ModalBasis64 = bundle_from_bytes(&bundle_to_bytes(&b)).map_err(|e| e.to_string())?;
    ensure!(bits(&back.currents) == bits(&b.currents), "currents differ");
    let ev = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    ensure!(ev(&back.eigenvalues) == ev(&b.eigenvalues), "eigenvalues differ");
    ensure!(back.k.k().to_bits() == b.k.k().to_bits(), "wavenumber differs");
    ensure!(
        back.rank_tolerance.to_bits() == b.rank_tolerance.to_bits(),
        "rank tolerance differs"
    );
    ensure!(back.mesh_id == b.mesh_id, "mesh id differs");
    Ok(())
}

/// `cut` selects the sub-wire as fractions of the start offset and the length.
pub fn sub_wire_identities(w: &Wire, cut: (f64, f64)) -> Check {
    let s = setup(w);
    let n = s.mesh.segments().len();
    let count = ((cut.1 * n as f64) as usize).clamp(3, n);
    let first = ((cut.0 * (n - count) as f64) as usize).min(n - count);
    let sub = s.mesh.submesh(first, count).unwrap();
    let q = QuadratureSpec::default();
    let r_ab = cross_radiation(&s.mesh, &sub, s.k, &q).unwrap();
    let map = nest(&sub, &s.mesh, 0.0);
    ensure!(map.is_complete(), "sub-wire not nested");
    let sel = s.z.re().select_columns(map.mapped().iter());
    let d = max_abs_real(&(&r_ab.entries - sel));
    ensure!(d < 1e-12, "column selection off by {d:e}");

    let ba = basis(&s);
    let z_b = assemble_z(&sub, s.k, &q).unwrap();
    let bb = characteristic_modes(&z_b, modes::DEFAULT_RANK_TOL).unwrap();
    let q_ab = transform_matrix(&ba, &r_ab, &bb).unwrap();
    let q_ba = transform_matrix(&bb, &r_ab.transposed(), &ba).unwrap();
    ensure!(
        bits(&q_ba.entries) == bits(&q_ab.transposed().entries),
        "transpose not bit-identical"
    );
    Ok(())
}
