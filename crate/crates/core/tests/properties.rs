//! Invariants checked on randomly bent wires and random excitation frequencies.

mod common;

use common::*;
use nalgebra::Vector3;
use proptest::prelude::*;
use proptest::test_runner::RngSeed;

fn check(c: Check) -> Result<(), TestCaseError> {
    c.map_err(TestCaseError::fail)
}

proptest! {
    #![proptest_config(ProptestConfig {
        cases: 24,
        rng_seed: RngSeed::Fixed(0x5eed),
        ..ProptestConfig::default()
    })]

    #[test]
    fn impedance_matrix_is_symmetric(w in wire()) {
        check(impedance_is_symmetric(&w))?;
    }

    #[test]
    fn radiation_matrix_is_positive_semidefinite(w in wire()) {
        check(radiation_matrix_is_semidefinite(&w))?;
    }

    #[test]
    fn modes_are_orthonormal_in_radiation_matrix(w in wire()) {
        check(modes_are_orthonormal(&w))?;
    }

    #[test]
    fn standing_field_is_half_sum_with_conjugate(
        w in wire(),
        d in (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0),
        n in 0usize..4,
    ) {
        let dir = Vector3::new(d.0, d.1, d.2);
        prop_assume!(dir.norm() > 0.1);
        check(standing_field_is_half_sum(&w, dir, n))?;
    }

    #[test]
    fn bundle_round_trip_is_bit_exact(w in wire()) {
        check(bundle_round_trips(&w))?;
    }

    #[test]
    fn nested_sub_wires_satisfy_the_basis_change_identities(w in wire(), cut in (0.0f64..1.0, 0.3f64..1.0)) {
        check(sub_wire_identities(&w, cut))?;
    }
}
