mod common;

use conelab::dynamics::{ControlModel, SystemSpec};
use conelab::linalg::Matrix;
use conelab::orthant::{
    common_invariant_orthants, cross_positive, family_invariant_orthants, invariant_orthants_exhaustive, SignPattern,
    ORTHANT_TOL,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Off-diagonal entries drawn from {−1, 0, 0, 0, 1}·scale so that sign
/// constraints are sparse and invariant orthants are common.
fn sparse(n: usize) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(prop_oneof![3 => Just(0.0), 1 => Just(1.0), 1 => Just(-1.0)], n * n)
        .prop_map(move |v| Matrix::from_row_slice(n, n, &v))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn parity_solver_matches_exhaustive_search(
        gens in (1usize..=10).prop_flat_map(|n| prop::collection::vec(sparse(n), 1..=3)),
    ) {
        let refs: Vec<&Matrix> = gens.iter().collect();
        let fast = common_invariant_orthants(&refs, ORTHANT_TOL).unwrap();
        let slow = invariant_orthants_exhaustive(&refs, ORTHANT_TOL).unwrap();
        prop_assert_eq!(&fast, &slow);
        for p in &fast {
            for g in &refs {
                prop_assert!(cross_positive(g, p, ORTHANT_TOL).unwrap().holds);
            }
        }
    }

    #[test]
    fn patterns_are_normalized(signs in prop::collection::vec(prop_oneof![Just(1i8), Just(-1i8)], 1..12)) {
        let p = SignPattern::new(signs.clone()).unwrap();
        let q = SignPattern::new(signs.iter().map(|s| -s).collect()).unwrap();
        prop_assert_eq!(&p, &q);
        prop_assert_eq!(p.signs()[0], 1);
    }
}

#[test]
fn certified_orthants_survive_flow_simulation() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut checked = 0;
    for trial in 0..40 {
        let d = 3 + trial % 2;
        let (a, b) = common::orthant_system(&mut rng, d);
        let model = if trial % 3 == 0 {
            ControlModel::Interval { lo: -1.0, hi: 2.0 }
        } else {
            ControlModel::Unbounded
        };
        let spec = SystemSpec::new(a.clone(), b.clone(), model.clone(), 1).unwrap();
        for k in 1..d {
            for cert in family_invariant_orthants(&spec, k, ORTHANT_TOL).unwrap() {
                cert.verify(&spec, ORTHANT_TOL).unwrap();
                let escape = common::orthant_flow_escape(&a, &b, &model, &cert, 200, &mut rng);
                assert!(escape <= 1e-7, "trial {trial}, k = {k}: escape {escape:e}");
                checked += 1;
            }
        }
    }
    assert!(checked >= 40, "only {checked} certificates exercised");
}

#[test]
fn coupled_control_rules_out_orthants() {
    // With u unbounded, any off-diagonal entry of the control compound forbids every orthant.
    let a = Matrix::from_row_slice(3, 3, &[0.0, 1.0, 1.0, 1.0, 0.0, 1.0, 1.0, 1.0, 0.0]);
    let b = Matrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    let spec = SystemSpec::new(a.clone(), b.clone(), ControlModel::Unbounded, 0).unwrap();
    assert!(family_invariant_orthants(&spec, 1, ORTHANT_TOL).unwrap().is_empty());
    // A bounded control keeps A + uB Metzler at both interval ends.
    let bounded = SystemSpec::new(a, b, ControlModel::Interval { lo: -1.0, hi: 1.0 }, 0).unwrap();
    let certs = family_invariant_orthants(&bounded, 1, ORTHANT_TOL).unwrap();
    assert_eq!(certs.len(), 1);
    assert!(certs[0].pattern.is_all_plus());
}
