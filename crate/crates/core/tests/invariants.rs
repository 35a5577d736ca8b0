mod common;

use common::{
    any_family, check_invariants, diagonals_by_element, drive, monotonicity_violation,
    random_model, MONOTONE_TOL,
};
use proptest::prelude::*;
use redmx::bench::{family_block, generate_scalable_truss};
use redmx::fixtures::{system, SYSTEM_A, SYSTEM_A_GEOMETRY, SYSTEM_B, SYSTEM_C};
use redmx::updates::flops;
use redmx::{update_add, update_remove, ModelDocument, RowSelection, SystemState};

#[test]
fn fixtures_satisfy_invariants() {
    for text in [SYSTEM_A, SYSTEM_B, SYSTEM_C] {
        let state = SystemState::new(system::<f64>(text)).unwrap();
        check_invariants(&state).unwrap();
    }
    let ModelDocument::Geometric(model) = redmx::io::parse_model::<f64>(SYSTEM_A_GEOMETRY).unwrap()
    else {
        panic!("geometric fixture");
    };
    check_invariants(&SystemState::from_model(&model).unwrap()).unwrap();
    for k in 1..=3 {
        check_invariants(&SystemState::from_model(&generate_scalable_truss(k).unwrap()).unwrap())
            .unwrap();
    }
}

#[test]
fn fixture_cycle_is_monotone() {
    let mut state = SystemState::new(system::<f64>(SYSTEM_A)).unwrap();
    let before = diagonals_by_element(&state);
    let b = system::<f64>(SYSTEM_B);
    update_add(&mut state, &[(3, b.element_block(3).unwrap())], Some(2)).unwrap();
    let after = diagonals_by_element(&state);
    assert!(monotonicity_violation(&before, &after, true) <= MONOTONE_TOL);
    check_invariants(&state).unwrap();

    let sel = RowSelection::of_element(&state, 4).unwrap();
    update_remove(&mut state, &sel).unwrap();
    assert!(monotonicity_violation(&after, &diagonals_by_element(&state), false) <= MONOTONE_TOL);
    check_invariants(&state).unwrap();
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 32, ..ProptestConfig::default() })]

    #[test]
    fn random_models_satisfy_invariants(seed in any::<u64>()) {
        let model = random_model(seed, any_family(seed), 150);
        let state = SystemState::from_model(&model).unwrap();
        check_invariants(&state).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn invariants_survive_updates(seed in any::<u64>()) {
        let model = random_model(seed, any_family(seed), 60);
        let stats = drive(seed, model, 12, true).map_err(TestCaseError::fail)?;
        prop_assert!(stats.worst_monotone <= MONOTONE_TOL);
    }
}

/// Update work grows like `n_q²`, not `n_q³`.
#[test]
fn update_flops_scale_quadratically() {
    let mut per_entry = Vec::new();
    for k in [3usize, 5, 7] {
        let model = generate_scalable_truss(k).unwrap();
        let mut state = SystemState::from_model(&model).unwrap();
        let block = family_block(k, 1).unwrap();
        flops::reset();
        update_add(&mut state, &[(1_000_000, block)], None).unwrap();
        let count = flops::count() as f64;
        let (n_q, n) = (state.n_q() as f64, state.n() as f64);
        per_entry.push(count / (n_q * n_q + n * n));
    }
    for w in per_entry.windows(2) {
        assert!(w[1] / w[0] < 1.3, "{per_entry:?}");
    }
    assert!(per_entry.iter().all(|&c| c < 20.0), "{per_entry:?}");
}
