mod common;

use common::{any_family, drive, random_model, Family};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn updates_match_recomputation(seed in any::<u64>()) {
        let model = random_model(seed, any_family(seed), 120);
        let stats = drive(seed, model, 25, false).map_err(TestCaseError::fail)?;
        prop_assert_eq!(stats.applied + stats.rejected, 25);
    }
}

#[test]
fn every_family_sees_applied_updates() {
    for (i, family) in [Family::Truss2, Family::Truss3, Family::Frame]
        .into_iter()
        .enumerate()
    {
        let seed = 40 + i as u64;
        let stats = drive(seed, random_model(seed, family, 80), 40, true).unwrap();
        assert!(stats.applied >= 10, "{family:?}: {stats:?}");
    }
}

#[test]
fn naive_oracle_agrees_with_fresh_state() {
    for seed in 0..6 {
        let model = random_model(seed, any_family(seed), 60);
        let state = redmx::SystemState::from_model(&model).unwrap();
        let (dr, dk) = common::oracle_deviation(&state);
        assert!(dr < 1e-10 && dk < 1e-10, "seed {seed}: {dr:e} {dk:e}");
    }
}
