mod common;

use proptest::prelude::*;
use redmx::io::{
    export_matrix, parse_matrix, parse_model, parse_update_script, serialize_model,
    serialize_script, Payload, Precision, ScriptStep,
};
use redmx::{assemble_system, Mat, ModelDocument};

fn matrix() -> impl Strategy<Value = Mat<f64>> {
    (1usize..6, 1usize..6).prop_flat_map(|(r, c)| {
        prop::collection::vec(prop::num::f64::NORMAL | prop::num::f64::ZERO, r * c)
            .prop_map(move |v| Mat::from_vec(r, c, v))
    })
}

fn rows_payload(n: usize) -> impl Strategy<Value = Payload<f64>> {
    prop::collection::vec(
        (0.1f64..1e4, prop::collection::vec(-10.0f64..10.0, n)),
        1..4,
    )
    .prop_map(Payload::Rows)
}

fn step(n: usize) -> impl Strategy<Value = ScriptStep<f64>> {
    prop_oneof![
        (1u32..100, prop::option::of(0usize..20), rows_payload(n))
            .prop_map(|(id, at, payload)| ScriptStep::Add { id, at, payload }),
        prop::collection::btree_set(1u32..100, 1..4).prop_map(|ids| ScriptStep::Remove {
            ids: ids.into_iter().collect()
        }),
        (1u32..100, rows_payload(n)).prop_map(|(id, payload)| ScriptStep::Exchange { id, payload }),
    ]
}

proptest! {
    #[test]
    fn full_precision_matrices_round_trip(m in matrix()) {
        let back = parse_matrix::<f64>(&export_matrix(&m, Precision::Full)).unwrap();
        prop_assert_eq!(back.shape(), m.shape());
        for (a, b) in back.as_slice().iter().zip(m.as_slice()) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn scripts_round_trip(steps in prop::collection::vec(step(4), 0..6)) {
        let text = serialize_script(&steps);
        let back = parse_update_script::<f64>(&text).unwrap();
        prop_assert_eq!(back.steps, steps);
    }

    #[test]
    fn models_round_trip(seed in any::<u64>()) {
        let model = common::random_model(seed, common::any_family(seed), 40);
        let text = serialize_model(&ModelDocument::Geometric(model.clone()));
        let ModelDocument::Geometric(back) = parse_model::<f64>(&text).unwrap() else {
            return Err(TestCaseError::fail("geometric model expected"));
        };
        prop_assert_eq!(&back, &model);

        let raw = ModelDocument::Raw(assemble_system(&model).unwrap());
        let again = parse_model::<f64>(&serialize_model(&raw)).unwrap();
        prop_assert_eq!(again.to_system().unwrap(), raw.to_system().unwrap());
    }
}
