mod common;

use std::collections::BTreeMap;

use nnefx::petri::validate_trace;
use nnefx::runtime::RuntimeError;
use nnefx::splitter::suggest_assignments;
use nnefx::trace::EventKind;
use nnefx::{
    evaluate, parse_item_program, read_trace, run_barrier_schedule, run_items, serialize_item,
    split, translate_multi, write_trace, Assignment, ItemProgram, NoiseConfig, Op,
};
use proptest::prelude::*;

fn branched_items() -> Vec<ItemProgram> {
    let a = Assignment::from_json(
        &std::fs::read_to_string(common::corpus_path("branched.assignment.json")).unwrap(),
    )
    .unwrap();
    split(&common::corpus("branched"), &a).unwrap()
}

fn edit(item: &ItemProgram, from: &str, to: &str) -> ItemProgram {
    parse_item_program(&serialize_item(item).replace(from, to)).unwrap()
}

#[test]
fn outputs_match_sequential_evaluation_bitwise() {
    for name in common::CORPUS {
        let p = common::corpus(name);
        let (inputs, weights) = common::random_instance(&p, 21);
        let reference = evaluate(&p, &inputs, &weights).unwrap();
        for n in 1..=3 {
            for a in suggest_assignments(&p, n) {
                let items = split(&p, &a).unwrap();
                let net = translate_multi(&items).unwrap();
                let run = run_items(&items, &inputs, &weights, &NoiseConfig::none()).unwrap();
                assert_eq!(run.outputs.len(), reference.len());
                for (k, v) in &reference {
                    assert!(run.outputs[k].bit_eq(v), "{name} {k}");
                }
                let v = validate_trace(&net, &run.trace).unwrap();
                assert!(v.accepted && v.reached_final, "{name}: {v:?}");
            }
        }
    }
}

#[test]
fn trace_events_pair_up_per_item() {
    let p = common::corpus("branched");
    let (inputs, weights) = common::random_instance(&p, 2);
    let run = run_items(&branched_items(), &inputs, &weights, &NoiseConfig::none()).unwrap();
    assert!(run.trace.events.windows(2).all(|w| w[0].t_ns <= w[1].t_ns));
    for item in ["item1", "item2", "item3"] {
        let events: Vec<_> = run.trace.of_item(item).collect();
        for pair in events.chunks(2) {
            assert_eq!(pair[0].kind, EventKind::Start);
            assert_eq!(pair[1].kind, EventKind::End);
            assert_eq!(pair[0].transition, pair[1].transition);
        }
    }
    let mut buf = Vec::new();
    write_trace(&run.trace, &mut buf).unwrap();
    assert_eq!(read_trace(buf.as_slice()).unwrap(), run.trace);
}

#[test]
fn missing_send_deadlocks() {
    let p = common::corpus("branched");
    let (inputs, weights) = common::random_instance(&p, 3);
    let mut items = branched_items();
    items[1].instructions.retain(|i| i.op != Op::SendVar);
    let err = run_items(&items, &inputs, &weights, &NoiseConfig::none()).unwrap_err();
    match err {
        RuntimeError::DeadlockDetected { blocked } => {
            assert_eq!(blocked, vec![("item1".to_string(), "o3_sync".to_string())]);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn get_before_send_cycle_deadlocks() {
    let p = common::corpus("branched");
    let (inputs, weights) = common::random_instance(&p, 3);
    let mut items = branched_items();
    let get = items[0]
        .instructions
        .iter()
        .position(|i| i.op == Op::GetVar)
        .unwrap();
    let inst = items[0].instructions.remove(get);
    items[0].instructions.insert(0, inst);
    let err = run_items(&items, &inputs, &weights, &NoiseConfig::none()).unwrap_err();
    assert!(
        matches!(err, RuntimeError::DeadlockDetected { .. }),
        "{err:?}"
    );
}

#[test]
fn second_writer_is_rejected() {
    let p = common::corpus("branched");
    let (inputs, weights) = common::random_instance(&p, 4);
    let items = branched_items();
    let items = vec![
        edit(&items[0], "o5_sync", "o3_sync"),
        items[1].clone(),
        edit(&items[2], "o5_sync", "o3_sync"),
    ];
    let err = run_items(&items, &inputs, &weights, &NoiseConfig::none()).unwrap_err();
    assert!(
        matches!(err, RuntimeError::DoubleWrite { ref sync, .. } if sync == "o3_sync"),
        "{err:?}"
    );
}

#[test]
fn missing_input_is_reported() {
    let p = common::corpus("branched");
    let (_, weights) = common::random_instance(&p, 5);
    let err = run_items(
        &branched_items(),
        &BTreeMap::new(),
        &weights,
        &NoiseConfig::none(),
    )
    .unwrap_err();
    assert_eq!(err, RuntimeError::MissingInput("e1".into()));
}

#[test]
fn barrier_schedule_runs_and_is_included() {
    let p = common::corpus("branched");
    let (inputs, weights) = common::random_instance(&p, 6);
    let reference = evaluate(&p, &inputs, &weights).unwrap();
    let items = branched_items();
    let net = translate_multi(&items).unwrap();
    let run = run_barrier_schedule(&items, &inputs, &weights, &NoiseConfig::none()).unwrap();
    assert_eq!(run.rendezvous, ["barrier1", "barrier2", "barrier3", "join"]);
    assert!(run.outputs["out"].bit_eq(&reference["out"]));
    let v = validate_trace(&net, &run.trace).unwrap();
    assert!(v.accepted && v.reached_final);
    let end_of = |t: &str| {
        run.trace
            .events
            .iter()
            .find(|e| e.transition == t && e.kind == EventKind::End)
            .unwrap()
            .t_ns
    };
    let start_of = |t: &str| {
        run.trace
            .events
            .iter()
            .find(|e| e.transition == t && e.kind == EventKind::Start)
            .unwrap()
            .t_ns
    };
    assert!(end_of("o3") < start_of("o6") && end_of("o5") < start_of("o6"));
}

#[test]
fn barrier_schedule_refuses_other_shapes() {
    let p = common::corpus("lenet");
    let (inputs, weights) = common::random_instance(&p, 7);
    let a = suggest_assignments(&p, 3)
        .into_iter()
        .find(|a| a.items.len() == 3)
        .unwrap();
    let items = split(&p, &a).unwrap();
    let err = run_barrier_schedule(&items, &inputs, &weights, &NoiseConfig::none()).unwrap_err();
    assert!(matches!(err, RuntimeError::ShapeUnsupported(_)), "{err:?}");
}

#[test]
fn noise_config_reads_json() {
    let n =
        NoiseConfig::from_json(r#"{"item2": {"after": "get:o1_sync", "delay_ms": 1000}}"#).unwrap();
    assert_eq!(n, NoiseConfig::none().with("item2", "get:o1_sync", 1000));
    assert!(NoiseConfig::from_json(r#"{"item2": {"after": 3}}"#).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn random_noise_keeps_outputs_and_traces(
        delays in prop::collection::vec((0usize..3, 0usize..6, 0u64..4), 0..3),
        seed in 0u64..1000,
    ) {
        let p = common::corpus("branched");
        let (inputs, weights) = common::random_instance(&p, seed);
        let reference = evaluate(&p, &inputs, &weights).unwrap();
        let items = branched_items();
        let points = ["start", "o1", "get:o1_sync", "o2", "o4", "o6"];
        let mut noise = NoiseConfig::none();
        for (item, point, ms) in delays {
            noise = noise.with(&items[item].item_id, points[point], ms);
        }
        let run = run_items(&items, &inputs, &weights, &noise).unwrap();
        prop_assert!(run.outputs["out"].bit_eq(&reference["out"]));
        let v = validate_trace(&translate_multi(&items).unwrap(), &run.trace).unwrap();
        prop_assert!(v.accepted && v.reached_final);
    }
}
