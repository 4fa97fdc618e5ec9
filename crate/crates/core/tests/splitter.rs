mod common;

use std::collections::{BTreeMap, BTreeSet};

use nnefx::splitter::{item_file_name, suggest_assignments, SplitError};
use nnefx::{evaluate, merge, split, validate_item_set, Assignment, ItemProgram, NnefProgram, Op};
use proptest::prelude::*;

fn reference_assignment() -> Assignment {
    Assignment::from_json(
        &std::fs::read_to_string(common::corpus_path("branched.assignment.json")).unwrap(),
    )
    .unwrap()
}

fn ops(item: &ItemProgram, op: Op) -> Vec<&str> {
    item.instructions
        .iter()
        .filter(|i| i.op == op)
        .map(|i| i.result.as_str())
        .collect()
}

fn compute_set(p: &NnefProgram) -> BTreeSet<String> {
    p.instructions
        .iter()
        .filter(|i| i.op.is_compute())
        .map(|i| format!("{:?}", i))
        .collect()
}

#[test]
fn reference_split_structure() {
    let items = split(&common::corpus("branched"), &reference_assignment()).unwrap();
    assert_eq!(items.len(), 3);
    let [item1, item2, item3] = [&items[0], &items[1], &items[2]];
    assert_eq!(item1.item_id, "item1");
    assert_eq!(item1.outputs, ["out"]);
    assert_eq!(item1.inputs, ["e1"]);
    assert!(item2.inputs.is_empty() && item2.outputs.is_empty());

    assert_eq!(ops(item1, Op::Conv), ["o1"]);
    assert_eq!(ops(item1, Op::SendVar), ["o1_sync"]);
    let send = item1.sends().next().unwrap().1;
    assert_eq!(send.send_var_parts().unwrap().0, ["item2", "item3"]);
    assert_eq!(ops(item1, Op::GetVar), ["o3", "o5"]);

    for (item, computed, sent) in [
        (item2, ["o2", "o3"], "o3_sync"),
        (item3, ["o4", "o5"], "o5_sync"),
    ] {
        assert_eq!(ops(item, Op::GetVar), ["o1"]);
        assert_eq!(ops(item, Op::Conv), computed);
        assert_eq!(ops(item, Op::SendVar), [sent]);
        let (dest, _) = item.sends().next().unwrap().1.send_var_parts().unwrap();
        assert_eq!(dest, ["item1"]);
        assert!(ops(item, Op::External).is_empty());
    }
    assert_eq!(ops(item3, Op::Variable), ["v5", "v6", "v7", "v8"]);
    assert_eq!(item_file_name(item2), "branched.item2.nnef");
}

#[test]
fn send_follows_producer_and_get_precedes_use() {
    let items = split(&common::corpus("branched"), &reference_assignment()).unwrap();
    for item in &items {
        let pos = |name: &str, op: Op| {
            item.instructions
                .iter()
                .position(|i| i.result == name && i.op == op)
        };
        for (sync, send) in item.sends() {
            let data = send.var_inputs()[0];
            let producer = item
                .instructions
                .iter()
                .position(|i| i.result == data && i.op.is_compute());
            assert_eq!(pos(sync, Op::SendVar), producer.map(|p| p + 1));
        }
        for get in item.gets() {
            let first_use = item
                .instructions
                .iter()
                .position(|i| i.var_inputs().contains(&get.result.as_str()));
            let (at, first_use) = (pos(&get.result, Op::GetVar).unwrap(), first_use.unwrap());
            assert!(at < first_use);
            assert!(item.instructions[at + 1..first_use]
                .iter()
                .all(|i| i.op == Op::GetVar));
        }
    }
}

#[test]
fn merge_inverts_split_on_the_corpus() {
    for name in common::CORPUS {
        let p = common::corpus(name);
        let (inputs, weights) = common::random_instance(&p, 11);
        let reference = evaluate(&p, &inputs, &weights).unwrap();
        for n in 1..=3 {
            for a in suggest_assignments(&p, n) {
                let items = split(&p, &a).unwrap();
                assert!(validate_item_set(&items).is_empty(), "{name}");
                let merged = merge(&items).unwrap();
                assert!(nnefx::validate_ssa(&merged).is_empty());
                assert_eq!(compute_set(&merged), compute_set(&p), "{name}");
                assert_eq!(merged.outputs, p.outputs);
                let out = evaluate(&merged, &inputs, &weights).unwrap();
                for (k, v) in &reference {
                    assert!(out[k].bit_eq(v), "{name} {k}");
                }
            }
        }
    }
}

#[test]
fn single_item_split_keeps_the_program() {
    let p = common::corpus("lenet");
    let items = split(&p, &Assignment::single(&p, "item1")).unwrap();
    assert_eq!(items.len(), 1);
    assert!(ops(&items[0], Op::SendVar).is_empty());
    assert_eq!(items[0].instructions, p.instructions);
    assert_eq!(merge(&items).unwrap().instructions, p.instructions);
}

#[test]
fn bad_assignments_are_rejected() {
    let p = common::corpus("branched");
    let mut a = reference_assignment();
    a.assignment.remove("o5");
    assert!(matches!(
        split(&p, &a),
        Err(SplitError::InvalidAssignment(_))
    ));
    let mut a = reference_assignment();
    a.assignment.insert("o2".into(), "item9".into());
    assert!(matches!(
        split(&p, &a),
        Err(SplitError::InvalidAssignment(_))
    ));
    let mut a = reference_assignment();
    a.items.push("item4".into());
    assert!(matches!(split(&p, &a), Err(SplitError::EmptyItem(i)) if i == "item4"));
    let mut a = reference_assignment();
    a.assignment.insert("v1".into(), "item1".into());
    assert!(split(&p, &a).is_err());
    assert!(Assignment::from_json("{").is_err());
}

#[test]
fn sync_names_avoid_collisions() {
    let p = nnefx::parse_program(
        "graph g( x ) -> ( y ) { x = external(shape = [1, 4]); a = relu(x); a_sync = relu(a); y = relu(a_sync); }",
    )
    .unwrap();
    let items = split(
        &p,
        &Assignment::new(
            vec!["item1".into(), "item2".into()],
            BTreeMap::from([
                ("a".into(), "item1".into()),
                ("a_sync".into(), "item2".into()),
                ("y".into(), "item1".into()),
            ]),
        ),
    )
    .unwrap();
    assert!(validate_item_set(&items).is_empty());
    let sends: Vec<&str> = items.iter().flat_map(|i| ops(i, Op::SendVar)).collect();
    assert!(sends.iter().all(|s| *s != "a_sync"), "{sends:?}");
    assert_eq!(sends.len(), 2);
}

#[test]
fn suggestions() {
    let p = common::corpus("branched");
    assert!(suggest_assignments(&p, 0).is_empty());
    assert_eq!(
        suggest_assignments(&p, 1),
        vec![Assignment::single(&p, "item1")]
    );
    let three = suggest_assignments(&p, 3);
    assert!(!three.is_empty());
    for a in &three {
        a.check(&p).unwrap();
        assert!(a.items.len() <= 3);
    }
    assert!(three.iter().any(|a| a.items.len() == 3));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn random_assignments_split_and_merge(owners in prop::collection::vec(0usize..3, 13), pick in 0usize..4) {
        let p = common::corpus(common::CORPUS[pick]);
        let compute: Vec<String> = p.instructions.iter().filter(|i| i.op.is_compute()).map(|i| i.result.clone()).collect();
        let names = ["item1", "item2", "item3"];
        let assignment: BTreeMap<String, String> =
            compute.iter().zip(&owners).map(|(v, &o)| (v.clone(), names[o].to_string())).collect();
        let used: Vec<String> = names.iter().filter(|n| assignment.values().any(|v| v == *n)).map(|n| n.to_string()).collect();
        let items = split(&p, &Assignment::new(used.clone(), assignment)).unwrap();
        prop_assert_eq!(items.len(), used.len());
        prop_assert!(validate_item_set(&items).is_empty());
        let merged = merge(&items).unwrap();
        prop_assert_eq!(compute_set(&merged), compute_set(&p));
        for item in &items {
            let roundtrip = nnefx::parse_item_program(&nnefx::serialize_item(item)).unwrap();
            prop_assert_eq!(&roundtrip, item);
        }
    }
}
