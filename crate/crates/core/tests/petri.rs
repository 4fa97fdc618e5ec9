mod common;

use nnefx::petri::{
    check_equivalence, enumerate_paths, export_dot, valid_paths, validate_trace, EnumerationCap,
    MarkingGraph, Verdict, ViolationReason,
};
use nnefx::splitter::suggest_assignments;
use nnefx::trace::EventKind;
use nnefx::{
    parse_program, split, translate, translate_multi, Assignment, Op, PetriNet, Trace, TraceEvent,
};
use proptest::prelude::*;

fn branched_items() -> Vec<nnefx::ItemProgram> {
    let a = Assignment::from_json(
        &std::fs::read_to_string(common::corpus_path("branched.assignment.json")).unwrap(),
    )
    .unwrap();
    split(&common::corpus("branched"), &a).unwrap()
}

/// Sequential start/end pairs, one nanosecond apart.
fn trace_of(steps: &[(&str, &str)]) -> Trace {
    let mut events = Vec::new();
    for (k, (item, t)) in steps.iter().enumerate() {
        for (j, kind) in [EventKind::Start, EventKind::End].into_iter().enumerate() {
            events.push(TraceEvent {
                item: item.to_string(),
                transition: t.to_string(),
                kind,
                t_ns: (2 * k + j) as u64,
            });
        }
    }
    Trace::new(events)
}

fn tokens(net: &PetriNet, m: &nnefx::petri::Marking, place: &str) -> u32 {
    m.place_total(net.place(place).unwrap())
}

#[test]
fn lenet_net_shape() {
    let net = translate(&common::corpus("lenet"));
    assert_eq!(net.places.len(), 24);
    assert_eq!(net.transitions.len(), 13);
    assert_eq!(net.initial.total(), 11);
    assert_eq!(net.final_marking.total(), 1);
    assert_eq!(tokens(&net, &net.final_marking, "out"), 1);
    let r = enumerate_paths(&net, EnumerationCap::default()).unwrap();
    assert_eq!(r.paths, 1);
    assert!(r.final_unique);
    assert_eq!(r.path_length, Some(13));
}

#[test]
fn branched_weights() {
    let net = translate(&common::corpus("branched"));
    let o1 = &net.transitions[net.transition("o1").unwrap()];
    assert_eq!(o1.outputs.len(), 1);
    assert_eq!(o1.outputs[0].weight, 2);
    assert_eq!(tokens(&net, &net.initial, "v5"), 2);
    let o3 = &net.transitions[net.transition("o3").unwrap()];
    assert!(o3.inputs.iter().all(|a| a.weight == 1));
}

#[test]
fn repeated_operand_weights_the_arc() {
    let p = parse_program(
        "graph g( x ) -> ( y ) { x = external(shape = [1, 4]); y = concat([x, x], axis = 1); }",
    )
    .unwrap();
    let net = translate(&p);
    let t = &net.transitions[net.transition("y").unwrap()];
    assert_eq!(t.inputs[0].weight, 2);
    assert_eq!(tokens(&net, &net.initial, "x"), 2);
    assert_eq!(
        enumerate_paths(&net, EnumerationCap::default())
            .unwrap()
            .paths,
        1
    );
}

#[test]
fn corpus_path_counts_match_linear_extensions() {
    for name in common::CORPUS {
        let p = common::corpus(name);
        let net = translate(&p);
        let r = enumerate_paths(&net, EnumerationCap::default()).unwrap();
        assert_eq!(r.paths, common::linear_extensions(&p), "{name}");
        assert!(r.final_reachable);
        let paths = valid_paths(&net, EnumerationCap::default()).unwrap();
        assert_eq!(paths.len() as u64, r.paths, "{name}");
    }
}

#[test]
fn confluence_except_duplicated_split_operand() {
    for name in common::CORPUS {
        let r =
            enumerate_paths(&translate(&common::corpus(name)), EnumerationCap::default()).unwrap();
        if name == "layer_parallel" {
            // Both splits read only e1, so either can fire twice and starve the other.
            assert!(!r.final_unique);
            assert_eq!(r.dead_markings, 2);
        } else {
            assert!(r.final_unique, "{name}");
            assert_eq!(r.dead_markings, 0, "{name}");
        }
    }
}

#[test]
fn valid_paths_fire_each_compute_once_and_end_final() {
    for name in common::CORPUS {
        let p = common::corpus(name);
        let net = translate(&p);
        let n = p.instructions.iter().filter(|i| i.op.is_compute()).count();
        for path in valid_paths(&net, EnumerationCap::default()).unwrap() {
            assert_eq!(path.len(), n);
            let mut seen = path.clone();
            seen.sort();
            seen.dedup();
            assert_eq!(seen.len(), n);
            let mut m = net.initial.clone();
            for t in path {
                m = net.fire(&m, t).unwrap();
            }
            assert!(net.is_final(&m));
        }
    }
}

#[test]
fn cap_is_reported() {
    let net = translate(&common::corpus("layer_parallel"));
    let err = enumerate_paths(
        &net,
        EnumerationCap {
            paths: 10,
            markings: 1_000_000,
        },
    );
    assert!(matches!(
        err,
        Err(nnefx::petri::PetriError::CapExceeded { .. })
    ));
}

#[test]
fn marking_graph_is_acyclic_with_final_co_reachable() {
    let net = translate(&common::corpus("branched"));
    let g = MarkingGraph::build(&net, 10_000).unwrap();
    assert!(g.topological_order().is_some());
    assert!(g.co_reachable(&net)[0]);
    let json = g.to_json(&net);
    assert_eq!(json["nodes"].as_array().unwrap().len(), g.len());
}

#[test]
fn branched_split_is_equivalent() {
    let items = branched_items();
    let coloured = translate_multi(&items).unwrap();
    assert_eq!(coloured.items().len(), 3);
    assert_eq!(coloured.sync_transitions().count(), 3);
    let r = check_equivalence(
        &coloured,
        &translate(&common::corpus("branched")),
        1_000_000,
    )
    .unwrap();
    assert_eq!(r.verdict, Verdict::Equivalent);
    assert!(r.counterexample.is_none());
}

#[test]
fn single_item_net_erases_to_the_original() {
    for name in common::CORPUS {
        let p = common::corpus(name);
        let items = split(&p, &Assignment::single(&p, "item1")).unwrap();
        let coloured = translate_multi(&items).unwrap();
        assert_eq!(coloured.sync_transitions().count(), 0);
        let erased = coloured.erase_colours();
        let original = translate(&p);
        assert_eq!(erased.places, original.places, "{name}");
        assert_eq!(erased.initial, original.initial, "{name}");
        assert_eq!(erased.final_marking, original.final_marking, "{name}");
        for t in &original.transitions {
            let e = &erased.transitions[erased.transition(&t.name).unwrap()];
            assert_eq!(
                (&e.inputs, &e.outputs),
                (&t.inputs, &t.outputs),
                "{name} {}",
                t.name
            );
        }
    }
}

#[test]
fn every_suggested_split_is_equivalent() {
    for name in common::CORPUS {
        let p = common::corpus(name);
        let original = translate(&p);
        for n in 1..=4 {
            for a in suggest_assignments(&p, n) {
                let items = split(&p, &a).unwrap();
                let c = translate_multi(&items).unwrap();
                let r = check_equivalence(&c, &original, 1_000_000).unwrap();
                assert_eq!(r.verdict, Verdict::Equivalent, "{name} {}", a.to_json());
            }
        }
    }
}

#[test]
fn deleted_send_gives_a_counterexample() {
    let original = translate(&common::corpus("branched"));
    let mut items = branched_items();
    items[2].instructions.retain(|i| i.op != Op::SendVar);
    let c = translate_multi(&items).unwrap();
    let r = check_equivalence(&c, &original, 1_000_000).unwrap();
    assert_eq!(r.verdict, Verdict::NotEquivalent);
    let cx = r.counterexample.unwrap();
    let mut m = original.initial.clone();
    for t in &cx.sequence {
        m = original.fire(&m, original.transition(t).unwrap()).unwrap();
    }
    assert!(original.is_final(&m));
}

#[test]
fn recorded_order_is_accepted() {
    let net = translate_multi(&branched_items()).unwrap();
    let t = trace_of(&[
        ("item1", "o1"),
        ("item1", "sync:o1_sync"),
        ("item3", "o4"),
        ("item2", "o2"),
        ("item3", "o5"),
        ("item3", "sync:o5_sync"),
        ("item2", "o3"),
        ("item2", "sync:o3_sync"),
        ("item1", "o6"),
        ("item1", "o7"),
        ("item1", "out"),
    ]);
    let v = validate_trace(&net, &t).unwrap();
    assert!(v.accepted && v.reached_final, "{v:?}");
    assert_eq!(v.fired.len(), 11);
}

#[test]
fn reading_before_the_sync_is_rejected() {
    let net = translate_multi(&branched_items()).unwrap();
    let t = trace_of(&[("item1", "o1"), ("item2", "o2"), ("item1", "sync:o1_sync")]);
    let v = validate_trace(&net, &t).unwrap();
    assert!(!v.accepted);
    let violation = v.violation.unwrap();
    assert_eq!(violation.transition, "o2");
    assert_eq!(violation.reason, ViolationReason::NotFireable);
}

#[test]
fn empty_trace_is_accepted_but_not_final() {
    let net = translate(&common::corpus("lenet"));
    let v = validate_trace(&net, &Trace::default()).unwrap();
    assert!(v.accepted);
    assert!(!v.reached_final);
}

#[test]
fn malformed_traces_are_rejected() {
    let net = translate_multi(&branched_items()).unwrap();
    let reason = |t: Trace| validate_trace(&net, &t).unwrap().violation.unwrap().reason;
    assert!(matches!(
        reason(trace_of(&[("item2", "o1")])),
        ViolationReason::WrongItem { .. }
    ));
    let mut dup = trace_of(&[("item1", "o1")]);
    dup.events.insert(1, dup.events[0].clone());
    assert_eq!(reason(dup), ViolationReason::DuplicateStart);
    let mut orphan = trace_of(&[("item1", "o1")]);
    orphan.events.remove(0);
    assert_eq!(reason(orphan), ViolationReason::EndWithoutStart);
    let mut overlap = trace_of(&[("item1", "o1"), ("item1", "o6")]);
    overlap.events.swap(1, 2);
    overlap.events[1].t_ns = 1;
    overlap.events[2].t_ns = 2;
    assert!(matches!(reason(overlap), ViolationReason::Overlap { .. }));
}

#[test]
fn repeated_firing_is_rejected() {
    let net = translate(&common::corpus("layer_parallel"));
    let t = trace_of(&[("layer_parallel", "a"), ("layer_parallel", "a")]);
    let v = validate_trace(&net, &t).unwrap();
    assert!(!v.accepted);
    assert_eq!(v.violation.unwrap().reason, ViolationReason::DuplicateStart);
}

#[test]
fn dot_rendering() {
    let lenet = export_dot(&translate(&common::corpus("lenet")));
    assert_eq!(lenet.matches("shape=circle").count(), 24);
    assert!(lenet.starts_with("digraph"));
    let branched = export_dot(&translate(&common::corpus("branched")));
    assert!(branched.contains("label=\"2\""));
    let coloured = export_dot(&translate_multi(&branched_items()).unwrap());
    assert!(coloured.contains("color="));
}

/// Holds when no two transitions can compete for all of one another's inputs.
fn every_transition_has_a_private_input(net: &PetriNet) -> bool {
    net.transitions.iter().enumerate().all(|(k, t)| {
        t.inputs.iter().any(|a| {
            net.transitions
                .iter()
                .enumerate()
                .all(|(j, u)| j == k || u.inputs.iter().all(|b| b.place != a.place))
        })
    })
}

/// A random program of dense layers, each owning its weights, with
/// occasional two-operand concatenations.
fn program_text(ops: &[(usize, Option<usize>)]) -> String {
    let mut lines = vec!["x = external(shape = [1, 4]);".to_string()];
    let mut vars = vec!["x".to_string()];
    let mut used = vec![false];
    for (k, &(a, b)) in ops.iter().enumerate() {
        let a = a % vars.len();
        lines.push(format!("w{k} = variable(shape = [4, 4], label = 'w{k}');"));
        lines.push(format!("b{k} = variable(shape = [1, 4], label = 'b{k}');"));
        used[a] = true;
        let mut body = format!("y{k} = linear({}, w{k}, b{k});", vars[a]);
        if let Some(b) = b.map(|b| b % vars.len()).filter(|&b| b != a) {
            used[b] = true;
            lines.push(format!(
                "c{k} = concat([{}, {}], axis = 1);",
                vars[a], vars[b]
            ));
            lines.push(format!("r{k} = reshape(c{k}, shape = [1, 8]);"));
            lines.push(format!("u{k} = variable(shape = [4, 8], label = 'u{k}');"));
            body = format!("y{k} = linear(r{k}, u{k}, b{k});");
            lines.push(format!(
                "w_unused{k} = variable(shape = [1, 1], label = 'w_unused{k}');"
            ));
        }
        lines.push(body);
        vars.push(format!("y{k}"));
        used.push(false);
    }
    let outputs: Vec<&str> = vars
        .iter()
        .zip(&used)
        .filter(|(_, u)| !**u)
        .map(|(v, _)| v.as_str())
        .collect();
    format!(
        "graph g( x ) -> ( {} ) {{ {} }}",
        outputs.join(", "),
        lines.join(" ")
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_programs_count_and_converge(
        ops in prop::collection::vec((0usize..16, prop::option::weighted(0.3, 0usize..16)), 1..8)
    ) {
        let p = parse_program(&program_text(&ops)).unwrap();
        prop_assert!(nnefx::validate_ssa(&p).is_empty());
        let net = translate(&p);
        let r = enumerate_paths(&net, EnumerationCap::default()).unwrap();
        prop_assert_eq!(r.paths, common::linear_extensions(&p));
        if every_transition_has_a_private_input(&net) {
            prop_assert!(r.final_unique);
        }
        let outputs = p.outputs.len() as u64;
        prop_assert_eq!(net.final_marking.total(), outputs);
    }

    #[test]
    fn random_splits_are_equivalent(
        ops in prop::collection::vec((0usize..16, prop::option::weighted(0.3, 0usize..16)), 1..7),
        owners in prop::collection::vec(0usize..3, 20),
    ) {
        let p = parse_program(&program_text(&ops)).unwrap();
        let compute: Vec<&str> = p.instructions.iter().filter(|i| i.op.is_compute()).map(|i| i.result.as_str()).collect();
        let items: Vec<String> = (1..=3).map(|k| format!("item{k}")).collect();
        let assignment = compute
            .iter()
            .zip(owners.iter().cycle())
            .map(|(v, &o)| (v.to_string(), items[o].clone()))
            .collect();
        let used: Vec<String> = items.iter().filter(|i| owners.iter().take(compute.len()).any(|&o| items[o] == **i)).cloned().collect();
        let a = Assignment::new(used, assignment);
        let split_items = split(&p, &a).unwrap();
        prop_assert!(nnefx::validate_item_set(&split_items).is_empty());
        let c = translate_multi(&split_items).unwrap();
        let r = check_equivalence(&c, &translate(&p), 1_000_000).unwrap();
        prop_assert_eq!(r.verdict, Verdict::Equivalent);
    }
}
