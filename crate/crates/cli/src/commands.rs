use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use nnefx::conventions::{encode_max_pool, PoolConvention};
use nnefx::frontend::{write_tensor_file, Body};
use nnefx::petri::{
    check_equivalence, enumerate_paths, export_dot, validate_trace, EnumerationCap, MarkingGraph,
    PetriError, PetriNet, Verdict,
};
use nnefx::runtime::{run_barrier_schedule, run_items, NoiseConfig, RuntimeError};
use nnefx::splitter::{item_file_name, suggest_assignments, SplitError};
use nnefx::tensor::EvalErrorKind;
use nnefx::trace::{read_trace, write_trace, EventKind, TraceError};
use nnefx::{
    evaluate, merge, serialize_item, split, translate, translate_multi, Assignment, ItemProgram,
    NnefProgram, Tensor,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::load::{
    inputs_for, is_item_text, load_items, load_model, parse_items, read_text, weights_for, Failure,
    Outcome,
};

fn emit(json: bool, value: &Value, text: impl FnOnce() -> String) {
    if json {
        println!("{}", serde_json::to_string_pretty(value).expect("json"));
    } else {
        print!("{}", text());
    }
}

fn write_file(path: &Path, contents: &str) -> Outcome {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)
            .map_err(|e| Failure::Missing(format!("{}: {e}", parent.display())))?;
    }
    fs::write(path, contents).map_err(|e| Failure::Missing(format!("{}: {e}", path.display())))
}

fn create_dir(dir: &Path) -> Outcome {
    fs::create_dir_all(dir).map_err(|e| Failure::Missing(format!("{}: {e}", dir.display())))
}

fn tensor_json(t: &Tensor) -> Value {
    json!({ "shape": t.shape(), "data": t.data() })
}

fn preview(t: &Tensor) -> String {
    let shown: Vec<String> = t.data().iter().take(6).map(|v| format!("{v:.6}")).collect();
    let more = if t.len() > 6 { ", ..." } else { "" };
    format!("{:?} [{}{more}]", t.shape(), shown.join(", "))
}

fn petri_failure(e: PetriError) -> Failure {
    match e {
        PetriError::CapExceeded { .. } => Failure::Semantic(e.to_string()),
        _ => Failure::Validation(e.to_string()),
    }
}

/// The net of one description, or the coloured net of an item set.
fn net_of(files: &[PathBuf]) -> Result<(PetriNet, String), Failure> {
    let single = match files {
        [f] => !is_item_text(&read_text(f)?),
        [] => return Err(Failure::Validation("no description given".into())),
        _ => false,
    };
    if single {
        let p = load_model(&files[0])?;
        Ok((translate(&p), "petri net".into()))
    } else {
        let items = load_items(files)?;
        let net = translate_multi(&items).map_err(petri_failure)?;
        Ok((
            net.net,
            format!("coloured petri net, {} items", items.len()),
        ))
    }
}

pub fn check(files: &[PathBuf], cap: EnumerationCap, graph: Option<&Path>, json: bool) -> Outcome {
    let (net, kind) = net_of(files)?;
    let report = enumerate_paths(&net, cap);
    if let Some(path) = graph {
        let g = MarkingGraph::build(&net, cap.markings).map_err(petri_failure)?;
        write_file(
            path,
            &serde_json::to_string_pretty(&g.to_json(&net)).expect("json"),
        )?;
    }
    let tokens = net.initial.total();
    let value = json!({
        "net": net.name,
        "kind": kind,
        "places": net.places.len(),
        "transitions": net.transitions.len(),
        "initial_tokens": tokens,
        "final_places": net.final_places.iter().map(|&p| &net.places[p]).collect::<Vec<_>>(),
        "paths": report.as_ref().ok(),
        "cap_exceeded": report.as_ref().err().map(|e| e.to_string()),
    });
    emit(json, &value, || {
        let mut s = format!(
            "{} ({kind}): ok\n  places: {}\n  transitions: {}\n  initial tokens: {tokens}\n",
            net.name,
            net.places.len(),
            net.transitions.len()
        );
        match &report {
            Ok(r) => {
                s += &format!(
                    "  valid paths: {}\n  reachable markings: {}\n  dead markings: {}\n  unique final marking: {}\n",
                    r.paths,
                    r.reachable_markings,
                    r.dead_markings,
                    if r.final_unique { "yes" } else { "no" }
                );
            }
            Err(e) => s += &format!("  valid paths: not counted ({e})\n"),
        }
        s
    });
    Ok(())
}

fn eval_failure(e: nnefx::tensor::EvalError) -> Failure {
    match &e.kind {
        EvalErrorKind::MissingInput(_) | EvalErrorKind::MissingWeight(_) => {
            Failure::Missing(e.to_string())
        }
        EvalErrorKind::InputShape { .. } => Failure::Validation(e.to_string()),
        _ => Failure::Semantic(e.to_string()),
    }
}

fn write_outputs(dir: &Path, outputs: &BTreeMap<String, Tensor>) -> Outcome {
    create_dir(dir)?;
    for (name, t) in outputs {
        write_tensor_file(&dir.join(format!("{name}.dat")), t)?;
    }
    Ok(())
}

pub fn eval(
    model: &Path,
    weights: Option<&Path>,
    input: Option<&Path>,
    out: Option<&Path>,
    json: bool,
) -> Outcome {
    let p = load_model(model)?;
    let w = weights_for(weights, &[&p])?;
    let inputs = inputs_for(input, &[&p])?;
    let outputs = evaluate(&p, &inputs, &w).map_err(eval_failure)?;
    if let Some(dir) = out {
        write_outputs(dir, &outputs)?;
    }
    let value: Value = outputs
        .iter()
        .map(|(k, t)| (k.clone(), tensor_json(t)))
        .collect::<serde_json::Map<_, _>>()
        .into();
    emit(json, &value, || {
        outputs
            .iter()
            .map(|(k, t)| format!("{k}: {}\n", preview(t)))
            .collect()
    });
    Ok(())
}

fn split_failure(e: SplitError) -> Failure {
    match e {
        SplitError::Shape(_) => Failure::Semantic(e.to_string()),
        _ => Failure::Validation(e.to_string()),
    }
}

fn compute_multiset(p: &NnefProgram) -> Vec<String> {
    let mut v: Vec<String> = p.compute_instructions().map(|i| format!("{i:?}")).collect();
    v.sort();
    v
}

pub fn split_cmd(
    model: &Path,
    assignment: Option<&Path>,
    suggest: Option<usize>,
    out: &Path,
    json: bool,
) -> Outcome {
    let p = load_model(model)?;
    if let Some(n) = suggest {
        let suggestions = suggest_assignments(&p, n);
        let value = serde_json::to_value(&suggestions).expect("json");
        emit(json, &value, || {
            suggestions
                .iter()
                .map(|a| format!("{}\n", serde_json::to_string(a).expect("json")))
                .collect()
        });
        return Ok(());
    }
    let path = assignment
        .ok_or_else(|| Failure::Missing("--assignment FILE (or --suggest N) is required".into()))?;
    let a = Assignment::from_json(&read_text(path)?).map_err(split_failure)?;
    let items = split(&p, &a).map_err(split_failure)?;
    create_dir(out)?;
    let mut files = Vec::new();
    for item in &items {
        let file = out.join(item_file_name(item));
        write_file(&file, &serialize_item(item))?;
        files.push(file);
    }
    let merged = merge(&items).map_err(split_failure)?;
    let union = compute_multiset(&merged) == compute_multiset(&p);
    let value = json!({
        "files": files,
        "union_matches_original": union,
    });
    emit(json, &value, || {
        let mut s: String = files
            .iter()
            .map(|f| format!("wrote {}\n", f.display()))
            .collect();
        s += if union {
            "union of the items equals the original description\n"
        } else {
            "union of the items DIFFERS from the original description\n"
        };
        s
    });
    if union {
        Ok(())
    } else {
        Err(Failure::Semantic(
            "split does not preserve the instruction set".into(),
        ))
    }
}

pub fn verify(model: &Path, item_files: &[PathBuf], cap: EnumerationCap, json: bool) -> Outcome {
    let p = load_model(model)?;
    let items = parse_items(item_files)?;
    let report = nnefx::validate_item_set(&items);
    if !report.is_empty() && !json {
        eprintln!("warning: the item set does not validate:\n{report}");
    }
    let coloured = translate_multi(&items).map_err(petri_failure)?;
    let eq = check_equivalence(&coloured, &translate(&p), cap.markings).map_err(petri_failure)?;
    let value = json!({ "equivalence": eq, "violations": report.violations });
    emit(json, &value, || {
        match &eq.counterexample {
        None => "EQUIVALENT\n".to_string(),
        Some(c) => format!(
            "NOT-EQUIVALENT\ncounterexample (valid in the {} net only, diverging after {} steps):\n  {}\n",
            match c.valid_in {
                nnefx::petri::Side::Original => "original",
                nnefx::petri::Side::Coloured => "item",
            },
            c.diverges_at,
            c.sequence.join(" ")
        ),
    }
    });
    match (eq.verdict, report.is_empty()) {
        (Verdict::NotEquivalent, _) => Err(Failure::Semantic("not equivalent".into())),
        (Verdict::Equivalent, false) => {
            Err(Failure::Validation("item set does not validate".into()))
        }
        (Verdict::Equivalent, true) => Ok(()),
    }
}

fn runtime_failure(e: RuntimeError) -> Failure {
    match e {
        RuntimeError::DeadlockDetected { .. } => Failure::Deadlock(e.to_string()),
        RuntimeError::MissingInput(_) => Failure::Missing(e.to_string()),
        _ => Failure::Semantic(e.to_string()),
    }
}

pub struct RunArgs<'a> {
    pub items: &'a [PathBuf],
    pub weights: Option<&'a Path>,
    pub input: Option<&'a Path>,
    pub out: Option<&'a Path>,
    pub noise: Option<&'a Path>,
    pub barrier: bool,
    pub json: bool,
}

pub fn run(args: RunArgs) -> Outcome {
    let items = load_items(args.items)?;
    let bodies: Vec<&ItemProgram> = items.iter().collect();
    let w = weights_for(args.weights, &bodies)?;
    let inputs = inputs_for(args.input, &bodies)?;
    let noise = match args.noise {
        Some(path) => NoiseConfig::from_json(&read_text(path)?)
            .map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))?,
        None => NoiseConfig::none(),
    };
    let mut mode = "items";
    let result = if args.barrier {
        match run_barrier_schedule(&items, &inputs, &w, &noise) {
            Err(RuntimeError::ShapeUnsupported(why)) => {
                eprintln!("barrier schedule not applicable ({why}); running items freely");
                run_items(&items, &inputs, &w, &noise)
            }
            other => {
                mode = "barrier";
                other
            }
        }
    } else {
        run_items(&items, &inputs, &w, &noise)
    };
    let run = result.map_err(runtime_failure)?;

    let merged = merge(&items).map_err(split_failure)?;
    let reference = evaluate(&merged, &inputs, &w).map_err(eval_failure)?;
    let outputs_match = reference.len() == run.outputs.len()
        && reference
            .iter()
            .all(|(k, t)| run.outputs.get(k).is_some_and(|u| u.bit_eq(t)));
    let net = translate_multi(&items).map_err(petri_failure)?;
    let verdict = validate_trace(&net, &run.trace).map_err(petri_failure)?;
    let trace_ok = verdict.accepted && verdict.reached_final;

    if let Some(dir) = args.out {
        write_outputs(dir, &run.outputs)?;
        let mut buf = Vec::new();
        write_trace(&run.trace, &mut buf).expect("in-memory write");
        write_file(
            &dir.join("trace.jsonl"),
            &String::from_utf8(buf).expect("utf8"),
        )?;
    }
    let schedule: Vec<String> = run
        .trace
        .events
        .iter()
        .filter(|e| e.kind == EventKind::Start)
        .map(|e| format!("{}@{}", e.transition, e.item))
        .collect();
    let value = json!({
        "mode": mode,
        "outputs_match_sequential": outputs_match,
        "trace": verdict,
        "rendezvous": run.rendezvous,
        "schedule": schedule,
        "outputs": run.outputs.iter().map(|(k, t)| (k.clone(), tensor_json(t))).collect::<serde_json::Map<_, _>>(),
    });
    emit(args.json, &value, || {
        let mut s = format!("mode: {mode}\n");
        if !run.rendezvous.is_empty() {
            s += &format!("rendezvous: {}\n", run.rendezvous.join(" "));
        }
        s += &format!("schedule: {}\n", schedule.join(" "));
        for (k, t) in &run.outputs {
            s += &format!("{k}: {}\n", preview(t));
        }
        s += &format!(
            "outputs vs sequential evaluation: {}\n",
            if outputs_match {
                "identical"
            } else {
                "DIFFERENT"
            }
        );
        s += &format!(
            "trace ({} events): {}\n",
            run.trace.len(),
            if trace_ok { "accepted" } else { "REJECTED" }
        );
        if let Some(v) = &verdict.violation {
            s += &format!(
                "  first violation: event {} ({} on {}): {:?}\n",
                v.event, v.transition, v.item, v.reason
            );
        }
        s
    });
    if outputs_match && trace_ok {
        Ok(())
    } else {
        Err(Failure::Semantic("self-check failed".into()))
    }
}

pub fn trace_validate(files: &[PathBuf], trace: &Path, json: bool) -> Outcome {
    let (net, _) = net_of(files)?;
    let file =
        fs::File::open(trace).map_err(|e| Failure::Missing(format!("{}: {e}", trace.display())))?;
    let t = read_trace(std::io::BufReader::new(file)).map_err(|e| match e {
        TraceError::Io(_) => Failure::Missing(e.to_string()),
        _ => Failure::Validation(format!("{}: {e}", trace.display())),
    })?;
    let verdict = validate_trace(&net, &t).map_err(petri_failure)?;
    emit(json, &serde_json::to_value(&verdict).expect("json"), || {
        let mut s = String::new();
        if verdict.accepted {
            s += &format!("ACCEPT ({} transitions replayed)\n", verdict.fired.len());
            if !verdict.reached_final {
                s += "warning: NOT-FINAL, the trace stops before the final marking\n";
            }
        } else {
            s += "REJECT\n";
        }
        if let Some(v) = &verdict.violation {
            s += &format!(
                "first violating event: #{} {} on {}: {}\n",
                v.event,
                v.transition,
                v.item,
                serde_json::to_string(&v.reason).expect("json")
            );
        }
        s
    });
    if verdict.accepted {
        Ok(())
    } else {
        Err(Failure::Semantic("trace rejected".into()))
    }
}

pub fn diff(
    conventions: &[PoolConvention],
    kernel: usize,
    stride: usize,
    size: (usize, usize),
    channels: usize,
    json: bool,
) -> Outcome {
    let input = [1, channels, size.0, size.1];
    let mut rows = Vec::new();
    for &c in conventions {
        let enc = encode_max_pool(c, kernel, stride);
        let shape = enc
            .output_shape(&input)
            .map_err(|e| Failure::Validation(format!("{c}: {e}")))?;
        rows.push((c, enc, shape));
    }
    let diverge = rows.windows(2).any(|w| w[0].2 != w[1].2);
    let value = json!({
        "input": input,
        "conventions": rows.iter().map(|(c, enc, shape)| json!({
            "convention": c.to_string(),
            "padding": enc.padding,
            "border": enc.border,
            "nnef": enc.to_nnef("y", "x"),
            "output_shape": shape,
        })).collect::<Vec<_>>(),
        "diverge": diverge,
    });
    emit(json, &value, || {
        let mut s = format!(
            "input {:?}, pool {kernel}x{kernel}, stride {stride}\n",
            input
        );
        for (c, enc, shape) in &rows {
            s += &format!("{c}:\n  {}\n  output {:?}\n", enc.to_nnef("y", "x"), shape);
        }
        s += if diverge {
            "the conventions DIVERGE: output shapes differ\n"
        } else {
            "same output shapes\n"
        };
        s
    });
    Ok(())
}

pub fn dot(files: &[PathBuf], out: Option<&Path>) -> Outcome {
    let (net, _) = net_of(files)?;
    let text = export_dot(&net);
    match out {
        Some(path) => write_file(path, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Random weights under `<out>/weights` and inputs under `<out>/inputs`.
pub fn gen(model: &Path, out: &Path, seed: u64) -> Outcome {
    let p = load_model(model)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (wdir, idir) = (out.join("weights"), out.join("inputs"));
    create_dir(&wdir)?;
    create_dir(&idir)?;
    for inst in p.instructions() {
        let dir = match inst.op {
            nnefx::Op::Variable => &wdir,
            nnefx::Op::External => &idir,
            _ => continue,
        };
        let name = inst.label().unwrap_or(&inst.result);
        let shape: Vec<usize> = inst
            .declared_shape()
            .unwrap_or(&[])
            .iter()
            .map(|&d| d.max(1) as usize)
            .collect();
        let t = Tensor::from_fn(&shape, |_| rng.gen_range(-1.0f32..1.0));
        write_tensor_file(&dir.join(format!("{name}.dat")), &t)?;
    }
    println!("wrote {} and {}", wdir.display(), idir.display());
    Ok(())
}
