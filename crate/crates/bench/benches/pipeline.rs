use std::collections::BTreeMap;
use std::path::Path;

use criterion::{black_box, criterion_group, criterion_main, Criterion};
use nnefx::petri::{check_equivalence, enumerate_paths, EnumerationCap};
use nnefx::{
    evaluate, parse_program, run_items, split, translate, translate_multi, Assignment, NnefProgram,
    NoiseConfig, Op, Tensor, WeightStore,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn corpus(name: &str) -> String {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../corpus")
        .join(name);
    std::fs::read_to_string(path).expect("corpus file")
}

fn instance(p: &NnefProgram) -> (BTreeMap<String, Tensor>, WeightStore) {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut next = move |_| rng.gen_range(-1.0f32..1.0);
    let mut inputs = BTreeMap::new();
    let mut weights = WeightStore::new();
    for inst in &p.instructions {
        let shape: Vec<usize> = match inst.declared_shape() {
            Some(s) => s.iter().map(|&d| d as usize).collect(),
            None => continue,
        };
        match inst.op {
            Op::External => {
                inputs.insert(inst.result.clone(), Tensor::from_fn(&shape, &mut next));
            }
            Op::Variable => weights.insert(
                inst.label().expect("label"),
                Tensor::from_fn(&shape, &mut next),
            ),
            _ => {}
        }
    }
    (inputs, weights)
}

fn pipeline(c: &mut Criterion) {
    let lenet_text = corpus("lenet.nnef");
    let lenet = parse_program(&lenet_text).unwrap();
    let branched = parse_program(&corpus("branched.nnef")).unwrap();
    let assignment = Assignment::from_json(&corpus("branched.assignment.json")).unwrap();
    let items = split(&branched, &assignment).unwrap();
    let (lenet_inputs, lenet_weights) = instance(&lenet);
    let (inputs, weights) = instance(&branched);

    c.bench_function("parse lenet", |b| {
        b.iter(|| parse_program(black_box(&lenet_text)).unwrap())
    });
    c.bench_function("evaluate lenet", |b| {
        b.iter(|| evaluate(&lenet, &lenet_inputs, &lenet_weights).unwrap())
    });
    c.bench_function("paths layer_parallel", |b| {
        let net = translate(&parse_program(&corpus("layer_parallel.nnef")).unwrap());
        b.iter(|| enumerate_paths(&net, EnumerationCap::default()).unwrap())
    });
    c.bench_function("equivalence branched", |b| {
        let original = translate(&branched);
        let coloured = translate_multi(&items).unwrap();
        b.iter(|| check_equivalence(&coloured, &original, 1_000_000).unwrap())
    });
    c.bench_function("run_items branched", |b| {
        b.iter(|| run_items(&items, &inputs, &weights, &NoiseConfig::none()).unwrap())
    });
}

criterion_group!(benches, pipeline);
criterion_main!(benches);
