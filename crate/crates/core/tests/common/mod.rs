#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;

use nnefx::{parse_program, NnefProgram, Op, Tensor, WeightStore};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const CORPUS: [&str; 4] = ["lenet", "branched", "two_heads", "layer_parallel"];

pub fn corpus_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../corpus")
        .join(name)
}

pub fn corpus_text(name: &str) -> String {
    std::fs::read_to_string(corpus_path(&format!("{name}.nnef"))).expect("corpus file")
}

pub fn corpus(name: &str) -> NnefProgram {
    parse_program(&corpus_text(name)).expect("corpus parses")
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    Tensor::from_fn(shape, |_| rng.gen_range(-1.0f32..1.0))
}

fn declared(inst: &nnefx::Instruction) -> Vec<usize> {
    inst.declared_shape()
        .expect("declared shape")
        .iter()
        .map(|&d| d as usize)
        .collect()
}

/// Random weights and inputs for every declaration of `p`.
pub fn random_instance(p: &NnefProgram, seed: u64) -> (BTreeMap<String, Tensor>, WeightStore) {
    let mut rng = rng(seed);
    let mut inputs = BTreeMap::new();
    let mut weights = WeightStore::new();
    for inst in &p.instructions {
        match inst.op {
            Op::External => {
                inputs.insert(
                    inst.result.clone(),
                    random_tensor(&mut rng, &declared(inst)),
                );
            }
            Op::Variable => {
                weights.insert(
                    inst.label().expect("label"),
                    random_tensor(&mut rng, &declared(inst)),
                );
            }
            _ => {}
        }
    }
    (inputs, weights)
}

/// Number of orders in which the compute instructions of `p` can run, each
/// after the instructions producing its inputs: the count of linear
/// extensions of the dependency order, by memoized search over done-sets.
pub fn linear_extensions(p: &NnefProgram) -> u64 {
    let compute: Vec<&nnefx::Instruction> = p
        .instructions
        .iter()
        .filter(|i| i.op.is_compute())
        .collect();
    assert!(compute.len() <= 63);
    let index: HashMap<&str, usize> = compute
        .iter()
        .enumerate()
        .map(|(k, i)| (i.result.as_str(), k))
        .collect();
    let deps: Vec<u64> = compute
        .iter()
        .map(|i| {
            i.var_inputs()
                .iter()
                .filter_map(|v| index.get(v))
                .fold(0u64, |m, &k| m | 1 << k)
        })
        .collect();
    fn count(done: u64, deps: &[u64], memo: &mut HashMap<u64, u64>) -> u64 {
        if done.count_ones() as usize == deps.len() {
            return 1;
        }
        if let Some(&c) = memo.get(&done) {
            return c;
        }
        let mut total = 0;
        for (k, &d) in deps.iter().enumerate() {
            if done & (1 << k) == 0 && d & !done == 0 {
                total += count(done | 1 << k, deps, memo);
            }
        }
        memo.insert(done, total);
        total
    }
    count(0, &deps, &mut HashMap::new())
}

/// Direct float64 cross-correlation over a `[1, c, h, w]` input.
pub fn conv_oracle(
    x: &Tensor,
    k: &Tensor,
    b: &Tensor,
    stride: (usize, usize),
    pad: (usize, usize, usize, usize),
) -> Vec<f64> {
    let s = x.shape();
    let (c, h, w) = (s[1], s[2], s[3]);
    let f = k.shape();
    let (oc, kh, kw) = (f[0], f[2], f[3]);
    let (top, bottom, left, right) = pad;
    let oh = (h + top + bottom - kh) / stride.0 + 1;
    let ow = (w + left + right - kw) / stride.1 + 1;
    let at = |ci: usize, y: isize, xx: isize| -> f64 {
        if y < 0 || xx < 0 || y as usize >= h || xx as usize >= w {
            0.0
        } else {
            x.data()[(ci * h + y as usize) * w + xx as usize] as f64
        }
    };
    let mut out = Vec::new();
    for o in 0..oc {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut acc = b.data()[o] as f64;
                for ci in 0..c {
                    for ky in 0..kh {
                        for kx in 0..kw {
                            let y = (oy * stride.0 + ky) as isize - top as isize;
                            let xx = (ox * stride.1 + kx) as isize - left as isize;
                            acc +=
                                at(ci, y, xx) * k.data()[((o * c + ci) * kh + ky) * kw + kx] as f64;
                        }
                    }
                }
                out.push(acc);
            }
        }
    }
    out
}
