use std::collections::{BTreeMap, HashMap};

use super::Assignment;
use crate::frontend::{Instruction, NnefProgram, Op};

/// Numbers groups `item1, item2, ...` in order of their first instruction.
fn numbered(compute: &[&Instruction], group: impl Fn(usize) -> usize) -> Assignment {
    let mut names: HashMap<usize, String> = HashMap::new();
    let mut items = Vec::new();
    let mut assignment = BTreeMap::new();
    for (i, inst) in compute.iter().enumerate() {
        let name = names.entry(group(i)).or_insert_with(|| {
            items.push(format!("item{}", items.len() + 1));
            items.last().expect("pushed").clone()
        });
        assignment.insert(inst.result.clone(), name.clone());
    }
    Assignment { items, assignment }
}

/// Consumers of each compute result among the compute instructions, by index.
fn consumers(compute: &[&Instruction]) -> Vec<Vec<usize>> {
    let index: HashMap<&str, usize> = compute
        .iter()
        .enumerate()
        .map(|(i, c)| (c.result.as_str(), i))
        .collect();
    let mut out = vec![Vec::new(); compute.len()];
    for (j, c) in compute.iter().enumerate() {
        for v in c.var_inputs() {
            if let Some(&i) = index.get(v) {
                if !out[i].contains(&j) {
                    out[i].push(j);
                }
            }
        }
    }
    out
}

fn compute_inputs(compute: &[&Instruction], j: usize) -> usize {
    let results: Vec<&str> = compute.iter().map(|c| c.result.as_str()).collect();
    let mut deps: Vec<&str> = compute[j]
        .var_inputs()
        .into_iter()
        .filter(|v| results.contains(v))
        .collect();
    deps.dedup();
    deps.len()
}

/// Branches leaving the first fork: each consumer of the forking variable
/// followed while the chain stays linear.
fn branch_parallel(compute: &[&Instruction], n: usize) -> Option<Assignment> {
    let cons = consumers(compute);
    let fork = (0..compute.len()).find(|&i| cons[i].len() >= 2)?;
    let mut group = vec![0usize; compute.len()];
    for (b, &start) in cons[fork].iter().enumerate() {
        let target = 1 + b % (n - 1);
        let mut cur = start;
        loop {
            if compute_inputs(compute, cur) != 1 {
                break;
            }
            group[cur] = target;
            match cons[cur].as_slice() {
                [next] => cur = *next,
                _ => break,
            }
        }
    }
    Some(numbered(compute, |i| group[i]))
}

/// Every instance of the most expensive layer kind on its own item.
fn offload(compute: &[&Instruction]) -> Option<Assignment> {
    let heavy = [Op::Conv, Op::Linear]
        .into_iter()
        .find(|op| compute.iter().any(|c| c.op == *op))?;
    if compute.iter().all(|c| c.op == heavy) {
        return None;
    }
    Some(numbered(compute, |i| usize::from(compute[i].op == heavy)))
}

fn contiguous(compute: &[&Instruction], n: usize) -> Assignment {
    let parts = n.min(compute.len()).max(1);
    let len = compute.len();
    numbered(compute, |i| i * parts / len.max(1))
}

/// Candidate assignments of `program` over at most `n_items` items:
/// branch-parallel (when the dataflow forks), off-loading of one layer kind,
/// then contiguous segments. Duplicates are dropped; `n_items == 1` yields the
/// single all-on-one assignment.
pub fn suggest_assignments(program: &NnefProgram, n_items: usize) -> Vec<Assignment> {
    let compute: Vec<&Instruction> = program
        .instructions
        .iter()
        .filter(|i| i.op.is_compute())
        .collect();
    if n_items == 0 || compute.is_empty() {
        return Vec::new();
    }
    if n_items == 1 {
        return vec![Assignment::single(program, "item1")];
    }
    let mut out: Vec<Assignment> = Vec::new();
    let candidates = [
        branch_parallel(&compute, n_items),
        if n_items >= 2 {
            offload(&compute)
        } else {
            None
        },
        Some(contiguous(&compute, n_items)),
    ];
    for a in candidates.into_iter().flatten() {
        if !out.contains(&a) {
            out.push(a);
        }
    }
    out
}
