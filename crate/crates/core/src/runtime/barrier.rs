//! The stricter schedule: one coordinator item runs a head up to its first
//! `get_var`, publishing what the branches need; the other items run as
//! branches; the coordinator then runs its tail. Every item meets at three
//! barriers and the run ends with a join:
//!
//! ```text
//! barrier1 -> coordinator head -> barrier2 -> branches -> barrier3 -> coordinator tail -> join
//! ```

use std::collections::{BTreeMap, HashSet};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Barrier, Mutex};
use std::thread;

use super::{
    check_inputs, first_error, NoiseConfig, Recorder, RunOutput, RuntimeError, SharedStore, Worker,
};
use crate::frontend::{ItemProgram, Op, WeightStore};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BarrierPlan {
    pub coordinator: usize,
    /// Index of the coordinator's first `get_var` (its head is everything before).
    pub head_end: usize,
    pub branches: Vec<usize>,
}

impl BarrierPlan {
    pub fn analyze(items: &[ItemProgram]) -> Result<Self, RuntimeError> {
        let unsupported = |m: String| Err(RuntimeError::ShapeUnsupported(m));
        let owners: Vec<usize> = (0..items.len())
            .filter(|&i| !items[i].outputs.is_empty())
            .collect();
        let &[coordinator] = owners.as_slice() else {
            return unsupported(format!(
                "expected one item computing the graph outputs, found {}",
                owners.len()
            ));
        };
        let coord = &items[coordinator];
        let head_end = coord
            .instructions
            .iter()
            .position(|i| i.op == Op::GetVar)
            .unwrap_or(coord.instructions.len());
        if coord.instructions[head_end..]
            .iter()
            .any(|i| i.op == Op::SendVar)
        {
            return unsupported(format!("`{}` sends after its first get_var", coord.item_id));
        }
        let head_sends: HashSet<&str> = coord.instructions[..head_end]
            .iter()
            .filter(|i| i.op == Op::SendVar)
            .map(|i| i.result.as_str())
            .collect();
        let branches: Vec<usize> = (0..items.len()).filter(|&i| i != coordinator).collect();
        for &b in &branches {
            let item = &items[b];
            for inst in &item.instructions {
                if let Some((source, sync)) = inst.get_var_parts() {
                    if source != coord.item_id || !head_sends.contains(sync) {
                        return unsupported(format!(
                            "`{}` reads `{sync}` from `{source}`, not from the coordinator head",
                            item.item_id
                        ));
                    }
                }
                if let Some((dest, _)) = inst.send_var_parts() {
                    if dest.iter().any(|d| *d != coord.item_id) {
                        return unsupported(format!(
                            "`{}` sends `{}` to another branch",
                            item.item_id, inst.result
                        ));
                    }
                }
            }
        }
        Ok(BarrierPlan {
            coordinator,
            head_end,
            branches,
        })
    }
}

/// Runs the item set under the barrier discipline. Fails with
/// [`RuntimeError::ShapeUnsupported`] when the set has no such shape.
pub fn run_barrier_schedule(
    items: &[ItemProgram],
    inputs: &BTreeMap<String, Tensor>,
    weights: &WeightStore,
    noise: &NoiseConfig,
) -> Result<RunOutput, RuntimeError> {
    let plan = BarrierPlan::analyze(items)?;
    check_inputs(items, inputs)?;
    let store = SharedStore::new(items.len());
    let rec = Recorder::new();
    let barriers = [
        Barrier::new(items.len()),
        Barrier::new(items.len()),
        Barrier::new(items.len()),
    ];
    let failed = AtomicBool::new(false);
    let rendezvous = Mutex::new(Vec::new());

    let results: Vec<Result<Vec<(String, Tensor)>, RuntimeError>> = thread::scope(|s| {
        let handles: Vec<_> = items
            .iter()
            .enumerate()
            .map(|(k, item)| {
                let (store, rec, barriers, failed, rendezvous, plan) =
                    (&store, &rec, &barriers, &failed, &rendezvous, &plan);
                s.spawn(move || {
                    let mut w = Worker::new(item, noise);
                    let mut status = Ok(());
                    let is_coord = k == plan.coordinator;
                    let n = item.instructions.len();
                    let mut step = |w: &mut Worker, range: std::ops::Range<usize>| {
                        if status.is_ok() && !failed.load(Ordering::SeqCst) {
                            status = w.run(range, inputs, weights, store, rec);
                            if status.is_err() {
                                failed.store(true, Ordering::SeqCst);
                            }
                        }
                    };
                    w.reached("start");
                    for (b, barrier) in barriers.iter().enumerate() {
                        let name = format!("barrier{}", b + 1);
                        if barrier.wait().is_leader() {
                            rendezvous
                                .lock()
                                .expect("rendezvous lock")
                                .push(name.clone());
                        }
                        w.reached(&name);
                        match (b, is_coord) {
                            (0, true) => step(&mut w, 0..plan.head_end),
                            (1, false) => step(&mut w, 0..n),
                            (2, true) => step(&mut w, plan.head_end..n),
                            _ => {}
                        }
                    }
                    store.finish();
                    status.map(|()| w.outputs())
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("worker panicked"))
            .collect()
    });

    let mut outputs = BTreeMap::new();
    let mut status = Vec::new();
    for r in results {
        match r {
            Ok(outs) => {
                outputs.extend(outs);
                status.push(Ok(()));
            }
            Err(e) => status.push(Err(e)),
        }
    }
    first_error(status)?;
    let mut rendezvous = rendezvous.into_inner().expect("rendezvous lock");
    rendezvous.push("join".to_string());
    Ok(RunOutput {
        outputs,
        trace: rec.into_trace(),
        rendezvous,
    })
}
