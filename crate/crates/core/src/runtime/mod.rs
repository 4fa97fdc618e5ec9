//! Concurrent execution of item descriptions.
//!
//! Each item runs on its own thread, executing its instructions in order.
//! A `send_var` publishes into a write-once slot of the [`SharedStore`];
//! a `get_var` blocks until the slot is written. Every compute and sync
//! instruction is logged as a start/end pair, so the merged log can be
//! replayed against the coloured net.

mod barrier;
mod store;

use std::collections::{BTreeMap, HashMap};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frontend::{ItemProgram, Op, WeightStore};
use crate::petri::sync_transition_name;
use crate::tensor::{execute, EvalError, Tensor};
use crate::trace::{EventKind, Trace, TraceEvent};

pub use barrier::{run_barrier_schedule, BarrierPlan};
pub use store::SharedStore;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RuntimeError {
    #[error("deadlock: every running item is blocked ({})", describe_blocked(.blocked))]
    DeadlockDetected { blocked: Vec<(String, String)> },
    #[error("`{sync}` written twice (second writer `{item}`)")]
    DoubleWrite { sync: String, item: String },
    #[error("no input tensor for `{0}`")]
    MissingInput(String),
    #[error("item `{item}`: {error}")]
    Eval { item: String, error: Box<EvalError> },
    #[error("item set does not fit the barrier schedule: {0}")]
    ShapeUnsupported(String),
    #[error("run aborted after a failure in another item")]
    Aborted,
}

fn describe_blocked(blocked: &[(String, String)]) -> String {
    blocked
        .iter()
        .map(|(item, sync)| format!("{item} waits for {sync}"))
        .collect::<Vec<_>>()
        .join(", ")
}

/// One injected delay: sleep `delay_ms` once `after` has completed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoisePoint {
    /// A transition name, `get:<sync>`, `barrier<N>`, or `start`.
    pub after: String,
    pub delay_ms: u64,
}

/// Delays by item id.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NoiseConfig {
    pub delays: BTreeMap<String, NoisePoint>,
}

impl NoiseConfig {
    pub fn none() -> Self {
        NoiseConfig::default()
    }

    pub fn with(mut self, item: &str, after: &str, delay_ms: u64) -> Self {
        self.delays.insert(
            item.to_string(),
            NoisePoint {
                after: after.to_string(),
                delay_ms,
            },
        );
        self
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Name of the program point reached when `get_var` on `sync` returns.
    pub fn get_point(sync: &str) -> String {
        format!("get:{sync}")
    }
}

/// Outputs of a run and its merged trace.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub outputs: BTreeMap<String, Tensor>,
    pub trace: Trace,
    /// Rendezvous points passed, in order (barrier schedule only).
    pub rendezvous: Vec<String>,
}

/// Shared monotonic clock and event log.
pub(crate) struct Recorder {
    base: Instant,
    events: Mutex<Vec<TraceEvent>>,
}

impl Recorder {
    pub(crate) fn new() -> Self {
        Recorder {
            base: Instant::now(),
            events: Mutex::new(Vec::new()),
        }
    }

    pub(crate) fn log(&self, item: &str, transition: &str, kind: EventKind) {
        let mut events = self.events.lock().expect("trace lock");
        // read the clock under the lock so the log is in timestamp order
        let t_ns = self.base.elapsed().as_nanos() as u64;
        events.push(TraceEvent {
            item: item.to_string(),
            transition: transition.to_string(),
            kind,
            t_ns,
        });
    }

    pub(crate) fn into_trace(self) -> Trace {
        Trace::new(self.events.into_inner().expect("trace lock"))
    }
}

/// Per-item execution state.
pub(crate) struct Worker<'a> {
    pub item: &'a ItemProgram,
    pub env: HashMap<String, Tensor>,
    noise: Option<&'a NoisePoint>,
    noise_done: bool,
}

impl<'a> Worker<'a> {
    pub(crate) fn new(item: &'a ItemProgram, noise: &'a NoiseConfig) -> Self {
        Worker {
            item,
            env: HashMap::new(),
            noise: noise.delays.get(&item.item_id),
            noise_done: false,
        }
    }

    /// Sleeps if this item's noise point is `point` and has not fired yet.
    pub(crate) fn reached(&mut self, point: &str) {
        if let Some(n) = self.noise {
            if !self.noise_done && n.after == point {
                self.noise_done = true;
                thread::sleep(Duration::from_millis(n.delay_ms));
            }
        }
    }

    /// Executes instructions `range` of the item.
    pub(crate) fn run(
        &mut self,
        range: std::ops::Range<usize>,
        inputs: &BTreeMap<String, Tensor>,
        weights: &WeightStore,
        store: &SharedStore,
        rec: &Recorder,
    ) -> Result<(), RuntimeError> {
        let id = self.item.item_id.as_str();
        for index in range {
            let inst = &self.item.instructions[index];
            match inst.op {
                Op::VariableSync => {}
                Op::GetVar => {
                    let (_, sync) = inst.get_var_parts().unwrap_or_default();
                    let value = store.read(sync, id)?;
                    self.env.insert(inst.result.clone(), value);
                    self.reached(&NoiseConfig::get_point(sync));
                }
                Op::SendVar => {
                    let (_, data) = inst.send_var_parts().unwrap_or((&[], ""));
                    let name = sync_transition_name(&inst.result);
                    rec.log(id, &name, EventKind::Start);
                    let value = self
                        .env
                        .get(data)
                        .cloned()
                        .ok_or_else(|| RuntimeError::Eval {
                            item: id.to_string(),
                            error: Box::new(EvalError {
                                index,
                                result: inst.result.clone(),
                                kind: crate::tensor::EvalErrorKind::Undefined(data.to_string()),
                            }),
                        })?;
                    store.publish(&inst.result, value, id)?;
                    rec.log(id, &name, EventKind::End);
                    self.reached(&name);
                }
                op => {
                    let compute = op.is_compute();
                    if compute {
                        rec.log(id, &inst.result, EventKind::Start);
                    }
                    let value =
                        execute(inst, |n| self.env.get(n), inputs, weights).map_err(|kind| {
                            match kind {
                                crate::tensor::EvalErrorKind::MissingInput(n) => {
                                    RuntimeError::MissingInput(n)
                                }
                                kind => RuntimeError::Eval {
                                    item: id.to_string(),
                                    error: Box::new(EvalError {
                                        index,
                                        result: inst.result.clone(),
                                        kind,
                                    }),
                                },
                            }
                        })?;
                    self.env.insert(inst.result.clone(), value);
                    if compute {
                        rec.log(id, &inst.result, EventKind::End);
                        self.reached(&inst.result);
                    }
                }
            }
        }
        Ok(())
    }

    /// Graph outputs computed by this item.
    pub(crate) fn outputs(&self) -> Vec<(String, Tensor)> {
        self.item
            .graph_outputs
            .iter()
            .filter(|o| {
                self.item
                    .instructions
                    .iter()
                    .any(|i| i.op.is_compute() && &i.result == *o)
            })
            .filter_map(|o| self.env.get(o).map(|t| (o.clone(), t.clone())))
            .collect()
    }
}

pub(crate) fn check_inputs(
    items: &[ItemProgram],
    inputs: &BTreeMap<String, Tensor>,
) -> Result<(), RuntimeError> {
    for item in items {
        for inst in item.instructions.iter().filter(|i| i.op == Op::External) {
            if !inputs.contains_key(&inst.result) {
                return Err(RuntimeError::MissingInput(inst.result.clone()));
            }
        }
    }
    Ok(())
}

/// Picks the error to report when several workers fail: the root cause
/// rather than the aborts it triggered.
pub(crate) fn first_error(results: Vec<Result<(), RuntimeError>>) -> Result<(), RuntimeError> {
    let mut errors: Vec<RuntimeError> = results.into_iter().filter_map(Result::err).collect();
    errors.sort_by_key(|e| matches!(e, RuntimeError::Aborted));
    match errors.into_iter().next() {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

/// Runs every item on its own thread until all finish.
pub fn run_items(
    items: &[ItemProgram],
    inputs: &BTreeMap<String, Tensor>,
    weights: &WeightStore,
    noise: &NoiseConfig,
) -> Result<RunOutput, RuntimeError> {
    check_inputs(items, inputs)?;
    let store = SharedStore::new(items.len());
    let rec = Recorder::new();
    let mut outputs = BTreeMap::new();
    let results: Vec<Result<Vec<(String, Tensor)>, RuntimeError>> = thread::scope(|s| {
        let handles: Vec<_> = items
            .iter()
            .map(|item| {
                let (store, rec) = (&store, &rec);
                s.spawn(move || {
                    let mut w = Worker::new(item, noise);
                    w.reached("start");
                    let r = w.run(0..item.instructions.len(), inputs, weights, store, rec);
                    match r {
                        Ok(()) => {
                            store.finish();
                            Ok(w.outputs())
                        }
                        Err(e) => {
                            store.abort();
                            Err(e)
                        }
                    }
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("worker panicked"))
            .collect()
    });
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
    Ok(RunOutput {
        outputs,
        trace: rec.into_trace(),
        rendezvous: Vec::new(),
    })
}
