use std::collections::{BTreeMap, HashMap};
use std::sync::{Condvar, Mutex};

use super::RuntimeError;
use crate::tensor::Tensor;

struct State {
    slots: HashMap<String, (String, Tensor)>,
    running: usize,
    /// item -> sync it is waiting for
    blocked: BTreeMap<String, String>,
    failed: Option<RuntimeError>,
}

impl State {
    fn check_deadlock(&mut self) -> bool {
        if self.failed.is_none() && self.running > 0 && self.blocked.len() == self.running {
            self.failed = Some(RuntimeError::DeadlockDetected {
                blocked: self
                    .blocked
                    .iter()
                    .map(|(i, s)| (i.clone(), s.clone()))
                    .collect(),
            });
            return true;
        }
        false
    }
}

/// Write-once slots keyed by sync name. Reads block until the slot is
/// written; when every running worker is blocked, all reads fail with
/// [`RuntimeError::DeadlockDetected`].
pub struct SharedStore {
    state: Mutex<State>,
    cv: Condvar,
}

impl SharedStore {
    pub fn new(workers: usize) -> Self {
        SharedStore {
            state: Mutex::new(State {
                slots: HashMap::new(),
                running: workers,
                blocked: BTreeMap::new(),
                failed: None,
            }),
            cv: Condvar::new(),
        }
    }

    pub fn publish(&self, sync: &str, value: Tensor, item: &str) -> Result<(), RuntimeError> {
        let mut st = self.state.lock().expect("store lock");
        if st.slots.contains_key(sync) {
            return Err(RuntimeError::DoubleWrite {
                sync: sync.to_string(),
                item: item.to_string(),
            });
        }
        st.slots.insert(sync.to_string(), (item.to_string(), value));
        // readers of this slot are runnable from now on, even before they wake
        st.blocked.retain(|_, s| s != sync);
        self.cv.notify_all();
        Ok(())
    }

    pub fn read(&self, sync: &str, item: &str) -> Result<Tensor, RuntimeError> {
        let mut st = self.state.lock().expect("store lock");
        loop {
            if let Some((_, t)) = st.slots.get(sync) {
                let t = t.clone();
                st.blocked.remove(item);
                return Ok(t);
            }
            if let Some(e) = &st.failed {
                return Err(e.clone());
            }
            st.blocked.insert(item.to_string(), sync.to_string());
            if st.check_deadlock() {
                self.cv.notify_all();
                continue;
            }
            st = self.cv.wait(st).expect("store lock");
        }
    }

    pub fn is_written(&self, sync: &str) -> bool {
        self.state
            .lock()
            .expect("store lock")
            .slots
            .contains_key(sync)
    }

    /// A worker completed normally.
    pub fn finish(&self) {
        let mut st = self.state.lock().expect("store lock");
        st.running -= 1;
        if st.check_deadlock() {
            self.cv.notify_all();
        }
    }

    /// A worker failed; wake and fail every blocked reader.
    pub fn abort(&self) {
        let mut st = self.state.lock().expect("store lock");
        st.running -= 1;
        if st.failed.is_none() {
            st.failed = Some(RuntimeError::Aborted);
        }
        self.cv.notify_all();
    }
}
