//! Replay of a recorded trace as a firing sequence.
//!
//! Start events are fired in timestamp order. Events sharing a timestamp
//! carry no ordering information, so every order of such a group is tried.
//! A prefix is kept only if the final marking stays reachable from it.

use std::collections::{HashMap, HashSet};

use serde::Serialize;

use super::net::{Marking, PetriNet, TransitionId};
use super::PetriError;
use crate::trace::{EventKind, Trace};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum ViolationReason {
    /// The transition belongs to another item.
    WrongItem {
        owner: String,
    },
    DuplicateStart,
    DuplicateEnd,
    EndWithoutStart,
    /// The item was already running another transition.
    Overlap {
        running: String,
    },
    /// Some input place lacks a token.
    NotFireable,
    /// Fireable, but no valid path continues from the resulting marking.
    CannotComplete,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TraceViolation {
    /// Index of the offending event in the trace.
    pub event: usize,
    pub item: String,
    pub transition: String,
    #[serde(flatten)]
    pub reason: ViolationReason,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TraceVerdict {
    /// The start events form a prefix of some valid path.
    pub accepted: bool,
    /// The replay ends in the final marking.
    pub reached_final: bool,
    /// Transitions fired, in replay order (the longest accepted prefix on rejection).
    pub fired: Vec<String>,
    pub violation: Option<TraceViolation>,
}

impl TraceVerdict {
    fn reject(fired: Vec<String>, violation: TraceViolation) -> Self {
        TraceVerdict {
            accepted: false,
            reached_final: false,
            fired,
            violation: Some(violation),
        }
    }
}

struct Replay<'a> {
    net: &'a PetriNet,
    groups: Vec<Vec<(usize, TransitionId)>>,
    live: HashMap<Marking, bool>,
    failed: HashSet<(usize, Vec<bool>, Marking)>,
    best: (Vec<TransitionId>, Option<(usize, ViolationReason)>),
}

impl Replay<'_> {
    fn can_finish(&mut self, m: &Marking) -> bool {
        if let Some(&v) = self.live.get(m) {
            return v;
        }
        let v = self.net.is_final(m)
            || self.net.fireable(m).into_iter().any(|t| {
                let next = self.net.fire(m, t).expect("fireable");
                self.can_finish(&next)
            });
        self.live.insert(m.clone(), v);
        v
    }

    /// Extends `fired` through group `g` (with `used` already fired from it)
    /// and every later group.
    fn search(
        &mut self,
        g: usize,
        used: Vec<bool>,
        m: Marking,
        fired: &mut Vec<TransitionId>,
    ) -> bool {
        if g == self.groups.len() {
            return true;
        }
        if used.iter().all(|&u| u) {
            let next_used = self
                .groups
                .get(g + 1)
                .map_or_else(Vec::new, |n| vec![false; n.len()]);
            return self.search(g + 1, next_used, m, fired);
        }
        let key = (g, used.clone(), m.clone());
        if self.failed.contains(&key) {
            return false;
        }
        for i in 0..used.len() {
            if used[i] {
                continue;
            }
            let (event, t) = self.groups[g][i];
            let outcome = if !self.net.is_enabled(&m, t) {
                Err(ViolationReason::NotFireable)
            } else {
                let next = self.net.fire(&m, t).expect("enabled");
                if self.can_finish(&next) {
                    Ok(next)
                } else {
                    Err(ViolationReason::CannotComplete)
                }
            };
            match outcome {
                Ok(next) => {
                    fired.push(t);
                    let mut u = used.clone();
                    u[i] = true;
                    if self.search(g, u, next, fired) {
                        return true;
                    }
                    fired.pop();
                }
                Err(reason) => {
                    if self.best.1.is_none() || fired.len() > self.best.0.len() {
                        self.best = (fired.clone(), Some((event, reason)));
                    }
                }
            }
        }
        self.failed.insert(key);
        false
    }
}

/// Checks a trace against a net (plain or coloured). Events must name
/// transitions of the net.
pub fn validate_trace(net: &PetriNet, trace: &Trace) -> Result<TraceVerdict, PetriError> {
    let coloured = net.colours.len() > 1 || net.transitions.iter().any(|t| t.item.is_some());
    let mut ids = Vec::with_capacity(trace.len());
    for e in &trace.events {
        let t = net
            .transition(&e.transition)
            .ok_or_else(|| PetriError::UnknownTransition(e.transition.clone()))?;
        ids.push(t);
    }
    let violation = |event: usize, reason: ViolationReason| TraceViolation {
        event,
        item: trace.events[event].item.clone(),
        transition: trace.events[event].transition.clone(),
        reason,
    };

    // well-formedness, in time order
    let mut order: Vec<usize> = (0..trace.len()).collect();
    order.sort_by_key(|&i| (trace.events[i].t_ns, i));
    let mut starts: HashSet<(&str, &str)> = HashSet::new();
    let mut ends: HashSet<(&str, &str)> = HashSet::new();
    let mut running: HashMap<&str, &str> = HashMap::new();
    for &i in &order {
        let e = &trace.events[i];
        if coloured {
            if let Some(c) = net.transitions[ids[i]].item {
                if net.colours[c] != e.item {
                    let owner = net.colours[c].clone();
                    return Ok(TraceVerdict::reject(
                        Vec::new(),
                        violation(i, ViolationReason::WrongItem { owner }),
                    ));
                }
            }
        }
        let key = (e.item.as_str(), e.transition.as_str());
        let bad = match e.kind {
            EventKind::Start => {
                if !starts.insert(key) {
                    Some(ViolationReason::DuplicateStart)
                } else {
                    running
                        .insert(key.0, key.1)
                        .map(|r| ViolationReason::Overlap {
                            running: r.to_string(),
                        })
                }
            }
            EventKind::End => {
                if !starts.contains(&key) {
                    Some(ViolationReason::EndWithoutStart)
                } else if !ends.insert(key) {
                    Some(ViolationReason::DuplicateEnd)
                } else if running.get(key.0) != Some(&key.1) {
                    Some(ViolationReason::Overlap {
                        running: running.get(key.0).unwrap_or(&"").to_string(),
                    })
                } else {
                    running.remove(key.0);
                    None
                }
            }
        };
        if let Some(reason) = bad {
            return Ok(TraceVerdict::reject(Vec::new(), violation(i, reason)));
        }
    }

    // start events grouped by timestamp
    let mut groups: Vec<Vec<(usize, TransitionId)>> = Vec::new();
    let mut last_t = None;
    for &i in order
        .iter()
        .filter(|&&i| trace.events[i].kind == EventKind::Start)
    {
        let t_ns = trace.events[i].t_ns;
        if last_t != Some(t_ns) {
            groups.push(Vec::new());
            last_t = Some(t_ns);
        }
        groups.last_mut().expect("pushed").push((i, ids[i]));
    }

    let mut replay = Replay {
        net,
        groups,
        live: HashMap::new(),
        failed: HashSet::new(),
        best: (Vec::new(), None),
    };
    let mut fired = Vec::new();
    let first_used = replay
        .groups
        .first()
        .map_or_else(Vec::new, |g| vec![false; g.len()]);
    if !replay.can_finish(&net.initial) {
        // nothing can be accepted; blame the first start, if any
        let names = Vec::new();
        return Ok(match replay.groups.first() {
            Some(g) => {
                TraceVerdict::reject(names, violation(g[0].0, ViolationReason::CannotComplete))
            }
            None => TraceVerdict {
                accepted: false,
                reached_final: false,
                fired: names,
                violation: None,
            },
        });
    }
    let ok = replay.search(0, first_used, net.initial.clone(), &mut fired);
    let names = |ts: &[TransitionId]| {
        ts.iter()
            .map(|&t| net.transitions[t].name.clone())
            .collect::<Vec<_>>()
    };
    if ok {
        let mut m = net.initial.clone();
        for &t in &fired {
            m = net.fire(&m, t)?;
        }
        return Ok(TraceVerdict {
            accepted: true,
            reached_final: net.is_final(&m),
            fired: names(&fired),
            violation: None,
        });
    }
    let (prefix, Some((event, reason))) = replay.best.clone() else {
        unreachable!("a failed search records where it stopped");
    };
    Ok(TraceVerdict::reject(
        names(&prefix),
        violation(event, reason),
    ))
}
