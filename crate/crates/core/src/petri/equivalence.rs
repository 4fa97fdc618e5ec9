//! Language equivalence of a coloured net and an original net over the
//! compute-transition names, sync transitions being invisible.
//!
//! Both marking graphs are trimmed to the markings that can still reach
//! the final marking, so the languages compared are exactly the valid
//! paths. The coloured side is made deterministic by a subset construction
//! over sync-closed sets; the original side is already deterministic since
//! transition names are unique. A breadth-first walk of the product then
//! compares acceptance and enabled labels state by state.

use std::collections::{BTreeSet, HashMap, VecDeque};

use serde::Serialize;

use super::graph::MarkingGraph;
use super::net::{ColouredPetriNet, PetriNet};
use super::PetriError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING-KEBAB-CASE")]
pub enum Verdict {
    Equivalent,
    NotEquivalent,
}

/// The net in which the counterexample is a valid path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Original,
    Coloured,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Counterexample {
    /// Compute-transition names, a valid path of `valid_in` only.
    pub sequence: Vec<String>,
    pub valid_in: Side,
    /// Length of the common prefix before the nets disagree.
    pub diverges_at: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EquivalenceReport {
    pub verdict: Verdict,
    pub counterexample: Option<Counterexample>,
    pub original_markings: usize,
    pub coloured_markings: usize,
    pub product_states: usize,
}

struct Trimmed<'a> {
    net: &'a PetriNet,
    graph: MarkingGraph,
    live: Vec<bool>,
}

impl<'a> Trimmed<'a> {
    fn new(net: &'a PetriNet, max_markings: usize) -> Result<Self, PetriError> {
        let graph = MarkingGraph::build(net, max_markings)?;
        let live = graph.co_reachable(net);
        Ok(Trimmed { net, graph, live })
    }

    fn label(&self, t: usize) -> Option<&'a str> {
        let tr = &self.net.transitions[t];
        (!tr.is_sync()).then_some(tr.name.as_str())
    }

    fn is_final(&self, n: usize) -> bool {
        self.net.is_final(&self.graph.markings[n])
    }

    /// Live nodes reachable from `nodes` through sync transitions only.
    fn closure(&self, nodes: impl IntoIterator<Item = usize>) -> Vec<usize> {
        let mut set: BTreeSet<usize> = BTreeSet::new();
        let mut stack: Vec<usize> = nodes.into_iter().filter(|&n| self.live[n]).collect();
        while let Some(n) = stack.pop() {
            if !set.insert(n) {
                continue;
            }
            for &(t, m) in &self.graph.edges[n] {
                if self.label(t).is_none() && self.live[m] {
                    stack.push(m);
                }
            }
        }
        set.into_iter().collect()
    }

    fn enabled(&self, set: &[usize]) -> BTreeSet<&'a str> {
        set.iter()
            .flat_map(|&n| self.graph.edges[n].iter())
            .filter(|&&(_, m)| self.live[m])
            .filter_map(|&(t, _)| self.label(t))
            .collect()
    }

    fn step(&self, set: &[usize], label: &str) -> Vec<usize> {
        let next: Vec<usize> = set
            .iter()
            .flat_map(|&n| self.graph.edges[n].iter())
            .filter(|&&(t, m)| self.live[m] && self.label(t) == Some(label))
            .map(|&(_, m)| m)
            .collect();
        self.closure(next)
    }

    fn accepts(&self, set: &[usize]) -> bool {
        set.iter().any(|&n| self.is_final(n))
    }

    /// Labels of a shortest path from any node of `set` to the final marking.
    fn completion(&self, set: &[usize]) -> Vec<String> {
        let mut parent: HashMap<usize, Option<(usize, usize)>> = HashMap::new();
        let mut queue = VecDeque::new();
        for &n in set {
            parent.insert(n, None);
            queue.push_back(n);
        }
        while let Some(n) = queue.pop_front() {
            if self.is_final(n) {
                let mut labels = Vec::new();
                let mut cur = n;
                while let Some(&Some((prev, t))) = parent.get(&cur) {
                    if let Some(l) = self.label(t) {
                        labels.push(l.to_string());
                    }
                    cur = prev;
                }
                labels.reverse();
                return labels;
            }
            for &(t, m) in &self.graph.edges[n] {
                if self.live[m] && !parent.contains_key(&m) {
                    parent.insert(m, Some((n, t)));
                    queue.push_back(m);
                }
            }
        }
        Vec::new()
    }
}

/// Decides whether the valid paths of `coloured`, with sync transitions
/// removed, are exactly the valid paths of `original`.
pub fn check_equivalence(
    coloured: &ColouredPetriNet,
    original: &PetriNet,
    max_markings: usize,
) -> Result<EquivalenceReport, PetriError> {
    let orig = Trimmed::new(original, max_markings)?;
    let col = Trimmed::new(&coloured.net, max_markings)?;

    type State = (Vec<usize>, Vec<usize>);
    let start: State = (orig.closure([0]), col.closure([0]));
    let mut index: HashMap<State, usize> = HashMap::new();
    let mut states: Vec<State> = vec![start.clone()];
    let mut parent: Vec<Option<(usize, String)>> = vec![None];
    index.insert(start, 0);
    let mut queue = VecDeque::from([0usize]);

    let prefix_of = |parent: &[Option<(usize, String)>], mut s: usize| {
        let mut seq = Vec::new();
        while let Some((p, l)) = &parent[s] {
            seq.push(l.clone());
            s = *p;
        }
        seq.reverse();
        seq
    };

    while let Some(s) = queue.pop_front() {
        let (o, c) = states[s].clone();
        let mismatch = if orig.accepts(&o) != col.accepts(&c) {
            let valid_in = if orig.accepts(&o) {
                Side::Original
            } else {
                Side::Coloured
            };
            Some((Vec::new(), valid_in))
        } else {
            let eo = orig.enabled(&o);
            let ec = col.enabled(&c);
            if let Some(&l) = eo.difference(&ec).next() {
                let mut tail = vec![l.to_string()];
                tail.extend(orig.completion(&orig.step(&o, l)));
                Some((tail, Side::Original))
            } else if let Some(&l) = ec.difference(&eo).next() {
                let mut tail = vec![l.to_string()];
                tail.extend(col.completion(&col.step(&c, l)));
                Some((tail, Side::Coloured))
            } else {
                for l in eo {
                    let next = (orig.step(&o, l), col.step(&c, l));
                    if !index.contains_key(&next) {
                        index.insert(next.clone(), states.len());
                        states.push(next);
                        parent.push(Some((s, l.to_string())));
                        queue.push_back(states.len() - 1);
                    }
                }
                None
            }
        };
        if let Some((tail, valid_in)) = mismatch {
            let mut sequence = prefix_of(&parent, s);
            let diverges_at = sequence.len();
            sequence.extend(tail);
            return Ok(EquivalenceReport {
                verdict: Verdict::NotEquivalent,
                counterexample: Some(Counterexample {
                    sequence,
                    valid_in,
                    diverges_at,
                }),
                original_markings: orig.graph.len(),
                coloured_markings: col.graph.len(),
                product_states: states.len(),
            });
        }
    }
    Ok(EquivalenceReport {
        verdict: Verdict::Equivalent,
        counterexample: None,
        original_markings: orig.graph.len(),
        coloured_markings: col.graph.len(),
        product_states: states.len(),
    })
}
