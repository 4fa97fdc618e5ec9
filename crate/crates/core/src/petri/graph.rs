use std::collections::{HashMap, VecDeque};

use serde::Serialize;
use serde_json::json;

use super::net::{Marking, PetriNet, TransitionId};
use super::PetriError;

/// Bounds on exhaustive exploration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnumerationCap {
    pub paths: u64,
    pub markings: usize,
}

impl Default for EnumerationCap {
    fn default() -> Self {
        EnumerationCap {
            paths: 100_000,
            markings: 1_000_000,
        }
    }
}

/// Reachable markings of a net (node 0 is the initial marking) with one
/// edge per enabled transition.
#[derive(Debug, Clone)]
pub struct MarkingGraph {
    pub markings: Vec<Marking>,
    pub edges: Vec<Vec<(TransitionId, usize)>>,
}

impl MarkingGraph {
    /// Breadth-first exploration, failing once more than `max_markings`
    /// markings are discovered.
    pub fn build(net: &PetriNet, max_markings: usize) -> Result<Self, PetriError> {
        let mut index: HashMap<Marking, usize> = HashMap::new();
        let mut markings = vec![net.initial.clone()];
        let mut edges: Vec<Vec<(TransitionId, usize)>> = vec![Vec::new()];
        index.insert(net.initial.clone(), 0);
        let mut queue = VecDeque::from([0usize]);
        while let Some(n) = queue.pop_front() {
            for t in net.fireable(&markings[n]) {
                let next = net.fire(&markings[n], t)?;
                let id = match index.get(&next) {
                    Some(&id) => id,
                    None => {
                        if markings.len() >= max_markings {
                            return Err(PetriError::CapExceeded {
                                markings: markings.len(),
                                paths: 0,
                            });
                        }
                        let id = markings.len();
                        index.insert(next.clone(), id);
                        markings.push(next);
                        edges.push(Vec::new());
                        queue.push_back(id);
                        id
                    }
                };
                edges[n].push((t, id));
            }
        }
        Ok(MarkingGraph { markings, edges })
    }

    pub fn len(&self) -> usize {
        self.markings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.markings.is_empty()
    }

    /// Nodes from which the final marking is reachable.
    pub fn co_reachable(&self, net: &PetriNet) -> Vec<bool> {
        let mut preds: Vec<Vec<usize>> = vec![Vec::new(); self.len()];
        for (n, out) in self.edges.iter().enumerate() {
            for &(_, m) in out {
                preds[m].push(n);
            }
        }
        let mut seen = vec![false; self.len()];
        let mut stack: Vec<usize> = (0..self.len())
            .filter(|&n| net.is_final(&self.markings[n]))
            .collect();
        for &n in &stack {
            seen[n] = true;
        }
        while let Some(n) = stack.pop() {
            for &p in &preds[n] {
                if !seen[p] {
                    seen[p] = true;
                    stack.push(p);
                }
            }
        }
        seen
    }

    /// Nodes in an order where every edge goes forward, or `None` if the
    /// graph has a cycle.
    pub fn topological_order(&self) -> Option<Vec<usize>> {
        let mut indegree = vec![0usize; self.len()];
        for out in &self.edges {
            for &(_, m) in out {
                indegree[m] += 1;
            }
        }
        let mut ready: Vec<usize> = (0..self.len()).filter(|&n| indegree[n] == 0).collect();
        let mut order = Vec::with_capacity(self.len());
        while let Some(n) = ready.pop() {
            order.push(n);
            for &(_, m) in &self.edges[n] {
                indegree[m] -= 1;
                if indegree[m] == 0 {
                    ready.push(m);
                }
            }
        }
        (order.len() == self.len()).then_some(order)
    }

    /// Nodes are markings (non-zero slots only), edges carry transition names.
    pub fn to_json(&self, net: &PetriNet) -> serde_json::Value {
        let nodes: Vec<_> = self
            .markings
            .iter()
            .enumerate()
            .map(|(id, m)| {
                let mut tokens = serde_json::Map::new();
                for p in 0..m.places() {
                    for c in 0..m.colours() {
                        let n = m.get(p, c);
                        if n == 0 {
                            continue;
                        }
                        let key = if m.colours() == 1 {
                            net.places[p].clone()
                        } else {
                            format!("{}@{}", net.places[p], net.colours[c])
                        };
                        tokens.insert(key, json!(n));
                    }
                }
                json!({ "id": id, "tokens": tokens, "final": net.is_final(m) })
            })
            .collect();
        let edges: Vec<_> = self
            .edges
            .iter()
            .enumerate()
            .flat_map(|(n, out)| {
                out.iter().map(move |&(t, m)| {
                    json!({ "from": n, "to": m, "transition": net.transitions[t].name })
                })
            })
            .collect();
        json!({ "net": net.name, "nodes": nodes, "edges": edges })
    }
}

/// Marking-graph statistics and the number of valid paths.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PathReport {
    pub paths: u64,
    pub reachable_markings: usize,
    /// Markings with no enabled transition.
    pub terminal_markings: usize,
    /// Terminal markings other than the final one.
    pub dead_markings: usize,
    pub final_reachable: bool,
    /// Every maximal firing sequence ends in the final marking.
    pub final_unique: bool,
    pub path_length: Option<usize>,
}

/// Counts the firing sequences leading from the initial to the final marking.
pub fn enumerate_paths(net: &PetriNet, cap: EnumerationCap) -> Result<PathReport, PetriError> {
    let graph = MarkingGraph::build(net, cap.markings)?;
    let order = graph.topological_order().ok_or(PetriError::CapExceeded {
        markings: graph.len(),
        paths: cap.paths,
    })?;
    // paths from each node to the final marking, saturating just above the cap
    let limit = cap.paths.saturating_add(1);
    let mut count = vec![0u64; graph.len()];
    let mut length: Vec<Option<usize>> = vec![None; graph.len()];
    for &n in order.iter().rev() {
        if net.is_final(&graph.markings[n]) {
            count[n] = 1;
            length[n] = Some(0);
        }
        for &(_, m) in &graph.edges[n] {
            count[n] = count[n].saturating_add(count[m]).min(limit);
            if let Some(l) = length[m] {
                length[n] = Some(length[n].map_or(l + 1, |k: usize| k.max(l + 1)));
            }
        }
    }
    if count[0] > cap.paths {
        return Err(PetriError::CapExceeded {
            markings: graph.len(),
            paths: cap.paths,
        });
    }
    let terminal: Vec<usize> = (0..graph.len())
        .filter(|&n| graph.edges[n].is_empty())
        .collect();
    let dead = terminal
        .iter()
        .filter(|&&n| !net.is_final(&graph.markings[n]))
        .count();
    Ok(PathReport {
        paths: count[0],
        reachable_markings: graph.len(),
        terminal_markings: terminal.len(),
        dead_markings: dead,
        final_reachable: count[0] > 0,
        final_unique: dead == 0 && count[0] > 0,
        path_length: length[0],
    })
}

/// The valid paths themselves, as transition ids, depth first in
/// transition order.
pub fn valid_paths(
    net: &PetriNet,
    cap: EnumerationCap,
) -> Result<Vec<Vec<TransitionId>>, PetriError> {
    let graph = MarkingGraph::build(net, cap.markings)?;
    let live = graph.co_reachable(net);
    let mut paths = Vec::new();
    if !live[0] {
        return Ok(paths);
    }
    let mut prefix: Vec<TransitionId> = Vec::new();
    // (node, next edge index)
    let mut stack: Vec<(usize, usize)> = vec![(0, 0)];
    while let Some(&(n, i)) = stack.last() {
        if i == 0 && net.is_final(&graph.markings[n]) {
            paths.push(prefix.clone());
            if paths.len() as u64 > cap.paths {
                return Err(PetriError::CapExceeded {
                    markings: graph.len(),
                    paths: cap.paths,
                });
            }
        }
        match graph.edges[n][i..].iter().position(|&(_, m)| live[m]) {
            Some(off) => {
                let (t, m) = graph.edges[n][i + off];
                if let Some(top) = stack.last_mut() {
                    top.1 = i + off + 1;
                }
                prefix.push(t);
                stack.push((m, 0));
            }
            None => {
                stack.pop();
                prefix.pop();
            }
        }
    }
    Ok(paths)
}
