//! Partitioning a description over items and putting it back together.
//!
//! [`split`] gives every item its compute instructions in their original
//! relative order, copies of the declarations it reads, and one
//! `variablesync` per variable produced on one item and read on others.
//! The writer declares it and sends right after computing the variable;
//! each reader declares it too and calls `get_var` just before its first
//! use. [`merge`] undoes this.

mod suggest;

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frontend::{Argument, Instruction, ItemProgram, NnefProgram, Op};
use crate::tensor::{infer_shapes, EvalError};

pub use suggest::suggest_assignments;

#[derive(Debug, Error)]
pub enum SplitError {
    #[error("invalid assignment: {0}")]
    InvalidAssignment(String),
    #[error("item `{0}` has no instruction")]
    EmptyItem(String),
    #[error("`{name}` is declared differently by `{first}` and `{second}`")]
    ConflictingDeclarations {
        name: String,
        first: String,
        second: String,
    },
    #[error("item `{item}` reads `{sync}` from `{source_item}`, which never sends it")]
    UnresolvedSync {
        item: String,
        sync: String,
        source_item: String,
    },
    #[error("shape inference failed: {0}")]
    Shape(#[from] EvalError),
    #[error("assignment file: {0}")]
    Json(#[from] serde_json::Error),
}

/// Item of every compute instruction, by result variable, plus the item list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub items: Vec<String>,
    pub assignment: BTreeMap<String, String>,
}

impl Assignment {
    pub fn new(items: Vec<String>, assignment: BTreeMap<String, String>) -> Self {
        Assignment { items, assignment }
    }

    /// Everything on one item.
    pub fn single(program: &NnefProgram, item: &str) -> Self {
        Assignment {
            items: vec![item.to_string()],
            assignment: program
                .instructions
                .iter()
                .filter(|i| i.op.is_compute())
                .map(|i| (i.result.clone(), item.to_string()))
                .collect(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, SplitError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data")
    }

    pub fn item_of(&self, var: &str) -> Option<&str> {
        self.assignment.get(var).map(String::as_str)
    }

    /// Checks the assignment is total over the compute instructions of
    /// `program`, names only known variables and items, and uses every item.
    pub fn check(&self, program: &NnefProgram) -> Result<(), SplitError> {
        let mut seen = HashSet::new();
        for item in &self.items {
            if !seen.insert(item.as_str()) {
                return Err(SplitError::InvalidAssignment(format!(
                    "item `{item}` listed twice"
                )));
            }
        }
        let compute: HashSet<&str> = program
            .instructions
            .iter()
            .filter(|i| i.op.is_compute())
            .map(|i| i.result.as_str())
            .collect();
        for (var, item) in &self.assignment {
            if !compute.contains(var.as_str()) {
                return Err(SplitError::InvalidAssignment(format!(
                    "`{var}` is not computed by the program"
                )));
            }
            if !seen.contains(item.as_str()) {
                return Err(SplitError::InvalidAssignment(format!(
                    "`{var}` assigned to unknown item `{item}`"
                )));
            }
        }
        for var in &compute {
            if !self.assignment.contains_key(*var) {
                return Err(SplitError::InvalidAssignment(format!(
                    "`{var}` is not assigned"
                )));
            }
        }
        for item in &self.items {
            if !self.assignment.values().any(|i| i == item) {
                return Err(SplitError::EmptyItem(item.clone()));
            }
        }
        Ok(())
    }
}

/// File name of an item description: `<node_name>.<item_id>.nnef`.
pub fn item_file_name(item: &ItemProgram) -> String {
    format!("{}.{}.nnef", item.node_name, item.item_id)
}

fn fresh_sync_name(var: &str, taken: &mut HashSet<String>) -> String {
    let base = format!("{var}_sync");
    let mut name = base.clone();
    let mut k = 1;
    while taken.contains(&name) {
        name = format!("{base}{k}");
        k += 1;
    }
    taken.insert(name.clone());
    name
}

pub fn split(
    program: &NnefProgram,
    assignment: &Assignment,
) -> Result<Vec<ItemProgram>, SplitError> {
    assignment.check(program)?;
    let n = assignment.items.len();
    let item_index: HashMap<&str, usize> = assignment
        .items
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), i))
        .collect();
    let owner: HashMap<&str, usize> = assignment
        .assignment
        .iter()
        .map(|(v, it)| (v.as_str(), item_index[it.as_str()]))
        .collect();

    // readers of each cross-item variable, in item order
    let mut readers: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for inst in program.instructions.iter().filter(|i| i.op.is_compute()) {
        let me = owner[inst.result.as_str()];
        for v in inst.var_inputs() {
            if let Some(&w) = owner.get(v) {
                if w != me {
                    let r = readers.entry(v).or_default();
                    if !r.contains(&me) {
                        r.push(me);
                    }
                }
            }
        }
    }
    for r in readers.values_mut() {
        r.sort_unstable();
    }

    let shapes = if readers.is_empty() {
        BTreeMap::new()
    } else {
        infer_shapes(program)?
    };
    let mut taken: HashSet<String> = program
        .instructions
        .iter()
        .flat_map(|i| std::iter::once(i.result.as_str()).chain(i.var_inputs()))
        .map(str::to_string)
        .collect();
    let cross: Vec<&str> = program
        .instructions
        .iter()
        .map(|i| i.result.as_str())
        .filter(|v| readers.contains_key(v))
        .collect();
    let sync_of: HashMap<&str, String> = cross
        .iter()
        .map(|&v| (v, fresh_sync_name(v, &mut taken)))
        .collect();
    let declare_sync = |v: &str| {
        let shape = shapes[v].iter().map(|&d| d as i64).collect();
        Instruction::new(
            sync_of[v].clone(),
            Op::VariableSync,
            vec![Argument::IntList(shape)],
        )
    };

    let mut items = Vec::with_capacity(n);
    for (me, item_id) in assignment.items.iter().enumerate() {
        let mine: Vec<&Instruction> = program
            .instructions
            .iter()
            .filter(|i| i.op.is_compute() && owner[i.result.as_str()] == me)
            .collect();
        let used: HashSet<&str> = mine.iter().flat_map(|i| i.var_inputs()).collect();

        let mut instructions: Vec<Instruction> = program
            .instructions
            .iter()
            .filter(|i| i.op.is_declaration() && used.contains(i.result.as_str()))
            .cloned()
            .collect();
        // syncs this item writes, then those it reads, in program order
        for &v in &cross {
            if owner[v] == me {
                instructions.push(declare_sync(v));
            }
        }
        for &v in &cross {
            if readers[v].contains(&me) {
                instructions.push(declare_sync(v));
            }
        }

        let mut fetched: HashSet<&str> = HashSet::new();
        for inst in &mine {
            for v in inst.var_inputs() {
                if owner.get(v).is_some_and(|&w| w != me) && fetched.insert(v) {
                    let writer = &assignment.items[owner[v]];
                    instructions.push(Instruction::new(
                        v,
                        Op::GetVar,
                        vec![
                            Argument::Item(writer.clone()),
                            Argument::Sync(sync_of[v].clone()),
                        ],
                    ));
                }
            }
            instructions.push((*inst).clone());
            if let Some(r) = readers.get(inst.result.as_str()) {
                instructions.push(Instruction::new(
                    sync_of[inst.result.as_str()].clone(),
                    Op::SendVar,
                    vec![
                        Argument::ItemList(
                            r.iter().map(|&i| assignment.items[i].clone()).collect(),
                        ),
                        Argument::Var(inst.result.clone()),
                    ],
                ));
            }
        }

        let declared_inputs = program
            .inputs
            .iter()
            .filter(|e| {
                instructions
                    .iter()
                    .any(|i| i.op == Op::External && &i.result == *e)
            })
            .cloned()
            .collect();
        let outputs = program
            .outputs
            .iter()
            .filter(|o| mine.iter().any(|i| &i.result == *o))
            .cloned()
            .collect();
        items.push(ItemProgram {
            graph_name: program.graph_name.clone(),
            graph_inputs: program.inputs.clone(),
            graph_outputs: program.outputs.clone(),
            item_id: item_id.clone(),
            node_name: program.graph_name.clone(),
            inputs: declared_inputs,
            outputs,
            instructions,
        });
    }
    Ok(items)
}

fn rename_args(inst: &Instruction, rename: &HashMap<&str, &str>) -> Instruction {
    let map = |v: &String| {
        rename
            .get(v.as_str())
            .map_or_else(|| v.clone(), |s| s.to_string())
    };
    Instruction {
        result: inst.result.clone(),
        op: inst.op,
        args: inst
            .args
            .iter()
            .map(|a| match a {
                Argument::Var(v) => Argument::Var(map(v)),
                Argument::VarList(vs) => Argument::VarList(vs.iter().map(map).collect()),
                other => other.clone(),
            })
            .collect(),
    }
}

/// Single description equivalent to an item set: sync instructions dropped,
/// declarations deduplicated, compute instructions in a dataflow order that
/// keeps each item's order and prefers earlier items.
pub fn merge(items: &[ItemProgram]) -> Result<NnefProgram, SplitError> {
    let Some(first) = items.first() else {
        return Err(SplitError::InvalidAssignment("no item".into()));
    };
    let by_id: HashMap<&str, &ItemProgram> =
        items.iter().map(|i| (i.item_id.as_str(), i)).collect();

    let mut declarations: Vec<(Instruction, &str)> = Vec::new();
    let mut compute: Vec<(usize, usize, Instruction)> = Vec::new();
    for (k, item) in items.iter().enumerate() {
        // reader-local name of a fetched variable -> writer's name
        let mut rename: HashMap<&str, &str> = HashMap::new();
        for get in item.gets() {
            let (source, sync) = get.get_var_parts().unwrap_or_default();
            let sent = by_id
                .get(source)
                .and_then(|src| src.sends().find(|(s, _)| *s == sync))
                .and_then(|(_, send)| send.send_var_parts());
            match sent {
                Some((_, data)) => {
                    rename.insert(get.result.as_str(), data);
                }
                None => {
                    return Err(SplitError::UnresolvedSync {
                        item: item.item_id.clone(),
                        sync: sync.to_string(),
                        source_item: source.to_string(),
                    })
                }
            }
        }
        for (pos, inst) in item.instructions.iter().enumerate() {
            if inst.op.is_declaration() {
                match declarations.iter().find(|(d, _)| d.result == inst.result) {
                    Some((d, _)) if d == inst => {}
                    Some((_, owner)) => {
                        return Err(SplitError::ConflictingDeclarations {
                            name: inst.result.clone(),
                            first: owner.to_string(),
                            second: item.item_id.clone(),
                        })
                    }
                    None => declarations.push((inst.clone(), &item.item_id)),
                }
            } else if inst.op.is_compute() {
                compute.push((k, pos, rename_args(inst, &rename)));
            }
        }
    }

    let produced: HashMap<&str, usize> = compute
        .iter()
        .enumerate()
        .map(|(i, (_, _, inst))| (inst.result.as_str(), i))
        .collect();
    let mut waiting = vec![0usize; compute.len()];
    let mut dependents: Vec<Vec<usize>> = vec![Vec::new(); compute.len()];
    for (i, (_, _, inst)) in compute.iter().enumerate() {
        let deps: HashSet<usize> = inst
            .var_inputs()
            .iter()
            .filter_map(|v| produced.get(v).copied())
            .collect();
        waiting[i] = deps.len();
        for d in deps {
            dependents[d].push(i);
        }
    }
    let mut ready: BinaryHeap<Reverse<(usize, usize, usize)>> = compute
        .iter()
        .enumerate()
        .filter(|(i, _)| waiting[*i] == 0)
        .map(|(i, (k, pos, _))| Reverse((*k, *pos, i)))
        .collect();
    let mut order = Vec::with_capacity(compute.len());
    while let Some(Reverse((_, _, i))) = ready.pop() {
        order.push(i);
        for &j in &dependents[i] {
            waiting[j] -= 1;
            if waiting[j] == 0 {
                let (k, pos, _) = &compute[j];
                ready.push(Reverse((*k, *pos, j)));
            }
        }
    }
    if order.len() != compute.len() {
        return Err(SplitError::InvalidAssignment(
            "cyclic dataflow between items".into(),
        ));
    }

    let mut instructions: Vec<Instruction> = declarations.into_iter().map(|(d, _)| d).collect();
    let mut slots: Vec<Option<Instruction>> =
        compute.into_iter().map(|(_, _, i)| Some(i)).collect();
    instructions.extend(
        order
            .into_iter()
            .map(|i| slots[i].take().expect("each once")),
    );
    Ok(NnefProgram {
        graph_name: first.graph_name.clone(),
        inputs: first.graph_inputs.clone(),
        outputs: first.graph_outputs.clone(),
        instructions,
    })
}
