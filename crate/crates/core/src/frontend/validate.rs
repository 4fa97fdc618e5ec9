//! Structural checks: SSA, def-before-use, output coverage, and the
//! single-writer rules of multi-item sets.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;

use serde::Serialize;

use super::ast::{Body, ItemProgram, Op};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ViolationKind {
    DoubleAssign { var: String, first: usize },
    UseBeforeDef { var: String },
    UndefinedOutput { var: String },
    UndeclaredSync { sync: String },
    DuplicateItem { item: String },
    DuplicateWriter { sync: String, writers: Vec<String> },
    UnknownSourceItem { source: String },
    UnresolvedSync { sync: String, source: String },
    MissingWriter { sync: String },
    NoReader { sync: String },
    UnknownDestination { dest: String },
    SourceMismatch { sync: String, expected: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub item: Option<String>,
    /// Index of the offending instruction, when there is one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub index: Option<usize>,
    #[serde(flatten)]
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(item) = &self.item {
            write!(f, "[{item}] ")?;
        }
        if let Some(i) = self.index {
            write!(f, "instruction {i}: ")?;
        }
        match &self.kind {
            ViolationKind::DoubleAssign { var, first } => {
                write!(f, "`{var}` already assigned by instruction {first}")
            }
            ViolationKind::UseBeforeDef { var } => write!(f, "`{var}` used before assignment"),
            ViolationKind::UndefinedOutput { var } => {
                write!(f, "output `{var}` is never assigned")
            }
            ViolationKind::UndeclaredSync { sync } => {
                write!(
                    f,
                    "send_var writes `{sync}` without a preceding variablesync"
                )
            }
            ViolationKind::DuplicateItem { item } => write!(f, "item id `{item}` used twice"),
            ViolationKind::DuplicateWriter { sync, writers } => {
                write!(
                    f,
                    "`{sync}` written by several items: {}",
                    writers.join(", ")
                )
            }
            ViolationKind::UnknownSourceItem { source } => {
                write!(f, "get_var names unknown source item `{source}`")
            }
            ViolationKind::UnresolvedSync { sync, source } => {
                write!(f, "`{sync}` is not declared by source item `{source}`")
            }
            ViolationKind::MissingWriter { sync } => write!(f, "`{sync}` has no send_var"),
            ViolationKind::NoReader { sync } => write!(f, "`{sync}` has no get_var"),
            ViolationKind::UnknownDestination { dest } => {
                write!(f, "send_var names unknown destination item `{dest}`")
            }
            ViolationKind::SourceMismatch { sync, expected } => {
                write!(
                    f,
                    "`{sync}` is written by `{expected}`, not by the named source"
                )
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, item: Option<&str>, index: Option<usize>, kind: ViolationKind) {
        self.violations.push(Violation {
            item: item.map(str::to_string),
            index,
            kind,
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Checks SSA, def-before-use and output coverage of one description.
///
/// Sync names live in their own namespace: `variablesync` declares one,
/// `send_var` writes it, and neither counts as a tensor assignment.
pub fn validate_ssa<B: Body + ?Sized>(program: &B) -> ValidationReport {
    let mut report = ValidationReport::default();
    let mut assigned: HashMap<&str, usize> = HashMap::new();
    let mut syncs: HashMap<&str, usize> = HashMap::new();
    let inputs: HashSet<&str> = program.inputs().iter().map(String::as_str).collect();

    for (i, inst) in program.instructions().iter().enumerate() {
        for var in inst.var_inputs() {
            if !assigned.contains_key(var) && !inputs.contains(var) {
                report.push(
                    None,
                    Some(i),
                    ViolationKind::UseBeforeDef {
                        var: var.to_string(),
                    },
                );
            }
        }
        match inst.op {
            Op::VariableSync => {
                if let Some(&first) = syncs.get(inst.result.as_str()) {
                    report.push(
                        None,
                        Some(i),
                        ViolationKind::DoubleAssign {
                            var: inst.result.clone(),
                            first,
                        },
                    );
                } else {
                    syncs.insert(&inst.result, i);
                }
            }
            Op::SendVar => {
                if !syncs.contains_key(inst.result.as_str()) {
                    report.push(
                        None,
                        Some(i),
                        ViolationKind::UndeclaredSync {
                            sync: inst.result.clone(),
                        },
                    );
                }
            }
            _ => {
                if let Some(&first) = assigned.get(inst.result.as_str()) {
                    report.push(
                        None,
                        Some(i),
                        ViolationKind::DoubleAssign {
                            var: inst.result.clone(),
                            first,
                        },
                    );
                } else {
                    assigned.insert(&inst.result, i);
                }
            }
        }
    }
    for out in program.outputs() {
        if !assigned.contains_key(out.as_str()) {
            report.push(
                None,
                None,
                ViolationKind::UndefinedOutput { var: out.clone() },
            );
        }
    }
    report
}

/// Cross-item checks of a multi-item set: unique item ids, unique writers,
/// resolvable `get_var` sources and existing `send_var` destinations.
/// Per-item SSA is included.
pub fn validate_item_set(items: &[ItemProgram]) -> ValidationReport {
    let mut report = ValidationReport::default();
    let mut ids = BTreeSet::new();
    for item in items {
        if !ids.insert(item.item_id.as_str()) {
            report.push(
                None,
                None,
                ViolationKind::DuplicateItem {
                    item: item.item_id.clone(),
                },
            );
        }
        for mut v in validate_ssa(item).violations {
            v.item = Some(item.item_id.clone());
            report.violations.push(v);
        }
    }
    let by_id: HashMap<&str, &ItemProgram> =
        items.iter().map(|i| (i.item_id.as_str(), i)).collect();

    let mut writers: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    let mut readers: BTreeMap<&str, usize> = BTreeMap::new();
    let mut declared: BTreeSet<&str> = BTreeSet::new();

    for item in items {
        for (i, inst) in item.instructions.iter().enumerate() {
            match inst.op {
                Op::VariableSync => {
                    declared.insert(&inst.result);
                }
                Op::SendVar => {
                    writers.entry(&inst.result).or_default().push(&item.item_id);
                    if let Some((dest, _)) = inst.send_var_parts() {
                        for d in dest {
                            if !by_id.contains_key(d.as_str()) {
                                report.push(
                                    Some(&item.item_id),
                                    Some(i),
                                    ViolationKind::UnknownDestination { dest: d.clone() },
                                );
                            }
                        }
                    }
                }
                Op::GetVar => {
                    let Some((source, sync)) = inst.get_var_parts() else {
                        continue;
                    };
                    *readers.entry(sync).or_default() += 1;
                    match by_id.get(source) {
                        None => report.push(
                            Some(&item.item_id),
                            Some(i),
                            ViolationKind::UnknownSourceItem {
                                source: source.to_string(),
                            },
                        ),
                        Some(src) if !src.declares_sync(sync) => report.push(
                            Some(&item.item_id),
                            Some(i),
                            ViolationKind::UnresolvedSync {
                                sync: sync.to_string(),
                                source: source.to_string(),
                            },
                        ),
                        Some(_) => {}
                    }
                }
                _ => {}
            }
        }
    }

    for (sync, ws) in &writers {
        if ws.len() > 1 {
            report.push(
                None,
                None,
                ViolationKind::DuplicateWriter {
                    sync: sync.to_string(),
                    writers: ws.iter().map(|s| s.to_string()).collect(),
                },
            );
        }
        if !readers.contains_key(sync) {
            report.push(
                None,
                None,
                ViolationKind::NoReader {
                    sync: sync.to_string(),
                },
            );
        }
    }
    for sync in declared.iter().chain(readers.keys()) {
        if !writers.contains_key(sync)
            && !report
                .violations
                .iter()
                .any(|v| matches!(&v.kind, ViolationKind::MissingWriter { sync: s } if s == sync))
        {
            report.push(
                None,
                None,
                ViolationKind::MissingWriter {
                    sync: sync.to_string(),
                },
            );
        }
    }
    for item in items {
        for (i, inst) in item.instructions.iter().enumerate() {
            if let Some((source, sync)) = inst.get_var_parts() {
                if let Some(ws) = writers.get(sync) {
                    if ws.len() == 1 && ws[0] != source && by_id.contains_key(source) {
                        report.push(
                            Some(&item.item_id),
                            Some(i),
                            ViolationKind::SourceMismatch {
                                sync: sync.to_string(),
                                expected: ws[0].to_string(),
                            },
                        );
                    }
                }
            }
        }
    }
    report
}
