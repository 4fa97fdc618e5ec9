//! Petri-net execution models of descriptions.
//!
//! [`translate`] turns a single description into a net where places are
//! variables and transitions are layers; [`translate_multi`] builds the
//! coloured net of a set of item descriptions, one colour per item, with a
//! sync transition per `send_var`. On top of these: path enumeration over
//! the marking graph, language equivalence modulo sync transitions, trace
//! replay and Graphviz export.

mod dot;
mod equivalence;
mod graph;
mod net;
mod trace_check;
mod translate;

use thiserror::Error;

pub use dot::export_dot;
pub use equivalence::{check_equivalence, Counterexample, EquivalenceReport, Side, Verdict};
pub use graph::{enumerate_paths, valid_paths, EnumerationCap, MarkingGraph, PathReport};
pub use net::{
    Arc, ColourId, ColouredPetriNet, Marking, PetriNet, PlaceId, Transition, TransitionId,
    TransitionKind,
};
pub use trace_check::{validate_trace, TraceVerdict, TraceViolation, ViolationReason};
pub use translate::{sync_transition_name, translate, translate_multi};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PetriError {
    #[error("transition `{0}` is not fireable")]
    NotFireable(String),
    #[error("unknown transition `{0}`")]
    UnknownTransition(String),
    #[error("cap exceeded after {markings} markings and {paths} paths")]
    CapExceeded { markings: usize, paths: u64 },
    #[error("item `{item}` reads from unknown item `{source_item}`")]
    UnknownSourceItem { item: String, source_item: String },
    #[error("item `{item}` reads `{sync}`, which its source does not declare")]
    UnresolvedVarsync { item: String, sync: String },
    #[error("transition `{name}` produced by several items: {items:?}")]
    DuplicateTransition { name: String, items: Vec<String> },
}
