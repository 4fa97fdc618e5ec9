//! Parsing, functional and behavioral semantics of a multi-item NNEF subset.
//!
//! * [`frontend`]: text format, SSA validation, weight files.
//! * [`tensor`]: reference float32 evaluation.
//! * [`petri`]: Petri-net and coloured Petri-net execution models, path
//!   enumeration, equivalence and trace checking.
//! * [`splitter`]: partitioning a description into item descriptions and back.
//! * [`runtime`]: concurrent execution of item descriptions with traces.
//! * [`trace`]: the JSON-lines trace format.
//! * [`conventions`]: framework max-pooling conventions as `max_pool` encodings.

pub mod conventions;
pub mod frontend;
pub mod petri;
pub mod runtime;
pub mod splitter;
pub mod tensor;
pub mod trace;

pub use frontend::{
    parse_item_program, parse_program, serialize_item, serialize_program, validate_item_set,
    validate_ssa, Instruction, ItemProgram, NnefProgram, Op, WeightStore,
};
pub use petri::{translate, translate_multi, ColouredPetriNet, PetriNet};
pub use runtime::{run_barrier_schedule, run_items, NoiseConfig, RunOutput};
pub use splitter::{merge, split, Assignment};
pub use tensor::{evaluate, Tensor};
pub use trace::{read_trace, write_trace, Trace, TraceEvent};
