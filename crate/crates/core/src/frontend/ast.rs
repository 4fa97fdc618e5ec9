//! Program representation: instructions in canonical positional form.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Every fragment the subset accepts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Op {
    External,
    Variable,
    Conv,
    Relu,
    MaxPool,
    Reshape,
    Linear,
    Softmax,
    Concat,
    Split,
    VariableSync,
    GetVar,
    SendVar,
}

/// Kind of value a parameter slot accepts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArgKind {
    Var,
    VarList,
    Int,
    IntList,
    TupleList,
    Str,
    Item,
    ItemList,
    Sync,
}

/// One formal parameter of a fragment.
#[derive(Debug, Clone, Copy)]
pub struct Param {
    pub name: &'static str,
    pub kind: ArgKind,
    /// Written without `name =` by the serializer.
    pub positional: bool,
}

const fn p(name: &'static str, kind: ArgKind) -> Param {
    Param {
        name,
        kind,
        positional: true,
    }
}

const fn named(name: &'static str, kind: ArgKind) -> Param {
    Param {
        name,
        kind,
        positional: false,
    }
}

use ArgKind as K;

const EXTERNAL: &[Param] = &[named("shape", K::IntList)];
const VARIABLE: &[Param] = &[named("shape", K::IntList), named("label", K::Str)];
const CONV: &[Param] = &[
    p("input", K::Var),
    p("filter", K::Var),
    p("bias", K::Var),
    named("stride", K::IntList),
    named("dilation", K::IntList),
    named("padding", K::TupleList),
    named("groups", K::Int),
];
const RELU: &[Param] = &[p("x", K::Var)];
const MAX_POOL: &[Param] = &[
    p("input", K::Var),
    named("size", K::IntList),
    named("stride", K::IntList),
    named("dilation", K::IntList),
    named("padding", K::TupleList),
    named("border", K::Str),
];
const RESHAPE: &[Param] = &[p("input", K::Var), named("shape", K::IntList)];
const LINEAR: &[Param] = &[p("input", K::Var), p("weight", K::Var), p("bias", K::Var)];
const SOFTMAX: &[Param] = &[p("x", K::Var), named("axis", K::Int)];
const CONCAT: &[Param] = &[p("values", K::VarList), named("axis", K::Int)];
const SPLIT: &[Param] = &[
    p("value", K::Var),
    named("axis", K::Int),
    named("ranges", K::TupleList),
];
const VARIABLESYNC: &[Param] = &[named("shape", K::IntList)];
const GET_VAR: &[Param] = &[named("source", K::Item), named("data", K::Sync)];
const SEND_VAR: &[Param] = &[named("dest", K::ItemList), named("data", K::Var)];

impl Op {
    pub const ALL: [Op; 13] = [
        Op::External,
        Op::Variable,
        Op::Conv,
        Op::Relu,
        Op::MaxPool,
        Op::Reshape,
        Op::Linear,
        Op::Softmax,
        Op::Concat,
        Op::Split,
        Op::VariableSync,
        Op::GetVar,
        Op::SendVar,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Op::External => "external",
            Op::Variable => "variable",
            Op::Conv => "conv",
            Op::Relu => "relu",
            Op::MaxPool => "max_pool",
            Op::Reshape => "reshape",
            Op::Linear => "linear",
            Op::Softmax => "softmax",
            Op::Concat => "concat",
            Op::Split => "split",
            Op::VariableSync => "variablesync",
            Op::GetVar => "get_var",
            Op::SendVar => "send_var",
        }
    }

    pub fn from_name(name: &str) -> Option<Op> {
        Op::ALL.into_iter().find(|op| op.name() == name)
    }

    /// Canonical parameter list; parsed arguments are stored in this order.
    pub fn signature(self) -> &'static [Param] {
        match self {
            Op::External => EXTERNAL,
            Op::Variable => VARIABLE,
            Op::Conv => CONV,
            Op::Relu => RELU,
            Op::MaxPool => MAX_POOL,
            Op::Reshape => RESHAPE,
            Op::Linear => LINEAR,
            Op::Softmax => SOFTMAX,
            Op::Concat => CONCAT,
            Op::Split => SPLIT,
            Op::VariableSync => VARIABLESYNC,
            Op::GetVar => GET_VAR,
            Op::SendVar => SEND_VAR,
        }
    }

    /// Declarations (input tensors and fixed parameters).
    pub fn is_declaration(self) -> bool {
        matches!(self, Op::External | Op::Variable)
    }

    /// Multi-item synchronization fragments.
    pub fn is_sync(self) -> bool {
        matches!(self, Op::VariableSync | Op::GetVar | Op::SendVar)
    }

    /// Layer computations: everything that becomes a Petri-net transition.
    pub fn is_compute(self) -> bool {
        !self.is_declaration() && !self.is_sync()
    }
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Argument {
    Var(String),
    VarList(Vec<String>),
    Int(i64),
    Float(f64),
    IntList(Vec<i64>),
    TupleList(Vec<(i64, i64)>),
    Str(String),
    Item(String),
    ItemList(Vec<String>),
    Sync(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instruction {
    pub result: String,
    pub op: Op,
    /// One entry per `op.signature()` parameter, in signature order.
    pub args: Vec<Argument>,
}

impl Instruction {
    pub fn new(result: impl Into<String>, op: Op, args: Vec<Argument>) -> Self {
        Instruction {
            result: result.into(),
            op,
            args,
        }
    }

    /// Tensor variables read by this instruction, in argument order, with repeats.
    pub fn var_inputs(&self) -> Vec<&str> {
        let mut out = Vec::new();
        for arg in &self.args {
            match arg {
                Argument::Var(v) => out.push(v.as_str()),
                Argument::VarList(vs) => out.extend(vs.iter().map(String::as_str)),
                _ => {}
            }
        }
        out
    }

    pub fn arg(&self, name: &str) -> Option<&Argument> {
        self.op
            .signature()
            .iter()
            .position(|p| p.name == name)
            .and_then(|i| self.args.get(i))
    }

    pub fn int_list(&self, name: &str) -> Option<&[i64]> {
        match self.arg(name)? {
            Argument::IntList(v) => Some(v),
            _ => None,
        }
    }

    pub fn tuple_list(&self, name: &str) -> Option<&[(i64, i64)]> {
        match self.arg(name)? {
            Argument::TupleList(v) => Some(v),
            _ => None,
        }
    }

    pub fn int(&self, name: &str) -> Option<i64> {
        match self.arg(name)? {
            Argument::Int(v) => Some(*v),
            _ => None,
        }
    }

    pub fn string(&self, name: &str) -> Option<&str> {
        match self.arg(name)? {
            Argument::Str(s) => Some(s),
            _ => None,
        }
    }

    /// `label` of a `variable` declaration.
    pub fn label(&self) -> Option<&str> {
        if self.op == Op::Variable {
            self.string("label")
        } else {
            None
        }
    }

    /// Declared shape of `external`, `variable` or `variablesync`.
    pub fn declared_shape(&self) -> Option<&[i64]> {
        match self.op {
            Op::External | Op::Variable | Op::VariableSync => self.int_list("shape"),
            _ => None,
        }
    }

    /// `(source item, sync name)` of a `get_var`.
    pub fn get_var_parts(&self) -> Option<(&str, &str)> {
        match (self.op, self.args.as_slice()) {
            (Op::GetVar, [Argument::Item(src), Argument::Sync(data)]) => Some((src, data)),
            _ => None,
        }
    }

    /// `(destination items, sent variable)` of a `send_var`.
    pub fn send_var_parts(&self) -> Option<(&[String], &str)> {
        match (self.op, self.args.as_slice()) {
            (Op::SendVar, [Argument::ItemList(dest), Argument::Var(data)]) => Some((dest, data)),
            _ => None,
        }
    }
}

/// A single-item model description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NnefProgram {
    pub graph_name: String,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub instructions: Vec<Instruction>,
}

/// The description of one item of a multi-item deployment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemProgram {
    pub graph_name: String,
    pub graph_inputs: Vec<String>,
    pub graph_outputs: Vec<String>,
    pub item_id: String,
    pub node_name: String,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub instructions: Vec<Instruction>,
}

/// Shared view over single-item and per-item programs.
pub trait Body {
    fn instructions(&self) -> &[Instruction];
    fn inputs(&self) -> &[String];
    fn outputs(&self) -> &[String];

    fn compute_instructions(&self) -> Box<dyn Iterator<Item = &Instruction> + '_> {
        Box::new(self.instructions().iter().filter(|i| i.op.is_compute()))
    }
}

impl Body for NnefProgram {
    fn instructions(&self) -> &[Instruction] {
        &self.instructions
    }
    fn inputs(&self) -> &[String] {
        &self.inputs
    }
    fn outputs(&self) -> &[String] {
        &self.outputs
    }
}

impl Body for ItemProgram {
    fn instructions(&self) -> &[Instruction] {
        &self.instructions
    }
    fn inputs(&self) -> &[String] {
        &self.inputs
    }
    fn outputs(&self) -> &[String] {
        &self.outputs
    }
}

impl NnefProgram {
    pub fn instruction(&self, result: &str) -> Option<&Instruction> {
        self.instructions.iter().find(|i| i.result == result)
    }
}

impl ItemProgram {
    /// Sync names this item writes, with the sent variable.
    pub fn sends(&self) -> impl Iterator<Item = (&str, &Instruction)> {
        self.instructions
            .iter()
            .filter(|i| i.op == Op::SendVar)
            .map(|i| (i.result.as_str(), i))
    }

    pub fn gets(&self) -> impl Iterator<Item = &Instruction> {
        self.instructions.iter().filter(|i| i.op == Op::GetVar)
    }

    pub fn declares_sync(&self, name: &str) -> bool {
        self.instructions
            .iter()
            .any(|i| i.op == Op::VariableSync && i.result == name)
    }
}
