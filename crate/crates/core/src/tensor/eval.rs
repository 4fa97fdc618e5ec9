use std::collections::{BTreeMap, HashMap};
use std::fmt;

use super::{ops, Tensor, TensorError};
use crate::frontend::{Argument, Instruction, NnefProgram, Op, WeightStore};

#[derive(Debug, Clone, PartialEq)]
pub enum EvalErrorKind {
    Tensor(TensorError),
    MissingInput(String),
    MissingWeight(String),
    InputShape {
        name: String,
        declared: Vec<usize>,
        found: Vec<usize>,
    },
    Undefined(String),
    SyncInstruction,
}

/// Failure of one instruction, located by index and result name.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalError {
    pub index: usize,
    pub result: String,
    pub kind: EvalErrorKind,
}

impl EvalError {
    pub(crate) fn tensor(index: usize, inst: &Instruction, e: TensorError) -> Self {
        EvalError {
            index,
            result: inst.result.clone(),
            kind: EvalErrorKind::Tensor(e),
        }
    }
}

impl std::error::Error for EvalError {}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "instruction {} (`{}`): ", self.index, self.result)?;
        match &self.kind {
            EvalErrorKind::Tensor(e) => write!(f, "{e}"),
            EvalErrorKind::MissingInput(n) => write!(f, "no input tensor supplied for `{n}`"),
            EvalErrorKind::MissingWeight(l) => write!(f, "no weight for label `{l}`"),
            EvalErrorKind::InputShape {
                name,
                declared,
                found,
            } => write!(f, "`{name}` declared {declared:?} but given {found:?}"),
            EvalErrorKind::Undefined(v) => write!(f, "`{v}` is not available"),
            EvalErrorKind::SyncInstruction => {
                f.write_str("sync instructions need the item runtime")
            }
        }
    }
}

fn declared(inst: &Instruction) -> Vec<usize> {
    inst.declared_shape()
        .unwrap_or(&[])
        .iter()
        .map(|&d| d.max(0) as usize)
        .collect()
}

/// Evaluates one declaration or compute instruction. `env` resolves
/// previously computed variables; `inputs` are the external tensors by name.
pub fn execute<'a>(
    inst: &Instruction,
    env: impl Fn(&str) -> Option<&'a Tensor>,
    inputs: &BTreeMap<String, Tensor>,
    weights: &WeightStore,
) -> Result<Tensor, EvalErrorKind> {
    let var = |name: &str| -> Result<&'a Tensor, EvalErrorKind> {
        env(name).ok_or_else(|| EvalErrorKind::Undefined(name.to_string()))
    };
    let arg_var = |param: &str| -> Result<&'a Tensor, EvalErrorKind> {
        match inst.arg(param) {
            Some(Argument::Var(v)) => var(v),
            _ => Err(EvalErrorKind::Tensor(TensorError::InvalidParameter(
                format!("missing `{param}`"),
            ))),
        }
    };
    let list = |name: &str| inst.int_list(name).unwrap_or(&[]);
    let tuples = |name: &str| inst.tuple_list(name).unwrap_or(&[]);
    let int = |name: &str| inst.int(name).unwrap_or_default();
    let t = EvalErrorKind::Tensor;

    match inst.op {
        Op::External => {
            let x = inputs
                .get(&inst.result)
                .ok_or_else(|| EvalErrorKind::MissingInput(inst.result.clone()))?;
            let shape = declared(inst);
            if x.shape() != shape.as_slice() {
                return Err(EvalErrorKind::InputShape {
                    name: inst.result.clone(),
                    declared: shape,
                    found: x.shape().to_vec(),
                });
            }
            Ok(x.clone())
        }
        Op::Variable => {
            let label = inst.label().unwrap_or(&inst.result);
            let w = weights
                .get(label)
                .ok_or_else(|| EvalErrorKind::MissingWeight(label.to_string()))?;
            let shape = declared(inst);
            if w.shape() != shape.as_slice() {
                return Err(EvalErrorKind::InputShape {
                    name: label.to_string(),
                    declared: shape,
                    found: w.shape().to_vec(),
                });
            }
            Ok(w.clone())
        }
        Op::Conv => ops::conv(
            arg_var("input")?,
            arg_var("filter")?,
            arg_var("bias")?,
            list("stride"),
            list("dilation"),
            tuples("padding"),
            int("groups"),
        )
        .map_err(t),
        Op::Relu => Ok(ops::relu(arg_var("x")?)),
        Op::MaxPool => ops::max_pool(
            arg_var("input")?,
            list("size"),
            list("stride"),
            list("dilation"),
            tuples("padding"),
            inst.string("border").unwrap_or_default(),
        )
        .map_err(t),
        Op::Reshape => ops::reshape(arg_var("input")?, list("shape")).map_err(t),
        Op::Linear => {
            ops::linear(arg_var("input")?, arg_var("weight")?, arg_var("bias")?).map_err(t)
        }
        Op::Softmax => ops::softmax(arg_var("x")?, int("axis")).map_err(t),
        Op::Concat => {
            let Some(Argument::VarList(names)) = inst.arg("values") else {
                return Err(t(TensorError::InvalidParameter("missing `values`".into())));
            };
            let parts = names
                .iter()
                .map(|n| var(n))
                .collect::<Result<Vec<_>, _>>()?;
            ops::concat(&parts, int("axis")).map_err(t)
        }
        Op::Split => {
            let ranges = tuples("ranges");
            if ranges.len() != 1 {
                return Err(t(TensorError::InvalidParameter(format!(
                    "split instruction must select exactly one range, got {}",
                    ranges.len()
                ))));
            }
            let mut parts = ops::split(arg_var("value")?, int("axis"), ranges).map_err(t)?;
            Ok(parts.remove(0))
        }
        Op::VariableSync | Op::GetVar | Op::SendVar => Err(EvalErrorKind::SyncInstruction),
    }
}

/// Runs the instructions in program order and returns every declared output.
pub fn evaluate(
    program: &NnefProgram,
    inputs: &BTreeMap<String, Tensor>,
    weights: &WeightStore,
) -> Result<BTreeMap<String, Tensor>, EvalError> {
    let mut env: HashMap<String, Tensor> = HashMap::new();
    for (index, inst) in program.instructions.iter().enumerate() {
        let value = execute(inst, |n| env.get(n), inputs, weights).map_err(|kind| EvalError {
            index,
            result: inst.result.clone(),
            kind,
        })?;
        env.insert(inst.result.clone(), value);
    }
    program
        .outputs
        .iter()
        .map(|name| {
            env.remove(name)
                .map(|t| (name.clone(), t))
                .ok_or_else(|| EvalError {
                    index: program.instructions.len(),
                    result: name.clone(),
                    kind: EvalErrorKind::Undefined(name.clone()),
                })
        })
        .collect()
}
