use std::collections::BTreeMap;

use super::ops::{concat_shape, conv_geometry, max_pool_params, reshape_target, split_shapes};
use super::{EvalError, TensorError};
use crate::frontend::{Body, Instruction, Op};

fn dims(shape: &[i64]) -> Result<Vec<usize>, TensorError> {
    shape
        .iter()
        .map(|&d| usize::try_from(d).ok().filter(|&d| d > 0))
        .collect::<Option<Vec<_>>>()
        .filter(|d| !d.is_empty())
        .ok_or_else(|| TensorError::InvalidParameter(format!("declared shape {shape:?}")))
}

fn missing(name: &str, what: &str) -> TensorError {
    TensorError::InvalidParameter(format!("{what} `{name}` has no known shape"))
}

fn arg_shape(
    inst: &Instruction,
    param: &str,
    shape_of: &impl Fn(&str) -> Option<Vec<usize>>,
) -> Result<Vec<usize>, TensorError> {
    match inst.arg(param) {
        Some(crate::frontend::Argument::Var(v)) => {
            shape_of(v).ok_or_else(|| missing(v, "variable"))
        }
        _ => Err(TensorError::InvalidParameter(format!(
            "`{}` lacks `{param}`",
            inst.op
        ))),
    }
}

fn list<'a>(inst: &'a Instruction, name: &str) -> Result<&'a [i64], TensorError> {
    inst.int_list(name)
        .ok_or_else(|| TensorError::InvalidParameter(format!("`{}` lacks `{name}`", inst.op)))
}

fn tuples<'a>(inst: &'a Instruction, name: &str) -> Result<&'a [(i64, i64)], TensorError> {
    inst.tuple_list(name)
        .ok_or_else(|| TensorError::InvalidParameter(format!("`{}` lacks `{name}`", inst.op)))
}

fn int(inst: &Instruction, name: &str) -> Result<i64, TensorError> {
    inst.int(name)
        .ok_or_else(|| TensorError::InvalidParameter(format!("`{}` lacks `{name}`", inst.op)))
}

/// Shape of an instruction's result computed from its operands' shapes,
/// without touching any data.
pub fn output_shape(
    inst: &Instruction,
    shape_of: impl Fn(&str) -> Option<Vec<usize>>,
) -> Result<Vec<usize>, TensorError> {
    match inst.op {
        Op::External | Op::Variable | Op::VariableSync => dims(list(inst, "shape")?),
        Op::Relu => arg_shape(inst, "x", &shape_of),
        Op::Softmax => {
            let s = arg_shape(inst, "x", &shape_of)?;
            super::ops::check_axis(int(inst, "axis")?, s.len())?;
            Ok(s)
        }
        Op::Reshape => {
            let s = arg_shape(inst, "input", &shape_of)?;
            reshape_target(s.iter().product(), list(inst, "shape")?)
        }
        Op::Linear => {
            let w = arg_shape(inst, "weight", &shape_of)?;
            let x = arg_shape(inst, "input", &shape_of)?;
            let b = arg_shape(inst, "bias", &shape_of)?;
            match w.as_slice() {
                [n_out, n_in]
                    if x.iter().product::<usize>() == *n_in
                        && b.iter().product::<usize>() == *n_out =>
                {
                    Ok(vec![1, *n_out])
                }
                _ => Err(TensorError::ShapeMismatch(format!(
                    "linear input {x:?}, weight {w:?}, bias {b:?}"
                ))),
            }
        }
        Op::Conv => {
            let x = arg_shape(inst, "input", &shape_of)?;
            let f = arg_shape(inst, "filter", &shape_of)?;
            let b = arg_shape(inst, "bias", &shape_of)?;
            let g = conv_geometry(
                &x,
                &f,
                b.iter().product(),
                list(inst, "stride")?,
                list(inst, "dilation")?,
                tuples(inst, "padding")?,
                int(inst, "groups")?,
            )?;
            Ok(if x.len() == 4 {
                vec![1, g.out_c, g.oh, g.ow]
            } else {
                vec![g.out_c, g.oh, g.ow]
            })
        }
        Op::MaxPool => {
            let x = arg_shape(inst, "input", &shape_of)?;
            let border = inst.string("border").unwrap_or_default();
            let p = max_pool_params(
                x.len(),
                list(inst, "size")?,
                list(inst, "stride")?,
                list(inst, "dilation")?,
                tuples(inst, "padding")?,
                border,
            )?;
            let n = x.len();
            let (h, w) = (x[n - 2], x[n - 1]);
            let ph = h + p.pad.top + p.pad.bottom;
            let pw = w + p.pad.left + p.pad.right;
            if p.pool.kh > ph || p.pool.kw > pw {
                return Err(TensorError::WindowTooLarge {
                    window: (p.pool.kh, p.pool.kw),
                    extent: (ph, pw),
                });
            }
            let mut out = x.clone();
            out[n - 2] = (ph - p.pool.kh) / p.pool.sh + 1;
            out[n - 1] = (pw - p.pool.kw) / p.pool.sw + 1;
            Ok(out)
        }
        Op::Concat => {
            let Some(crate::frontend::Argument::VarList(vs)) = inst.arg("values") else {
                return Err(TensorError::InvalidParameter(
                    "concat lacks `values`".into(),
                ));
            };
            let shapes = vs
                .iter()
                .map(|v| shape_of(v).ok_or_else(|| missing(v, "variable")))
                .collect::<Result<Vec<_>, _>>()?;
            let refs: Vec<&[usize]> = shapes.iter().map(Vec::as_slice).collect();
            concat_shape(&refs, int(inst, "axis")?)
        }
        Op::Split => {
            let x = arg_shape(inst, "value", &shape_of)?;
            let ranges = tuples(inst, "ranges")?;
            if ranges.len() != 1 {
                return Err(TensorError::InvalidParameter(format!(
                    "split instruction must select exactly one range, got {}",
                    ranges.len()
                )));
            }
            Ok(split_shapes(&x, int(inst, "axis")?, ranges)?.remove(0))
        }
        Op::GetVar | Op::SendVar => Err(TensorError::InvalidParameter(format!(
            "`{}` has no local shape rule",
            inst.op
        ))),
    }
}

/// Shapes of every tensor variable of a description. A `get_var` takes the
/// shape of its sync variable when the same body declares it.
pub fn infer_shapes<B: Body + ?Sized>(
    program: &B,
) -> Result<BTreeMap<String, Vec<usize>>, EvalError> {
    let mut shapes: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    let mut sync_shapes: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (index, inst) in program.instructions().iter().enumerate() {
        let wrap = |e: TensorError| EvalError::tensor(index, inst, e);
        match inst.op {
            Op::SendVar => {}
            Op::VariableSync => {
                let s = output_shape(inst, |_| None).map_err(wrap)?;
                sync_shapes.insert(inst.result.clone(), s);
            }
            Op::GetVar => {
                let (_, sync) = inst.get_var_parts().unwrap_or_default();
                let s = sync_shapes
                    .get(sync)
                    .cloned()
                    .ok_or_else(|| wrap(missing(sync, "variablesync")))?;
                shapes.insert(inst.result.clone(), s);
            }
            _ => {
                let s = output_shape(inst, |v| shapes.get(v).cloned()).map_err(wrap)?;
                shapes.insert(inst.result.clone(), s);
            }
        }
    }
    Ok(shapes)
}
