//! Max-pooling padding conventions of common training frameworks, written
//! as explicit `max_pool` instructions.
//!
//! Keras only knows `valid` (no padding) and `same` (padding on the bottom
//! and right borders to fit the pool); PyTorch pads every border by the same
//! amount per axis. The two cannot be converted into one another by
//! changing the pooling parameters alone.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::frontend::{format_instruction, Argument, Instruction, Op};
use crate::tensor::{output_shape, TensorError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PoolConvention {
    KerasValid,
    KerasSame,
    /// `padding` given as rows added at top and bottom, columns at left and right.
    Torch {
        pad_h: usize,
        pad_w: usize,
    },
}

impl fmt::Display for PoolConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PoolConvention::KerasValid => f.write_str("keras-valid"),
            PoolConvention::KerasSame => f.write_str("keras-same"),
            PoolConvention::Torch { pad_h, pad_w } if pad_h == pad_w => write!(f, "torch-{pad_h}"),
            PoolConvention::Torch { pad_h, pad_w } => write!(f, "torch-{pad_h},{pad_w}"),
        }
    }
}

impl FromStr for PoolConvention {
    type Err = String;

    /// `keras-valid`, `keras-same`, `torch-P` or `torch-PH,PW`.
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "keras-valid" => return Ok(PoolConvention::KerasValid),
            "keras-same" => return Ok(PoolConvention::KerasSame),
            _ => {}
        }
        let bad =
            || format!("unknown convention `{s}` (keras-valid, keras-same, torch-P, torch-PH,PW)");
        let pads = s.strip_prefix("torch-").ok_or_else(bad)?;
        let nums = pads
            .split(',')
            .map(|p| p.trim().parse::<usize>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| bad())?;
        match nums.as_slice() {
            [p] => Ok(PoolConvention::Torch {
                pad_h: *p,
                pad_w: *p,
            }),
            [h, w] => Ok(PoolConvention::Torch {
                pad_h: *h,
                pad_w: *w,
            }),
            _ => Err(bad()),
        }
    }
}

/// Canonical parameters of a 2D max pooling over `[1, c, h, w]` tensors.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MaxPoolEncoding {
    pub size: Vec<i64>,
    pub stride: Vec<i64>,
    pub dilation: Vec<i64>,
    pub padding: Vec<(i64, i64)>,
    pub border: String,
}

impl MaxPoolEncoding {
    pub fn instruction(&self, result: &str, input: &str) -> Instruction {
        Instruction::new(
            result,
            Op::MaxPool,
            vec![
                Argument::Var(input.to_string()),
                Argument::IntList(self.size.clone()),
                Argument::IntList(self.stride.clone()),
                Argument::IntList(self.dilation.clone()),
                Argument::TupleList(self.padding.clone()),
                Argument::Str(self.border.clone()),
            ],
        )
    }

    /// The instruction as description text.
    pub fn to_nnef(&self, result: &str, input: &str) -> String {
        format_instruction(&self.instruction(result, input))
    }

    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>, TensorError> {
        output_shape(&self.instruction("y", "x"), |_| Some(input.to_vec()))
    }
}

/// Encoding of a `kernel` x `kernel` pooling with stride `stride` under `convention`.
pub fn encode_max_pool(
    convention: PoolConvention,
    kernel: usize,
    stride: usize,
) -> MaxPoolEncoding {
    let (k, s) = (kernel as i64, stride as i64);
    let spatial = match convention {
        PoolConvention::KerasValid => [(0, 0), (0, 0)],
        PoolConvention::KerasSame => [(0, k - 1), (0, k - 1)],
        PoolConvention::Torch { pad_h, pad_w } => {
            [(pad_h as i64, pad_h as i64), (pad_w as i64, pad_w as i64)]
        }
    };
    MaxPoolEncoding {
        size: vec![1, 1, k, k],
        stride: vec![1, 1, s, s],
        dilation: vec![1, 1, 1, 1],
        padding: vec![(0, 0), (0, 0), spatial[0], spatial[1]],
        border: "ignore".into(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_names() {
        assert_eq!("keras-same".parse(), Ok(PoolConvention::KerasSame));
        assert_eq!(
            "torch-1".parse(),
            Ok(PoolConvention::Torch { pad_h: 1, pad_w: 1 })
        );
        assert_eq!(
            "torch-1,0".parse(),
            Ok(PoolConvention::Torch { pad_h: 1, pad_w: 0 })
        );
        assert!("caffe".parse::<PoolConvention>().is_err());
        assert_eq!(
            PoolConvention::Torch { pad_h: 2, pad_w: 2 }.to_string(),
            "torch-2"
        );
    }

    #[test]
    fn valid_is_unpadded() {
        let e = encode_max_pool(PoolConvention::KerasValid, 2, 2);
        assert!(e.padding.iter().all(|&p| p == (0, 0)));
        assert_eq!(e.output_shape(&[1, 1, 28, 28]).unwrap(), vec![1, 1, 14, 14]);
    }
}
