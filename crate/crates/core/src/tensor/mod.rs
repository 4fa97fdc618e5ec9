//! Reference functional semantics over dense float32 tensors.
//!
//! Layout is row-major with an implicit batch of 1. Image tensors are
//! `(channel, height, width)`, optionally prefixed by the batch dimension
//! (`[1, c, h, w]`), which is the order of the 4-entry constant lists in
//! descriptions. The padding and pooling functions are usually stated on
//! `(height, width, channel)` tensors; the mapping used here is
//! `hwc[x][y][z] == chw[z][x][y]`.

mod eval;
mod ops;
mod shape;

use std::fmt;

use thiserror::Error;

pub use eval::{evaluate, execute, EvalError, EvalErrorKind};
pub use ops::{
    concat, conv, linear, max_pool, pad, pool, relu, reshape, softmax, split, PaddingSpec,
    PoolSpec, MIN_F,
};
pub use shape::{infer_shapes, output_shape};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TensorError {
    #[error("expected rank {expected}, found shape {found:?}")]
    Rank { expected: String, found: Vec<usize> },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("axis {axis} out of range for rank {rank}")]
    AxisOutOfRange { axis: i64, rank: usize },
    #[error("cannot reshape {from} elements into {to:?}")]
    ElementCountMismatch { from: usize, to: Vec<i64> },
    #[error("input has {input} channels but the filter expects {filter}")]
    ChannelMismatch { input: usize, filter: usize },
    #[error("groups = {0} is not supported (only 1)")]
    UnsupportedGroups(i64),
    #[error("dilation {0:?} is not supported (only 1)")]
    UnsupportedDilation(Vec<i64>),
    #[error("border mode '{0}' is not supported (only 'ignore')")]
    UnsupportedBorder(String),
    #[error("window {window:?} does not fit in padded extent {extent:?}")]
    WindowTooLarge {
        window: (usize, usize),
        extent: (usize, usize),
    },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("data length {found} does not match shape {shape:?}")]
    DataLength { shape: Vec<usize>, found: usize },
}

/// Dense row-major float32 tensor.
#[derive(Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f32>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f32>) -> Result<Self, TensorError> {
        if shape.is_empty() || shape.contains(&0) || shape.iter().product::<usize>() != data.len() {
            return Err(TensorError::DataLength {
                shape,
                found: data.len(),
            });
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Tensor::filled(shape, 0.0)
    }

    pub fn filled(shape: &[usize], value: f32) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![value; shape.iter().product()],
        }
    }

    pub fn from_fn(shape: &[usize], mut f: impl FnMut(usize) -> f32) -> Self {
        let n = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: (0..n).map(&mut f).collect(),
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    /// Equal shapes and identical bit patterns.
    pub fn bit_eq(&self, other: &Tensor) -> bool {
        self.shape == other.shape
            && self
                .data
                .iter()
                .zip(&other.data)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }

    /// `(c, h, w)` view of a rank-3 tensor or a rank-4 tensor with batch 1.
    pub(crate) fn chw(&self) -> Result<(usize, usize, usize), TensorError> {
        match self.shape.as_slice() {
            [c, h, w] => Ok((*c, *h, *w)),
            [1, c, h, w] => Ok((*c, *h, *w)),
            _ => Err(TensorError::Rank {
                expected: "3 (c,h,w) or 4 (1,c,h,w)".into(),
                found: self.shape.clone(),
            }),
        }
    }
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        const SHOWN: usize = 8;
        write!(f, "Tensor{:?}", self.shape)?;
        if self.data.len() <= SHOWN {
            write!(f, "{:?}", self.data)
        } else {
            write!(f, "{:?}..", &self.data[..SHOWN])
        }
    }
}
