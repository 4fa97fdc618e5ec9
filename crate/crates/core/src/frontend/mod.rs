//! Lexing, parsing, validation and canonical printing of the NNEF subset,
//! including the `graphitem` / `variablesync` / `get_var` / `send_var`
//! extension for multi-item descriptions.

mod ast;
mod lexer;
mod parser;
mod serialize;
mod validate;
mod weights;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use ast::{ArgKind, Argument, Body, Instruction, ItemProgram, NnefProgram, Op, Param};
pub use lexer::{tokenize, Pos, Token, TokenKind};
pub use parser::{parse_item_program, parse_program};
pub use serialize::{format_argument, format_instruction, serialize_item, serialize_program};
pub use validate::{validate_item_set, validate_ssa, ValidationReport, Violation, ViolationKind};
pub use weights::{
    decode_tensor, encode_tensor, load_weights, read_tensor_file, weight_path, write_tensor_file,
    WeightStore, MAGIC,
};

#[derive(Debug, Error)]
pub enum FrontendError {
    #[error("{pos}: {message}")]
    Lex { pos: Pos, message: String },
    #[error("{pos}: {message}")]
    Parse { pos: Pos, message: String },
    #[error("{pos}: `{op}`: {message}")]
    Arity { pos: Pos, op: Op, message: String },
    #[error("{pos}: variablesync `{sync}` has a second send_var")]
    DuplicateWriter { pos: Pos, sync: String },
    #[error("no weight file for `{label}` (looked for {})", path.display())]
    MissingWeight { label: String, path: PathBuf },
    #[error("weight `{label}`: declared shape {declared:?}, file header {found:?} with {elements} values")]
    ShapeMismatch {
        label: String,
        declared: Vec<i64>,
        found: Vec<usize>,
        elements: usize,
    },
    #[error("malformed tensor file: {0}")]
    BadTensorFile(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl FrontendError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        FrontendError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}
