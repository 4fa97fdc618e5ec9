use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use nnefx::frontend::{load_weights, read_tensor_file, tokenize, Body, FrontendError, TokenKind};
use nnefx::{parse_item_program, parse_program, validate_item_set, validate_ssa};
use nnefx::{ItemProgram, NnefProgram, Op, Tensor, WeightStore};

/// A failed command, with its exit code.
#[derive(Debug)]
pub enum Failure {
    Validation(String),
    Missing(String),
    Semantic(String),
    Deadlock(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 2,
            Failure::Missing(_) => 3,
            Failure::Semantic(_) => 4,
            Failure::Deadlock(_) => 5,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Validation(m)
            | Failure::Missing(m)
            | Failure::Semantic(m)
            | Failure::Deadlock(m) => f.write_str(m),
        }
    }
}

impl From<FrontendError> for Failure {
    fn from(e: FrontendError) -> Self {
        match e {
            FrontendError::MissingWeight { .. } | FrontendError::Io { .. } => {
                Failure::Missing(e.to_string())
            }
            _ => Failure::Validation(e.to_string()),
        }
    }
}

pub type Outcome = Result<(), Failure>;

pub fn read_text(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Missing(format!("{}: {e}", path.display())))
}

/// Whether the text starts an item description (has a `graphitem` header).
pub fn is_item_text(text: &str) -> bool {
    tokenize(text)
        .map(|toks| {
            toks.iter()
                .take_while(|t| t.kind != TokenKind::LBrace)
                .any(|t| matches!(&t.kind, TokenKind::Ident(s) if s == "graphitem"))
        })
        .unwrap_or(false)
}

pub fn load_model(path: &Path) -> Result<NnefProgram, Failure> {
    let text = read_text(path)?;
    let program = parse_program(&text)
        .map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))?;
    let report = validate_ssa(&program);
    if !report.is_empty() {
        return Err(Failure::Validation(format!(
            "{}:\n{report}",
            path.display()
        )));
    }
    Ok(program)
}

/// Parses item descriptions without checking them as a set.
pub fn parse_items(paths: &[PathBuf]) -> Result<Vec<ItemProgram>, Failure> {
    paths
        .iter()
        .map(|p| {
            let text = read_text(p)?;
            parse_item_program(&text)
                .map_err(|e| Failure::Validation(format!("{}: {e}", p.display())))
        })
        .collect()
}

pub fn load_items(paths: &[PathBuf]) -> Result<Vec<ItemProgram>, Failure> {
    let items = parse_items(paths)?;
    let report = validate_item_set(&items);
    if !report.is_empty() {
        return Err(Failure::Validation(report.to_string()));
    }
    Ok(items)
}

pub fn weights_for<B: Body>(dir: Option<&Path>, bodies: &[&B]) -> Result<WeightStore, Failure> {
    let dir = dir.ok_or_else(|| Failure::Missing("--weights DIR is required".into()))?;
    let mut store = WeightStore::new();
    for b in bodies {
        for (label, t) in load_weights(dir, *b)?.iter() {
            store.insert(label, t.clone());
        }
    }
    Ok(store)
}

/// Input tensors for the `external` declarations of `bodies`: a directory
/// holding `<name>.dat` per input, or a single tensor file when there is one
/// input.
pub fn inputs_for<B: Body>(
    path: Option<&Path>,
    bodies: &[&B],
) -> Result<BTreeMap<String, Tensor>, Failure> {
    let path = path.ok_or_else(|| Failure::Missing("--input FILE|DIR is required".into()))?;
    let mut names: Vec<&str> = Vec::new();
    for b in bodies {
        for inst in b.instructions().iter().filter(|i| i.op == Op::External) {
            if !names.contains(&inst.result.as_str()) {
                names.push(&inst.result);
            }
        }
    }
    let mut inputs = BTreeMap::new();
    if path.is_dir() {
        for name in names {
            let file = path.join(format!("{name}.dat"));
            if !file.exists() {
                return Err(Failure::Missing(format!(
                    "no input file {}",
                    file.display()
                )));
            }
            inputs.insert(name.to_string(), read_tensor_file(&file)?);
        }
    } else if !path.exists() {
        return Err(Failure::Missing(format!(
            "{}: no such file",
            path.display()
        )));
    } else {
        match names.as_slice() {
            [name] => {
                inputs.insert(name.to_string(), read_tensor_file(path)?);
            }
            _ => {
                return Err(Failure::Validation(format!(
                    "the model has {} inputs; pass a directory of <name>.dat files",
                    names.len()
                )))
            }
        }
    }
    Ok(inputs)
}
