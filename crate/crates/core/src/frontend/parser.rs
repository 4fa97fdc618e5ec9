use std::collections::HashSet;

use super::ast::{ArgKind, Argument, Instruction, ItemProgram, NnefProgram, Op};
use super::lexer::{tokenize, Pos, Token, TokenKind};
use super::FrontendError;

/// Argument value before it is matched against an op signature.
#[derive(Debug, Clone, PartialEq)]
enum RawValue {
    Ident(String),
    Int(i64),
    Float(f64),
    Str(String),
    List(Vec<RawValue>),
    Tuple(Vec<RawValue>),
}

#[derive(Debug)]
struct RawArg {
    name: Option<String>,
    value: RawValue,
    pos: Pos,
}

struct ItemDecl {
    item_id: String,
    node_name: String,
    inputs: Vec<String>,
    outputs: Vec<String>,
}

struct Document {
    graph_name: String,
    inputs: Vec<String>,
    outputs: Vec<String>,
    item: Option<ItemDecl>,
    instructions: Vec<(Instruction, Pos)>,
}

struct Parser<'t> {
    tokens: &'t [Token],
    idx: usize,
}

impl<'t> Parser<'t> {
    fn peek(&self) -> Option<&'t Token> {
        self.tokens.get(self.idx)
    }

    fn pos(&self) -> Pos {
        self.peek()
            .map(|t| t.pos)
            .or_else(|| self.tokens.last().map(|t| t.pos))
            .unwrap_or_default()
    }

    fn error(&self, message: impl Into<String>) -> FrontendError {
        FrontendError::Parse {
            pos: self.pos(),
            message: message.into(),
        }
    }

    fn next(&mut self) -> Option<&'t Token> {
        let t = self.tokens.get(self.idx);
        if t.is_some() {
            self.idx += 1;
        }
        t
    }

    fn at(&self, kind: &TokenKind) -> bool {
        self.peek().is_some_and(|t| &t.kind == kind)
    }

    fn expect(&mut self, kind: TokenKind) -> Result<Pos, FrontendError> {
        match self.peek() {
            Some(t) if t.kind == kind => {
                self.idx += 1;
                Ok(t.pos)
            }
            Some(t) => Err(self.error(format!("expected {kind}, found {}", t.kind))),
            None => Err(self.error(format!("expected {kind}, found end of input"))),
        }
    }

    fn ident(&mut self) -> Result<String, FrontendError> {
        match self.peek() {
            Some(Token {
                kind: TokenKind::Ident(s),
                ..
            }) => {
                self.idx += 1;
                Ok(s.clone())
            }
            Some(t) => Err(self.error(format!("expected identifier, found {}", t.kind))),
            None => Err(self.error("expected identifier, found end of input")),
        }
    }

    fn keyword(&mut self, word: &str) -> Result<(), FrontendError> {
        match self.peek() {
            Some(Token {
                kind: TokenKind::Ident(s),
                ..
            }) if s == word => {
                self.idx += 1;
                Ok(())
            }
            _ => Err(self.error(format!("expected `{word}`"))),
        }
    }

    fn ident_list(&mut self) -> Result<Vec<String>, FrontendError> {
        self.expect(TokenKind::LParen)?;
        let mut out = Vec::new();
        if !self.at(&TokenKind::RParen) {
            loop {
                out.push(self.ident()?);
                if self.at(&TokenKind::Comma) {
                    self.idx += 1;
                } else {
                    break;
                }
            }
        }
        self.expect(TokenKind::RParen)?;
        Ok(out)
    }

    fn signature(&mut self) -> Result<(Vec<String>, Vec<String>), FrontendError> {
        let inputs = self.ident_list()?;
        self.expect(TokenKind::Arrow)?;
        let outputs = self.ident_list()?;
        Ok((inputs, outputs))
    }

    fn document(&mut self) -> Result<Document, FrontendError> {
        self.keyword("graph")?;
        let graph_name = self.ident()?;
        let (inputs, outputs) = self.signature()?;
        let item = if matches!(self.peek(), Some(Token { kind: TokenKind::Ident(s), .. }) if s == "graphitem")
        {
            self.idx += 1;
            let item_id = self.ident()?;
            let node_name = self.ident()?;
            let (inputs, outputs) = self.signature()?;
            Some(ItemDecl {
                item_id,
                node_name,
                inputs,
                outputs,
            })
        } else {
            None
        };
        self.expect(TokenKind::LBrace)?;
        let mut instructions = Vec::new();
        while !self.at(&TokenKind::RBrace) {
            if self.peek().is_none() {
                return Err(self.error("unexpected end of input inside graph body"));
            }
            instructions.push(self.instruction()?);
        }
        self.expect(TokenKind::RBrace)?;
        if let Some(t) = self.peek() {
            return Err(FrontendError::Parse {
                pos: t.pos,
                message: format!("trailing {} after graph body", t.kind),
            });
        }
        Ok(Document {
            graph_name,
            inputs,
            outputs,
            item,
            instructions,
        })
    }

    fn instruction(&mut self) -> Result<(Instruction, Pos), FrontendError> {
        let pos = self.pos();
        let result = self.ident()?;
        self.expect(TokenKind::Eq)?;
        let op_pos = self.pos();
        let op_name = self.ident()?;
        let op = Op::from_name(&op_name).ok_or_else(|| FrontendError::Parse {
            pos: op_pos,
            message: format!("unknown fragment `{op_name}`"),
        })?;
        self.expect(TokenKind::LParen)?;
        let mut raw = Vec::new();
        if !self.at(&TokenKind::RParen) {
            loop {
                raw.push(self.raw_arg()?);
                if self.at(&TokenKind::Comma) {
                    self.idx += 1;
                } else {
                    break;
                }
            }
        }
        self.expect(TokenKind::RParen)?;
        self.expect(TokenKind::Semi)?;
        let args = normalize(op, raw, op_pos)?;
        Ok((Instruction { result, op, args }, pos))
    }

    fn raw_arg(&mut self) -> Result<RawArg, FrontendError> {
        let pos = self.pos();
        let named = matches!(
            (self.tokens.get(self.idx), self.tokens.get(self.idx + 1)),
            (
                Some(Token {
                    kind: TokenKind::Ident(_),
                    ..
                }),
                Some(Token {
                    kind: TokenKind::Eq,
                    ..
                })
            )
        );
        let name = if named {
            let n = self.ident()?;
            self.expect(TokenKind::Eq)?;
            Some(n)
        } else {
            None
        };
        let value = self.value()?;
        Ok(RawArg { name, value, pos })
    }

    fn value(&mut self) -> Result<RawValue, FrontendError> {
        let tok = self
            .next()
            .ok_or_else(|| self.error("expected argument value, found end of input"))?;
        Ok(match &tok.kind {
            TokenKind::Ident(s) => RawValue::Ident(s.clone()),
            TokenKind::Int(v) => RawValue::Int(*v),
            TokenKind::Float(v) => RawValue::Float(*v),
            TokenKind::Str(s) => RawValue::Str(s.clone()),
            TokenKind::LBracket => RawValue::List(self.sequence(TokenKind::RBracket)?),
            TokenKind::LParen => RawValue::Tuple(self.sequence(TokenKind::RParen)?),
            other => {
                return Err(FrontendError::Parse {
                    pos: tok.pos,
                    message: format!("expected argument value, found {other}"),
                })
            }
        })
    }

    fn sequence(&mut self, close: TokenKind) -> Result<Vec<RawValue>, FrontendError> {
        let mut out = Vec::new();
        if !self.at(&close) {
            loop {
                out.push(self.value()?);
                if self.at(&TokenKind::Comma) {
                    self.idx += 1;
                } else {
                    break;
                }
            }
        }
        self.expect(close)?;
        Ok(out)
    }
}

fn normalize(op: Op, raw: Vec<RawArg>, pos: Pos) -> Result<Vec<Argument>, FrontendError> {
    let sig = op.signature();
    let arity = |message: String| FrontendError::Arity { pos, op, message };
    let mut slots: Vec<Option<Argument>> = vec![None; sig.len()];
    let mut next_positional = 0;
    for arg in raw {
        let idx = match &arg.name {
            Some(name) => sig
                .iter()
                .position(|p| p.name == name)
                .ok_or_else(|| arity(format!("unknown parameter `{name}`")))?,
            None => {
                let i = next_positional;
                if i >= sig.len() {
                    return Err(arity(format!(
                        "too many arguments (expected {})",
                        sig.len()
                    )));
                }
                next_positional += 1;
                i
            }
        };
        if slots[idx].is_some() {
            return Err(arity(format!("parameter `{}` given twice", sig[idx].name)));
        }
        let value = convert(sig[idx].kind, arg.value).ok_or_else(|| FrontendError::Arity {
            pos: arg.pos,
            op,
            message: format!("parameter `{}` expects {:?}", sig[idx].name, sig[idx].kind),
        })?;
        slots[idx] = Some(value);
    }
    slots
        .into_iter()
        .zip(sig)
        .map(|(slot, p)| slot.ok_or_else(|| arity(format!("missing parameter `{}`", p.name))))
        .collect()
}

fn convert(kind: ArgKind, value: RawValue) -> Option<Argument> {
    let ident_list = |items: Vec<RawValue>| -> Option<Vec<String>> {
        items
            .into_iter()
            .map(|v| match v {
                RawValue::Ident(s) => Some(s),
                _ => None,
            })
            .collect()
    };
    Some(match (kind, value) {
        (ArgKind::Var, RawValue::Ident(s)) => Argument::Var(s),
        (ArgKind::Item, RawValue::Ident(s)) => Argument::Item(s),
        (ArgKind::Sync, RawValue::Ident(s)) => Argument::Sync(s),
        (ArgKind::Int, RawValue::Int(v)) => Argument::Int(v),
        (ArgKind::Str, RawValue::Str(s)) => Argument::Str(s),
        (ArgKind::VarList, RawValue::List(items)) => Argument::VarList(ident_list(items)?),
        (ArgKind::ItemList, RawValue::List(items)) => Argument::ItemList(ident_list(items)?),
        (ArgKind::IntList, RawValue::List(items)) => Argument::IntList(
            items
                .into_iter()
                .map(|v| match v {
                    RawValue::Int(i) => Some(i),
                    _ => None,
                })
                .collect::<Option<_>>()?,
        ),
        (ArgKind::TupleList, RawValue::List(items)) => Argument::TupleList(
            items
                .into_iter()
                .map(|v| match v {
                    RawValue::Tuple(t) => match t.as_slice() {
                        [RawValue::Int(a), RawValue::Int(b)] => Some((*a, *b)),
                        _ => None,
                    },
                    _ => None,
                })
                .collect::<Option<_>>()?,
        ),
        _ => return None,
    })
}

fn parse_document(source: &str) -> Result<Document, FrontendError> {
    let tokens = tokenize(source)?;
    Parser {
        tokens: &tokens,
        idx: 0,
    }
    .document()
}

/// Parses a single-item description. Rejects `graphitem` headers and sync fragments.
pub fn parse_program(source: &str) -> Result<NnefProgram, FrontendError> {
    let doc = parse_document(source)?;
    if doc.item.is_some() {
        return Err(FrontendError::Parse {
            pos: Pos::default(),
            message: "unexpected `graphitem` header in a single-item description".into(),
        });
    }
    if let Some((inst, pos)) = doc.instructions.iter().find(|(i, _)| i.op.is_sync()) {
        return Err(FrontendError::Parse {
            pos: *pos,
            message: format!("`{}` is only allowed inside a graphitem", inst.op),
        });
    }
    Ok(NnefProgram {
        graph_name: doc.graph_name,
        inputs: doc.inputs,
        outputs: doc.outputs,
        instructions: doc.instructions.into_iter().map(|(i, _)| i).collect(),
    })
}

/// Parses one item description (a graph followed by its `graphitem` header).
pub fn parse_item_program(source: &str) -> Result<ItemProgram, FrontendError> {
    let doc = parse_document(source)?;
    let item = doc.item.ok_or_else(|| FrontendError::Parse {
        pos: Pos::default(),
        message: "missing `graphitem` header".into(),
    })?;
    let mut written = HashSet::new();
    for (inst, pos) in &doc.instructions {
        if inst.op == Op::SendVar && !written.insert(inst.result.as_str()) {
            return Err(FrontendError::DuplicateWriter {
                pos: *pos,
                sync: inst.result.clone(),
            });
        }
    }
    Ok(ItemProgram {
        graph_name: doc.graph_name,
        graph_inputs: doc.inputs,
        graph_outputs: doc.outputs,
        item_id: item.item_id,
        node_name: item.node_name,
        inputs: item.inputs,
        outputs: item.outputs,
        instructions: doc.instructions.into_iter().map(|(i, _)| i).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn named_and_positional_normalize_identically() {
        let a = parse_program(
            "graph g(x) -> (y) { x = external(shape = [1, 4]); y = softmax(x, axis = 1); }",
        )
        .unwrap();
        let b = parse_program(
            "graph g(x) -> (y) { x = external([1, 4]); y = softmax(axis = 1, x = x); }",
        )
        .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn missing_stride_is_arity_error() {
        let src = "graph g(e1) -> (o1) {
            e1 = external(shape = [1, 1, 4, 4]);
            v1 = variable(shape = [1, 1, 1, 1], label = 'v1');
            v2 = variable(shape = [1, 1], label = 'v2');
            o1 = conv(e1, v1, v2, dilation = [1, 1], padding = [(0, 0), (0, 0)], groups = 1);
        }";
        match parse_program(src) {
            Err(FrontendError::Arity { op, message, .. }) => {
                assert_eq!(op, Op::Conv);
                assert!(message.contains("stride"), "{message}");
            }
            other => panic!("expected arity error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_fragment_rejected() {
        let err = parse_program("graph g() -> () { a = sigmoid(b); }").unwrap_err();
        assert!(matches!(err, FrontendError::Parse { .. }));
    }

    #[test]
    fn empty_body() {
        let p = parse_program("graph g() -> () { }").unwrap();
        assert!(p.instructions.is_empty());
        assert!(p.outputs.is_empty());
    }

    #[test]
    fn wrong_argument_kind() {
        let err = parse_program("graph g(x) -> (y) { y = relu([1, 2]); }").unwrap_err();
        assert!(matches!(err, FrontendError::Arity { .. }));
    }

    #[test]
    fn sync_ops_need_graphitem() {
        let err =
            parse_program("graph g(x) -> (y) { s = variablesync(shape = [1]); }").unwrap_err();
        assert!(matches!(err, FrontendError::Parse { .. }));
    }

    #[test]
    fn item_header_parsed() {
        let p = parse_item_program(
            "graph g(e1) -> (out) graphitem item2 g() -> () {
                o1 = get_var(source = item1, data = o1_sync);
                o2 = relu(o1);
                o2_sync = variablesync(shape = [1, 4]);
                o2_sync = send_var(dest = [item1], data = o2);
            }",
        )
        .unwrap();
        assert_eq!(p.item_id, "item2");
        assert_eq!(p.node_name, "g");
        assert_eq!(p.gets().count(), 1);
        assert_eq!(p.sends().count(), 1);
        assert!(p.declares_sync("o2_sync"));
    }

    #[test]
    fn duplicate_writer() {
        let err = parse_item_program(
            "graph g() -> () graphitem i1 g() -> () {
                a = external(shape = [1]);
                s = variablesync(shape = [1]);
                s = send_var(dest = [i2], data = a);
                s = send_var(dest = [i3], data = a);
            }",
        )
        .unwrap_err();
        assert!(matches!(err, FrontendError::DuplicateWriter { ref sync, .. } if sync == "s"));
    }

    #[test]
    fn trailing_tokens_rejected() {
        assert!(parse_program("graph g() -> () { } x").is_err());
    }
}
