//! S-expression text format for trees.
//!
//! Grammar: `expr := atom | '(' op expr expr ')'` with operators
//! `+ - * pdiv`, the input terminal `x`, register terminals `R0`, `R1`, …
//! and decimal constants. Constants print with enough digits to parse back
//! to the identical bit pattern, so `from_sexpr(to_sexpr(t))` reproduces
//! `t` node for node.

use std::fmt::Write as _;

use thiserror::Error;

use crate::tree::{ExprTree, Node, NodeId, OpKind};

#[derive(Debug, Error, PartialEq)]
#[error("parse error at byte {pos}: {message}")]
pub struct ParseError {
    pub pos: usize,
    pub message: String,
}

fn err<T>(pos: usize, message: impl Into<String>) -> Result<T, ParseError> {
    Err(ParseError { pos, message: message.into() })
}

/// Render a tree in the textual format.
pub fn to_sexpr(tree: &ExprTree) -> String {
    let mut out = String::new();
    // Explicit stack; evolved trees can be deep.
    enum Step {
        Node(NodeId),
        Text(&'static str),
    }
    let mut stack = vec![Step::Node(NodeId::ROOT)];
    while let Some(step) = stack.pop() {
        match step {
            Step::Text(s) => out.push_str(s),
            Step::Node(id) => match tree.node(id) {
                Node::Var => out.push('x'),
                Node::Const(v) => {
                    let _ = write!(out, "{v}");
                }
                Node::Reg(r) => {
                    let _ = write!(out, "R{r}");
                }
                Node::Op { kind, left, right } => {
                    out.push('(');
                    out.push_str(kind.symbol());
                    out.push(' ');
                    stack.push(Step::Text(")"));
                    stack.push(Step::Node(right));
                    stack.push(Step::Text(" "));
                    stack.push(Step::Node(left));
                }
            },
        }
    }
    out
}

#[derive(Debug, PartialEq)]
enum Token<'a> {
    Open,
    Close,
    Atom(&'a str),
}

struct Lexer<'a> {
    input: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn new(input: &'a str) -> Self {
        Lexer { input, pos: 0 }
    }

    fn skip_ws(&mut self) {
        let rest = &self.input[self.pos..];
        let trimmed = rest.trim_start();
        self.pos += rest.len() - trimmed.len();
    }

    /// Next token plus its byte offset, or None at end of input.
    fn next(&mut self) -> Option<(Token<'a>, usize)> {
        self.skip_ws();
        let start = self.pos;
        let bytes = self.input.as_bytes();
        match bytes.get(self.pos)? {
            b'(' => {
                self.pos += 1;
                Some((Token::Open, start))
            }
            b')' => {
                self.pos += 1;
                Some((Token::Close, start))
            }
            _ => {
                let mut end = self.pos;
                while end < bytes.len()
                    && !bytes[end].is_ascii_whitespace()
                    && bytes[end] != b'('
                    && bytes[end] != b')'
                {
                    end += 1;
                }
                let atom = &self.input[start..end];
                self.pos = end;
                Some((Token::Atom(atom), start))
            }
        }
    }
}

fn parse_atom(atom: &str, pos: usize) -> Result<ExprTree, ParseError> {
    if atom == "x" {
        return Ok(ExprTree::leaf_var());
    }
    if let Some(digits) = atom.strip_prefix('R') {
        if !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit()) {
            return match digits.parse::<u16>() {
                Ok(r) => Ok(ExprTree::leaf_reg(r)),
                Err(_) => err(pos, format!("register index out of range in `{atom}`")),
            };
        }
    }
    match atom.parse::<f64>() {
        Ok(v) => Ok(ExprTree::leaf_const(v)),
        Err(_) => err(pos, format!("unexpected token `{atom}`")),
    }
}

fn parse_op(atom: &str, pos: usize) -> Result<OpKind, ParseError> {
    match atom {
        "+" => Ok(OpKind::Add),
        "-" => Ok(OpKind::Sub),
        "*" => Ok(OpKind::Mul),
        "pdiv" => Ok(OpKind::PDiv),
        _ => err(pos, format!("unknown operator `{atom}`")),
    }
}

/// Parse one expression; trailing non-whitespace input is an error.
pub fn from_sexpr(input: &str) -> Result<ExprTree, ParseError> {
    struct Frame {
        kind: OpKind,
        children: Vec<ExprTree>,
        open_pos: usize,
    }

    let mut lexer = Lexer::new(input);
    let mut frames: Vec<Frame> = Vec::new();
    let mut finished: Option<ExprTree> = None;

    loop {
        let Some((token, pos)) = lexer.next() else {
            if let Some(frame) = frames.last() {
                return err(
                    input.len(),
                    format!(
                        "unexpected end of input; `(` at byte {} is not closed",
                        frame.open_pos
                    ),
                );
            }
            break;
        };
        if finished.is_some() {
            return err(pos, "unexpected trailing input");
        }
        let completed: Option<ExprTree> = match token {
            Token::Open => {
                let (op_tok, op_pos) = match lexer.next() {
                    Some((Token::Atom(a), p)) => (a, p),
                    Some((_, p)) => return err(p, "expected an operator after `(`"),
                    None => return err(input.len(), "expected an operator after `(`"),
                };
                frames.push(Frame {
                    kind: parse_op(op_tok, op_pos)?,
                    children: Vec::with_capacity(2),
                    open_pos: pos,
                });
                None
            }
            Token::Close => match frames.pop() {
                Some(frame) => {
                    if frame.children.len() != 2 {
                        return err(
                            pos,
                            format!(
                                "operator `{}` takes 2 operands, found {}",
                                frame.kind.symbol(),
                                frame.children.len()
                            ),
                        );
                    }
                    let mut it = frame.children.into_iter();
                    let left = it.next().unwrap();
                    let right = it.next().unwrap();
                    Some(ExprTree::join(frame.kind, left, right))
                }
                None => return err(pos, "unmatched `)`"),
            },
            Token::Atom(atom) => Some(parse_atom(atom, pos)?),
        };
        if let Some(expr) = completed {
            match frames.last_mut() {
                Some(frame) => {
                    if frame.children.len() == 2 {
                        return err(
                            pos,
                            format!("operator `{}` takes 2 operands", frame.kind.symbol()),
                        );
                    }
                    frame.children.push(expr);
                }
                None => finished = Some(expr),
            }
        }
    }

    match finished {
        Some(tree) => Ok(tree),
        None => err(input.len(), "empty input"),
    }
}
