//! Arithmetic evaluator behind the `Calculator` tool.
//!
//! Integer literals stay integers under `+`, `-` and `*`; any decimal
//! literal or any division makes the result a float, which renders with a
//! trailing `.0` when integral (`(50 * 4) / 20` gives `10.0`).

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use super::{ToolError, ToolHandler, ToolOutput};
use crate::accounting::{Breakdown, CallKind, LedgerEntry};
use crate::model::{LanguageModel, ModelRequest};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CalcError {
    #[error("cannot parse expression at byte {pos}: {message}")]
    ParseError { pos: usize, message: String },
    #[error("division by zero")]
    DivisionByZero,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Num {
    Int(i64),
    Float(f64),
}

impl Num {
    fn as_f64(self) -> f64 {
        match self {
            Num::Int(i) => i as f64,
            Num::Float(f) => f,
        }
    }
}

impl fmt::Display for Num {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Num::Int(i) => write!(f, "{i}"),
            // Debug keeps the shortest round-trip form and the ".0" suffix
            Num::Float(x) => write!(f, "{x:?}"),
        }
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn err(&self, message: &str) -> CalcError {
        CalcError::ParseError { pos: self.pos, message: message.to_string() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expr(&mut self) -> Result<Num, CalcError> {
        let mut acc = self.term()?;
        while let Some(op @ (b'+' | b'-')) = self.peek() {
            self.pos += 1;
            let rhs = self.term()?;
            acc = apply(op, acc, rhs)?;
        }
        Ok(acc)
    }

    fn term(&mut self) -> Result<Num, CalcError> {
        let mut acc = self.unary()?;
        while let Some(op @ (b'*' | b'/')) = self.peek() {
            self.pos += 1;
            let rhs = self.unary()?;
            acc = apply(op, acc, rhs)?;
        }
        Ok(acc)
    }

    fn unary(&mut self) -> Result<Num, CalcError> {
        match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                Ok(match self.unary()? {
                    Num::Int(i) => i.checked_neg().map(Num::Int).unwrap_or(Num::Float(-(i as f64))),
                    Num::Float(f) => Num::Float(-f),
                })
            }
            Some(b'+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.atom(),
        }
    }

    fn atom(&mut self) -> Result<Num, CalcError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let v = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.err("expected ')'"));
                }
                self.pos += 1;
                Ok(v)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(_) => Err(self.err("unexpected character")),
            None => Err(self.err("unexpected end of input")),
        }
    }

    fn number(&mut self) -> Result<Num, CalcError> {
        let start = self.pos;
        while self.pos < self.src.len() && (self.src[self.pos].is_ascii_digit() || self.src[self.pos] == b'.') {
            self.pos += 1;
        }
        let lit = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        if lit.contains('.') {
            lit.parse().map(Num::Float).map_err(|_| self.err("bad decimal literal"))
        } else {
            match lit.parse::<i64>() {
                Ok(i) => Ok(Num::Int(i)),
                Err(_) => lit.parse().map(Num::Float).map_err(|_| self.err("bad integer literal")),
            }
        }
    }
}

fn apply(op: u8, a: Num, b: Num) -> Result<Num, CalcError> {
    if op == b'/' {
        let d = b.as_f64();
        if d == 0.0 {
            return Err(CalcError::DivisionByZero);
        }
        return Ok(Num::Float(a.as_f64() / d));
    }
    if let (Num::Int(x), Num::Int(y)) = (a, b) {
        let exact = match op {
            b'+' => x.checked_add(y),
            b'-' => x.checked_sub(y),
            _ => x.checked_mul(y),
        };
        if let Some(v) = exact {
            return Ok(Num::Int(v));
        }
    }
    let (x, y) = (a.as_f64(), b.as_f64());
    Ok(Num::Float(match op {
        b'+' => x + y,
        b'-' => x - y,
        _ => x * y,
    }))
}

/// Evaluates `+ - * /` with parentheses and unary signs.
pub fn eval_arithmetic(expr: &str) -> Result<String, CalcError> {
    let mut p = Parser { src: expr.as_bytes(), pos: 0 };
    let v = p.expr()?;
    if p.peek().is_some() {
        return Err(p.err("trailing input"));
    }
    Ok(v.to_string())
}

const PROGRAM_AIDED_PROMPT: &str =
    "Rewrite the following as a single arithmetic expression using only numbers, + - * / and parentheses. Respond with the expression only.";

/// The `Calculator` handler. Deterministic by default; in program-aided mode
/// a model first rewrites the input as an expression.
#[derive(Clone)]
pub struct Calculator {
    translator: Option<(Arc<dyn LanguageModel>, String)>,
    tokenizer: crate::accounting::Tokenizer,
}

impl Calculator {
    pub fn deterministic() -> Self {
        Self { translator: None, tokenizer: Default::default() }
    }

    pub fn program_aided(
        model: Arc<dyn LanguageModel>,
        model_id: &str,
        tokenizer: crate::accounting::Tokenizer,
    ) -> Self {
        Self { translator: Some((model, model_id.to_string())), tokenizer }
    }
}

impl ToolHandler for Calculator {
    fn call(&self, input: &str) -> Result<ToolOutput, ToolError> {
        let Some((model, model_id)) = &self.translator else {
            return Ok(ToolOutput::text(eval_arithmetic(input)?));
        };
        let prompt = format!("{PROGRAM_AIDED_PROMPT}\n\n{input}");
        let resp = model.complete(&ModelRequest::new(prompt, model_id.clone()))?;
        let steps = self.tokenizer.count(input);
        let entry = LedgerEntry {
            call_kind: CallKind::ToolModel,
            input_tokens: resp.input_tokens,
            output_tokens: resp.output_tokens,
            breakdown: Some(Breakdown::with_residual_context(resp.input_tokens, 0, 0, steps)),
        };
        let text = eval_arithmetic(resp.text.trim())?;
        Ok(ToolOutput { text, ledger: vec![entry] })
    }
}
