//! Tasklet code: one assignment per output connector, right-hand sides are
//! small expressions over input connectors, symbols, and literals.

use crate::symbolic::{CmpKind, SymBinOp, SymExpr};
use crate::text::{lex, Cursor, Tok, Token};
use crate::value::{ElemType, Value};
use std::collections::BTreeSet;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum CodeBinOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum CodeCmp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum CodeMath {
    Exp,
    Log,
    Sqrt,
    Tanh,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CodeExpr {
    IntLit(i64),
    FloatLit(f64),
    /// An input connector or a symbol visible at this point.
    Ref(String),
    Bin(CodeBinOp, Box<CodeExpr>, Box<CodeExpr>),
    Cmp(CodeCmp, Box<CodeExpr>, Box<CodeExpr>),
    Math(CodeMath, Box<CodeExpr>),
    Min(Box<CodeExpr>, Box<CodeExpr>),
    Max(Box<CodeExpr>, Box<CodeExpr>),
    /// Lazy conditional: only the chosen arm is evaluated.
    Select(Box<CodeExpr>, Box<CodeExpr>, Box<CodeExpr>),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{line}:{col}: {msg}")]
pub struct CodeError {
    pub line: u32,
    pub col: u32,
    pub msg: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CodeEvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("unknown name `{0}` in tasklet code")]
    MissingRef(String),
}

impl CodeExpr {
    pub fn int(v: i64) -> CodeExpr {
        CodeExpr::IntLit(v)
    }

    pub fn reference(name: impl Into<String>) -> CodeExpr {
        CodeExpr::Ref(name.into())
    }

    pub fn bin(op: CodeBinOp, a: CodeExpr, b: CodeExpr) -> CodeExpr {
        CodeExpr::Bin(op, Box::new(a), Box::new(b))
    }

    pub fn references(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_refs(&mut out);
        out
    }

    fn collect_refs(&self, out: &mut BTreeSet<String>) {
        match self {
            CodeExpr::IntLit(_) | CodeExpr::FloatLit(_) => {}
            CodeExpr::Ref(n) => {
                out.insert(n.clone());
            }
            CodeExpr::Bin(_, a, b)
            | CodeExpr::Cmp(_, a, b)
            | CodeExpr::Min(a, b)
            | CodeExpr::Max(a, b) => {
                a.collect_refs(out);
                b.collect_refs(out);
            }
            CodeExpr::Math(_, a) => a.collect_refs(out),
            CodeExpr::Select(c, a, b) => {
                c.collect_refs(out);
                a.collect_refs(out);
                b.collect_refs(out);
            }
        }
    }

    /// Replace every `Ref(name)` with a copy of `with`.
    pub fn substitute_ref(&self, name: &str, with: &CodeExpr) -> CodeExpr {
        match self {
            CodeExpr::IntLit(_) | CodeExpr::FloatLit(_) => self.clone(),
            CodeExpr::Ref(n) => {
                if n == name {
                    with.clone()
                } else {
                    self.clone()
                }
            }
            CodeExpr::Bin(op, a, b) => CodeExpr::Bin(
                *op,
                Box::new(a.substitute_ref(name, with)),
                Box::new(b.substitute_ref(name, with)),
            ),
            CodeExpr::Cmp(op, a, b) => CodeExpr::Cmp(
                *op,
                Box::new(a.substitute_ref(name, with)),
                Box::new(b.substitute_ref(name, with)),
            ),
            CodeExpr::Math(m, a) => CodeExpr::Math(*m, Box::new(a.substitute_ref(name, with))),
            CodeExpr::Min(a, b) => CodeExpr::Min(
                Box::new(a.substitute_ref(name, with)),
                Box::new(b.substitute_ref(name, with)),
            ),
            CodeExpr::Max(a, b) => CodeExpr::Max(
                Box::new(a.substitute_ref(name, with)),
                Box::new(b.substitute_ref(name, with)),
            ),
            CodeExpr::Select(c, a, b) => CodeExpr::Select(
                Box::new(c.substitute_ref(name, with)),
                Box::new(a.substitute_ref(name, with)),
                Box::new(b.substitute_ref(name, with)),
            ),
        }
    }

    /// Integer-valued translation into a symbolic expression, when one
    /// exists. Float literals, comparisons, math calls, and selects have no
    /// integer symbolic form.
    pub fn to_sym_expr(&self) -> Option<SymExpr> {
        Some(match self {
            CodeExpr::IntLit(v) => SymExpr::Const(*v),
            CodeExpr::FloatLit(_) => return None,
            CodeExpr::Ref(n) => SymExpr::sym(n.clone()),
            CodeExpr::Bin(op, a, b) => {
                let op = match op {
                    CodeBinOp::Add => SymBinOp::Add,
                    CodeBinOp::Sub => SymBinOp::Sub,
                    CodeBinOp::Mul => SymBinOp::Mul,
                    CodeBinOp::Div => SymBinOp::FloorDiv,
                    CodeBinOp::Rem => SymBinOp::Mod,
                };
                SymExpr::bin(op, a.to_sym_expr()?, b.to_sym_expr()?)
            }
            CodeExpr::Min(a, b) => SymExpr::bin(SymBinOp::Min, a.to_sym_expr()?, b.to_sym_expr()?),
            CodeExpr::Max(a, b) => SymExpr::bin(SymBinOp::Max, a.to_sym_expr()?, b.to_sym_expr()?),
            CodeExpr::Cmp(..) | CodeExpr::Math(..) | CodeExpr::Select(..) => return None,
        })
    }

    /// Inverse of `to_sym_expr`, extended to comparisons. Logic connectives
    /// have no code form.
    pub fn from_sym_expr(e: &SymExpr) -> Option<CodeExpr> {
        Some(match e {
            SymExpr::Const(v) => CodeExpr::IntLit(*v),
            SymExpr::Bool(b) => CodeExpr::IntLit(*b as i64),
            SymExpr::Sym(n) => CodeExpr::Ref(n.clone()),
            SymExpr::Bin(op, a, b) => {
                let (a, b) = (Self::from_sym_expr(a)?, Self::from_sym_expr(b)?);
                match op {
                    SymBinOp::Add => CodeExpr::bin(CodeBinOp::Add, a, b),
                    SymBinOp::Sub => CodeExpr::bin(CodeBinOp::Sub, a, b),
                    SymBinOp::Mul => CodeExpr::bin(CodeBinOp::Mul, a, b),
                    SymBinOp::FloorDiv => CodeExpr::bin(CodeBinOp::Div, a, b),
                    SymBinOp::Mod => CodeExpr::bin(CodeBinOp::Rem, a, b),
                    SymBinOp::Min => CodeExpr::Min(Box::new(a), Box::new(b)),
                    SymBinOp::Max => CodeExpr::Max(Box::new(a), Box::new(b)),
                }
            }
            SymExpr::Cmp(k, a, b) => {
                let k = match k {
                    CmpKind::Lt => CodeCmp::Lt,
                    CmpKind::Le => CodeCmp::Le,
                    CmpKind::Eq => CodeCmp::Eq,
                    CmpKind::Ne => CodeCmp::Ne,
                };
                CodeExpr::Cmp(
                    k,
                    Box::new(Self::from_sym_expr(a)?),
                    Box::new(Self::from_sym_expr(b)?),
                )
            }
            SymExpr::And(..) | SymExpr::Or(..) | SymExpr::Not(..) => return None,
        })
    }

    /// Evaluate with a name resolver. Integers wrap, integer division and
    /// remainder floor, mixed operands promote to float.
    pub fn eval(
        &self,
        resolve: &mut dyn FnMut(&str) -> Option<Value>,
    ) -> Result<Value, CodeEvalError> {
        match self {
            CodeExpr::IntLit(v) => Ok(Value::I64(*v)),
            CodeExpr::FloatLit(v) => Ok(Value::F64(*v)),
            CodeExpr::Ref(n) => resolve(n).ok_or_else(|| CodeEvalError::MissingRef(n.clone())),
            CodeExpr::Bin(op, a, b) => {
                let (a, b) = (a.eval(resolve)?, b.eval(resolve)?);
                match numeric_pair(a, b) {
                    Pair::Ints(x, y) => {
                        let v = match op {
                            CodeBinOp::Add => x.wrapping_add(y),
                            CodeBinOp::Sub => x.wrapping_sub(y),
                            CodeBinOp::Mul => x.wrapping_mul(y),
                            CodeBinOp::Div => crate::symbolic::div_floor(x, y)
                                .map_err(|_| CodeEvalError::DivisionByZero)?,
                            CodeBinOp::Rem => crate::symbolic::mod_floor(x, y)
                                .map_err(|_| CodeEvalError::DivisionByZero)?,
                        };
                        Ok(Value::I64(v))
                    }
                    Pair::Floats(x, y) => {
                        let v = match op {
                            CodeBinOp::Add => x + y,
                            CodeBinOp::Sub => x - y,
                            CodeBinOp::Mul => x * y,
                            CodeBinOp::Div => x / y,
                            CodeBinOp::Rem => x % y,
                        };
                        Ok(Value::F64(v))
                    }
                }
            }
            CodeExpr::Cmp(k, a, b) => {
                let (a, b) = (a.eval(resolve)?, b.eval(resolve)?);
                let t = match numeric_pair(a, b) {
                    Pair::Ints(x, y) => match k {
                        CodeCmp::Lt => x < y,
                        CodeCmp::Le => x <= y,
                        CodeCmp::Gt => x > y,
                        CodeCmp::Ge => x >= y,
                        CodeCmp::Eq => x == y,
                        CodeCmp::Ne => x != y,
                    },
                    Pair::Floats(x, y) => match k {
                        CodeCmp::Lt => x < y,
                        CodeCmp::Le => x <= y,
                        CodeCmp::Gt => x > y,
                        CodeCmp::Ge => x >= y,
                        CodeCmp::Eq => x == y,
                        CodeCmp::Ne => x != y,
                    },
                };
                Ok(Value::I64(t as i64))
            }
            CodeExpr::Math(m, a) => {
                let x = as_float(a.eval(resolve)?);
                let v = match m {
                    CodeMath::Exp => x.exp(),
                    CodeMath::Log => x.ln(),
                    CodeMath::Sqrt => x.sqrt(),
                    CodeMath::Tanh => x.tanh(),
                };
                Ok(Value::F64(v))
            }
            CodeExpr::Min(a, b) => {
                let (a, b) = (a.eval(resolve)?, b.eval(resolve)?);
                Ok(match numeric_pair(a, b) {
                    Pair::Ints(x, y) => Value::I64(x.min(y)),
                    Pair::Floats(x, y) => Value::F64(x.min(y)),
                })
            }
            CodeExpr::Max(a, b) => {
                let (a, b) = (a.eval(resolve)?, b.eval(resolve)?);
                Ok(match numeric_pair(a, b) {
                    Pair::Ints(x, y) => Value::I64(x.max(y)),
                    Pair::Floats(x, y) => Value::F64(x.max(y)),
                })
            }
            CodeExpr::Select(c, a, b) => {
                let c = c.eval(resolve)?;
                if c.is_truthy() {
                    a.eval(resolve)
                } else {
                    b.eval(resolve)
                }
            }
        }
    }

    /// The element type the expression produces when inputs have the given
    /// types; None when a referenced name has unknown type and decides it.
    pub fn result_type(&self, type_of: &dyn Fn(&str) -> Option<ElemType>) -> Option<ElemType> {
        match self {
            CodeExpr::IntLit(_) => Some(ElemType::I64),
            CodeExpr::FloatLit(_) => Some(ElemType::F64),
            CodeExpr::Ref(n) => type_of(n),
            CodeExpr::Bin(_, a, b) | CodeExpr::Min(a, b) | CodeExpr::Max(a, b) => {
                match (a.result_type(type_of)?, b.result_type(type_of)?) {
                    (ElemType::I64, ElemType::I64) => Some(ElemType::I64),
                    _ => Some(ElemType::F64),
                }
            }
            CodeExpr::Cmp(..) => Some(ElemType::I64),
            CodeExpr::Math(..) => Some(ElemType::F64),
            CodeExpr::Select(_, a, b) => {
                match (a.result_type(type_of)?, b.result_type(type_of)?) {
                    (ElemType::I64, ElemType::I64) => Some(ElemType::I64),
                    _ => Some(ElemType::F64),
                }
            }
        }
    }
}

enum Pair {
    Ints(i64, i64),
    Floats(f64, f64),
}

fn numeric_pair(a: Value, b: Value) -> Pair {
    match (a, b) {
        (Value::I64(x), Value::I64(y)) => Pair::Ints(x, y),
        (x, y) => Pair::Floats(as_float(x), as_float(y)),
    }
}

fn as_float(v: Value) -> f64 {
    match v {
        Value::I64(x) => x as f64,
        Value::F64(x) => x,
    }
}

// Display: minimal parentheses. Comparison binds loosest, then additive,
// then multiplicative; calls and literals are atoms.
fn prec(e: &CodeExpr) -> u8 {
    match e {
        CodeExpr::Cmp(..) => 1,
        CodeExpr::Bin(CodeBinOp::Add | CodeBinOp::Sub, ..) => 2,
        CodeExpr::Bin(..) => 3,
        _ => 4,
    }
}

fn fmt_prec(e: &CodeExpr, parent: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    let mine = prec(e);
    if mine < parent {
        write!(f, "(")?;
    }
    match e {
        CodeExpr::IntLit(v) => write!(f, "{v}")?,
        CodeExpr::FloatLit(v) => write!(f, "{v:?}")?,
        CodeExpr::Ref(n) => write!(f, "{n}")?,
        CodeExpr::Bin(op, a, b) => {
            let sym = match op {
                CodeBinOp::Add => "+",
                CodeBinOp::Sub => "-",
                CodeBinOp::Mul => "*",
                CodeBinOp::Div => "/",
                CodeBinOp::Rem => "%",
            };
            fmt_prec(a, mine, f)?;
            write!(f, " {sym} ")?;
            fmt_prec(b, mine + 1, f)?;
        }
        CodeExpr::Cmp(k, a, b) => {
            let sym = match k {
                CodeCmp::Lt => "<",
                CodeCmp::Le => "<=",
                CodeCmp::Gt => ">",
                CodeCmp::Ge => ">=",
                CodeCmp::Eq => "==",
                CodeCmp::Ne => "!=",
            };
            fmt_prec(a, mine + 1, f)?;
            write!(f, " {sym} ")?;
            fmt_prec(b, mine + 1, f)?;
        }
        CodeExpr::Math(m, a) => {
            let name = match m {
                CodeMath::Exp => "exp",
                CodeMath::Log => "log",
                CodeMath::Sqrt => "sqrt",
                CodeMath::Tanh => "tanh",
            };
            write!(f, "{name}(")?;
            fmt_prec(a, 0, f)?;
            write!(f, ")")?;
        }
        CodeExpr::Min(a, b) => {
            write!(f, "min(")?;
            fmt_prec(a, 0, f)?;
            write!(f, ", ")?;
            fmt_prec(b, 0, f)?;
            write!(f, ")")?;
        }
        CodeExpr::Max(a, b) => {
            write!(f, "max(")?;
            fmt_prec(a, 0, f)?;
            write!(f, ", ")?;
            fmt_prec(b, 0, f)?;
            write!(f, ")")?;
        }
        CodeExpr::Select(c, a, b) => {
            write!(f, "select(")?;
            fmt_prec(c, 0, f)?;
            write!(f, ", ")?;
            fmt_prec(a, 0, f)?;
            write!(f, ", ")?;
            fmt_prec(b, 0, f)?;
            write!(f, ")")?;
        }
    }
    if mine < parent {
        write!(f, ")")?;
    }
    Ok(())
}

impl fmt::Display for CodeExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_prec(self, 0, f)
    }
}

/// Parse a code block body: newline/semicolon-separated `name = expr`
/// assignments.
pub fn parse_code(src: &str) -> Result<Vec<(String, CodeExpr)>, CodeError> {
    let toks = lex(src).map_err(|e| CodeError { line: e.line, col: e.col, msg: e.msg })?;
    parse_code_tokens(toks)
}

pub(crate) fn parse_code_tokens(toks: Vec<Token>) -> Result<Vec<(String, CodeExpr)>, CodeError> {
    let mut cur = Cursor::new(toks);
    let mut out = Vec::new();
    while !cur.is_eof() {
        if cur.eat_punct(";") {
            continue;
        }
        let (line, col) = cur.here();
        let name = match cur.bump() {
            Tok::Ident(s) => s,
            other => {
                return Err(CodeError { line, col, msg: format!("expected connector name, found {other}") })
            }
        };
        let (line, col) = cur.here();
        if !cur.eat_punct("=") {
            return Err(CodeError { line, col, msg: "expected `=`".into() });
        }
        let expr = parse_expr_prec(&mut cur, 1)?;
        out.push((name, expr));
        cur.eat_punct(";");
    }
    Ok(out)
}

/// Parse the longest code expression at the cursor, leaving trailing tokens.
pub(crate) fn parse_code_expr_cursor(cur: &mut Cursor) -> Result<CodeExpr, CodeError> {
    parse_expr_prec(cur, 1)
}

/// Parse a single code expression from text.
pub(crate) fn parse_code_expr(src: &str) -> Result<CodeExpr, CodeError> {
    let toks = lex(src).map_err(|e| CodeError { line: e.line, col: e.col, msg: e.msg })?;
    let mut cur = Cursor::new(toks);
    let e = parse_expr_prec(&mut cur, 1)?;
    let (line, col) = cur.here();
    if !cur.is_eof() {
        return Err(CodeError { line, col, msg: format!("unexpected {}", cur.peek()) });
    }
    Ok(e)
}

fn parse_expr_prec(cur: &mut Cursor, min_prec: u8) -> Result<CodeExpr, CodeError> {
    // Precedence climbing over the three binary levels, then atoms.
    let mut lhs = if min_prec <= 1 {
        let a = parse_expr_prec(cur, 2)?;
        let k = if cur.at_punct("<") {
            Some(CodeCmp::Lt)
        } else if cur.at_punct("<=") {
            Some(CodeCmp::Le)
        } else if cur.at_punct(">") {
            Some(CodeCmp::Gt)
        } else if cur.at_punct(">=") {
            Some(CodeCmp::Ge)
        } else if cur.at_punct("==") {
            Some(CodeCmp::Eq)
        } else if cur.at_punct("!=") {
            Some(CodeCmp::Ne)
        } else {
            None
        };
        if let Some(k) = k {
            cur.bump();
            let b = parse_expr_prec(cur, 2)?;
            return Ok(CodeExpr::Cmp(k, Box::new(a), Box::new(b)));
        }
        return Ok(a);
    } else if min_prec == 2 {
        parse_expr_prec(cur, 3)?
    } else {
        parse_unary(cur)?
    };
    loop {
        let op = if min_prec == 2 {
            if cur.at_punct("+") {
                Some(CodeBinOp::Add)
            } else if cur.at_punct("-") {
                Some(CodeBinOp::Sub)
            } else {
                None
            }
        } else if cur.at_punct("*") {
            Some(CodeBinOp::Mul)
        } else if cur.at_punct("/") {
            Some(CodeBinOp::Div)
        } else if cur.at_punct("%") {
            Some(CodeBinOp::Rem)
        } else {
            None
        };
        let Some(op) = op else { return Ok(lhs) };
        cur.bump();
        let rhs = if min_prec == 2 { parse_expr_prec(cur, 3)? } else { parse_unary(cur)? };
        lhs = CodeExpr::bin(op, lhs, rhs);
    }
}

fn parse_unary(cur: &mut Cursor) -> Result<CodeExpr, CodeError> {
    if cur.eat_punct("-") {
        let inner = parse_unary(cur)?;
        return Ok(match inner {
            CodeExpr::IntLit(v) => CodeExpr::IntLit(v.wrapping_neg()),
            CodeExpr::FloatLit(v) => CodeExpr::FloatLit(-v),
            other => CodeExpr::bin(CodeBinOp::Sub, CodeExpr::IntLit(0), other),
        });
    }
    parse_atom(cur)
}

fn parse_atom(cur: &mut Cursor) -> Result<CodeExpr, CodeError> {
    let (line, col) = cur.here();
    if cur.eat_punct("(") {
        let e = parse_expr_prec(cur, 1)?;
        let (line, col) = cur.here();
        if !cur.eat_punct(")") {
            return Err(CodeError { line, col, msg: "expected `)`".into() });
        }
        return Ok(e);
    }
    match cur.bump() {
        Tok::Int(v) => Ok(CodeExpr::IntLit(v)),
        Tok::Float(v) => Ok(CodeExpr::FloatLit(v)),
        Tok::Ident(name) => {
            if !cur.at_punct("(") {
                return Ok(CodeExpr::Ref(name));
            }
            cur.bump();
            let mut args = Vec::new();
            if !cur.at_punct(")") {
                loop {
                    args.push(parse_expr_prec(cur, 1)?);
                    if !cur.eat_punct(",") {
                        break;
                    }
                }
            }
            let (line2, col2) = cur.here();
            if !cur.eat_punct(")") {
                return Err(CodeError { line: line2, col: col2, msg: "expected `)`".into() });
            }
            let arity_err = |want: usize| CodeError {
                line,
                col,
                msg: format!("`{name}` takes {want} argument(s), got {}", args.len()),
            };
            let math = |m: CodeMath, mut args: Vec<CodeExpr>| {
                CodeExpr::Math(m, Box::new(args.remove(0)))
            };
            match name.as_str() {
                "exp" | "log" | "sqrt" | "tanh" => {
                    if args.len() != 1 {
                        return Err(arity_err(1));
                    }
                    let m = match name.as_str() {
                        "exp" => CodeMath::Exp,
                        "log" => CodeMath::Log,
                        "sqrt" => CodeMath::Sqrt,
                        _ => CodeMath::Tanh,
                    };
                    Ok(math(m, args))
                }
                "min" | "max" => {
                    if args.len() != 2 {
                        return Err(arity_err(2));
                    }
                    let b = Box::new(args.pop().unwrap());
                    let a = Box::new(args.pop().unwrap());
                    Ok(if name == "min" { CodeExpr::Min(a, b) } else { CodeExpr::Max(a, b) })
                }
                "select" => {
                    if args.len() != 3 {
                        return Err(arity_err(3));
                    }
                    let c = Box::new(args.remove(0));
                    let a = Box::new(args.remove(0));
                    let b = Box::new(args.remove(0));
                    Ok(CodeExpr::Select(c, a, b))
                }
                _ => Err(CodeError { line, col, msg: format!("unknown function `{name}`") }),
            }
        }
        other => Err(CodeError { line, col, msg: format!("expected expression, found {other}") }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(src: &str, binds: &[(&str, Value)]) -> Value {
        let e = parse_code_expr(src).unwrap();
        e.eval(&mut |n| binds.iter().find(|(k, _)| *k == n).map(|(_, v)| *v))
            .unwrap()
    }

    #[test]
    fn parses_and_prints_with_minimal_parens() {
        let cases = [
            "in_a + in_b * 2",
            "(in_a + in_b) * 2",
            "in_a - (in_b - in_c)",
            "in_a * in_b < in_c",
            "min(in_a, max(in_b, 0))",
            "select(in_c, exp(in_a), 0.5)",
            "i * 8 + j",
        ];
        for src in cases {
            let e = parse_code_expr(src).unwrap();
            assert_eq!(e.to_string(), src, "print of parse should match input");
            let e2 = parse_code_expr(&e.to_string()).unwrap();
            assert_eq!(e, e2);
        }
    }

    #[test]
    fn evaluates_with_integer_flooring_and_wrapping() {
        assert_eq!(ev("-7 / 2", &[]), Value::I64(-4));
        assert_eq!(ev("-7 % 2", &[]), Value::I64(1));
        let big = i64::MAX;
        assert_eq!(
            ev("a + 1", &[("a", Value::I64(big))]),
            Value::I64(i64::MIN)
        );
    }

    #[test]
    fn mixed_operands_promote_to_float() {
        assert_eq!(ev("a * 2", &[("a", Value::F64(1.5))]), Value::F64(3.0));
        assert_eq!(ev("7 / 2", &[]), Value::I64(3));
        assert_eq!(ev("7.0 / 2", &[]), Value::F64(3.5));
    }

    #[test]
    fn select_is_lazy() {
        // The untaken arm would divide by zero if evaluated.
        assert_eq!(ev("select(1, 5, 1 / 0)", &[]), Value::I64(5));
        assert_eq!(ev("select(0, 1 / 0, 7)", &[]), Value::I64(7));
        let e = parse_code_expr("1 / 0").unwrap();
        assert_eq!(e.eval(&mut |_| None), Err(CodeEvalError::DivisionByZero));
    }

    #[test]
    fn code_bindings_parse_with_semicolons() {
        let code = parse_code("out_a = in_x + 1; out_b = in_x * in_x").unwrap();
        assert_eq!(code.len(), 2);
        assert_eq!(code[0].0, "out_a");
        assert_eq!(code[1].1.to_string(), "in_x * in_x");
    }

    #[test]
    fn symbolic_round_trip_for_integer_code() {
        let e = parse_code_expr("i * 8 + j - n / 2").unwrap();
        let s = e.to_sym_expr().unwrap();
        let back = CodeExpr::from_sym_expr(&s).unwrap();
        assert_eq!(back.to_sym_expr().unwrap(), s);
        assert!(parse_code_expr("exp(x)").unwrap().to_sym_expr().is_none());
        assert!(parse_code_expr("0.5").unwrap().to_sym_expr().is_none());
    }

    #[test]
    fn comparison_yields_integer_flag() {
        assert_eq!(ev("2.5 < 3.0", &[]), Value::I64(1));
        assert_eq!(ev("3 >= 4", &[]), Value::I64(0));
        let t = parse_code_expr("a < b")
            .unwrap()
            .result_type(&|_| Some(ElemType::F64));
        assert_eq!(t, Some(ElemType::I64));
    }
}
