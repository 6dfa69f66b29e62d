//! Parser for the `.dcir` textual form. The grammar is documented in
//! `docs/frontend-ir.md` and frozen by golden parse/print tests.

use super::*;
use crate::symbolic::parse_predicate;
use crate::text::{lex, Cursor, Tok};
use crate::value::ElemType;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{line}:{col}: {msg}")]
pub struct ParseError {
    pub line: u32,
    pub col: u32,
    pub msg: String,
}

struct P {
    cur: Cursor,
}

type PResult<T> = Result<T, ParseError>;

impl P {
    fn err<T>(&self, msg: impl Into<String>) -> PResult<T> {
        let (line, col) = self.cur.here();
        Err(ParseError { line, col, msg: msg.into() })
    }

    fn expect_punct(&mut self, p: &str) -> PResult<()> {
        if self.cur.eat_punct(p) {
            Ok(())
        } else {
            self.err(format!("expected `{p}`, found {}", self.cur.peek()))
        }
    }

    fn expect_kw(&mut self, kw: &str) -> PResult<()> {
        if self.cur.eat_kw(kw) {
            Ok(())
        } else {
            self.err(format!("expected `{kw}`, found {}", self.cur.peek()))
        }
    }

    fn ident(&mut self) -> PResult<String> {
        match self.cur.peek().clone() {
            Tok::Ident(s) => {
                self.cur.bump();
                Ok(s)
            }
            other => self.err(format!("expected identifier, found {other}")),
        }
    }

    /// `%name`.
    fn value_name(&mut self) -> PResult<String> {
        self.expect_punct("%")?;
        self.ident()
    }

    fn int_literal(&mut self) -> PResult<i64> {
        let neg = self.cur.eat_punct("-");
        match self.cur.peek().clone() {
            Tok::Int(v) => {
                self.cur.bump();
                Ok(if neg { v.wrapping_neg() } else { v })
            }
            other => self.err(format!("expected integer literal, found {other}")),
        }
    }

    fn elem_type(&mut self) -> PResult<ElemType> {
        let name = self.ident()?;
        match name.as_str() {
            "i64" => Ok(ElemType::I64),
            "f64" => Ok(ElemType::F64),
            other => self.err(format!("unknown element type `{other}`")),
        }
    }

    /// `memref<` already consumed up to `<`; reads `DIMxDIMx...xELEM>`.
    /// Dimension separators are `x`; whitespace between pieces is allowed,
    /// so both `memref<4x4xf64>` and `memref<N x M x f64>` parse.
    fn memref_body(&mut self) -> PResult<MemRefType> {
        let mut raw = String::new();
        loop {
            match self.cur.peek().clone() {
                Tok::Ident(s) => {
                    raw.push_str(&s);
                    self.cur.bump();
                }
                Tok::Int(v) => {
                    raw.push_str(&v.to_string());
                    self.cur.bump();
                }
                Tok::Punct("?") => {
                    raw.push('?');
                    self.cur.bump();
                }
                Tok::Punct(">") => {
                    self.cur.bump();
                    break;
                }
                other => return self.err(format!("unexpected {other} in memref type")),
            }
        }
        let parts: Vec<&str> = raw.split('x').collect();
        if parts.len() < 2 {
            return self.err("memref type needs at least one dimension and an element type");
        }
        let elem = match *parts.last().unwrap() {
            "i64" => ElemType::I64,
            "f64" => ElemType::F64,
            other => return self.err(format!("unknown element type `{other}` in memref")),
        };
        let mut dims = Vec::new();
        for part in &parts[..parts.len() - 1] {
            if *part == "?" {
                dims.push(Dim::Dyn);
            } else if part.chars().all(|c| c.is_ascii_digit()) && !part.is_empty() {
                match part.parse::<i64>() {
                    Ok(v) => dims.push(Dim::Lit(v)),
                    Err(_) => return self.err(format!("dimension `{part}` out of range")),
                }
            } else if !part.is_empty()
                && part.chars().next().unwrap().is_ascii_alphabetic()
                && part.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
            {
                dims.push(Dim::Sym((*part).to_string()));
            } else {
                return self.err(format!("bad dimension `{part}` in memref type"));
            }
        }
        Ok(MemRefType { dims, elem })
    }

    fn ty(&mut self) -> PResult<Type> {
        match self.cur.peek().clone() {
            Tok::Ident(s) if s == "memref" => {
                self.cur.bump();
                self.expect_punct("<")?;
                Ok(Type::MemRef(self.memref_body()?))
            }
            _ => Ok(Type::Scalar(self.elem_type()?)),
        }
    }

    fn block(&mut self) -> PResult<Block> {
        self.expect_punct("{")?;
        let mut ops = Vec::new();
        while !self.cur.eat_punct("}") {
            if self.cur.is_eof() {
                return self.err("unterminated block");
            }
            ops.push(self.op()?);
        }
        Ok(Block(ops))
    }

    fn op(&mut self) -> PResult<Op> {
        let (line, _) = self.cur.here();
        let kind = if self.cur.at_punct("%") {
            let result = self.value_name()?;
            self.expect_punct("=")?;
            let kind = self.rhs()?;
            return Ok(Op { result: Some(result), kind, line });
        } else if self.cur.at_kw("store") {
            self.cur.bump();
            let value = self.value_name()?;
            self.expect_punct(",")?;
            let mem = self.value_name()?;
            let indices = self.index_list()?;
            OpKind::Store { value, mem, indices }
        } else if self.cur.at_kw("for") {
            self.cur.bump();
            let iv = self.value_name()?;
            self.expect_punct("=")?;
            let lb = self.value_name()?;
            self.expect_kw("to")?;
            let ub = self.value_name()?;
            let step = if self.cur.eat_kw("step") { self.int_literal()? } else { 1 };
            if step <= 0 {
                return self.err("loop step must be a strictly positive integer literal");
            }
            let body = self.block()?;
            OpKind::For { iv, lb, ub, step, body }
        } else if self.cur.at_kw("while") {
            self.cur.bump();
            let (cond, cond_val) = self.while_cond_block()?;
            self.expect_kw("do")?;
            let body = self.block()?;
            OpKind::While { cond, cond_val, body }
        } else if self.cur.at_kw("if") {
            self.cur.bump();
            let cond = self.value_name()?;
            let then_blk = self.block()?;
            let else_blk = if self.cur.eat_kw("else") { self.block()? } else { Block::default() };
            OpKind::If { cond, then_blk, else_blk }
        } else if self.cur.at_kw("return") {
            self.cur.bump();
            let v = if self.cur.at_punct("%") { Some(self.value_name()?) } else { None };
            OpKind::Return(v)
        } else if self.cur.at_kw("call") {
            self.cur.bump();
            let (callee, args) = self.call_tail()?;
            OpKind::Call { callee, args }
        } else {
            return self.err(format!("expected an operation, found {}", self.cur.peek()));
        };
        Ok(Op { result: None, kind, line })
    }

    /// Condition block of a `while`: ordinary ops ending in `cond %x`.
    fn while_cond_block(&mut self) -> PResult<(Block, String)> {
        self.expect_punct("{")?;
        let mut ops = Vec::new();
        loop {
            if self.cur.is_eof() {
                return self.err("unterminated while condition block");
            }
            if self.cur.at_kw("cond") {
                self.cur.bump();
                let v = self.value_name()?;
                self.expect_punct("}")?;
                return Ok((Block(ops), v));
            }
            if self.cur.at_punct("}") {
                return self.err("while condition block must end with `cond %value`");
            }
            ops.push(self.op()?);
        }
    }

    fn rhs(&mut self) -> PResult<OpKind> {
        let kw = self.ident()?;
        match kw.as_str() {
            "const" => {
                let neg = self.cur.eat_punct("-");
                let tok = self.cur.bump();
                self.expect_punct(":")?;
                let ty = self.elem_type()?;
                match (tok, ty) {
                    (Tok::Int(v), ElemType::I64) => {
                        Ok(OpKind::ConstI(if neg { v.wrapping_neg() } else { v }))
                    }
                    (Tok::Int(v), ElemType::F64) => {
                        Ok(OpKind::ConstF(if neg { -(v as f64) } else { v as f64 }))
                    }
                    (Tok::Float(v), ElemType::F64) => {
                        Ok(OpKind::ConstF(if neg { -v } else { v }))
                    }
                    (Tok::Float(_), ElemType::I64) => {
                        self.err("float literal with i64 result type")
                    }
                    (other, _) => self.err(format!("expected numeric literal, found {other}")),
                }
            }
            "sym" => Ok(OpKind::SymRead(self.ident()?)),
            "arith" => {
                let op = match self.ident()?.as_str() {
                    "add" => ArithKind::Add,
                    "sub" => ArithKind::Sub,
                    "mul" => ArithKind::Mul,
                    "div" => ArithKind::Div,
                    "rem" => ArithKind::Rem,
                    other => return self.err(format!("unknown arith op `{other}`")),
                };
                let a = self.value_name()?;
                self.expect_punct(",")?;
                let b = self.value_name()?;
                Ok(OpKind::Arith(op, a, b))
            }
            "cmp" => {
                let pred = match self.ident()?.as_str() {
                    "lt" => CmpPred::Lt,
                    "le" => CmpPred::Le,
                    "gt" => CmpPred::Gt,
                    "ge" => CmpPred::Ge,
                    "eq" => CmpPred::Eq,
                    "ne" => CmpPred::Ne,
                    other => return self.err(format!("unknown cmp predicate `{other}`")),
                };
                let a = self.value_name()?;
                self.expect_punct(",")?;
                let b = self.value_name()?;
                Ok(OpKind::Cmp(pred, a, b))
            }
            "math" => {
                let op = match self.ident()?.as_str() {
                    "exp" => MathKind::Exp,
                    "log" => MathKind::Log,
                    "sqrt" => MathKind::Sqrt,
                    "tanh" => MathKind::Tanh,
                    other => return self.err(format!("unknown math op `{other}`")),
                };
                Ok(OpKind::Math(op, self.value_name()?))
            }
            "alloc" => {
                self.expect_punct(":")?;
                self.expect_kw("memref")?;
                self.expect_punct("<")?;
                Ok(OpKind::Alloc(self.memref_body()?))
            }
            "load" => {
                let mem = self.value_name()?;
                let indices = self.index_list()?;
                Ok(OpKind::Load { mem, indices })
            }
            "call" => {
                let (callee, args) = self.call_tail()?;
                Ok(OpKind::Call { callee, args })
            }
            other => self.err(format!("unknown operation `{other}`")),
        }
    }

    fn call_tail(&mut self) -> PResult<(String, Vec<String>)> {
        self.expect_punct("@")?;
        let callee = self.ident()?;
        self.expect_punct("(")?;
        let mut args = Vec::new();
        if !self.cur.at_punct(")") {
            loop {
                args.push(self.value_name()?);
                if !self.cur.eat_punct(",") {
                    break;
                }
            }
        }
        self.expect_punct(")")?;
        Ok((callee, args))
    }

    fn index_list(&mut self) -> PResult<Vec<String>> {
        self.expect_punct("[")?;
        let mut out = Vec::new();
        if !self.cur.at_punct("]") {
            loop {
                out.push(self.value_name()?);
                if !self.cur.eat_punct(",") {
                    break;
                }
            }
        }
        self.expect_punct("]")?;
        Ok(out)
    }

    fn function(&mut self) -> PResult<Function> {
        self.expect_kw("func")?;
        self.expect_punct("@")?;
        let name = self.ident()?;
        self.expect_punct("(")?;
        let mut params = Vec::new();
        if !self.cur.at_punct(")") {
            loop {
                let pname = self.value_name()?;
                self.expect_punct(":")?;
                let ty = self.ty()?;
                params.push((pname, ty));
                if !self.cur.eat_punct(",") {
                    break;
                }
            }
        }
        self.expect_punct(")")?;
        let mut symbols = Vec::new();
        if self.cur.eat_kw("syms") {
            self.expect_punct("(")?;
            loop {
                symbols.push(self.ident()?);
                if !self.cur.eat_punct(",") {
                    break;
                }
            }
            self.expect_punct(")")?;
        }
        let result = if self.cur.eat_punct("->") { Some(self.ty()?) } else { None };
        let is_entry = self.cur.eat_kw("entry");
        let mut assume = Vec::new();
        if self.cur.eat_kw("assume") {
            self.expect_punct("(")?;
            let (line, col) = self.cur.here();
            match self.cur.bump() {
                Tok::Str(s) => match parse_predicate(&s) {
                    Ok(p) => assume.push(p),
                    Err(e) => {
                        return Err(ParseError {
                            line,
                            col,
                            msg: format!("bad assumption predicate: {e}"),
                        })
                    }
                },
                other => {
                    return Err(ParseError {
                        line,
                        col,
                        msg: format!("expected quoted predicate, found {other}"),
                    })
                }
            }
            self.expect_punct(")")?;
        }
        let body = self.block()?;
        Ok(Function { name, params, result, symbols, is_entry, assume, body })
    }
}

/// Parses and verifies a program.
pub fn parse_program(text: &str) -> Result<Program, ParseError> {
    let toks = lex(text).map_err(|e| ParseError { line: e.line, col: e.col, msg: e.msg })?;
    let mut p = P { cur: Cursor::new(toks) };
    let mut functions = Vec::new();
    while !p.cur.is_eof() {
        functions.push(p.function()?);
    }
    if functions.is_empty() {
        return p.err("no functions in input");
    }
    let program = Program { functions };
    verify_program(&program)
        .map_err(|e| ParseError { line: e.line, col: 0, msg: format!("verify: {}", e.msg) })?;
    Ok(program)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_copy_kernel() {
        let src = r#"
func @copy(%src: memref<Mxf64>, %dst: memref<Mxf64>) syms(M) entry assume("M >= 1") {
  %c0 = const 0 : i64
  %m = sym M
  for %i = %c0 to %m step 1 {
    %v = load %src[%i]
    store %v, %dst[%i]
  }
  return
}
"#;
        let p = parse_program(src).unwrap();
        assert_eq!(p.functions.len(), 1);
        let f = p.entry();
        assert_eq!(f.params.len(), 2);
        assert_eq!(f.symbols, vec!["M"]);
        assert_eq!(f.body.0.len(), 4);
        assert!(matches!(f.body.0[2].kind, OpKind::For { step: 1, .. }));
    }

    #[test]
    fn parses_empty_body_with_return() {
        let p = parse_program("func @noop() entry { return }").unwrap();
        assert_eq!(p.entry().body.0.len(), 1);
    }

    #[test]
    fn memref_type_forms_are_equivalent() {
        let a = parse_program("func @f(%x: memref<4x4xf64>) entry { return }").unwrap();
        let b = parse_program("func @f(%x: memref<4 x 4 x f64>) entry { return }").unwrap();
        assert_eq!(a.entry().params[0].1, b.entry().params[0].1);
        match &a.entry().params[0].1 {
            Type::MemRef(m) => {
                assert_eq!(m.dims, vec![Dim::Lit(4), Dim::Lit(4)]);
                assert_eq!(m.elem, ElemType::F64);
            }
            _ => panic!("expected memref"),
        }
    }

    #[test]
    fn dynamic_dims_parse() {
        let p = parse_program("func @f(%x: memref<?xf64>) entry { return }").unwrap();
        match &p.entry().params[0].1 {
            Type::MemRef(m) => assert_eq!(m.dims, vec![Dim::Dyn]),
            _ => panic!("expected memref"),
        }
    }

    #[test]
    fn use_before_def_is_rejected() {
        let err = parse_program("func @f() entry { %a = arith add %b, %b  return }").unwrap_err();
        assert!(err.msg.contains("verify"), "{}", err.msg);
    }

    #[test]
    fn zero_step_is_rejected() {
        let src = "func @f() syms(N) entry { %c0 = const 0 : i64 %n = sym N for %i = %c0 to %n step 0 { } return }";
        let err = parse_program(src).unwrap_err();
        assert!(err.msg.contains("positive"), "{}", err.msg);
    }

    #[test]
    fn while_with_cond_block_parses() {
        let src = r#"
func @count() -> i64 entry {
  %c0 = const 0 : i64
  %c10 = const 10 : i64
  while {
    %c = cmp lt %c0, %c10
    cond %c
  } do {
    %c1 = const 1 : i64
  }
  return %c0
}
"#;
        let p = parse_program(src).unwrap();
        assert!(matches!(p.entry().body.0[2].kind, OpKind::While { .. }));
    }
}
