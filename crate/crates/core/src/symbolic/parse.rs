//! Recursive-descent parser for symbolic expressions and predicates.
//!
//! ```text
//! pred   := or
//! or     := and ("or" and)*
//! and    := not ("and" not)*
//! not    := "not" not | cmp
//! cmp    := expr (("<" | "<=" | "==" | "!=" | ">" | ">=") expr)?
//! expr   := term (("+" | "-") term)*
//! term   := factor (("*" | "/" | "%") factor)*
//! factor := int | ident | "true" | "false" | "-" factor
//!         | ("min" | "max") "(" pred "," pred ")" | "(" pred ")"
//!         | "sym" "(" string ")"
//! ```
//!
//! `>` and `>=` are accepted and normalized to swapped `<` / `<=`.
//! `sym("a b")` names a symbol explicitly, which lets shape annotations quote
//! symbols unambiguously. `min`, `max`, `and`, `or`, `not`, `true`, `false`,
//! and `sym` are reserved words.

use super::{CmpKind, SymBinOp, SymExpr};
use crate::text::{lex, Cursor, Tok};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{line}:{col}: {msg}")]
pub struct ParseError {
    pub line: u32,
    pub col: u32,
    pub msg: String,
}

pub const RESERVED: &[&str] = &["min", "max", "and", "or", "not", "true", "false", "sym"];

/// Parses an expression or predicate.
pub fn parse_expr(text: &str) -> Result<SymExpr, ParseError> {
    let toks = lex(text).map_err(|e| ParseError { line: e.line, col: e.col, msg: e.msg })?;
    let mut cur = Cursor::new(toks);
    let e = pred(&mut cur)?;
    if !cur.is_eof() {
        let (line, col) = cur.here();
        return Err(ParseError { line, col, msg: format!("unexpected {} after expression", cur.peek()) });
    }
    Ok(e)
}

/// Parses a predicate; errors when the text is a bare arithmetic expression.
pub fn parse_predicate(text: &str) -> Result<SymExpr, ParseError> {
    let e = parse_expr(text)?;
    if !e.is_predicate() {
        return Err(ParseError { line: 1, col: 1, msg: format!("`{e}` is not a predicate") });
    }
    Ok(e)
}

/// Parses the longest expression at the cursor, leaving trailing tokens for
/// the caller. Lets other grammars embed expressions in their token stream.
pub(crate) fn parse_expr_cursor(cur: &mut Cursor) -> Result<SymExpr, ParseError> {
    pred(cur)
}

fn unexpected(cur: &Cursor, what: &str) -> ParseError {
    let (line, col) = cur.here();
    ParseError { line, col, msg: format!("expected {what}, found {}", cur.peek()) }
}

fn pred(cur: &mut Cursor) -> Result<SymExpr, ParseError> {
    let mut lhs = and(cur)?;
    while cur.eat_kw("or") {
        let rhs = and(cur)?;
        lhs = SymExpr::Or(Box::new(lhs), Box::new(rhs));
    }
    Ok(lhs)
}

fn and(cur: &mut Cursor) -> Result<SymExpr, ParseError> {
    let mut lhs = not(cur)?;
    while cur.eat_kw("and") {
        let rhs = not(cur)?;
        lhs = SymExpr::And(Box::new(lhs), Box::new(rhs));
    }
    Ok(lhs)
}

fn not(cur: &mut Cursor) -> Result<SymExpr, ParseError> {
    if cur.eat_kw("not") {
        let inner = not(cur)?;
        return Ok(SymExpr::Not(Box::new(inner)));
    }
    cmp(cur)
}

fn cmp(cur: &mut Cursor) -> Result<SymExpr, ParseError> {
    let lhs = expr(cur)?;
    let op = match cur.peek() {
        Tok::Punct("<") => Some((CmpKind::Lt, false)),
        Tok::Punct("<=") => Some((CmpKind::Le, false)),
        Tok::Punct("==") => Some((CmpKind::Eq, false)),
        Tok::Punct("!=") => Some((CmpKind::Ne, false)),
        Tok::Punct(">") => Some((CmpKind::Lt, true)),
        Tok::Punct(">=") => Some((CmpKind::Le, true)),
        _ => None,
    };
    if let Some((kind, swap)) = op {
        cur.bump();
        let rhs = expr(cur)?;
        let (a, b) = if swap { (rhs, lhs) } else { (lhs, rhs) };
        return Ok(SymExpr::cmp(kind, a, b));
    }
    Ok(lhs)
}

fn expr(cur: &mut Cursor) -> Result<SymExpr, ParseError> {
    let mut lhs = term(cur)?;
    loop {
        let op = match cur.peek() {
            Tok::Punct("+") => SymBinOp::Add,
            Tok::Punct("-") => SymBinOp::Sub,
            _ => break,
        };
        cur.bump();
        let rhs = term(cur)?;
        lhs = SymExpr::bin(op, lhs, rhs);
    }
    Ok(lhs)
}

fn term(cur: &mut Cursor) -> Result<SymExpr, ParseError> {
    let mut lhs = factor(cur)?;
    loop {
        let op = match cur.peek() {
            Tok::Punct("*") => SymBinOp::Mul,
            Tok::Punct("/") => SymBinOp::FloorDiv,
            Tok::Punct("%") => SymBinOp::Mod,
            _ => break,
        };
        cur.bump();
        let rhs = factor(cur)?;
        lhs = SymExpr::bin(op, lhs, rhs);
    }
    Ok(lhs)
}

fn factor(cur: &mut Cursor) -> Result<SymExpr, ParseError> {
    if cur.eat_punct("-") {
        let inner = factor(cur)?;
        return Ok(match inner {
            SymExpr::Const(v) => SymExpr::Const(v.wrapping_neg()),
            other => SymExpr::mul(SymExpr::Const(-1), other),
        });
    }
    if cur.eat_punct("(") {
        let e = pred(cur)?;
        if !cur.eat_punct(")") {
            return Err(unexpected(cur, "`)`"));
        }
        return Ok(e);
    }
    match cur.peek().clone() {
        Tok::Int(v) => {
            cur.bump();
            Ok(SymExpr::Const(v))
        }
        Tok::Ident(name) => {
            match name.as_str() {
                "true" => {
                    cur.bump();
                    return Ok(SymExpr::Bool(true));
                }
                "false" => {
                    cur.bump();
                    return Ok(SymExpr::Bool(false));
                }
                "min" | "max" => {
                    cur.bump();
                    let op = if name == "min" { SymBinOp::Min } else { SymBinOp::Max };
                    if !cur.eat_punct("(") {
                        return Err(unexpected(cur, "`(`"));
                    }
                    let a = pred(cur)?;
                    if !cur.eat_punct(",") {
                        return Err(unexpected(cur, "`,`"));
                    }
                    let b = pred(cur)?;
                    if !cur.eat_punct(")") {
                        return Err(unexpected(cur, "`)`"));
                    }
                    return Ok(SymExpr::bin(op, a, b));
                }
                "sym" if matches!(cur.peek2(), Tok::Punct("(")) => {
                    cur.bump();
                    cur.bump();
                    let sym = match cur.peek().clone() {
                        Tok::Str(s) => {
                            cur.bump();
                            s
                        }
                        _ => return Err(unexpected(cur, "quoted symbol name")),
                    };
                    if !cur.eat_punct(")") {
                        return Err(unexpected(cur, "`)`"));
                    }
                    return Ok(SymExpr::Sym(sym));
                }
                "and" | "or" | "not" => return Err(unexpected(cur, "expression")),
                _ => {}
            }
            cur.bump();
            Ok(SymExpr::Sym(name))
        }
        _ => Err(unexpected(cur, "expression")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sum_with_structure() {
        let e = parse_expr("N + 1").unwrap();
        assert_eq!(e, SymExpr::add(SymExpr::sym("N"), SymExpr::Const(1)));
    }

    #[test]
    fn parses_single_symbol() {
        assert_eq!(parse_expr("s_0").unwrap(), SymExpr::sym("s_0"));
    }

    #[test]
    fn dangling_operator_is_a_syntax_error() {
        let err = parse_expr("N+").unwrap_err();
        assert_eq!((err.line, err.col), (1, 3));
    }

    #[test]
    fn precedence_and_calls() {
        let e = parse_expr("min(N, M) * 2 + N % 4").unwrap();
        assert_eq!(e.to_string(), "min(N, M) * 2 + N % 4");
    }

    #[test]
    fn gt_normalizes_to_swapped_lt() {
        assert_eq!(parse_expr("N > 3").unwrap(), parse_expr("3 < N").unwrap());
        assert_eq!(parse_expr("N >= 3").unwrap(), parse_expr("3 <= N").unwrap());
    }

    #[test]
    fn predicate_grammar() {
        let e = parse_predicate("not N < 3 and M != 0 or true").unwrap();
        assert_eq!(e.to_string(), "not N < 3 and M != 0 or true");
        assert!(parse_predicate("N + 1").is_err());
    }

    #[test]
    fn unary_minus() {
        assert_eq!(parse_expr("-3").unwrap(), SymExpr::Const(-3));
        assert_eq!(
            parse_expr("-N").unwrap(),
            SymExpr::mul(SymExpr::Const(-1), SymExpr::sym("N"))
        );
    }

    #[test]
    fn quoted_symbol_factor() {
        assert_eq!(parse_expr("sym(\"N\")").unwrap(), SymExpr::sym("N"));
        assert_eq!(
            parse_expr("sym(\"N\") - 1").unwrap(),
            parse_expr("N - 1").unwrap()
        );
        assert!(parse_expr("sym(N)").is_err());
    }

    #[test]
    fn display_reparses_to_equal_tree() {
        for src in ["(N + 1) * M - 4 / K", "min(N - 1, M) % 8", "N < M and not K == 0"] {
            let e = parse_expr(src).unwrap();
            assert_eq!(parse_expr(&e.to_string()).unwrap(), e);
        }
    }
}
