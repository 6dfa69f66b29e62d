//! Symbolic integer expressions and predicates.
//!
//! Expressions are built over 64-bit two's-complement integers: arithmetic
//! wraps on overflow, and floor-div/mod round toward negative infinity, so
//! evaluation agrees bit-for-bit with the interpreters and with emitted C
//! compiled under `-fwrapv`. Predicates extend the arithmetic grammar with
//! comparisons and `and`/`or`/`not`.
//!
//! [`simplify`] rewrites an expression into a canonical sum-of-products form;
//! [`prove`] is a sound-but-incomplete decision procedure over that form.

mod parse;
mod prove;
mod range;
mod simplify;
mod solve;

pub use parse::{parse_expr, parse_predicate, ParseError, RESERVED};
pub(crate) use parse::parse_expr_cursor;
pub use prove::{prove, Assumptions, AssumptionError, Truth};
pub use range::{range_contains, ranges_disjoint, union_ranges, RangeError, Subset, SymRange};
pub use simplify::{simplify, substitute};
pub use solve::{solve_bindings, SolveError};

use std::collections::BTreeSet;
use std::fmt;

/// Binary arithmetic operators. Division and modulo are flooring.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SymBinOp {
    Add,
    Sub,
    Mul,
    FloorDiv,
    Mod,
    Min,
    Max,
}

/// Comparison operators. `>` and `>=` are normalized away at parse time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CmpKind {
    Lt,
    Le,
    Eq,
    Ne,
}

/// A symbolic integer expression or predicate.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SymExpr {
    Const(i64),
    Bool(bool),
    Sym(String),
    Bin(SymBinOp, Box<SymExpr>, Box<SymExpr>),
    Cmp(CmpKind, Box<SymExpr>, Box<SymExpr>),
    And(Box<SymExpr>, Box<SymExpr>),
    Or(Box<SymExpr>, Box<SymExpr>),
    Not(Box<SymExpr>),
}

/// Result of evaluating a [`SymExpr`] under a complete binding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SymValue {
    Int(i64),
    Bool(bool),
}

impl SymValue {
    pub fn as_int(self) -> Result<i64, EvalError> {
        match self {
            SymValue::Int(v) => Ok(v),
            SymValue::Bool(_) => Err(EvalError::TypeMismatch),
        }
    }

    pub fn as_bool(self) -> Result<bool, EvalError> {
        match self {
            SymValue::Bool(v) => Ok(v),
            SymValue::Int(_) => Err(EvalError::TypeMismatch),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("unbound symbol `{0}`")]
    UnboundSymbol(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("type mismatch between integer and boolean operands")]
    TypeMismatch,
}

/// Flooring division with two's-complement wrap (`i64::MIN / -1` wraps).
pub fn div_floor(a: i64, b: i64) -> Result<i64, EvalError> {
    if b == 0 {
        return Err(EvalError::DivisionByZero);
    }
    let q = a.wrapping_div(b);
    let r = a.wrapping_rem(b);
    if r != 0 && (r < 0) != (b < 0) {
        Ok(q.wrapping_sub(1))
    } else {
        Ok(q)
    }
}

/// Flooring modulo: the result has the sign of the divisor.
pub fn mod_floor(a: i64, b: i64) -> Result<i64, EvalError> {
    if b == 0 {
        return Err(EvalError::DivisionByZero);
    }
    let r = a.wrapping_rem(b);
    if r != 0 && (r < 0) != (b < 0) {
        Ok(r.wrapping_add(b))
    } else {
        Ok(r)
    }
}

impl SymExpr {
    pub fn sym(name: impl Into<String>) -> SymExpr {
        SymExpr::Sym(name.into())
    }

    pub fn bin(op: SymBinOp, lhs: SymExpr, rhs: SymExpr) -> SymExpr {
        SymExpr::Bin(op, Box::new(lhs), Box::new(rhs))
    }

    pub fn add(lhs: SymExpr, rhs: SymExpr) -> SymExpr {
        SymExpr::bin(SymBinOp::Add, lhs, rhs)
    }

    pub fn sub(lhs: SymExpr, rhs: SymExpr) -> SymExpr {
        SymExpr::bin(SymBinOp::Sub, lhs, rhs)
    }

    pub fn mul(lhs: SymExpr, rhs: SymExpr) -> SymExpr {
        SymExpr::bin(SymBinOp::Mul, lhs, rhs)
    }

    pub fn cmp(op: CmpKind, lhs: SymExpr, rhs: SymExpr) -> SymExpr {
        SymExpr::Cmp(op, Box::new(lhs), Box::new(rhs))
    }

    pub fn as_const(&self) -> Option<i64> {
        match self {
            SymExpr::Const(v) => Some(*v),
            _ => None,
        }
    }

    pub fn is_predicate(&self) -> bool {
        matches!(
            self,
            SymExpr::Bool(_) | SymExpr::Cmp(..) | SymExpr::And(..) | SymExpr::Or(..) | SymExpr::Not(..)
        )
    }

    /// Free symbols, in sorted order.
    pub fn free_syms(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_syms(&mut out);
        out
    }

    pub fn collect_syms(&self, out: &mut BTreeSet<String>) {
        match self {
            SymExpr::Const(_) | SymExpr::Bool(_) => {}
            SymExpr::Sym(s) => {
                out.insert(s.clone());
            }
            SymExpr::Bin(_, a, b) | SymExpr::Cmp(_, a, b) | SymExpr::And(a, b) | SymExpr::Or(a, b) => {
                a.collect_syms(out);
                b.collect_syms(out);
            }
            SymExpr::Not(a) => a.collect_syms(out),
        }
    }

    pub fn references(&self, name: &str) -> bool {
        match self {
            SymExpr::Const(_) | SymExpr::Bool(_) => false,
            SymExpr::Sym(s) => s == name,
            SymExpr::Bin(_, a, b) | SymExpr::Cmp(_, a, b) | SymExpr::And(a, b) | SymExpr::Or(a, b) => {
                a.references(name) || b.references(name)
            }
            SymExpr::Not(a) => a.references(name),
        }
    }

    /// Evaluates under a symbol resolver. Arithmetic wraps; div/mod floor.
    pub fn eval_with(&self, resolve: &dyn Fn(&str) -> Option<i64>) -> Result<SymValue, EvalError> {
        use SymValue::*;
        match self {
            SymExpr::Const(v) => Ok(Int(*v)),
            SymExpr::Bool(b) => Ok(Bool(*b)),
            SymExpr::Sym(s) => resolve(s)
                .map(Int)
                .ok_or_else(|| EvalError::UnboundSymbol(s.clone())),
            SymExpr::Bin(op, a, b) => {
                let a = a.eval_with(resolve)?.as_int()?;
                let b = b.eval_with(resolve)?.as_int()?;
                let v = match op {
                    SymBinOp::Add => a.wrapping_add(b),
                    SymBinOp::Sub => a.wrapping_sub(b),
                    SymBinOp::Mul => a.wrapping_mul(b),
                    SymBinOp::FloorDiv => div_floor(a, b)?,
                    SymBinOp::Mod => mod_floor(a, b)?,
                    SymBinOp::Min => a.min(b),
                    SymBinOp::Max => a.max(b),
                };
                Ok(Int(v))
            }
            SymExpr::Cmp(op, a, b) => {
                let a = a.eval_with(resolve)?.as_int()?;
                let b = b.eval_with(resolve)?.as_int()?;
                let v = match op {
                    CmpKind::Lt => a < b,
                    CmpKind::Le => a <= b,
                    CmpKind::Eq => a == b,
                    CmpKind::Ne => a != b,
                };
                Ok(Bool(v))
            }
            SymExpr::And(a, b) => Ok(Bool(
                a.eval_with(resolve)?.as_bool()? && b.eval_with(resolve)?.as_bool()?,
            )),
            SymExpr::Or(a, b) => Ok(Bool(
                a.eval_with(resolve)?.as_bool()? || b.eval_with(resolve)?.as_bool()?,
            )),
            SymExpr::Not(a) => Ok(Bool(!a.eval_with(resolve)?.as_bool()?)),
        }
    }

    pub fn eval(&self, bindings: &std::collections::BTreeMap<String, i64>) -> Result<SymValue, EvalError> {
        self.eval_with(&|name| bindings.get(name).copied())
    }
}

// Operator precedence levels used by the canonical printer. Matching the
// grammar: or < and < not < comparisons < additive < multiplicative < atoms.
fn prec(e: &SymExpr) -> u8 {
    match e {
        SymExpr::Or(..) => 1,
        SymExpr::And(..) => 2,
        SymExpr::Not(..) => 3,
        SymExpr::Cmp(..) => 4,
        SymExpr::Bin(SymBinOp::Add | SymBinOp::Sub, ..) => 5,
        SymExpr::Bin(SymBinOp::Mul | SymBinOp::FloorDiv | SymBinOp::Mod, ..) => 6,
        _ => 7,
    }
}

fn fmt_child(f: &mut fmt::Formatter<'_>, child: &SymExpr, min_prec: u8) -> fmt::Result {
    if prec(child) < min_prec {
        write!(f, "({child})")
    } else {
        write!(f, "{child}")
    }
}

impl fmt::Display for SymExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SymExpr::Const(v) => write!(f, "{v}"),
            SymExpr::Bool(b) => write!(f, "{b}"),
            SymExpr::Sym(s) => write!(f, "{s}"),
            SymExpr::Bin(SymBinOp::Min, a, b) => write!(f, "min({a}, {b})"),
            SymExpr::Bin(SymBinOp::Max, a, b) => write!(f, "max({a}, {b})"),
            SymExpr::Bin(op, a, b) => {
                let p = prec(self);
                let sign = match op {
                    SymBinOp::Add => "+",
                    SymBinOp::Sub => "-",
                    SymBinOp::Mul => "*",
                    SymBinOp::FloorDiv => "/",
                    SymBinOp::Mod => "%",
                    SymBinOp::Min | SymBinOp::Max => unreachable!(),
                };
                fmt_child(f, a, p)?;
                write!(f, " {sign} ")?;
                // Right operand needs parens at equal precedence to keep
                // left-associative reparsing structure-preserving.
                fmt_child(f, b, p + 1)
            }
            SymExpr::Cmp(op, a, b) => {
                let sign = match op {
                    CmpKind::Lt => "<",
                    CmpKind::Le => "<=",
                    CmpKind::Eq => "==",
                    CmpKind::Ne => "!=",
                };
                fmt_child(f, a, 5)?;
                write!(f, " {sign} ")?;
                fmt_child(f, b, 5)
            }
            SymExpr::And(a, b) => {
                fmt_child(f, a, 2)?;
                write!(f, " and ")?;
                fmt_child(f, b, 3)
            }
            SymExpr::Or(a, b) => {
                fmt_child(f, a, 1)?;
                write!(f, " or ")?;
                fmt_child(f, b, 2)
            }
            SymExpr::Not(a) => {
                write!(f, "not ")?;
                fmt_child(f, a, 3)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn b(pairs: &[(&str, i64)]) -> BTreeMap<String, i64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn eval_wraps_on_overflow() {
        let e = SymExpr::add(SymExpr::Sym("N".into()), SymExpr::Const(1));
        assert_eq!(
            e.eval(&b(&[("N", i64::MAX)])).unwrap(),
            SymValue::Int(i64::MIN)
        );
    }

    #[test]
    fn floor_div_rounds_toward_negative_infinity() {
        assert_eq!(div_floor(-7, 2).unwrap(), -4);
        assert_eq!(div_floor(7, -2).unwrap(), -4);
        assert_eq!(div_floor(-7, -2).unwrap(), 3);
        assert_eq!(mod_floor(-7, 2).unwrap(), 1);
        assert_eq!(mod_floor(7, -2).unwrap(), -1);
        assert_eq!(mod_floor(-7, -2).unwrap(), -1);
        assert_eq!(div_floor(i64::MIN, -1).unwrap(), i64::MIN);
    }

    #[test]
    fn division_by_zero_is_an_error() {
        let e = SymExpr::bin(SymBinOp::FloorDiv, SymExpr::Const(1), SymExpr::Const(0));
        assert_eq!(e.eval(&b(&[])), Err(EvalError::DivisionByZero));
    }

    #[test]
    fn unbound_symbol_is_an_error() {
        let e = SymExpr::sym("Q");
        assert_eq!(e.eval(&b(&[])), Err(EvalError::UnboundSymbol("Q".into())));
    }

    #[test]
    fn display_parenthesizes_by_structure() {
        let e = SymExpr::mul(
            SymExpr::add(SymExpr::sym("N"), SymExpr::Const(1)),
            SymExpr::sym("M"),
        );
        assert_eq!(e.to_string(), "(N + 1) * M");
        let e = SymExpr::sub(
            SymExpr::sym("N"),
            SymExpr::sub(SymExpr::sym("M"), SymExpr::Const(1)),
        );
        assert_eq!(e.to_string(), "N - (M - 1)");
    }
}
