//! Canonicalization into sum-of-products form.
//!
//! An expression is rewritten as a sum of monomials, each a wrapped i64
//! coefficient times a sorted product of atoms (symbols, or opaque
//! min/max/div/mod subexpressions with canonical children). Terms print in
//! ascending atom order with the constant term last, so structurally equal
//! canonical forms mean symbolically equal expressions. Distribution and
//! cancellation are exact under two's-complement wrap because they are ring
//! identities; comparisons fold only when both sides are literals or
//! structurally identical.

use super::{div_floor, mod_floor, CmpKind, SymBinOp, SymExpr};
use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum Atom {
    Sym(String),
    Opaque(SymExpr),
}

#[derive(Debug, Clone, Default)]
struct Poly {
    terms: BTreeMap<Vec<Atom>, i64>,
}

impl Poly {
    fn constant(c: i64) -> Poly {
        let mut p = Poly::default();
        if c != 0 {
            p.terms.insert(Vec::new(), c);
        }
        p
    }

    fn atom(a: Atom) -> Poly {
        let mut p = Poly::default();
        p.terms.insert(vec![a], 1);
        p
    }

    fn add_term(&mut self, mono: Vec<Atom>, coeff: i64) {
        if coeff == 0 {
            return;
        }
        let c = self.terms.entry(mono.clone()).or_insert(0);
        *c = c.wrapping_add(coeff);
        if *c == 0 {
            self.terms.remove(&mono);
        }
    }

    fn add(mut self, other: Poly) -> Poly {
        for (m, c) in other.terms {
            self.add_term(m, c);
        }
        self
    }

    fn negate(self) -> Poly {
        let mut p = Poly::default();
        for (m, c) in self.terms {
            p.terms.insert(m, c.wrapping_neg());
        }
        p
    }

    fn mul(self, other: &Poly) -> Poly {
        let mut p = Poly::default();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                let mut m = ma.clone();
                m.extend(mb.iter().cloned());
                m.sort();
                p.add_term(m, ca.wrapping_mul(*cb));
            }
        }
        p
    }

    fn to_expr(&self) -> SymExpr {
        let term_expr = |mono: &Vec<Atom>, coeff: i64| -> SymExpr {
            let mut factors = mono.iter().map(|a| match a {
                Atom::Sym(s) => SymExpr::Sym(s.clone()),
                Atom::Opaque(e) => e.clone(),
            });
            let mut acc = if coeff == 1 {
                match factors.next() {
                    Some(f) => f,
                    None => SymExpr::Const(1),
                }
            } else {
                SymExpr::Const(coeff)
            };
            for f in factors {
                acc = SymExpr::mul(acc, f);
            }
            acc
        };

        // Symbolic terms in ascending monomial order, constant term last.
        let mut acc: Option<SymExpr> = None;
        let symbolic = self.terms.iter().filter(|(m, _)| !m.is_empty());
        let constant = self.terms.get(&Vec::new()).copied();
        for (m, c) in symbolic {
            acc = Some(match acc {
                None => term_expr(m, *c),
                Some(prev) => {
                    if *c < 0 && *c != i64::MIN {
                        SymExpr::sub(prev, term_expr(m, -*c))
                    } else {
                        SymExpr::add(prev, term_expr(m, *c))
                    }
                }
            });
        }
        match (acc, constant) {
            (None, None) => SymExpr::Const(0),
            (None, Some(c)) => SymExpr::Const(c),
            (Some(e), None) => e,
            (Some(e), Some(c)) => {
                if c < 0 && c != i64::MIN {
                    SymExpr::sub(e, SymExpr::Const(-c))
                } else {
                    SymExpr::add(e, SymExpr::Const(c))
                }
            }
        }
    }
}

fn poly_of(e: &SymExpr) -> Poly {
    match e {
        SymExpr::Const(v) => Poly::constant(*v),
        SymExpr::Sym(s) => Poly::atom(Atom::Sym(s.clone())),
        SymExpr::Bin(SymBinOp::Add, a, b) => poly_of(a).add(poly_of(b)),
        SymExpr::Bin(SymBinOp::Sub, a, b) => poly_of(a).add(poly_of(b).negate()),
        SymExpr::Bin(SymBinOp::Mul, a, b) => poly_of(a).mul(&poly_of(b)),
        other => {
            // Simplifying may expose additive structure (e.g. `x / 1`), so
            // re-dispatch unless the head stayed opaque.
            let s = simplify(other);
            match &s {
                SymExpr::Const(_)
                | SymExpr::Sym(_)
                | SymExpr::Bin(SymBinOp::Add | SymBinOp::Sub | SymBinOp::Mul, _, _) => poly_of(&s),
                _ => Poly::atom(Atom::Opaque(s)),
            }
        }
    }
}

/// Rewrites into canonical form. Idempotent; preserves evaluation whenever
/// the original evaluates without error.
pub fn simplify(e: &SymExpr) -> SymExpr {
    match e {
        SymExpr::Const(_) | SymExpr::Bool(_) | SymExpr::Sym(_) => e.clone(),
        SymExpr::Bin(op @ (SymBinOp::Add | SymBinOp::Sub | SymBinOp::Mul), a, b) => {
            let p = match op {
                SymBinOp::Add => poly_of(a).add(poly_of(b)),
                SymBinOp::Sub => poly_of(a).add(poly_of(b).negate()),
                SymBinOp::Mul => poly_of(a).mul(&poly_of(b)),
                _ => unreachable!(),
            };
            p.to_expr()
        }
        SymExpr::Bin(op, a, b) => {
            let sa = simplify(a);
            let sb = simplify(b);
            if let (Some(ca), Some(cb)) = (sa.as_const(), sb.as_const()) {
                let folded = match op {
                    SymBinOp::FloorDiv => div_floor(ca, cb).ok(),
                    SymBinOp::Mod => mod_floor(ca, cb).ok(),
                    SymBinOp::Min => Some(ca.min(cb)),
                    SymBinOp::Max => Some(ca.max(cb)),
                    _ => unreachable!(),
                };
                if let Some(v) = folded {
                    return SymExpr::Const(v);
                }
            }
            match op {
                SymBinOp::FloorDiv if sb == SymExpr::Const(1) => sa,
                SymBinOp::Mod if sb == SymExpr::Const(1) => SymExpr::Const(0),
                SymBinOp::Min | SymBinOp::Max if sa == sb => sa,
                // min/max are commutative: order operands canonically.
                SymBinOp::Min | SymBinOp::Max if sb < sa => SymExpr::bin(*op, sb, sa),
                _ => SymExpr::bin(*op, sa, sb),
            }
        }
        SymExpr::Cmp(op, a, b) => {
            let sa = simplify(a);
            let sb = simplify(b);
            if let (Some(ca), Some(cb)) = (sa.as_const(), sb.as_const()) {
                let v = match op {
                    CmpKind::Lt => ca < cb,
                    CmpKind::Le => ca <= cb,
                    CmpKind::Eq => ca == cb,
                    CmpKind::Ne => ca != cb,
                };
                return SymExpr::Bool(v);
            }
            if sa == sb {
                return SymExpr::Bool(matches!(op, CmpKind::Le | CmpKind::Eq));
            }
            SymExpr::cmp(*op, sa, sb)
        }
        SymExpr::And(a, b) => {
            let sa = simplify(a);
            let sb = simplify(b);
            match (&sa, &sb) {
                (SymExpr::Bool(false), _) | (_, SymExpr::Bool(false)) => SymExpr::Bool(false),
                (SymExpr::Bool(true), _) => sb,
                (_, SymExpr::Bool(true)) => sa,
                _ if sa == sb => sa,
                _ => SymExpr::And(Box::new(sa), Box::new(sb)),
            }
        }
        SymExpr::Or(a, b) => {
            let sa = simplify(a);
            let sb = simplify(b);
            match (&sa, &sb) {
                (SymExpr::Bool(true), _) | (_, SymExpr::Bool(true)) => SymExpr::Bool(true),
                (SymExpr::Bool(false), _) => sb,
                (_, SymExpr::Bool(false)) => sa,
                _ if sa == sb => sa,
                _ => SymExpr::Or(Box::new(sa), Box::new(sb)),
            }
        }
        SymExpr::Not(a) => {
            let sa = simplify(a);
            match sa {
                SymExpr::Bool(v) => SymExpr::Bool(!v),
                SymExpr::Not(inner) => *inner,
                SymExpr::Cmp(op, l, r) => match op {
                    CmpKind::Lt => SymExpr::Cmp(CmpKind::Le, r, l),
                    CmpKind::Le => SymExpr::Cmp(CmpKind::Lt, r, l),
                    CmpKind::Eq => SymExpr::Cmp(CmpKind::Ne, l, r),
                    CmpKind::Ne => SymExpr::Cmp(CmpKind::Eq, l, r),
                },
                other => SymExpr::Not(Box::new(other)),
            }
        }
    }
}

/// Decomposes `e` as `coeff * sym + rest` where `rest` does not mention
/// `sym` and `coeff` is a nonzero literal. Returns `None` when `sym` is
/// absent, appears non-linearly, with a symbolic coefficient, or inside an
/// opaque subexpression.
pub(crate) fn split_linear(e: &SymExpr, sym: &str) -> Option<(i64, SymExpr)> {
    let mentions = |a: &Atom| match a {
        Atom::Sym(s) => s == sym,
        Atom::Opaque(inner) => inner.references(sym),
    };
    let poly = poly_of(e);
    let mut coeff = 0i64;
    let mut rest = Poly::default();
    for (mono, c) in &poly.terms {
        if mono.len() == 1 && mono[0] == Atom::Sym(sym.to_string()) {
            coeff = coeff.wrapping_add(*c);
        } else if mono.iter().any(mentions) {
            return None;
        } else {
            rest.add_term(mono.clone(), *c);
        }
    }
    if coeff == 0 {
        return None;
    }
    Some((coeff, rest.to_expr()))
}

/// Replaces symbols by expressions, then simplifies.
pub fn substitute(e: &SymExpr, bindings: &BTreeMap<String, SymExpr>) -> SymExpr {
    fn replace(e: &SymExpr, bindings: &BTreeMap<String, SymExpr>) -> SymExpr {
        match e {
            SymExpr::Const(_) | SymExpr::Bool(_) => e.clone(),
            SymExpr::Sym(s) => match bindings.get(s) {
                Some(v) => v.clone(),
                None => e.clone(),
            },
            SymExpr::Bin(op, a, b) => SymExpr::bin(*op, replace(a, bindings), replace(b, bindings)),
            SymExpr::Cmp(op, a, b) => SymExpr::cmp(*op, replace(a, bindings), replace(b, bindings)),
            SymExpr::And(a, b) => SymExpr::And(Box::new(replace(a, bindings)), Box::new(replace(b, bindings))),
            SymExpr::Or(a, b) => SymExpr::Or(Box::new(replace(a, bindings)), Box::new(replace(b, bindings))),
            SymExpr::Not(a) => SymExpr::Not(Box::new(replace(a, bindings))),
        }
    }
    simplify(&replace(e, bindings))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbolic::parse_expr;

    fn simp(s: &str) -> String {
        simplify(&parse_expr(s).unwrap()).to_string()
    }

    #[test]
    fn folds_additive_identity() {
        assert_eq!(simp("N + 0"), "N");
    }

    #[test]
    fn collects_like_terms() {
        assert_eq!(simp("2 * N - N"), "N");
        assert_eq!(simp("(N + 1) - N"), "1");
        assert_eq!(simp("3 * N + 2 - N - 2"), "2 * N");
    }

    #[test]
    fn orders_terms_with_constant_last() {
        assert_eq!(simp("1 + N"), "N + 1");
        assert_eq!(simp("4 + M * 2 + N"), "2 * M + N + 4");
    }

    #[test]
    fn distributes_products() {
        assert_eq!(simp("(N + 1) * (N - 1)"), "N * N - 1");
    }

    #[test]
    fn min_max_canonicalization() {
        assert_eq!(simp("min(N, N)"), "N");
        assert_eq!(simp("min(N, 3)"), "min(3, N)");
        assert_eq!(simp("max(4, 7)"), "7");
    }

    #[test]
    fn comparison_folding() {
        assert_eq!(simp("3 < 4"), "true");
        assert_eq!(simp("N + 1 == 1 + N"), "true");
        assert_eq!(simp("N < M"), "N < M");
        assert_eq!(simp("not N < M"), "M <= N");
    }

    #[test]
    fn substitute_examples() {
        let bind = |pairs: &[(&str, &str)]| -> BTreeMap<String, SymExpr> {
            pairs
                .iter()
                .map(|(k, v)| (k.to_string(), parse_expr(v).unwrap()))
                .collect()
        };
        let e = parse_expr("N + 1").unwrap();
        assert_eq!(substitute(&e, &bind(&[("N", "5")])), SymExpr::Const(6));
        let e = parse_expr("min(N, M)").unwrap();
        assert_eq!(substitute(&e, &bind(&[("M", "N")])), SymExpr::sym("N"));
        let e = parse_expr("s_0 * 4").unwrap();
        assert_eq!(substitute(&e, &bind(&[("s_0", "2")])), SymExpr::Const(8));
    }

    #[test]
    fn simplify_is_idempotent_on_samples() {
        for s in [
            "2 * N - N + M * M - (M + 1) * (M - 1)",
            "min(N + 1, M) / max(2, K % 4)",
            "N < M and not (K == 0 or true)",
            "(N / 2) * 2 + N % 2",
        ] {
            let once = simplify(&parse_expr(s).unwrap());
            assert_eq!(simplify(&once), once, "not idempotent on {s}");
        }
    }
}
