//! A sound, incomplete prover for predicates under assumptions.
//!
//! An atomic comparison is decided by canonicalizing the difference of its
//! sides and bounding it with interval arithmetic over per-symbol bounds
//! derived from the assumptions; connectives combine three-valued results.
//! Intervals are computed over mathematical integers (overflow widens to
//! unbounded), so `True`/`False` answers are reliable for the moderate
//! magnitudes the pipeline works with; anything undecidable is `Unknown`.

use super::{simplify, CmpKind, SymBinOp, SymExpr};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Truth {
    True,
    False,
    Unknown,
}

impl Truth {
    pub fn not(self) -> Truth {
        match self {
            Truth::True => Truth::False,
            Truth::False => Truth::True,
            Truth::Unknown => Truth::Unknown,
        }
    }

    pub fn and(self, other: Truth) -> Truth {
        match (self, other) {
            (Truth::False, _) | (_, Truth::False) => Truth::False,
            (Truth::True, Truth::True) => Truth::True,
            _ => Truth::Unknown,
        }
    }

    pub fn or(self, other: Truth) -> Truth {
        match (self, other) {
            (Truth::True, _) | (_, Truth::True) => Truth::True,
            (Truth::False, Truth::False) => Truth::False,
            _ => Truth::Unknown,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AssumptionError {
    #[error("assumption `{0}` is not a predicate")]
    NotAPredicate(String),
    #[error("assumptions are contradictory on symbol `{0}`")]
    Contradictory(String),
    #[error("assumption simplifies to false: `{0}`")]
    False(String),
}

type Bound = (Option<i128>, Option<i128>);

/// A consistent set of assumed predicates with derived per-symbol bounds.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Assumptions {
    preds: Vec<SymExpr>,
    bounds: BTreeMap<String, Bound>,
}

impl Assumptions {
    pub fn empty() -> Assumptions {
        Assumptions::default()
    }

    pub fn new(preds: Vec<SymExpr>) -> Result<Assumptions, AssumptionError> {
        let mut a = Assumptions::default();
        for p in preds {
            a.assume(p)?;
        }
        Ok(a)
    }

    pub fn preds(&self) -> &[SymExpr] {
        &self.preds
    }

    pub fn assume(&mut self, pred: SymExpr) -> Result<(), AssumptionError> {
        if !pred.is_predicate() {
            return Err(AssumptionError::NotAPredicate(pred.to_string()));
        }
        let s = simplify(&pred);
        self.derive(&s)?;
        if s != SymExpr::Bool(true) {
            self.preds.push(s);
        }
        Ok(())
    }

    fn derive(&mut self, pred: &SymExpr) -> Result<(), AssumptionError> {
        match pred {
            SymExpr::Bool(true) => Ok(()),
            SymExpr::Bool(false) => Err(AssumptionError::False(pred.to_string())),
            SymExpr::And(a, b) => {
                self.derive(a)?;
                self.derive(b)
            }
            SymExpr::Cmp(op, a, b) => {
                let diff = simplify(&SymExpr::sub((**a).clone(), (**b).clone()));
                if let Some((name, coeff, konst)) = single_symbol_linear(&diff) {
                    self.refine(&name, coeff as i128, konst as i128, *op)?;
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    // Refines the bound of `name` from `coeff * name + konst OP 0`.
    fn refine(&mut self, name: &str, coeff: i128, konst: i128, op: CmpKind) -> Result<(), AssumptionError> {
        let (mut lo, mut hi) = self.bounds.get(name).copied().unwrap_or((None, None));
        let set_hi = |hi: &mut Option<i128>, v: i128| {
            *hi = Some(hi.map_or(v, |h| h.min(v)));
        };
        let set_lo = |lo: &mut Option<i128>, v: i128| {
            *lo = Some(lo.map_or(v, |l| l.max(v)));
        };
        match op {
            CmpKind::Lt => {
                // coeff * S < -konst
                if coeff > 0 {
                    set_hi(&mut hi, (-konst - 1).div_euclid(coeff));
                } else {
                    set_lo(&mut lo, konst.div_euclid(-coeff) + 1);
                }
            }
            CmpKind::Le => {
                if coeff > 0 {
                    set_hi(&mut hi, (-konst).div_euclid(coeff));
                } else {
                    set_lo(&mut lo, (konst + (-coeff) - 1).div_euclid(-coeff));
                }
            }
            CmpKind::Eq => {
                if (-konst).rem_euclid(coeff.abs()) != 0 {
                    return Err(AssumptionError::Contradictory(name.to_string()));
                }
                let v = (-konst).div_euclid(coeff);
                set_lo(&mut lo, v);
                set_hi(&mut hi, v);
            }
            CmpKind::Ne => {}
        }
        if let (Some(l), Some(h)) = (lo, hi) {
            if l > h {
                return Err(AssumptionError::Contradictory(name.to_string()));
            }
        }
        self.bounds.insert(name.to_string(), (lo, hi));
        Ok(())
    }

    pub fn bound_of(&self, name: &str) -> Bound {
        self.bounds.get(name).copied().unwrap_or((None, None))
    }

    /// Checks concrete bindings against every assumed predicate.
    pub fn satisfied_by(&self, bindings: &BTreeMap<String, i64>) -> bool {
        self.preds.iter().all(|p| {
            matches!(
                p.eval(bindings),
                Ok(super::SymValue::Bool(true))
            )
        })
    }
}

// Matches `coeff * S + konst` with a single linear occurrence of one symbol.
fn single_symbol_linear(e: &SymExpr) -> Option<(String, i64, i64)> {
    fn walk(e: &SymExpr, sym: &mut Option<(String, i64)>, konst: &mut i64, sign: i64) -> bool {
        match e {
            SymExpr::Const(c) => {
                *konst = konst.wrapping_add(sign.wrapping_mul(*c));
                true
            }
            SymExpr::Sym(s) => merge(sym, s, sign),
            SymExpr::Bin(SymBinOp::Add, a, b) => walk(a, sym, konst, sign) && walk(b, sym, konst, sign),
            SymExpr::Bin(SymBinOp::Sub, a, b) => walk(a, sym, konst, sign) && walk(b, sym, konst, -sign),
            SymExpr::Bin(SymBinOp::Mul, a, b) => match (&**a, &**b) {
                (SymExpr::Const(c), SymExpr::Sym(s)) | (SymExpr::Sym(s), SymExpr::Const(c)) => {
                    merge(sym, s, sign.wrapping_mul(*c))
                }
                _ => false,
            },
            _ => false,
        }
    }
    fn merge(sym: &mut Option<(String, i64)>, name: &str, coeff: i64) -> bool {
        match sym {
            None => {
                *sym = Some((name.to_string(), coeff));
                true
            }
            Some((n, c)) if n == name => {
                *c = c.wrapping_add(coeff);
                true
            }
            _ => false,
        }
    }
    let mut sym = None;
    let mut konst = 0i64;
    if walk(e, &mut sym, &mut konst, 1) {
        let (name, coeff) = sym?;
        if coeff != 0 {
            return Some((name, coeff, konst));
        }
    }
    None
}

// Interval arithmetic over mathematical integers; None means unbounded.
fn iv_add(a: Bound, b: Bound) -> Bound {
    let lo = match (a.0, b.0) {
        (Some(x), Some(y)) => x.checked_add(y),
        _ => None,
    };
    let hi = match (a.1, b.1) {
        (Some(x), Some(y)) => x.checked_add(y),
        _ => None,
    };
    (lo, hi)
}

fn iv_neg(a: Bound) -> Bound {
    (a.1.and_then(|v| v.checked_neg()), a.0.and_then(|v| v.checked_neg()))
}

fn iv_mul(a: Bound, b: Bound) -> Bound {
    if let (Some(al), Some(ah), Some(bl), Some(bh)) = (a.0, a.1, b.0, b.1) {
        let corners = [
            al.checked_mul(bl),
            al.checked_mul(bh),
            ah.checked_mul(bl),
            ah.checked_mul(bh),
        ];
        if corners.iter().all(Option::is_some) {
            let vals: Vec<i128> = corners.iter().map(|c| c.unwrap()).collect();
            return (vals.iter().copied().min(), vals.iter().copied().max());
        }
        return (None, None);
    }
    // One side unbounded: the product is pinned only when signs are definite.
    let nonneg = |v: Bound| matches!(v.0, Some(l) if l >= 0);
    let nonpos = |v: Bound| matches!(v.1, Some(h) if h <= 0);
    if nonneg(a) && nonneg(b) {
        (
            match (a.0, b.0) {
                (Some(x), Some(y)) => x.checked_mul(y),
                _ => None,
            },
            None,
        )
    } else if nonpos(a) && nonpos(b) {
        (
            match (a.1, b.1) {
                (Some(x), Some(y)) => x.checked_mul(y),
                _ => None,
            },
            None,
        )
    } else if nonneg(a) && nonpos(b) {
        (
            None,
            match (a.0, b.1) {
                (Some(x), Some(y)) => x.checked_mul(y),
                _ => None,
            },
        )
    } else if nonpos(a) && nonneg(b) {
        (
            None,
            match (a.1, b.0) {
                (Some(x), Some(y)) => x.checked_mul(y),
                _ => None,
            },
        )
    } else {
        (None, None)
    }
}

// Flooring division on i128 (rounds toward negative infinity).
fn dfloor(a: i128, b: i128) -> i128 {
    let q = a / b;
    let r = a % b;
    if r != 0 && (r < 0) != (b < 0) {
        q - 1
    } else {
        q
    }
}

fn interval(e: &SymExpr, asm: &Assumptions) -> Bound {
    match e {
        SymExpr::Const(c) => (Some(*c as i128), Some(*c as i128)),
        SymExpr::Sym(s) => asm.bound_of(s),
        SymExpr::Bin(op, a, b) => {
            let ia = interval(a, asm);
            let ib = interval(b, asm);
            match op {
                SymBinOp::Add => iv_add(ia, ib),
                SymBinOp::Sub => iv_add(ia, iv_neg(ib)),
                SymBinOp::Mul => iv_mul(ia, ib),
                SymBinOp::Min => (
                    match (ia.0, ib.0) {
                        (Some(x), Some(y)) => Some(x.min(y)),
                        _ => None,
                    },
                    match (ia.1, ib.1) {
                        (Some(x), Some(y)) => Some(x.min(y)),
                        (Some(x), None) | (None, Some(x)) => Some(x),
                        _ => None,
                    },
                ),
                SymBinOp::Max => (
                    match (ia.0, ib.0) {
                        (Some(x), Some(y)) => Some(x.max(y)),
                        (Some(x), None) | (None, Some(x)) => Some(x),
                        _ => None,
                    },
                    match (ia.1, ib.1) {
                        (Some(x), Some(y)) => Some(x.max(y)),
                        _ => None,
                    },
                ),
                SymBinOp::FloorDiv => {
                    // Needs a bounded numerator and a sign-definite divisor;
                    // floor division is monotone in each argument there, so
                    // corner quotients bound the result. A divisor endpoint
                    // at infinity contributes the limit quotients 0 and -1.
                    let pos = matches!(ib.0, Some(l) if l > 0);
                    let neg = matches!(ib.1, Some(h) if h < 0);
                    let (nl, nh) = match (ia.0, ia.1) {
                        (Some(l), Some(h)) if pos || neg => (l, h),
                        _ => return (None, None),
                    };
                    let mut cands = Vec::new();
                    for n in [nl, nh] {
                        for d in [ib.0, ib.1] {
                            match d {
                                Some(d) => cands.push(dfloor(n, d)),
                                None => {
                                    cands.push(0);
                                    cands.push(-1);
                                }
                            }
                        }
                    }
                    (cands.iter().copied().min(), cands.iter().copied().max())
                }
                SymBinOp::Mod => {
                    if matches!(ib.0, Some(l) if l > 0) {
                        (Some(0), ib.1.map(|h| h - 1))
                    } else if matches!(ib.1, Some(h) if h < 0) {
                        (ib.0.map(|l| l + 1), Some(0))
                    } else {
                        (None, None)
                    }
                }
            }
        }
        _ => (None, None),
    }
}

/// Decides a predicate under assumptions; `Unknown` when the canonical
/// difference cannot be sign-determined.
pub fn prove(pred: &SymExpr, asm: &Assumptions) -> Truth {
    let s = simplify(pred);
    decide(&s, asm)
}

fn decide(pred: &SymExpr, asm: &Assumptions) -> Truth {
    match pred {
        SymExpr::Bool(true) => Truth::True,
        SymExpr::Bool(false) => Truth::False,
        SymExpr::And(a, b) => decide(a, asm).and(decide(b, asm)),
        SymExpr::Or(a, b) => decide(a, asm).or(decide(b, asm)),
        SymExpr::Not(a) => decide(a, asm).not(),
        SymExpr::Cmp(op, a, b) => {
            let diff = simplify(&SymExpr::sub((**a).clone(), (**b).clone()));
            let (lo, hi) = interval(&diff, asm);
            match op {
                CmpKind::Lt => match (lo, hi) {
                    (_, Some(h)) if h < 0 => Truth::True,
                    (Some(l), _) if l >= 0 => Truth::False,
                    _ => Truth::Unknown,
                },
                CmpKind::Le => match (lo, hi) {
                    (_, Some(h)) if h <= 0 => Truth::True,
                    (Some(l), _) if l > 0 => Truth::False,
                    _ => Truth::Unknown,
                },
                CmpKind::Eq => match (lo, hi) {
                    (Some(l), Some(h)) if l == 0 && h == 0 => Truth::True,
                    (Some(l), _) if l > 0 => Truth::False,
                    (_, Some(h)) if h < 0 => Truth::False,
                    _ => Truth::Unknown,
                },
                CmpKind::Ne => match (lo, hi) {
                    (Some(l), Some(h)) if l == 0 && h == 0 => Truth::False,
                    (Some(l), _) if l > 0 => Truth::True,
                    (_, Some(h)) if h < 0 => Truth::True,
                    _ => Truth::Unknown,
                },
            }
        }
        _ => Truth::Unknown,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbolic::parse_predicate;

    fn asm(preds: &[&str]) -> Assumptions {
        Assumptions::new(preds.iter().map(|p| parse_predicate(p).unwrap()).collect()).unwrap()
    }

    fn check(pred: &str, assumptions: &[&str]) -> Truth {
        prove(&parse_predicate(pred).unwrap(), &asm(assumptions))
    }

    #[test]
    fn constant_differences_decide() {
        assert_eq!(check("N == N + 1", &[]), Truth::False);
        assert_eq!(check("N + 1 == 1 + N", &[]), Truth::True);
    }

    #[test]
    fn unbounded_symbols_stay_unknown() {
        assert_eq!(check("N < M", &["N >= 0"]), Truth::Unknown);
    }

    #[test]
    fn assumption_bounds_are_used() {
        assert_eq!(check("N >= 1", &["N >= 4"]), Truth::True);
        assert_eq!(check("N < 0", &["N >= 0"]), Truth::False);
        assert_eq!(check("N * N >= 0", &["N >= 0"]), Truth::True);
        assert_eq!(check("N <= M", &["N <= 3", "M >= 3"]), Truth::True);
    }

    #[test]
    fn contradictory_assumptions_are_rejected() {
        let preds = vec![
            parse_predicate("N >= 4").unwrap(),
            parse_predicate("N < 2").unwrap(),
        ];
        assert!(matches!(
            Assumptions::new(preds),
            Err(AssumptionError::Contradictory(_))
        ));
    }

    #[test]
    fn conjunction_splits_into_bounds() {
        let a = asm(&["N >= 0 and N < 10"]);
        assert_eq!(a.bound_of("N"), (Some(0), Some(9)));
        assert_eq!(prove(&parse_predicate("N <= 9").unwrap(), &a), Truth::True);
    }

    #[test]
    fn satisfied_by_checks_all_predicates() {
        let a = asm(&["N >= 1", "M >= N"]);
        let mut b = std::collections::BTreeMap::new();
        b.insert("N".to_string(), 2i64);
        b.insert("M".to_string(), 5i64);
        assert!(a.satisfied_by(&b));
        b.insert("M".to_string(), 1i64);
        assert!(!a.satisfied_by(&b));
    }
}
