//! Symbolic index ranges and subsets.
//!
//! A range is inclusive on both ends with a positive stride; a subset is one
//! range per array dimension. Ranges whose evaluated begin exceeds their end
//! are empty. Printed form is `begin:end` (stride 1) or `begin:end:stride`,
//! with a single index abbreviating a one-element range.

use super::{prove, simplify, Assumptions, CmpKind, SymBinOp, SymExpr, Truth};
use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SymRange {
    pub begin: SymExpr,
    pub end: SymExpr,
    pub stride: SymExpr,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RangeError {
    #[error("no single strided range soundly covers `{0}` and `{1}`")]
    IncompatibleStride(String, String),
}

impl SymRange {
    /// The one-element range `[e, e]`.
    pub fn index(e: SymExpr) -> SymRange {
        SymRange { begin: e.clone(), end: e, stride: SymExpr::Const(1) }
    }

    /// `[begin, end]` with stride 1.
    pub fn span(begin: SymExpr, end: SymExpr) -> SymRange {
        SymRange { begin, end, stride: SymExpr::Const(1) }
    }

    pub fn is_index(&self) -> bool {
        self.begin == self.end && self.stride == SymExpr::Const(1)
    }

    pub fn canonical(&self) -> SymRange {
        SymRange {
            begin: simplify(&self.begin),
            end: simplify(&self.end),
            stride: simplify(&self.stride),
        }
    }

    /// Element count, valid for non-empty ranges: `(end - begin) / stride + 1`.
    pub fn cardinality(&self) -> SymExpr {
        simplify(&SymExpr::add(
            SymExpr::bin(
                SymBinOp::FloorDiv,
                SymExpr::sub(self.end.clone(), self.begin.clone()),
                self.stride.clone(),
            ),
            SymExpr::Const(1),
        ))
    }

    pub fn collect_syms(&self, out: &mut std::collections::BTreeSet<String>) {
        self.begin.collect_syms(out);
        self.end.collect_syms(out);
        self.stride.collect_syms(out);
    }
}

impl fmt::Display for SymRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_index() {
            return write!(f, "{}", self.begin);
        }
        write!(f, "{}:{}", self.begin, self.end)?;
        if self.stride != SymExpr::Const(1) {
            write!(f, ":{}", self.stride)?;
        }
        Ok(())
    }
}

/// One [`SymRange`] per dimension; empty for scalars.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Subset(pub Vec<SymRange>);

impl Subset {
    pub fn scalar() -> Subset {
        Subset(Vec::new())
    }

    pub fn indices(ixs: Vec<SymExpr>) -> Subset {
        Subset(ixs.into_iter().map(SymRange::index).collect())
    }

    pub fn rank(&self) -> usize {
        self.0.len()
    }

    pub fn is_indices(&self) -> bool {
        self.0.iter().all(SymRange::is_index)
    }

    pub fn canonical(&self) -> Subset {
        Subset(self.0.iter().map(SymRange::canonical).collect())
    }

    /// Product of per-dimension cardinalities (1 for scalars).
    pub fn cardinality(&self) -> SymExpr {
        let mut acc = SymExpr::Const(1);
        for r in &self.0 {
            acc = SymExpr::mul(acc, r.cardinality());
        }
        simplify(&acc)
    }

    pub fn collect_syms(&self, out: &mut std::collections::BTreeSet<String>) {
        for r in &self.0 {
            r.collect_syms(out);
        }
    }
}

impl fmt::Display for Subset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, r) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{r}")?;
        }
        write!(f, "]")
    }
}

fn stride_phase_compatible(base: &SymRange, other: &SymRange, asm: &Assumptions) -> Truth {
    if base.stride == SymExpr::Const(1) {
        return Truth::True;
    }
    let phase = SymExpr::bin(
        SymBinOp::Mod,
        SymExpr::sub(other.begin.clone(), base.begin.clone()),
        base.stride.clone(),
    );
    prove(&SymExpr::cmp(CmpKind::Eq, phase, SymExpr::Const(0)), asm)
}

/// Whether every element of `b` provably lies in `a`.
pub fn range_contains(a: &SymRange, b: &SymRange, asm: &Assumptions) -> Truth {
    let stride_ok = if a.stride == b.stride {
        Truth::True
    } else {
        prove(
            &SymExpr::cmp(
                CmpKind::Eq,
                SymExpr::bin(SymBinOp::Mod, b.stride.clone(), a.stride.clone()),
                SymExpr::Const(0),
            ),
            asm,
        )
    };
    let lo = prove(&SymExpr::cmp(CmpKind::Le, a.begin.clone(), b.begin.clone()), asm);
    let hi = prove(&SymExpr::cmp(CmpKind::Le, b.end.clone(), a.end.clone()), asm);
    stride_ok
        .and(stride_phase_compatible(a, b, asm))
        .and(lo)
        .and(hi)
}

/// Smallest representable single range covering both inputs. The result may
/// over-approximate within the common stride lattice but never drops an
/// element of either input.
pub fn union_ranges(a: &SymRange, b: &SymRange, asm: &Assumptions) -> Result<SymRange, RangeError> {
    let a = a.canonical();
    let b = b.canonical();
    if range_contains(&a, &b, asm) == Truth::True {
        return Ok(a);
    }
    if range_contains(&b, &a, asm) == Truth::True {
        return Ok(b);
    }
    let incompatible = || RangeError::IncompatibleStride(a.to_string(), b.to_string());
    if a.stride != b.stride {
        return Err(incompatible());
    }
    if stride_phase_compatible(&a, &b, asm) != Truth::True {
        return Err(incompatible());
    }
    let begin = match prove(&SymExpr::cmp(CmpKind::Le, a.begin.clone(), b.begin.clone()), asm) {
        Truth::True => a.begin.clone(),
        Truth::False => b.begin.clone(),
        Truth::Unknown => simplify(&SymExpr::bin(SymBinOp::Min, a.begin.clone(), b.begin.clone())),
    };
    let end = match prove(&SymExpr::cmp(CmpKind::Le, a.end.clone(), b.end.clone()), asm) {
        Truth::True => b.end.clone(),
        Truth::False => a.end.clone(),
        Truth::Unknown => simplify(&SymExpr::bin(SymBinOp::Max, a.end.clone(), b.end.clone())),
    };
    Ok(SymRange { begin, end, stride: a.stride.clone() })
}

/// Three-valued disjointness of two ranges under assumptions.
pub fn ranges_disjoint(a: &SymRange, b: &SymRange, asm: &Assumptions) -> Truth {
    let a = a.canonical();
    let b = b.canonical();
    let a_before = prove(&SymExpr::cmp(CmpKind::Lt, a.end.clone(), b.begin.clone()), asm);
    let b_before = prove(&SymExpr::cmp(CmpKind::Lt, b.end.clone(), a.begin.clone()), asm);
    if a_before == Truth::True || b_before == Truth::True {
        return Truth::True;
    }
    // Equal strides with provably different phases never collide.
    if a.stride == b.stride && a.stride != SymExpr::Const(1) {
        let phase = SymExpr::bin(
            SymBinOp::Mod,
            SymExpr::sub(b.begin.clone(), a.begin.clone()),
            a.stride.clone(),
        );
        if prove(&SymExpr::cmp(CmpKind::Ne, phase, SymExpr::Const(0)), asm) == Truth::True {
            return Truth::True;
        }
    }
    // Dense ranges that provably interleave definitely overlap.
    if a.stride == SymExpr::Const(1) && b.stride == SymExpr::Const(1) {
        let a_reaches = prove(&SymExpr::cmp(CmpKind::Le, b.begin.clone(), a.end.clone()), asm);
        let b_reaches = prove(&SymExpr::cmp(CmpKind::Le, a.begin.clone(), b.end.clone()), asm);
        if a_reaches == Truth::True && b_reaches == Truth::True {
            return Truth::False;
        }
    }
    Truth::Unknown
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbolic::{parse_expr, parse_predicate};

    fn r(begin: &str, end: &str) -> SymRange {
        SymRange::span(parse_expr(begin).unwrap(), parse_expr(end).unwrap())
    }

    fn strided(begin: &str, end: &str, stride: i64) -> SymRange {
        SymRange {
            begin: parse_expr(begin).unwrap(),
            end: parse_expr(end).unwrap(),
            stride: SymExpr::Const(stride),
        }
    }

    fn empty() -> Assumptions {
        Assumptions::empty()
    }

    #[test]
    fn union_of_overlapping_spans() {
        let u = union_ranges(&r("0", "4"), &r("2", "7"), &empty()).unwrap();
        assert_eq!(u, r("0", "7"));
    }

    #[test]
    fn union_of_adjacent_indices() {
        let u = union_ranges(&SymRange::index(parse_expr("i").unwrap()), &SymRange::index(parse_expr("i + 1").unwrap()), &empty()).unwrap();
        assert_eq!(u.to_string(), "i:i + 1");
    }

    #[test]
    fn union_over_approximates_gaps() {
        // Checked by enumeration: every element of [0,1] and [5,6] lies in [0,6].
        let u = union_ranges(&r("0", "1"), &r("5", "6"), &empty()).unwrap();
        assert_eq!(u, r("0", "6"));
        for v in 0..=1i64 {
            assert!((0..=6).contains(&v));
        }
        for v in 5..=6i64 {
            assert!((0..=6).contains(&v));
        }
    }

    #[test]
    fn union_rejects_incompatible_phases() {
        let e = union_ranges(&strided("0", "8", 2), &strided("1", "9", 2), &empty());
        assert!(matches!(e, Err(RangeError::IncompatibleStride(..))));
    }

    #[test]
    fn disjoint_halves() {
        let asm = Assumptions::new(vec![parse_predicate("N >= 1").unwrap()]).unwrap();
        assert_eq!(ranges_disjoint(&r("0", "N - 1"), &r("N", "2 * N - 1"), &asm), Truth::True);
    }

    #[test]
    fn identical_indices_overlap() {
        let a = SymRange::index(parse_expr("i").unwrap());
        assert_eq!(ranges_disjoint(&a, &a, &empty()), Truth::False);
    }

    #[test]
    fn unrelated_indices_are_unknown() {
        let a = SymRange::index(parse_expr("i").unwrap());
        let b = SymRange::index(parse_expr("j").unwrap());
        assert_eq!(ranges_disjoint(&a, &b, &empty()), Truth::Unknown);
    }

    #[test]
    fn interleaved_strides_are_disjoint() {
        // Oracle: {0,2,4,6,8} and {1,3,5,7,9} share no element.
        let a = strided("0", "8", 2);
        let b = strided("1", "9", 2);
        assert_eq!(ranges_disjoint(&a, &b, &empty()), Truth::True);
        let xs: Vec<i64> = (0..=8).step_by(2).collect();
        let ys: Vec<i64> = (1..=9).step_by(2).collect();
        assert!(xs.iter().all(|x| !ys.contains(x)));
    }

    #[test]
    fn cardinality_of_spans() {
        assert_eq!(r("0", "N - 1").cardinality().to_string(), "N");
        assert_eq!(strided("0", "8", 2).cardinality(), SymExpr::Const(5));
        assert_eq!(Subset(vec![r("0", "N - 1"), r("0", "M - 1")]).cardinality().to_string(), "M * N");
    }
}
