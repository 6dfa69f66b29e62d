//! Linear single-symbol equation solving.
//!
//! Used to unify size symbols when function bodies are inlined or when array
//! shapes meet across a call boundary: each equation pairs a caller-side
//! extent with a callee-side one, and the solver eliminates as many
//! placeholder symbols as it can.

use super::simplify::split_linear;
use super::{simplify, substitute, SymExpr};
use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SolveError {
    #[error("equations are contradictory: residue `{0}` is a nonzero constant")]
    Inconsistent(String),
}

/// Solves `lhs = rhs` equations by repeatedly isolating one symbol with a
/// unit coefficient and substituting it everywhere. Symbols that cannot be
/// isolated this way are left unbound; tautologies drop out. Placeholder
/// symbols (`s_` prefix) are eliminated in preference to user-facing ones,
/// and a bare-symbol left-hand side is isolated first so `s_0 = N` binds
/// `s_0` rather than `N`.
pub fn solve_bindings(
    equations: &[(SymExpr, SymExpr)],
) -> Result<BTreeMap<String, SymExpr>, SolveError> {
    struct Residue {
        expr: SymExpr,
        preferred: Option<String>,
    }

    let mut residues: Vec<Residue> = equations
        .iter()
        .map(|(lhs, rhs)| Residue {
            expr: simplify(&SymExpr::sub(lhs.clone(), rhs.clone())),
            preferred: match lhs {
                SymExpr::Sym(s) => Some(s.clone()),
                _ => None,
            },
        })
        .collect();
    let mut solved: BTreeMap<String, SymExpr> = BTreeMap::new();

    loop {
        let mut progressed = false;
        let mut remaining = Vec::new();
        for res in residues {
            let expr = substitute(&res.expr, &solved);
            match expr.as_const() {
                Some(0) => continue,
                Some(_) => return Err(SolveError::Inconsistent(expr.to_string())),
                None => {}
            }
            if expr == SymExpr::Bool(true) {
                continue;
            }

            let mut candidates: Vec<String> = Vec::new();
            if let Some(p) = &res.preferred {
                candidates.push(p.clone());
            }
            let mut syms = std::collections::BTreeSet::new();
            expr.collect_syms(&mut syms);
            let (placeholders, named): (Vec<_>, Vec<_>) =
                syms.into_iter().partition(|s| s.starts_with("s_"));
            candidates.extend(placeholders);
            candidates.extend(named);

            let mut bound = false;
            for sym in candidates {
                if solved.contains_key(&sym) {
                    continue;
                }
                if let Some((coeff, rest)) = split_linear(&expr, &sym) {
                    // coeff * sym + rest = 0 isolates cleanly only for |coeff| = 1.
                    let value = match coeff {
                        1 => simplify(&SymExpr::sub(SymExpr::Const(0), rest)),
                        -1 => rest,
                        _ => continue,
                    };
                    if value.references(&sym) {
                        continue;
                    }
                    solved.insert(sym, value);
                    bound = true;
                    progressed = true;
                    break;
                }
            }
            if !bound {
                remaining.push(Residue { expr, preferred: res.preferred });
            }
        }
        residues = remaining;
        if !progressed {
            break;
        }
    }

    // Close the substitution so no binding mentions another solved symbol.
    let snapshot = solved.clone();
    for value in solved.values_mut() {
        *value = substitute(value, &snapshot);
    }
    Ok(solved)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbolic::parse_expr;

    fn eq(l: &str, r: &str) -> (SymExpr, SymExpr) {
        (parse_expr(l).unwrap(), parse_expr(r).unwrap())
    }

    #[test]
    fn binds_placeholders_to_named_symbols() {
        let m = solve_bindings(&[eq("s_0", "N"), eq("s_1", "N")]).unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m["s_0"], SymExpr::sym("N"));
        assert_eq!(m["s_1"], SymExpr::sym("N"));
    }

    #[test]
    fn binds_constants() {
        let m = solve_bindings(&[eq("s_0", "5")]).unwrap();
        assert_eq!(m["s_0"], SymExpr::Const(5));
    }

    #[test]
    fn tautologies_bind_nothing() {
        let m = solve_bindings(&[eq("s_0", "s_0")]).unwrap();
        assert!(m.is_empty());
    }

    #[test]
    fn chains_through_substitution() {
        let m = solve_bindings(&[eq("s_0", "s_1 + 1"), eq("s_1", "4")]).unwrap();
        assert_eq!(m["s_1"], SymExpr::Const(4));
        assert_eq!(m["s_0"], SymExpr::Const(5));
    }

    #[test]
    fn rejects_contradictions() {
        let err = solve_bindings(&[eq("s_0", "3"), eq("s_0", "4")]).unwrap_err();
        assert!(matches!(err, SolveError::Inconsistent(_)));
    }

    #[test]
    fn isolates_the_linear_side_of_a_mixed_equation() {
        let m = solve_bindings(&[eq("s_0 * s_0", "N")]).unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m["N"].to_string(), "s_0 * s_0");
    }

    #[test]
    fn leaves_fully_nonlinear_equations_unsolved() {
        let m = solve_bindings(&[eq("s_0 * s_0", "N * M")]).unwrap();
        assert!(m.is_empty());
    }

    #[test]
    fn offset_equations_isolate_the_placeholder() {
        let m = solve_bindings(&[eq("s_0 + 1", "N")]).unwrap();
        assert_eq!(m["s_0"].to_string(), "N - 1");
    }
}
