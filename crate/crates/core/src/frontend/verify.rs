//! Structural and type checks for frontend programs. Every program that
//! enters the pipeline passes these checks, so later stages can assume
//! SSA form, scoped visibility, and consistent types.

use super::*;
use crate::value::ElemType;
use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {msg}")]
pub struct VerifyError {
    pub line: u32,
    pub msg: String,
}

fn err<T>(line: u32, msg: impl Into<String>) -> Result<T, VerifyError> {
    Err(VerifyError { line, msg: msg.into() })
}

/// Scoped value environment. Names are unique per function (checked), so a
/// plain map plus a save/restore discipline models block visibility.
struct Env<'p> {
    program: &'p Program,
    func: &'p Function,
    /// Types of values visible at the current point.
    scope: BTreeMap<String, Type>,
    /// All names ever defined in this function, for the uniqueness check.
    defined: BTreeSet<String>,
}

impl<'p> Env<'p> {
    fn define(&mut self, line: u32, name: &str, ty: Type) -> Result<(), VerifyError> {
        if !self.defined.insert(name.to_string()) {
            return err(line, format!("value %{name} defined more than once"));
        }
        self.scope.insert(name.to_string(), ty);
        Ok(())
    }

    fn lookup(&self, line: u32, name: &str) -> Result<&Type, VerifyError> {
        match self.scope.get(name) {
            Some(t) => Ok(t),
            None => err(line, format!("use of undefined value %{name}")),
        }
    }

    fn scalar(&self, line: u32, name: &str) -> Result<ElemType, VerifyError> {
        match self.lookup(line, name)? {
            Type::Scalar(e) => Ok(*e),
            Type::MemRef(_) => err(line, format!("%{name} is a memref where a scalar is needed")),
        }
    }

    fn index(&self, line: u32, name: &str) -> Result<(), VerifyError> {
        match self.scalar(line, name)? {
            ElemType::I64 => Ok(()),
            ElemType::F64 => err(line, format!("%{name} must be i64 here")),
        }
    }

    fn memref(&self, line: u32, name: &str) -> Result<&MemRefType, VerifyError> {
        match self.lookup(line, name)? {
            Type::MemRef(m) => Ok(m),
            Type::Scalar(_) => err(line, format!("%{name} is a scalar where a memref is needed")),
        }
    }
}

fn check_memref_dims(
    line: u32,
    m: &MemRefType,
    symbols: &BTreeSet<&str>,
    allow_dyn: bool,
) -> Result<(), VerifyError> {
    if m.dims.is_empty() {
        return err(line, "memref type needs at least one dimension");
    }
    for d in &m.dims {
        match d {
            Dim::Lit(v) if *v <= 0 => {
                return err(line, format!("memref dimension {v} must be positive"))
            }
            Dim::Lit(_) => {}
            Dim::Dyn if allow_dyn => {}
            Dim::Dyn => return err(line, "`?` dimensions are only allowed on parameters"),
            Dim::Sym(s) if symbols.contains(s.as_str()) => {}
            Dim::Sym(s) => return err(line, format!("dimension symbol {s} is not declared")),
        }
    }
    Ok(())
}

fn check_block(env: &mut Env, b: &Block, in_loop: bool, top_level: bool) -> Result<(), VerifyError> {
    let symbols: BTreeSet<&str> = env.func.symbols.iter().map(|s| s.as_str()).collect();
    for (pos, op) in b.0.iter().enumerate() {
        let line = op.line;
        let is_last = pos + 1 == b.0.len();
        if !matches!(op.kind, OpKind::Call { .. }) {
            match (&op.result, &op.kind) {
                (Some(_), k) if !k.has_result() => {
                    return err(line, "this operation does not produce a value")
                }
                (None, k) if k.has_result() => {
                    return err(line, "this operation must bind a result value")
                }
                _ => {}
            }
        }
        match &op.kind {
            OpKind::ConstI(_) => {
                env.define(line, op.result.as_ref().unwrap(), Type::Scalar(ElemType::I64))?;
            }
            OpKind::ConstF(_) => {
                env.define(line, op.result.as_ref().unwrap(), Type::Scalar(ElemType::F64))?;
            }
            OpKind::SymRead(s) => {
                if !symbols.contains(s.as_str()) {
                    return err(line, format!("symbol {s} is not declared in syms(...)"));
                }
                env.define(line, op.result.as_ref().unwrap(), Type::Scalar(ElemType::I64))?;
            }
            OpKind::Arith(_, a, c) => {
                let ta = env.scalar(line, a)?;
                let tc = env.scalar(line, c)?;
                if ta != tc {
                    return err(line, format!("operand types differ: %{a} is {ta}, %{c} is {tc}"));
                }
                env.define(line, op.result.as_ref().unwrap(), Type::Scalar(ta))?;
            }
            OpKind::Cmp(_, a, c) => {
                let ta = env.scalar(line, a)?;
                let tc = env.scalar(line, c)?;
                if ta != tc {
                    return err(line, format!("operand types differ: %{a} is {ta}, %{c} is {tc}"));
                }
                env.define(line, op.result.as_ref().unwrap(), Type::Scalar(ElemType::I64))?;
            }
            OpKind::Math(_, a) => {
                if env.scalar(line, a)? != ElemType::F64 {
                    return err(line, format!("math operand %{a} must be f64"));
                }
                env.define(line, op.result.as_ref().unwrap(), Type::Scalar(ElemType::F64))?;
            }
            OpKind::Alloc(m) => {
                check_memref_dims(line, m, &symbols, false)?;
                env.define(line, op.result.as_ref().unwrap(), Type::MemRef(m.clone()))?;
            }
            OpKind::Load { mem, indices } => {
                let m = env.memref(line, mem)?.clone();
                if m.dims.len() != indices.len() {
                    return err(
                        line,
                        format!(
                            "%{mem} has rank {} but {} indices were given",
                            m.dims.len(),
                            indices.len()
                        ),
                    );
                }
                for ix in indices {
                    env.index(line, ix)?;
                }
                env.define(line, op.result.as_ref().unwrap(), Type::Scalar(m.elem))?;
            }
            OpKind::Store { value, mem, indices } => {
                let m = env.memref(line, mem)?.clone();
                if m.dims.len() != indices.len() {
                    return err(
                        line,
                        format!(
                            "%{mem} has rank {} but {} indices were given",
                            m.dims.len(),
                            indices.len()
                        ),
                    );
                }
                for ix in indices {
                    env.index(line, ix)?;
                }
                if env.scalar(line, value)? != m.elem {
                    return err(line, format!("stored value %{value} does not match element type"));
                }
            }
            OpKind::For { iv, lb, ub, step, body } => {
                if *step <= 0 {
                    return err(line, "loop step must be positive");
                }
                env.index(line, lb)?;
                env.index(line, ub)?;
                let saved = env.scope.clone();
                env.define(line, iv, Type::Scalar(ElemType::I64))?;
                check_block(env, body, true, false)?;
                env.scope = saved;
            }
            OpKind::While { cond, cond_val, body } => {
                let saved = env.scope.clone();
                check_block(env, cond, true, false)?;
                env.index(line, cond_val)?;
                env.scope = saved;
                let saved = env.scope.clone();
                check_block(env, body, true, false)?;
                env.scope = saved;
            }
            OpKind::If { cond, then_blk, else_blk } => {
                env.index(line, cond)?;
                let saved = env.scope.clone();
                check_block(env, then_blk, in_loop, false)?;
                env.scope = saved.clone();
                check_block(env, else_blk, in_loop, false)?;
                env.scope = saved;
            }
            OpKind::Call { callee, args } => {
                let Some(f) = env.program.function(callee) else {
                    return err(line, format!("call to unknown function @{callee}"));
                };
                if f.is_entry {
                    return err(line, format!("cannot call entry function @{callee}"));
                }
                if f.params.len() != args.len() {
                    return err(
                        line,
                        format!(
                            "@{callee} takes {} arguments but {} were given",
                            f.params.len(),
                            args.len()
                        ),
                    );
                }
                for (arg, (pname, pty)) in args.iter().zip(&f.params) {
                    let aty = env.lookup(line, arg)?;
                    let compatible = match (aty, pty) {
                        (Type::Scalar(a), Type::Scalar(b)) => a == b,
                        (Type::MemRef(a), Type::MemRef(b)) => {
                            a.elem == b.elem && a.dims.len() == b.dims.len()
                        }
                        _ => false,
                    };
                    if !compatible {
                        return err(
                            line,
                            format!("argument %{arg} does not match parameter %{pname} of @{callee}"),
                        );
                    }
                }
                match (&f.result, &op.result) {
                    (Some(Type::Scalar(e)), Some(r)) => {
                        env.define(line, r, Type::Scalar(*e))?;
                    }
                    (Some(Type::MemRef(_)), _) => {
                        return err(line, format!("@{callee} returns a memref, which calls cannot"))
                    }
                    (None, None) => {}
                    (None, Some(_)) => {
                        return err(line, format!("@{callee} returns nothing"))
                    }
                    (Some(_), None) => {
                        return err(line, format!("result of @{callee} must be bound"))
                    }
                }
            }
            OpKind::Return(v) => {
                if !top_level || !is_last {
                    return err(
                        line,
                        "return is only allowed as the final operation of a function body",
                    );
                }
                match (&env.func.result, v) {
                    (Some(Type::Scalar(e)), Some(name)) => {
                        if env.scalar(line, name)? != *e {
                            return err(line, "returned value does not match result type");
                        }
                    }
                    (Some(Type::MemRef(_)), _) => {
                        return err(line, "functions cannot return memrefs")
                    }
                    (None, None) => {}
                    (None, Some(_)) => return err(line, "function declares no result"),
                    (Some(_), None) => return err(line, "function result is missing"),
                }
            }
        }
    }
    if top_level && !matches!(b.0.last().map(|o| &o.kind), Some(OpKind::Return(_))) {
        let line = b.0.last().map(|o| o.line).unwrap_or(0);
        return err(line, "function body must end with return");
    }
    Ok(())
}

/// Checks one whole program: name uniqueness, a single entry, SSA and
/// scoping rules, and operand/result typing.
pub fn verify_program(p: &Program) -> Result<(), VerifyError> {
    let mut names = BTreeSet::new();
    for f in &p.functions {
        if !names.insert(f.name.as_str()) {
            return err(0, format!("function @{} defined more than once", f.name));
        }
    }
    let entries = p.functions.iter().filter(|f| f.is_entry).count();
    if entries != 1 {
        return err(0, format!("expected exactly one entry function, found {entries}"));
    }
    for f in &p.functions {
        verify_function(p, f)?;
    }
    Ok(())
}

fn verify_function(p: &Program, f: &Function) -> Result<(), VerifyError> {
    let symbols: BTreeSet<&str> = f.symbols.iter().map(|s| s.as_str()).collect();
    if symbols.len() != f.symbols.len() {
        return err(0, format!("duplicate symbol declaration in @{}", f.name));
    }
    for a in &f.assume {
        for s in a.free_syms() {
            if !symbols.contains(s.as_str()) {
                return err(0, format!("assumption references undeclared symbol {s}"));
            }
        }
    }
    if let Some(Type::MemRef(_)) = f.result {
        return err(0, format!("@{} declares a memref result", f.name));
    }
    let mut env = Env {
        program: p,
        func: f,
        scope: BTreeMap::new(),
        defined: BTreeSet::new(),
    };
    for (name, ty) in &f.params {
        if let Type::MemRef(m) = ty {
            check_memref_dims(0, m, &symbols, true)?;
        }
        env.define(0, name, ty.clone())?;
    }
    check_block(&mut env, &f.body, false, true)
}

#[cfg(test)]
mod tests {
    use super::super::parse_program;

    fn expect_err(src: &str, needle: &str) {
        let e = parse_program(src).unwrap_err();
        assert!(e.msg.contains(needle), "expected `{needle}` in `{}`", e.msg);
    }

    #[test]
    fn rejects_out_of_scope_use() {
        expect_err(
            "func @f(%a: memref<4xi64>) entry { \
               %c0 = const 0 : i64 %c1 = const 1 : i64 \
               for %i = %c0 to %c1 step 1 { %v = load %a[%i] } \
               store %v, %a[%c0] return }",
            "undefined value %v",
        );
    }

    #[test]
    fn rejects_redefinition() {
        expect_err(
            "func @f() entry { %x = const 0 : i64 %x = const 1 : i64 return }",
            "defined more than once",
        );
    }

    #[test]
    fn rejects_mixed_type_arith() {
        expect_err(
            "func @f() entry { %a = const 1 : i64 %b = const 1.0 : f64 %c = arith add %a, %b return }",
            "operand types differ",
        );
    }

    #[test]
    fn rejects_dynamic_alloc() {
        expect_err(
            "func @f() entry { %a = alloc : memref<?xf64> return }",
            "only allowed on parameters",
        );
    }

    #[test]
    fn rejects_rank_mismatch() {
        expect_err(
            "func @f(%a: memref<4x4xf64>) entry { %c0 = const 0 : i64 %v = load %a[%c0] return }",
            "rank 2",
        );
    }

    #[test]
    fn rejects_undeclared_dimension_symbol() {
        expect_err("func @f(%a: memref<Nxf64>) entry { return }", "not declared");
    }

    #[test]
    fn rejects_mid_body_return() {
        expect_err("func @f() entry { return return }", "final operation");
    }

    #[test]
    fn rejects_missing_entry() {
        expect_err("func @f() { return }", "exactly one entry");
    }

    #[test]
    fn rejects_return_inside_loop() {
        expect_err(
            "func @f() entry { %c0 = const 0 : i64 %c1 = const 1 : i64 \
             for %i = %c0 to %c1 step 1 { return } return }",
            "final operation",
        );
    }

    #[test]
    fn rejects_float_index() {
        expect_err(
            "func @f(%a: memref<4xf64>) entry { %x = const 0.5 : f64 %v = load %a[%x] return }",
            "must be i64",
        );
    }

    #[test]
    fn accepts_shape_compatible_call() {
        let src = r#"
func @fill(%a: memref<?xf64>, %n: i64) {
  %c0 = const 0 : i64
  %v = const 1.0 : f64
  for %i = %c0 to %n step 1 {
    store %v, %a[%i]
  }
  return
}

func @main(%a: memref<Nxf64>) syms(N) entry {
  %n = sym N
  call @fill(%a, %n)
  return
}
"#;
        parse_program(src).unwrap();
    }

    #[test]
    fn rejects_recursive_entry_call() {
        expect_err(
            "func @f() entry { call @f() return }",
            "entry function",
        );
    }
}
