//! Canonical textual form for frontend programs. `parse_program` composed
//! with `print_program` is a fixpoint on this form.

use super::*;
use std::fmt::Write;

/// Prints a whole program in canonical form.
pub fn print_program(p: &Program) -> String {
    let mut out = String::new();
    for (i, f) in p.functions.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        print_function(&mut out, f);
    }
    out
}

fn print_function(out: &mut String, f: &Function) {
    write!(out, "func @{}(", f.name).unwrap();
    for (i, (name, ty)) in f.params.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        write!(out, "%{name}: {ty}").unwrap();
    }
    out.push(')');
    if !f.symbols.is_empty() {
        write!(out, " syms({})", f.symbols.join(", ")).unwrap();
    }
    if let Some(ty) = &f.result {
        write!(out, " -> {ty}").unwrap();
    }
    if f.is_entry {
        out.push_str(" entry");
    }
    for a in &f.assume {
        write!(out, " assume(\"{a}\")").unwrap();
    }
    out.push_str(" {\n");
    print_block(out, &f.body, 1);
    out.push_str("}\n");
}

fn indent(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str("  ");
    }
}

fn print_block(out: &mut String, b: &Block, depth: usize) {
    for op in &b.0 {
        print_op(out, op, depth);
    }
}

fn print_op(out: &mut String, op: &Op, depth: usize) {
    indent(out, depth);
    if let Some(r) = &op.result {
        write!(out, "%{r} = ").unwrap();
    }
    match &op.kind {
        OpKind::ConstI(v) => write!(out, "const {v} : i64").unwrap(),
        OpKind::ConstF(v) => write!(out, "const {v:?} : f64").unwrap(),
        OpKind::SymRead(s) => write!(out, "sym {s}").unwrap(),
        OpKind::Arith(k, a, b) => {
            let name = match k {
                ArithKind::Add => "add",
                ArithKind::Sub => "sub",
                ArithKind::Mul => "mul",
                ArithKind::Div => "div",
                ArithKind::Rem => "rem",
            };
            write!(out, "arith {name} %{a}, %{b}").unwrap();
        }
        OpKind::Cmp(pred, a, b) => {
            let name = match pred {
                CmpPred::Lt => "lt",
                CmpPred::Le => "le",
                CmpPred::Gt => "gt",
                CmpPred::Ge => "ge",
                CmpPred::Eq => "eq",
                CmpPred::Ne => "ne",
            };
            write!(out, "cmp {name} %{a}, %{b}").unwrap();
        }
        OpKind::Math(k, a) => {
            let name = match k {
                MathKind::Exp => "exp",
                MathKind::Log => "log",
                MathKind::Sqrt => "sqrt",
                MathKind::Tanh => "tanh",
            };
            write!(out, "math {name} %{a}").unwrap();
        }
        OpKind::Alloc(m) => write!(out, "alloc : {m}").unwrap(),
        OpKind::Load { mem, indices } => {
            write!(out, "load %{mem}[{}]", join_values(indices)).unwrap();
        }
        OpKind::Store { value, mem, indices } => {
            write!(out, "store %{value}, %{mem}[{}]", join_values(indices)).unwrap();
        }
        OpKind::For { iv, lb, ub, step, body } => {
            writeln!(out, "for %{iv} = %{lb} to %{ub} step {step} {{").unwrap();
            print_block(out, body, depth + 1);
            indent(out, depth);
            out.push('}');
        }
        OpKind::While { cond, cond_val, body } => {
            out.push_str("while {\n");
            print_block(out, cond, depth + 1);
            indent(out, depth + 1);
            writeln!(out, "cond %{cond_val}").unwrap();
            indent(out, depth);
            out.push_str("} do {\n");
            print_block(out, body, depth + 1);
            indent(out, depth);
            out.push('}');
        }
        OpKind::If { cond, then_blk, else_blk } => {
            writeln!(out, "if %{cond} {{").unwrap();
            print_block(out, then_blk, depth + 1);
            indent(out, depth);
            out.push('}');
            if !else_blk.0.is_empty() {
                out.push_str(" else {\n");
                print_block(out, else_blk, depth + 1);
                indent(out, depth);
                out.push('}');
            }
        }
        OpKind::Call { callee, args } => {
            write!(out, "call @{callee}({})", join_values(args)).unwrap();
        }
        OpKind::Return(v) => {
            out.push_str("return");
            if let Some(v) = v {
                write!(out, " %{v}").unwrap();
            }
        }
    }
    out.push('\n');
}

fn join_values(vs: &[String]) -> String {
    vs.iter().map(|v| format!("%{v}")).collect::<Vec<_>>().join(", ")
}

#[cfg(test)]
mod tests {
    use super::super::parse_program;
    use super::*;

    #[test]
    fn print_parse_is_a_fixpoint() {
        let src = r#"
func @helper(%x: f64) -> f64 {
  %two = const 2.0 : f64
  %y = arith mul %x, %two
  return %y
}

func @main(%a: memref<8xf64>) syms(N) -> f64 entry assume("N >= 1") {
  %c0 = const 0 : i64
  %c1 = const 1 : i64
  %half = const 0.5 : f64
  %n = sym N
  for %i = %c0 to %n step 2 {
    %v = load %a[%i]
    %w = call @helper(%v)
    store %w, %a[%i]
  }
  %flag = cmp lt %c0, %c1
  if %flag {
    %z = const -3 : i64
  } else {
    %q = const 4 : i64
  }
  while {
    %c = cmp lt %c0, %c0
    cond %c
  } do {
    %u = math sqrt %half
  }
  %r = load %a[%c0]
  return %r
}
"#;
        let p1 = parse_program(src).unwrap();
        let t1 = print_program(&p1);
        let p2 = parse_program(&t1).unwrap();
        let t2 = print_program(&p2);
        assert_eq!(t1, t2);
    }

    #[test]
    fn float_consts_print_with_decimal_point() {
        let p = parse_program("func @f() -> f64 entry { %x = const 3 : f64  return %x }").unwrap();
        let t = print_program(&p);
        assert!(t.contains("const 3.0 : f64"), "{t}");
    }
}
