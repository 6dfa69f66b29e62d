//! Reference interpreter for frontend programs. Used to cross-check the
//! dataflow-graph interpreter and the generated C: all three share the same
//! semantics (two's-complement i64 wrap, flooring div/mod, IEEE f64).
//!
//! Programs must be call-free; run inlining first.

use super::*;
use crate::stats::{MovementStats, RunOutcome};
use crate::symbolic::{div_floor, mod_floor, Assumptions};
use crate::value::{Buffer, ElemType, Value};
use std::collections::BTreeMap;

const STEP_LIMIT: u64 = 10_000_000;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FrontInterpError {
    #[error("line {line}: index {index} out of bounds for %{container}")]
    OutOfBounds { container: String, index: String, line: u32 },
    #[error("line {line}: division by zero")]
    DivisionByZero { line: u32 },
    #[error("step limit of {STEP_LIMIT} operations exceeded")]
    StepLimit,
    #[error("no binding for symbol {0}")]
    MissingSymbol(String),
    #[error("no input for parameter %{0}")]
    MissingInput(String),
    #[error("input %{container} has shape {got:?}, expected {want:?}")]
    ShapeMismatch { container: String, got: Vec<i64>, want: Vec<i64> },
    #[error("input %{container} holds {got}, expected {want}")]
    ElemMismatch { container: String, got: ElemType, want: ElemType },
    #[error("assumption `{0}` does not hold for the given bindings")]
    AssumptionViolated(String),
    #[error("line {line}: {msg}")]
    Unsupported { line: u32, msg: String },
}

enum Flow {
    Continue,
    Return(Option<Value>),
}

struct Interp<'p> {
    bindings: &'p BTreeMap<String, i64>,
    values: BTreeMap<String, Value>,
    buffers: BTreeMap<String, Buffer>,
    stats: MovementStats,
    warnings: Vec<String>,
    warned: std::collections::BTreeSet<String>,
    steps: u64,
}

/// Runs the entry function on the given symbol bindings and input buffers.
/// Memref parameters are taken from `inputs` by name (shape-checked);
/// scalar parameters come from one-element buffers. Outputs are the final
/// contents of every memref parameter plus, when the function returns a
/// value, a one-element `__ret0`.
pub fn interpret_program(
    p: &Program,
    bindings: &BTreeMap<String, i64>,
    inputs: &BTreeMap<String, Buffer>,
) -> Result<RunOutcome, FrontInterpError> {
    let f = p.entry();
    for s in &f.symbols {
        if !bindings.contains_key(s) {
            return Err(FrontInterpError::MissingSymbol(s.clone()));
        }
    }
    if let Ok(asm) = Assumptions::new(f.assume.clone()) {
        if !asm.satisfied_by(bindings) {
            let text = f.assume.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(" and ");
            return Err(FrontInterpError::AssumptionViolated(text));
        }
    }

    let mut it = Interp {
        bindings,
        values: BTreeMap::new(),
        buffers: BTreeMap::new(),
        stats: MovementStats::default(),
        warnings: Vec::new(),
        warned: std::collections::BTreeSet::new(),
        steps: 0,
    };

    for (name, ty) in &f.params {
        let buf = inputs.get(name).ok_or_else(|| FrontInterpError::MissingInput(name.clone()))?;
        match ty {
            Type::Scalar(e) => {
                if buf.elem != *e {
                    return Err(FrontInterpError::ElemMismatch {
                        container: name.clone(),
                        got: buf.elem,
                        want: *e,
                    });
                }
                if buf.len() != 1 {
                    return Err(FrontInterpError::ShapeMismatch {
                        container: name.clone(),
                        got: buf.shape.clone(),
                        want: vec![1],
                    });
                }
                it.values.insert(name.clone(), buf.get_lin(0));
            }
            Type::MemRef(m) => {
                if buf.elem != m.elem {
                    return Err(FrontInterpError::ElemMismatch {
                        container: name.clone(),
                        got: buf.elem,
                        want: m.elem,
                    });
                }
                let want = it.shape_of(m, 0)?;
                let matches = buf.shape.len() == want.len()
                    && buf.shape.iter().zip(&want).all(|(g, w)| *w < 0 || g == w);
                if !matches {
                    return Err(FrontInterpError::ShapeMismatch {
                        container: name.clone(),
                        got: buf.shape.clone(),
                        want,
                    });
                }
                it.buffers.insert(name.clone(), buf.clone());
            }
        }
    }

    let ret = match it.run_block(&f.body)? {
        Flow::Return(v) => v,
        Flow::Continue => None,
    };

    let mut outputs = BTreeMap::new();
    for (name, ty) in &f.params {
        if matches!(ty, Type::MemRef(_)) {
            outputs.insert(name.clone(), it.buffers.remove(name).unwrap());
        }
    }
    if let Some(v) = ret {
        outputs.insert(
            "__ret0".to_string(),
            Buffer::from_values(v.elem_type(), vec![1], &[v]),
        );
    }
    Ok(RunOutcome {
        outputs,
        stats: it.stats,
        tasklet_counts: BTreeMap::new(),
        warnings: it.warnings,
    })
}

impl<'p> Interp<'p> {
    /// Resolves a memref shape; `?` becomes -1 (wildcard, parameters only).
    fn shape_of(&self, m: &MemRefType, line: u32) -> Result<Vec<i64>, FrontInterpError> {
        let mut out = Vec::new();
        for d in &m.dims {
            out.push(match d {
                Dim::Lit(v) => *v,
                Dim::Dyn => -1,
                Dim::Sym(s) => match self.bindings.get(s) {
                    Some(v) => *v,
                    None => return Err(FrontInterpError::MissingSymbol(s.clone())),
                },
            });
        }
        if out.iter().any(|v| *v == 0 || *v < -1) {
            return Err(FrontInterpError::Unsupported {
                line,
                msg: format!("shape {out:?} has a non-positive extent"),
            });
        }
        Ok(out)
    }

    fn val(&self, name: &str) -> Value {
        self.values[name]
    }

    fn int(&self, name: &str) -> i64 {
        self.val(name).as_i64().expect("verified as i64")
    }

    fn tick(&mut self) -> Result<(), FrontInterpError> {
        self.steps += 1;
        if self.steps > STEP_LIMIT {
            return Err(FrontInterpError::StepLimit);
        }
        Ok(())
    }

    fn run_block(&mut self, b: &Block) -> Result<Flow, FrontInterpError> {
        for op in &b.0 {
            self.tick()?;
            let line = op.line;
            match &op.kind {
                OpKind::ConstI(v) => {
                    self.define(op, Value::I64(*v));
                    self.stats.tasklet_execs += 1;
                }
                OpKind::ConstF(v) => {
                    self.define(op, Value::F64(*v));
                    self.stats.tasklet_execs += 1;
                }
                OpKind::SymRead(s) => {
                    let v = *self
                        .bindings
                        .get(s)
                        .ok_or_else(|| FrontInterpError::MissingSymbol(s.clone()))?;
                    self.define(op, Value::I64(v));
                    self.stats.tasklet_execs += 1;
                }
                OpKind::Arith(k, a, b) => {
                    let va = self.val(a);
                    let vb = self.val(b);
                    let r = match (va, vb) {
                        (Value::I64(x), Value::I64(y)) => Value::I64(match k {
                            ArithKind::Add => x.wrapping_add(y),
                            ArithKind::Sub => x.wrapping_sub(y),
                            ArithKind::Mul => x.wrapping_mul(y),
                            ArithKind::Div => div_floor(x, y)
                                .map_err(|_| FrontInterpError::DivisionByZero { line })?,
                            ArithKind::Rem => mod_floor(x, y)
                                .map_err(|_| FrontInterpError::DivisionByZero { line })?,
                        }),
                        (Value::F64(x), Value::F64(y)) => Value::F64(match k {
                            ArithKind::Add => x + y,
                            ArithKind::Sub => x - y,
                            ArithKind::Mul => x * y,
                            ArithKind::Div => x / y,
                            ArithKind::Rem => x % y,
                        }),
                        _ => unreachable!("verified operand types"),
                    };
                    self.define(op, r);
                    self.stats.tasklet_execs += 1;
                }
                OpKind::Cmp(pred, a, b) => {
                    let t = match (self.val(a), self.val(b)) {
                        (Value::I64(x), Value::I64(y)) => match pred {
                            CmpPred::Lt => x < y,
                            CmpPred::Le => x <= y,
                            CmpPred::Gt => x > y,
                            CmpPred::Ge => x >= y,
                            CmpPred::Eq => x == y,
                            CmpPred::Ne => x != y,
                        },
                        (Value::F64(x), Value::F64(y)) => match pred {
                            CmpPred::Lt => x < y,
                            CmpPred::Le => x <= y,
                            CmpPred::Gt => x > y,
                            CmpPred::Ge => x >= y,
                            CmpPred::Eq => x == y,
                            CmpPred::Ne => x != y,
                        },
                        _ => unreachable!("verified operand types"),
                    };
                    self.define(op, Value::I64(t as i64));
                    self.stats.tasklet_execs += 1;
                }
                OpKind::Math(k, a) => {
                    let x = self.val(a).as_f64().expect("verified as f64");
                    let r = match k {
                        MathKind::Exp => x.exp(),
                        MathKind::Log => x.ln(),
                        MathKind::Sqrt => x.sqrt(),
                        MathKind::Tanh => x.tanh(),
                    };
                    self.define(op, Value::F64(r));
                    self.stats.tasklet_execs += 1;
                }
                OpKind::Alloc(m) => {
                    let shape = self.shape_of(m, line)?;
                    let name = op.result.clone().unwrap();
                    self.buffers.insert(name, Buffer::new_poisoned(m.elem, shape));
                    self.stats.allocations += 1;
                }
                OpKind::Load { mem, indices } => {
                    let lin = self.locate(mem, indices, line)?;
                    let buf = &self.buffers[mem];
                    if !buf.written[lin] && self.warned.insert(mem.clone()) {
                        self.warnings.push(format!(
                            "read of uninitialized element in %{mem} (line {line})"
                        ));
                    }
                    let v = buf.get_lin(lin);
                    self.define(op, v);
                    self.stats.count_loads(1);
                }
                OpKind::Store { value, mem, indices } => {
                    let lin = self.locate(mem, indices, line)?;
                    let v = self.val(value);
                    self.buffers.get_mut(mem).unwrap().set_lin(lin, v);
                    self.stats.count_stores(1);
                }
                OpKind::For { iv, lb, ub, step, body } => {
                    let lo = self.int(lb);
                    let hi = self.int(ub);
                    let mut i = lo;
                    while i < hi {
                        self.tick()?;
                        self.values.insert(iv.clone(), Value::I64(i));
                        if let Flow::Return(r) = self.run_block(body)? {
                            return Ok(Flow::Return(r));
                        }
                        i = match i.checked_add(*step) {
                            Some(n) => n,
                            None => break, // next index would wrap past the bound
                        };
                    }
                }
                OpKind::While { cond, cond_val, body } => loop {
                    self.tick()?;
                    if let Flow::Return(r) = self.run_block(cond)? {
                        return Ok(Flow::Return(r));
                    }
                    if self.int(cond_val) == 0 {
                        break;
                    }
                    if let Flow::Return(r) = self.run_block(body)? {
                        return Ok(Flow::Return(r));
                    }
                },
                OpKind::If { cond, then_blk, else_blk } => {
                    let taken = if self.int(cond) != 0 { then_blk } else { else_blk };
                    if let Flow::Return(r) = self.run_block(taken)? {
                        return Ok(Flow::Return(r));
                    }
                }
                OpKind::Call { .. } => {
                    return Err(FrontInterpError::Unsupported {
                        line,
                        msg: "call in interpreted program; inline first".to_string(),
                    })
                }
                OpKind::Return(v) => {
                    return Ok(Flow::Return(v.as_ref().map(|name| self.val(name))));
                }
            }
        }
        Ok(Flow::Continue)
    }

    fn define(&mut self, op: &Op, v: Value) {
        self.values.insert(op.result.clone().unwrap(), v);
    }

    fn locate(
        &self,
        mem: &str,
        indices: &[String],
        line: u32,
    ) -> Result<usize, FrontInterpError> {
        let ix: Vec<i64> = indices.iter().map(|i| self.int(i)).collect();
        let buf = &self.buffers[mem];
        buf.linear_index(&ix).ok_or_else(|| FrontInterpError::OutOfBounds {
            container: mem.to_string(),
            index: format!("{ix:?} in shape {:?}", buf.shape),
            line,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::super::{inline, parse_program};
    use super::*;

    fn run(
        src: &str,
        bindings: &[(&str, i64)],
        inputs: &[(&str, Buffer)],
    ) -> Result<RunOutcome, FrontInterpError> {
        let p = inline(&parse_program(src).unwrap()).unwrap();
        let b = bindings.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        let i = inputs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect();
        interpret_program(&p, &b, &i)
    }

    #[test]
    fn fill_loop_writes_every_element_and_counts_stores() {
        let src = r#"
func @main(%a: memref<Nxf64>) syms(N) entry assume("N >= 1") {
  %c0 = const 0 : i64
  %n = sym N
  %v = const 5.0 : f64
  for %i = %c0 to %n step 1 {
    store %v, %a[%i]
  }
  return
}
"#;
        let a = Buffer::new_poisoned(ElemType::F64, vec![4]);
        let out = run(src, &[("N", 4)], &[("a", a)]).unwrap();
        let buf = &out.outputs["a"];
        for i in 0..4 {
            assert_eq!(buf.get_lin(i).as_f64(), Some(5.0));
        }
        assert_eq!(out.stats.stores, 4);
        assert_eq!(out.stats.loads, 0);
        assert_eq!(out.stats.bytes_moved, 32);
        assert!(out.warnings.is_empty());
    }

    #[test]
    fn returns_scalar_through_ret0() {
        let src = r#"
func @main() -> i64 entry {
  %a = const 40 : i64
  %b = const 2 : i64
  %c = arith add %a, %b
  return %c
}
"#;
        let out = run(src, &[], &[]).unwrap();
        assert_eq!(out.outputs["__ret0"].get_lin(0).as_i64(), Some(42));
    }

    #[test]
    fn integer_division_follows_flooring() {
        let src = r#"
func @main() -> i64 entry {
  %a = const -7 : i64
  %b = const 2 : i64
  %q = arith div %a, %b
  return %q
}
"#;
        let out = run(src, &[], &[]).unwrap();
        assert_eq!(out.outputs["__ret0"].get_lin(0).as_i64(), Some(-4));
    }

    #[test]
    fn division_by_zero_is_reported_with_line() {
        let src = r#"
func @main() -> i64 entry {
  %a = const 1 : i64
  %z = const 0 : i64
  %q = arith div %a, %z
  return %q
}
"#;
        match run(src, &[], &[]) {
            Err(FrontInterpError::DivisionByZero { line }) => assert_eq!(line, 5),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn out_of_bounds_store_is_an_error() {
        let src = r#"
func @main(%a: memref<4xf64>) entry {
  %c9 = const 9 : i64
  %v = const 1.0 : f64
  store %v, %a[%c9]
  return
}
"#;
        let a = Buffer::new_poisoned(ElemType::F64, vec![4]);
        assert!(matches!(
            run(src, &[], &[("a", a)]),
            Err(FrontInterpError::OutOfBounds { .. })
        ));
    }

    #[test]
    fn uninitialized_read_warns_and_yields_poison() {
        let src = r#"
func @main() -> f64 entry {
  %t = alloc : memref<4xf64>
  %c0 = const 0 : i64
  %v = load %t[%c0]
  return %v
}
"#;
        let out = run(src, &[], &[]).unwrap();
        assert_eq!(out.warnings.len(), 1);
        assert!(out.warnings[0].contains("uninitialized"));
        assert_eq!(
            out.outputs["__ret0"].get_lin(0).to_bits(),
            crate::value::POISON_BITS
        );
        assert_eq!(out.stats.allocations, 1);
    }

    #[test]
    fn while_loop_counts_down_through_memory() {
        let src = r#"
func @main(%a: memref<1xi64>) entry {
  %c0 = const 0 : i64
  %c1 = const 1 : i64
  %c10 = const 10 : i64
  store %c10, %a[%c0]
  while {
    %cur = load %a[%c0]
    %more = cmp gt %cur, %c0
    cond %more
  } do {
    %v = load %a[%c0]
    %dec = arith sub %v, %c1
    store %dec, %a[%c0]
  }
  return
}
"#;
        let a = Buffer::new_poisoned(ElemType::I64, vec![1]);
        let out = run(src, &[], &[("a", a)]).unwrap();
        assert_eq!(out.outputs["a"].get_lin(0).as_i64(), Some(0));
    }

    #[test]
    fn infinite_loop_hits_the_step_limit() {
        let src = r#"
func @main() entry {
  %c1 = const 1 : i64
  while {
    cond %c1
  } do {
  }
  return
}
"#;
        assert!(matches!(run(src, &[], &[]), Err(FrontInterpError::StepLimit)));
    }

    #[test]
    fn violated_assumption_is_rejected() {
        let src = r#"
func @main(%a: memref<Nxf64>) syms(N) entry assume("N >= 2") {
  return
}
"#;
        let a = Buffer::new_poisoned(ElemType::F64, vec![1]);
        assert!(matches!(
            run(src, &[("N", 1)], &[("a", a)]),
            Err(FrontInterpError::AssumptionViolated(_))
        ));
    }

    #[test]
    fn integer_overflow_wraps() {
        let src = r#"
func @main() -> i64 entry {
  %max = const 9223372036854775807 : i64
  %one = const 1 : i64
  %sum = arith add %max, %one
  return %sum
}
"#;
        let out = run(src, &[], &[]).unwrap();
        assert_eq!(out.outputs["__ret0"].get_lin(0).as_i64(), Some(i64::MIN));
    }

    #[test]
    fn scalar_params_arrive_as_single_values() {
        let src = r#"
func @main(%alpha: f64, %a: memref<2xf64>) entry {
  %c0 = const 0 : i64
  store %alpha, %a[%c0]
  return
}
"#;
        let a = Buffer::new_poisoned(ElemType::F64, vec![2]);
        let alpha = Buffer::from_values(ElemType::F64, vec![1], &[Value::F64(2.5)]);
        let out = run(src, &[], &[("a", a), ("alpha", alpha)]).unwrap();
        assert_eq!(out.outputs["a"].get_lin(0).as_f64(), Some(2.5));
        assert!(!out.outputs.contains_key("alpha"));
    }
}
