//! Frontend program transformations: call inlining, loop-invariant code
//! motion, common-subexpression elimination, and dead code elimination.

use super::*;
use crate::symbolic::{solve_bindings, substitute, SymBinOp, SymExpr};
use crate::value::ElemType;
use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum InlineError {
    #[error("recursive call chain through @{0} cannot be inlined")]
    RecursionUnsupported(String),
    #[error("{0}")]
    ShapeMismatch(String),
}

// ---------------------------------------------------------------------------
// Shared helpers

/// Flat name -> type map for one function. Names are unique per function,
/// so scoping can be ignored here.
fn value_types(f: &Function) -> BTreeMap<String, Type> {
    fn walk(b: &Block, out: &mut BTreeMap<String, Type>) {
        for op in &b.0 {
            if let Some(r) = &op.result {
                let ty = match &op.kind {
                    OpKind::ConstI(_) | OpKind::SymRead(_) | OpKind::Cmp(..) => {
                        Some(Type::Scalar(ElemType::I64))
                    }
                    OpKind::ConstF(_) | OpKind::Math(..) => Some(Type::Scalar(ElemType::F64)),
                    OpKind::Arith(_, a, _) => out.get(a).cloned(),
                    OpKind::Alloc(m) => Some(Type::MemRef(m.clone())),
                    OpKind::Load { mem, .. } => match out.get(mem) {
                        Some(Type::MemRef(m)) => Some(Type::Scalar(m.elem)),
                        _ => None,
                    },
                    _ => None,
                };
                if let Some(ty) = ty {
                    out.insert(r.clone(), ty);
                }
            }
            if let OpKind::For { iv, .. } = &op.kind {
                out.insert(iv.clone(), Type::Scalar(ElemType::I64));
            }
            for sb in op.kind.sub_blocks() {
                walk(sb, out);
            }
        }
    }
    let mut out: BTreeMap<String, Type> = f.params.iter().cloned().collect();
    walk(&f.body, &mut out);
    out
}

/// Rewrites every operand (use) through `map`; definitions are untouched.
fn rename_uses_in_block(b: &mut Block, map: &BTreeMap<String, String>) {
    let fix = |s: &mut String| {
        if let Some(n) = map.get(s) {
            *s = n.clone();
        }
    };
    for op in &mut b.0 {
        match &mut op.kind {
            OpKind::Arith(_, a, c) | OpKind::Cmp(_, a, c) => {
                fix(a);
                fix(c);
            }
            OpKind::Math(_, a) => fix(a),
            OpKind::Load { mem, indices } => {
                fix(mem);
                for i in indices {
                    fix(i);
                }
            }
            OpKind::Store { value, mem, indices } => {
                fix(value);
                fix(mem);
                for i in indices {
                    fix(i);
                }
            }
            OpKind::For { lb, ub, .. } => {
                fix(lb);
                fix(ub);
            }
            OpKind::While { cond_val, .. } => fix(cond_val),
            OpKind::If { cond, .. } => fix(cond),
            OpKind::Call { args, .. } => {
                for a in args {
                    fix(a);
                }
            }
            OpKind::Return(Some(v)) => fix(v),
            _ => {}
        }
        for sb in op.kind.sub_blocks_mut() {
            rename_uses_in_block(sb, map);
        }
    }
}

// ---------------------------------------------------------------------------
// Inlining

struct Inliner {
    /// Fully processed (call-free) functions by name.
    done: BTreeMap<String, Function>,
    counter: u64,
}

/// Replaces every call with the callee body, unifying size symbols through
/// the argument shapes, and returns a single-function program (the entry).
pub fn inline(p: &Program) -> Result<Program, InlineError> {
    let mut inliner = Inliner { done: BTreeMap::new(), counter: 0 };
    let mut visiting = BTreeSet::new();
    let entry = p.entry();
    inliner.process(p, entry, &mut visiting)?;
    let f = inliner.done.remove(&entry.name).unwrap();
    Ok(Program { functions: vec![f] })
}

impl Inliner {
    fn process(
        &mut self,
        p: &Program,
        f: &Function,
        visiting: &mut BTreeSet<String>,
    ) -> Result<(), InlineError> {
        if self.done.contains_key(&f.name) {
            return Ok(());
        }
        if !visiting.insert(f.name.clone()) {
            return Err(InlineError::RecursionUnsupported(f.name.clone()));
        }
        for callee in collect_callees(&f.body) {
            match p.function(&callee) {
                Some(cf) => self.process(p, cf, visiting)?,
                None => {
                    return Err(InlineError::ShapeMismatch(format!(
                        "call to unknown function @{callee}"
                    )))
                }
            }
        }
        visiting.remove(&f.name);

        let mut out = f.clone();
        let types = value_types(f);
        let mut aliases = BTreeMap::new();
        out.body = self.expand_block(&out.body, &types, f, &mut out.assume, &mut aliases)?;
        rename_uses_in_block(&mut out.body, &resolve_chains(aliases));
        self.done.insert(f.name.clone(), out);
        Ok(())
    }

    fn expand_block(
        &mut self,
        b: &Block,
        types: &BTreeMap<String, Type>,
        caller: &Function,
        assume: &mut Vec<SymExpr>,
        aliases: &mut BTreeMap<String, String>,
    ) -> Result<Block, InlineError> {
        let mut out = Vec::new();
        for op in &b.0 {
            match &op.kind {
                OpKind::Call { callee, args } => {
                    let cf = self.done.get(callee).cloned().expect("callee processed first");
                    let spliced =
                        self.splice(&cf, args, op.result.as_deref(), op.line, types, assume, aliases)?;
                    out.extend(spliced);
                }
                _ => {
                    let mut op = op.clone();
                    let mut blocks_done = Vec::new();
                    for sb in op.kind.sub_blocks() {
                        blocks_done.push(self.expand_block(sb, types, caller, assume, aliases)?);
                    }
                    for (sb, done) in op.kind.sub_blocks_mut().into_iter().zip(blocks_done) {
                        *sb = done;
                    }
                    out.push(op);
                }
            }
        }
        Ok(Block(out))
    }

    /// Expands one call site into the (already call-free) callee body.
    #[allow(clippy::too_many_arguments)]
    fn splice(
        &mut self,
        cf: &Function,
        args: &[String],
        result: Option<&str>,
        line: u32,
        caller_types: &BTreeMap<String, Type>,
        assume: &mut Vec<SymExpr>,
        aliases: &mut BTreeMap<String, String>,
    ) -> Result<Vec<Op>, InlineError> {
        let k = self.counter;
        self.counter += 1;
        let suffix = format!("__i{k}");

        // Unify callee size symbols against the caller-side argument shapes.
        let sym_rename: BTreeMap<String, String> =
            cf.symbols.iter().map(|s| (s.clone(), format!("{s}{suffix}"))).collect();
        let mut equations: Vec<(SymExpr, SymExpr)> = Vec::new();
        for (arg, (_, pty)) in args.iter().zip(&cf.params) {
            let (Type::MemRef(pm), Some(Type::MemRef(am))) = (pty, caller_types.get(arg)) else {
                continue;
            };
            for (pd, ad) in pm.dims.iter().zip(&am.dims) {
                let lhs = match pd {
                    Dim::Dyn => continue,
                    Dim::Lit(v) => SymExpr::Const(*v),
                    Dim::Sym(s) => SymExpr::sym(&sym_rename[s]),
                };
                let rhs = match ad {
                    Dim::Dyn => continue,
                    Dim::Lit(v) => SymExpr::Const(*v),
                    Dim::Sym(s) => SymExpr::sym(s),
                };
                equations.push((lhs, rhs));
            }
        }
        let solved = solve_bindings(&equations).map_err(|e| {
            InlineError::ShapeMismatch(format!(
                "line {line}: argument shapes for @{} do not match: {e}",
                cf.name
            ))
        })?;
        let mut bindings: BTreeMap<String, SymExpr> = BTreeMap::new();
        for s in &cf.symbols {
            match solved.get(&sym_rename[s]) {
                Some(e) => {
                    bindings.insert(s.clone(), e.clone());
                }
                None => {
                    return Err(InlineError::ShapeMismatch(format!(
                        "line {line}: cannot determine size symbol {s} of @{} from the argument shapes",
                        cf.name
                    )))
                }
            }
        }
        // A solved caller-side symbol is a constraint the shapes impose
        // (e.g. two arguments sharing one callee extent); keep it as an
        // assumption so later reasoning can rely on it.
        let renamed_callee: BTreeSet<String> = sym_rename.values().cloned().collect();
        for (name, expr) in &solved {
            if renamed_callee.contains(name) {
                continue;
            }
            let mut rhs = expr.clone();
            for _ in 0..solved.len() {
                rhs = substitute(&rhs, &solved);
            }
            if rhs.free_syms().iter().any(|s| renamed_callee.contains(s)) {
                continue; // not expressible in caller terms
            }
            let pred = SymExpr::cmp(crate::symbolic::CmpKind::Eq, SymExpr::sym(name), rhs);
            if !assume.contains(&pred) {
                assume.push(pred);
            }
        }

        for pred in &cf.assume {
            let p = substitute(pred, &bindings);
            if p != SymExpr::Bool(true) && !assume.contains(&p) {
                assume.push(p);
            }
        }

        // Rename callee values: parameters map straight to the argument
        // names, everything else gets the call-site suffix.
        let mut rename: BTreeMap<String, String> = BTreeMap::new();
        for ((pname, _), arg) in cf.params.iter().zip(args) {
            rename.insert(pname.clone(), arg.clone());
        }
        collect_defs(&cf.body, &mut |name| {
            rename.insert(name.to_string(), format!("{name}{suffix}"));
        });

        let mut ops = Vec::new();
        self.splice_block(&cf.body, &rename, &bindings, line, &mut ops, result, aliases, &cf.name)?;
        Ok(ops)
    }

    /// Clones callee ops with renamed values, rewriting symbol reads and
    /// alloc shapes through the call-site bindings. The trailing return
    /// becomes an alias from the call result to the returned value.
    #[allow(clippy::too_many_arguments)]
    fn splice_block(
        &mut self,
        b: &Block,
        rename: &BTreeMap<String, String>,
        bindings: &BTreeMap<String, SymExpr>,
        line: u32,
        out: &mut Vec<Op>,
        result: Option<&str>,
        aliases: &mut BTreeMap<String, String>,
        callee: &str,
    ) -> Result<(), InlineError> {
        let renamed = |s: &String| rename.get(s).cloned().unwrap_or_else(|| s.clone());
        for op in &b.0 {
            let res = op.result.as_ref().map(renamed);
            match &op.kind {
                OpKind::Return(v) => {
                    match (result, v) {
                        (Some(r), Some(v)) => {
                            aliases.insert(r.to_string(), renamed(v));
                        }
                        (None, _) | (Some(_), None) => {}
                    }
                    // The verifier guarantees this is the last op.
                }
                OpKind::SymRead(s) => {
                    let e = match bindings.get(s) {
                        Some(e) => e.clone(),
                        None => SymExpr::sym(renamed(s)),
                    };
                    let name = res.clone().unwrap();
                    emit_expr_ops(&e, &name, line, out).map_err(|msg| {
                        InlineError::ShapeMismatch(format!(
                            "line {line}: cannot inline @{callee}: {msg}"
                        ))
                    })?;
                }
                OpKind::Alloc(m) => {
                    let mut dims = Vec::new();
                    for d in &m.dims {
                        dims.push(match d {
                            Dim::Lit(v) => Dim::Lit(*v),
                            Dim::Dyn => Dim::Dyn,
                            Dim::Sym(s) => match bindings.get(s) {
                                Some(SymExpr::Const(c)) => Dim::Lit(*c),
                                Some(SymExpr::Sym(n)) => Dim::Sym(n.clone()),
                                Some(other) => {
                                    return Err(InlineError::ShapeMismatch(format!(
                                        "line {line}: allocation inside @{callee} needs computed extent `{other}`, which has no shape form"
                                    )))
                                }
                                None => Dim::Sym(s.clone()),
                            },
                        });
                    }
                    out.push(Op {
                        result: res,
                        kind: OpKind::Alloc(MemRefType { dims, elem: m.elem }),
                        line,
                    });
                }
                _ => {
                    let mut kind = op.kind.clone();
                    match &mut kind {
                        OpKind::Arith(_, a, c) | OpKind::Cmp(_, a, c) => {
                            *a = renamed(a);
                            *c = renamed(c);
                        }
                        OpKind::Math(_, a) => *a = renamed(a),
                        OpKind::Load { mem, indices } => {
                            *mem = renamed(mem);
                            for i in indices {
                                *i = renamed(i);
                            }
                        }
                        OpKind::Store { value, mem, indices } => {
                            *value = renamed(value);
                            *mem = renamed(mem);
                            for i in indices {
                                *i = renamed(i);
                            }
                        }
                        OpKind::For { iv, lb, ub, body, .. } => {
                            *iv = renamed(iv);
                            *lb = renamed(lb);
                            *ub = renamed(ub);
                            let mut inner = Vec::new();
                            self.splice_block(body, rename, bindings, line, &mut inner, None, aliases, callee)?;
                            *body = Block(inner);
                        }
                        OpKind::While { cond, cond_val, body } => {
                            *cond_val = renamed(cond_val);
                            let mut c = Vec::new();
                            self.splice_block(cond, rename, bindings, line, &mut c, None, aliases, callee)?;
                            *cond = Block(c);
                            let mut bo = Vec::new();
                            self.splice_block(body, rename, bindings, line, &mut bo, None, aliases, callee)?;
                            *body = Block(bo);
                        }
                        OpKind::If { cond, then_blk, else_blk } => {
                            *cond = renamed(cond);
                            let mut t = Vec::new();
                            self.splice_block(then_blk, rename, bindings, line, &mut t, None, aliases, callee)?;
                            *then_blk = Block(t);
                            let mut e = Vec::new();
                            self.splice_block(else_blk, rename, bindings, line, &mut e, None, aliases, callee)?;
                            *else_blk = Block(e);
                        }
                        OpKind::Call { .. } => unreachable!("callee bodies are call-free"),
                        _ => {}
                    }
                    out.push(Op { result: res, kind, line });
                }
            }
        }
        Ok(())
    }
}

/// Materializes a symbolic size expression as scalar ops, binding `name`.
/// Shape unification only produces +, -, * over symbols and constants.
fn emit_expr_ops(e: &SymExpr, name: &str, line: u32, out: &mut Vec<Op>) -> Result<(), String> {
    fn go(
        e: &SymExpr,
        line: u32,
        out: &mut Vec<Op>,
        tmp: &mut u32,
        base: &str,
    ) -> Result<String, String> {
        let fresh = |tmp: &mut u32| {
            let n = format!("{base}__e{tmp}");
            *tmp += 1;
            n
        };
        match e {
            SymExpr::Const(c) => {
                let n = fresh(tmp);
                out.push(Op { result: Some(n.clone()), kind: OpKind::ConstI(*c), line });
                Ok(n)
            }
            SymExpr::Sym(s) => {
                let n = fresh(tmp);
                out.push(Op { result: Some(n.clone()), kind: OpKind::SymRead(s.clone()), line });
                Ok(n)
            }
            SymExpr::Bin(op, a, b) => {
                let ka = go(a, line, out, tmp, base)?;
                let kb = go(b, line, out, tmp, base)?;
                let kind = match op {
                    SymBinOp::Add => ArithKind::Add,
                    SymBinOp::Sub => ArithKind::Sub,
                    SymBinOp::Mul => ArithKind::Mul,
                    other => return Err(format!("size expression uses `{other:?}`")),
                };
                let n = fresh(tmp);
                out.push(Op { result: Some(n.clone()), kind: OpKind::Arith(kind, ka, kb), line });
                Ok(n)
            }
            other => Err(format!("size expression `{other}` is not materializable")),
        }
    }
    match e {
        SymExpr::Const(c) => {
            out.push(Op { result: Some(name.to_string()), kind: OpKind::ConstI(*c), line });
            Ok(())
        }
        SymExpr::Sym(s) => {
            out.push(Op { result: Some(name.to_string()), kind: OpKind::SymRead(s.clone()), line });
            Ok(())
        }
        SymExpr::Bin(op, a, b) => {
            let mut tmp = 0;
            let ka = go(a, line, out, &mut tmp, name)?;
            let kb = go(b, line, out, &mut tmp, name)?;
            let kind = match op {
                SymBinOp::Add => ArithKind::Add,
                SymBinOp::Sub => ArithKind::Sub,
                SymBinOp::Mul => ArithKind::Mul,
                other => return Err(format!("size expression uses `{other:?}`")),
            };
            out.push(Op { result: Some(name.to_string()), kind: OpKind::Arith(kind, ka, kb), line });
            Ok(())
        }
        other => Err(format!("size expression `{other}` is not materializable")),
    }
}

fn collect_callees(b: &Block) -> Vec<String> {
    let mut out = Vec::new();
    fn walk(b: &Block, out: &mut Vec<String>) {
        for op in &b.0 {
            if let OpKind::Call { callee, .. } = &op.kind {
                if !out.contains(callee) {
                    out.push(callee.clone());
                }
            }
            for sb in op.kind.sub_blocks() {
                walk(sb, out);
            }
        }
    }
    walk(b, &mut out);
    out
}

fn collect_defs(b: &Block, f: &mut impl FnMut(&str)) {
    for op in &b.0 {
        if let Some(r) = &op.result {
            f(r);
        }
        if let OpKind::For { iv, .. } = &op.kind {
            f(iv);
        }
        for sb in op.kind.sub_blocks() {
            collect_defs(sb, f);
        }
    }
}

/// Resolves alias chains (`a -> b -> c` becomes `a -> c`).
fn resolve_chains(map: BTreeMap<String, String>) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    for (k, mut v) in map.clone() {
        let mut guard = 0;
        while let Some(next) = map.get(&v) {
            v = next.clone();
            guard += 1;
            if guard > map.len() {
                break;
            }
        }
        out.insert(k, v);
    }
    out
}

// ---------------------------------------------------------------------------
// Loop-invariant code motion

/// Hoists loop-invariant ops out of `for`/`while` bodies. Only ops that can
/// run speculatively move: constants, symbol reads, wrap-safe arithmetic,
/// comparisons, math calls, float division, and loads from containers the
/// loop never stores to. Integer div/rem stay put (a zero-trip loop must not
/// begin trapping). Returns the number of hoisted ops.
pub fn licm(f: &mut Function) -> u64 {
    let types = value_types(f);
    let body = std::mem::take(&mut f.body);
    let (body, n) = licm_block(body, &types);
    f.body = body;
    n
}

fn licm_block(b: Block, types: &BTreeMap<String, Type>) -> (Block, u64) {
    let mut out = Vec::new();
    let mut hoists = 0;
    for mut op in b.0 {
        let mut inner = 0;
        for sb in op.kind.sub_blocks_mut() {
            let (nb, n) = licm_block(std::mem::take(sb), types);
            *sb = nb;
            inner += n;
        }
        hoists += inner;
        match &op.kind {
            OpKind::For { .. } | OpKind::While { .. } => {
                let (hoisted, kept) = split_invariants(op, types);
                hoists += hoisted.len() as u64;
                out.extend(hoisted);
                out.push(kept);
            }
            _ => out.push(op),
        }
    }
    (Block(out), hoists)
}

/// Splits the hoistable prefix set out of one loop op.
fn split_invariants(mut op: Op, types: &BTreeMap<String, Type>) -> (Vec<Op>, Op) {
    let loop_blocks: Vec<&Block> = op.kind.sub_blocks();
    let mut defined = BTreeSet::new();
    for lb in &loop_blocks {
        collect_defs(lb, &mut |n| {
            defined.insert(n.to_string());
        });
    }
    if let OpKind::For { iv, .. } = &op.kind {
        defined.insert(iv.clone());
    }
    let mut stored: BTreeSet<String> = BTreeSet::new();
    for lb in &loop_blocks {
        collect_stored_memrefs(lb, &mut stored);
    }

    let mut hoisted: Vec<Op> = Vec::new();
    loop {
        let mut moved_this_round = Vec::new();
        // Only the loop body's top level is scanned; ops nested in inner
        // control flow run conditionally and stay.
        let bodies: Vec<&mut Block> = op.kind.sub_blocks_mut();
        for body in bodies {
            let mut kept = Vec::new();
            for bop in std::mem::take(&mut body.0) {
                if is_hoistable(&bop, &defined, &stored, types) {
                    moved_this_round.push(bop);
                } else {
                    kept.push(bop);
                }
            }
            body.0 = kept;
        }
        if moved_this_round.is_empty() {
            break;
        }
        for m in &moved_this_round {
            if let Some(r) = &m.result {
                defined.remove(r);
            }
        }
        hoisted.extend(moved_this_round);
    }
    (hoisted, op)
}

fn is_hoistable(
    op: &Op,
    defined: &BTreeSet<String>,
    stored: &BTreeSet<String>,
    types: &BTreeMap<String, Type>,
) -> bool {
    if op.result.is_none() {
        return false;
    }
    if op.kind.operands().iter().any(|o| defined.contains(*o)) {
        return false;
    }
    match &op.kind {
        OpKind::Load { mem, .. } => !stored.contains(mem),
        k => {
            let int_div = match k {
                OpKind::Arith(ArithKind::Div | ArithKind::Rem, a, _) => {
                    !matches!(types.get(a), Some(Type::Scalar(ElemType::F64)))
                }
                _ => false,
            };
            k.is_speculatable(int_div)
        }
    }
}

fn collect_stored_memrefs(b: &Block, out: &mut BTreeSet<String>) {
    for op in &b.0 {
        if let OpKind::Store { mem, .. } = &op.kind {
            out.insert(mem.clone());
        }
        for sb in op.kind.sub_blocks() {
            collect_stored_memrefs(sb, out);
        }
    }
}

// ---------------------------------------------------------------------------
// Common subexpression elimination

/// Key identifying a repeatable computation.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum CseKey {
    ConstI(i64),
    ConstF(u64),
    Sym(String),
    Arith(ArithKind, String, String),
    Cmp(CmpPred, String, String),
    Math(MathKind, String),
    Load(String, Vec<String>),
}

impl CseKey {
    fn of(kind: &OpKind) -> Option<CseKey> {
        match kind {
            OpKind::ConstI(v) => Some(CseKey::ConstI(*v)),
            OpKind::ConstF(v) => Some(CseKey::ConstF(v.to_bits())),
            OpKind::SymRead(s) => Some(CseKey::Sym(s.clone())),
            OpKind::Arith(k, a, b) => Some(CseKey::Arith(*k, a.clone(), b.clone())),
            OpKind::Cmp(k, a, b) => Some(CseKey::Cmp(*k, a.clone(), b.clone())),
            OpKind::Math(k, a) => Some(CseKey::Math(*k, a.clone())),
            OpKind::Load { mem, indices } => Some(CseKey::Load(mem.clone(), indices.clone())),
            _ => None,
        }
    }

    fn is_load(&self) -> bool {
        matches!(self, CseKey::Load(..))
    }
}

/// Removes redundant recomputation within each block. Loads participate
/// until a store to the same container (or any nested control flow, which
/// may store) invalidates them; loop bodies never inherit load keys from
/// outside because a store late in the body would invalidate an early-
/// iteration reuse. Returns the number of ops removed.
pub fn cse(f: &mut Function) -> u64 {
    let mut aliases: BTreeMap<String, String> = BTreeMap::new();
    let body = std::mem::take(&mut f.body);
    let (body, n) = cse_block(body, &BTreeMap::new(), &mut aliases);
    f.body = body;
    n
}

fn cse_block(
    b: Block,
    inherited: &BTreeMap<CseKey, String>,
    aliases: &mut BTreeMap<String, String>,
) -> (Block, u64) {
    let mut table = inherited.clone();
    let mut out = Vec::new();
    let mut removed = 0;
    for mut op in b.0 {
        rename_op_uses(&mut op, aliases);
        let key = CseKey::of(&op.kind);
        if let (Some(key), Some(r)) = (&key, &op.result) {
            if let Some(prev) = table.get(key) {
                aliases.insert(r.clone(), prev.clone());
                removed += 1;
                continue;
            }
            table.insert(key.clone(), r.clone());
        }
        match &op.kind {
            OpKind::Store { mem, .. } => {
                let mem = mem.clone();
                table.retain(|k, _| !matches!(k, CseKey::Load(m, _) if *m == mem));
            }
            OpKind::For { .. } | OpKind::While { .. } => {
                // Loop bodies start from the pure keys only.
                let mut seed = table.clone();
                seed.retain(|k, _| !k.is_load());
                let mut blocks_done = Vec::new();
                for sb in op.kind.sub_blocks() {
                    let (nb, n) = cse_block(sb.clone(), &seed, aliases);
                    blocks_done.push(nb);
                    removed += n;
                }
                for (sb, done) in op.kind.sub_blocks_mut().into_iter().zip(blocks_done) {
                    *sb = done;
                }
                table.retain(|k, _| !k.is_load());
            }
            OpKind::If { .. } => {
                let seed = table.clone();
                let mut blocks_done = Vec::new();
                for sb in op.kind.sub_blocks() {
                    let (nb, n) = cse_block(sb.clone(), &seed, aliases);
                    blocks_done.push(nb);
                    removed += n;
                }
                for (sb, done) in op.kind.sub_blocks_mut().into_iter().zip(blocks_done) {
                    *sb = done;
                }
                table.retain(|k, _| !k.is_load());
            }
            OpKind::Call { .. } => {
                table.retain(|k, _| !k.is_load());
            }
            _ => {}
        }
        out.push(op);
    }
    (Block(out), removed)
}

// Aliased names are always results of removed ops, and replacement targets
// are kept ops' results, so applying the map is idempotent and safe to run
// on an op's nested blocks before they are scanned themselves.
fn rename_op_uses(op: &mut Op, aliases: &BTreeMap<String, String>) {
    let mut single = Block(vec![std::mem::replace(
        op,
        Op { result: None, kind: OpKind::Return(None), line: 0 },
    )]);
    rename_uses_in_block(&mut single, aliases);
    *op = single.0.into_iter().next().unwrap();
}

// ---------------------------------------------------------------------------
// Dead code elimination

/// Deletes pure ops whose results are never used, to a fixpoint. Stores and
/// control flow always stay; unused loads and never-accessed allocations go.
/// Returns the number of ops removed.
pub fn dce_frontend(f: &mut Function) -> u64 {
    let mut removed = 0;
    loop {
        let mut used = BTreeSet::new();
        collect_uses(&f.body, &mut used);
        let body = std::mem::take(&mut f.body);
        let (body, n) = sweep(body, &used);
        f.body = body;
        if n == 0 {
            return removed;
        }
        removed += n;
    }
}

fn collect_uses(b: &Block, used: &mut BTreeSet<String>) {
    for op in &b.0 {
        for o in op.kind.operands() {
            used.insert(o.clone());
        }
        if let OpKind::While { cond_val, .. } = &op.kind {
            used.insert(cond_val.clone());
        }
        for sb in op.kind.sub_blocks() {
            collect_uses(sb, used);
        }
    }
}

fn sweep(b: Block, used: &BTreeSet<String>) -> (Block, u64) {
    let mut out = Vec::new();
    let mut removed = 0;
    for mut op in b.0 {
        if op.kind.is_pure_value() {
            if let Some(r) = &op.result {
                if !used.contains(r) {
                    removed += 1;
                    continue;
                }
            }
        }
        for sb in op.kind.sub_blocks_mut() {
            let (nb, n) = sweep(std::mem::take(sb), used);
            *sb = nb;
            removed += n;
        }
        out.push(op);
    }
    (Block(out), removed)
}

// ---------------------------------------------------------------------------
// Pipeline

/// Runs the frontend pipeline at the given optimization level: level 0
/// inlines only; levels 1 and above also run licm, cse, and dce.
pub fn run_frontend_pipeline(p: &Program, level: u8) -> Result<Program, InlineError> {
    let mut p = inline(p)?;
    if level >= 1 {
        let f = &mut p.functions[0];
        licm(f);
        cse(f);
        dce_frontend(f);
    }
    debug_assert!(verify_program(&p).is_ok(), "pipeline broke the program");
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::super::{parse_program, print_program};
    use super::*;

    fn count_ops(b: &Block, pred: &dyn Fn(&OpKind) -> bool) -> usize {
        let mut n = 0;
        for op in &b.0 {
            if pred(&op.kind) {
                n += 1;
            }
            for sb in op.kind.sub_blocks() {
                n += count_ops(sb, pred);
            }
        }
        n
    }

    #[test]
    fn inline_replaces_call_and_binds_result() {
        let src = r#"
func @twice(%x: f64) -> f64 {
  %two = const 2.0 : f64
  %y = arith mul %x, %two
  return %y
}

func @main() -> f64 entry {
  %a = const 3.0 : f64
  %b = call @twice(%a)
  return %b
}
"#;
        let p = inline(&parse_program(src).unwrap()).unwrap();
        assert_eq!(p.functions.len(), 1);
        let f = p.entry();
        assert_eq!(count_ops(&f.body, &|k| matches!(k, OpKind::Call { .. })), 0);
        verify_program(&p).unwrap();
        match &f.body.0.last().unwrap().kind {
            OpKind::Return(Some(v)) => assert_eq!(v, "y__i0"),
            other => panic!("unexpected tail {other:?}"),
        }
    }

    #[test]
    fn inline_unifies_size_symbols_through_shapes() {
        let src = r#"
func @fill(%a: memref<Kxf64>) syms(K) assume("K >= 2") {
  %c0 = const 0 : i64
  %k = sym K
  %v = const 1.0 : f64
  for %i = %c0 to %k step 1 {
    store %v, %a[%i]
  }
  return
}

func @main(%a: memref<Nxf64>) syms(N) entry {
  call @fill(%a)
  return
}
"#;
        let p = inline(&parse_program(src).unwrap()).unwrap();
        let f = p.entry();
        // K resolves to N: the sym read now mentions N, not K.
        assert_eq!(count_ops(&f.body, &|k| matches!(k, OpKind::SymRead(s) if s == "N")), 1);
        assert_eq!(count_ops(&f.body, &|k| matches!(k, OpKind::SymRead(s) if s == "K")), 0);
        // The callee assumption hops over, rewritten to the caller symbol.
        assert_eq!(f.assume.len(), 1);
        let syms = f.assume[0].free_syms();
        assert!(syms.contains("N") && !syms.contains("K"), "{}", f.assume[0]);
        verify_program(&p).unwrap();
    }

    #[test]
    fn inline_rejects_recursion() {
        let src = r#"
func @a() { call @b() return }
func @b() { call @a() return }
func @main() entry { call @a() return }
"#;
        let e = inline(&parse_program(src).unwrap()).unwrap_err();
        assert!(matches!(e, InlineError::RecursionUnsupported(_)));
    }

    #[test]
    fn inline_rejects_shape_mismatch() {
        let src = r#"
func @f(%a: memref<4xf64>) { return }
func @main(%a: memref<8xf64>) entry { call @f(%a) return }
"#;
        let e = inline(&parse_program(src).unwrap()).unwrap_err();
        assert!(matches!(e, InlineError::ShapeMismatch(_)), "{e}");
    }

    #[test]
    fn inline_rejects_undeterminable_symbol() {
        let src = r#"
func @f(%a: memref<?xf64>) syms(K) { %k = sym K return }
func @main(%a: memref<8xf64>) entry { call @f(%a) return }
"#;
        let e = inline(&parse_program(src).unwrap()).unwrap_err();
        assert!(e.to_string().contains("cannot determine size symbol K"), "{e}");
    }

    #[test]
    fn inline_materializes_constant_symbol_bindings() {
        // K unifies with the literal extent 8, so the callee's `sym K`
        // becomes a constant in the caller.
        let src = r#"
func @f(%a: memref<Kxf64>, %b: memref<Lxf64>) syms(K, L) -> i64 {
  %k = sym K
  return %k
}

func @main(%a: memref<8xf64>, %b: memref<Nxf64>) syms(N) -> i64 entry {
  %r = call @f(%a, %b)
  return %r
}
"#;
        let p = inline(&parse_program(src).unwrap()).unwrap();
        verify_program(&p).unwrap();
        let f = p.entry();
        assert_eq!(count_ops(&f.body, &|k| matches!(k, OpKind::ConstI(8))), 1);
    }

    #[test]
    fn licm_hoists_invariant_arith_and_load() {
        let src = r#"
func @main(%a: memref<Nxf64>, %b: memref<Nxf64>) syms(N) entry {
  %c0 = const 0 : i64
  %n = sym N
  for %i = %c0 to %n step 1 {
    %base = load %a[%c0]
    %two = const 2.0 : f64
    %s = arith mul %base, %two
    %v = load %a[%i]
    %w = arith add %v, %s
    store %w, %b[%i]
  }
  return
}
"#;
        let mut p = inline(&parse_program(src).unwrap()).unwrap();
        let hoisted = licm(&mut p.functions[0]);
        assert_eq!(hoisted, 3); // %base, %two, %s
        verify_program(&p).unwrap();
        let f = p.entry();
        let for_op = f
            .body
            .0
            .iter()
            .find(|o| matches!(o.kind, OpKind::For { .. }))
            .unwrap();
        assert_eq!(count_ops(for_op.kind.sub_blocks()[0], &|_| true), 3);
    }

    #[test]
    fn licm_keeps_loads_from_stored_containers() {
        let src = r#"
func @main(%a: memref<Nxf64>) syms(N) entry {
  %c0 = const 0 : i64
  %n = sym N
  for %i = %c0 to %n step 1 {
    %acc = load %a[%c0]
    %v = load %a[%i]
    %w = arith add %acc, %v
    store %w, %a[%c0]
  }
  return
}
"#;
        let mut p = inline(&parse_program(src).unwrap()).unwrap();
        assert_eq!(licm(&mut p.functions[0]), 0);
    }

    #[test]
    fn licm_never_hoists_integer_division() {
        let src = r#"
func @main(%a: memref<Nxi64>, %d: i64) syms(N) entry {
  %c0 = const 0 : i64
  %c9 = const 9 : i64
  %n = sym N
  for %i = %c0 to %n step 1 {
    %q = arith div %c9, %d
    store %q, %a[%i]
  }
  return
}
"#;
        let mut p = inline(&parse_program(src).unwrap()).unwrap();
        assert_eq!(licm(&mut p.functions[0]), 0);
    }

    #[test]
    fn cse_merges_duplicate_loads_until_store() {
        let src = r#"
func @main(%a: memref<Nxf64>) syms(N) entry {
  %c0 = const 0 : i64
  %x = load %a[%c0]
  %y = load %a[%c0]
  %s = arith add %x, %y
  store %s, %a[%c0]
  %z = load %a[%c0]
  store %z, %a[%c0]
  return
}
"#;
        let mut p = inline(&parse_program(src).unwrap()).unwrap();
        let removed = cse(&mut p.functions[0]);
        assert_eq!(removed, 1); // only %y folds into %x
        verify_program(&p).unwrap();
    }

    #[test]
    fn cse_does_not_reuse_loads_across_loop_iterations() {
        let src = r#"
func @main(%a: memref<Nxf64>) syms(N) entry {
  %c0 = const 0 : i64
  %n = sym N
  %x = load %a[%c0]
  for %i = %c0 to %n step 1 {
    %y = load %a[%c0]
    %s = arith add %y, %y
    store %s, %a[%c0]
  }
  return
}
"#;
        let mut p = inline(&parse_program(src).unwrap()).unwrap();
        let before = print_program(&p);
        let removed = cse(&mut p.functions[0]);
        assert_eq!(removed, 0, "{before}");
    }

    #[test]
    fn dce_drops_unused_chains_and_allocs() {
        let src = r#"
func @main(%a: memref<4xf64>) entry {
  %c0 = const 0 : i64
  %dead1 = const 7 : i64
  %dead2 = arith add %dead1, %dead1
  %t = alloc : memref<4xf64>
  %v = load %a[%c0]
  store %v, %a[%c0]
  return
}
"#;
        let mut p = inline(&parse_program(src).unwrap()).unwrap();
        let removed = dce_frontend(&mut p.functions[0]);
        assert_eq!(removed, 3); // %dead2, then %dead1, and %t
        verify_program(&p).unwrap();
        assert_eq!(count_ops(&p.entry().body, &|_| true), 4);
    }

    #[test]
    fn pipeline_level0_keeps_redundant_loop_work() {
        let src = r#"
func @main(%a: memref<Nxf64>, %b: memref<Nxf64>) syms(N) entry {
  %c0 = const 0 : i64
  %n = sym N
  for %i = %c0 to %n step 1 {
    %base = load %a[%c0]
    %v = load %a[%i]
    %w = arith add %v, %base
    store %w, %b[%i]
  }
  return
}
"#;
        let p = parse_program(src).unwrap();
        let p0 = run_frontend_pipeline(&p, 0).unwrap();
        let p1 = run_frontend_pipeline(&p, 1).unwrap();
        let loads_in_loop = |p: &Program| {
            let f = p.entry();
            let for_op = f.body.0.iter().find(|o| matches!(o.kind, OpKind::For { .. })).unwrap();
            count_ops(for_op.kind.sub_blocks()[0], &|k| matches!(k, OpKind::Load { .. }))
        };
        assert_eq!(loads_in_loop(&p0), 2);
        assert_eq!(loads_in_loop(&p1), 1);
    }
}
