//! Reference interpreter for dataflow graphs. States execute their dataflow
//! DAG in topological order; interstate edges pick the successor (first
//! satisfied condition in declaration order, `else` as fallback) and apply
//! symbol assignments against pre-edge values.
//!
//! Movement accounting: reads and writes of array elements count; scalar
//! containers are register-like and free; write-conflict-resolved writes
//! count as updates; aggregate edges attached to map nodes are declarative
//! summaries and move nothing themselves.

use super::{DataDescriptor, Endpoint, Lifetime, MapScope, Memlet, Node, Sdfg, Tasklet, Wcr};
use crate::rng::SplitMix64;
use crate::sdfg::CodeEvalError;
use crate::stats::{MovementStats, RunOutcome};
use crate::symbolic::{Assumptions, SymExpr, SymRange};
use crate::value::{Buffer, ElemType, Value};
use std::collections::{BTreeMap, BTreeSet};

const STEP_LIMIT: u64 = 10_000_000;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SdfgInterpError {
    #[error("no binding for symbol {0}")]
    MissingSymbol(String),
    #[error("input {container} has shape {got:?}, expected {want:?}")]
    ShapeMismatch { container: String, got: Vec<i64>, want: Vec<i64> },
    #[error("input {container} holds {got}, expected {want}")]
    ElemMismatch { container: String, got: ElemType, want: ElemType },
    #[error("assumption `{0}` does not hold for the given bindings")]
    AssumptionViolated(String),
    #[error("start state `{0}` does not exist")]
    UnknownState(String),
    #[error("state `{state}`: no outgoing transition is enabled")]
    NoEnabledEdge { state: String },
    #[error("step limit of {0} exceeded")]
    StepLimit(u64),
    #[error("state `{state}`: index {index} out of bounds for {container}")]
    OutOfBounds { state: String, container: String, index: String },
    #[error("state `{state}`: tasklet {tasklet}: {msg}")]
    Code { state: String, tasklet: String, msg: String },
    #[error("state `{state}`: {msg}")]
    Expr { state: String, msg: String },
    #[error("state `{state}`: copy moves {src} elements into {dst}")]
    CopyMismatch { state: String, src: usize, dst: usize },
}

/// Runs the graph on the given symbol bindings and input buffers.
///
/// Symbols appearing as bare dimensions of provided non-transient containers
/// are bound from the buffer shapes when not bound explicitly. Non-transient
/// containers without an input start poisoned (they are outputs). Outputs
/// are the final contents of the declared results.
pub fn interpret_sdfg(
    sdfg: &Sdfg,
    bindings: &BTreeMap<String, i64>,
    inputs: &BTreeMap<String, Buffer>,
) -> Result<RunOutcome, SdfgInterpError> {
    Run::new(sdfg, bindings, inputs, None)?.go()
}

#[derive(Debug, Clone, PartialEq)]
pub enum DeterminismOutcome {
    Deterministic,
    /// Some container diverged when map iterations were reordered.
    Raced { container: String, deviation: f64, trial: usize },
}

pub const DETERMINISM_TOLERANCE: f64 = 1e-9;

/// Replays the graph with randomly permuted map iteration orders and
/// compares every output against the ascending-order run.
pub fn check_map_determinism(
    sdfg: &Sdfg,
    bindings: &BTreeMap<String, i64>,
    inputs: &BTreeMap<String, Buffer>,
    trials: usize,
    seed: u64,
) -> Result<DeterminismOutcome, SdfgInterpError> {
    let base = interpret_sdfg(sdfg, bindings, inputs)?;
    for trial in 0..trials {
        let rng = SplitMix64::derive(seed, &format!("determinism-{trial}"));
        let out = Run::new(sdfg, bindings, inputs, Some(rng))?.go()?;
        for (name, want) in &base.outputs {
            let got = &out.outputs[name];
            let dev = crate::value::max_deviation(want, got).unwrap_or(f64::INFINITY);
            if dev > DETERMINISM_TOLERANCE {
                return Ok(DeterminismOutcome::Raced {
                    container: name.clone(),
                    deviation: dev,
                    trial,
                });
            }
        }
    }
    Ok(DeterminismOutcome::Deterministic)
}

struct Run<'a> {
    sdfg: &'a Sdfg,
    syms: BTreeMap<String, i64>,
    bufs: BTreeMap<String, Buffer>,
    /// Containers touched by each state, for per-state lifetimes.
    state_uses: BTreeMap<String, BTreeSet<String>>,
    stats: MovementStats,
    tasklet_counts: BTreeMap<String, u64>,
    warnings: Vec<String>,
    warned: BTreeSet<String>,
    steps: u64,
    limit: u64,
    shuffle: Option<SplitMix64>,
}

impl<'a> Run<'a> {
    fn new(
        sdfg: &'a Sdfg,
        bindings: &BTreeMap<String, i64>,
        inputs: &BTreeMap<String, Buffer>,
        shuffle: Option<SplitMix64>,
    ) -> Result<Run<'a>, SdfgInterpError> {
        let mut syms = bindings.clone();

        // Bind bare symbolic dimensions from provided buffer shapes.
        for (name, d) in &sdfg.descriptors {
            let Some(buf) = inputs.get(name) else { continue };
            if d.transient || d.is_scalar() {
                continue;
            }
            for (i, dim) in d.shape.iter().enumerate() {
                if let (SymExpr::Sym(s), Some(got)) = (dim, buf.shape.get(i)) {
                    syms.entry(s.clone()).or_insert(*got);
                }
            }
        }
        for s in &sdfg.symbols {
            if !syms.contains_key(s) {
                return Err(SdfgInterpError::MissingSymbol(s.clone()));
            }
        }
        if let Ok(asm) = Assumptions::new(sdfg.assumptions.clone()) {
            if !asm.satisfied_by(&syms) {
                let text = sdfg
                    .assumptions
                    .iter()
                    .map(|a| a.to_string())
                    .collect::<Vec<_>>()
                    .join(" and ");
                return Err(SdfgInterpError::AssumptionViolated(text));
            }
        }

        let mut run = Run {
            sdfg,
            syms,
            bufs: BTreeMap::new(),
            state_uses: BTreeMap::new(),
            stats: MovementStats::default(),
            tasklet_counts: BTreeMap::new(),
            warnings: Vec::new(),
            warned: BTreeSet::new(),
            steps: 0,
            limit: STEP_LIMIT,
            shuffle,
        };

        for (name, d) in &sdfg.descriptors {
            if d.transient {
                if d.lifetime == Lifetime::Global {
                    run.alloc(name, d)?;
                }
                continue;
            }
            let shape = run.shape_of(d)?;
            match inputs.get(name) {
                Some(buf) => {
                    if buf.elem != d.elem {
                        return Err(SdfgInterpError::ElemMismatch {
                            container: name.clone(),
                            got: buf.elem,
                            want: d.elem,
                        });
                    }
                    if d.is_scalar() {
                        if buf.len() != 1 {
                            return Err(SdfgInterpError::ShapeMismatch {
                                container: name.clone(),
                                got: buf.shape.clone(),
                                want: vec![1],
                            });
                        }
                        let mut b = buf.clone();
                        b.shape = vec![1];
                        run.bufs.insert(name.clone(), b);
                    } else {
                        if buf.shape != shape {
                            return Err(SdfgInterpError::ShapeMismatch {
                                container: name.clone(),
                                got: buf.shape.clone(),
                                want: shape,
                            });
                        }
                        run.bufs.insert(name.clone(), buf.clone());
                    }
                }
                None => {
                    // Output-only exterior container; starts poisoned.
                    run.bufs.insert(name.clone(), Buffer::new_poisoned(d.elem, shape));
                }
            }
        }

        for st in &sdfg.states {
            let mut used = BTreeSet::new();
            collect_state_uses(&st.nodes, &st.edges, &mut used);
            used.retain(|c| sdfg.descriptors.contains_key(c));
            run.state_uses.insert(st.name.clone(), used);
        }
        Ok(run)
    }

    fn shape_of(&self, d: &DataDescriptor) -> Result<Vec<i64>, SdfgInterpError> {
        if d.is_scalar() {
            return Ok(vec![1]);
        }
        let mut out = Vec::new();
        for e in &d.shape {
            let v = e
                .eval(&self.syms)
                .ok()
                .and_then(|v| v.as_int().ok())
                .ok_or_else(|| SdfgInterpError::MissingSymbol(e.to_string()))?;
            out.push(v);
        }
        Ok(out)
    }

    fn alloc(&mut self, name: &str, d: &DataDescriptor) -> Result<(), SdfgInterpError> {
        let shape = self.shape_of(d)?;
        self.bufs.insert(name.to_string(), Buffer::new_poisoned(d.elem, shape));
        if !d.is_scalar() {
            self.stats.allocations += 1;
        }
        Ok(())
    }

    fn tick(&mut self) -> Result<(), SdfgInterpError> {
        self.steps += 1;
        if self.steps > self.limit {
            return Err(SdfgInterpError::StepLimit(self.limit));
        }
        Ok(())
    }

    fn go(mut self) -> Result<RunOutcome, SdfgInterpError> {
        let mut cur = self.sdfg.start.clone();
        loop {
            self.tick()?;
            let st = self
                .sdfg
                .state(&cur)
                .ok_or_else(|| SdfgInterpError::UnknownState(cur.clone()))?;

            // Per-state transients get a fresh poisoned buffer on entry.
            let used = self.state_uses[&cur].clone();
            for c in used {
                let d = &self.sdfg.descriptors[&c];
                if d.transient && d.lifetime == Lifetime::State {
                    self.alloc(&c, d)?;
                }
            }

            self.run_level(&st.name, &st.nodes, &st.edges)?;

            let outs = self.sdfg.out_edges(&cur);
            if outs.is_empty() {
                break;
            }
            let mut chosen = None;
            for e in &outs {
                match &e.condition {
                    Some(c) => {
                        if self.truthy(c, &cur)? {
                            chosen = Some(*e);
                            break;
                        }
                    }
                    None if !e.is_else => {
                        chosen = Some(*e);
                        break;
                    }
                    None => {}
                }
            }
            let chosen = match chosen.or_else(|| outs.iter().copied().find(|e| e.is_else)) {
                Some(e) => e,
                None => return Err(SdfgInterpError::NoEnabledEdge { state: cur }),
            };
            // All right-hand sides see the pre-edge environment.
            let mut staged = Vec::with_capacity(chosen.assignments.len());
            for (name, rhs) in &chosen.assignments {
                staged.push((name.clone(), self.eval_int(rhs, &cur)?));
            }
            for (name, v) in staged {
                self.syms.insert(name, v);
            }
            cur = chosen.dst.clone();
        }

        let mut outputs = BTreeMap::new();
        for name in &self.sdfg.results {
            outputs.insert(name.clone(), self.bufs[name].clone());
        }
        Ok(RunOutcome {
            outputs,
            stats: self.stats,
            tasklet_counts: self.tasklet_counts,
            warnings: self.warnings,
        })
    }

    /// Symbol resolution order: interstate symbols and map parameters, then
    /// written integer scalar containers.
    fn resolve_sym(&self, name: &str) -> Option<i64> {
        if let Some(v) = self.syms.get(name) {
            return Some(*v);
        }
        let d = self.sdfg.descriptors.get(name)?;
        if !d.is_scalar() || d.elem != ElemType::I64 {
            return None;
        }
        let b = self.bufs.get(name)?;
        if !b.written[0] {
            return None;
        }
        b.get_lin(0).as_i64()
    }

    fn eval_int(&self, e: &SymExpr, state: &str) -> Result<i64, SdfgInterpError> {
        e.eval_with(&|n| self.resolve_sym(n))
            .and_then(|v| v.as_int())
            .map_err(|er| SdfgInterpError::Expr { state: state.to_string(), msg: er.to_string() })
    }

    fn truthy(&self, e: &SymExpr, state: &str) -> Result<bool, SdfgInterpError> {
        let v = e
            .eval_with(&|n| self.resolve_sym(n))
            .map_err(|er| SdfgInterpError::Expr { state: state.to_string(), msg: er.to_string() })?;
        Ok(match v {
            crate::symbolic::SymValue::Bool(b) => b,
            crate::symbolic::SymValue::Int(i) => i != 0,
        })
    }

    /// All index tuples selected by a subset, row-major.
    fn expand_subset(
        &self,
        sub: &crate::symbolic::Subset,
        state: &str,
    ) -> Result<Vec<Vec<i64>>, SdfgInterpError> {
        let mut dims: Vec<Vec<i64>> = Vec::with_capacity(sub.0.len());
        for r in &sub.0 {
            dims.push(self.expand_range(r, state)?);
        }
        let mut out = vec![vec![]];
        for d in &dims {
            let mut next = Vec::with_capacity(out.len() * d.len());
            for prefix in &out {
                for v in d {
                    let mut t = prefix.clone();
                    t.push(*v);
                    next.push(t);
                }
            }
            out = next;
        }
        Ok(out)
    }

    fn expand_range(&self, r: &SymRange, state: &str) -> Result<Vec<i64>, SdfgInterpError> {
        let begin = self.eval_int(&r.begin, state)?;
        let end = self.eval_int(&r.end, state)?;
        let stride = self.eval_int(&r.stride, state)?;
        if stride <= 0 {
            return Err(SdfgInterpError::Expr {
                state: state.to_string(),
                msg: format!("range stride {stride} must be positive"),
            });
        }
        let mut out = Vec::new();
        let mut v = begin;
        while v <= end {
            out.push(v);
            v = match v.checked_add(stride) {
                Some(n) => n,
                None => break,
            };
        }
        Ok(out)
    }

    fn read_elem(
        &mut self,
        container: &str,
        idx: &[i64],
        state: &str,
    ) -> Result<Value, SdfgInterpError> {
        let lin = self.locate(container, idx, state)?;
        let buf = &self.bufs[container];
        if !buf.written[lin] && self.warned.insert(container.to_string()) {
            self.warnings.push(format!(
                "read of uninitialized element in {container} (state {state})"
            ));
        }
        let v = buf.get_lin(lin);
        if !self.sdfg.descriptors[container].is_scalar() {
            self.stats.count_loads(1);
        }
        Ok(v)
    }

    fn write_elem(
        &mut self,
        container: &str,
        idx: &[i64],
        v: Value,
        wcr: Option<Wcr>,
        state: &str,
    ) -> Result<(), SdfgInterpError> {
        let lin = self.locate(container, idx, state)?;
        let elem = self.bufs[container].elem;
        let v = coerce(v, elem);
        let is_array = !self.sdfg.descriptors[container].is_scalar();
        match wcr {
            None => {
                self.bufs.get_mut(container).unwrap().set_lin(lin, v);
                if is_array {
                    self.stats.count_stores(1);
                }
            }
            Some(w) => {
                let buf = &self.bufs[container];
                if !buf.written[lin] && self.warned.insert(container.to_string()) {
                    self.warnings.push(format!(
                        "write-conflict resolution over uninitialized element in {container} (state {state})"
                    ));
                }
                let old = buf.get_lin(lin);
                let merged = combine(w, old, v);
                self.bufs.get_mut(container).unwrap().set_lin(lin, merged);
                if is_array {
                    self.stats.count_updates(1);
                }
            }
        }
        Ok(())
    }

    fn locate(&self, container: &str, idx: &[i64], state: &str) -> Result<usize, SdfgInterpError> {
        if idx.is_empty() {
            return Ok(0);
        }
        self.bufs[container].linear_index(idx).ok_or_else(|| SdfgInterpError::OutOfBounds {
            state: state.to_string(),
            container: container.to_string(),
            index: format!("{idx:?} in shape {:?}", self.bufs[container].shape),
        })
    }

    fn run_level(
        &mut self,
        state: &str,
        nodes: &[Node],
        edges: &[Memlet],
    ) -> Result<(), SdfgInterpError> {
        let order = super::topo_order_of(nodes.len(), edges).map_err(|n| SdfgInterpError::Expr {
            state: state.to_string(),
            msg: format!("dataflow cycle through node {n}"),
        })?;
        let mut conn_vals: BTreeMap<(usize, String), Value> = BTreeMap::new();

        // Container-to-container edges with no node anchor run first.
        for e in edges {
            if matches!(e.src, Endpoint::Boundary(_)) && matches!(e.dst, Endpoint::Boundary(_)) {
                self.copy_edge(state, nodes, e, &conn_vals)?;
            }
        }

        for ni in order {
            match &nodes[ni] {
                Node::Access(_) => {
                    for e in edges {
                        if e.dst == Endpoint::Node(ni) && !is_map_endpoint(nodes, &e.src) {
                            self.copy_edge(state, nodes, e, &conn_vals)?;
                        }
                    }
                    for e in edges {
                        if e.src == Endpoint::Node(ni) && matches!(e.dst, Endpoint::Boundary(_)) {
                            self.copy_edge(state, nodes, e, &conn_vals)?;
                        }
                    }
                }
                Node::Tasklet(t) => {
                    self.run_tasklet(state, nodes, edges, ni, t, &mut conn_vals)?;
                }
                Node::Map(m) => {
                    self.run_map(state, m)?;
                }
            }
        }
        Ok(())
    }

    fn run_tasklet(
        &mut self,
        state: &str,
        nodes: &[Node],
        edges: &[Memlet],
        ni: usize,
        t: &Tasklet,
        conn_vals: &mut BTreeMap<(usize, String), Value>,
    ) -> Result<(), SdfgInterpError> {
        self.tick()?;
        let mut inputs: BTreeMap<String, Value> = BTreeMap::new();
        for e in edges {
            let Endpoint::Conn(i, conn) = &e.dst else { continue };
            if *i != ni {
                continue;
            }
            let container = match (&e.src, nodes.get(endpoint_node(&e.src))) {
                (Endpoint::Boundary(c), _) => c.clone(),
                (Endpoint::Node(_), Some(Node::Access(c))) => c.clone(),
                _ => continue,
            };
            let tuples = self.expand_subset(e.src_subset.as_ref().expect("data side"), state)?;
            let idx = first_tuple(&tuples, state)?.to_vec();
            let v = self.read_elem(&container, &idx, state)?;
            inputs.insert(conn.clone(), v);
        }

        let mut env: BTreeMap<String, Value> = BTreeMap::new();
        for (k, v) in &inputs {
            env.insert(k.clone(), *v);
        }
        for (tgt, code) in &t.code {
            let syms = &self.syms;
            let sdfg = self.sdfg;
            let bufs = &self.bufs;
            let mut resolve = |name: &str| -> Option<Value> {
                if let Some(v) = env.get(name) {
                    return Some(*v);
                }
                if let Some(v) = syms.get(name) {
                    return Some(Value::I64(*v));
                }
                // Written integer scalars are readable where symbols are.
                let d = sdfg.descriptors.get(name)?;
                if d.is_scalar() && d.elem == ElemType::I64 {
                    let b = bufs.get(name)?;
                    if b.written[0] {
                        return b.get_lin(0).as_i64().map(Value::I64);
                    }
                }
                None
            };
            let v = code.eval(&mut resolve).map_err(|e| SdfgInterpError::Code {
                state: state.to_string(),
                tasklet: t.name.clone(),
                msg: match e {
                    CodeEvalError::DivisionByZero => "division by zero".to_string(),
                    other => other.to_string(),
                },
            })?;
            env.insert(tgt.clone(), v);
        }
        self.stats.tasklet_execs += 1;
        *self.tasklet_counts.entry(t.name.clone()).or_insert(0) += 1;

        for out in &t.outputs {
            if let Some(v) = env.get(out) {
                conn_vals.insert((ni, out.clone()), *v);
            }
        }
        // Push writes that have no downstream node.
        for e in edges {
            let Endpoint::Conn(i, conn) = &e.src else { continue };
            if *i != ni || !matches!(e.dst, Endpoint::Boundary(_)) {
                continue;
            }
            let Endpoint::Boundary(c) = &e.dst else { unreachable!() };
            let v = *conn_vals.get(&(ni, conn.clone())).ok_or_else(|| SdfgInterpError::Code {
                state: state.to_string(),
                tasklet: t.name.clone(),
                msg: format!("output connector {conn} was never assigned"),
            })?;
            let tuples = self.expand_subset(e.dst_subset.as_ref().expect("data side"), state)?;
            let idx = first_tuple(&tuples, state)?;
            self.write_elem(&c.clone(), idx, v, e.wcr, state)?;
        }
        Ok(())
    }

    /// One data-moving edge. The destination decides the moment it runs;
    /// sources are containers or already-computed connector values.
    fn copy_edge(
        &mut self,
        state: &str,
        nodes: &[Node],
        e: &Memlet,
        conn_vals: &BTreeMap<(usize, String), Value>,
    ) -> Result<(), SdfgInterpError> {
        self.tick()?;
        let dst_container = match &e.dst {
            Endpoint::Boundary(c) => c.clone(),
            Endpoint::Node(i) => match &nodes[*i] {
                Node::Access(c) => c.clone(),
                _ => return Ok(()),
            },
            Endpoint::Conn(..) => return Ok(()), // pulled by the tasklet
        };
        let dst_tuples = self.expand_subset(e.dst_subset.as_ref().expect("data side"), state)?;

        match &e.src {
            Endpoint::Conn(i, conn) => {
                let v = *conn_vals.get(&(*i, conn.clone())).ok_or_else(|| {
                    SdfgInterpError::Expr {
                        state: state.to_string(),
                        msg: format!("connector {conn} read before it was written"),
                    }
                })?;
                let idx = first_tuple(&dst_tuples, state)?.to_vec();
                self.write_elem(&dst_container, &idx, v, e.wcr, state)?;
            }
            src => {
                let src_container = match (src, nodes.get(endpoint_node(src))) {
                    (Endpoint::Boundary(c), _) => c.clone(),
                    (Endpoint::Node(_), Some(Node::Access(c))) => c.clone(),
                    _ => return Ok(()),
                };
                let src_tuples =
                    self.expand_subset(e.src_subset.as_ref().expect("data side"), state)?;
                if src_tuples.len() == 1 && dst_tuples.len() != 1 {
                    // Broadcast: one source element fans out to every
                    // destination element; read once, and not at all when
                    // the destination range is empty.
                    if dst_tuples.is_empty() {
                        return Ok(());
                    }
                    let v = self.read_elem(&src_container, &src_tuples[0], state)?;
                    for di in &dst_tuples {
                        self.write_elem(&dst_container, di, v, e.wcr, state)?;
                    }
                    return Ok(());
                }
                if src_tuples.len() != dst_tuples.len() {
                    return Err(SdfgInterpError::CopyMismatch {
                        state: state.to_string(),
                        src: src_tuples.len(),
                        dst: dst_tuples.len(),
                    });
                }
                for (si, di) in src_tuples.iter().zip(&dst_tuples) {
                    let v = self.read_elem(&src_container, si, state)?;
                    self.write_elem(&dst_container, di, v, e.wcr, state)?;
                }
            }
        }
        Ok(())
    }

    fn run_map(&mut self, state: &str, m: &MapScope) -> Result<(), SdfgInterpError> {
        let mut dims: Vec<Vec<i64>> = Vec::with_capacity(m.ranges.len());
        for r in &m.ranges {
            dims.push(self.expand_range(r, state)?);
        }
        let mut tuples = vec![vec![]];
        for d in &dims {
            let mut next = Vec::with_capacity(tuples.len() * d.len());
            for prefix in &tuples {
                for v in d {
                    let mut t = prefix.clone();
                    t.push(*v);
                    next.push(t);
                }
            }
            tuples = next;
        }
        if let Some(rng) = &mut self.shuffle {
            rng.shuffle(&mut tuples);
        }

        let saved: Vec<Option<i64>> = m.params.iter().map(|p| self.syms.get(p).copied()).collect();
        for tuple in tuples {
            self.tick()?;
            for (p, v) in m.params.iter().zip(&tuple) {
                self.syms.insert(p.clone(), *v);
            }
            self.run_level(state, &m.nodes, &m.edges)?;
        }
        for (p, old) in m.params.iter().zip(saved) {
            match old {
                Some(v) => self.syms.insert(p.clone(), v),
                None => self.syms.remove(p),
            };
        }
        Ok(())
    }
}

fn first_tuple<'t>(
    tuples: &'t [Vec<i64>],
    state: &str,
) -> Result<&'t Vec<i64>, SdfgInterpError> {
    tuples.first().ok_or_else(|| SdfgInterpError::Expr {
        state: state.to_string(),
        msg: "empty subset on a scalar-valued edge".to_string(),
    })
}

fn endpoint_node(e: &Endpoint) -> usize {
    match e {
        Endpoint::Node(i) | Endpoint::Conn(i, _) => *i,
        Endpoint::Boundary(_) => usize::MAX,
    }
}

fn is_map_endpoint(nodes: &[Node], e: &Endpoint) -> bool {
    match e {
        Endpoint::Node(i) | Endpoint::Conn(i, _) => matches!(nodes.get(*i), Some(Node::Map(_))),
        Endpoint::Boundary(_) => false,
    }
}

fn coerce(v: Value, elem: ElemType) -> Value {
    match (v, elem) {
        (Value::I64(x), ElemType::F64) => Value::F64(x as f64),
        (Value::F64(x), ElemType::I64) => Value::I64(x as i64),
        other => other.0,
    }
}

fn combine(w: Wcr, old: Value, new: Value) -> Value {
    match (old, new) {
        (Value::I64(a), Value::I64(b)) => Value::I64(match w {
            Wcr::Add => a.wrapping_add(b),
            Wcr::Mul => a.wrapping_mul(b),
            Wcr::Min => a.min(b),
            Wcr::Max => a.max(b),
        }),
        _ => {
            let a = old.as_f64().unwrap_or_else(|| old.as_i64().unwrap() as f64);
            let b = new.as_f64().unwrap_or_else(|| new.as_i64().unwrap() as f64);
            Value::F64(match w {
                Wcr::Add => a + b,
                Wcr::Mul => a * b,
                Wcr::Min => a.min(b),
                Wcr::Max => a.max(b),
            })
        }
    }
}

fn collect_state_uses(nodes: &[Node], edges: &[Memlet], out: &mut BTreeSet<String>) {
    for n in nodes {
        match n {
            Node::Access(c) => {
                out.insert(c.clone());
            }
            Node::Map(m) => collect_state_uses(&m.nodes, &m.edges, out),
            Node::Tasklet(_) => {}
        }
    }
    for e in edges {
        for b in [&e.src, &e.dst] {
            if let Endpoint::Boundary(c) = b {
                out.insert(c.clone());
            }
        }
        for sub in [&e.src_subset, &e.dst_subset].into_iter().flatten() {
            let mut syms = BTreeSet::new();
            sub.collect_syms(&mut syms);
            out.extend(syms);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convert::convert;
    use crate::frontend::{interpret_program, parse_program};
    use crate::sdfg::parse_sdir;
    use crate::value::max_deviation;

    fn run_both(
        src: &str,
        bindings: &[(&str, i64)],
        inputs: &[(&str, Buffer)],
    ) -> (RunOutcome, RunOutcome) {
        let p = parse_program(src).unwrap();
        let b: BTreeMap<String, i64> = bindings.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        let i: BTreeMap<String, Buffer> =
            inputs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect();
        let front = interpret_program(&p, &b, &i).unwrap();
        let sdfg = convert(&p).unwrap();
        let data = interpret_sdfg(&sdfg, &b, &i).unwrap();
        (front, data)
    }

    fn assert_same_outputs(front: &RunOutcome, data: &RunOutcome) {
        assert_eq!(
            front.outputs.keys().collect::<Vec<_>>(),
            data.outputs.keys().collect::<Vec<_>>()
        );
        for (name, want) in &front.outputs {
            let dev = max_deviation(want, &data.outputs[name]);
            assert_eq!(dev, Some(0.0), "container {name} diverged");
        }
    }

    #[test]
    fn lowered_fill_loop_matches_the_frontend() {
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
        let (front, data) = run_both(src, &[("N", 4)], &[("a", a)]);
        assert_same_outputs(&front, &data);
        assert_eq!(data.stats.stores, 4);
        assert_eq!(data.stats.loads, 0);
    }

    #[test]
    fn lowered_matmul_matches_the_frontend_exactly() {
        let src = r#"
func @main(%a: memref<NxKxf64>, %b: memref<KxMxf64>, %c: memref<NxMxf64>) syms(N, M, K) entry assume("N >= 1 and M >= 1 and K >= 1") {
  %c0 = const 0 : i64
  %c1 = const 1 : i64
  %n = sym N
  %m = sym M
  %k = sym K
  %zero = const 0.0 : f64
  for %i = %c0 to %n step 1 {
    for %j = %c0 to %m step 1 {
      store %zero, %c[%i, %j]
      for %p = %c0 to %k step 1 {
        %x = load %a[%i, %p]
        %y = load %b[%p, %j]
        %prod = arith mul %x, %y
        %acc = load %c[%i, %j]
        %sum = arith add %acc, %prod
        store %sum, %c[%i, %j]
      }
    }
  }
  return
}
"#;
        let mut rng = SplitMix64::new(7);
        let a = Buffer::random(ElemType::F64, vec![3, 4], &mut rng);
        let b = Buffer::random(ElemType::F64, vec![4, 2], &mut rng);
        let c = Buffer::new_poisoned(ElemType::F64, vec![3, 2]);
        let (front, data) = run_both(
            src,
            &[("N", 3), ("M", 2), ("K", 4)],
            &[("a", a), ("b", b), ("c", c)],
        );
        assert_same_outputs(&front, &data);
        // Same op-for-op traffic: the lowering adds no array movement.
        assert_eq!(front.stats.loads, data.stats.loads);
        assert_eq!(front.stats.stores, data.stats.stores);
    }

    #[test]
    fn scalar_return_flows_through_ret0() {
        let src = r#"
func @main() -> i64 entry {
  %a = const 40 : i64
  %b = const 2 : i64
  %c = arith add %a, %b
  return %c
}
"#;
        let (front, data) = run_both(src, &[], &[]);
        assert_same_outputs(&front, &data);
        assert_eq!(data.outputs["__ret0"].get_lin(0).as_i64(), Some(42));
    }

    #[test]
    fn while_countdown_matches_the_frontend() {
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
        let (front, data) = run_both(src, &[], &[("a", a)]);
        assert_same_outputs(&front, &data);
        assert_eq!(data.outputs["a"].get_lin(0).as_i64(), Some(0));
    }

    #[test]
    fn deferred_dimensions_bind_from_the_buffer() {
        let src = r#"
func @main(%a: memref<?xf64>) entry {
  %c0 = const 0 : i64
  %x = load %a[%c0]
  %y = arith add %x, %x
  store %y, %a[%c0]
  return
}
"#;
        let a = Buffer::from_values(ElemType::F64, vec![7], &[
            Value::F64(1.5), Value::F64(0.0), Value::F64(0.0), Value::F64(0.0),
            Value::F64(0.0), Value::F64(0.0), Value::F64(0.0),
        ]);
        let (front, data) = run_both(src, &[], &[("a", a)]);
        assert_same_outputs(&front, &data);
        assert_eq!(data.outputs["a"].get_lin(0).as_f64(), Some(3.0));
    }

    const SCALE_MAP: &str = r#"
sdfg @scale (syms: N) {
  assume "N >= 1"
  sdfg.alloc @A : array<sym("N") x f64> {storage: heap, lifetime: global}
  sdfg.alloc @B : array<sym("N") x f64> {storage: heap, lifetime: global}
  sdfg.result @B
  sdfg.state @s0 {
    %0 = sdfg.access @A
    %1 = sdfg.access @B
    %2 = sdfg.map @m0 (%i) = (0) to (sym("N")) step (1) {
      %0 = sdfg.tasklet @t0 (in_a) -> (out) { out = in_a * 2.0 }
      sdfg.load ^A[i] -> %0.in_a
      sdfg.store %0.out -> ^B[i]
    }
  }
  sdfg.start @s0
}
"#;

    #[test]
    fn map_state_executes_all_iterations_and_counts_traffic() {
        let sdfg = parse_sdir(SCALE_MAP).unwrap();
        let mut rng = SplitMix64::new(3);
        let a = Buffer::random(ElemType::F64, vec![5], &mut rng);
        let out = interpret_sdfg(
            &sdfg,
            &[("N".to_string(), 5)].into(),
            &[("A".to_string(), a.clone())].into(),
        )
        .unwrap();
        let b = &out.outputs["B"];
        for i in 0..5 {
            assert_eq!(b.get_lin(i).as_f64(), a.get_lin(i).as_f64().map(|x| x * 2.0));
        }
        assert_eq!(out.stats.loads, 5);
        assert_eq!(out.stats.stores, 5);
        assert_eq!(out.tasklet_counts["t0"], 5);
        assert_eq!(out.stats.allocations, 0);
    }

    #[test]
    fn wcr_reduction_counts_updates_not_loads() {
        let src = r#"
sdfg @reduce (syms: N) {
  assume "N >= 1"
  sdfg.alloc @A : array<sym("N") x f64> {storage: heap, lifetime: global}
  sdfg.alloc @S : array<1 x f64> {storage: heap, lifetime: global}
  sdfg.result @S
  sdfg.state @init {
    %0 = sdfg.tasklet @zero () -> (out) { out = 0.0 }
    %1 = sdfg.access @S
    sdfg.store %0.out -> %1[0]
  }
  sdfg.state @acc {
    %0 = sdfg.access @A
    %1 = sdfg.access @S
    %2 = sdfg.map @m0 (%i) = (0) to (sym("N")) step (1) {
      %0 = sdfg.tasklet @t0 (in_a) -> (out) { out = in_a }
      sdfg.load ^A[i] -> %0.in_a
      sdfg.store %0.out -> ^S[0] wcr("+")
    }
  }
  sdfg.edge @init -> @acc
  sdfg.start @init
}
"#;
        let sdfg = parse_sdir(src).unwrap();
        let vals: Vec<Value> = (1..=4).map(|v| Value::F64(v as f64)).collect();
        let a = Buffer::from_values(ElemType::F64, vec![4], &vals);
        let out = interpret_sdfg(
            &sdfg,
            &[("N".to_string(), 4)].into(),
            &[("A".to_string(), a)].into(),
        )
        .unwrap();
        assert_eq!(out.outputs["S"].get_lin(0).as_f64(), Some(10.0));
        assert_eq!(out.stats.loads, 4);
        assert_eq!(out.stats.updates, 4);
        assert_eq!(out.stats.stores, 1);
    }

    #[test]
    fn per_state_lifetime_reallocates_on_each_entry() {
        let src = r#"
sdfg @loop (syms: k) {
  sdfg.alloc @T : array<2 x f64> {transient, storage: heap, lifetime: state}
  sdfg.alloc @out : array<1 x f64>
  sdfg.result @out
  sdfg.state @body {
    %0 = sdfg.tasklet @w () -> (out) { out = 1.0 }
    %1 = sdfg.access @T
    %2 = sdfg.access @out
    sdfg.store %0.out -> %1[0]
    sdfg.copy %1[0] -> %2[0]
  }
  sdfg.state @done {
  }
  sdfg.edge @body -> @body (cond: "k < 3") (assign: "k: k + 1")
  sdfg.edge @body -> @done (else)
  sdfg.start @body
}
"#;
        let sdfg = parse_sdir(src).unwrap();
        let out = interpret_sdfg(&sdfg, &[("k".to_string(), 0)].into(), &BTreeMap::new()).unwrap();
        // Four entries of @body (k = 0,1,2 loop, then fall out on k = 3).
        assert_eq!(out.stats.allocations, 4);
        assert_eq!(out.outputs["out"].get_lin(0).as_f64(), Some(1.0));
    }

    #[test]
    fn no_enabled_edge_is_an_error() {
        let src = r#"
sdfg @stuck {
  sdfg.alloc @out : array<1 x f64>
  sdfg.result @out
  sdfg.state @a {
  }
  sdfg.state @b {
  }
  sdfg.edge @a -> @b (cond: "false")
  sdfg.start @a
}
"#;
        let sdfg = parse_sdir(src).unwrap();
        let got = interpret_sdfg(&sdfg, &BTreeMap::new(), &BTreeMap::new());
        assert!(matches!(got, Err(SdfgInterpError::NoEnabledEdge { state }) if state == "a"));
    }

    #[test]
    fn uninitialized_reads_warn_once_and_poison() {
        let src = r#"
sdfg @leak {
  sdfg.alloc @T : array<2 x f64> {transient, storage: heap, lifetime: global}
  sdfg.alloc @out : array<2 x f64>
  sdfg.result @out
  sdfg.state @s0 {
    %0 = sdfg.access @T
    %1 = sdfg.access @out
    sdfg.copy %0[0:1] -> %1[0:1]
  }
  sdfg.start @s0
}
"#;
        let sdfg = parse_sdir(src).unwrap();
        let out = interpret_sdfg(&sdfg, &BTreeMap::new(), &BTreeMap::new()).unwrap();
        assert_eq!(out.warnings.len(), 1);
        assert!(out.warnings[0].contains("uninitialized"));
        assert_eq!(out.outputs["out"].get_lin(0).to_bits(), crate::value::POISON_BITS);
        assert_eq!(out.stats.allocations, 1);
        assert_eq!(out.stats.loads, 2);
        assert_eq!(out.stats.stores, 2);
    }

    #[test]
    fn parallel_map_passes_the_determinism_check() {
        let sdfg = parse_sdir(SCALE_MAP).unwrap();
        let mut rng = SplitMix64::new(11);
        let a = Buffer::random(ElemType::F64, vec![6], &mut rng);
        let got = check_map_determinism(
            &sdfg,
            &[("N".to_string(), 6)].into(),
            &[("A".to_string(), a)].into(),
            10,
            0,
        )
        .unwrap();
        assert_eq!(got, DeterminismOutcome::Deterministic);
    }

    #[test]
    fn order_dependent_map_is_flagged() {
        // Every iteration writes the same cell; the surviving value depends
        // on iteration order.
        let src = r#"
sdfg @race (syms: N) {
  assume "N >= 2"
  sdfg.alloc @B : array<1 x f64>
  sdfg.result @B
  sdfg.state @s0 {
    %0 = sdfg.access @B
    %1 = sdfg.map @m0 (%i) = (0) to (sym("N")) step (1) {
      %0 = sdfg.tasklet @t0 () -> (out) { out = i }
      sdfg.store %0.out -> ^B[0]
    }
  }
  sdfg.start @s0
}
"#;
        let sdfg = parse_sdir(src).unwrap();
        let got = check_map_determinism(
            &sdfg,
            &[("N".to_string(), 8)].into(),
            &BTreeMap::new(),
            10,
            0,
        )
        .unwrap();
        assert!(matches!(got, DeterminismOutcome::Raced { container, .. } if container == "B"));
    }

    #[test]
    fn step_limit_stops_runaway_graphs() {
        let src = r#"
sdfg @spin {
  sdfg.alloc @out : array<1 x f64>
  sdfg.result @out
  sdfg.state @a {
  }
  sdfg.edge @a -> @a
  sdfg.start @a
}
"#;
        let sdfg = parse_sdir(src).unwrap();
        let mut run = Run::new(&sdfg, &BTreeMap::new(), &BTreeMap::new(), None).unwrap();
        run.limit = 1000;
        let got = run.go();
        assert!(matches!(got, Err(SdfgInterpError::StepLimit(1000))));
    }
}
