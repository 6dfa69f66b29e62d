//! Structural and symbolic well-formedness checks. Validation is
//! conservative: provable violations are errors, unknowable ones are left to
//! the runtime bounds checks.

use super::{DataDescriptor, Endpoint, Memlet, Node, Sdfg, State, Storage};
use crate::symbolic::{
    prove, Assumptions, CmpKind, SymExpr, Truth, RESERVED,
};
use crate::value::ElemType;
use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ValidateError {
    #[error("unknown state `{0}`")]
    UnknownState(String),
    #[error("duplicate state `{0}`")]
    DuplicateState(String),
    #[error("descriptor `{container}`: {msg}")]
    BadDescriptor { container: String, msg: String },
    #[error("state `{state}`: unknown container `{container}`")]
    UnknownContainer { state: String, container: String },
    #[error("state `{state}`: size mismatch: {msg}")]
    SizeMismatch { state: String, msg: String },
    #[error("state `{state}`: dataflow graph has a cycle")]
    CyclicDataflow { state: String },
    #[error("state `{state}`: accesses of `{container}` are not totally ordered")]
    UnorderedAccesses { state: String, container: String },
    #[error("state `{state}`: {msg}")]
    BadMemlet { state: String, msg: String },
    #[error("transition `{src}` -> `{dst}`: {msg}")]
    BadTransition { src: String, dst: String, msg: String },
    #[error("`{0}` is a reserved word")]
    ReservedName(String),
    #[error("{context}: unknown name `{name}`")]
    UnknownName { context: String, name: String },
    #[error("assumptions are contradictory: {0}")]
    BadAssumptions(String),
}

pub fn validate(sdfg: &Sdfg) -> Result<(), ValidateError> {
    let asm = Assumptions::new(sdfg.assumptions.clone())
        .map_err(|e| ValidateError::BadAssumptions(e.to_string()))?;

    let known = sdfg.known_symbols();
    for s in &sdfg.symbols {
        if RESERVED.contains(&s.as_str()) {
            return Err(ValidateError::ReservedName(s.clone()));
        }
    }
    // Names usable inside expressions: symbols shadow nothing because
    // containers may not collide with them.
    let mut int_scalars: BTreeSet<String> = BTreeSet::new();
    for (name, d) in &sdfg.descriptors {
        check_descriptor(name, d, sdfg, &asm)?;
        if known.contains(name) {
            return Err(ValidateError::BadDescriptor {
                container: name.clone(),
                msg: "container name collides with a symbol".into(),
            });
        }
        if d.is_scalar() && d.elem == ElemType::I64 {
            int_scalars.insert(name.clone());
        }
    }

    let ctx = ExprCtx { known: &known, int_scalars: &int_scalars };

    // State machine shape.
    let mut seen = BTreeSet::new();
    for st in &sdfg.states {
        if !seen.insert(st.name.clone()) {
            return Err(ValidateError::DuplicateState(st.name.clone()));
        }
    }
    if sdfg.state(&sdfg.start).is_none() {
        return Err(ValidateError::UnknownState(sdfg.start.clone()));
    }
    for r in &sdfg.results {
        let d = sdfg.descriptors.get(r).ok_or_else(|| ValidateError::UnknownContainer {
            state: "<results>".into(),
            container: r.clone(),
        })?;
        if d.transient {
            return Err(ValidateError::BadDescriptor {
                container: r.clone(),
                msg: "result containers must not be transient".into(),
            });
        }
    }

    check_transitions(sdfg, &ctx)?;

    let mut tasklet_names = BTreeSet::new();
    for st in &sdfg.states {
        check_dataflow(sdfg, st, &st.nodes, &st.edges, &asm, &ctx, false, &mut tasklet_names)
            .map_err(|mut e| {
                // Inner helpers report with a placeholder state name.
                if let Some(s) = error_state_mut(&mut e) {
                    if s.is_empty() {
                        *s = st.name.clone();
                    }
                }
                e
            })?;
    }
    Ok(())
}

fn error_state_mut(e: &mut ValidateError) -> Option<&mut String> {
    match e {
        ValidateError::UnknownContainer { state, .. }
        | ValidateError::SizeMismatch { state, msg: _ }
        | ValidateError::CyclicDataflow { state }
        | ValidateError::UnorderedAccesses { state, .. }
        | ValidateError::BadMemlet { state, .. } => Some(state),
        _ => None,
    }
}

struct ExprCtx<'a> {
    known: &'a BTreeSet<String>,
    int_scalars: &'a BTreeSet<String>,
}

impl ExprCtx<'_> {
    /// Every free name must be a symbol or an integer scalar container.
    fn check_names(&self, e: &SymExpr, context: &str) -> Result<(), ValidateError> {
        for n in e.free_syms() {
            if !self.known.contains(&n) && !self.int_scalars.contains(&n) {
                return Err(ValidateError::UnknownName { context: context.into(), name: n });
            }
        }
        Ok(())
    }
}

fn check_descriptor(
    name: &str,
    d: &DataDescriptor,
    sdfg: &Sdfg,
    asm: &Assumptions,
) -> Result<(), ValidateError> {
    let bad = |msg: String| ValidateError::BadDescriptor { container: name.into(), msg };
    if name.is_empty() {
        return Err(bad("empty container name".into()));
    }
    if RESERVED.contains(&name) {
        return Err(ValidateError::ReservedName(name.into()));
    }
    if d.name != name {
        return Err(bad(format!("descriptor is registered under `{name}` but named `{}`", d.name)));
    }
    let declared: BTreeSet<&str> = sdfg.symbols.iter().map(|s| s.as_str()).collect();
    for dim in &d.shape {
        for s in dim.free_syms() {
            if !declared.contains(s.as_str()) {
                return Err(bad(format!("shape uses undeclared symbol `{s}`")));
            }
        }
        let positive = SymExpr::cmp(CmpKind::Le, SymExpr::Const(1), dim.clone());
        if prove(&positive, asm) == Truth::False {
            return Err(bad(format!("dimension `{dim}` is not positive")));
        }
    }
    if d.storage == Storage::Register && !d.is_scalar() {
        let one = SymExpr::cmp(CmpKind::Eq, d.size(), SymExpr::Const(1));
        if prove(&one, asm) != Truth::True {
            return Err(bad("register storage requires a scalar or size-1 container".into()));
        }
    }
    if !d.transient && d.lifetime != super::Lifetime::Global {
        return Err(bad("non-transient containers always have global lifetime".into()));
    }
    Ok(())
}

fn check_transitions(sdfg: &Sdfg, ctx: &ExprCtx) -> Result<(), ValidateError> {
    for e in &sdfg.edges {
        let err = |msg: String| ValidateError::BadTransition {
            src: e.src.clone(),
            dst: e.dst.clone(),
            msg,
        };
        if sdfg.state(&e.src).is_none() {
            return Err(ValidateError::UnknownState(e.src.clone()));
        }
        if sdfg.state(&e.dst).is_none() {
            return Err(ValidateError::UnknownState(e.dst.clone()));
        }
        if let Some(c) = &e.condition {
            if e.is_else {
                return Err(err("an else transition cannot also carry a condition".into()));
            }
            if !c.is_predicate() {
                return Err(err(format!("condition `{c}` is not a predicate")));
            }
            ctx.check_names(c, &format!("condition on `{}` -> `{}`", e.src, e.dst))?;
        }
        for (name, rhs) in &e.assignments {
            if RESERVED.contains(&name.as_str()) {
                return Err(ValidateError::ReservedName(name.clone()));
            }
            if sdfg.descriptors.contains_key(name) {
                return Err(err(format!("assignment target `{name}` is a container")));
            }
            if rhs.is_predicate() {
                return Err(err(format!("assignment of `{name}` must be arithmetic, got `{rhs}`")));
            }
            ctx.check_names(rhs, &format!("assignment of `{name}` on `{}` -> `{}`", e.src, e.dst))?;
        }
    }
    // Outgoing structure per state: one unconditional edge, or conditional
    // edges plus at most one else edge.
    for st in &sdfg.states {
        let outs = sdfg.out_edges(&st.name);
        let unconditional = outs.iter().filter(|e| e.condition.is_none() && !e.is_else).count();
        let elses = outs.iter().filter(|e| e.is_else).count();
        let conded = outs.len() - unconditional - elses;
        let bad = |msg: &str| ValidateError::BadTransition {
            src: st.name.clone(),
            dst: "*".into(),
            msg: msg.into(),
        };
        if elses > 1 {
            return Err(bad("more than one else transition"));
        }
        if unconditional > 1 {
            return Err(bad("more than one unconditional transition"));
        }
        if unconditional == 1 && outs.len() > 1 {
            return Err(bad("an unconditional transition must be the only one"));
        }
        if elses == 1 && conded == 0 {
            return Err(bad("an else transition requires a conditional sibling"));
        }
    }
    Ok(())
}

/// Validates one dataflow graph level (a state body or a map body).
#[allow(clippy::too_many_arguments)]
fn check_dataflow(
    sdfg: &Sdfg,
    st: &State,
    nodes: &[Node],
    edges: &[Memlet],
    asm: &Assumptions,
    ctx: &ExprCtx,
    inside_map: bool,
    tasklet_names: &mut BTreeSet<String>,
) -> Result<(), ValidateError> {
    let here = || st.name.clone();
    let memlet_err =
        |msg: String| ValidateError::BadMemlet { state: String::new(), msg };

    for n in nodes {
        match n {
            Node::Access(c) => {
                if !sdfg.descriptors.contains_key(c) {
                    return Err(ValidateError::UnknownContainer {
                        state: here(),
                        container: c.clone(),
                    });
                }
            }
            Node::Tasklet(t) => {
                if !tasklet_names.insert(t.name.clone()) {
                    return Err(memlet_err(format!("duplicate tasklet name `{}`", t.name)));
                }
                let outs: BTreeSet<&String> = t.outputs.iter().collect();
                let mut coded = BTreeSet::new();
                for (target, expr) in &t.code {
                    if !outs.contains(target) {
                        return Err(memlet_err(format!(
                            "tasklet `{}` assigns `{target}` which is not an output connector",
                            t.name
                        )));
                    }
                    if !coded.insert(target) {
                        return Err(memlet_err(format!(
                            "tasklet `{}` assigns `{target}` twice",
                            t.name
                        )));
                    }
                    for r in expr.references() {
                        if !t.inputs.contains(&r) && !ctx.known.contains(&r) {
                            return Err(ValidateError::UnknownName {
                                context: format!("code of tasklet `{}`", t.name),
                                name: r,
                            });
                        }
                    }
                }
                for o in &t.outputs {
                    if !coded.contains(o) {
                        return Err(memlet_err(format!(
                            "tasklet `{}` never assigns output connector `{o}`",
                            t.name
                        )));
                    }
                }
            }
            Node::Map(m) => {
                if !tasklet_names.insert(m.name.clone()) {
                    return Err(memlet_err(format!("duplicate scope name `{}`", m.name)));
                }
                if m.params.len() != m.ranges.len() {
                    return Err(memlet_err(format!(
                        "map `{}` has {} parameters but {} ranges",
                        m.name,
                        m.params.len(),
                        m.ranges.len()
                    )));
                }
                let mut uniq = BTreeSet::new();
                for p in &m.params {
                    if RESERVED.contains(&p.as_str()) {
                        return Err(ValidateError::ReservedName(p.clone()));
                    }
                    if !uniq.insert(p) || sdfg.descriptors.contains_key(p) {
                        return Err(memlet_err(format!(
                            "map `{}` parameter `{p}` is duplicated or shadows a container",
                            m.name
                        )));
                    }
                }
                // Iteration bounds bind the parameters for inner checks.
                let mut inner_asm = asm.clone();
                for (p, r) in m.params.iter().zip(&m.ranges) {
                    ctx.check_names(&r.begin, &format!("range of map `{}`", m.name))?;
                    ctx.check_names(&r.end, &format!("range of map `{}`", m.name))?;
                    let lo =
                        SymExpr::cmp(CmpKind::Le, r.begin.clone(), SymExpr::sym(p.clone()));
                    let hi = SymExpr::cmp(CmpKind::Le, SymExpr::sym(p.clone()), r.end.clone());
                    let _ = inner_asm.assume(lo);
                    let _ = inner_asm.assume(hi);
                }
                check_dataflow(sdfg, st, &m.nodes, &m.edges, &inner_asm, ctx, true, tasklet_names)?;
                check_map_boundary(sdfg, st, nodes, edges, m, n)?;
            }
        }
    }

    for e in edges {
        check_memlet(sdfg, st, nodes, e, asm, ctx, inside_map)?;
    }

    // Every input connector is fed exactly once.
    for (i, n) in nodes.iter().enumerate() {
        if let Node::Tasklet(t) = n {
            for c in &t.inputs {
                let feeds = edges
                    .iter()
                    .filter(|e| matches!(&e.dst, Endpoint::Conn(j, cc) if *j == i && cc == c))
                    .count();
                if feeds != 1 {
                    return Err(memlet_err(format!(
                        "input connector `{}.{c}` has {feeds} incoming edges, wants exactly 1",
                        t.name
                    )));
                }
            }
        }
    }

    if super::topo_order_of(nodes.len(), edges).is_err() {
        return Err(ValidateError::CyclicDataflow { state: here() });
    }

    // Accesses of one container must be totally ordered by dataflow paths so
    // execution order within the state is well defined.
    let mut by_container: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, n) in nodes.iter().enumerate() {
        if let Node::Access(c) = n {
            by_container.entry(c.as_str()).or_default().push(i);
        }
    }
    for (c, ixs) in by_container {
        for (k, &a) in ixs.iter().enumerate() {
            for &b in &ixs[k + 1..] {
                if !super::reaches(nodes.len(), edges, a, b)
                    && !super::reaches(nodes.len(), edges, b, a)
                {
                    return Err(ValidateError::UnorderedAccesses {
                        state: here(),
                        container: c.to_string(),
                    });
                }
            }
        }
    }
    Ok(())
}

fn subset_container<'a>(
    sdfg: &'a Sdfg,
    st: &State,
    nodes: &'a [Node],
    e: &'a Endpoint,
) -> Result<Option<&'a str>, ValidateError> {
    match e {
        Endpoint::Node(i) => match nodes.get(*i) {
            Some(Node::Access(c)) => Ok(Some(c.as_str())),
            Some(_) => Ok(None),
            None => Err(ValidateError::BadMemlet {
                state: st.name.clone(),
                msg: format!("endpoint references missing node %{i}"),
            }),
        },
        Endpoint::Conn(i, c) => match nodes.get(*i) {
            Some(Node::Tasklet(_)) => Ok(None),
            Some(_) => Err(ValidateError::BadMemlet {
                state: st.name.clone(),
                msg: format!("connector `{c}` on node %{i} which is not a tasklet"),
            }),
            None => Err(ValidateError::BadMemlet {
                state: st.name.clone(),
                msg: format!("endpoint references missing node %{i}"),
            }),
        },
        Endpoint::Boundary(c) => {
            if sdfg.descriptors.contains_key(c) {
                Ok(Some(c.as_str()))
            } else {
                Err(ValidateError::UnknownContainer { state: st.name.clone(), container: c.clone() })
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn check_memlet(
    sdfg: &Sdfg,
    st: &State,
    nodes: &[Node],
    e: &Memlet,
    asm: &Assumptions,
    ctx: &ExprCtx,
    inside_map: bool,
) -> Result<(), ValidateError> {
    let err = |msg: String| ValidateError::BadMemlet { state: String::new(), msg };
    if !inside_map {
        if matches!(e.src, Endpoint::Boundary(_)) || matches!(e.dst, Endpoint::Boundary(_)) {
            return Err(err("boundary endpoints are only valid inside a map".into()));
        }
    }
    let src_container = subset_container(sdfg, st, nodes, &e.src)?;
    let dst_container = subset_container(sdfg, st, nodes, &e.dst)?;

    // Connector direction.
    if let Endpoint::Conn(i, c) = &e.src {
        let t = nodes[*i].as_tasklet().unwrap();
        if !t.outputs.contains(c) {
            return Err(err(format!("`{}.{c}` is not an output connector", t.name)));
        }
    }
    if let Endpoint::Conn(i, c) = &e.dst {
        let t = nodes[*i].as_tasklet().unwrap();
        if !t.inputs.contains(c) {
            return Err(err(format!("`{}.{c}` is not an input connector", t.name)));
        }
    }
    if matches!(e.src, Endpoint::Conn(..)) && matches!(e.dst, Endpoint::Conn(..)) {
        return Err(err("connector-to-connector edges are not allowed".into()));
    }

    // Subsets exist exactly on the container sides.
    let map_endpoint = |p: &Endpoint| {
        matches!(p, Endpoint::Node(i) if matches!(nodes.get(*i), Some(Node::Map(_))))
    };
    for (label, container, subset) in [
        ("source", src_container, &e.src_subset),
        ("destination", dst_container, &e.dst_subset),
    ] {
        match (container, subset) {
            (Some(c), Some(sub)) => {
                let d = &sdfg.descriptors[c];
                if sub.rank() != d.rank() {
                    return Err(err(format!(
                        "{label} subset rank {} does not match `{c}` rank {}",
                        sub.rank(),
                        d.rank()
                    )));
                }
                for (r, dim) in sub.0.iter().zip(&d.shape) {
                    for part in [&r.begin, &r.end, &r.stride] {
                        ctx.check_names(part, &format!("subset of `{c}`"))?;
                    }
                    let lo = SymExpr::cmp(CmpKind::Le, SymExpr::Const(0), r.begin.clone());
                    let hi = SymExpr::cmp(CmpKind::Lt, r.end.clone(), dim.clone());
                    if prove(&lo, asm) == Truth::False || prove(&hi, asm) == Truth::False {
                        return Err(err(format!(
                            "subset `{r}` provably exceeds `{c}` dimension `{dim}`"
                        )));
                    }
                }
            }
            (Some(c), None) => {
                return Err(err(format!("{label} `{c}` needs a subset")));
            }
            (None, Some(_)) => {
                return Err(err(format!("{label} endpoint takes no subset")));
            }
            (None, None) => {}
        }
    }

    if e.wcr.is_some() && dst_container.is_none() && !map_endpoint(&e.dst) {
        return Err(err("write-conflict resolution is only valid on writes to data".into()));
    }

    // Copies move as many elements as they write; a one-element source may
    // broadcast into any destination.
    if let (Some(_), Some(_)) = (src_container, dst_container) {
        let (Some(ss), Some(ds)) = (&e.src_subset, &e.dst_subset) else {
            return Ok(());
        };
        let single = SymExpr::cmp(CmpKind::Eq, ss.cardinality(), SymExpr::Const(1));
        if prove(&single, asm) == Truth::True {
            return Ok(());
        }
        let same = SymExpr::cmp(CmpKind::Eq, ss.cardinality(), ds.cardinality());
        if prove(&same, asm) == Truth::False {
            return Err(ValidateError::SizeMismatch {
                state: String::new(),
                msg: format!(
                    "copy moves {} elements into {} elements",
                    ss.cardinality(),
                    ds.cardinality()
                ),
            });
        }
    }
    Ok(())
}

/// Inner boundary containers must agree with the aggregate edges attached to
/// the map node at the enclosing level.
fn check_map_boundary(
    sdfg: &Sdfg,
    st: &State,
    nodes: &[Node],
    edges: &[Memlet],
    m: &super::MapScope,
    map_node: &Node,
) -> Result<(), ValidateError> {
    let map_idx = nodes
        .iter()
        .position(|n| std::ptr::eq(n, map_node))
        .expect("map node is in the list it came from");
    let err = |msg: String| ValidateError::BadMemlet { state: st.name.clone(), msg };

    let mut inner_reads = BTreeSet::new();
    let mut inner_writes = BTreeSet::new();
    collect_boundaries(&m.edges, &mut inner_reads, &mut inner_writes);

    let mut outer_in = BTreeSet::new();
    let mut outer_out = BTreeSet::new();
    for e in edges {
        if matches!(e.dst, Endpoint::Node(i) if i == map_idx) {
            if let Some(c) = subset_container(sdfg, st, nodes, &e.src)? {
                outer_in.insert(c.to_string());
            }
        }
        if matches!(e.src, Endpoint::Node(i) if i == map_idx) {
            if let Some(c) = subset_container(sdfg, st, nodes, &e.dst)? {
                outer_out.insert(c.to_string());
            }
        }
    }
    for c in &inner_reads {
        if !outer_in.contains(c) {
            return Err(err(format!(
                "map `{}` reads `{c}` across its boundary without an incoming aggregate edge",
                m.name
            )));
        }
    }
    for c in &inner_writes {
        if !outer_out.contains(c) {
            return Err(err(format!(
                "map `{}` writes `{c}` across its boundary without an outgoing aggregate edge",
                m.name
            )));
        }
    }
    Ok(())
}

/// Containers referenced by boundary endpoints at this level, by direction.
/// Nested maps declare their needs through aggregate edges in this edge list,
/// so one level is enough.
fn collect_boundaries(
    edges: &[Memlet],
    reads: &mut BTreeSet<String>,
    writes: &mut BTreeSet<String>,
) {
    for e in edges {
        if let Endpoint::Boundary(c) = &e.src {
            reads.insert(c.clone());
        }
        if let Endpoint::Boundary(c) = &e.dst {
            writes.insert(c.clone());
        }
    }
}
