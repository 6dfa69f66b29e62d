//! Shared graph analysis helpers for the pass suite.

use crate::sdfg::{DataDescriptor, Endpoint, InterstateEdge, Memlet, Node, Sdfg, State};
use crate::symbolic::{simplify, SymExpr};
use std::collections::{BTreeMap, BTreeSet};

pub fn state_index(g: &Sdfg, name: &str) -> Option<usize> {
    g.states.iter().position(|s| s.name == name)
}

/// Container behind an endpoint at one nesting level.
pub fn endpoint_container<'a>(nodes: &'a [Node], e: &'a Endpoint) -> Option<&'a str> {
    match e {
        Endpoint::Node(i) => nodes.get(*i).and_then(|n| n.as_access()),
        Endpoint::Conn(..) => None,
        Endpoint::Boundary(c) => Some(c),
    }
}

/// Walks every memlet of a level, recursing into map scopes.
pub fn walk_memlets<'a>(
    nodes: &'a [Node],
    edges: &'a [Memlet],
    f: &mut dyn FnMut(&'a [Node], &'a Memlet),
) {
    for e in edges {
        f(nodes, e);
    }
    for n in nodes {
        if let Node::Map(m) = n {
            walk_memlets(&m.nodes, &m.edges, f);
        }
    }
}

/// Containers a state reads and writes, at any nesting depth. A
/// write-conflict-resolved write also counts as a read.
pub fn state_reads_writes(st: &State) -> (BTreeSet<String>, BTreeSet<String>) {
    let mut reads = BTreeSet::new();
    let mut writes = BTreeSet::new();
    walk_memlets(&st.nodes, &st.edges, &mut |nodes, e| {
        if let Some(c) = endpoint_container(nodes, &e.src) {
            reads.insert(c.to_string());
        }
        if let Some(c) = endpoint_container(nodes, &e.dst) {
            writes.insert(c.to_string());
            if e.wcr.is_some() {
                reads.insert(c.to_string());
            }
        }
    });
    // Subsets and map ranges may name integer scalar containers.
    let mut syms = BTreeSet::new();
    state_sym_refs(st, &mut syms);
    reads.extend(syms);
    (reads, writes)
}

/// Every name referenced symbolically by a state: subsets, map ranges, and
/// tasklet code references.
pub fn state_sym_refs(st: &State, out: &mut BTreeSet<String>) {
    fn level(nodes: &[Node], edges: &[Memlet], out: &mut BTreeSet<String>) {
        for e in edges {
            for sub in [&e.src_subset, &e.dst_subset].into_iter().flatten() {
                sub.collect_syms(out);
            }
        }
        for n in nodes {
            match n {
                Node::Tasklet(t) => {
                    for (_, code) in &t.code {
                        out.extend(code.references());
                    }
                }
                Node::Map(m) => {
                    for r in &m.ranges {
                        r.collect_syms(out);
                    }
                    level(&m.nodes, &m.edges, out);
                }
                Node::Access(_) => {}
            }
        }
    }
    level(&st.nodes, &st.edges, out);
}

/// Names an interstate edge reads: condition symbols plus assignment
/// right-hand sides.
pub fn edge_sym_refs(e: &InterstateEdge, out: &mut BTreeSet<String>) {
    if let Some(c) = &e.condition {
        c.collect_syms(out);
    }
    for (_, rhs) in &e.assignments {
        rhs.collect_syms(out);
    }
}

/// All names used in symbol position anywhere in the graph (conditions,
/// assignments, subsets, ranges, code, shapes, assumptions).
pub fn global_sym_refs(g: &Sdfg) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for st in &g.states {
        state_sym_refs(st, &mut out);
    }
    for e in &g.edges {
        edge_sym_refs(e, &mut out);
    }
    for d in g.descriptors.values() {
        for dim in &d.shape {
            dim.collect_syms(&mut out);
        }
    }
    for a in &g.assumptions {
        a.collect_syms(&mut out);
    }
    out
}

/// True when the container appears (as an access node or boundary name)
/// inside any map scope.
pub fn used_inside_map(g: &Sdfg, name: &str) -> bool {
    fn in_level(nodes: &[Node], edges: &[Memlet], name: &str, nested: bool) -> bool {
        for e in edges {
            if nested {
                if let Endpoint::Boundary(c) = &e.src {
                    if c == name {
                        return true;
                    }
                }
                if let Endpoint::Boundary(c) = &e.dst {
                    if c == name {
                        return true;
                    }
                }
            }
        }
        for n in nodes {
            match n {
                Node::Access(c) if nested && c == name => return true,
                Node::Map(m) => {
                    if in_level(&m.nodes, &m.edges, name, true) {
                        return true;
                    }
                }
                _ => {}
            }
        }
        false
    }
    g.states.iter().any(|st| in_level(&st.nodes, &st.edges, name, false))
}

/// Removes the given node indices from one dataflow level, remapping edge
/// endpoints. Edges touching a removed node are dropped.
pub fn remove_level_nodes(nodes: &mut Vec<Node>, edges: &mut Vec<Memlet>, remove: &BTreeSet<usize>) {
    if remove.is_empty() {
        return;
    }
    let mut remap: Vec<Option<usize>> = Vec::with_capacity(nodes.len());
    let mut next = 0usize;
    for i in 0..nodes.len() {
        if remove.contains(&i) {
            remap.push(None);
        } else {
            remap.push(Some(next));
            next += 1;
        }
    }
    let mut kept_nodes = Vec::with_capacity(next);
    for (i, n) in std::mem::take(nodes).into_iter().enumerate() {
        if !remove.contains(&i) {
            kept_nodes.push(n);
        }
    }
    *nodes = kept_nodes;
    edges.retain(|e| {
        let touch_removed = |ep: &Endpoint| {
            ep.node_index().is_some_and(|i| remap.get(i).map(|m| m.is_none()).unwrap_or(true))
        };
        !touch_removed(&e.src) && !touch_removed(&e.dst)
    });
    for e in edges {
        for ep in [&mut e.src, &mut e.dst] {
            match ep {
                Endpoint::Node(i) | Endpoint::Conn(i, _) => *i = remap[*i].unwrap(),
                Endpoint::Boundary(_) => {}
            }
        }
    }
}

/// Removes the given node indices from a state, remapping edge endpoints.
pub fn remove_nodes(st: &mut State, remove: &BTreeSet<usize>) {
    remove_level_nodes(&mut st.nodes, &mut st.edges, remove);
}

/// Drops access nodes with no remaining edges at one level (tasklets and
/// maps without edges are kept for the dead-dataflow pass to judge).
pub fn drop_level_orphan_accesses(nodes: &mut Vec<Node>, edges: &mut Vec<Memlet>) {
    let mut used: BTreeSet<usize> = BTreeSet::new();
    for e in edges.iter() {
        used.extend(e.src.node_index());
        used.extend(e.dst.node_index());
    }
    let orphans: BTreeSet<usize> = (0..nodes.len())
        .filter(|i| !used.contains(i) && matches!(nodes[*i], Node::Access(_)))
        .collect();
    remove_level_nodes(nodes, edges, &orphans);
}

/// Drops access nodes with no remaining edges in a state.
pub fn drop_orphan_accesses(st: &mut State) {
    drop_level_orphan_accesses(&mut st.nodes, &mut st.edges);
}

/// Node-level reachability inside one dataflow level.
pub fn node_reaches(n: usize, edges: &[Memlet], from: usize, to: usize) -> bool {
    crate::sdfg::reaches(n, edges, from, to)
}

/// Per-state forward reachability over the state machine: `out[i]` holds
/// every state reachable from `i` through one or more transitions.
pub fn reachable_sets(g: &Sdfg) -> Vec<BTreeSet<usize>> {
    let n = g.states.len();
    let index: BTreeMap<&str, usize> =
        g.states.iter().enumerate().map(|(i, s)| (s.name.as_str(), i)).collect();
    let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for e in &g.edges {
        if let (Some(&a), Some(&b)) = (index.get(e.src.as_str()), index.get(e.dst.as_str())) {
            adj[a].insert(b);
        }
    }
    let mut out = adj.clone();
    loop {
        let mut changed = false;
        for i in 0..n {
            let next: BTreeSet<usize> =
                out[i].iter().flat_map(|j| out[*j].iter().copied()).collect();
            for v in next {
                changed |= out[i].insert(v);
            }
        }
        if !changed {
            return out;
        }
    }
}

/// Dominator sets over the state machine: `out[i]` is the set of states on
/// every path from start to `i` (including `i`).
pub fn dominator_sets(g: &Sdfg) -> Vec<BTreeSet<usize>> {
    let n = g.states.len();
    let index: BTreeMap<&str, usize> =
        g.states.iter().enumerate().map(|(i, s)| (s.name.as_str(), i)).collect();
    let Some(&start) = index.get(g.start.as_str()) else {
        return vec![BTreeSet::new(); n];
    };
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    for e in &g.edges {
        if let (Some(&a), Some(&b)) = (index.get(e.src.as_str()), index.get(e.dst.as_str())) {
            preds[b].push(a);
        }
    }
    let all: BTreeSet<usize> = (0..n).collect();
    let mut dom: Vec<BTreeSet<usize>> = vec![all; n];
    dom[start] = BTreeSet::from([start]);
    loop {
        let mut changed = false;
        for i in 0..n {
            if i == start {
                continue;
            }
            let mut meet: Option<BTreeSet<usize>> = None;
            for &p in &preds[i] {
                meet = Some(match meet {
                    None => dom[p].clone(),
                    Some(m) => m.intersection(&dom[p]).copied().collect(),
                });
            }
            let mut new = meet.unwrap_or_default();
            new.insert(i);
            if new != dom[i] {
                dom[i] = new;
                changed = true;
            }
        }
        if !changed {
            return dom;
        }
    }
}

/// The subset that covers a descriptor completely.
pub fn full_subset(d: &DataDescriptor) -> crate::symbolic::Subset {
    use crate::symbolic::{Subset, SymRange};
    Subset(
        d.shape
            .iter()
            .map(|dim| SymRange {
                begin: SymExpr::Const(0),
                end: simplify(&SymExpr::sub(dim.clone(), SymExpr::Const(1))),
                stride: SymExpr::Const(1),
            })
            .collect(),
    )
}

/// True when the subset provably selects every element of the descriptor.
pub fn subset_is_full(d: &DataDescriptor, sub: &crate::symbolic::Subset) -> bool {
    if d.is_scalar() {
        return sub.0.is_empty();
    }
    if sub.0.len() != d.shape.len() {
        return false;
    }
    sub.0.iter().zip(&d.shape).all(|(r, dim)| {
        simplify(&r.begin) == SymExpr::Const(0)
            && simplify(&r.stride) == SymExpr::Const(1)
            && simplify(&SymExpr::sub(SymExpr::add(r.end.clone(), SymExpr::Const(1)), dim.clone()))
                == SymExpr::Const(0)
    })
}

/// True when every dimension of the subset picks exactly one element.
pub fn subset_is_point(sub: &crate::symbolic::Subset) -> bool {
    sub.0.iter().all(|r| simplify(&SymExpr::sub(r.begin.clone(), r.end.clone())) == SymExpr::Const(0))
}

/// True when the subset provably selects exactly one element in total.
pub fn subset_is_single(sub: &crate::symbolic::Subset) -> bool {
    sub.0.is_empty() || subset_is_point(sub)
}

/// Symbols whose value never changes once bound: declared symbols, plus
/// symbols whose every assignment agrees textually and depends only on
/// declared symbols.
pub fn stable_symbols(g: &Sdfg) -> BTreeSet<String> {
    let declared: BTreeSet<String> = g.symbols.iter().cloned().collect();
    let mut rhs_by_sym: BTreeMap<&str, BTreeSet<String>> = BTreeMap::new();
    for e in &g.edges {
        for (name, rhs) in &e.assignments {
            rhs_by_sym.entry(name).or_default().insert(rhs.to_string());
        }
    }
    let mut out = declared.clone();
    for (name, rhss) in rhs_by_sym {
        if rhss.len() == 1 {
            let rhs = crate::symbolic::parse_expr(rhss.iter().next().unwrap());
            if let Ok(rhs) = rhs {
                if rhs.free_syms().iter().all(|s| declared.contains(s)) {
                    out.insert(name.to_string());
                }
            }
        }
    }
    out
}
