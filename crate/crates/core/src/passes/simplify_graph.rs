//! Control-flow simplification: state fusion and copy-loop raising.
//!
//! Fusion merges a state into its unique unconditional predecessor when the
//! combined dataflow graph provably preserves the original read/write
//! ordering of every container. Raising recognizes the canonical counted
//! loop whose body is a single element-wise copy and replaces the whole
//! loop with one bulk memlet, deleting a back edge from the state machine.

use super::util::{node_reaches, state_index, state_sym_refs, subset_is_point};
use super::PassReport;
use crate::sdfg::{topo_order_of, Endpoint, Memlet, Node, Sdfg, State};
use crate::symbolic::{simplify, substitute, CmpKind, SymExpr, SymRange};
use std::collections::{BTreeMap, BTreeSet};

pub fn simplify_graph(g: &mut Sdfg) -> PassReport {
    let mut report = PassReport::new("simplify");
    loop {
        if try_fuse_once(g) {
            report.rewrites += 1;
            report.states_removed += 1;
            continue;
        }
        if try_raise_once(g) {
            report.rewrites += 1;
            report.states_removed += 1;
            continue;
        }
        break;
    }
    report
}

// ---------------------------------------------------------------- fusion

fn try_fuse_once(g: &mut Sdfg) -> bool {
    for ei in 0..g.edges.len() {
        let e = &g.edges[ei];
        if e.condition.is_some() || e.is_else || !e.assignments.is_empty() {
            continue;
        }
        let (a, b) = (e.src.clone(), e.dst.clone());
        if a == b || b == g.start {
            continue;
        }
        if g.edges.iter().filter(|x| x.src == a).count() != 1 {
            continue;
        }
        if g.edges.iter().filter(|x| x.dst == b).count() != 1 {
            continue;
        }
        let (Some(ai), Some(bi)) = (state_index(g, &a), state_index(g, &b)) else { continue };
        let Some((nodes, edges)) = merge_dataflow(&g.states[ai], &g.states[bi]) else {
            continue;
        };
        g.states[ai].nodes = nodes;
        g.states[ai].edges = edges;
        g.edges.remove(ei);
        for x in &mut g.edges {
            if x.src == b {
                x.src = a.clone();
            }
            if x.dst == b {
                x.dst = a.clone();
            }
        }
        g.states.remove(bi);
        return true;
    }
    false
}

/// Attempts to concatenate two dataflow graphs so that running the result
/// once equals running `a` then `b`. Returns None when ordering cannot be
/// guaranteed.
fn merge_dataflow(a: &State, b: &State) -> Option<(Vec<Node>, Vec<Memlet>)> {
    let base = a.nodes.len();
    let mut nodes = a.nodes.clone();
    nodes.extend(b.nodes.iter().cloned());
    let mut edges = a.edges.clone();
    for e in &b.edges {
        let mut e = e.clone();
        for ep in [&mut e.src, &mut e.dst] {
            match ep {
                Endpoint::Node(i) | Endpoint::Conn(i, _) => *i += base,
                Endpoint::Boundary(_) => {}
            }
        }
        edges.push(e);
    }

    let written: Vec<bool> = (0..nodes.len())
        .map(|i| {
            edges.iter().any(|e| {
                matches!(e.dst, Endpoint::Node(j) if j == i)
                    && matches!(nodes[i], Node::Access(_))
            })
        })
        .collect();

    // Share each of b's pure-read access nodes with a's unique writer of
    // the same container, so the successor sees the predecessor's value.
    let mut replace: BTreeMap<usize, usize> = BTreeMap::new();
    for (i, n) in nodes.iter().enumerate().skip(base) {
        let Node::Access(c) = n else { continue };
        if written[i] {
            continue;
        }
        let writers: Vec<usize> = (0..base)
            .filter(|&j| written[j] && nodes[j].as_access() == Some(c.as_str()))
            .collect();
        match writers[..] {
            [] => {}
            [w] => {
                replace.insert(i, w);
            }
            _ => return None,
        }
    }
    for e in &mut edges {
        for ep in [&mut e.src, &mut e.dst] {
            match ep {
                Endpoint::Node(i) | Endpoint::Conn(i, _) => {
                    if let Some(&w) = replace.get(i) {
                        *i = w;
                    }
                }
                Endpoint::Boundary(_) => {}
            }
        }
    }
    let removed: BTreeSet<usize> = replace.keys().copied().collect();

    // Interpreter timing: a container read happens when the pulling node
    // runs (copy destination, tasklet, or map); a write happens when the
    // destination access node runs, except map output aggregates which
    // land while the map runs. a's effects must stay ordered before b's
    // for every shared container.
    let mut readers: BTreeMap<&str, BTreeSet<usize>> = BTreeMap::new();
    let mut writers: BTreeMap<&str, BTreeSet<usize>> = BTreeMap::new();
    for e in &edges {
        if let Endpoint::Node(si) = e.src {
            if let Node::Access(c) = &nodes[si] {
                if let Some(di) = e.dst.node_index() {
                    readers.entry(c).or_default().insert(di);
                }
            }
        }
        if let Endpoint::Node(di) = e.dst {
            if let Node::Access(c) = &nodes[di] {
                let at = match e.src {
                    Endpoint::Node(si) if matches!(nodes[si], Node::Map(_)) => si,
                    _ => di,
                };
                writers.entry(c).or_default().insert(at);
                if e.wcr.is_some() {
                    readers.entry(c).or_default().insert(at);
                }
            }
        }
    }
    let part_a = |i: usize| i < base;
    let n = nodes.len();
    let containers: BTreeSet<&str> =
        readers.keys().chain(writers.keys()).copied().collect();
    let empty = BTreeSet::new();
    for c in containers {
        let rs = readers.get(c).unwrap_or(&empty);
        let ws = writers.get(c).unwrap_or(&empty);
        for &ra in rs.iter().filter(|&&i| part_a(i)) {
            for &wb in ws.iter().filter(|&&i| !part_a(i)) {
                if !node_reaches(n, &edges, ra, wb) {
                    return None;
                }
            }
        }
        for &wa in ws.iter().filter(|&&i| part_a(i)) {
            for &rb in rs.iter().filter(|&&i| !part_a(i)) {
                if !node_reaches(n, &edges, wa, rb) {
                    return None;
                }
            }
            for &wb in ws.iter().filter(|&&i| !part_a(i)) {
                if !node_reaches(n, &edges, wa, wb) {
                    return None;
                }
            }
        }
    }

    super::util::remove_level_nodes(&mut nodes, &mut edges, &removed);
    if topo_order_of(nodes.len(), &edges).is_err() {
        return None;
    }
    Some((nodes, edges))
}

// ---------------------------------------------------------------- raising

struct RaisePlan {
    guard: usize,
    body: usize,
    seed_edge: usize,
    body_edge: usize,
    back_edge: usize,
    exit_edge: usize,
    src_subset: crate::symbolic::Subset,
    dst_subset: crate::symbolic::Subset,
}

fn try_raise_once(g: &mut Sdfg) -> bool {
    let Some(plan) = find_raise(g) else { return false };
    let guard_name = g.states[plan.guard].name.clone();
    let body_name = g.states[plan.body].name.clone();
    {
        let st = &mut g.states[plan.body];
        st.edges[0].src_subset = Some(plan.src_subset);
        st.edges[0].dst_subset = Some(plan.dst_subset);
    }
    let mut drop = vec![plan.body_edge, plan.back_edge];
    drop.sort_unstable();
    g.edges[plan.seed_edge].dst = body_name.clone();
    g.edges[plan.seed_edge].assignments.clear();
    g.edges[plan.exit_edge].src = body_name;
    g.edges[plan.exit_edge].is_else = false;
    g.edges[plan.exit_edge].condition = None;
    for ei in drop.into_iter().rev() {
        g.edges.remove(ei);
    }
    let gi = g.states.iter().position(|s| s.name == guard_name).unwrap();
    g.states.remove(gi);
    true
}

fn find_raise(g: &Sdfg) -> Option<RaisePlan> {
    'guards: for (gi, guard) in g.states.iter().enumerate() {
        if !guard.nodes.is_empty() || guard.name == g.start {
            continue;
        }
        let out: Vec<usize> =
            (0..g.edges.len()).filter(|&i| g.edges[i].src == guard.name).collect();
        let [o1, o2] = out[..] else { continue };
        let (body_edge, exit_edge) = if g.edges[o1].is_else { (o2, o1) } else { (o1, o2) };
        let be = &g.edges[body_edge];
        let xe = &g.edges[exit_edge];
        if be.is_else || !xe.is_else || !be.assignments.is_empty() || !xe.assignments.is_empty() {
            continue;
        }
        let Some(SymExpr::Cmp(CmpKind::Lt, iv_expr, ub)) = be.condition.as_ref().map(|c| c.clone())
        else {
            continue;
        };
        let SymExpr::Sym(iv) = *iv_expr else { continue };
        let ub = *ub;
        let body_name = be.dst.clone();
        let exit_name = xe.dst.clone();
        if body_name == guard.name || exit_name == guard.name || body_name == exit_name {
            continue;
        }
        if body_name == g.start {
            continue;
        }
        let bi = state_index(g, &body_name)?;
        // Body: single in-edge (the guard), single out-edge (the back edge
        // stepping the counter by one).
        let body_in: Vec<usize> =
            (0..g.edges.len()).filter(|&i| g.edges[i].dst == body_name).collect();
        if body_in != vec![body_edge] {
            continue;
        }
        let body_out: Vec<usize> =
            (0..g.edges.len()).filter(|&i| g.edges[i].src == body_name).collect();
        let [back_edge] = body_out[..] else { continue };
        let ke = &g.edges[back_edge];
        if ke.dst != guard.name || ke.condition.is_some() || ke.is_else {
            continue;
        }
        let [(step_name, step_rhs)] = &ke.assignments[..] else { continue };
        if *step_name != iv {
            continue;
        }
        let step = simplify(&SymExpr::sub(step_rhs.clone(), SymExpr::sym(iv.clone())));
        if step != SymExpr::Const(1) {
            continue;
        }
        // Seed: the only other way into the guard, binding exactly the
        // counter.
        let guard_in: Vec<usize> = (0..g.edges.len())
            .filter(|&i| g.edges[i].dst == guard.name && i != back_edge)
            .collect();
        let [seed_edge] = guard_in[..] else { continue };
        let se = &g.edges[seed_edge];
        if se.src == body_name {
            continue;
        }
        let [(seed_name, lb)] = &se.assignments[..] else { continue };
        if *seed_name != iv {
            continue;
        }
        let lb = lb.clone();
        // The counter must be private to the loop.
        for (si, st) in g.states.iter().enumerate() {
            if si == bi {
                continue;
            }
            let mut refs = BTreeSet::new();
            state_sym_refs(st, &mut refs);
            if refs.contains(&iv) {
                continue 'guards;
            }
        }
        for (ei, e) in g.edges.iter().enumerate() {
            if ei == body_edge || ei == back_edge || ei == seed_edge {
                continue;
            }
            let mut refs = BTreeSet::new();
            super::util::edge_sym_refs(e, &mut refs);
            if refs.contains(&iv) {
                continue 'guards;
            }
        }
        let mut fixed = BTreeSet::new();
        for d in g.descriptors.values() {
            for dim in &d.shape {
                dim.collect_syms(&mut fixed);
            }
        }
        for a in &g.assumptions {
            a.collect_syms(&mut fixed);
        }
        if fixed.contains(&iv) {
            continue;
        }
        // Body content: one element-wise copy between access nodes.
        let body = &g.states[bi];
        if body.nodes.len() != 2
            || !body.nodes.iter().all(|n| matches!(n, Node::Access(_)))
            || body.edges.len() != 1
        {
            continue;
        }
        let m = &body.edges[0];
        if m.wcr.is_some() {
            continue;
        }
        let (Some(src_sub), Some(dst_sub)) = (&m.src_subset, &m.dst_subset) else { continue };
        if !subset_is_point(src_sub) || !subset_is_point(dst_sub) {
            continue;
        }
        let last = simplify(&SymExpr::sub(ub.clone(), SymExpr::Const(1)));
        let Some(new_dst) = raise_subset(dst_sub, &iv, &lb, &last) else { continue };
        if new_dst.1 == 0 {
            continue; // destination must actually move with the counter
        }
        let Some(new_src) = raise_subset(src_sub, &iv, &lb, &last) else { continue };
        return Some(RaisePlan {
            guard: gi,
            body: bi,
            seed_edge,
            body_edge,
            back_edge,
            exit_edge,
            src_subset: new_src.0,
            dst_subset: new_dst.0,
        });
    }
    None
}

/// Rewrites a point subset over the counter into the range it covers for
/// counter values `lb..=last`. Returns the subset and how many dimensions
/// moved (0 = invariant, 1 = one dimension with constant positive step).
fn raise_subset(
    sub: &crate::symbolic::Subset,
    iv: &str,
    lb: &SymExpr,
    last: &SymExpr,
) -> Option<(crate::symbolic::Subset, usize)> {
    let mut moved = 0usize;
    let mut dims = Vec::with_capacity(sub.0.len());
    let next = BTreeMap::from([(
        iv.to_string(),
        SymExpr::add(SymExpr::sym(iv.to_string()), SymExpr::Const(1)),
    )]);
    let at_lb = BTreeMap::from([(iv.to_string(), lb.clone())]);
    let at_last = BTreeMap::from([(iv.to_string(), last.clone())]);
    for r in &sub.0 {
        let d = simplify(&r.begin);
        if !d.free_syms().contains(iv) {
            dims.push(SymRange { begin: d.clone(), end: d, stride: SymExpr::Const(1) });
            continue;
        }
        let step = simplify(&SymExpr::sub(substitute(&d, &next), d.clone()));
        let SymExpr::Const(c) = step else { return None };
        if c < 1 {
            return None;
        }
        moved += 1;
        dims.push(SymRange {
            begin: simplify(&substitute(&d, &at_lb)),
            end: simplify(&substitute(&d, &at_last)),
            stride: SymExpr::Const(c),
        });
    }
    if moved > 1 {
        return None;
    }
    Some((crate::symbolic::Subset(dims), moved))
}
