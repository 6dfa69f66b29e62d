//! Fuses consecutive counted loops with identical trip ranges into one
//! loop, then shrinks per-iteration temporaries to registers.
//!
//! Two loops fuse when the second starts right after the first exits (an
//! empty forwarding state between them), both count over the same range
//! with step one, and every container they share is touched at one fixed
//! per-iteration element whose index moves injectively with the counter.
//! That last condition makes iteration i of the fused body see exactly the
//! values it saw across the two original loops. A transient array that is
//! only ever touched at element [counter] inside the fused body collapses
//! to a register-resident scalar.

use super::symbol_propagation::substitute_in_state;
use super::util::{edge_sym_refs, node_reaches, state_index, state_sym_refs, subset_is_point};
use super::PassReport;
use crate::sdfg::{Endpoint, Lifetime, Node, Sdfg, Storage};
use crate::symbolic::{simplify, substitute, CmpKind, Subset, SymExpr};
use std::collections::{BTreeMap, BTreeSet};

pub fn map_loop_fusion(g: &mut Sdfg) -> PassReport {
    let mut report = PassReport::new("map-loop-fusion");
    loop {
        let loops = find_loops(g);
        let Some((a, b)) = fusable_pair(g, &loops) else { break };
        let merged = fuse(g, &loops[a], &loops[b]);
        report.rewrites += 1;
        report.states_removed += 2;
        let iv = loops[a].iv.clone();
        let chain: Vec<String> = merged;
        report.rewrites += scalarize(g, &chain, &iv);
    }
    report
}

struct LoopShape {
    guard: String,
    iv: String,
    lb: String,
    ub: String,
    seed_edge: usize,
    body_edge: usize,
    back_edge: usize,
    exit_edge: usize,
    exit_to: String,
    chain: Vec<String>,
}

fn find_loops(g: &Sdfg) -> Vec<LoopShape> {
    let mut out = Vec::new();
    'guards: for guard in &g.states {
        if !guard.nodes.is_empty() || guard.name == g.start {
            continue;
        }
        let outs: Vec<usize> =
            (0..g.edges.len()).filter(|&i| g.edges[i].src == guard.name).collect();
        let [o1, o2] = outs[..] else { continue };
        let (body_edge, exit_edge) = if g.edges[o1].is_else { (o2, o1) } else { (o1, o2) };
        let be = &g.edges[body_edge];
        let xe = &g.edges[exit_edge];
        if be.is_else || !xe.is_else || !be.assignments.is_empty() || !xe.assignments.is_empty() {
            continue;
        }
        let Some(SymExpr::Cmp(CmpKind::Lt, l, r)) = be.condition.clone() else { continue };
        let SymExpr::Sym(iv) = *l else { continue };
        let ub = simplify(&r).to_string();
        // Walk the body chain: linear states ending with the back edge.
        let mut chain = Vec::new();
        let mut cur = be.dst.clone();
        let mut back_edge = None;
        for _ in 0..=g.states.len() {
            if cur == guard.name || chain.contains(&cur) {
                continue 'guards;
            }
            let ins = g.edges.iter().filter(|e| e.dst == cur).count();
            if ins != 1 {
                continue 'guards;
            }
            chain.push(cur.clone());
            let outs: Vec<usize> =
                (0..g.edges.len()).filter(|&i| g.edges[i].src == cur).collect();
            let [only] = outs[..] else { continue 'guards };
            let e = &g.edges[only];
            if e.condition.is_some() || e.is_else {
                continue 'guards;
            }
            if e.dst == guard.name {
                let [(name, rhs)] = &e.assignments[..] else { continue 'guards };
                if *name != iv {
                    continue 'guards;
                }
                let step = simplify(&SymExpr::sub(rhs.clone(), SymExpr::sym(iv.clone())));
                if step != SymExpr::Const(1) {
                    continue 'guards;
                }
                back_edge = Some(only);
                break;
            }
            if !e.assignments.is_empty() {
                continue 'guards;
            }
            cur = e.dst.clone();
        }
        let Some(back_edge) = back_edge else { continue };
        let seeds: Vec<usize> = (0..g.edges.len())
            .filter(|&i| g.edges[i].dst == guard.name && i != back_edge)
            .collect();
        let [seed_edge] = seeds[..] else { continue };
        let se = &g.edges[seed_edge];
        let [(seed_name, lb)] = &se.assignments[..] else { continue };
        if *seed_name != iv {
            continue;
        }
        let lb = simplify(lb).to_string();
        // The counter is private to the loop.
        for st in &g.states {
            if st.name == guard.name || chain.contains(&st.name) {
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
            edge_sym_refs(e, &mut refs);
            if refs.contains(&iv) {
                continue 'guards;
            }
        }
        out.push(LoopShape {
            guard: guard.name.clone(),
            iv,
            lb,
            ub,
            seed_edge,
            body_edge,
            back_edge,
            exit_edge,
            exit_to: xe.dst.clone(),
            chain,
        });
    }
    out
}

fn fusable_pair(g: &Sdfg, loops: &[LoopShape]) -> Option<(usize, usize)> {
    for (ai, a) in loops.iter().enumerate() {
        for (bi, b) in loops.iter().enumerate() {
            if ai == bi || a.lb != b.lb || a.ub != b.ub {
                continue;
            }
            // An empty forwarding state must link a's exit to b's seed.
            let Some(mid) = g.state(&a.exit_to) else { continue };
            if !mid.nodes.is_empty() {
                continue;
            }
            if g.edges[b.seed_edge].src != mid.name {
                continue;
            }
            if g.edges.iter().filter(|e| e.dst == mid.name).count() != 1 {
                continue;
            }
            if g.edges.iter().filter(|e| e.src == mid.name).count() != 1 {
                continue;
            }
            if compatible(g, a, b) {
                return Some((ai, bi));
            }
        }
    }
    None
}

/// Per-container access summary within one loop body, with the counter
/// renamed to a placeholder so two loops compare structurally.
#[derive(Default)]
struct Touch {
    read: bool,
    write: bool,
    subs: BTreeSet<String>,
}

fn chain_touches(g: &Sdfg, shape: &LoopShape) -> Option<BTreeMap<String, Touch>> {
    let rename = BTreeMap::from([(shape.iv.clone(), SymExpr::sym("__fused_iv".to_string()))]);
    let mut out: BTreeMap<String, Touch> = BTreeMap::new();
    for name in &shape.chain {
        let st = g.state(name)?;
        if st.nodes.iter().any(|n| matches!(n, Node::Map(_))) {
            return None;
        }
        for e in &st.edges {
            if let Some(c) = st.endpoint_container(&e.src) {
                let t = out.entry(c.to_string()).or_default();
                t.read = true;
                if let Some(s) = &e.src_subset {
                    t.subs.insert(renamed_text(s, &rename));
                }
            }
            if let Some(c) = st.endpoint_container(&e.dst) {
                let t = out.entry(c.to_string()).or_default();
                t.write = true;
                if e.wcr.is_some() {
                    t.read = true;
                }
                if let Some(s) = &e.dst_subset {
                    t.subs.insert(renamed_text(s, &rename));
                }
            }
        }
    }
    Some(out)
}

fn renamed_text(s: &Subset, rename: &BTreeMap<String, SymExpr>) -> String {
    Subset(
        s.0.iter()
            .map(|r| crate::symbolic::SymRange {
                begin: simplify(&substitute(&r.begin, rename)),
                end: simplify(&substitute(&r.end, rename)),
                stride: simplify(&substitute(&r.stride, rename)),
            })
            .collect(),
    )
    .to_string()
}

fn compatible(g: &Sdfg, a: &LoopShape, b: &LoopShape) -> bool {
    let (Some(ta), Some(tb)) = (chain_touches(g, a), chain_touches(g, b)) else { return false };
    for (c, x) in &ta {
        let Some(y) = tb.get(c) else { continue };
        if !x.write && !y.write {
            continue;
        }
        // Shared with a write on either side: both must touch one fixed
        // element per iteration, the same one, moving with the counter.
        let all: BTreeSet<&String> = x.subs.iter().chain(y.subs.iter()).collect();
        if all.len() != 1 {
            return false;
        }
        let text = all.into_iter().next().unwrap();
        let Ok(sub) = parse_subset(text) else { return false };
        if !subset_is_point(&sub) || !injective_in(&sub, "__fused_iv") {
            return false;
        }
    }
    true
}

fn parse_subset(text: &str) -> Result<Subset, ()> {
    // Subset displays as `a, b, c` of point or `x:y:z` ranges.
    if text.is_empty() {
        return Ok(Subset::scalar());
    }
    let mut dims = Vec::new();
    for part in text.split(", ") {
        let pieces: Vec<&str> = part.split(':').collect();
        let parse = |t: &str| crate::symbolic::parse_expr(t).map_err(|_| ());
        let r = match pieces[..] {
            [p] => crate::symbolic::SymRange {
                begin: parse(p)?,
                end: parse(p)?,
                stride: SymExpr::Const(1),
            },
            [lo, hi] => crate::symbolic::SymRange {
                begin: parse(lo)?,
                end: parse(hi)?,
                stride: SymExpr::Const(1),
            },
            [lo, hi, st] => crate::symbolic::SymRange {
                begin: parse(lo)?,
                end: parse(hi)?,
                stride: parse(st)?,
            },
            _ => return Err(()),
        };
        dims.push(r);
    }
    Ok(Subset(dims))
}

/// Every counter value hits a distinct element: some dimension moves with
/// a nonzero constant step.
fn injective_in(sub: &Subset, iv: &str) -> bool {
    let next = BTreeMap::from([(
        iv.to_string(),
        SymExpr::add(SymExpr::sym(iv.to_string()), SymExpr::Const(1)),
    )]);
    sub.0.iter().any(|r| {
        let d = simplify(&r.begin);
        if !d.free_syms().contains(iv) {
            return false;
        }
        matches!(
            simplify(&SymExpr::sub(substitute(&d, &next), d.clone())),
            SymExpr::Const(c) if c != 0
        )
    })
}

/// Splices loop b into loop a's body. Returns the merged chain.
fn fuse(g: &mut Sdfg, a: &LoopShape, b: &LoopShape) -> Vec<String> {
    let rename = BTreeMap::from([(b.iv.clone(), SymExpr::sym(a.iv.clone()))]);
    for name in &b.chain {
        if let Some(st) = g.state_mut(name) {
            substitute_in_state(st, &rename);
        }
    }
    let head2 = b.chain[0].clone();
    let a2 = b.exit_to.clone();
    let mid = a.exit_to.clone();
    let g2 = b.guard.clone();

    g.edges[a.exit_edge].dst = a2;
    g.edges[a.back_edge].dst = head2;
    g.edges[a.back_edge].assignments.clear();
    let step = SymExpr::add(SymExpr::sym(a.iv.clone()), SymExpr::Const(1));
    g.edges[b.back_edge].dst = a.guard.clone();
    g.edges[b.back_edge].assignments = vec![(a.iv.clone(), step)];

    let mut drop = [b.body_edge, b.exit_edge, b.seed_edge];
    drop.sort_unstable();
    for ei in drop.into_iter().rev() {
        g.edges.remove(ei);
    }
    for name in [mid, g2] {
        let i = state_index(g, &name).unwrap();
        g.states.remove(i);
    }
    let mut chain = a.chain.clone();
    chain.extend(b.chain.iter().cloned());
    chain
}

/// Transients only touched at element [counter] within the fused body
/// become register scalars.
fn scalarize(g: &mut Sdfg, chain: &[String], iv: &str) -> u64 {
    let mut count = 0u64;
    let names: Vec<String> = g.descriptors.keys().cloned().collect();
    'names: for name in names {
        let d = &g.descriptors[&name];
        if !d.transient || d.rank() == 0 || g.results.contains(&name) {
            continue;
        }
        if super::util::global_sym_refs(g).contains(&name) || super::util::used_inside_map(g, &name)
        {
            continue;
        }
        // All accesses must sit in the chain, at exactly [counter].
        let point = Subset::indices(vec![SymExpr::sym(iv.to_string())]);
        let want = point.to_string();
        let mut write: Option<(usize, usize)> = None; // chain position, node
        let mut reads: Vec<(usize, usize)> = Vec::new(); // chain position, consumer node
        for st in &g.states {
            let pos = chain.iter().position(|c| *c == st.name);
            for n in &st.nodes {
                if n.as_access() == Some(name.as_str()) && pos.is_none() {
                    continue 'names;
                }
            }
            let Some(pos) = pos else { continue };
            for e in &st.edges {
                if st.endpoint_container(&e.src) == Some(name.as_str()) {
                    let Some(s) = &e.src_subset else { continue 'names };
                    if s.to_string() != want {
                        continue 'names;
                    }
                    let Some(x) = e.dst.node_index() else { continue 'names };
                    reads.push((pos, x));
                }
                if st.endpoint_container(&e.dst) == Some(name.as_str()) {
                    let Some(s) = &e.dst_subset else { continue 'names };
                    if s.to_string() != want || e.wcr.is_some() || write.is_some() {
                        continue 'names;
                    }
                    let Some(x) = e.dst.node_index() else { continue 'names };
                    write = Some((pos, x));
                }
            }
        }
        let Some((wpos, wnode)) = write else { continue };
        // Each read must observe the value written in its own iteration.
        for (rpos, rnode) in &reads {
            if *rpos < wpos {
                continue 'names;
            }
            if *rpos == wpos {
                let st = g.state(&chain[wpos]).unwrap();
                if !node_reaches(st.nodes.len(), &st.edges, wnode, *rnode) {
                    continue 'names;
                }
            }
        }
        let d = g.descriptors.get_mut(&name).unwrap();
        d.shape = Vec::new();
        d.storage = Storage::Register;
        d.lifetime = Lifetime::Global;
        for cname in chain {
            let st = g.state_mut(cname).unwrap();
            let (nodes, edges) = (&st.nodes, &mut st.edges);
            for e in edges {
                let src_is = match &e.src {
                    Endpoint::Node(i) => nodes[*i].as_access() == Some(name.as_str()),
                    _ => false,
                };
                if src_is {
                    e.src_subset = Some(Subset::scalar());
                }
                let dst_is = match &e.dst {
                    Endpoint::Node(i) => nodes[*i].as_access() == Some(name.as_str()),
                    _ => false,
                };
                if dst_is {
                    e.dst_subset = Some(Subset::scalar());
                }
            }
        }
        count += 1;
    }
    count
}
