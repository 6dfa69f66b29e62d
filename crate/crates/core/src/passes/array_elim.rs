//! Eliminates redundant containers by forwarding data past copies.
//!
//! Four rewrites cooperate toward the same goal, cheapest first:
//!
//! 1. identity copies (same container, same subset) are deleted outright;
//! 2. a transient written once by a copy and only read in that state has
//!    its reads retargeted to the copy's source (input forwarding);
//! 3. a transient written once by a tasklet and read once by a copy passes
//!    the tasklet output straight to the copy's destination (output
//!    forwarding);
//! 4. a transient whose lone write is a whole-container or one-element
//!    copy, and whose reads are all dominated by that write, disappears:
//!    every read goes to the copy's source (interstate elimination).
//!
//! Forwarded transients keep their descriptors here; the dead-dataflow
//! pass collects descriptors that end up without accesses. Only rewrite 4
//! deletes a descriptor itself, so this pass's elimination counts describe
//! arrays, not bookkeeping scalars.

use super::util::{
    dominator_sets, drop_orphan_accesses, global_sym_refs, node_reaches, reachable_sets,
    subset_is_full, subset_is_single, used_inside_map,
};
use super::PassReport;
use crate::sdfg::{Endpoint, Node, Sdfg};
use crate::symbolic::{simplify, Subset};
use std::collections::BTreeSet;

pub fn array_elimination(g: &mut Sdfg) -> PassReport {
    let mut report = PassReport::new("array-elimination");
    loop {
        if delete_identity_copy(g) || forward_input(g) || forward_output(g) {
            report.rewrites += 1;
            continue;
        }
        if let Some(rank) = eliminate_interstate(g) {
            report.rewrites += 1;
            report.descriptors_eliminated += 1;
            if rank >= 1 {
                report.arrays_eliminated += 1;
            }
            continue;
        }
        break;
    }
    report
}

/// Where a container lives in the graph: access-node sites at state top
/// level, indexed for rewriting.
struct Sites {
    /// (state index, node index) of every access node.
    nodes: Vec<(usize, usize)>,
    /// (state index, edge index) of every edge writing the container.
    writes: Vec<(usize, usize)>,
    /// (state index, edge index) of every edge reading the container.
    reads: Vec<(usize, usize)>,
}

fn sites_of(g: &Sdfg, name: &str) -> Sites {
    let mut s = Sites { nodes: Vec::new(), writes: Vec::new(), reads: Vec::new() };
    for (si, st) in g.states.iter().enumerate() {
        for (ni, n) in st.nodes.iter().enumerate() {
            if n.as_access() == Some(name) {
                s.nodes.push((si, ni));
            }
        }
        for (ei, e) in st.edges.iter().enumerate() {
            if st.endpoint_container(&e.src) == Some(name) {
                s.reads.push((si, ei));
            }
            if st.endpoint_container(&e.dst) == Some(name) {
                s.writes.push((si, ei));
            }
        }
    }
    s
}

fn eligible_transient(g: &Sdfg, name: &str) -> bool {
    let Some(d) = g.descriptors.get(name) else { return false };
    d.transient
        && !g.results.contains(&name.to_string())
        && !used_inside_map(g, name)
        && !global_sym_refs(g).contains(name)
}

fn sub_text(s: &Subset) -> String {
    Subset(
        s.0.iter()
            .map(|r| crate::symbolic::SymRange {
                begin: simplify(&r.begin),
                end: simplify(&r.end),
                stride: simplify(&r.stride),
            })
            .collect(),
    )
    .to_string()
}

/// Writers of a container within one state, as the node indices whose
/// processing performs the write (maps write while they run).
fn writer_nodes(st: &crate::sdfg::State, name: &str) -> BTreeSet<usize> {
    let mut out = BTreeSet::new();
    for e in &st.edges {
        if st.endpoint_container(&e.dst) != Some(name) {
            continue;
        }
        let at = match e.src {
            Endpoint::Node(si) if matches!(st.nodes.get(si), Some(Node::Map(_))) => si,
            _ => e.dst.node_index().unwrap_or(usize::MAX),
        };
        out.insert(at);
    }
    out
}

// ------------------------------------------------------------- rewrite 1

fn delete_identity_copy(g: &mut Sdfg) -> bool {
    for st in &mut g.states {
        for ei in 0..st.edges.len() {
            let e = &st.edges[ei];
            if e.wcr.is_some() {
                continue;
            }
            let (Endpoint::Node(a), Endpoint::Node(b)) = (&e.src, &e.dst) else { continue };
            let (a, b) = (*a, *b);
            if a == b {
                continue;
            }
            let (Some(ca), Some(cb)) = (st.nodes[a].as_access(), st.nodes[b].as_access()) else {
                continue;
            };
            if ca != cb {
                continue;
            }
            let (Some(ss), Some(ds)) = (&e.src_subset, &e.dst_subset) else { continue };
            if sub_text(ss) != sub_text(ds) {
                continue;
            }
            // The destination must hold no other incoming value, and no
            // third writer may sit between the two nodes.
            let b_ins = st
                .edges
                .iter()
                .filter(|m| m.dst.node_index() == Some(b))
                .count();
            if b_ins != 1 {
                continue;
            }
            let ca = ca.to_string();
            if !writer_nodes(st, &ca).into_iter().all(|w| w == a || w == b) {
                continue;
            }
            st.edges.remove(ei);
            for m in &mut st.edges {
                if m.src.node_index() == Some(b) {
                    match &mut m.src {
                        Endpoint::Node(i) | Endpoint::Conn(i, _) => *i = a,
                        Endpoint::Boundary(_) => {}
                    }
                }
            }
            drop_orphan_accesses(st);
            return true;
        }
    }
    false
}

// ------------------------------------------------------------- rewrite 2

fn forward_input(g: &mut Sdfg) -> bool {
    let names: Vec<String> = g.descriptors.keys().cloned().collect();
    'names: for name in names {
        if !eligible_transient(g, &name) {
            continue;
        }
        let sites = sites_of(g, &name);
        let [(si, ni)] = sites.nodes[..] else { continue };
        let [(ws, wi)] = sites.writes[..] else { continue };
        if ws != si {
            continue;
        }
        let st = &g.states[si];
        let copy = &st.edges[wi];
        if copy.wcr.is_some() || copy.dst.node_index() != Some(ni) {
            continue;
        }
        let Endpoint::Node(src_node) = copy.src else { continue };
        let Some(src_name) = st.nodes[src_node].as_access().map(String::from) else { continue };
        if src_name == name {
            continue;
        }
        let (Some(sigma), Some(dsub)) = (&copy.src_subset, &copy.dst_subset) else { continue };
        let desc = &g.descriptors[&name];
        if !subset_is_full(desc, dsub) {
            continue;
        }
        let sigma = sigma.clone();
        let broadcast = subset_is_single(&sigma);
        let shapes_match = {
            let src_desc = &g.descriptors[&src_name];
            src_desc.shape.len() == desc.shape.len()
                && src_desc
                    .shape
                    .iter()
                    .zip(&desc.shape)
                    .all(|(x, y)| simplify(x).to_string() == simplify(y).to_string())
                && subset_is_full(src_desc, &sigma)
        };
        if !broadcast && !shapes_match {
            continue;
        }
        // With a single access node, every read is a consumer edge here.
        // Plan each consumer's rewrite and check ordering against other
        // writers of the source container.
        let consumers: Vec<usize> = (0..st.edges.len())
            .filter(|&i| i != wi && st.edges[i].src.node_index() == Some(ni))
            .collect();
        let mut plan: Vec<(usize, Subset)> = Vec::new();
        let writers = writer_nodes(st, &src_name);
        for &ci in &consumers {
            let e = &st.edges[ci];
            let tau = e.src_subset.clone().unwrap_or_else(Subset::scalar);
            let composed = if broadcast { sigma.clone() } else { tau };
            let consumer_node = match e.dst.node_index() {
                Some(x) => x,
                None => continue 'names,
            };
            // Self-copies must be safe under element-wise execution.
            if st.endpoint_container(&e.dst) == Some(src_name.as_str())
                && !subset_is_single(&composed)
            {
                let Some(ds) = &e.dst_subset else { continue 'names };
                if sub_text(&composed) != sub_text(ds) {
                    continue 'names;
                }
            }
            for &w in &writers {
                if w == src_node || w == consumer_node {
                    continue;
                }
                let nn = st.nodes.len();
                if !(node_reaches(nn, &st.edges, w, ni)
                    || node_reaches(nn, &st.edges, consumer_node, w))
                {
                    continue 'names;
                }
            }
            plan.push((ci, composed));
        }
        let st = &mut g.states[si];
        for (ci, composed) in plan {
            st.edges[ci].src = Endpoint::Node(src_node);
            st.edges[ci].src_subset = Some(composed);
        }
        st.edges.remove(wi);
        drop_orphan_accesses(st);
        return true;
    }
    false
}

// ------------------------------------------------------------- rewrite 3

fn forward_output(g: &mut Sdfg) -> bool {
    let names: Vec<String> = g.descriptors.keys().cloned().collect();
    for name in names {
        if !eligible_transient(g, &name) {
            continue;
        }
        let sites = sites_of(g, &name);
        let [(si, ni)] = sites.nodes[..] else { continue };
        let ([(ws, wi)], [(rs, ri)]) = (&sites.writes[..], &sites.reads[..]) else { continue };
        let (ws, wi, rs, ri) = (*ws, *wi, *rs, *ri);
        if ws != si || rs != si || wi == ri {
            continue;
        }
        let st = &g.states[si];
        let we = &st.edges[wi];
        let re = &st.edges[ri];
        if we.wcr.is_some() || we.dst.node_index() != Some(ni) {
            continue;
        }
        if !matches!(we.src, Endpoint::Conn(..)) {
            continue;
        }
        let desc = &g.descriptors[&name];
        let full = we.dst_subset.as_ref().map(|s| subset_is_full(desc, s)).unwrap_or(false);
        let read_full =
            re.src_subset.as_ref().map(|s| subset_is_full(desc, s)).unwrap_or(false);
        if !full || !read_full {
            continue;
        }
        let Endpoint::Node(y) = re.dst else { continue };
        if y == ni {
            continue;
        }
        let (dst_subset, wcr) = (re.dst_subset.clone(), re.wcr);
        let st = &mut g.states[si];
        st.edges[wi].dst = Endpoint::Node(y);
        st.edges[wi].dst_subset = dst_subset;
        st.edges[wi].wcr = wcr;
        st.edges.remove(ri);
        drop_orphan_accesses(st);
        return true;
    }
    false
}

// ------------------------------------------------------------- rewrite 4

fn eliminate_interstate(g: &mut Sdfg) -> Option<usize> {
    let names: Vec<String> = g.descriptors.keys().cloned().collect();
    let dom = dominator_sets(g);
    let reach = reachable_sets(g);
    'names: for name in names {
        if !eligible_transient(g, &name) {
            continue;
        }
        let sites = sites_of(g, &name);
        let [(ws, wi)] = sites.writes[..] else { continue };
        let st = &g.states[ws];
        let copy = &st.edges[wi];
        if copy.wcr.is_some() {
            continue;
        }
        let Endpoint::Node(dt) = copy.dst else { continue };
        let Endpoint::Node(src_node) = copy.src else { continue };
        let Some(src_name) = st.nodes[src_node].as_access().map(String::from) else { continue };
        if src_name == name {
            continue;
        }
        let (Some(sigma), Some(dsub)) = (&copy.src_subset, &copy.dst_subset) else { continue };
        let desc = &g.descriptors[&name];
        if !subset_is_full(desc, dsub) {
            continue;
        }
        let sigma = sigma.clone();
        let broadcast = subset_is_single(&sigma);
        let shapes_match = {
            let src_desc = &g.descriptors[&src_name];
            src_desc.shape.len() == desc.shape.len()
                && src_desc
                    .shape
                    .iter()
                    .zip(&desc.shape)
                    .all(|(x, y)| simplify(x).to_string() == simplify(y).to_string())
                && subset_is_full(src_desc, &sigma)
        };
        if !broadcast && !shapes_match {
            continue;
        }
        // The source must be stable once copied: no writes in the write
        // state except into the copy's own source node, none in any state
        // reachable afterwards.
        if !writer_nodes(st, &src_name).into_iter().all(|w| w == src_node) {
            continue;
        }
        for z in &reach[ws] {
            if *z == ws {
                continue;
            }
            if !writer_nodes(&g.states[*z], &src_name).is_empty() {
                continue 'names;
            }
        }
        // Every read must happen strictly after the copy.
        for (rs, ri) in &sites.reads {
            if *rs == ws {
                if *ri == wi {
                    continue 'names;
                }
                let e = &st.edges[*ri];
                let Some(consumer) = e.dst.node_index() else { continue 'names };
                if e.src.node_index() != Some(dt)
                    || !node_reaches(st.nodes.len(), &st.edges, dt, consumer)
                {
                    continue 'names;
                }
            } else if !dom[*rs].contains(&ws) {
                continue 'names;
            }
        }
        // Compose subsets and check self-copy safety.
        let mut plan: Vec<(usize, usize, Subset)> = Vec::new();
        for (rs, ri) in &sites.reads {
            let e = &g.states[*rs].edges[*ri];
            let tau = e.src_subset.clone().unwrap_or_else(Subset::scalar);
            let composed = if broadcast { sigma.clone() } else { tau };
            if g.states[*rs].endpoint_container(&e.dst) == Some(src_name.as_str())
                && !subset_is_single(&composed)
            {
                let Some(ds) = &e.dst_subset else { continue 'names };
                if sub_text(&composed) != sub_text(ds) {
                    continue 'names;
                }
            }
            plan.push((*rs, *ri, composed));
        }
        // Rewrite reads, delete the copy, drop the descriptor.
        for (rs, ri, composed) in plan {
            let src_idx = if rs == ws {
                src_node
            } else {
                match g.states[rs].find_access(&src_name) {
                    Some(i) => i,
                    None => {
                        g.states[rs].nodes.push(Node::Access(src_name.clone()));
                        g.states[rs].nodes.len() - 1
                    }
                }
            };
            let e = &mut g.states[rs].edges[ri];
            e.src = Endpoint::Node(src_idx);
            e.src_subset = Some(composed);
        }
        let st = &mut g.states[ws];
        st.edges.remove(wi);
        for s in &mut g.states {
            drop_orphan_accesses(s);
        }
        let rank = g.descriptors[&name].rank();
        g.descriptors.remove(&name);
        return Some(rank);
    }
    None
}
