//! Removes computation whose results no execution can ever observe.
//!
//! A write is observable when it targets a caller-visible container, a
//! result, a container some later state (or a later transition condition)
//! may read before it is fully overwritten, or a container read again
//! inside the same state. Everything not feeding an observable write is
//! deleted, then transient descriptors with no remaining accesses are
//! dropped. Map bodies are treated as opaque: their writes stay.

use super::util::{
    edge_sym_refs, global_sym_refs, state_reads_writes, subset_is_full, used_inside_map,
};
use super::PassReport;
use crate::sdfg::{Endpoint, Node, Sdfg};
use std::collections::{BTreeMap, BTreeSet};

pub fn dead_dataflow_elimination(g: &mut Sdfg) -> PassReport {
    let mut report = PassReport::new("dead-dataflow");
    while sweep(g, &mut report) {}

    // Transient containers nobody touches any more can go entirely.
    let protected = global_sym_refs(g);
    let accessed = all_accessed(g);
    let names: Vec<String> = g.descriptors.keys().cloned().collect();
    for name in names {
        let d = &g.descriptors[&name];
        if !d.transient
            || g.results.contains(&name)
            || accessed.contains(&name)
            || protected.contains(&name)
            || used_inside_map(g, &name)
        {
            continue;
        }
        let rank = d.rank();
        g.descriptors.remove(&name);
        report.descriptors_eliminated += 1;
        if rank >= 1 {
            report.arrays_eliminated += 1;
        }
    }
    report
}

fn all_accessed(g: &Sdfg) -> BTreeSet<String> {
    fn level(nodes: &[Node], out: &mut BTreeSet<String>) {
        for n in nodes {
            match n {
                Node::Access(c) => {
                    out.insert(c.clone());
                }
                Node::Map(m) => level(&m.nodes, out),
                Node::Tasklet(_) => {}
            }
        }
    }
    let mut out = BTreeSet::new();
    for st in &g.states {
        level(&st.nodes, &mut out);
    }
    out
}

fn sweep(g: &mut Sdfg, report: &mut PassReport) -> bool {
    let containers: BTreeSet<String> = g.descriptors.keys().cloned().collect();
    let index: BTreeMap<String, usize> =
        g.states.iter().enumerate().map(|(i, s)| (s.name.clone(), i)).collect();
    let n = g.states.len();

    let mut reads = vec![BTreeSet::new(); n];
    let mut kills = vec![BTreeSet::new(); n];
    for (i, st) in g.states.iter().enumerate() {
        let (r, _) = state_reads_writes(st);
        reads[i] = r.intersection(&containers).cloned().collect();
        for e in &st.edges {
            let from_map = matches!(
                e.src,
                Endpoint::Node(j) if matches!(st.nodes.get(j), Some(Node::Map(_)))
            );
            if from_map || e.wcr.is_some() {
                continue;
            }
            if let Some(c) = st.endpoint_container(&e.dst) {
                if let (Some(d), Some(sub)) = (g.descriptors.get(c), &e.dst_subset) {
                    if subset_is_full(d, sub) {
                        kills[i].insert(c.to_string());
                    }
                }
            }
        }
    }

    // Containers that may still be read after leaving each state.
    let mut needed: Vec<BTreeSet<String>> = vec![BTreeSet::new(); n];
    loop {
        let mut changed = false;
        for e in &g.edges {
            let (Some(&s), Some(&t)) = (index.get(&e.src), index.get(&e.dst)) else { continue };
            let mut add: BTreeSet<String> = BTreeSet::new();
            let mut refs = BTreeSet::new();
            edge_sym_refs(e, &mut refs);
            add.extend(refs.intersection(&containers).cloned());
            add.extend(reads[t].iter().cloned());
            add.extend(needed[t].difference(&kills[t]).cloned());
            for c in add {
                changed |= needed[s].insert(c);
            }
        }
        if !changed {
            break;
        }
    }

    let mut removed_any = false;
    for (si, st) in g.states.iter_mut().enumerate() {
        // A write is observable intra-state when the container is read by
        // any edge of the state (conservative: ordering not consulted).
        let mut intra_read: BTreeSet<&str> = BTreeSet::new();
        for e in &st.edges {
            if let Endpoint::Node(i) = e.src {
                if let Some(Node::Access(c)) = st.nodes.get(i) {
                    intra_read.insert(c);
                }
            }
            if e.wcr.is_some() {
                if let Endpoint::Node(i) = e.dst {
                    if let Some(Node::Access(c)) = st.nodes.get(i) {
                        intra_read.insert(c);
                    }
                }
            }
        }
        let mut live = vec![false; st.nodes.len()];
        for e in &st.edges {
            let Endpoint::Node(di) = e.dst else { continue };
            let Some(Node::Access(c)) = st.nodes.get(di) else { continue };
            let visible = g
                .descriptors
                .get(c)
                .map(|d| !d.transient)
                .unwrap_or(true)
                || g.results.contains(c)
                || needed[si].contains(c)
                || intra_read.contains(c.as_str());
            let from_map =
                matches!(e.src, Endpoint::Node(j) if matches!(st.nodes.get(j), Some(Node::Map(_))));
            if visible || from_map {
                live[di] = true;
            }
        }
        loop {
            let mut changed = false;
            for e in &st.edges {
                let (Some(a), Some(b)) = (e.src.node_index(), e.dst.node_index()) else {
                    continue;
                };
                if live[b] && !live[a] {
                    live[a] = true;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        let dead: BTreeSet<usize> = (0..st.nodes.len()).filter(|&i| !live[i]).collect();
        if !dead.is_empty() {
            report.rewrites += dead.len() as u64;
            super::util::remove_nodes(st, &dead);
            removed_any = true;
        }
    }
    removed_any
}
