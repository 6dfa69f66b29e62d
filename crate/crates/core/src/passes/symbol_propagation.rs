//! Propagates interstate symbols with a single constant-valued definition.
//!
//! A symbol assigned the same right-hand side on every transition out of
//! one state, where that right-hand side only references never-assigned
//! symbols, has one value everywhere downstream. Substituting it into every
//! dominated use lets later passes see loop bounds and indices as closed
//! expressions. The definition is deleted only when every use was safely
//! substitutable, so partial candidates are left untouched.

use super::util::{dominator_sets, edge_sym_refs, state_index, state_sym_refs};
use super::PassReport;
use crate::sdfg::{CodeExpr, Node, Sdfg, State};
use crate::symbolic::{parse_expr, substitute, SymExpr};
use std::collections::{BTreeMap, BTreeSet};

pub fn symbol_propagation(g: &mut Sdfg) -> PassReport {
    let mut report = PassReport::new("symbol-propagation");
    while propagate_one(g, &mut report) {}
    report
}

fn propagate_one(g: &mut Sdfg, report: &mut PassReport) -> bool {
    let assigned: BTreeSet<String> = g.assigned_symbols().into_iter().collect();
    let dom = dominator_sets(g);
    let mut grouped: BTreeMap<String, Vec<(usize, String)>> = BTreeMap::new();
    for (ei, e) in g.edges.iter().enumerate() {
        for (name, rhs) in &e.assignments {
            grouped.entry(name.clone()).or_default().push((ei, rhs.to_string()));
        }
    }
    'symbols: for (name, defs) in grouped {
        if g.descriptors.contains_key(&name) {
            continue;
        }
        let rhs_text = &defs[0].1;
        if defs.iter().any(|(_, r)| r != rhs_text) {
            continue;
        }
        let Ok(rhs) = parse_expr(rhs_text) else { continue };
        if rhs.free_syms().iter().any(|s| assigned.contains(s)) {
            continue;
        }
        let src = g.edges[defs[0].0].src.clone();
        if defs.iter().any(|(ei, _)| g.edges[*ei].src != src) {
            continue;
        }
        let Some(si) = state_index(g, &src) else { continue };
        // Every way out of the defining state must bind the symbol.
        let def_edges: BTreeSet<usize> = defs.iter().map(|(ei, _)| *ei).collect();
        for (ei, e) in g.edges.iter().enumerate() {
            if e.src == src && !def_edges.contains(&ei) {
                continue 'symbols;
            }
        }
        // Map parameters may not shadow the symbol.
        if g.states.iter().any(|st| shadows(&st.nodes, &name)) {
            continue;
        }
        // Global allocation context and assumptions never see transitions.
        let mut fixed = BTreeSet::new();
        for d in g.descriptors.values() {
            for dim in &d.shape {
                dim.collect_syms(&mut fixed);
            }
        }
        for a in &g.assumptions {
            a.collect_syms(&mut fixed);
        }
        if fixed.contains(&name) {
            continue;
        }
        // Every use must be dominated by the defining state (and not be in
        // it: transitions bind after the state body runs, and conditions on
        // the defining edges read the pre-transition environment).
        let mut use_states = Vec::new();
        for (ui, st) in g.states.iter().enumerate() {
            let mut refs = BTreeSet::new();
            state_sym_refs(st, &mut refs);
            if refs.contains(&name) {
                if ui == si || !dom[ui].contains(&si) {
                    continue 'symbols;
                }
                use_states.push(ui);
            }
        }
        let mut use_edges = Vec::new();
        for (ei, e) in g.edges.iter().enumerate() {
            let mut refs = BTreeSet::new();
            edge_sym_refs(e, &mut refs);
            if !refs.contains(&name) {
                continue;
            }
            if e.src == src {
                continue 'symbols;
            }
            let Some(ai) = state_index(g, &e.src) else { continue 'symbols };
            if !dom[ai].contains(&si) {
                continue 'symbols;
            }
            use_edges.push(ei);
        }
        // Code references need a code form of the value.
        if !use_states.is_empty() && CodeExpr::from_sym_expr(&rhs).is_none() {
            continue;
        }
        // Substitute and retire the definition.
        let map = BTreeMap::from([(name.clone(), rhs)]);
        for ui in &use_states {
            substitute_in_state(&mut g.states[*ui], &map);
            report.rewrites += 1;
        }
        for ei in &use_edges {
            let e = &mut g.edges[*ei];
            if let Some(c) = &e.condition {
                e.condition = Some(substitute(c, &map));
            }
            for (_, r) in &mut e.assignments {
                *r = substitute(r, &map);
            }
            report.rewrites += 1;
        }
        for ei in def_edges {
            g.edges[ei].assignments.retain(|(n, _)| *n != name);
        }
        report.symbols_eliminated += 1;
        return true;
    }
    false
}

fn shadows(nodes: &[Node], name: &str) -> bool {
    nodes.iter().any(|n| match n {
        Node::Map(m) => m.params.iter().any(|p| p == name) || shadows(&m.nodes, name),
        _ => false,
    })
}

pub(super) fn substitute_in_state(st: &mut State, map: &BTreeMap<String, SymExpr>) {
    fn level(nodes: &mut [Node], edges: &mut [crate::sdfg::Memlet], map: &BTreeMap<String, SymExpr>) {
        for e in edges {
            for sub in [&mut e.src_subset, &mut e.dst_subset].into_iter().flatten() {
                for r in &mut sub.0 {
                    r.begin = substitute(&r.begin, map);
                    r.end = substitute(&r.end, map);
                    r.stride = substitute(&r.stride, map);
                }
            }
        }
        for n in nodes {
            match n {
                Node::Tasklet(t) => {
                    for (_, code) in &mut t.code {
                        for (name, rhs) in map {
                            if let Some(with) = CodeExpr::from_sym_expr(rhs) {
                                *code = code.substitute_ref(name, &with);
                            }
                        }
                    }
                }
                Node::Map(m) => {
                    for r in &mut m.ranges {
                        r.begin = substitute(&r.begin, map);
                        r.end = substitute(&r.end, map);
                        r.stride = substitute(&r.stride, map);
                    }
                    level(&mut m.nodes, &mut m.edges, map);
                }
                Node::Access(_) => {}
            }
        }
    }
    level(&mut st.nodes, &mut st.edges, map);
}
