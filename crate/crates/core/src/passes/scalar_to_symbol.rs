//! Promotes integer scalar containers to interstate symbols.
//!
//! A transient i64 scalar written exactly once, by a no-input tasklet whose
//! code has an integer symbolic form over stable symbols, can instead be
//! assigned on every transition leaving the defining state. Reads through
//! tasklet inputs become direct symbol references; reads feeding copies
//! become tiny `out = name` tasklets. Promoted names stay out of the
//! declared symbol list because they are defined, not free.

use super::util::{drop_orphan_accesses, stable_symbols, used_inside_map};
use super::PassReport;
use crate::sdfg::{CodeExpr, Endpoint, Node, Sdfg, Tasklet};
use crate::symbolic::SymExpr;
use crate::value::ElemType;

pub fn scalar_to_symbol(g: &mut Sdfg) -> PassReport {
    let mut report = PassReport::new("scalar-to-symbol");
    let mut fresh = 0usize;
    while let Some(c) = find_candidate(g) {
        promote(g, &c, &mut fresh);
        report.rewrites += 1;
        report.descriptors_eliminated += 1;
    }
    report
}

struct Candidate {
    name: String,
    def_state: usize,
    tasklet_node: usize,
    access_node: usize,
    value: SymExpr,
}

fn find_candidate(g: &Sdfg) -> Option<Candidate> {
    let stable = stable_symbols(g);
    'containers: for (name, desc) in &g.descriptors {
        if !desc.transient
            || !desc.is_scalar()
            || desc.elem != ElemType::I64
            || g.results.contains(name)
            || used_inside_map(g, name)
        {
            continue;
        }
        // Exactly one write, from a tasklet connector, at state top level.
        let mut def: Option<(usize, usize, usize)> = None; // state, edge, access node
        for (si, st) in g.states.iter().enumerate() {
            for (ei, e) in st.edges.iter().enumerate() {
                if st.endpoint_container(&e.dst) == Some(name.as_str()) {
                    if def.is_some() {
                        continue 'containers;
                    }
                    let Endpoint::Node(ai) = e.dst else { continue 'containers };
                    def = Some((si, ei, ai));
                }
            }
        }
        let (si, ei, ai) = def?;
        let st = &g.states[si];
        let e = &st.edges[ei];
        if e.wcr.is_some() {
            continue;
        }
        let Endpoint::Conn(ti, ref conn) = e.src else { continue };
        let Node::Tasklet(t) = &st.nodes[ti] else { continue };
        if !t.inputs.is_empty() || t.outputs.len() != 1 || t.code.len() != 1 {
            continue;
        }
        if t.code[0].0 != *conn {
            continue;
        }
        let Some(value) = t.code[0].1.to_sym_expr() else { continue };
        // The value must be stable at every later read: constants and
        // never-reassigned symbols only.
        if !value.free_syms().iter().all(|s| stable.contains(s)) {
            continue;
        }
        // The defining tasklet must have no other edges, and the written
        // access node must not be read inside the same state (ordering
        // against the promotion point would be lost).
        let t_edges = st
            .edges
            .iter()
            .filter(|m| m.src.node_index() == Some(ti) || m.dst.node_index() == Some(ti))
            .count();
        if t_edges != 1 {
            continue;
        }
        let a_edges = st
            .edges
            .iter()
            .filter(|m| m.src.node_index() == Some(ai) || m.dst.node_index() == Some(ai))
            .count();
        if a_edges != 1 {
            continue;
        }
        if st.nodes.iter().enumerate().any(|(i, n)| i != ai && n.as_access() == Some(name)) {
            continue;
        }
        // Reads must be rewritable: tasklet inputs or copy sources.
        if g.out_edges(&st.name).is_empty() && container_is_read(g, name) {
            continue;
        }
        for (ri, rst) in g.states.iter().enumerate() {
            for re in &rst.edges {
                if rst.endpoint_container(&re.src) != Some(name.as_str()) {
                    continue;
                }
                if ri == si {
                    continue 'containers;
                }
                match &re.dst {
                    Endpoint::Conn(..) | Endpoint::Node(_) => {}
                    Endpoint::Boundary(_) => continue 'containers,
                }
            }
        }
        return Some(Candidate {
            name: name.clone(),
            def_state: si,
            tasklet_node: ti,
            access_node: ai,
            value,
        });
    }
    None
}

fn container_is_read(g: &Sdfg, name: &str) -> bool {
    g.states.iter().any(|st| {
        st.edges.iter().any(|e| st.endpoint_container(&e.src) == Some(name))
    })
}

fn promote(g: &mut Sdfg, c: &Candidate, fresh: &mut usize) {
    // Drop the defining tasklet and access node.
    {
        let st = &mut g.states[c.def_state];
        let remove = std::collections::BTreeSet::from([c.tasklet_node, c.access_node]);
        super::util::remove_nodes(st, &remove);
    }
    // Assign the value on every transition out of the defining state.
    let def_name = g.states[c.def_state].name.clone();
    for e in &mut g.edges {
        if e.src == def_name {
            e.assignments.push((c.name.clone(), c.value.clone()));
        }
    }
    // Rewrite reads.
    for st in &mut g.states {
        let mut new_tasklets: Vec<(Tasklet, usize)> = Vec::new(); // tasklet, edge to retarget
        let mut drop_edges: Vec<usize> = Vec::new();
        for (ei, e) in st.edges.iter().enumerate() {
            let is_read = match &e.src {
                Endpoint::Node(i) => st.nodes[*i].as_access() == Some(c.name.as_str()),
                _ => false,
            };
            if !is_read {
                continue;
            }
            match &e.dst {
                Endpoint::Conn(ti, conn) => {
                    let (ti, conn) = (*ti, conn.clone());
                    drop_edges.push(ei);
                    if let Node::Tasklet(t) = &mut st.nodes[ti] {
                        let with = CodeExpr::Ref(c.name.clone());
                        for (_, code) in &mut t.code {
                            *code = code.substitute_ref(&conn, &with);
                        }
                        t.inputs.retain(|i| *i != conn);
                    }
                }
                Endpoint::Node(_) => {
                    // A copy out of the scalar: replace the source with a
                    // one-line tasklet producing the symbol's value.
                    *fresh += 1;
                    new_tasklets.push((
                        Tasklet {
                            name: format!("t_sym{}", *fresh),
                            inputs: Vec::new(),
                            outputs: vec!["out".to_string()],
                            code: vec![("out".to_string(), CodeExpr::Ref(c.name.clone()))],
                        },
                        ei,
                    ));
                }
                Endpoint::Boundary(_) => unreachable!("screened in find_candidate"),
            }
        }
        for (t, ei) in new_tasklets {
            st.nodes.push(Node::Tasklet(t));
            let ni = st.nodes.len() - 1;
            let e = &mut st.edges[ei];
            e.src = Endpoint::Conn(ni, "out".to_string());
            e.src_subset = None;
        }
        let mut i = 0usize;
        st.edges.retain(|_| {
            let keep = !drop_edges.contains(&i);
            i += 1;
            keep
        });
        drop_orphan_accesses(st);
    }
    g.descriptors.remove(&c.name);
}
