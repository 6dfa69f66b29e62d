//! Turns read-modify-write tasklets into write-conflict-resolved writes.
//!
//! A tasklet that reads an element, combines it with an independent value
//! through an associative-commutative operation, and writes the same
//! element back is really an update. Expressing it as one write with a
//! conflict resolution halves its memory traffic and frees map iterations
//! of that pattern from their serial dependence on the element.

use super::util::{drop_level_orphan_accesses, endpoint_container, subset_is_single};
use super::PassReport;
use crate::sdfg::{propagate_memlets, CodeBinOp, CodeExpr, Endpoint, Memlet, Node, Sdfg, Wcr};

pub fn detect_updates(g: &mut Sdfg) -> PassReport {
    let mut report = PassReport::new("detect-updates");
    for st in &mut g.states {
        rewrite_level(&mut st.nodes, &mut st.edges, &mut report);
    }
    if report.rewrites > 0 {
        propagate_memlets(g);
    }
    report
}

fn rewrite_level(nodes: &mut Vec<Node>, edges: &mut Vec<Memlet>, report: &mut PassReport) {
    while rewrite_one(nodes, edges) {
        report.rewrites += 1;
    }
    for n in nodes {
        if let Node::Map(m) = n {
            rewrite_level(&mut m.nodes, &mut m.edges, report);
        }
    }
}

fn rewrite_one(nodes: &mut Vec<Node>, edges: &mut Vec<Memlet>) -> bool {
    for ti in 0..nodes.len() {
        let Node::Tasklet(t) = &nodes[ti] else { continue };
        if t.code.len() != 1 {
            continue;
        }
        let (tgt, expr) = &t.code[0];
        // The lone write of this tasklet, to a concrete element.
        let outs: Vec<usize> = edges
            .iter()
            .enumerate()
            .filter(|(_, e)| matches!(&e.src, Endpoint::Conn(i, c) if *i == ti && c == tgt))
            .map(|(i, _)| i)
            .collect();
        let [oi] = outs[..] else { continue };
        if edges[oi].wcr.is_some() {
            continue;
        }
        let Some(container) = endpoint_container(nodes, &edges[oi].dst) else { continue };
        let container = container.to_string();
        let Some(dst_sub) = edges[oi].dst_subset.clone() else { continue };
        if !subset_is_single(&dst_sub) {
            continue;
        }
        // No other write may land in the container at this level: the
        // update reads the element at write time instead of input time,
        // so interleaved stores would change what it sees.
        let other_writes = edges.iter().enumerate().any(|(i, e)| {
            i != oi && endpoint_container(nodes, &e.dst) == Some(container.as_str())
        });
        if other_writes {
            continue;
        }
        // An input reading the same element of the same container.
        let mut found: Option<(usize, String)> = None;
        for (ii, e) in edges.iter().enumerate() {
            let Endpoint::Conn(di, conn) = &e.dst else { continue };
            if *di != ti {
                continue;
            }
            if endpoint_container(nodes, &e.src) != Some(container.as_str()) {
                continue;
            }
            let Some(src_sub) = &e.src_subset else { continue };
            if src_sub.to_string() == dst_sub.to_string() {
                found = Some((ii, conn.clone()));
                break;
            }
        }
        let Some((ii, acc)) = found else { continue };
        let Some((wcr, rest)) = split_update(expr, &acc) else { continue };
        let tgt = tgt.clone();
        edges[oi].wcr = Some(wcr);
        edges.remove(ii);
        let oi = if ii < oi { oi - 1 } else { oi };
        debug_assert!(edges[oi].wcr == Some(wcr));
        if let Node::Tasklet(t) = &mut nodes[ti] {
            t.code[0] = (tgt, rest);
            t.inputs.retain(|c| *c != acc);
        }
        drop_level_orphan_accesses(nodes, edges);
        return true;
    }
    false
}

/// Matches `acc op rest` (or `rest op acc`) at the top of the expression,
/// for associative-commutative `op`, where `rest` is independent of `acc`.
fn split_update(expr: &CodeExpr, acc: &str) -> Option<(Wcr, CodeExpr)> {
    let (wcr, a, b) = match expr {
        CodeExpr::Bin(CodeBinOp::Add, a, b) => (Wcr::Add, a, b),
        CodeExpr::Bin(CodeBinOp::Mul, a, b) => (Wcr::Mul, a, b),
        CodeExpr::Min(a, b) => (Wcr::Min, a, b),
        CodeExpr::Max(a, b) => (Wcr::Max, a, b),
        _ => return None,
    };
    let rest = match (&**a, &**b) {
        (CodeExpr::Ref(n), other) if n == acc => other,
        (other, CodeExpr::Ref(n)) if n == acc => other,
        _ => return None,
    };
    if rest.references().contains(acc) {
        return None;
    }
    Some((wcr, rest.clone()))
}
