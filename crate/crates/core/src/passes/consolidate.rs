//! Normalizes memlets: duplicate edges collapse, parallel edges between
//! the same endpoints merge into one covering subset (falling back to the
//! container's full shape when the union has no single-range form), and
//! map aggregates are recomputed from the rewritten bodies.

use super::util::{endpoint_container, full_subset};
use super::PassReport;
use crate::sdfg::{propagate_memlets, Memlet, Node, Sdfg};
use crate::symbolic::{union_ranges, Assumptions, Subset};

pub fn memlet_consolidation(g: &mut Sdfg) -> PassReport {
    let mut report = PassReport::new("memlet-consolidation");
    let asm = Assumptions::new(g.assumptions.clone()).unwrap_or_default();
    let descriptors = g.descriptors.clone();
    for st in &mut g.states {
        consolidate_level(&mut st.nodes, &mut st.edges, &descriptors, &asm, &mut report);
    }
    let before = g.states.clone();
    propagate_memlets(g);
    if g.states != before {
        report.rewrites += 1;
    }
    report
}

fn edge_key(e: &Memlet) -> String {
    format!(
        "{:?}|{:?}|{}|{}|{:?}",
        e.src,
        e.dst,
        e.src_subset.as_ref().map(|s| s.to_string()).unwrap_or_default(),
        e.dst_subset.as_ref().map(|s| s.to_string()).unwrap_or_default(),
        e.wcr
    )
}

fn consolidate_level(
    nodes: &mut Vec<Node>,
    edges: &mut Vec<Memlet>,
    descriptors: &std::collections::BTreeMap<String, crate::sdfg::DataDescriptor>,
    asm: &Assumptions,
    report: &mut PassReport,
) {
    // Exact duplicates carry no extra information.
    let mut seen = std::collections::BTreeSet::new();
    let before = edges.len();
    edges.retain(|e| seen.insert(edge_key(e)));
    report.rewrites += (before - edges.len()) as u64;

    // Parallel single-sided edges merge; a failed union widens to the
    // whole container.
    loop {
        let mut merged = false;
        'outer: for i in 0..edges.len() {
            for j in (i + 1)..edges.len() {
                let (a, b) = (&edges[i], &edges[j]);
                if a.src != b.src || a.dst != b.dst || a.wcr != b.wcr {
                    continue;
                }
                // Only one-sided data edges (reads into scopes or writes
                // out of them); copies pair elements and cannot merge.
                let single_sided = |e: &Memlet| e.src_subset.is_some() != e.dst_subset.is_some();
                if !single_sided(a) || !single_sided(b) {
                    continue;
                }
                let container = endpoint_container(nodes, &a.src)
                    .or_else(|| endpoint_container(nodes, &a.dst))
                    .map(str::to_string);
                let Some(container) = container else { continue };
                let Some(desc) = descriptors.get(&container) else { continue };
                let pick = |e: &Memlet| e.src_subset.clone().or_else(|| e.dst_subset.clone());
                let (Some(sa), Some(sb)) = (pick(a), pick(b)) else { continue };
                let union = union_subsets(&sa, &sb, asm).unwrap_or_else(|| full_subset(desc));
                let on_src = a.src_subset.is_some();
                if on_src {
                    edges[i].src_subset = Some(union);
                } else {
                    edges[i].dst_subset = Some(union);
                }
                edges.remove(j);
                report.rewrites += 1;
                merged = true;
                break 'outer;
            }
        }
        if !merged {
            break;
        }
    }

    for n in nodes {
        if let Node::Map(m) = n {
            consolidate_level(&mut m.nodes, &mut m.edges, descriptors, asm, report);
        }
    }
}

fn union_subsets(a: &Subset, b: &Subset, asm: &Assumptions) -> Option<Subset> {
    if a.0.len() != b.0.len() {
        return None;
    }
    let mut dims = Vec::with_capacity(a.0.len());
    for (ra, rb) in a.0.iter().zip(&b.0) {
        dims.push(union_ranges(ra, rb, asm).ok()?);
    }
    Some(Subset(dims))
}
