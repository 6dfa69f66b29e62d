//! Derives the aggregate edges attached to map nodes from the per-iteration
//! edges inside them: substitute each map parameter by its range endpoints,
//! union across edges, and attach one edge per container and direction.
//!
//! Aggregates are declarative (they carry no data movement of their own), so
//! over-approximation is sound; a union that fits no single strided range
//! falls back to the whole dimension.

use super::{Endpoint, MapScope, Memlet, Node, Sdfg, Wcr};
use crate::symbolic::{
    prove, simplify, substitute, union_ranges, Assumptions, CmpKind, Subset, SymExpr, SymRange,
    Truth,
};
use std::collections::BTreeMap;

/// Extends `asm` with `begin <= p <= end` for each parameter of `m`.
fn param_assumptions(m: &MapScope, asm: &Assumptions) -> Assumptions {
    let mut out = asm.clone();
    for (p, r) in m.params.iter().zip(&m.ranges) {
        let p = SymExpr::sym(p);
        let _ = out.assume(SymExpr::cmp(CmpKind::Le, r.begin.clone(), p.clone()));
        let _ = out.assume(SymExpr::cmp(CmpKind::Le, p, r.end.clone()));
    }
    out
}

pub fn propagate_memlets(sdfg: &mut Sdfg) {
    let asm = Assumptions::new(sdfg.assumptions.clone()).unwrap_or_default();
    let shapes: BTreeMap<String, Vec<SymExpr>> = sdfg
        .descriptors
        .iter()
        .map(|(k, d)| (k.clone(), d.shape.clone()))
        .collect();
    for st in &mut sdfg.states {
        propagate_level(&mut st.nodes, &mut st.edges, false, &shapes, &asm);
    }
}

fn propagate_level(
    nodes: &mut Vec<Node>,
    edges: &mut Vec<Memlet>,
    in_map: bool,
    shapes: &BTreeMap<String, Vec<SymExpr>>,
    asm: &Assumptions,
) {
    // Innermost first, so nested aggregates are in place before this level
    // reads them. Inner levels may assume each parameter stays inside its
    // range.
    for n in nodes.iter_mut() {
        if let Node::Map(m) = n {
            let inner = param_assumptions(m, asm);
            propagate_level(&mut m.nodes, &mut m.edges, true, shapes, &inner);
        }
    }

    let map_indices: Vec<usize> = nodes
        .iter()
        .enumerate()
        .filter(|(_, n)| matches!(n, Node::Map(_)))
        .map(|(i, _)| i)
        .collect();

    for mi in map_indices {
        let (reads, writes) = {
            let Node::Map(m) = &nodes[mi] else { unreachable!() };
            boundary_summary(m, shapes, asm)
        };

        // Remember which nodes previous aggregates used, then drop them.
        let mut prev_in: BTreeMap<String, Endpoint> = BTreeMap::new();
        let mut prev_out: BTreeMap<String, Endpoint> = BTreeMap::new();
        edges.retain(|e| {
            if matches!(e.dst, Endpoint::Node(i) if i == mi) {
                if let Some(c) = endpoint_name(nodes, &e.src) {
                    prev_in.insert(c, e.src.clone());
                }
                return false;
            }
            if matches!(e.src, Endpoint::Node(i) if i == mi) {
                if let Some(c) = endpoint_name(nodes, &e.dst) {
                    prev_out.insert(c, e.dst.clone());
                }
                return false;
            }
            true
        });

        let mut read_claims: BTreeMap<String, Endpoint> = BTreeMap::new();
        for (container, subset) in reads {
            let src = prev_in
                .remove(&container)
                .or_else(|| pick_access(nodes, &container, prev_out.get(&container)))
                .unwrap_or_else(|| make_endpoint(nodes, &container, in_map));
            read_claims.insert(container, src.clone());
            edges.push(Memlet {
                src,
                dst: Endpoint::Node(mi),
                src_subset: Some(subset),
                dst_subset: None,
                wcr: None,
            });
        }
        for (container, (subset, wcr)) in writes {
            // Reuse an existing access node unless the read side claimed it;
            // reading and writing the same node would make a cycle.
            let dst = prev_out
                .remove(&container)
                .or_else(|| pick_access(nodes, &container, read_claims.get(&container)))
                .unwrap_or_else(|| make_endpoint(nodes, &container, in_map));
            edges.push(Memlet {
                src: Endpoint::Node(mi),
                dst,
                src_subset: None,
                dst_subset: Some(subset),
                wcr,
            });
        }
    }
}

fn endpoint_name(nodes: &[Node], e: &Endpoint) -> Option<String> {
    match e {
        Endpoint::Node(i) => nodes.get(*i).and_then(|n| n.as_access()).map(str::to_string),
        Endpoint::Boundary(c) => Some(c.clone()),
        Endpoint::Conn(..) => None,
    }
}

/// An existing access node usable for the read side: any access of the
/// container not already claimed as the map's write target.
fn pick_access(nodes: &[Node], container: &str, write_side: Option<&Endpoint>) -> Option<Endpoint> {
    let claimed = match write_side {
        Some(Endpoint::Node(i)) => Some(*i),
        _ => None,
    };
    nodes
        .iter()
        .position(|n| n.as_access() == Some(container))
        .filter(|i| Some(*i) != claimed)
        .map(Endpoint::Node)
}

/// Inside a map the boundary itself is the natural attachment point; at state
/// level a fresh access node is created.
fn make_endpoint(nodes: &mut Vec<Node>, container: &str, in_map: bool) -> Endpoint {
    if in_map {
        Endpoint::Boundary(container.to_string())
    } else {
        nodes.push(Node::Access(container.to_string()));
        Endpoint::Node(nodes.len() - 1)
    }
}

type Reads = BTreeMap<String, Subset>;
type Writes = BTreeMap<String, (Subset, Option<Wcr>)>;

fn boundary_summary(
    m: &MapScope,
    shapes: &BTreeMap<String, Vec<SymExpr>>,
    asm: &Assumptions,
) -> (Reads, Writes) {
    let mut reads: Reads = BTreeMap::new();
    let mut writes: Writes = BTreeMap::new();
    for e in &m.edges {
        if let (Endpoint::Boundary(c), Some(sub)) = (&e.src, &e.src_subset) {
            let p = propagate_subset(sub, m, shapes.get(c), asm);
            reads
                .entry(c.clone())
                .and_modify(|acc| *acc = union_subsets(acc, &p, shapes.get(c), asm))
                .or_insert(p);
        }
        if let (Endpoint::Boundary(c), Some(sub)) = (&e.dst, &e.dst_subset) {
            let p = propagate_subset(sub, m, shapes.get(c), asm);
            writes
                .entry(c.clone())
                .and_modify(|(acc, wcr)| {
                    *acc = union_subsets(acc, &p, shapes.get(c), asm);
                    if *wcr != e.wcr {
                        *wcr = None;
                    }
                })
                .or_insert((p, e.wcr));
        }
    }
    (reads, writes)
}

fn union_subsets(
    a: &Subset,
    b: &Subset,
    shape: Option<&Vec<SymExpr>>,
    asm: &Assumptions,
) -> Subset {
    if a.rank() != b.rank() {
        return full_subset(a, shape);
    }
    let dims = a
        .0
        .iter()
        .zip(&b.0)
        .enumerate()
        .map(|(i, (ra, rb))| {
            union_ranges(ra, rb, asm).unwrap_or_else(|_| full_dim(i, ra, shape))
        })
        .collect();
    Subset(dims)
}

fn full_subset(like: &Subset, shape: Option<&Vec<SymExpr>>) -> Subset {
    Subset(
        like.0
            .iter()
            .enumerate()
            .map(|(i, r)| full_dim(i, r, shape))
            .collect(),
    )
}

fn full_dim(i: usize, fallback: &SymRange, shape: Option<&Vec<SymExpr>>) -> SymRange {
    match shape.and_then(|s| s.get(i)) {
        Some(dim) => SymRange::span(
            SymExpr::Const(0),
            simplify(&SymExpr::sub(dim.clone(), SymExpr::Const(1))),
        ),
        None => fallback.clone(),
    }
}

/// Substitute the map parameters out of one per-iteration subset. Bounds are
/// taken at the range endpoints (index expressions are affine in practice, so
/// extrema sit there); a unit-stride parameter stepping an index expression
/// by a constant keeps that constant as the propagated stride.
fn propagate_subset(
    sub: &Subset,
    m: &MapScope,
    shape: Option<&Vec<SymExpr>>,
    asm: &Assumptions,
) -> Subset {
    let dims = sub
        .0
        .iter()
        .enumerate()
        .map(|(i, r)| propagate_range(r, m, || full_dim(i, r, shape), asm))
        .collect();
    Subset(dims)
}

fn propagate_range(
    r: &SymRange,
    m: &MapScope,
    full: impl Fn() -> SymRange,
    asm: &Assumptions,
) -> SymRange {
    let mut syms = std::collections::BTreeSet::new();
    r.collect_syms(&mut syms);
    let used: Vec<usize> = (0..m.params.len())
        .filter(|i| syms.contains(&m.params[*i]))
        .collect();
    if used.is_empty() {
        return r.canonical();
    }
    // Stride in the range itself depending on a parameter is beyond what a
    // single strided range can describe.
    let mut stride_syms = std::collections::BTreeSet::new();
    r.stride.collect_syms(&mut stride_syms);
    if used.iter().any(|i| stride_syms.contains(&m.params[*i])) {
        return full();
    }

    let mut begin = r.begin.clone();
    let mut end = r.end.clone();
    for &i in &used {
        let p = m.params[i].as_str();
        let range = &m.ranges[i];
        let (lo, hi) = match endpoint_extrema(&begin, &end, p, range, asm) {
            Some(pair) => pair,
            None => return full(),
        };
        begin = lo;
        end = hi;
    }

    let stride = propagated_stride(r, m, &used);
    SymRange { begin: simplify(&begin), end: simplify(&end), stride }
}

fn subst1(e: &SymExpr, p: &str, v: &SymExpr) -> SymExpr {
    let mut map = std::collections::BTreeMap::new();
    map.insert(p.to_string(), v.clone());
    substitute(e, &map)
}

/// Eliminate one parameter from the running bounds. Index expressions that
/// are monotone in `p` (provable sign of the unit step) take their extrema at
/// the range endpoints; only iterations that execute contribute, so an empty
/// range needs no special case. Non-monotone expressions yield None and the
/// caller over-approximates.
fn endpoint_extrema(
    begin: &SymExpr,
    end: &SymExpr,
    p: &str,
    range: &SymRange,
    asm: &Assumptions,
) -> Option<(SymExpr, SymExpr)> {
    let dir = |e: &SymExpr| -> Option<bool> {
        let next = subst1(e, p, &SymExpr::add(SymExpr::sym(p), SymExpr::Const(1)));
        let step = simplify(&SymExpr::sub(next, e.clone()));
        let nonneg = SymExpr::cmp(CmpKind::Le, SymExpr::Const(0), step.clone());
        if prove(&nonneg, asm) == Truth::True {
            return Some(true);
        }
        let nonpos = SymExpr::cmp(CmpKind::Le, step, SymExpr::Const(0));
        if prove(&nonpos, asm) == Truth::True {
            return Some(false);
        }
        None
    };
    let at = |e: &SymExpr, v: &SymExpr| simplify(&subst1(e, p, v));
    let lo = match dir(begin)? {
        true => at(begin, &range.begin),
        false => at(begin, &range.end),
    };
    let hi = match dir(end)? {
        true => at(end, &range.end),
        false => at(end, &range.begin),
    };
    Some((lo, hi))
}

/// A single-index subset driven by one unit-stride parameter advances by a
/// constant per iteration; that constant is the aggregate stride. Everything
/// else collapses to a dense stride-1 cover.
fn propagated_stride(r: &SymRange, m: &MapScope, used: &[usize]) -> SymExpr {
    if !r.is_index() || used.len() != 1 {
        return SymExpr::Const(1);
    }
    let i = used[0];
    if m.ranges[i].stride != SymExpr::Const(1) {
        return SymExpr::Const(1);
    }
    let p = m.params[i].as_str();
    let step = simplify(&SymExpr::sub(
        subst1(&r.begin, p, &SymExpr::add(SymExpr::sym(p), SymExpr::Const(1))),
        r.begin.clone(),
    ));
    match step.as_const() {
        Some(d) if d > 1 => SymExpr::Const(d),
        Some(d) if d < -1 => SymExpr::Const(-d),
        _ => SymExpr::Const(1),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbolic::parse_expr;
    use crate::value::ElemType;

    fn array(name: &str, dims: &[&str]) -> super::super::DataDescriptor {
        super::super::DataDescriptor {
            name: name.into(),
            shape: dims.iter().map(|d| parse_expr(d).unwrap()).collect(),
            elem: ElemType::F64,
            transient: false,
            storage: super::super::Storage::Heap,
            lifetime: super::super::Lifetime::Global,
        }
    }

    fn index(s: &str) -> Subset {
        Subset::indices(vec![parse_expr(s).unwrap()])
    }

    fn elementwise_map() -> MapScope {
        MapScope {
            name: "m0".into(),
            params: vec!["i".into()],
            ranges: vec![SymRange::span(
                SymExpr::Const(0),
                parse_expr("N - 1").unwrap(),
            )],
            nodes: vec![Node::Tasklet(super::super::Tasklet {
                name: "t0".into(),
                inputs: vec!["in_a".into()],
                outputs: vec!["out".into()],
                code: crate::sdfg::parse_code("out = in_a * 2.0").unwrap(),
            })],
            edges: vec![
                Memlet {
                    src: Endpoint::Boundary("A".into()),
                    dst: Endpoint::Conn(0, "in_a".into()),
                    src_subset: Some(index("i")),
                    dst_subset: None,
                    wcr: None,
                },
                Memlet {
                    src: Endpoint::Conn(0, "out".into()),
                    dst: Endpoint::Boundary("B".into()),
                    src_subset: None,
                    dst_subset: Some(index("i")),
                    wcr: None,
                },
            ],
        }
    }

    #[test]
    fn derives_aggregates_for_an_elementwise_map() {
        let mut sdfg = Sdfg {
            name: "p".into(),
            symbols: vec!["N".into()],
            descriptors: [
                ("A".to_string(), array("A", &["N"])),
                ("B".to_string(), array("B", &["N"])),
            ]
            .into(),
            states: vec![super::super::State {
                name: "s0".into(),
                nodes: vec![Node::Map(elementwise_map())],
                edges: vec![],
            }],
            start: "s0".into(),
            ..Default::default()
        };
        propagate_memlets(&mut sdfg);
        let st = &sdfg.states[0];
        assert_eq!(st.edges.len(), 2);
        let feed = st.edges.iter().find(|e| matches!(e.dst, Endpoint::Node(0))).unwrap();
        assert_eq!(feed.src_subset.as_ref().unwrap().to_string(), "[0:N - 1]");
        let drain = st.edges.iter().find(|e| matches!(e.src, Endpoint::Node(0))).unwrap();
        assert_eq!(drain.dst_subset.as_ref().unwrap().to_string(), "[0:N - 1]");
        // Access nodes were created for both containers.
        assert_eq!(st.nodes.len(), 3);

        // Running again changes nothing.
        let before = sdfg.clone();
        propagate_memlets(&mut sdfg);
        assert_eq!(before, sdfg);
    }

    #[test]
    fn unions_stencil_neighbors_into_one_read() {
        let mut m = elementwise_map();
        m.ranges = vec![SymRange::span(SymExpr::Const(0), parse_expr("N - 2").unwrap())];
        m.edges[0].src_subset = Some(index("i"));
        m.nodes.push(Node::Tasklet(super::super::Tasklet {
            name: "t1".into(),
            inputs: vec!["in_b".into()],
            outputs: vec!["out".into()],
            code: crate::sdfg::parse_code("out = in_b").unwrap(),
        }));
        m.edges.push(Memlet {
            src: Endpoint::Boundary("A".into()),
            dst: Endpoint::Conn(1, "in_b".into()),
            src_subset: Some(index("i + 1")),
            dst_subset: None,
            wcr: None,
        });
        let shapes: BTreeMap<String, Vec<SymExpr>> =
            [("A".to_string(), vec![parse_expr("N").unwrap()])].into();
        let (reads, _) = boundary_summary(&m, &shapes, &Assumptions::empty());
        // Oracle by enumeration at N = 5: reads {0..3} and {1..4} union to
        // {0..4} = [0, N - 1].
        assert_eq!(reads["A"].to_string(), "[0:N - 1]");
    }

    #[test]
    fn strided_index_keeps_its_step() {
        let mut m = elementwise_map();
        m.edges[0].src_subset = Some(index("2 * i"));
        let shapes: BTreeMap<String, Vec<SymExpr>> =
            [("A".to_string(), vec![parse_expr("2 * N").unwrap()])].into();
        let (reads, _) = boundary_summary(&m, &shapes, &Assumptions::empty());
        assert_eq!(reads["A"].to_string(), "[0:2 * N - 2:2]");
    }

    #[test]
    fn wcr_survives_when_every_write_agrees() {
        let mut m = elementwise_map();
        m.edges[1].wcr = Some(Wcr::Add);
        let shapes = BTreeMap::new();
        let (_, writes) = boundary_summary(&m, &shapes, &Assumptions::empty());
        assert_eq!(writes["B"].1, Some(Wcr::Add));
    }
}
