//! Canonical textual form. `parse_sdir` of the output reproduces the graph,
//! and printing that graph again reproduces the text.

use super::{DataDescriptor, Endpoint, InterstateEdge, MapScope, Memlet, Node, Sdfg, Tasklet};
use crate::symbolic::{simplify, SymExpr};
use std::fmt::Write;

pub fn print_sdir(sdfg: &Sdfg) -> String {
    let mut out = String::new();
    let w = &mut out;
    write!(w, "sdfg @{}", sdfg.name).unwrap();
    if !sdfg.symbols.is_empty() {
        write!(w, " (syms: {})", sdfg.symbols.join(", ")).unwrap();
    }
    writeln!(w, " {{").unwrap();
    for a in &sdfg.assumptions {
        writeln!(w, "  assume \"{a}\"").unwrap();
    }
    for d in sdfg.descriptors.values() {
        writeln!(w, "  {}", descriptor_line(d)).unwrap();
    }
    for r in &sdfg.results {
        writeln!(w, "  sdfg.result @{r}").unwrap();
    }
    for st in &sdfg.states {
        writeln!(w, "  sdfg.state @{} {{", st.name).unwrap();
        print_level(w, &st.nodes, &st.edges, 2);
        writeln!(w, "  }}").unwrap();
    }
    for e in &sdfg.edges {
        writeln!(w, "  {}", edge_line(e)).unwrap();
    }
    writeln!(w, "  sdfg.start @{}", sdfg.start).unwrap();
    writeln!(w, "}}").unwrap();
    out
}

fn indent(w: &mut String, depth: usize) {
    for _ in 0..depth {
        w.push_str("  ");
    }
}

fn print_level(w: &mut String, nodes: &[Node], edges: &[Memlet], depth: usize) {
    for (i, n) in nodes.iter().enumerate() {
        match n {
            Node::Access(c) => {
                indent(w, depth + 1);
                writeln!(w, "%{i} = sdfg.access @{c}").unwrap();
            }
            Node::Tasklet(t) => print_tasklet(w, i, t, depth),
            Node::Map(m) => print_map(w, i, m, depth),
        }
    }
    for e in edges {
        indent(w, depth + 1);
        writeln!(w, "{}", memlet_line(e)).unwrap();
    }
}

fn print_tasklet(w: &mut String, i: usize, t: &Tasklet, depth: usize) {
    indent(w, depth + 1);
    write!(
        w,
        "%{i} = sdfg.tasklet @{} ({}) -> ({}) {{ ",
        t.name,
        t.inputs.join(", "),
        t.outputs.join(", ")
    )
    .unwrap();
    for (k, (target, expr)) in t.code.iter().enumerate() {
        if k > 0 {
            write!(w, "; ").unwrap();
        }
        write!(w, "{target} = {expr}").unwrap();
    }
    writeln!(w, " }}").unwrap();
}

fn print_map(w: &mut String, i: usize, m: &MapScope, depth: usize) {
    indent(w, depth + 1);
    let params: Vec<String> = m.params.iter().map(|p| format!("%{p}")).collect();
    let begins: Vec<String> = m.ranges.iter().map(|r| shape_expr(&r.begin)).collect();
    // Inclusive ranges print with an exclusive upper bound.
    let ends: Vec<String> = m
        .ranges
        .iter()
        .map(|r| shape_expr(&simplify(&SymExpr::add(r.end.clone(), SymExpr::Const(1)))))
        .collect();
    let steps: Vec<String> = m.ranges.iter().map(|r| shape_expr(&r.stride)).collect();
    writeln!(
        w,
        "%{i} = sdfg.map @{} ({}) = ({}) to ({}) step ({}) {{",
        m.name,
        params.join(", "),
        begins.join(", "),
        ends.join(", "),
        steps.join(", ")
    )
    .unwrap();
    print_level(w, &m.nodes, &m.edges, depth + 1);
    indent(w, depth + 1);
    writeln!(w, "}}").unwrap();
}

fn endpoint_text(e: &Endpoint, subset: &Option<crate::symbolic::Subset>) -> String {
    let place = match e {
        Endpoint::Node(i) => format!("%{i}"),
        Endpoint::Conn(i, c) => format!("%{i}.{c}"),
        Endpoint::Boundary(c) => format!("^{c}"),
    };
    match subset {
        Some(s) if s.rank() > 0 => format!("{place}{s}"),
        _ => place,
    }
}

fn memlet_line(e: &Memlet) -> String {
    let src_is_data = e.src_subset.is_some() || matches!(e.src, Endpoint::Boundary(_));
    let dst_is_data = e.dst_subset.is_some() || matches!(e.dst, Endpoint::Boundary(_));
    let kw = match (src_is_data, dst_is_data) {
        (true, true) => "sdfg.copy",
        (true, false) => "sdfg.load",
        (false, true) => "sdfg.store",
        (false, false) => "sdfg.copy",
    };
    let mut line = format!(
        "{kw} {} -> {}",
        endpoint_text(&e.src, &e.src_subset),
        endpoint_text(&e.dst, &e.dst_subset)
    );
    if let Some(wcr) = e.wcr {
        write!(line, " wcr(\"{}\")", wcr.symbol()).unwrap();
    }
    line
}

fn descriptor_line(d: &DataDescriptor) -> String {
    let ty = if d.is_scalar() {
        format!("scalar<{}>", d.elem)
    } else {
        let dims: Vec<String> = d.shape.iter().map(shape_expr).collect();
        format!("array<{} x {}>", dims.join(" x "), d.elem)
    };
    let mut attrs = Vec::new();
    if d.transient {
        attrs.push("transient".to_string());
    }
    attrs.push(format!("storage: {}", d.storage));
    attrs.push(format!("lifetime: {}", d.lifetime));
    format!("sdfg.alloc @{} : {} {{{}}}", d.name, ty, attrs.join(", "))
}

fn edge_line(e: &InterstateEdge) -> String {
    let mut line = format!("sdfg.edge @{} -> @{}", e.src, e.dst);
    if let Some(c) = &e.condition {
        write!(line, " (cond: \"{c}\")").unwrap();
    }
    if e.is_else {
        line.push_str(" (else)");
    }
    if !e.assignments.is_empty() {
        let parts: Vec<String> =
            e.assignments.iter().map(|(n, v)| format!("{n}: {v}")).collect();
        write!(line, " (assign: \"{}\")", parts.join(", ")).unwrap();
    }
    line
}

/// Expression rendering for shape and bound positions, where symbol names
/// would collide with the `x` separator and the surrounding grammar: symbols
/// are quoted through `sym(...)` and nesting is fully parenthesized.
pub(crate) fn shape_expr(e: &SymExpr) -> String {
    match e {
        SymExpr::Const(v) => format!("{v}"),
        SymExpr::Bool(b) => format!("{b}"),
        SymExpr::Sym(n) => format!("sym(\"{n}\")"),
        SymExpr::Bin(op, a, b) => {
            let sym = match op {
                crate::symbolic::SymBinOp::Add => "+",
                crate::symbolic::SymBinOp::Sub => "-",
                crate::symbolic::SymBinOp::Mul => "*",
                crate::symbolic::SymBinOp::FloorDiv => "/",
                crate::symbolic::SymBinOp::Mod => "%",
                crate::symbolic::SymBinOp::Min => {
                    return format!("min({}, {})", shape_expr(a), shape_expr(b))
                }
                crate::symbolic::SymBinOp::Max => {
                    return format!("max({}, {})", shape_expr(a), shape_expr(b))
                }
            };
            format!("({} {} {})", shape_expr(a), sym, shape_expr(b))
        }
        // Predicates never appear in shapes; fall back to plain display.
        other => format!("({other})"),
    }
}
