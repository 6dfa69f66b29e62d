//! Graphviz rendering: one cluster per state, nested clusters for maps,
//! dashed arrows for interstate transitions.

use super::{Endpoint, Memlet, Node, Sdfg};
use std::fmt::Write;

pub fn to_dot(sdfg: &Sdfg) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "digraph {} {{", quote(&sdfg.name));
    out.push_str("  rankdir=TB;\n  node [fontname=\"monospace\"];\n");
    for (si, state) in sdfg.states.iter().enumerate() {
        let _ = writeln!(out, "  subgraph cluster_s{si} {{");
        let _ = writeln!(out, "    label={};", quote(&state.name));
        out.push_str("    style=rounded;\n");
        let anchor = format!("s{si}_entry");
        let _ = writeln!(
            out,
            "    {anchor} [shape=point, style=invis, width=0.01];"
        );
        let prefix = format!("s{si}");
        emit_level(&mut out, &prefix, &state.nodes, &state.edges, 2);
        out.push_str("  }\n");
    }
    for e in &sdfg.edges {
        let (Some(si), Some(di)) = (state_index(sdfg, &e.src), state_index(sdfg, &e.dst)) else {
            continue;
        };
        let mut label = String::new();
        if let Some(c) = &e.condition {
            label.push_str(&c.to_string());
        }
        if e.is_else {
            label.push_str("else");
        }
        for (k, v) in &e.assignments {
            if !label.is_empty() {
                label.push_str("\\n");
            }
            let _ = write!(label, "{k} = {v}");
        }
        let _ = writeln!(
            out,
            "  s{si}_entry -> s{di}_entry [style=dashed, ltail=cluster_s{si}, lhead=cluster_s{di}, label={}];",
            quote(&label)
        );
    }
    out.push_str("}\n");
    out
}

fn emit_level(out: &mut String, prefix: &str, nodes: &[Node], edges: &[Memlet], depth: usize) {
    let pad = "  ".repeat(depth);
    for (i, n) in nodes.iter().enumerate() {
        match n {
            Node::Access(c) => {
                let _ = writeln!(out, "{pad}{prefix}_n{i} [shape=ellipse, label={}];", quote(c));
            }
            Node::Tasklet(t) => {
                let code = t
                    .code
                    .iter()
                    .map(|(k, v)| format!("{k} = {v}"))
                    .collect::<Vec<_>>()
                    .join("\\n");
                let _ = writeln!(
                    out,
                    "{pad}{prefix}_n{i} [shape=box, label={}];",
                    quote(&format!("{}\\n{code}", t.name))
                );
            }
            Node::Map(m) => {
                let _ = writeln!(out, "{pad}subgraph cluster_{prefix}_n{i} {{");
                let header = m
                    .params
                    .iter()
                    .zip(&m.ranges)
                    .map(|(p, r)| format!("{p} = {r}"))
                    .collect::<Vec<_>>()
                    .join(", ");
                let _ = writeln!(
                    out,
                    "{pad}  label={};",
                    quote(&format!("{} [{header}]", m.name))
                );
                let _ = writeln!(
                    out,
                    "{pad}  {prefix}_n{i} [shape=point, style=invis, width=0.01];"
                );
                let inner = format!("{prefix}_n{i}");
                emit_level(out, &inner, &m.nodes, &m.edges, depth + 1);
                let _ = writeln!(out, "{pad}}}");
            }
        }
    }
    for e in edges {
        let (src, src_sub) = endpoint_node(prefix, &e.src, e.src_subset.as_ref());
        let (dst, dst_sub) = endpoint_node(prefix, &e.dst, e.dst_subset.as_ref());
        let mut label = src_sub.or(dst_sub).unwrap_or_default();
        if let Some(w) = e.wcr {
            if !label.is_empty() {
                label.push(' ');
            }
            let _ = write!(label, "wcr({})", w.symbol());
        }
        let _ = writeln!(out, "{pad}{src} -> {dst} [label={}];", quote(&label));
    }
}

/// Boundary endpoints hang off the enclosing map's anchor point; the parent
/// prefix is everything before the last `_n<k>` segment.
fn endpoint_node(
    prefix: &str,
    e: &Endpoint,
    subset: Option<&crate::symbolic::Subset>,
) -> (String, Option<String>) {
    let sub = subset.map(|s| s.to_string());
    match e {
        Endpoint::Node(i) => (format!("{prefix}_n{i}"), sub),
        Endpoint::Conn(i, _) => (format!("{prefix}_n{i}"), sub),
        Endpoint::Boundary(c) => {
            let anchor = prefix.to_string();
            (anchor, Some(format!("^{c}{}", sub.unwrap_or_default())))
        }
    }
}

fn state_index(sdfg: &Sdfg, name: &str) -> Option<usize> {
    sdfg.states.iter().position(|s| s.name == name)
}

// Labels are built from identifiers and expression text, which never contain
// backslashes; `\n` sequences inserted above must pass through for graphviz.
fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('"', "\\\""))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_clusters_and_interstate_edges() {
        let src = r#"
sdfg @two (syms: N) {
  sdfg.alloc @A : array<sym("N") x f64> {storage: heap, lifetime: global}
  sdfg.alloc @t : scalar<f64> {transient, storage: register, lifetime: global}
  sdfg.result @A
  sdfg.state @s0 {
    %0 = sdfg.access @A
    %1 = sdfg.access @t
    sdfg.load %0[0] -> %1
  }
  sdfg.state @s1 {
  }
  sdfg.edge @s0 -> @s1 (assign: "i: N - 1")
  sdfg.start @s0
}
"#;
        let sdfg = super::super::parse_sdir(src).unwrap();
        let dot = to_dot(&sdfg);
        assert!(dot.starts_with("digraph \"two\" {"));
        assert!(dot.contains("subgraph cluster_s0"));
        assert!(dot.contains("subgraph cluster_s1"));
        assert!(dot.contains("s0_n0 [shape=ellipse, label=\"A\"]"));
        assert!(dot.contains("s0_n0 -> s0_n1 [label=\"[0]\"]"));
        assert!(dot.contains("s0_entry -> s1_entry"));
        assert!(dot.contains("i = N - 1"));
        assert!(dot.ends_with("}\n"));
    }
}
