//! JSON interchange, schema `sdfg-v1`. Symbolic expressions and subsets
//! travel as strings in their textual form, so the payload stays readable
//! and diffable.

use super::{
    DataDescriptor, Endpoint, InterstateEdge, Lifetime, MapScope, Memlet, Node, Sdfg, State,
    Storage, Tasklet, Wcr,
};
use crate::symbolic::{parse_expr, parse_predicate, Subset, SymRange};
use crate::text::{lex, Cursor, Tok};
use crate::value::ElemType;
use serde::{Deserialize, Serialize};

pub const SCHEMA: &str = "sdfg-v1";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum JsonError {
    #[error("not valid JSON: {0}")]
    Syntax(String),
    #[error("missing or wrong schema marker, expected \"{SCHEMA}\"")]
    Format,
    #[error("bad field `{field}`: {msg}")]
    Field { field: String, msg: String },
}

pub fn to_json(sdfg: &Sdfg) -> String {
    let doc = JSdfg::from(sdfg);
    serde_json::to_string_pretty(&doc).expect("the document representation always serializes")
}

/// Returns the graph plus warnings for unknown top-level keys.
pub fn from_json(text: &str) -> Result<(Sdfg, Vec<String>), JsonError> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| JsonError::Syntax(e.to_string()))?;
    let Some(obj) = value.as_object() else {
        return Err(JsonError::Format);
    };
    match obj.get("schema").and_then(|v| v.as_str()) {
        Some(s) if s == SCHEMA => {}
        _ => return Err(JsonError::Format),
    }
    const KNOWN: &[&str] = &[
        "schema",
        "name",
        "symbols",
        "assumptions",
        "containers",
        "states",
        "edges",
        "start",
        "results",
    ];
    let warnings: Vec<String> = obj
        .keys()
        .filter(|k| !KNOWN.contains(&k.as_str()))
        .map(|k| format!("ignoring unknown key `{k}`"))
        .collect();
    let doc: JSdfg = serde_json::from_value(value)
        .map_err(|e| JsonError::Syntax(e.to_string()))?;
    Ok((doc.into_sdfg()?, warnings))
}

#[derive(Serialize, Deserialize)]
struct JSdfg {
    schema: String,
    name: String,
    #[serde(default)]
    symbols: Vec<String>,
    #[serde(default)]
    assumptions: Vec<String>,
    #[serde(default)]
    containers: Vec<JDesc>,
    #[serde(default)]
    states: Vec<JState>,
    #[serde(default)]
    edges: Vec<JEdge>,
    start: String,
    #[serde(default)]
    results: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct JDesc {
    name: String,
    #[serde(default)]
    shape: Vec<String>,
    elem: String,
    #[serde(default)]
    transient: bool,
    storage: String,
    lifetime: String,
}

#[derive(Serialize, Deserialize)]
struct JState {
    name: String,
    #[serde(default)]
    nodes: Vec<JNode>,
    #[serde(default)]
    edges: Vec<JMemlet>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum JNode {
    Access {
        container: String,
    },
    Tasklet {
        name: String,
        #[serde(default)]
        inputs: Vec<String>,
        #[serde(default)]
        outputs: Vec<String>,
        #[serde(default)]
        code: Vec<[String; 2]>,
    },
    Map {
        name: String,
        params: Vec<String>,
        ranges: Vec<String>,
        #[serde(default)]
        nodes: Vec<JNode>,
        #[serde(default)]
        edges: Vec<JMemlet>,
    },
}

#[derive(Serialize, Deserialize)]
struct JMemlet {
    src: String,
    dst: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    src_subset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dst_subset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    wcr: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct JEdge {
    src: String,
    dst: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    condition: Option<String>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    is_else: bool,
    #[serde(default)]
    assignments: Vec<[String; 2]>,
}

impl From<&Sdfg> for JSdfg {
    fn from(s: &Sdfg) -> JSdfg {
        JSdfg {
            schema: SCHEMA.to_string(),
            name: s.name.clone(),
            symbols: s.symbols.clone(),
            assumptions: s.assumptions.iter().map(|a| a.to_string()).collect(),
            containers: s.descriptors.values().map(JDesc::from).collect(),
            states: s.states.iter().map(JState::from).collect(),
            edges: s.edges.iter().map(JEdge::from).collect(),
            start: s.start.clone(),
            results: s.results.clone(),
        }
    }
}

impl From<&DataDescriptor> for JDesc {
    fn from(d: &DataDescriptor) -> JDesc {
        JDesc {
            name: d.name.clone(),
            shape: d.shape.iter().map(|e| e.to_string()).collect(),
            elem: d.elem.to_string(),
            transient: d.transient,
            storage: d.storage.to_string(),
            lifetime: d.lifetime.to_string(),
        }
    }
}

impl From<&State> for JState {
    fn from(s: &State) -> JState {
        JState {
            name: s.name.clone(),
            nodes: s.nodes.iter().map(JNode::from).collect(),
            edges: s.edges.iter().map(JMemlet::from).collect(),
        }
    }
}

impl From<&Node> for JNode {
    fn from(n: &Node) -> JNode {
        match n {
            Node::Access(c) => JNode::Access { container: c.clone() },
            Node::Tasklet(t) => JNode::Tasklet {
                name: t.name.clone(),
                inputs: t.inputs.clone(),
                outputs: t.outputs.clone(),
                code: t
                    .code
                    .iter()
                    .map(|(k, v)| [k.clone(), v.to_string()])
                    .collect(),
            },
            Node::Map(m) => JNode::Map {
                name: m.name.clone(),
                params: m.params.clone(),
                ranges: m.ranges.iter().map(range_text).collect(),
                nodes: m.nodes.iter().map(JNode::from).collect(),
                edges: m.edges.iter().map(JMemlet::from).collect(),
            },
        }
    }
}

impl From<&Memlet> for JMemlet {
    fn from(e: &Memlet) -> JMemlet {
        JMemlet {
            src: endpoint_text(&e.src),
            dst: endpoint_text(&e.dst),
            src_subset: e.src_subset.as_ref().map(|s| s.to_string()),
            dst_subset: e.dst_subset.as_ref().map(|s| s.to_string()),
            wcr: e.wcr.map(|w| w.symbol().to_string()),
        }
    }
}

impl From<&InterstateEdge> for JEdge {
    fn from(e: &InterstateEdge) -> JEdge {
        JEdge {
            src: e.src.clone(),
            dst: e.dst.clone(),
            condition: e.condition.as_ref().map(|c| c.to_string()),
            is_else: e.is_else,
            assignments: e
                .assignments
                .iter()
                .map(|(k, v)| [k.clone(), v.to_string()])
                .collect(),
        }
    }
}

fn endpoint_text(e: &Endpoint) -> String {
    match e {
        Endpoint::Node(i) => format!("%{i}"),
        Endpoint::Conn(i, c) => format!("%{i}.{c}"),
        Endpoint::Boundary(c) => format!("^{c}"),
    }
}

/// `begin:end` or `begin:end:stride`, always explicit (no single-index form)
/// so the reader stays trivial.
fn range_text(r: &SymRange) -> String {
    if r.stride == crate::symbolic::SymExpr::Const(1) {
        format!("{}:{}", r.begin, r.end)
    } else {
        format!("{}:{}:{}", r.begin, r.end, r.stride)
    }
}

fn field<T>(field: &str, msg: impl std::fmt::Display) -> Result<T, JsonError> {
    Err(JsonError::Field { field: field.to_string(), msg: msg.to_string() })
}

impl JSdfg {
    fn into_sdfg(self) -> Result<Sdfg, JsonError> {
        let mut sdfg = Sdfg {
            name: self.name,
            symbols: self.symbols,
            start: self.start,
            results: self.results,
            ..Default::default()
        };
        for a in &self.assumptions {
            match parse_predicate(a) {
                Ok(p) => sdfg.assumptions.push(p),
                Err(e) => return field("assumptions", e),
            }
        }
        for d in self.containers {
            let name = d.name.clone();
            let desc = d.into_descriptor()?;
            if sdfg.descriptors.insert(name.clone(), desc).is_some() {
                return field("containers", format!("duplicate container `{name}`"));
            }
        }
        for s in self.states {
            sdfg.states.push(s.into_state()?);
        }
        for e in self.edges {
            sdfg.edges.push(e.into_edge()?);
        }
        Ok(sdfg)
    }
}

impl JDesc {
    fn into_descriptor(self) -> Result<DataDescriptor, JsonError> {
        let mut shape = Vec::new();
        for s in &self.shape {
            match parse_expr(s) {
                Ok(e) => shape.push(e),
                Err(e) => return field("shape", e),
            }
        }
        let elem = match self.elem.as_str() {
            "i64" => ElemType::I64,
            "f64" => ElemType::F64,
            other => return field("elem", format!("unknown element type `{other}`")),
        };
        let storage = match self.storage.as_str() {
            "heap" => Storage::Heap,
            "stack" => Storage::Stack,
            "register" => Storage::Register,
            other => return field("storage", format!("unknown storage `{other}`")),
        };
        let lifetime = match self.lifetime.as_str() {
            "global" => Lifetime::Global,
            "state" => Lifetime::State,
            other => return field("lifetime", format!("unknown lifetime `{other}`")),
        };
        Ok(DataDescriptor {
            name: self.name,
            shape,
            elem,
            transient: self.transient,
            storage,
            lifetime,
        })
    }
}

impl JState {
    fn into_state(self) -> Result<State, JsonError> {
        let mut nodes = Vec::new();
        for n in self.nodes {
            nodes.push(n.into_node()?);
        }
        let mut edges = Vec::new();
        for e in self.edges {
            edges.push(e.into_memlet()?);
        }
        Ok(State { name: self.name, nodes, edges })
    }
}

impl JNode {
    fn into_node(self) -> Result<Node, JsonError> {
        Ok(match self {
            JNode::Access { container } => Node::Access(container),
            JNode::Tasklet { name, inputs, outputs, code } => {
                let mut parsed = Vec::new();
                for [target, expr] in code {
                    match super::code::parse_code_expr(&expr) {
                        Ok(e) => parsed.push((target, e)),
                        Err(e) => return field("code", e),
                    }
                }
                Node::Tasklet(Tasklet { name, inputs, outputs, code: parsed })
            }
            JNode::Map { name, params, ranges, nodes, edges } => {
                let mut rs = Vec::new();
                for r in &ranges {
                    rs.push(parse_range_text(r)?);
                }
                let mut ns = Vec::new();
                for n in nodes {
                    ns.push(n.into_node()?);
                }
                let mut es = Vec::new();
                for e in edges {
                    es.push(e.into_memlet()?);
                }
                Node::Map(MapScope { name, params, ranges: rs, nodes: ns, edges: es })
            }
        })
    }
}

impl JMemlet {
    fn into_memlet(self) -> Result<Memlet, JsonError> {
        let src = parse_endpoint_text(&self.src)?;
        let dst = parse_endpoint_text(&self.dst)?;
        let src_subset = self.src_subset.as_deref().map(parse_subset_text).transpose()?;
        let dst_subset = self.dst_subset.as_deref().map(parse_subset_text).transpose()?;
        let wcr = match self.wcr.as_deref() {
            None => None,
            Some(s) => match Wcr::parse(s) {
                Some(w) => Some(w),
                None => return field("wcr", format!("unknown wcr `{s}`")),
            },
        };
        Ok(Memlet { src, dst, src_subset, dst_subset, wcr })
    }
}

impl JEdge {
    fn into_edge(self) -> Result<InterstateEdge, JsonError> {
        let condition = match self.condition.as_deref() {
            None => None,
            Some(c) => match parse_predicate(c) {
                Ok(p) => Some(p),
                Err(e) => return field("condition", e),
            },
        };
        let mut assignments = Vec::new();
        for [name, expr] in self.assignments {
            match parse_expr(&expr) {
                Ok(e) => assignments.push((name, e)),
                Err(e) => return field("assignments", e),
            }
        }
        Ok(InterstateEdge { src: self.src, dst: self.dst, condition, is_else: self.is_else, assignments })
    }
}

fn parse_endpoint_text(s: &str) -> Result<Endpoint, JsonError> {
    let bad = || JsonError::Field {
        field: "endpoint".into(),
        msg: format!("`{s}` is not `%k`, `%k.conn`, or `^container`"),
    };
    if let Some(rest) = s.strip_prefix('^') {
        if rest.is_empty() {
            return Err(bad());
        }
        return Ok(Endpoint::Boundary(rest.to_string()));
    }
    let Some(rest) = s.strip_prefix('%') else {
        return Err(bad());
    };
    match rest.split_once('.') {
        Some((idx, conn)) => {
            let idx = idx.parse().map_err(|_| bad())?;
            Ok(Endpoint::Conn(idx, conn.to_string()))
        }
        None => Ok(Endpoint::Node(rest.parse().map_err(|_| bad())?)),
    }
}

fn parse_subset_text(s: &str) -> Result<Subset, JsonError> {
    let toks = lex(s)
        .map_err(|e| JsonError::Field { field: "subset".into(), msg: e.to_string() })?;
    let mut cur = Cursor::new(toks);
    let err = |msg: String| JsonError::Field { field: "subset".into(), msg };
    if !cur.eat_punct("[") {
        return Err(err(format!("`{s}` does not start with `[`")));
    }
    let mut ranges = Vec::new();
    if !cur.at_punct("]") {
        loop {
            ranges.push(parse_range_cursor(&mut cur)?);
            if !cur.eat_punct(",") {
                break;
            }
        }
    }
    if !cur.eat_punct("]") || !matches!(cur.peek(), Tok::Eof) {
        return Err(err(format!("trailing input in subset `{s}`")));
    }
    Ok(Subset(ranges))
}

fn parse_range_text(s: &str) -> Result<SymRange, JsonError> {
    let toks = lex(s)
        .map_err(|e| JsonError::Field { field: "range".into(), msg: e.to_string() })?;
    let mut cur = Cursor::new(toks);
    let r = parse_range_cursor(&mut cur)?;
    if !matches!(cur.peek(), Tok::Eof) {
        return Err(JsonError::Field {
            field: "range".into(),
            msg: format!("trailing input in range `{s}`"),
        });
    }
    Ok(r)
}

fn parse_range_cursor(cur: &mut Cursor) -> Result<SymRange, JsonError> {
    let ex = |e: crate::symbolic::ParseError| JsonError::Field {
        field: "range".into(),
        msg: e.to_string(),
    };
    let begin = crate::symbolic::parse_expr_cursor(cur).map_err(ex)?;
    if !cur.eat_punct(":") {
        return Ok(SymRange::index(begin));
    }
    let end = crate::symbolic::parse_expr_cursor(cur).map_err(ex)?;
    if !cur.eat_punct(":") {
        return Ok(SymRange::span(begin, end));
    }
    let stride = crate::symbolic::parse_expr_cursor(cur).map_err(ex)?;
    Ok(SymRange { begin, end, stride })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
sdfg @scale (syms: N) {
  assume "N >= 1"
  sdfg.alloc @A : array<sym("N") x f64> {storage: heap, lifetime: global}
  sdfg.alloc @B : array<sym("N") x f64> {storage: heap, lifetime: global}
  sdfg.result @B
  sdfg.state @s0 {
    %0 = sdfg.access @A
    %1 = sdfg.access @B
    %2 = sdfg.map @m0 (%i) = (0) to (sym("N")) step (1) {
      %0 = sdfg.tasklet @t0 (in_a) -> (out) { out = in_a * 2.0 }
      sdfg.load ^A[i] -> %0.in_a
      sdfg.store %0.out -> ^B[i]
    }
  }
  sdfg.edge @s0 -> @s0 (cond: "false")
  sdfg.start @s0
}
"#;

    #[test]
    fn json_round_trip_preserves_the_graph() {
        let sdfg = super::super::parse_sdir(SAMPLE).unwrap();
        let text = to_json(&sdfg);
        let (back, warnings) = from_json(&text).unwrap();
        assert!(warnings.is_empty());
        assert_eq!(sdfg, back);
    }

    #[test]
    fn unknown_top_level_keys_warn_but_parse() {
        let sdfg = super::super::parse_sdir(SAMPLE).unwrap();
        let mut v: serde_json::Value = serde_json::from_str(&to_json(&sdfg)).unwrap();
        v.as_object_mut()
            .unwrap()
            .insert("vendor_extras".to_string(), serde_json::json!({"x": 1}));
        let (back, warnings) = from_json(&v.to_string()).unwrap();
        assert_eq!(back, sdfg);
        assert_eq!(warnings, vec!["ignoring unknown key `vendor_extras`"]);
    }

    #[test]
    fn missing_schema_is_a_format_error() {
        let sdfg = super::super::parse_sdir(SAMPLE).unwrap();
        let mut v: serde_json::Value = serde_json::from_str(&to_json(&sdfg)).unwrap();
        v.as_object_mut().unwrap().remove("schema");
        assert_eq!(from_json(&v.to_string()), Err(JsonError::Format));
        v.as_object_mut()
            .unwrap()
            .insert("schema".into(), serde_json::json!("sdfg-v0"));
        assert_eq!(from_json(&v.to_string()), Err(JsonError::Format));
    }

    #[test]
    fn scalar_subsets_survive_as_empty_brackets() {
        let m = Memlet {
            src: Endpoint::Node(0),
            dst: Endpoint::Node(1),
            src_subset: Some(Subset::scalar()),
            dst_subset: Some(Subset::indices(vec![crate::symbolic::SymExpr::Const(0)])),
            wcr: None,
        };
        let j = JMemlet::from(&m);
        assert_eq!(j.src_subset.as_deref(), Some("[]"));
        let back = j.into_memlet().unwrap();
        assert_eq!(back, m);
    }
}
