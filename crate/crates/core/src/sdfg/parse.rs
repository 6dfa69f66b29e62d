//! Parser for the textual graph form produced by [`super::print_sdir`].
//! After building the graph it re-derives the aggregate edges on map nodes,
//! so surface files may omit or abbreviate them.

use super::{
    code, DataDescriptor, Endpoint, InterstateEdge, Lifetime, MapScope, Memlet, Node, Sdfg,
    State, Storage, Tasklet, Wcr,
};
use crate::symbolic::{parse_expr, parse_expr_cursor, parse_predicate, simplify, Subset, SymExpr, SymRange};
use crate::text::{lex, Cursor, Tok};
use crate::value::ElemType;
use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{line}:{col}: {msg}")]
pub struct SdirParseError {
    pub line: u32,
    pub col: u32,
    pub msg: String,
}

pub fn parse_sdir(src: &str) -> Result<Sdfg, SdirParseError> {
    let toks = lex(src).map_err(|e| SdirParseError { line: e.line, col: e.col, msg: e.msg })?;
    let mut p = P { cur: Cursor::new(toks) };
    let mut sdfg = p.program()?;
    super::propagate_memlets(&mut sdfg);
    Ok(sdfg)
}

struct P {
    cur: Cursor,
}

impl P {
    fn err<T>(&self, msg: impl Into<String>) -> Result<T, SdirParseError> {
        let (line, col) = self.cur.here();
        Err(SdirParseError { line, col, msg: msg.into() })
    }

    fn expect_punct(&mut self, p: &str) -> Result<(), SdirParseError> {
        if self.cur.eat_punct(p) {
            Ok(())
        } else {
            self.err(format!("expected `{p}`, found {}", self.cur.peek()))
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), SdirParseError> {
        if self.cur.eat_kw(kw) {
            Ok(())
        } else {
            self.err(format!("expected `{kw}`, found {}", self.cur.peek()))
        }
    }

    fn ident(&mut self) -> Result<String, SdirParseError> {
        match self.cur.peek().clone() {
            Tok::Ident(s) => {
                self.cur.bump();
                Ok(s)
            }
            other => self.err(format!("expected identifier, found {other}")),
        }
    }

    /// `@name`
    fn at_name(&mut self) -> Result<String, SdirParseError> {
        self.expect_punct("@")?;
        self.ident()
    }

    fn string(&mut self) -> Result<String, SdirParseError> {
        match self.cur.peek().clone() {
            Tok::Str(s) => {
                self.cur.bump();
                Ok(s)
            }
            other => self.err(format!("expected string literal, found {other}")),
        }
    }

    fn expr(&mut self) -> Result<SymExpr, SdirParseError> {
        parse_expr_cursor(&mut self.cur)
            .map_err(|e| SdirParseError { line: e.line, col: e.col, msg: e.msg })
    }

    /// `sdfg.<word>`, returning the word.
    fn directive(&mut self) -> Result<String, SdirParseError> {
        self.expect_kw("sdfg")?;
        self.expect_punct(".")?;
        self.ident()
    }

    fn program(&mut self) -> Result<Sdfg, SdirParseError> {
        self.expect_kw("sdfg")?;
        let name = self.at_name()?;
        let mut sdfg = Sdfg { name, ..Default::default() };
        if self.cur.eat_punct("(") {
            self.expect_kw("syms")?;
            self.expect_punct(":")?;
            loop {
                sdfg.symbols.push(self.ident()?);
                if !self.cur.eat_punct(",") {
                    break;
                }
            }
            self.expect_punct(")")?;
        }
        self.expect_punct("{")?;
        let mut start = None;
        while !self.cur.eat_punct("}") {
            if self.cur.is_eof() {
                return self.err("unexpected end of input, expected `}`");
            }
            if self.cur.eat_kw("assume") {
                let text = self.string()?;
                let pred = parse_predicate(&text)
                    .map_err(|e| self.err::<()>(format!("in assume: {e}")).unwrap_err())?;
                sdfg.assumptions.push(pred);
                continue;
            }
            let dir = self.directive()?;
            match dir.as_str() {
                "alloc" => {
                    let d = self.alloc()?;
                    if sdfg.descriptors.contains_key(&d.name) {
                        return self.err(format!("duplicate container `{}`", d.name));
                    }
                    sdfg.descriptors.insert(d.name.clone(), d);
                }
                "result" => sdfg.results.push(self.at_name()?),
                "state" => {
                    let name = self.at_name()?;
                    self.expect_punct("{")?;
                    let (nodes, edges) = self.level_body(&sdfg.descriptors)?;
                    sdfg.states.push(State { name, nodes, edges });
                }
                "edge" => sdfg.edges.push(self.interstate_edge()?),
                "start" => start = Some(self.at_name()?),
                other => return self.err(format!("unknown directive `sdfg.{other}`")),
            }
        }
        match start {
            Some(s) => sdfg.start = s,
            None => return self.err("missing `sdfg.start`"),
        }
        Ok(sdfg)
    }

    fn alloc(&mut self) -> Result<DataDescriptor, SdirParseError> {
        let name = self.at_name()?;
        self.expect_punct(":")?;
        let kind = self.ident()?;
        self.expect_punct("<")?;
        let (shape, elem) = match kind.as_str() {
            "scalar" => (Vec::new(), self.elem()?),
            "array" => {
                let mut dims = vec![self.expr()?];
                loop {
                    self.expect_kw("x")?;
                    // After `x`: either the element type closing the shape,
                    // or another dimension.
                    if matches!(self.cur.peek(), Tok::Ident(s) if s == "i64" || s == "f64")
                        && matches!(self.cur.peek2(), Tok::Punct(">"))
                    {
                        break;
                    }
                    dims.push(self.expr()?);
                }
                (dims, self.elem()?)
            }
            other => return self.err(format!("expected `scalar` or `array`, found `{other}`")),
        };
        self.expect_punct(">")?;
        let mut d = DataDescriptor {
            name,
            shape,
            elem,
            transient: false,
            storage: Storage::Heap,
            lifetime: Lifetime::Global,
        };
        if self.cur.eat_punct("{") {
            while !self.cur.at_punct("}") {
                if self.cur.eat_kw("transient") {
                    d.transient = true;
                } else if self.cur.eat_kw("storage") {
                    self.expect_punct(":")?;
                    d.storage = match self.ident()?.as_str() {
                        "heap" => Storage::Heap,
                        "stack" => Storage::Stack,
                        "register" => Storage::Register,
                        other => return self.err(format!("unknown storage `{other}`")),
                    };
                } else if self.cur.eat_kw("lifetime") {
                    self.expect_punct(":")?;
                    d.lifetime = match self.ident()?.as_str() {
                        "global" => Lifetime::Global,
                        "state" => Lifetime::State,
                        other => return self.err(format!("unknown lifetime `{other}`")),
                    };
                } else {
                    return self.err(format!("unknown attribute {}", self.cur.peek()));
                }
                if !self.cur.eat_punct(",") {
                    break;
                }
            }
            self.expect_punct("}")?;
        }
        Ok(d)
    }

    fn elem(&mut self) -> Result<ElemType, SdirParseError> {
        match self.ident()?.as_str() {
            "i64" => Ok(ElemType::I64),
            "f64" => Ok(ElemType::F64),
            other => self.err(format!("expected element type, found `{other}`")),
        }
    }

    /// Body of a state or map: node declarations and memlets until `}`.
    fn level_body(
        &mut self,
        descriptors: &BTreeMap<String, DataDescriptor>,
    ) -> Result<(Vec<Node>, Vec<Memlet>), SdirParseError> {
        let mut nodes: Vec<Node> = Vec::new();
        let mut edges = Vec::new();
        while !self.cur.eat_punct("}") {
            if self.cur.is_eof() {
                return self.err("unexpected end of input, expected `}`");
            }
            if self.cur.at_punct("%") {
                self.cur.bump();
                let idx = self.int()? as usize;
                if idx != nodes.len() {
                    return self.err(format!("node handle %{idx} out of order, expected %{}", nodes.len()));
                }
                self.expect_punct("=")?;
                let dir = self.directive()?;
                let node = match dir.as_str() {
                    "access" => {
                        let c = self.at_name()?;
                        // Containers must be declared before the states that
                        // use them, so memlet subsets can default by kind.
                        if !descriptors.contains_key(&c) {
                            return self.err(format!("unknown container `{c}`"));
                        }
                        Node::Access(c)
                    }
                    "tasklet" => Node::Tasklet(self.tasklet()?),
                    "map" => Node::Map(self.map(descriptors)?),
                    other => return self.err(format!("unknown node kind `sdfg.{other}`")),
                };
                nodes.push(node);
                continue;
            }
            let dir = self.directive()?;
            match dir.as_str() {
                "load" | "store" | "copy" => edges.push(self.memlet(&nodes, descriptors)?),
                other => return self.err(format!("unknown directive `sdfg.{other}` in dataflow body")),
            }
        }
        Ok((nodes, edges))
    }

    fn int(&mut self) -> Result<i64, SdirParseError> {
        match self.cur.peek().clone() {
            Tok::Int(v) => {
                self.cur.bump();
                Ok(v)
            }
            other => self.err(format!("expected integer, found {other}")),
        }
    }

    fn tasklet(&mut self) -> Result<Tasklet, SdirParseError> {
        let name = self.at_name()?;
        let inputs = self.conn_list()?;
        self.expect_punct("->")?;
        let outputs = self.conn_list()?;
        self.expect_punct("{")?;
        let mut code = Vec::new();
        while !self.cur.eat_punct("}") {
            if self.cur.is_eof() {
                return self.err("unexpected end of input in tasklet code");
            }
            if self.cur.eat_punct(";") {
                continue;
            }
            let target = self.ident()?;
            self.expect_punct("=")?;
            let expr = code::parse_code_expr_cursor(&mut self.cur)
                .map_err(|e| SdirParseError { line: e.line, col: e.col, msg: e.msg })?;
            code.push((target, expr));
        }
        Ok(Tasklet { name, inputs, outputs, code })
    }

    fn conn_list(&mut self) -> Result<Vec<String>, SdirParseError> {
        self.expect_punct("(")?;
        let mut out = Vec::new();
        if !self.cur.at_punct(")") {
            loop {
                out.push(self.ident()?);
                if !self.cur.eat_punct(",") {
                    break;
                }
            }
        }
        self.expect_punct(")")?;
        Ok(out)
    }

    fn map(
        &mut self,
        descriptors: &BTreeMap<String, DataDescriptor>,
    ) -> Result<MapScope, SdirParseError> {
        let name = self.at_name()?;
        self.expect_punct("(")?;
        let mut params = Vec::new();
        loop {
            self.expect_punct("%")?;
            params.push(self.ident()?);
            if !self.cur.eat_punct(",") {
                break;
            }
        }
        self.expect_punct(")")?;
        self.expect_punct("=")?;
        let begins = self.expr_tuple()?;
        self.expect_kw("to")?;
        let ends = self.expr_tuple()?;
        self.expect_kw("step")?;
        let steps = self.expr_tuple()?;
        if begins.len() != params.len() || ends.len() != params.len() || steps.len() != params.len()
        {
            return self.err("map bounds tuples must match the parameter count");
        }
        let ranges = begins
            .into_iter()
            .zip(ends)
            .zip(steps)
            .map(|((b, e), s)| SymRange {
                begin: b,
                // Exclusive bound in the text, inclusive in the graph.
                end: simplify(&SymExpr::sub(e, SymExpr::Const(1))),
                stride: s,
            })
            .collect();
        self.expect_punct("{")?;
        let (nodes, edges) = self.level_body(descriptors)?;
        Ok(MapScope { name, params, ranges, nodes, edges })
    }

    fn expr_tuple(&mut self) -> Result<Vec<SymExpr>, SdirParseError> {
        self.expect_punct("(")?;
        let mut out = Vec::new();
        loop {
            out.push(self.expr()?);
            if !self.cur.eat_punct(",") {
                break;
            }
        }
        self.expect_punct(")")?;
        Ok(out)
    }

    fn memlet(
        &mut self,
        nodes: &[Node],
        descriptors: &BTreeMap<String, DataDescriptor>,
    ) -> Result<Memlet, SdirParseError> {
        let (src, src_subset) = self.endpoint(nodes, descriptors)?;
        self.expect_punct("->")?;
        let (dst, dst_subset) = self.endpoint(nodes, descriptors)?;
        let wcr = if self.cur.eat_kw("wcr") {
            self.expect_punct("(")?;
            let sym = self.string()?;
            let w = Wcr::parse(&sym)
                .ok_or_else(|| self.err::<()>(format!("unknown wcr `{sym}`")).unwrap_err())?;
            self.expect_punct(")")?;
            Some(w)
        } else {
            None
        };
        Ok(Memlet { src, dst, src_subset, dst_subset, wcr })
    }

    /// `%k`, `%k.conn`, or `^container`, optionally subscripted.
    fn endpoint(
        &mut self,
        nodes: &[Node],
        descriptors: &BTreeMap<String, DataDescriptor>,
    ) -> Result<(Endpoint, Option<Subset>), SdirParseError> {
        let (endpoint, container): (Endpoint, Option<String>) = if self.cur.eat_punct("^") {
            let c = self.ident()?;
            if !descriptors.contains_key(&c) {
                return self.err(format!("unknown container `{c}`"));
            }
            (Endpoint::Boundary(c.clone()), Some(c))
        } else {
            self.expect_punct("%")?;
            let idx = self.int()? as usize;
            if idx >= nodes.len() {
                return self.err(format!("node handle %{idx} is not declared yet"));
            }
            if self.cur.eat_punct(".") {
                let conn = self.ident()?;
                (Endpoint::Conn(idx, conn), None)
            } else {
                (Endpoint::Node(idx), nodes[idx].as_access().map(str::to_string))
            }
        };

        let explicit = if self.cur.eat_punct("[") {
            let mut ranges = Vec::new();
            loop {
                ranges.push(self.range()?);
                if !self.cur.eat_punct(",") {
                    break;
                }
            }
            self.expect_punct("]")?;
            Some(Subset(ranges))
        } else {
            None
        };

        let subset = match (container, explicit) {
            (None, Some(_)) => {
                return self.err("this endpoint takes no subset");
            }
            (None, None) => None,
            (Some(_), Some(s)) => Some(s),
            (Some(c), None) => {
                if descriptors[&c].is_scalar() {
                    Some(Subset::scalar())
                } else {
                    return self.err(format!("access of array `{c}` needs a subset"));
                }
            }
        };
        Ok((endpoint, subset))
    }

    fn range(&mut self) -> Result<SymRange, SdirParseError> {
        let begin = self.expr()?;
        if !self.cur.eat_punct(":") {
            return Ok(SymRange::index(begin));
        }
        let end = self.expr()?;
        if !self.cur.eat_punct(":") {
            return Ok(SymRange::span(begin, end));
        }
        let stride = self.expr()?;
        Ok(SymRange { begin, end, stride })
    }

    fn interstate_edge(&mut self) -> Result<InterstateEdge, SdirParseError> {
        let src = self.at_name()?;
        self.expect_punct("->")?;
        let dst = self.at_name()?;
        let mut edge = InterstateEdge {
            src,
            dst,
            condition: None,
            is_else: false,
            assignments: Vec::new(),
        };
        while self.cur.eat_punct("(") {
            if self.cur.eat_kw("cond") {
                self.expect_punct(":")?;
                let text = self.string()?;
                let pred = parse_predicate(&text)
                    .map_err(|e| self.err::<()>(format!("in cond: {e}")).unwrap_err())?;
                edge.condition = Some(pred);
            } else if self.cur.eat_kw("else") {
                edge.is_else = true;
            } else if self.cur.eat_kw("assign") {
                self.expect_punct(":")?;
                let text = self.string()?;
                for part in split_top_level(&text) {
                    let Some((name, rhs)) = part.split_once(':') else {
                        return self.err(format!("assignment `{part}` is missing `:`"));
                    };
                    let name = name.trim().to_string();
                    let rhs = parse_expr(rhs.trim())
                        .map_err(|e| self.err::<()>(format!("in assign: {e}")).unwrap_err())?;
                    edge.assignments.push((name, rhs));
                }
            } else {
                return self.err(format!("unknown transition clause {}", self.cur.peek()));
            }
            self.expect_punct(")")?;
        }
        Ok(edge)
    }
}

/// Splits on commas outside parentheses.
fn split_top_level(s: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut cur = String::new();
    for ch in s.chars() {
        match ch {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                out.push(std::mem::take(&mut cur));
                continue;
            }
            _ => {}
        }
        cur.push(ch);
    }
    if !cur.trim().is_empty() {
        out.push(cur);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::super::{print_sdir, validate};
    use super::*;

    const ELEMENTWISE: &str = r#"
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
  sdfg.start @s0
}
"#;

    #[test]
    fn parses_a_map_program_and_derives_aggregates() {
        let sdfg = parse_sdir(ELEMENTWISE).unwrap();
        assert_eq!(sdfg.symbols, vec!["N"]);
        assert_eq!(sdfg.states.len(), 1);
        let st = &sdfg.states[0];
        let m = st.nodes[2].as_map().unwrap();
        assert_eq!(m.params, vec!["i"]);
        assert_eq!(m.ranges[0].to_string(), "0:N - 1");
        // Aggregates were derived onto the existing access nodes.
        assert_eq!(st.edges.len(), 2);
        validate(&sdfg).unwrap();
    }

    #[test]
    fn print_then_parse_is_a_fixpoint() {
        let sdfg = parse_sdir(ELEMENTWISE).unwrap();
        let text = print_sdir(&sdfg);
        let again = parse_sdir(&text).unwrap();
        assert_eq!(sdfg, again);
        assert_eq!(print_sdir(&again), text);
    }

    #[test]
    fn parses_states_edges_and_scalars() {
        let src = r#"
sdfg @count (syms: N) {
  sdfg.alloc @acc : scalar<i64> {transient, storage: register, lifetime: global}
  sdfg.alloc @out : array<sym("N") x i64> {}
  sdfg.result @out
  sdfg.state @init {
    %0 = sdfg.tasklet @t0 () -> (o) { o = 0 }
    %1 = sdfg.access @acc
    sdfg.store %0.o -> %1
  }
  sdfg.state @body {
    %0 = sdfg.access @acc
    %1 = sdfg.tasklet @t1 (v) -> (o) { o = v + i }
    %2 = sdfg.access @acc
    sdfg.load %0 -> %1.v
    sdfg.store %1.o -> %2
  }
  sdfg.state @flush {
    %0 = sdfg.access @acc
    %1 = sdfg.access @out
    sdfg.copy %0 -> %1[0]
  }
  sdfg.edge @init -> @body (assign: "i: 0")
  sdfg.edge @body -> @body (cond: "i + 1 < N") (assign: "i: i + 1")
  sdfg.edge @body -> @flush (else)
  sdfg.start @init
}
"#;
        let sdfg = parse_sdir(src).unwrap();
        validate(&sdfg).unwrap();
        assert_eq!(sdfg.edges.len(), 3);
        assert!(sdfg.edges[2].is_else);
        assert_eq!(sdfg.edges[1].assignments[0].0, "i");
        let text = print_sdir(&sdfg);
        assert_eq!(parse_sdir(&text).unwrap(), sdfg);
    }

    #[test]
    fn rejects_subset_on_connectors() {
        let src = r#"
sdfg @bad {
  sdfg.alloc @A : array<4 x f64> {}
  sdfg.state @s0 {
    %0 = sdfg.access @A
    %1 = sdfg.tasklet @t (x) -> (o) { o = x }
    sdfg.load %0[0] -> %1.x[0]
  }
  sdfg.start @s0
}
"#;
        let e = parse_sdir(src).unwrap_err();
        assert!(e.msg.contains("takes no subset"), "{e}");
    }

    #[test]
    fn rejects_array_access_without_subset() {
        let src = r#"
sdfg @bad {
  sdfg.alloc @A : array<4 x f64> {}
  sdfg.alloc @c : scalar<f64> {}
  sdfg.state @s0 {
    %0 = sdfg.access @A
    %1 = sdfg.access @c
    sdfg.copy %0 -> %1
  }
  sdfg.start @s0
}
"#;
        let e = parse_sdir(src).unwrap_err();
        assert!(e.msg.contains("needs a subset"), "{e}");
    }

    #[test]
    fn multidimensional_shapes_round_trip() {
        let src = r#"
sdfg @mm (syms: N, M, K) {
  sdfg.alloc @A : array<sym("N") x sym("K") x f64> {}
  sdfg.alloc @T : array<(sym("N") - 1) x 8 x f64> {transient, storage: stack, lifetime: state}
  sdfg.state @s0 {
  }
  sdfg.start @s0
}
"#;
        let sdfg = parse_sdir(src).unwrap();
        assert_eq!(sdfg.descriptors["A"].shape.len(), 2);
        assert_eq!(sdfg.descriptors["T"].shape[0].to_string(), "N - 1");
        assert_eq!(sdfg.descriptors["T"].storage, Storage::Stack);
        assert_eq!(sdfg.descriptors["T"].lifetime, Lifetime::State);
        let text = print_sdir(&sdfg);
        assert_eq!(parse_sdir(&text).unwrap(), sdfg);
    }

    #[test]
    fn wcr_clause_parses() {
        let src = r#"
sdfg @acc (syms: N) {
  assume "N >= 1"
  sdfg.alloc @A : array<sym("N") x f64> {}
  sdfg.alloc @s : scalar<f64> {}
  sdfg.result @s
  sdfg.state @s0 {
    %0 = sdfg.access @A
    %1 = sdfg.access @s
    %2 = sdfg.map @m (%i) = (0) to (sym("N")) step (1) {
      %0 = sdfg.tasklet @t (a) -> (o) { o = a }
      sdfg.load ^A[i] -> %0.a
      sdfg.store %0.o -> ^s wcr("+")
    }
  }
  sdfg.start @s0
}
"#;
        let sdfg = parse_sdir(src).unwrap();
        validate(&sdfg).unwrap();
        let m = sdfg.states[0].nodes[2].as_map().unwrap();
        assert_eq!(m.edges[1].wcr, Some(Wcr::Add));
        // The aggregate write inherits the agreed wcr.
        let agg = sdfg.states[0]
            .edges
            .iter()
            .find(|e| matches!(e.src, Endpoint::Node(2)))
            .unwrap();
        assert_eq!(agg.wcr, Some(Wcr::Add));
    }
}
