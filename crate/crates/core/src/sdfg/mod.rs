//! The dataflow-centric program representation: a state machine whose states
//! hold acyclic dataflow graphs over data containers, parametric map scopes,
//! and tasklets, with symbolic subsets on every data movement edge.

mod code;
mod dot;
mod interp;
mod json;
mod parse;
mod print;
mod propagate;
mod validate;

pub use code::{parse_code, CodeBinOp, CodeCmp, CodeError, CodeEvalError, CodeExpr, CodeMath};
pub use dot::to_dot;
pub use interp::{
    check_map_determinism, interpret_sdfg, DeterminismOutcome, SdfgInterpError,
    DETERMINISM_TOLERANCE,
};
pub use json::{from_json, to_json, JsonError};
pub use parse::{parse_sdir, SdirParseError};
pub use print::print_sdir;
pub use propagate::propagate_memlets;
pub use validate::{validate, ValidateError};

use crate::symbolic::{Subset, SymExpr};
use crate::value::ElemType;
use std::collections::BTreeMap;

/// Where a container's backing memory lives in generated code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Storage {
    Heap,
    Stack,
    Register,
}

impl std::fmt::Display for Storage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Storage::Heap => "heap",
            Storage::Stack => "stack",
            Storage::Register => "register",
        })
    }
}

/// How long a transient's allocation lives: the whole program, or one state
/// execution (re-allocated, and re-poisoned, on every state entry).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Lifetime {
    Global,
    State,
}

impl std::fmt::Display for Lifetime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Lifetime::Global => "global",
            Lifetime::State => "state",
        })
    }
}

/// A named data container: array (non-empty shape) or scalar (empty shape).
#[derive(Debug, Clone, PartialEq)]
pub struct DataDescriptor {
    pub name: String,
    pub shape: Vec<SymExpr>,
    pub elem: ElemType,
    /// Transients are managed by the program; non-transients are the
    /// caller-visible inputs and outputs.
    pub transient: bool,
    pub storage: Storage,
    pub lifetime: Lifetime,
}

impl DataDescriptor {
    pub fn is_scalar(&self) -> bool {
        self.shape.is_empty()
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    /// Total element count as a symbolic expression.
    pub fn size(&self) -> SymExpr {
        let mut acc = SymExpr::Const(1);
        for d in &self.shape {
            acc = SymExpr::mul(acc, d.clone());
        }
        crate::symbolic::simplify(&acc)
    }
}

/// Write-conflict resolution: how a write combines with the existing value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Wcr {
    Add,
    Mul,
    Min,
    Max,
}

impl Wcr {
    pub fn symbol(&self) -> &'static str {
        match self {
            Wcr::Add => "+",
            Wcr::Mul => "*",
            Wcr::Min => "min",
            Wcr::Max => "max",
        }
    }

    pub fn parse(s: &str) -> Option<Wcr> {
        Some(match s {
            "+" => Wcr::Add,
            "*" => Wcr::Mul,
            "min" => Wcr::Min,
            "max" => Wcr::Max,
            _ => return None,
        })
    }
}

/// One end of a dataflow edge.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Endpoint {
    /// A node (access node or map) by index in the surrounding node list.
    Node(usize),
    /// A tasklet connector: node index plus connector name.
    Conn(usize, String),
    /// Inside a map: the named container as seen across the map boundary.
    Boundary(String),
}

impl Endpoint {
    pub fn node_index(&self) -> Option<usize> {
        match self {
            Endpoint::Node(i) | Endpoint::Conn(i, _) => Some(*i),
            Endpoint::Boundary(_) => None,
        }
    }
}

/// A data movement edge. Subsets describe the array sides: an access or
/// boundary endpoint carries Some(subset) (empty-range subset for scalars),
/// a connector endpoint carries None.
#[derive(Debug, Clone, PartialEq)]
pub struct Memlet {
    pub src: Endpoint,
    pub dst: Endpoint,
    pub src_subset: Option<Subset>,
    pub dst_subset: Option<Subset>,
    pub wcr: Option<Wcr>,
}

/// Smallest unit of computation: named input/output connectors and one
/// assignment per output connector.
#[derive(Debug, Clone, PartialEq)]
pub struct Tasklet {
    pub name: String,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub code: Vec<(String, CodeExpr)>,
}

/// A parametric scope: the body executes once per point of the iteration
/// space. Inner edges reach enclosing containers through boundary endpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct MapScope {
    pub name: String,
    pub params: Vec<String>,
    /// Inclusive per-parameter ranges.
    pub ranges: Vec<crate::symbolic::SymRange>,
    pub nodes: Vec<Node>,
    pub edges: Vec<Memlet>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    /// A view of a data container within the dataflow graph.
    Access(String),
    Tasklet(Tasklet),
    Map(MapScope),
}

impl Node {
    pub fn as_access(&self) -> Option<&str> {
        match self {
            Node::Access(c) => Some(c),
            _ => None,
        }
    }

    pub fn as_tasklet(&self) -> Option<&Tasklet> {
        match self {
            Node::Tasklet(t) => Some(t),
            _ => None,
        }
    }

    pub fn as_map(&self) -> Option<&MapScope> {
        match self {
            Node::Map(m) => Some(m),
            _ => None,
        }
    }
}

/// One state: an acyclic dataflow graph executed to completion on entry.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct State {
    pub name: String,
    pub nodes: Vec<Node>,
    pub edges: Vec<Memlet>,
}

/// Transition between states. Conditions are evaluated in declaration
/// order, first true edge wins; an `is_else` edge fires when no conditional
/// sibling did. Assignment right-hand sides all read the pre-transition
/// values, then apply in order.
#[derive(Debug, Clone, PartialEq)]
pub struct InterstateEdge {
    pub src: String,
    pub dst: String,
    pub condition: Option<SymExpr>,
    pub is_else: bool,
    pub assignments: Vec<(String, SymExpr)>,
}

/// A whole dataflow program.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Sdfg {
    pub name: String,
    /// Free size symbols that must be bound before running.
    pub symbols: Vec<String>,
    pub assumptions: Vec<SymExpr>,
    pub descriptors: BTreeMap<String, DataDescriptor>,
    pub states: Vec<State>,
    pub edges: Vec<InterstateEdge>,
    pub start: String,
    /// Containers handed back to the caller when execution finishes.
    pub results: Vec<String>,
}

impl Sdfg {
    pub fn state(&self, name: &str) -> Option<&State> {
        self.states.iter().find(|s| s.name == name)
    }

    pub fn state_mut(&mut self, name: &str) -> Option<&mut State> {
        self.states.iter_mut().find(|s| s.name == name)
    }

    /// Outgoing interstate edges of a state, in declaration order.
    pub fn out_edges(&self, state: &str) -> Vec<&InterstateEdge> {
        self.edges.iter().filter(|e| e.src == state).collect()
    }

    /// Names assigned on any interstate edge (loop counters and promoted
    /// scalars live here).
    pub fn assigned_symbols(&self) -> std::collections::BTreeSet<String> {
        self.edges
            .iter()
            .flat_map(|e| e.assignments.iter().map(|(n, _)| n.clone()))
            .collect()
    }

    /// All symbol-like names a condition/subset expression may reference:
    /// declared symbols, edge-assigned symbols, and map parameters resolve
    /// before scalar container names do.
    pub fn known_symbols(&self) -> std::collections::BTreeSet<String> {
        let mut out: std::collections::BTreeSet<String> =
            self.symbols.iter().cloned().collect();
        out.extend(self.assigned_symbols());
        for st in &self.states {
            collect_map_params(&st.nodes, &mut out);
        }
        out
    }
}

fn collect_map_params(nodes: &[Node], out: &mut std::collections::BTreeSet<String>) {
    for n in nodes {
        if let Node::Map(m) = n {
            out.extend(m.params.iter().cloned());
            collect_map_params(&m.nodes, out);
        }
    }
}

impl State {
    /// Index of an access node for the container, if present.
    pub fn find_access(&self, container: &str) -> Option<usize> {
        self.nodes
            .iter()
            .position(|n| matches!(n, Node::Access(c) if c == container))
    }

    /// Container name behind an endpoint, when it has one.
    pub fn endpoint_container<'a>(&'a self, e: &'a Endpoint) -> Option<&'a str> {
        match e {
            Endpoint::Node(i) => self.nodes.get(*i).and_then(|n| n.as_access()),
            Endpoint::Conn(..) => None,
            Endpoint::Boundary(c) => Some(c),
        }
    }

    /// Topological order over node indices; Err carries a node on a cycle.
    pub fn topo_order(&self) -> Result<Vec<usize>, usize> {
        topo_order_of(self.nodes.len(), &self.edges)
    }
}

impl MapScope {
    pub fn endpoint_container<'a>(&'a self, e: &'a Endpoint) -> Option<&'a str> {
        match e {
            Endpoint::Node(i) => self.nodes.get(*i).and_then(|n| n.as_access()),
            Endpoint::Conn(..) => None,
            Endpoint::Boundary(c) => Some(c),
        }
    }

    pub fn topo_order(&self) -> Result<Vec<usize>, usize> {
        topo_order_of(self.nodes.len(), &self.edges)
    }
}

/// Kahn topological sort over edges whose endpoints name node indices;
/// boundary endpoints impose no ordering.
pub(crate) fn topo_order_of(n: usize, edges: &[Memlet]) -> Result<Vec<usize>, usize> {
    let mut indeg = vec![0usize; n];
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for e in edges {
        if let (Some(a), Some(b)) = (e.src.node_index(), e.dst.node_index()) {
            if a < n && b < n {
                adj[a].push(b);
                indeg[b] += 1;
            }
        }
    }
    let mut queue: std::collections::VecDeque<usize> =
        (0..n).filter(|i| indeg[*i] == 0).collect();
    let mut out = Vec::with_capacity(n);
    while let Some(i) = queue.pop_front() {
        out.push(i);
        for &j in &adj[i] {
            indeg[j] -= 1;
            if indeg[j] == 0 {
                queue.push_back(j);
            }
        }
    }
    if out.len() == n {
        Ok(out)
    } else {
        Err((0..n).find(|i| indeg[*i] > 0).unwrap_or(0))
    }
}

/// True when there is a directed path from node `from` to node `to`.
pub(crate) fn reaches(n: usize, edges: &[Memlet], from: usize, to: usize) -> bool {
    if from == to {
        return true;
    }
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for e in edges {
        if let (Some(a), Some(b)) = (e.src.node_index(), e.dst.node_index()) {
            if a < n && b < n {
                adj[a].push(b);
            }
        }
    }
    let mut seen = vec![false; n];
    let mut stack = vec![from];
    while let Some(i) = stack.pop() {
        if i == to {
            return true;
        }
        if std::mem::replace(&mut seen[i], true) {
            continue;
        }
        stack.extend(adj[i].iter().copied().filter(|j| !seen[*j]));
    }
    false
}
