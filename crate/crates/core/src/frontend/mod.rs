//! Structured control-flow frontend dialect: SSA values, memrefs with
//! symbolic or deferred (`?`) shapes, structured `for`/`while`/`if`, and a
//! small arithmetic/math op set. Programs parse from `.dcir` text, are
//! verified, optionally transformed by control-centric passes, and either
//! interpreted directly or lowered to the dataflow representation.

mod interp;
mod parse;
mod passes;
mod print;
mod verify;

pub use interp::{interpret_program, FrontInterpError};
pub use parse::{parse_program, ParseError};
pub use passes::{cse, dce_frontend, inline, licm, run_frontend_pipeline, InlineError};
pub use print::print_program;
pub use verify::{verify_program, VerifyError};

use crate::symbolic::SymExpr;
use crate::value::ElemType;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Dim {
    Lit(i64),
    /// `?`: size deferred to the concrete buffer (parameters only).
    Dyn,
    Sym(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MemRefType {
    pub dims: Vec<Dim>,
    pub elem: ElemType,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Type {
    Scalar(ElemType),
    MemRef(MemRefType),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ArithKind {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CmpPred {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MathKind {
    Exp,
    Log,
    Sqrt,
    Tanh,
}

#[derive(Debug, Clone, PartialEq)]
pub enum OpKind {
    ConstI(i64),
    ConstF(f64),
    /// Reads a declared size symbol into an SSA value.
    SymRead(String),
    Arith(ArithKind, String, String),
    Cmp(CmpPred, String, String),
    Math(MathKind, String),
    Alloc(MemRefType),
    Load { mem: String, indices: Vec<String> },
    Store { value: String, mem: String, indices: Vec<String> },
    For { iv: String, lb: String, ub: String, step: i64, body: Block },
    While { cond: Block, cond_val: String, body: Block },
    If { cond: String, then_blk: Block, else_blk: Block },
    Call { callee: String, args: Vec<String> },
    Return(Option<String>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Op {
    /// SSA name defined by this op, without the `%` sigil.
    pub result: Option<String>,
    pub kind: OpKind,
    pub line: u32,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Block(pub Vec<Op>);

#[derive(Debug, Clone, PartialEq)]
pub struct Function {
    pub name: String,
    pub params: Vec<(String, Type)>,
    pub result: Option<Type>,
    pub symbols: Vec<String>,
    pub is_entry: bool,
    pub assume: Vec<SymExpr>,
    pub body: Block,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    pub functions: Vec<Function>,
}

impl Program {
    pub fn entry(&self) -> &Function {
        self.functions
            .iter()
            .find(|f| f.is_entry)
            .expect("verified programs have an entry function")
    }

    pub fn function(&self, name: &str) -> Option<&Function> {
        self.functions.iter().find(|f| f.name == name)
    }
}

impl OpKind {
    /// True when the operation always binds a result value. Calls are
    /// excluded: whether they bind one depends on the callee signature.
    pub fn has_result(&self) -> bool {
        !matches!(
            self,
            OpKind::Store { .. }
                | OpKind::For { .. }
                | OpKind::While { .. }
                | OpKind::If { .. }
                | OpKind::Return(_)
                | OpKind::Call { .. }
        )
    }

    /// Ops with no side effects and no possible runtime error; safe to
    /// speculate (hoist or delete). Integer div/rem and loads are excluded:
    /// they can raise, so moving them may introduce an error a skipped loop
    /// body would have avoided. `int_div` says whether a div/rem op works
    /// on integers (caller knows the operand types; this type doesn't).
    pub fn is_speculatable(&self, int_div: bool) -> bool {
        match self {
            OpKind::ConstI(_) | OpKind::ConstF(_) | OpKind::SymRead(_) => true,
            OpKind::Cmp(..) | OpKind::Math(..) => true,
            OpKind::Arith(ArithKind::Add | ArithKind::Sub | ArithKind::Mul, ..) => true,
            OpKind::Arith(ArithKind::Div | ArithKind::Rem, ..) => !int_div,
            _ => false,
        }
    }

    /// Pure value-producing ops (deletable when unused). Loads and allocs
    /// count: a well-formed program's unused load has no observable effect.
    pub fn is_pure_value(&self) -> bool {
        matches!(
            self,
            OpKind::ConstI(_)
                | OpKind::ConstF(_)
                | OpKind::SymRead(_)
                | OpKind::Arith(..)
                | OpKind::Cmp(..)
                | OpKind::Math(..)
                | OpKind::Load { .. }
                | OpKind::Alloc(_)
        )
    }

    /// Operand SSA names read directly by this op (nested blocks excluded).
    pub fn operands(&self) -> Vec<&String> {
        match self {
            OpKind::ConstI(_) | OpKind::ConstF(_) | OpKind::SymRead(_) | OpKind::Alloc(_) => vec![],
            OpKind::Arith(_, a, b) | OpKind::Cmp(_, a, b) => vec![a, b],
            OpKind::Math(_, a) => vec![a],
            OpKind::Load { mem, indices } => {
                let mut v = vec![mem];
                v.extend(indices);
                v
            }
            OpKind::Store { value, mem, indices } => {
                let mut v = vec![value, mem];
                v.extend(indices);
                v
            }
            OpKind::For { lb, ub, .. } => vec![lb, ub],
            OpKind::While { .. } => vec![],
            OpKind::If { cond, .. } => vec![cond],
            OpKind::Call { args, .. } => args.iter().collect(),
            OpKind::Return(v) => v.iter().collect(),
        }
    }

    pub fn sub_blocks(&self) -> Vec<&Block> {
        match self {
            OpKind::For { body, .. } => vec![body],
            OpKind::While { cond, body, .. } => vec![cond, body],
            OpKind::If { then_blk, else_blk, .. } => vec![then_blk, else_blk],
            _ => vec![],
        }
    }

    pub fn sub_blocks_mut(&mut self) -> Vec<&mut Block> {
        match self {
            OpKind::For { body, .. } => vec![body],
            OpKind::While { cond, body, .. } => vec![cond, body],
            OpKind::If { then_blk, else_blk, .. } => vec![then_blk, else_blk],
            _ => vec![],
        }
    }
}

impl std::fmt::Display for Dim {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Dim::Lit(v) => write!(f, "{v}"),
            Dim::Dyn => write!(f, "?"),
            Dim::Sym(s) => write!(f, "{s}"),
        }
    }
}

impl std::fmt::Display for MemRefType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "memref<")?;
        for d in &self.dims {
            write!(f, "{d}x")?;
        }
        write!(f, "{}>", self.elem)
    }
}

impl std::fmt::Display for Type {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Type::Scalar(e) => write!(f, "{e}"),
            Type::MemRef(m) => write!(f, "{m}"),
        }
    }
}
