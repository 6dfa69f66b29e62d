//! Graph rewriting passes and the optimization pipeline driver.
//!
//! Every pass takes a graph, rewrites in place, and returns a report of
//! what changed. The pipeline validates the graph after each pass and
//! aborts with the offending pass name if a rewrite broke an invariant.

mod array_elim;
mod consolidate;
mod dead_dataflow;
mod dead_state;
mod detect_updates;
mod loop_fusion;
mod placement;
mod scalar_to_symbol;
mod simplify_graph;
mod symbol_propagation;
pub(crate) mod util;

pub use array_elim::array_elimination;
pub use consolidate::memlet_consolidation;
pub use dead_dataflow::dead_dataflow_elimination;
pub use dead_state::dead_state_elimination;
pub use detect_updates::detect_updates;
pub use loop_fusion::map_loop_fusion;
pub use placement::allocation_placement;
pub use scalar_to_symbol::scalar_to_symbol;
pub use simplify_graph::simplify_graph;
pub use symbol_propagation::symbol_propagation;

use crate::sdfg::{validate, CodeExpr, Node, Sdfg, ValidateError};

/// What a single pass invocation changed.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PassReport {
    pub pass: String,
    pub rewrites: u64,
    pub symbols_eliminated: u64,
    pub descriptors_eliminated: u64,
    /// Rank >= 1 descriptors among the eliminated (the interesting subset
    /// for data-movement accounting; scalars are free to carry around).
    pub arrays_eliminated: u64,
    pub states_removed: u64,
}

impl PassReport {
    pub fn new(pass: &str) -> PassReport {
        PassReport { pass: pass.to_string(), ..Default::default() }
    }

    /// Total change count; zero means the pass was a no-op.
    pub fn total(&self) -> u64 {
        self.rewrites
            + self.symbols_eliminated
            + self.descriptors_eliminated
            + self.states_removed
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.pass,
            self.rewrites,
            self.symbols_eliminated,
            self.descriptors_eliminated,
            self.arrays_eliminated,
            self.states_removed
        )
    }
}

pub const PASS_CSV_HEADER: &str =
    "pass,rewrites,symbols_eliminated,descriptors_eliminated,arrays_eliminated,states_removed";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum OptLevel {
    O0,
    O1,
    O2,
}

impl std::str::FromStr for OptLevel {
    type Err = String;
    fn from_str(s: &str) -> Result<OptLevel, String> {
        match s {
            "O0" | "o0" | "0" => Ok(OptLevel::O0),
            "O1" | "o1" | "1" => Ok(OptLevel::O1),
            "O2" | "o2" | "2" => Ok(OptLevel::O2),
            other => Err(format!("unknown optimization level `{other}` (expected O0, O1, or O2)")),
        }
    }
}

impl std::fmt::Display for OptLevel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            OptLevel::O0 => write!(f, "O0"),
            OptLevel::O1 => write!(f, "O1"),
            OptLevel::O2 => write!(f, "O2"),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PipelineOptions {
    /// Constant-size transients at or below this byte count live on the stack.
    pub stack_threshold: u64,
}

impl Default for PipelineOptions {
    fn default() -> PipelineOptions {
        PipelineOptions { stack_threshold: 4096 }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PassError {
    #[error("unknown pass `{0}`")]
    UnknownPass(String),
    #[error("pass `{pass}` left the graph invalid: {err}")]
    Invalid {
        pass: String,
        #[source]
        err: ValidateError,
    },
}

/// Pass names accepted by `run_pass`, in pipeline order.
pub const PASS_NAMES: &[&str] = &[
    "scalar-to-symbol",
    "symbol-propagation",
    "detect-updates",
    "simplify",
    "dead-state",
    "dead-dataflow",
    "array-elimination",
    "memlet-consolidation",
    "allocation-placement",
    "map-loop-fusion",
];

const ROUND_PASSES: &[&str] = &[
    "scalar-to-symbol",
    "symbol-propagation",
    "detect-updates",
    "simplify",
    "dead-state",
    "dead-dataflow",
    "array-elimination",
    "memlet-consolidation",
];

const MAX_ROUNDS: usize = 10;

fn dispatch(g: &mut Sdfg, name: &str, opts: &PipelineOptions) -> Result<PassReport, PassError> {
    Ok(match name {
        "scalar-to-symbol" => scalar_to_symbol(g),
        "symbol-propagation" => symbol_propagation(g),
        "detect-updates" => detect_updates(g),
        "simplify" => simplify_graph(g),
        "dead-state" => dead_state_elimination(g),
        "dead-dataflow" => dead_dataflow_elimination(g),
        "array-elimination" => array_elimination(g),
        "memlet-consolidation" => memlet_consolidation(g),
        "allocation-placement" => allocation_placement(g, opts.stack_threshold),
        "map-loop-fusion" => map_loop_fusion(g),
        "debug-break" => debug_break(g),
        other => return Err(PassError::UnknownPass(other.to_string())),
    })
}

/// Runs one pass by name and validates the result.
pub fn run_pass(g: &mut Sdfg, name: &str, opts: &PipelineOptions) -> Result<PassReport, PassError> {
    let report = dispatch(g, name, opts)?;
    validate(g).map_err(|err| PassError::Invalid { pass: name.to_string(), err })?;
    Ok(report)
}

#[derive(Debug, Clone, Default)]
pub struct PipelineOutcome {
    pub reports: Vec<PassReport>,
    pub warnings: Vec<String>,
}

/// Runs the pipeline for a level. O0 only validates. O1 iterates the
/// simplification passes to a fixpoint (bounded round count). O2 adds
/// allocation placement and loop fusion, then re-runs the O1 set.
pub fn run_pipeline(
    g: &mut Sdfg,
    level: OptLevel,
    opts: &PipelineOptions,
) -> Result<PipelineOutcome, PassError> {
    let mut out = PipelineOutcome::default();
    validate(g).map_err(|err| PassError::Invalid { pass: "input".to_string(), err })?;
    if level == OptLevel::O0 {
        return Ok(out);
    }
    run_rounds(g, opts, &mut out)?;
    if level == OptLevel::O2 {
        out.reports.push(run_pass(g, "allocation-placement", opts)?);
        out.reports.push(run_pass(g, "map-loop-fusion", opts)?);
        run_rounds(g, opts, &mut out)?;
    }
    Ok(out)
}

fn run_rounds(
    g: &mut Sdfg,
    opts: &PipelineOptions,
    out: &mut PipelineOutcome,
) -> Result<(), PassError> {
    for round in 0..MAX_ROUNDS {
        let mut changes = 0;
        for name in ROUND_PASSES {
            let report = run_pass(g, name, opts)?;
            changes += report.total();
            out.reports.push(report);
        }
        if changes == 0 {
            return Ok(());
        }
        if round + 1 == MAX_ROUNDS {
            out.warnings.push(format!(
                "simplification did not settle within {MAX_ROUNDS} rounds; keeping the last valid graph"
            ));
        }
    }
    Ok(())
}

/// Negative control: corrupts the first tasklet it finds by adding one to
/// its first expression. Exists so differential tests can prove they would
/// catch a miscompiling rewrite.
fn debug_break(g: &mut Sdfg) -> PassReport {
    let mut report = PassReport::new("debug-break");
    for st in &mut g.states {
        for n in &mut st.nodes {
            if let Node::Tasklet(t) = n {
                if let Some((_, expr)) = t.code.first_mut() {
                    let old = expr.clone();
                    *expr = CodeExpr::Bin(
                        crate::sdfg::CodeBinOp::Add,
                        Box::new(old),
                        Box::new(CodeExpr::IntLit(1)),
                    );
                    report.rewrites = 1;
                    return report;
                }
            }
        }
    }
    report
}
