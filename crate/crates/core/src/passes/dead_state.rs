//! Removes transitions that can never fire and states that can never run.
//!
//! A condition the prover refutes under the graph's assumptions deletes its
//! edge; a condition the prover confirms promotes the edge to unconditional
//! (when it is first in line) and deletes its siblings. Whatever the start
//! state can no longer reach is dropped.

use super::PassReport;
use crate::sdfg::Sdfg;
use crate::symbolic::{prove, Assumptions, Truth};
use std::collections::BTreeSet;

pub fn dead_state_elimination(g: &mut Sdfg) -> PassReport {
    let mut report = PassReport::new("dead-state");
    let asm = Assumptions::new(g.assumptions.clone()).unwrap_or_default();
    loop {
        let mut changed = false;

        // Refuted conditions never fire.
        let before = g.edges.len();
        g.edges.retain(|e| match &e.condition {
            Some(c) => prove(c, &asm) != Truth::False,
            None => true,
        });
        if g.edges.len() != before {
            report.rewrites += (before - g.edges.len()) as u64;
            changed = true;
        }

        // A proven condition that is first among its siblings always wins:
        // the edge becomes unconditional and the siblings disappear.
        let mut promote: Option<usize> = None;
        for (ei, e) in g.edges.iter().enumerate() {
            let Some(c) = &e.condition else { continue };
            if prove(c, &asm) != Truth::True {
                continue;
            }
            let first_conditional = g
                .edges
                .iter()
                .position(|x| x.src == e.src && x.condition.is_some())
                .unwrap();
            if first_conditional == ei {
                promote = Some(ei);
                break;
            }
        }
        if let Some(ei) = promote {
            let src = g.edges[ei].src.clone();
            g.edges[ei].condition = None;
            g.edges[ei].is_else = false;
            let mut i = 0usize;
            g.edges.retain(|e| {
                let keep = i == ei || e.src != src;
                i += 1;
                keep
            });
            report.rewrites += 1;
            changed = true;
        }

        // An else edge with no conditional siblings left always fires.
        let mut else_fix: Vec<usize> = Vec::new();
        for (ei, e) in g.edges.iter().enumerate() {
            if e.is_else
                && !g
                    .edges
                    .iter()
                    .any(|x| x.src == e.src && x.condition.is_some())
            {
                else_fix.push(ei);
            }
        }
        for ei in else_fix {
            g.edges[ei].is_else = false;
            report.rewrites += 1;
            changed = true;
        }

        // Drop whatever start cannot reach.
        let mut live: BTreeSet<String> = BTreeSet::from([g.start.clone()]);
        let mut frontier = vec![g.start.clone()];
        while let Some(s) = frontier.pop() {
            for e in g.edges.iter().filter(|e| e.src == s) {
                if live.insert(e.dst.clone()) {
                    frontier.push(e.dst.clone());
                }
            }
        }
        let dead: Vec<String> = g
            .states
            .iter()
            .filter(|s| !live.contains(&s.name))
            .map(|s| s.name.clone())
            .collect();
        if !dead.is_empty() {
            g.states.retain(|s| live.contains(&s.name));
            g.edges.retain(|e| live.contains(&e.src) && live.contains(&e.dst));
            report.states_removed += dead.len() as u64;
            changed = true;
        }

        if !changed {
            return report;
        }
    }
}
