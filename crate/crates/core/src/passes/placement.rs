//! Decides where transients live. One-element containers become plain
//! registers, constant-size containers that fit the threshold go on the
//! stack, everything else stays on the heap. All transients are widened to
//! global lifetime so later fusion never has to reason about re-allocation
//! inside loops.

use super::PassReport;
use crate::sdfg::{Lifetime, Sdfg, Storage};
use crate::symbolic::{simplify, SymExpr};

pub fn allocation_placement(g: &mut Sdfg, stack_threshold: u64) -> PassReport {
    let mut report = PassReport::new("allocation-placement");
    for d in g.descriptors.values_mut() {
        if !d.transient {
            continue;
        }
        let elems: Option<u64> = d
            .shape
            .iter()
            .map(|dim| match simplify(dim) {
                SymExpr::Const(c) if c >= 0 => Some(c as u64),
                _ => None,
            })
            .try_fold(1u64, |acc, dim| dim.map(|v| acc.saturating_mul(v)));
        let storage = match elems {
            Some(1) => Storage::Register,
            Some(n) if n.saturating_mul(8) <= stack_threshold => Storage::Stack,
            _ => Storage::Heap,
        };
        if d.storage != storage {
            d.storage = storage;
            report.rewrites += 1;
        }
        if d.lifetime != Lifetime::Global {
            d.lifetime = Lifetime::Global;
            report.rewrites += 1;
        }
    }
    report
}
