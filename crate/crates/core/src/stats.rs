//! Data-movement accounting shared by both interpreters.
//!
//! Conventions: loads/stores/updates count array-element traffic only
//! (scalar containers are register-like and free); a write-conflict-resolved
//! store counts as one update and no load; allocations count transient
//! allocation events; bytes follow the moved-element total at 8 bytes per
//! element.

use crate::value::ELEM_BYTES;
use std::collections::BTreeMap;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MovementStats {
    pub loads: u64,
    pub stores: u64,
    pub updates: u64,
    pub allocations: u64,
    pub tasklet_execs: u64,
    pub bytes_moved: u64,
}

impl MovementStats {
    pub fn count_loads(&mut self, n: u64) {
        self.loads += n;
        self.bytes_moved += n * ELEM_BYTES;
    }

    pub fn count_stores(&mut self, n: u64) {
        self.stores += n;
        self.bytes_moved += n * ELEM_BYTES;
    }

    pub fn count_updates(&mut self, n: u64) {
        self.updates += n;
        self.bytes_moved += n * ELEM_BYTES;
    }

    pub fn moved(&self) -> u64 {
        self.loads + self.stores + self.updates
    }

    /// Row in the frozen stats schema:
    /// `fixture,level,loads,stores,updates,allocs,tasklets,bytes`.
    pub fn csv_row(&self, fixture: &str, level: &str) -> String {
        format!(
            "{fixture},{level},{},{},{},{},{},{}",
            self.loads, self.stores, self.updates, self.allocations, self.tasklet_execs, self.bytes_moved
        )
    }

    pub const CSV_HEADER: &'static str = "fixture,level,loads,stores,updates,allocs,tasklets,bytes";
}

/// Per-run result of an interpreter: final contents of externally visible
/// containers, movement counters, per-tasklet firing counts, and any
/// warnings (e.g. reads of uninitialized transients).
#[derive(Debug, Clone, Default)]
pub struct RunOutcome {
    pub outputs: BTreeMap<String, crate::value::Buffer>,
    pub stats: MovementStats,
    pub tasklet_counts: BTreeMap<String, u64>,
    pub warnings: Vec<String>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bytes_follow_counts() {
        let mut s = MovementStats::default();
        s.count_loads(3);
        s.count_stores(2);
        s.count_updates(1);
        assert_eq!(s.bytes_moved, 6 * ELEM_BYTES);
        assert_eq!(s.moved(), 6);
    }

    #[test]
    fn csv_row_matches_frozen_schema() {
        let mut s = MovementStats::default();
        s.count_loads(4);
        s.allocations = 1;
        s.tasklet_execs = 9;
        assert_eq!(s.csv_row("gemm", "O1"), "gemm,O1,4,0,0,1,9,32");
        assert_eq!(MovementStats::CSV_HEADER.split(',').count(), s.csv_row("f", "O0").split(',').count());
    }
}
