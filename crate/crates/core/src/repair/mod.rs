//! The two repair strategies and their shared result type.

pub mod guard;
pub mod mutate;
pub mod search;

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::lang::Program;
use crate::patch::Patch;

pub use guard::{angelic_search, candidate_locations, collect_snapshots, s2_repair, synthesize_condition, S2Config};
pub use mutate::{enumerate_mutations, MutationKind, MutationOperator};
pub use search::{evaluate_fitness, s1_repair, FitnessState, S1Config};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RepairStatus {
    Success,
    Timeout,
    ExhaustedSearch,
    NoAngelicValue,
    NoSynthesis,
}

impl RepairStatus {
    pub fn name(self) -> &'static str {
        match self {
            RepairStatus::Success => "Success",
            RepairStatus::Timeout => "Timeout",
            RepairStatus::ExhaustedSearch => "ExhaustedSearch",
            RepairStatus::NoAngelicValue => "NoAngelicValue",
            RepairStatus::NoSynthesis => "NoSynthesis",
        }
    }
}

impl std::fmt::Display for RepairStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Strategy {
    S1,
    S2,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::S1 => "s1",
            Strategy::S2 => "s2",
        }
    }
}

/// One committed edit of the iterative search.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Iteration {
    pub operator: String,
    pub func: String,
    pub line: u32,
    pub before: FitnessState,
    pub after: FitnessState,
}

#[derive(Debug, Clone)]
pub struct RepairResult {
    pub strategy: Strategy,
    pub status: RepairStatus,
    /// Diff from the buggy program to `program`; may be partial.
    pub patch: Patch,
    pub program: Program,
    pub iterations: Vec<Iteration>,
    pub wall_time: Duration,
    pub tests_executed: usize,
    pub witness: Option<guard::AngelicWitness>,
    /// Synthesized condition, for guard repairs.
    pub condition: Option<String>,
}

impl RepairResult {
    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "strategy": self.strategy.name(),
            "status": self.status.name(),
            "chunks": self.patch.chunks.len(),
            "condition": self.condition,
            "iterations": self.iterations.iter().map(|it| json!({
                "operator": it.operator,
                "fn": it.func,
                "line": it.line,
                "before": {"residual": it.before.residual, "regressions": it.before.regressions},
                "after": {"residual": it.after.residual, "regressions": it.after.regressions},
            })).collect::<Vec<_>>(),
            "wall_time_ms": self.wall_time.as_millis() as u64,
            "tests_executed": self.tests_executed,
        })
    }
}

/// Wall-clock budget shared by a repair session.
#[derive(Debug, Clone, Copy)]
pub struct Deadline {
    start: Instant,
    budget: Duration,
}

impl Deadline {
    pub fn new(budget: Duration) -> Self {
        Self {
            start: Instant::now(),
            budget,
        }
    }

    pub fn expired(&self) -> bool {
        self.start.elapsed() >= self.budget
    }

    pub fn elapsed(&self) -> Duration {
        self.start.elapsed()
    }
}
