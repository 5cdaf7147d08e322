//! Strategy 1: greedy generate-and-validate search that commits partial
//! fixes as long as they shrink the set of originally failing tests.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::mutate::{enumerate_mutations, MutationOperator};
use super::*;
use crate::faultloc::{line_assumption, rank, Spectrum};
use crate::lang::*;
use crate::patch::{align, ast_diff};
use crate::testkit::{run_suite_with, test_passes, SuiteOptions, TestSuite};

/// Counts against the partition fixed at session start.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FitnessState {
    /// Originally failing tests that still fail.
    pub residual: usize,
    /// Originally passing tests that now fail.
    pub regressions: usize,
}

pub fn evaluate_fitness(
    candidate: &Program,
    suite: &TestSuite,
    original_failing: &[usize],
    original_passing: &[usize],
    fuel: u64,
) -> FitnessState {
    let fails = |i: &&usize| !test_passes(candidate, &suite.tests[**i], fuel, None);
    FitnessState {
        residual: original_failing.iter().filter(fails).count(),
        regressions: original_passing.iter().filter(fails).count(),
    }
}

#[derive(Debug, Clone)]
pub struct S1Config {
    pub top_k: usize,
    pub regression_budget: usize,
    pub max_iters: usize,
    pub time_budget: Duration,
    pub fuel: u64,
    pub seed: u64,
    /// Known faulty `(function, line)` positions of the buggy program.
    pub line_assumption: Option<Vec<(String, u32)>>,
    /// Candidates evaluated per parallel batch; the deadline is checked
    /// between batches.
    pub batch: usize,
}

impl Default for S1Config {
    fn default() -> Self {
        Self {
            top_k: 10,
            regression_budget: 1,
            max_iters: 10,
            time_budget: Duration::from_secs(60),
            fuel: DEFAULT_FUEL,
            seed: 0,
            line_assumption: None,
            batch: 256,
        }
    }
}

struct Session<'a> {
    suite: &'a TestSuite,
    failing: Vec<usize>,
    passing: Vec<usize>,
    cfg: &'a S1Config,
    executed: AtomicUsize,
}

impl Session<'_> {
    /// Exact fitness when `p` is admissible against `current`, otherwise
    /// `None` as soon as that is decided.
    fn admissible(&self, p: &Program, current: FitnessState) -> Option<FitnessState> {
        let mut f = FitnessState::default();
        let mut run = 0;
        let mut fails = |i: usize| {
            run += 1;
            !test_passes(p, &self.suite.tests[i], self.cfg.fuel, None)
        };
        let ok = self.failing.iter().all(|&i| {
            f.residual += fails(i) as usize;
            f.residual < current.residual
        }) && self.passing.iter().all(|&i| {
            f.regressions += fails(i) as usize;
            f.regressions <= self.cfg.regression_budget
        });
        self.executed.fetch_add(run, Ordering::Relaxed);
        ok.then_some(f)
    }

    /// Best admissible candidate, or `Err(())` on timeout.
    fn best(
        &self,
        working: &Program,
        current: FitnessState,
        stream: &[MutationOperator],
        deadline: &Deadline,
    ) -> Result<Option<(usize, Program, FitnessState)>, ()> {
        let mut best: Option<(usize, Program, FitnessState)> = None;
        for (b, batch) in stream.chunks(self.cfg.batch.max(1)).enumerate() {
            if deadline.expired() {
                return Err(());
            }
            let scored: Vec<(usize, Program, FitnessState)> = batch
                .par_iter()
                .enumerate()
                .filter_map(|(i, m)| {
                    let q = m.apply(working)?;
                    let f = self.admissible(&q, current)?;
                    Some((b * self.cfg.batch + i, q, f))
                })
                .collect();
            for cand in scored {
                if best.as_ref().is_none_or(|(_, _, bf)| cand.2 < *bf) {
                    best = Some(cand);
                }
            }
            if best
                .as_ref()
                .is_some_and(|(_, _, f)| f.residual == 0 && f.regressions == 0)
            {
                break;
            }
        }
        Ok(best)
    }
}

/// Runs Strategy 1 on `buggy` against `suite` (already purified or
/// augmented as desired).
pub fn s1_repair(buggy: &Program, suite: &TestSuite, cfg: &S1Config) -> RepairResult {
    let deadline = Deadline::new(cfg.time_budget);
    let diag = SuiteOptions {
        fuel: cfg.fuel,
        trace_failures: false,
        coverage: true,
        overrides: None,
    };
    let report = run_suite_with(buggy, suite, &diag);
    let session = Session {
        suite,
        failing: report.failing_indices(),
        passing: report.passing_indices(),
        cfg,
        executed: AtomicUsize::new(suite.len()),
    };
    let mut working = buggy.clone();
    let mut fitness = FitnessState {
        residual: session.failing.len(),
        regressions: 0,
    };
    let mut faulty: Vec<NodeId> = cfg
        .line_assumption
        .iter()
        .flatten()
        .filter_map(|(f, l)| buggy.stmt_at_line(f, *l).map(|s| s.id))
        .collect();
    let mut iterations = Vec::new();
    let mut report = report;
    let status = loop {
        if fitness.residual == 0 && fitness.regressions == 0 {
            break RepairStatus::Success;
        }
        if iterations.len() >= cfg.max_iters {
            break RepairStatus::ExhaustedSearch;
        }
        if deadline.expired() {
            break RepairStatus::Timeout;
        }
        let mut ranking = rank(&working, &Spectrum::from_report(&working, &report));
        if cfg.line_assumption.is_some() {
            let lines: Vec<(String, u32)> = faulty
                .iter()
                .filter_map(|&id| Some((working.function_name(id).to_string(), working.stmt(id)?.line)))
                .collect();
            ranking = line_assumption(&working, &ranking, &lines);
        }
        let stream = enumerate_mutations(&working, &ranking, cfg.top_k);
        let best = match session.best(&working, fitness, &stream, &deadline) {
            Err(()) => break RepairStatus::Timeout,
            Ok(None) => break RepairStatus::ExhaustedSearch,
            Ok(Some(b)) => b,
        };
        let (idx, next, after) = best;
        let op = &stream[idx];
        iterations.push(Iteration {
            operator: op.describe(&working),
            func: working.function_name(op.target).to_string(),
            line: working.stmt(op.target).map_or(0, |s| s.line),
            before: fitness,
            after,
        });
        let map = align(&working, &next);
        faulty = faulty.iter().filter_map(|id| map.get(id).copied()).collect();
        working = next;
        fitness = after;
        report = run_suite_with(&working, suite, &diag);
        session.executed.fetch_add(suite.len(), Ordering::Relaxed);
    };
    let status = if status == RepairStatus::Success && !report.all_pass() {
        RepairStatus::ExhaustedSearch
    } else {
        status
    };
    RepairResult {
        strategy: Strategy::S1,
        status,
        patch: ast_diff(buggy, &working),
        program: working,
        iterations,
        wall_time: deadline.elapsed(),
        tests_executed: session.executed.load(Ordering::Relaxed),
        witness: None,
        condition: None,
    }
}
