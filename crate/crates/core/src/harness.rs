//! Bug corpus loading, corpus statistics, strategy benchmarking and
//! correctness adjudication.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::CorpusError;
use crate::lang::{parse, Program, DEFAULT_FUEL};
use crate::patch::{ast_diff, classify, Patch, PatchClass};
use crate::repair::{s1_repair, s2_repair, RepairResult, RepairStatus, S1Config, S2Config, Strategy};
use crate::testkit::{
    augment, differential_check, purify, run_suite, AugmentConfig, InputDomains, TestSuite, DEFAULT_TRIALS,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaultyLine {
    #[serde(rename = "fn")]
    pub func: String,
    pub line: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BugMeta {
    pub id: String,
    pub expected_class: PatchClass,
    pub faulty_lines: Vec<FaultyLine>,
    pub domains: InputDomains,
    #[serde(default)]
    pub notes: String,
}

#[derive(Debug, Clone)]
pub struct BugEntry {
    pub id: String,
    pub dir: PathBuf,
    pub buggy: Program,
    pub fixed: Program,
    pub suite: TestSuite,
    pub meta: BugMeta,
}

impl BugEntry {
    pub fn faulty_lines(&self) -> Vec<(String, u32)> {
        self.meta
            .faulty_lines
            .iter()
            .map(|f| (f.func.clone(), f.line))
            .collect()
    }

    pub fn ground_truth(&self) -> Patch {
        ast_diff(&self.buggy, &self.fixed)
    }
}

fn read(path: &Path) -> Result<String, CorpusError> {
    fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn read_program(path: &Path) -> Result<Program, CorpusError> {
    parse(&read(path)?).map_err(|source| CorpusError::Parse {
        file: path.display().to_string(),
        source,
    })
}

/// Loads one bug directory and checks the corpus invariants.
pub fn load_bug(dir: &Path) -> Result<BugEntry, CorpusError> {
    let buggy = read_program(&dir.join("program.ml"))?;
    let fixed = read_program(&dir.join("fixed.ml"))?;
    let tests_path = dir.join("tests.json");
    let format = |file: &Path, message: String| CorpusError::Format {
        file: file.display().to_string(),
        message,
    };
    let suite = TestSuite::from_json(&read(&tests_path)?).map_err(|e| format(&tests_path, e.to_string()))?;
    let meta_path = dir.join("meta.json");
    let meta: BugMeta = serde_json::from_str(&read(&meta_path)?).map_err(|e| format(&meta_path, e.to_string()))?;
    let id = meta.id.clone();
    let invariant = |message: String| CorpusError::Invariant {
        id: id.clone(),
        message,
    };
    if suite.is_empty() {
        return Err(format(&tests_path, "no tests".into()));
    }
    suite.check(&buggy).map_err(|e| format(&tests_path, e.to_string()))?;
    suite.check(&fixed).map_err(|e| format(&tests_path, e.to_string()))?;
    meta.domains.validate(&buggy).map_err(|e| format(&meta_path, e))?;
    meta.domains.validate(&fixed).map_err(|e| format(&meta_path, e))?;
    for f in &meta.faulty_lines {
        if buggy.stmt_at_line(&f.func, f.line).is_none() {
            return Err(invariant(format!(
                "faulty line {}:{} is not a statement",
                f.func, f.line
            )));
        }
    }
    let fuel = DEFAULT_FUEL;
    if !run_suite(&fixed, &suite, fuel).all_pass() {
        return Err(invariant("fixed program fails its suite".into()));
    }
    if run_suite(&buggy, &suite, fuel).failing == 0 {
        return Err(invariant("buggy program passes its suite".into()));
    }
    let patch = ast_diff(&buggy, &fixed);
    let class = classify(&patch, &buggy).map_err(|e| invariant(e.to_string()))?;
    if class != meta.expected_class {
        return Err(invariant(format!(
            "ground-truth patch classifies as {class}, meta says {}",
            meta.expected_class
        )));
    }
    Ok(BugEntry {
        id: meta.id.clone(),
        dir: dir.to_path_buf(),
        buggy,
        fixed,
        suite,
        meta,
    })
}

/// Every bug directory under `dir`, ordered by id.
pub fn load_corpus(dir: &Path) -> Result<Vec<BugEntry>, CorpusError> {
    let io = |source| CorpusError::Io {
        path: dir.display().to_string(),
        source,
    };
    let mut dirs = Vec::new();
    for entry in fs::read_dir(dir).map_err(io)? {
        let path = entry.map_err(io)?.path();
        if path.is_dir() {
            dirs.push(path);
        }
    }
    let mut bugs = dirs.iter().map(|d| load_bug(d)).collect::<Result<Vec<_>, _>>()?;
    bugs.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(bugs)
}

/// `count / total` as a percentage rounded to two decimals.
pub fn percentage(count: usize, total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    (count as f64 * 10_000.0 / total as f64).round() / 100.0
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatRow {
    pub class: PatchClass,
    pub count: usize,
    pub percentage: f64,
}

/// Class distribution of the ground-truth patches.
pub fn stats(bugs: &[BugEntry]) -> Vec<StatRow> {
    let mut counts: BTreeMap<PatchClass, usize> = BTreeMap::new();
    for b in bugs {
        if let Ok(c) = classify(&b.ground_truth(), &b.buggy) {
            *counts.entry(c).or_default() += 1;
        }
    }
    PatchClass::ALL
        .into_iter()
        .map(|class| {
            let count = counts.get(&class).copied().unwrap_or(0);
            StatRow {
                class,
                count,
                percentage: percentage(count, bugs.len()),
            }
        })
        .collect()
}

pub fn stats_dir(dir: &Path) -> Result<Vec<StatRow>, CorpusError> {
    Ok(stats(&load_corpus(dir)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StrategyChoice {
    S1,
    S2,
    Auto,
}

impl FromStr for StrategyChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "s1" => Ok(StrategyChoice::S1),
            "s2" => Ok(StrategyChoice::S2),
            "auto" => Ok(StrategyChoice::Auto),
            _ => Err(format!("unknown strategy {s}")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RepairConfig {
    pub strategy: StrategyChoice,
    pub purify: bool,
    pub augment: bool,
    pub line_assumption: bool,
    pub seed: u64,
    pub time_budget: Duration,
    pub regression_budget: usize,
    /// Suspicious statements considered; strategy default when `None`.
    pub top_k: Option<usize>,
    pub depth_bound: u32,
    pub fuel: u64,
}

impl Default for RepairConfig {
    fn default() -> Self {
        Self {
            strategy: StrategyChoice::Auto,
            purify: false,
            augment: false,
            line_assumption: false,
            seed: 0,
            time_budget: Duration::from_secs(60),
            regression_budget: 1,
            top_k: None,
            depth_bound: 2,
            fuel: DEFAULT_FUEL,
        }
    }
}

/// The bug's suite after the optional purification and augmentation
/// phases. Generated tests whose call already occurs in the suite are
/// dropped.
pub fn prepare_suite(bug: &BugEntry, purified: bool, augmented: bool, seed: u64, fuel: u64) -> TestSuite {
    let mut suite = if purified {
        purify(&bug.suite)
    } else {
        bug.suite.clone()
    };
    if augmented {
        let cfg = AugmentConfig {
            seed,
            fuel,
            include_passing: true,
            ..AugmentConfig::default()
        };
        let known: HashSet<_> = suite
            .tests
            .iter()
            .flat_map(|t| t.assertions.iter().map(|a| a.call.clone()))
            .collect();
        let generated = augment(&bug.buggy, &bug.fixed, &bug.meta.domains, &cfg);
        suite.tests.extend(
            generated
                .tests
                .into_iter()
                .filter(|t| !known.contains(&t.assertions[0].call)),
        );
    }
    suite
}

/// The suite used to adjudicate plausibility: purified and augmented.
pub fn full_suite(bug: &BugEntry, seed: u64, fuel: u64) -> TestSuite {
    prepare_suite(bug, true, true, seed, fuel)
}

fn run_strategy(bug: &BugEntry, strategy: Strategy, suite: &TestSuite, cfg: &RepairConfig) -> RepairResult {
    let lines = cfg.line_assumption.then(|| bug.faulty_lines());
    match strategy {
        Strategy::S1 => {
            let mut c = S1Config {
                regression_budget: cfg.regression_budget,
                time_budget: cfg.time_budget,
                fuel: cfg.fuel,
                seed: cfg.seed,
                line_assumption: lines,
                ..S1Config::default()
            };
            if let Some(k) = cfg.top_k {
                c.top_k = k;
            }
            s1_repair(&bug.buggy, suite, &c)
        }
        Strategy::S2 => {
            let mut c = S2Config {
                depth_bound: cfg.depth_bound,
                time_budget: cfg.time_budget,
                fuel: cfg.fuel,
                line_assumption: lines,
                ..S2Config::default()
            };
            if let Some(k) = cfg.top_k {
                c.top_k = k;
            }
            s2_repair(&bug.buggy, suite, &c)
        }
    }
}

/// Runs the configured strategy; `auto` tries S1 then S2 and stops at the
/// first success. The time budget covers the whole call, so S2 only gets
/// what S1 left over. Every attempted run is returned, the deciding one last.
pub fn repair_bug(bug: &BugEntry, cfg: &RepairConfig) -> Vec<RepairResult> {
    let start = std::time::Instant::now();
    let suite = prepare_suite(bug, cfg.purify, cfg.augment, cfg.seed, cfg.fuel);
    let order: &[Strategy] = match cfg.strategy {
        StrategyChoice::S1 => &[Strategy::S1],
        StrategyChoice::S2 => &[Strategy::S2],
        StrategyChoice::Auto => &[Strategy::S1, Strategy::S2],
    };
    let mut out = Vec::new();
    for &s in order {
        let remaining = cfg.time_budget.saturating_sub(start.elapsed());
        if !out.is_empty() && remaining.is_zero() {
            break;
        }
        let cfg = RepairConfig {
            time_budget: remaining,
            ..cfg.clone()
        };
        let r = run_strategy(bug, s, &suite, &cfg);
        let done = r.status == RepairStatus::Success;
        out.push(r);
        if done {
            break;
        }
    }
    out
}

/// `(plausible, correct)`: passes the purified and augmented suite, and in
/// addition agrees with the fixed program on `trials` random inputs.
pub fn check_result(bug: &BugEntry, result: &RepairResult, trials: usize, seed: u64) -> (bool, bool) {
    let suite = full_suite(bug, seed, DEFAULT_FUEL);
    let plausible = run_suite(&result.program, &suite, DEFAULT_FUEL).all_pass();
    let correct = plausible
        && differential_check(
            &result.program,
            &bug.fixed,
            &bug.meta.domains,
            trials,
            seed,
            DEFAULT_FUEL,
        )
        .is_equivalent();
    (plausible, correct)
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub seed: u64,
    pub time_budget: Duration,
    pub line_assumption: bool,
    pub trials: usize,
    pub fuel: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            time_budget: Duration::from_secs(60),
            line_assumption: true,
            trials: DEFAULT_TRIALS,
            fuel: DEFAULT_FUEL,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub id: String,
    pub expected_class: PatchClass,
    pub strategy: Strategy,
    pub status: RepairStatus,
    pub wall_time: Duration,
    pub plausible: bool,
    pub correct: bool,
    pub iterations: usize,
    pub chunks: usize,
    pub patch_class: Option<PatchClass>,
}

/// Runs S1 (with purification and augmentation) and S2 (on the original
/// suite) on every bug. Rows come out ordered by bug id, S1 first.
pub fn bench(bugs: &[BugEntry], cfg: &BenchConfig) -> Vec<BenchRow> {
    let mut rows: Vec<BenchRow> = bugs
        .par_iter()
        .flat_map_iter(|bug| {
            [(Strategy::S1, true), (Strategy::S2, false)].map(|(strategy, phases)| {
                let rc = RepairConfig {
                    purify: phases,
                    augment: phases,
                    line_assumption: cfg.line_assumption,
                    seed: cfg.seed,
                    time_budget: cfg.time_budget,
                    fuel: cfg.fuel,
                    ..RepairConfig::default()
                };
                let suite = prepare_suite(bug, phases, phases, cfg.seed, cfg.fuel);
                let r = run_strategy(bug, strategy, &suite, &rc);
                let (plausible, correct) = check_result(bug, &r, cfg.trials, cfg.seed);
                BenchRow {
                    id: bug.id.clone(),
                    expected_class: bug.meta.expected_class,
                    strategy,
                    status: r.status,
                    wall_time: r.wall_time,
                    plausible,
                    correct,
                    iterations: r.iterations.len(),
                    chunks: r.patch.chunks.len(),
                    patch_class: classify(&r.patch, &bug.buggy).ok(),
                }
            })
        })
        .collect();
    rows.sort_by(|a, b| a.id.cmp(&b.id).then(a.strategy.cmp(&b.strategy)));
    rows
}

/// Table rows without timing, so equal seeds give equal bytes.
pub fn bench_table(rows: &[BenchRow]) -> String {
    let rows: Vec<_> = rows
        .iter()
        .map(|r| {
            json!({
                "id": r.id,
                "expected_class": r.expected_class.label(),
                "strategy": r.strategy.name(),
                "status": r.status.name(),
                "plausible": r.plausible,
                "correct": r.correct,
                "iterations": r.iterations,
                "chunks": r.chunks,
                "patch_class": r.patch_class.map(|c| c.label()),
            })
        })
        .collect();
    let mut s = serde_json::to_string_pretty(&json!({ "rows": rows })).expect("table serializes");
    s.push('\n');
    s
}

/// Fixed-width text rendering of bench rows, timing included.
pub fn bench_text(rows: &[BenchRow]) -> String {
    let mut out = format!(
        "{:<14} {:<16} {:<4} {:<16} {:>9} {:<9} {:<7}\n",
        "bug", "class", "str", "status", "time_ms", "plausible", "correct"
    );
    for r in rows {
        out.push_str(&format!(
            "{:<14} {:<16} {:<4} {:<16} {:>9} {:<9} {:<7}\n",
            r.id,
            r.expected_class.label(),
            r.strategy.name(),
            r.status.name(),
            r.wall_time.as_millis(),
            r.plausible,
            r.correct
        ));
    }
    out
}
