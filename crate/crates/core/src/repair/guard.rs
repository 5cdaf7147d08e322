//! Strategy 2: angelic-value search at suspicious and intersection
//! locations, followed by enumerative synthesis of the guard condition.

use std::collections::{BTreeSet, HashSet};
use std::time::Duration;

use serde_json::json;

use super::mutate::constant_pool;
use super::*;
use crate::faultloc::{line_assumption, merge_intersections_into_ranking, rank, top_k_chains, Ranking, Spectrum};
use crate::lang::interp::{ExecOptions, TraceLevel};
use crate::lang::pretty::expr_to_string;
use crate::lang::typeck;
use crate::lang::*;
use crate::patch::ast_diff;
use crate::testkit::{run_suite, run_suite_with, test_passes, SuiteOptions, TestSuite};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum GuardMode {
    /// Replace the condition of an `if`/`while`.
    ModifyCondition,
    /// Wrap the statement as `if (!(C)) { stmt }`.
    InsertGuardSkip,
    /// Insert `if (C) { return d; }` before the statement.
    InsertGuardReturn(Option<Expr>),
}

impl GuardMode {
    pub fn describe(&self) -> String {
        match self {
            GuardMode::ModifyCondition => "ModifyCondition".into(),
            GuardMode::InsertGuardSkip => "InsertGuardSkip".into(),
            GuardMode::InsertGuardReturn(None) => "InsertGuardReturn(return;)".into(),
            GuardMode::InsertGuardReturn(Some(d)) => format!("InsertGuardReturn({})", expr_to_string(d)),
        }
    }
}

/// Locations in ranking order with the guard modes applicable to each.
pub fn candidate_locations(p: &Program, ranking: &Ranking, top_k: usize) -> Vec<(NodeId, Vec<GuardMode>)> {
    let mut out = Vec::new();
    for e in ranking.top(top_k) {
        let Some(s) = p.stmt(e.node) else { continue };
        let ret = p.functions[e.node.func as usize].ret;
        let mut modes = Vec::new();
        if s.is_condition() {
            modes.push(GuardMode::ModifyCondition);
        }
        modes.push(GuardMode::InsertGuardSkip);
        let defaults = match ret {
            Type::Int => vec![Some(Expr::Int(0)), Some(Expr::Int(-1))],
            Type::Bool => vec![Some(Expr::Bool(false))],
            Type::IntArray => vec![Some(Expr::Array(Vec::new()))],
            Type::Unit => vec![None],
        };
        modes.extend(defaults.into_iter().map(GuardMode::InsertGuardReturn));
        out.push((e.node, modes));
    }
    out
}

/// A program whose controllable condition stands where the repair will go,
/// together with that condition's node.
#[derive(Debug, Clone)]
pub struct Placeholder {
    pub program: Program,
    pub target: NodeId,
    /// Whether the synthesized condition is the negation of the forced
    /// outcome (skip guards execute the statement when taken).
    pub negate: bool,
}

fn splice(p: &Program, node: NodeId, build: impl FnOnce(Stmt) -> Vec<Stmt>) -> Option<(Program, BlockPath, usize)> {
    let (path, idx) = p.locate(node)?;
    let mut q = p.clone();
    let block = q.block_mut(node.func as usize, &path)?;
    let s = block.stmts.remove(idx);
    for (k, new) in build(s).into_iter().enumerate() {
        block.stmts.insert(idx + k, new);
    }
    q.renumber();
    typeck::check(&q).ok()?;
    Some((q, path, idx))
}

fn guard(cond: Expr, body: Vec<Stmt>) -> Stmt {
    Stmt::new(StmtKind::If(cond, Block::new(body), None))
}

pub fn placeholder(p: &Program, node: NodeId, mode: &GuardMode) -> Option<Placeholder> {
    match mode {
        GuardMode::ModifyCondition => p.stmt(node).filter(|s| s.is_condition()).map(|_| Placeholder {
            program: p.clone(),
            target: node,
            negate: false,
        }),
        GuardMode::InsertGuardSkip => {
            let (q, path, idx) = splice(p, node, |s| vec![guard(Expr::Bool(true), vec![s])])?;
            let target = q.block(node.func as usize, &path)?.stmts[idx].id;
            Some(Placeholder {
                program: q,
                target,
                negate: true,
            })
        }
        GuardMode::InsertGuardReturn(d) => {
            let ret = Stmt::new(StmtKind::Return(d.clone()));
            let (q, path, idx) = splice(p, node, |s| vec![guard(Expr::Bool(false), vec![ret]), s])?;
            let target = q.block(node.func as usize, &path)?.stmts[idx].id;
            Some(Placeholder {
                program: q,
                target,
                negate: false,
            })
        }
    }
}

/// Evidence that forcing one condition can make every test pass.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AngelicWitness {
    /// Location in the buggy program.
    pub node: NodeId,
    pub mode: GuardMode,
    /// Restricted to the placeholder condition; empty when nothing failed.
    pub schedule: ConditionOverrideSchedule,
    /// Pass/fail of each test under the schedule.
    pub evidence: Vec<(String, bool)>,
}

impl AngelicWitness {
    pub fn to_json(&self, p: &Program) -> serde_json::Value {
        let schedule = match self.schedule.policies.values().next() {
            None => json!(null),
            Some(OverridePolicy::Uniform(b)) => json!({"uniform": b}),
            Some(OverridePolicy::PerOccurrence(seq)) => json!({"per_occurrence": seq}),
        };
        json!({
            "location": {"fn": p.function_name(self.node), "line": p.stmt(self.node).map_or(0, |s| s.line)},
            "mode": self.mode.describe(),
            "schedule": schedule,
            "outcomes": self.evidence.iter().map(|(t, pass)| json!({"test": t, "pass": pass})).collect::<Vec<_>>(),
        })
    }
}

/// Policies in search order: uniform true, uniform false, then every
/// per-occurrence sequence up to length `max_len`, shorter first and
/// lexicographic with false before true.
pub fn schedule_space(max_len: usize) -> impl Iterator<Item = OverridePolicy> {
    let uniform = [OverridePolicy::Uniform(true), OverridePolicy::Uniform(false)];
    let seqs = (1..=max_len).flat_map(|len| {
        (0u64..1 << len)
            .map(move |bits| OverridePolicy::PerOccurrence((0..len).map(|i| bits >> (len - 1 - i) & 1 == 1).collect()))
    });
    uniform.into_iter().chain(seqs)
}

/// Searches for a policy on the placeholder's condition under which every
/// originally failing test passes. Originally passing tests run unforced.
/// `Err(())` means the deadline passed.
#[allow(clippy::result_unit_err)]
pub fn angelic_search(
    ph: &Placeholder,
    suite: &TestSuite,
    failing: &[usize],
    fuel: u64,
    max_len: usize,
    deadline: &Deadline,
) -> Result<Option<ConditionOverrideSchedule>, ()> {
    if failing.is_empty() {
        return Ok(Some(ConditionOverrideSchedule::default()));
    }
    let reached = failing.iter().any(|&i| {
        suite.tests[i].assertions.iter().any(|a| {
            let opts = ExecOptions {
                fuel,
                trace: TraceLevel::Coverage,
                overrides: None,
                capture_at: None,
            };
            interp::run(&ph.program, &a.call, &opts).is_ok_and(|o| o.coverage.contains(&ph.target))
        })
    });
    if !reached {
        return Ok(None);
    }
    for (n, policy) in schedule_space(max_len).enumerate() {
        if n % 32 == 0 && deadline.expired() {
            return Err(());
        }
        let sched = ConditionOverrideSchedule::single(ph.target, policy.clone());
        if failing
            .iter()
            .all(|&i| test_passes(&ph.program, &suite.tests[i], fuel, Some(&sched)))
        {
            return Ok(Some(sched));
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Snapshot {
    pub test: String,
    pub occurrence: usize,
    pub env: Vec<(String, Value)>,
    pub required: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthesisSpec {
    pub snapshots: Vec<Snapshot>,
    pub vocabulary: Vec<(String, Type)>,
    pub constants: Vec<i64>,
}

/// Replays the suite recording the placeholder condition's environment at
/// every occurrence: forced outcomes on originally failing tests, real
/// outcomes elsewhere.
pub fn collect_snapshots(
    ph: &Placeholder,
    suite: &TestSuite,
    failing: &[usize],
    sched: Option<&ConditionOverrideSchedule>,
    fuel: u64,
) -> SynthesisSpec {
    let mut snapshots = Vec::new();
    for (i, t) in suite.tests.iter().enumerate() {
        let forced = if failing.contains(&i) { sched } else { None };
        for a in &t.assertions {
            let opts = ExecOptions {
                fuel,
                trace: TraceLevel::None,
                overrides: forced,
                capture_at: Some(ph.target),
            };
            let Ok(out) = interp::run(&ph.program, &a.call, &opts) else {
                continue;
            };
            for s in out.snapshots {
                snapshots.push(Snapshot {
                    test: t.name.clone(),
                    occurrence: s.occurrence,
                    env: s.env,
                    required: s.taken != ph.negate,
                });
            }
        }
    }
    let vocabulary = typeck::scope_at(&ph.program, ph.target).unwrap_or_default();
    let constants = constant_pool(&ph.program.functions[ph.target.func as usize]);
    SynthesisSpec {
        snapshots,
        vocabulary,
        constants,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("no condition consistent with all snapshots")]
pub struct NoSynthesis;

fn eval_cond(e: &Expr, env: &[(String, Value)]) -> Option<bool> {
    fn int(e: &Expr, env: &[(String, Value)]) -> Option<i64> {
        match e {
            Expr::Int(v) => Some(*v),
            Expr::Var(n) => env.iter().rev().find(|(x, _)| x == n)?.1.as_int(),
            Expr::Len(a) => match &**a {
                Expr::Var(n) => match &env.iter().rev().find(|(x, _)| x == n)?.1 {
                    Value::IntArray(xs) => Some(xs.len() as i64),
                    _ => None,
                },
                _ => None,
            },
            _ => None,
        }
    }
    match e {
        Expr::Bool(b) => Some(*b),
        Expr::Var(n) => env.iter().rev().find(|(x, _)| x == n)?.1.as_bool(),
        Expr::Unary(UnOp::Not, x) => eval_cond(x, env).map(|b| !b),
        Expr::Binary(BinOp::And, l, r) => Some(eval_cond(l, env)? && eval_cond(r, env)?),
        Expr::Binary(BinOp::Or, l, r) => Some(eval_cond(l, env)? || eval_cond(r, env)?),
        Expr::Binary(op, l, r) => {
            let (a, b) = (int(l, env)?, int(r, env)?);
            Some(match op {
                BinOp::Lt => a < b,
                BinOp::Le => a <= b,
                BinOp::Gt => a > b,
                BinOp::Ge => a >= b,
                BinOp::Eq => a == b,
                BinOp::Ne => a != b,
                _ => return None,
            })
        }
        _ => None,
    }
}

/// Size-1 building blocks of the condition grammar.
pub fn condition_atoms(vocabulary: &[(String, Type)], constants: &[i64]) -> Vec<Expr> {
    let of = |t: Type| -> Vec<&str> {
        vocabulary
            .iter()
            .filter(|(_, vt)| *vt == t)
            .map(|(n, _)| n.as_str())
            .collect()
    };
    let (ints, bools, arrays) = (of(Type::Int), of(Type::Bool), of(Type::IntArray));
    let mut out = Vec::new();
    for b in &bools {
        out.push(Expr::var(*b));
        out.push(Expr::not(Expr::var(*b)));
    }
    for (i, a) in ints.iter().enumerate() {
        for b in &ints[i + 1..] {
            for op in BinOp::RELATIONAL {
                out.push(Expr::binary(op, Expr::var(*a), Expr::var(*b)));
            }
        }
    }
    for v in &ints {
        for op in BinOp::RELATIONAL {
            for &c in constants {
                out.push(Expr::binary(op, Expr::var(*v), Expr::Int(c)));
            }
        }
    }
    for a in &arrays {
        out.push(Expr::binary(
            BinOp::Eq,
            Expr::Len(Box::new(Expr::var(*a))),
            Expr::Int(0),
        ));
    }
    out
}

struct Cand {
    expr: Expr,
    depth: u32,
    truth: Vec<bool>,
}

/// Smallest condition (atoms of size 1; `!` adds one; `&&`/`||` add one to
/// the sum of their operands) agreeing with every snapshot.
pub fn synthesize_condition(
    spec: &SynthesisSpec,
    depth_bound: u32,
    candidate_budget: usize,
) -> Result<Expr, NoSynthesis> {
    if depth_bound == 0 {
        return Err(NoSynthesis);
    }
    let want: Vec<bool> = spec.snapshots.iter().map(|s| s.required).collect();
    let eval = |e: &Expr| -> Option<Vec<bool>> { spec.snapshots.iter().map(|s| eval_cond(e, &s.env)).collect() };
    let mut seen: HashSet<Vec<bool>> = HashSet::new();
    let mut by_size: Vec<Vec<Cand>> = vec![Vec::new()];
    let mut budget = candidate_budget;
    let mut atoms = Vec::new();
    for a in condition_atoms(&spec.vocabulary, &spec.constants) {
        if budget == 0 {
            return Err(NoSynthesis);
        }
        budget -= 1;
        let Some(truth) = eval(&a) else { continue };
        if truth == want {
            return Ok(a);
        }
        if seen.insert(truth.clone()) {
            atoms.push(Cand {
                expr: a,
                depth: 1,
                truth,
            });
        }
    }
    by_size.push(atoms);
    let mut size = 2;
    loop {
        let mut level = Vec::new();
        {
            let mut consider = |expr: Expr,
                                depth: u32,
                                truth: Vec<bool>,
                                level: &mut Vec<Cand>|
             -> Option<Result<Expr, NoSynthesis>> {
                if budget == 0 {
                    return Some(Err(NoSynthesis));
                }
                budget -= 1;
                if truth == want {
                    return Some(Ok(expr));
                }
                if seen.insert(truth.clone()) {
                    level.push(Cand { expr, depth, truth });
                }
                None
            };
            for c in &by_size[size - 1] {
                if c.depth < depth_bound {
                    let truth = c.truth.iter().map(|b| !b).collect();
                    if let Some(r) = consider(Expr::not(c.expr.clone()), c.depth + 1, truth, &mut level) {
                        return r;
                    }
                }
            }
            for ls in 1..size - 1 {
                let rs = size - 1 - ls;
                for op in [BinOp::And, BinOp::Or] {
                    for l in &by_size[ls] {
                        for r in &by_size[rs] {
                            let depth = l.depth.max(r.depth) + 1;
                            if depth > depth_bound {
                                continue;
                            }
                            let truth = l
                                .truth
                                .iter()
                                .zip(&r.truth)
                                .map(|(a, b)| if op == BinOp::And { *a && *b } else { *a || *b })
                                .collect();
                            let e = Expr::binary(op, l.expr.clone(), r.expr.clone());
                            if let Some(res) = consider(e, depth, truth, &mut level) {
                                return res;
                            }
                        }
                    }
                }
            }
        }
        by_size.push(level);
        size += 1;
        // a tree of depth d holds at most 2^d - 1 grammar nodes
        if size > (1usize << depth_bound.min(20)) - 1 {
            return Err(NoSynthesis);
        }
    }
}

/// Applies the synthesized condition at the candidate location.
pub fn materialize(p: &Program, node: NodeId, mode: &GuardMode, cond: &Expr) -> Option<Program> {
    match mode {
        GuardMode::ModifyCondition => {
            let mut q = p.clone();
            match &mut q.stmt_mut(node)?.kind {
                StmtKind::If(c, ..) | StmtKind::While(c, _) => *c = cond.clone(),
                _ => return None,
            }
            q.renumber();
            typeck::check(&q).ok()?;
            Some(q)
        }
        GuardMode::InsertGuardSkip => splice(p, node, |s| vec![guard(Expr::not(cond.clone()), vec![s])]).map(|r| r.0),
        GuardMode::InsertGuardReturn(d) => {
            let ret = Stmt::new(StmtKind::Return(d.clone()));
            splice(p, node, |s| vec![guard(cond.clone(), vec![ret]), s]).map(|r| r.0)
        }
    }
}

#[derive(Debug, Clone)]
pub struct S2Config {
    pub top_k: usize,
    pub k_for_intersections: usize,
    pub depth_bound: u32,
    pub max_occurrences: usize,
    pub candidate_budget: usize,
    pub time_budget: Duration,
    pub fuel: u64,
    pub line_assumption: Option<Vec<(String, u32)>>,
}

impl Default for S2Config {
    fn default() -> Self {
        Self {
            top_k: 20,
            k_for_intersections: 100,
            depth_bound: 2,
            max_occurrences: 8,
            candidate_budget: 200_000,
            time_budget: Duration::from_secs(60),
            fuel: DEFAULT_FUEL,
            line_assumption: None,
        }
    }
}

/// Ranking with line assumption and injected EPC intersections, as used by
/// Strategy 2.
pub fn s2_ranking(p: &Program, suite: &TestSuite, cfg: &S2Config) -> (Ranking, crate::testkit::SuiteReport) {
    let report = run_suite(p, suite, cfg.fuel);
    let mut ranking = rank(p, &Spectrum::from_report(p, &report));
    if let Some(lines) = &cfg.line_assumption {
        ranking = line_assumption(p, &ranking, lines);
    }
    let chains = top_k_chains(p, &report, &ranking, cfg.k_for_intersections);
    let merged = merge_intersections_into_ranking(p, &ranking, cfg.k_for_intersections, &chains);
    (merged, report)
}

pub fn s2_repair(buggy: &Program, suite: &TestSuite, cfg: &S2Config) -> RepairResult {
    let deadline = Deadline::new(cfg.time_budget);
    let (ranking, report) = s2_ranking(buggy, suite, cfg);
    let failing = report.failing_indices();
    let mut executed = suite.len() * 2;
    let mut result = RepairResult {
        strategy: Strategy::S2,
        status: RepairStatus::Success,
        patch: ast_diff(buggy, buggy),
        program: buggy.clone(),
        iterations: Vec::new(),
        wall_time: Duration::ZERO,
        tests_executed: 0,
        witness: None,
        condition: None,
    };
    if failing.is_empty() {
        result.wall_time = deadline.elapsed();
        result.tests_executed = executed;
        return result;
    }
    let mut worst: BTreeSet<RepairStatus> = BTreeSet::new();
    'search: for (node, modes) in candidate_locations(buggy, &ranking, cfg.top_k) {
        for mode in modes {
            if deadline.expired() {
                worst.insert(RepairStatus::Timeout);
                break 'search;
            }
            let Some(ph) = placeholder(buggy, node, &mode) else {
                continue;
            };
            let sched = match angelic_search(&ph, suite, &failing, cfg.fuel, cfg.max_occurrences, &deadline) {
                Err(()) => {
                    worst.insert(RepairStatus::Timeout);
                    break 'search;
                }
                Ok(None) => {
                    worst.insert(RepairStatus::NoAngelicValue);
                    continue;
                }
                Ok(Some(s)) => s,
            };
            executed += failing.len();
            let spec = collect_snapshots(&ph, suite, &failing, Some(&sched), cfg.fuel);
            let cond = match synthesize_condition(&spec, cfg.depth_bound, cfg.candidate_budget) {
                Ok(c) => c,
                Err(NoSynthesis) => {
                    worst.insert(RepairStatus::NoSynthesis);
                    continue;
                }
            };
            let Some(patched) = materialize(buggy, node, &mode, &cond) else {
                worst.insert(RepairStatus::NoSynthesis);
                continue;
            };
            executed += suite.len();
            let check = run_suite_with(&patched, suite, &SuiteOptions::new(cfg.fuel));
            if !check.all_pass() {
                worst.insert(RepairStatus::NoSynthesis);
                continue;
            }
            let evidence = suite
                .tests
                .iter()
                .enumerate()
                .map(|(i, t)| {
                    let forced = failing.contains(&i).then_some(&sched);
                    (t.name.clone(), test_passes(&ph.program, t, cfg.fuel, forced))
                })
                .collect::<Vec<_>>();
            debug_assert!(evidence.iter().all(|e| e.1), "unsound witness");
            result.witness = Some(AngelicWitness {
                node,
                mode: mode.clone(),
                schedule: sched,
                evidence,
            });
            result.condition = Some(expr_to_string(&cond));
            result.patch = ast_diff(buggy, &patched);
            result.program = patched;
            result.iterations.push(Iteration {
                operator: format!("{} {}", mode.describe(), expr_to_string(&cond)),
                func: buggy.function_name(node).to_string(),
                line: buggy.stmt(node).map_or(0, |s| s.line),
                before: FitnessState {
                    residual: failing.len(),
                    regressions: 0,
                },
                after: FitnessState {
                    residual: 0,
                    regressions: 0,
                },
            });
            result.wall_time = deadline.elapsed();
            result.tests_executed = executed;
            return result;
        }
    }
    result.status = [
        RepairStatus::NoSynthesis,
        RepairStatus::NoAngelicValue,
        RepairStatus::Timeout,
    ]
    .into_iter()
    .find(|s| worst.contains(s))
    .unwrap_or(RepairStatus::NoAngelicValue);
    result.wall_time = deadline.elapsed();
    result.tests_executed = executed;
    result
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(rows: &[(&[(&str, Value)], bool)], vocab: &[(&str, Type)]) -> SynthesisSpec {
        SynthesisSpec {
            snapshots: rows
                .iter()
                .enumerate()
                .map(|(i, (env, req))| Snapshot {
                    test: format!("t{i}"),
                    occurrence: 0,
                    env: env.iter().map(|(n, v)| (n.to_string(), v.clone())).collect(),
                    required: *req,
                })
                .collect(),
            vocabulary: vocab.iter().map(|(n, t)| (n.to_string(), *t)).collect(),
            constants: vec![-1, 0, 1],
        }
    }

    #[test]
    fn flag_alone_wins() {
        let s = spec(
            &[
                (&[("allow", Value::Bool(true)), ("x", Value::Int(3))], true),
                (&[("allow", Value::Bool(false)), ("x", Value::Int(3))], false),
            ],
            &[("allow", Type::Bool), ("x", Type::Int)],
        );
        assert_eq!(synthesize_condition(&s, 2, 10_000).unwrap(), Expr::var("allow"));
    }

    #[test]
    fn contradiction_is_unsynthesizable() {
        let env: &[(&str, Value)] = &[("x", Value::Int(1))];
        let s = spec(&[(env, true), (env, false)], &[("x", Type::Int)]);
        assert_eq!(synthesize_condition(&s, 2, 100_000), Err(NoSynthesis));
        assert_eq!(synthesize_condition(&s, 0, 100_000), Err(NoSynthesis));
    }

    #[test]
    fn conjunction_needs_depth_two() {
        let row = |a: i64, f: bool, req: bool| (vec![("i", Value::Int(a)), ("f", Value::Bool(f))], req);
        let rows = [
            row(1, false, true),
            row(1, true, false),
            row(-1, false, false),
            row(-1, true, false),
        ];
        let rows: Vec<(&[(&str, Value)], bool)> = rows.iter().map(|(e, r)| (e.as_slice(), *r)).collect();
        let s = spec(&rows, &[("i", Type::Int), ("f", Type::Bool)]);
        let got = synthesize_condition(&s, 2, 100_000).unwrap();
        for snap in &s.snapshots {
            assert_eq!(eval_cond(&got, &snap.env), Some(snap.required));
        }
        assert!(matches!(got, Expr::Binary(BinOp::And, ..)), "{}", expr_to_string(&got));
        assert!(synthesize_condition(&s, 1, 100_000).is_err());
    }

    #[test]
    fn schedule_order() {
        let v: Vec<OverridePolicy> = schedule_space(2).collect();
        assert_eq!(v[0], OverridePolicy::Uniform(true));
        assert_eq!(v[1], OverridePolicy::Uniform(false));
        assert_eq!(v[2], OverridePolicy::PerOccurrence(vec![false]));
        assert_eq!(v[3], OverridePolicy::PerOccurrence(vec![true]));
        assert_eq!(v[4], OverridePolicy::PerOccurrence(vec![false, false]));
        assert_eq!(v.len(), 2 + 2 + 4);
    }
}
