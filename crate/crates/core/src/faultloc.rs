//! Spectrum-based fault localization, error propagation chains and the
//! ranking transformations built on them.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use serde::Serialize;
use serde_json::json;

use crate::lang::*;
use crate::testkit::{SuiteReport, TestStatus, TestSuite};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct Counts {
    pub ef: usize,
    pub ep: usize,
    pub nf: usize,
    pub np: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Spectrum {
    /// One entry per statement of the program, executed or not.
    pub counts: BTreeMap<NodeId, Counts>,
    pub failing: usize,
    pub passing: usize,
}

impl Spectrum {
    pub fn from_report(p: &Program, report: &SuiteReport) -> Self {
        let mut counts: BTreeMap<NodeId, Counts> =
            p.statements().into_iter().map(|s| (s.id, Counts::default())).collect();
        for r in &report.results {
            let fail = r.status == TestStatus::Fail;
            for (id, c) in counts.iter_mut() {
                match (fail, r.coverage.contains(id)) {
                    (true, true) => c.ef += 1,
                    (true, false) => c.nf += 1,
                    (false, true) => c.ep += 1,
                    (false, false) => c.np += 1,
                }
            }
        }
        Spectrum {
            counts,
            failing: report.failing,
            passing: report.passing,
        }
    }
}

pub fn collect_spectrum(p: &Program, suite: &TestSuite, fuel: u64) -> Spectrum {
    let report = crate::testkit::run_suite(p, suite, fuel);
    Spectrum::from_report(p, &report)
}

/// `ef / sqrt(F * (ef + ep))`, and 0 when the denominator vanishes.
pub fn ochiai_score(ef: usize, ep: usize, failing: usize) -> f64 {
    let denom = ((failing * (ef + ep)) as f64).sqrt();
    if denom == 0.0 {
        0.0
    } else {
        ef as f64 / denom
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankEntry {
    #[serde(skip)]
    pub node: NodeId,
    #[serde(rename = "fn")]
    pub func: String,
    pub line: u32,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Ranking {
    pub entries: Vec<RankEntry>,
}

impl Ranking {
    fn entry(p: &Program, node: NodeId, score: f64) -> RankEntry {
        RankEntry {
            node,
            func: p.function_name(node).to_string(),
            line: p.stmt(node).map_or(0, |s| s.line),
            score,
        }
    }

    fn sort(&mut self) {
        self.entries.sort_by(|a, b| {
            b.score
                .total_cmp(&a.score)
                .then(a.line.cmp(&b.line))
                .then_with(|| a.func.cmp(&b.func))
        });
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn position(&self, node: NodeId) -> Option<usize> {
        self.entries.iter().position(|e| e.node == node)
    }

    pub fn top(&self, k: usize) -> &[RankEntry] {
        &self.entries[..k.min(self.entries.len())]
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::Value::Array(
            self.entries
                .iter()
                .map(|e| json!({"fn": e.func, "line": e.line, "node": e.node.index, "score": e.score}))
                .collect(),
        )
    }
}

/// Orders executed statements by Ochiai score.
pub fn rank(p: &Program, spectrum: &Spectrum) -> Ranking {
    let mut r = Ranking {
        entries: spectrum
            .counts
            .iter()
            .filter(|(_, c)| c.ef + c.ep > 0)
            .map(|(&id, c)| Ranking::entry(p, id, ochiai_score(c.ef, c.ep, spectrum.failing)))
            .collect(),
    };
    r.sort();
    r
}

/// Error propagation chain of one seed in one failing run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Epc {
    pub seed: NodeId,
    pub run: String,
    pub chain: Vec<NodeId>,
}

impl Epc {
    pub fn to_json(&self, p: &Program) -> serde_json::Value {
        let loc = |id: NodeId| json!({"fn": p.function_name(id), "line": p.stmt(id).map_or(0, |s| s.line)});
        json!({
            "seed": loc(self.seed),
            "test": self.run,
            "chain": self.chain.iter().map(|&id| loc(id)).collect::<Vec<_>>(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("no dependence path from the seed to the failure")]
pub struct NoChain;

/// Dynamic dependence graph of one trace, with the set of events the failure
/// depends on precomputed so that chains for many seeds are cheap.
pub struct DependenceGraph<'t> {
    trace: &'t ExecTrace,
    dependents: Vec<Vec<usize>>,
    failure: Option<usize>,
    reaches_failure: Vec<bool>,
}

impl<'t> DependenceGraph<'t> {
    pub fn build(p: &Program, trace: &'t ExecTrace) -> Self {
        let n = trace.events.len();
        let mut deps: Vec<Vec<usize>> = vec![Vec::new(); n];
        // latest definition of each variable per frame
        let mut last_def: HashMap<(usize, &str), usize> = HashMap::new();
        for (i, ev) in trace.events.iter().enumerate() {
            for u in &ev.uses {
                if let Some(&j) = last_def.get(&(ev.frame, u.as_str())) {
                    deps[i].push(j);
                } else if let Some(c) = trace.frames[ev.frame].call_event {
                    let func = &p.functions[trace.frames[ev.frame].func as usize];
                    if func.params.iter().any(|prm| &prm.name == u) {
                        deps[i].push(c);
                    }
                }
            }
            if let Some(c) = ev.control {
                deps[i].push(c);
            }
            deps[i].extend(&ev.calls);
            for d in &ev.defs {
                last_def.insert((ev.frame, d.as_str()), i);
            }
        }
        let mut dependents = vec![Vec::new(); n];
        for (i, ds) in deps.iter().enumerate() {
            for &j in ds {
                dependents[j].push(i);
            }
        }
        let failure = match trace.termination {
            Termination::Normal(_) => trace
                .events
                .iter()
                .rposition(|e| e.frame == 0 && matches!(p.stmt(e.node).map(|s| &s.kind), Some(StmtKind::Return(_)))),
            _ => n.checked_sub(1),
        };
        let mut reaches_failure = vec![false; n];
        if let Some(f) = failure {
            let mut queue = VecDeque::from([f]);
            reaches_failure[f] = true;
            while let Some(i) = queue.pop_front() {
                for &j in &deps[i] {
                    if !reaches_failure[j] {
                        reaches_failure[j] = true;
                        queue.push_back(j);
                    }
                }
            }
        }
        Self {
            trace,
            dependents,
            failure,
            reaches_failure,
        }
    }

    pub fn failure_node(&self) -> Option<NodeId> {
        self.failure.map(|f| self.trace.events[f].node)
    }

    /// Nodes on dependence paths from the last instance of `seed` to the
    /// failure event, seed first and failure node last.
    pub fn chain(&self, seed: NodeId) -> Result<Vec<NodeId>, NoChain> {
        let failure = self.failure.ok_or(NoChain)?;
        let start = self.trace.events.iter().rposition(|e| e.node == seed).ok_or(NoChain)?;
        if !self.reaches_failure[start] {
            return Err(NoChain);
        }
        let mut seen = vec![false; self.trace.events.len()];
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        let mut on_path = Vec::new();
        while let Some(i) = queue.pop_front() {
            if self.reaches_failure[i] {
                on_path.push(i);
            }
            for &j in &self.dependents[i] {
                if !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        if !seen[failure] {
            return Err(NoChain);
        }
        on_path.sort_unstable();
        let fail_node = self.trace.events[failure].node;
        let mut chain = vec![seed];
        for i in on_path {
            let node = self.trace.events[i].node;
            if !chain.contains(&node) && node != fail_node {
                chain.push(node);
            }
        }
        if fail_node != seed {
            chain.push(fail_node);
        }
        Ok(chain)
    }
}

pub fn compute_epc(p: &Program, trace: &ExecTrace, seed: NodeId, run: &str) -> Result<Epc, NoChain> {
    let chain = DependenceGraph::build(p, trace).chain(seed)?;
    Ok(Epc {
        seed,
        run: run.to_string(),
        chain,
    })
}

/// Nodes present in every chain.
pub fn epc_intersections(chains: &[&Epc]) -> BTreeSet<NodeId> {
    let Some((first, rest)) = chains.split_first() else {
        return BTreeSet::new();
    };
    first
        .chain
        .iter()
        .copied()
        .filter(|n| rest.iter().all(|c| c.chain.contains(n)))
        .collect()
}

/// EPCs of the top `k` ranked statements in every failing run of `report`.
pub fn top_k_chains(p: &Program, report: &SuiteReport, ranking: &Ranking, k: usize) -> Vec<Epc> {
    let mut out = Vec::new();
    for r in &report.results {
        let Some(trace) = &r.trace else { continue };
        let graph = DependenceGraph::build(p, trace);
        for e in ranking.top(k) {
            if let Ok(chain) = graph.chain(e.node) {
                out.push(Epc {
                    seed: e.node,
                    run: r.name.clone(),
                    chain,
                });
            }
        }
    }
    out
}

/// Pairwise intersections of the chains seeded at the top `k` statements
/// (within one run), unioned. Nodes already ranked are left alone; new ones
/// enter with the best score of the seeds that produced them.
pub fn merge_intersections_into_ranking(p: &Program, ranking: &Ranking, k: usize, chains: &[Epc]) -> Ranking {
    let top: HashMap<NodeId, f64> = ranking.top(k).iter().map(|e| (e.node, e.score)).collect();
    let mut by_run: BTreeMap<&str, Vec<&Epc>> = BTreeMap::new();
    for c in chains.iter().filter(|c| top.contains_key(&c.seed)) {
        by_run.entry(&c.run).or_default().push(c);
    }
    let mut injected: BTreeMap<NodeId, f64> = BTreeMap::new();
    for run in by_run.values() {
        for (i, a) in run.iter().enumerate() {
            for b in &run[i + 1..] {
                if a.seed == b.seed {
                    continue;
                }
                let score = top[&a.seed].max(top[&b.seed]);
                for n in epc_intersections(&[a, b]) {
                    let slot = injected.entry(n).or_insert(score);
                    *slot = slot.max(score);
                }
            }
        }
    }
    let mut out = ranking.clone();
    for (n, score) in injected {
        if ranking.position(n).is_none() {
            out.entries.push(Ranking::entry(p, n, score));
        }
    }
    out.sort();
    out
}

/// Moves the statements at the given `(function, line)` positions to the
/// front with score 1, in source order, adding them if they were never
/// executed.
pub fn line_assumption(p: &Program, ranking: &Ranking, faulty: &[(String, u32)]) -> Ranking {
    let mut heads: Vec<NodeId> = faulty
        .iter()
        .filter_map(|(f, l)| p.stmt_at_line(f, *l).map(|s| s.id))
        .collect();
    heads.sort_by_key(|&id| p.stmt(id).map(|s| s.line));
    heads.dedup();
    let mut entries: Vec<RankEntry> = heads.iter().map(|&id| Ranking::entry(p, id, 1.0)).collect();
    entries.extend(ranking.entries.iter().filter(|e| !heads.contains(&e.node)).cloned());
    Ranking { entries }
}
