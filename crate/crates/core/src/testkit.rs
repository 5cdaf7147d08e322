//! Tests, suite execution, purification, oracle-guided augmentation and
//! differential equivalence checking.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::SuiteError;
use crate::lang::interp::{self, check_call, ExecOptions, TraceLevel};
use crate::lang::*;

/// Expected result of an assertion.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Expect {
    Error { error: ErrorKind },
    Value(Value),
}

/// What a call produced, with abort messages erased.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Observed {
    Value(Value),
    Error(ErrorKind),
    FuelExhausted,
}

impl Observed {
    pub fn of(t: &Termination) -> Self {
        match t {
            Termination::Normal(v) => Observed::Value(v.clone()),
            Termination::RuntimeError { error, .. } => Observed::Error(error.kind()),
            Termination::FuelExhausted => Observed::FuelExhausted,
        }
    }

    pub fn to_expect(&self) -> Option<Expect> {
        match self {
            Observed::Value(v) => Some(Expect::Value(v.clone())),
            Observed::Error(k) => Some(Expect::Error { error: *k }),
            Observed::FuelExhausted => None,
        }
    }
}

impl std::fmt::Display for Observed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Observed::Value(v) => write!(f, "{v}"),
            Observed::Error(k) => write!(f, "{k:?}"),
            Observed::FuelExhausted => f.write_str("FuelExhausted"),
        }
    }
}

impl Expect {
    pub fn matches(&self, t: &Termination) -> bool {
        match (self, t) {
            (Expect::Value(v), Termination::Normal(got)) => v == got,
            (Expect::Error { error }, Termination::RuntimeError { error: got, .. }) => *error == got.kind(),
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Assertion {
    pub call: Call,
    pub expect: Expect,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TestCase {
    pub name: String,
    pub assertions: Vec<Assertion>,
}

impl TestCase {
    pub fn single(name: impl Into<String>, call: Call, expect: Expect) -> Self {
        Self {
            name: name.into(),
            assertions: vec![Assertion { call, expect }],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TestSuite {
    pub tests: Vec<TestCase>,
}

impl TestSuite {
    pub fn new(tests: Vec<TestCase>) -> Self {
        Self { tests }
    }

    pub fn from_json(text: &str) -> Result<Self, SuiteError> {
        let suite: TestSuite = serde_json::from_str(text)?;
        for t in &suite.tests {
            if t.assertions.is_empty() {
                return Err(SuiteError::Empty(t.name.clone()));
            }
        }
        Ok(suite)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("suite serializes")
    }

    /// Checks every assertion call against the program's signatures.
    pub fn check(&self, p: &Program) -> Result<(), SuiteError> {
        for t in &self.tests {
            if t.assertions.is_empty() {
                return Err(SuiteError::Empty(t.name.clone()));
            }
            for a in &t.assertions {
                check_call(p, &a.call).map_err(|source| SuiteError::Call {
                    test: t.name.clone(),
                    source,
                })?;
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.tests.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tests.is_empty()
    }

    pub fn assertion_count(&self) -> usize {
        self.tests.iter().map(|t| t.assertions.len()).sum()
    }

    pub fn select(&self, indices: &[usize]) -> TestSuite {
        TestSuite::new(indices.iter().map(|&i| self.tests[i].clone()).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TestStatus {
    Pass,
    Fail,
}

#[derive(Debug, Clone)]
pub struct TestResult {
    pub name: String,
    pub status: TestStatus,
    /// Index of the first failing assertion.
    pub failed_assertion: Option<usize>,
    pub observed: Option<Termination>,
    /// Trace of the failing assertion, when requested.
    pub trace: Option<ExecTrace>,
    /// Statements executed by any executed assertion, when requested.
    pub coverage: BTreeSet<NodeId>,
}

#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub results: Vec<TestResult>,
    pub passing: usize,
    pub failing: usize,
}

impl SuiteReport {
    pub fn failing_indices(&self) -> Vec<usize> {
        self.indices(TestStatus::Fail)
    }

    pub fn passing_indices(&self) -> Vec<usize> {
        self.indices(TestStatus::Pass)
    }

    fn indices(&self, status: TestStatus) -> Vec<usize> {
        self.results
            .iter()
            .enumerate()
            .filter(|(_, r)| r.status == status)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn all_pass(&self) -> bool {
        self.failing == 0
    }
}

#[derive(Debug, Clone, Default)]
pub struct SuiteOptions<'a> {
    pub fuel: u64,
    /// Keep the full trace of each failing assertion.
    pub trace_failures: bool,
    pub coverage: bool,
    pub overrides: Option<&'a ConditionOverrideSchedule>,
}

impl<'a> SuiteOptions<'a> {
    pub fn new(fuel: u64) -> Self {
        Self {
            fuel,
            ..Default::default()
        }
    }

    /// Coverage plus failing traces, as needed for localization.
    pub fn diagnostic(fuel: u64) -> Self {
        Self {
            fuel,
            trace_failures: true,
            coverage: true,
            overrides: None,
        }
    }
}

fn run_call(
    p: &Program,
    call: &Call,
    fuel: u64,
    level: TraceLevel,
    overrides: Option<&ConditionOverrideSchedule>,
) -> interp::ExecOutcome {
    let opts = ExecOptions {
        fuel,
        trace: level,
        overrides,
        capture_at: None,
    };
    interp::run(p, call, &opts).unwrap_or_else(|e| {
        // an ill-typed call can only come from a suite that was never
        // checked against this program; treat it as an opaque failure
        interp::ExecOutcome {
            termination: Termination::RuntimeError {
                error: RuntimeError::Abort(e.to_string()),
                node: NodeId::new(0, 0),
            },
            trace: None,
            coverage: BTreeSet::new(),
            snapshots: Vec::new(),
            steps: 0,
        }
    })
}

/// Runs one test with omission semantics.
pub fn run_test(p: &Program, test: &TestCase, opts: &SuiteOptions<'_>) -> TestResult {
    let level = if opts.coverage {
        TraceLevel::Coverage
    } else {
        TraceLevel::None
    };
    let mut coverage = BTreeSet::new();
    for (i, a) in test.assertions.iter().enumerate() {
        let out = run_call(p, &a.call, opts.fuel, level, opts.overrides);
        coverage.extend(out.coverage);
        if !a.expect.matches(&out.termination) {
            let trace = opts
                .trace_failures
                .then(|| run_call(p, &a.call, opts.fuel, TraceLevel::Full, opts.overrides).trace)
                .flatten();
            return TestResult {
                name: test.name.clone(),
                status: TestStatus::Fail,
                failed_assertion: Some(i),
                observed: Some(out.termination),
                trace,
                coverage,
            };
        }
    }
    TestResult {
        name: test.name.clone(),
        status: TestStatus::Pass,
        failed_assertion: None,
        observed: None,
        trace: None,
        coverage,
    }
}

/// Fast pass/fail check without any instrumentation.
pub fn test_passes(p: &Program, test: &TestCase, fuel: u64, overrides: Option<&ConditionOverrideSchedule>) -> bool {
    test.assertions.iter().all(|a| {
        a.expect
            .matches(&run_call(p, &a.call, fuel, TraceLevel::None, overrides).termination)
    })
}

pub fn run_suite_with(p: &Program, suite: &TestSuite, opts: &SuiteOptions<'_>) -> SuiteReport {
    let results: Vec<TestResult> = suite.tests.par_iter().map(|t| run_test(p, t, opts)).collect();
    let failing = results.iter().filter(|r| r.status == TestStatus::Fail).count();
    SuiteReport {
        passing: results.len() - failing,
        failing,
        results,
    }
}

/// Runs every test, keeping coverage and the traces of failing assertions.
pub fn run_suite(p: &Program, suite: &TestSuite, fuel: u64) -> SuiteReport {
    run_suite_with(p, suite, &SuiteOptions::diagnostic(fuel))
}

/// Splits every test into single-assertion tests named `<name>#k`.
pub fn purify(suite: &TestSuite) -> TestSuite {
    let mut out = Vec::with_capacity(suite.assertion_count());
    for t in &suite.tests {
        for (k, a) in t.assertions.iter().enumerate() {
            out.push(TestCase {
                name: format!("{}#{k}", t.name),
                assertions: vec![a.clone()],
            });
        }
    }
    TestSuite::new(out)
}

/// Sampling range for one parameter.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Domain {
    #[serde(rename = "int")]
    Int([i64; 2]),
    #[serde(rename = "bool")]
    Bool(bool),
    #[serde(rename = "int[]")]
    IntArray { len: [usize; 2], elem: [i64; 2] },
}

impl Domain {
    pub fn ty(&self) -> Type {
        match self {
            Domain::Int(_) => Type::Int,
            Domain::Bool(_) => Type::Bool,
            Domain::IntArray { .. } => Type::IntArray,
        }
    }

    pub fn sample(&self, rng: &mut impl Rng) -> Value {
        match self {
            Domain::Int([lo, hi]) => Value::Int(rng.gen_range(*lo..=*hi)),
            Domain::Bool(_) => Value::Bool(rng.gen()),
            Domain::IntArray { len, elem } => {
                let n = rng.gen_range(len[0]..=len[1]);
                Value::IntArray((0..n).map(|_| rng.gen_range(elem[0]..=elem[1])).collect())
            }
        }
    }

    fn well_formed(&self) -> bool {
        match self {
            Domain::Int([lo, hi]) => lo <= hi,
            Domain::Bool(_) => true,
            Domain::IntArray { len, elem } => len[0] <= len[1] && elem[0] <= elem[1],
        }
    }
}

/// Parameter domains per function name.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct InputDomains(pub BTreeMap<String, Vec<Domain>>);

impl InputDomains {
    /// Checks that each listed function exists and every parameter has a
    /// domain of its type.
    pub fn validate(&self, p: &Program) -> Result<(), String> {
        for (name, doms) in &self.0 {
            let f = p.function(name).ok_or(format!("domain for unknown function {name}"))?;
            if f.params.len() != doms.len() {
                return Err(format!(
                    "function {name} has {} parameters but {} domains",
                    f.params.len(),
                    doms.len()
                ));
            }
            for (param, d) in f.params.iter().zip(doms) {
                if param.ty != d.ty() || !d.well_formed() {
                    return Err(format!("bad domain for parameter {} of {name}", param.name));
                }
            }
        }
        Ok(())
    }

    /// Functions with domains, in program order.
    fn targets<'p>(&self, p: &'p Program) -> Vec<&'p Function> {
        p.functions.iter().filter(|f| self.0.contains_key(&f.name)).collect()
    }

    pub fn sample_call(&self, f: &Function, rng: &mut impl Rng) -> Call {
        let args = self.0[&f.name].iter().map(|d| d.sample(rng)).collect();
        Call::new(f.name.clone(), args)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AugmentConfig {
    pub budget: usize,
    pub max_new: usize,
    pub seed: u64,
    pub fuel: u64,
    /// Also return up to `max_new` tests that pass on the buggy program.
    pub include_passing: bool,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            budget: 500,
            max_new: 8,
            seed: 0,
            fuel: DEFAULT_FUEL,
            include_passing: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Augmentation {
    pub tests: Vec<TestCase>,
    /// Samples skipped because the oracle ran out of fuel.
    pub oracle_diverged: usize,
    pub sampled: usize,
}

/// Samples inputs round-robin over the functions with domains and keeps
/// those on which `buggy` disagrees with `oracle`.
pub fn augment(buggy: &Program, oracle: &Program, domains: &InputDomains, cfg: &AugmentConfig) -> Augmentation {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let targets = domains.targets(oracle);
    let mut out = Augmentation::default();
    if targets.is_empty() {
        return out;
    }
    let mut seen = HashSet::new();
    let mut passing = Vec::new();
    let mut failing = Vec::new();
    for i in 0..cfg.budget {
        if failing.len() >= cfg.max_new && (!cfg.include_passing || passing.len() >= cfg.max_new) {
            break;
        }
        let call = domains.sample_call(targets[i % targets.len()], &mut rng);
        out.sampled += 1;
        if !seen.insert(call.clone()) {
            continue;
        }
        let expected = match interp::evaluate(oracle, &call, cfg.fuel) {
            Ok(t) => Observed::of(&t),
            Err(_) => continue,
        };
        let Some(expect) = expected.to_expect() else {
            out.oracle_diverged += 1;
            continue;
        };
        let fails = interp::evaluate(buggy, &call, cfg.fuel)
            .map(|t| !expect.matches(&t))
            .unwrap_or(true);
        if fails && failing.len() < cfg.max_new {
            failing.push((call, expect));
        } else if !fails && cfg.include_passing && passing.len() < cfg.max_new {
            passing.push((call, expect));
        }
    }
    out.tests = failing
        .into_iter()
        .enumerate()
        .map(|(k, (c, e))| TestCase::single(format!("gen_fail_{k}"), c, e))
        .chain(
            passing
                .into_iter()
                .enumerate()
                .map(|(k, (c, e))| TestCase::single(format!("gen_pass_{k}"), c, e)),
        )
        .collect();
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Equivalence {
    Equivalent,
    CounterExample {
        call: Call,
        candidate: Observed,
        reference: Observed,
    },
}

impl Equivalence {
    pub fn is_equivalent(&self) -> bool {
        matches!(self, Equivalence::Equivalent)
    }
}

pub const DEFAULT_TRIALS: usize = 1000;

/// Compares `candidate` against `reference` on `trials` seeded random inputs
/// per function with domains.
pub fn differential_check(
    candidate: &Program,
    reference: &Program,
    domains: &InputDomains,
    trials: usize,
    seed: u64,
    fuel: u64,
) -> Equivalence {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for f in domains.targets(reference) {
        for _ in 0..trials {
            let call = domains.sample_call(f, &mut rng);
            let observe = |p: &Program| {
                interp::evaluate(p, &call, fuel)
                    .map(|t| Observed::of(&t))
                    .unwrap_or(Observed::Error(ErrorKind::Abort))
            };
            let (c, r) = (observe(candidate), observe(reference));
            if c != r {
                return Equivalence::CounterExample {
                    call,
                    candidate: c,
                    reference: r,
                };
            }
        }
    }
    Equivalence::Equivalent
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prog() -> Program {
        parse("fn f(a: int) -> int { if (a > 2) { abort(\"big\"); } return a + 1; }").unwrap()
    }

    fn assertion(a: i64, expect: Expect) -> Assertion {
        Assertion {
            call: Call::new("f", vec![Value::Int(a)]),
            expect,
        }
    }

    #[test]
    fn expect_json_shapes() {
        let e: Expect = serde_json::from_str(r#"{"error":"Abort"}"#).unwrap();
        assert_eq!(
            e,
            Expect::Error {
                error: ErrorKind::Abort
            }
        );
        let v: Expect = serde_json::from_str(r#"{"int":3}"#).unwrap();
        assert_eq!(v, Expect::Value(Value::Int(3)));
        assert_eq!(serde_json::to_string(&e).unwrap(), r#"{"error":"Abort"}"#);
    }

    #[test]
    fn omission_stops_at_first_failure() {
        let t = TestCase {
            name: "t".into(),
            assertions: vec![
                assertion(0, Expect::Value(Value::Int(1))),
                assertion(1, Expect::Value(Value::Int(5))),
                assertion(2, Expect::Value(Value::Int(3))),
            ],
        };
        let r = run_test(&prog(), &t, &SuiteOptions::diagnostic(100));
        assert_eq!(r.status, TestStatus::Fail);
        assert_eq!(r.failed_assertion, Some(1));
        // coverage comes from assertions 0 and 1 only: the abort is unreached
        let p = prog();
        let abort = p.stmt_at_line("f", 3).unwrap().id;
        assert!(!r.coverage.contains(&abort));
    }

    #[test]
    fn purify_counts_and_names() {
        let suite = TestSuite::new(vec![TestCase {
            name: "t".into(),
            assertions: vec![assertion(0, Expect::Value(Value::Int(1))); 3],
        }]);
        let pure = purify(&suite);
        assert_eq!(pure.len(), 3);
        assert_eq!(pure.tests[2].name, "t#2");
    }

    #[test]
    fn domains_json_and_sampling() {
        let d: InputDomains =
            serde_json::from_str(r#"{"g":[{"int":[-5,5]},{"bool":true},{"int[]":{"len":[0,3],"elem":[1,2]}}]}"#)
                .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let vals: Vec<Value> = d.0["g"].iter().map(|x| x.sample(&mut rng)).collect();
            assert!(matches!(vals[0], Value::Int(v) if (-5..=5).contains(&v)));
            match &vals[2] {
                Value::IntArray(xs) => assert!(xs.len() <= 3 && xs.iter().all(|x| (1..=2).contains(x))),
                v => panic!("{v:?}"),
            }
        }
    }

    #[test]
    fn augment_identical_programs_is_empty() {
        let p = prog();
        let d: InputDomains = serde_json::from_str(r#"{"f":[{"int":[-5,5]}]}"#).unwrap();
        assert!(augment(&p, &p, &d, &AugmentConfig::default()).tests.is_empty());
        let fixed = parse("fn f(a: int) -> int { if (a > 3) { abort(\"big\"); } return a + 1; }").unwrap();
        let cfg = AugmentConfig {
            budget: 0,
            ..Default::default()
        };
        assert!(augment(&p, &fixed, &d, &cfg).tests.is_empty());
        let got = augment(&p, &fixed, &d, &AugmentConfig::default());
        assert_eq!(got.tests.len(), 1);
        assert_eq!(got.tests[0].assertions[0].call.args, vec![Value::Int(3)]);
    }

    #[test]
    fn differential_finds_counterexample() {
        let p = prog();
        let d: InputDomains = serde_json::from_str(r#"{"f":[{"int":[-5,5]}]}"#).unwrap();
        assert!(differential_check(&p, &p, &d, 100, 0, 1000).is_equivalent());
        let other = parse("fn f(a: int) -> int { if (a > 3) { abort(\"big\"); } return a + 1; }").unwrap();
        match differential_check(&other, &p, &d, 1000, 0, 1000) {
            Equivalence::CounterExample { call, .. } => assert_eq!(call.args, vec![Value::Int(3)]),
            e => panic!("{e:?}"),
        }
    }
}
