mod common;

use mlrepair_core::fuzz::{random_call, random_condition, random_program};
use mlrepair_core::lang::validate::validate_trace;
use mlrepair_core::lang::*;
use mlrepair_core::testkit::purify;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn lines(p: &Program) -> Vec<u32> {
    p.statements().iter().map(|s| s.line).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn pretty_roundtrip(seed in any::<u64>()) {
        let p = random_program(&mut rng(seed));
        let text = pretty_print(&p);
        let q = parse(&text).unwrap();
        prop_assert_eq!(&q, &p);
        prop_assert_eq!(lines(&q), lines(&p));
        prop_assert_eq!(pretty_print(&q), text);
    }

    #[test]
    fn traces_are_sound_and_deterministic(seed in any::<u64>()) {
        let mut r = rng(seed);
        let p = random_program(&mut r);
        let call = random_call(&p, &mut r);
        let first = execute(&p, &call, 2_000).unwrap();
        validate_trace(&p, &first.1).map_err(TestCaseError::fail)?;
        prop_assert_eq!(&first, &execute(&p, &call, 2_000).unwrap());
        prop_assert_eq!(evaluate(&p, &call, 2_000).unwrap(), first.0);
    }

    #[test]
    fn empty_schedule_is_neutral(seed in any::<u64>()) {
        let mut r = rng(seed);
        let p = random_program(&mut r);
        let call = random_call(&p, &mut r);
        let forced = execute_with_overrides(&p, &call, &ConditionOverrideSchedule::default(), 2_000).unwrap();
        prop_assert_eq!(forced, execute(&p, &call, 2_000).unwrap());
    }

    #[test]
    fn forced_conditions_take_the_forced_branch(seed in any::<u64>(), outcome in any::<bool>()) {
        let mut r = rng(seed);
        let p = random_program(&mut r);
        let Some(node) = random_condition(&p, &mut r) else { return Ok(()) };
        let call = random_call(&p, &mut r);
        let sched = ConditionOverrideSchedule::single(node, OverridePolicy::Uniform(outcome));
        let (_, trace) = execute_with_overrides(&p, &call, &sched, 2_000).unwrap();
        validate_trace(&p, &trace).map_err(TestCaseError::fail)?;
        for ev in trace.events.iter().filter(|e| e.node == node) {
            prop_assert_eq!(ev.branch_outcome, Some(outcome));
        }
    }
}

#[test]
fn corpus_programs_are_canonical() {
    for bug in mlrepair_core::harness::load_corpus(&common::corpus_dir()).unwrap() {
        for (name, file) in [("program.ml", &bug.buggy), ("fixed.ml", &bug.fixed)] {
            let on_disk = std::fs::read_to_string(bug.dir.join(name)).unwrap();
            assert_eq!(pretty_print(file), on_disk, "{}/{name}", bug.id);
            assert_eq!(&parse(&on_disk).unwrap(), file);
        }
    }
}

#[test]
fn canonical_layout() {
    let p = parse("fn id(x: int) -> int{return x;}").unwrap();
    assert_eq!(pretty_print(&p), "fn id(x: int) -> int {\n  return x;\n}\n");
}

#[test]
fn empty_schedule_matches_execute_on_corpus_tests() {
    for bug in mlrepair_core::harness::load_corpus(&common::corpus_dir()).unwrap() {
        for t in &purify(&bug.suite).tests {
            let call = &t.assertions[0].call;
            let plain = execute(&bug.buggy, call, DEFAULT_FUEL).unwrap();
            let forced =
                execute_with_overrides(&bug.buggy, call, &ConditionOverrideSchedule::default(), DEFAULT_FUEL).unwrap();
            assert_eq!(plain, forced, "{} {}", bug.id, t.name);
        }
    }
}

#[test]
fn forcing_the_sorted_branch_yields_the_expected_value() {
    let b = common::bug("dup_flag");
    let node = b.buggy.stmt_at_line("add_or_update", 17).unwrap().id;
    let sched = ConditionOverrideSchedule::single(node, OverridePolicy::Uniform(false));
    let t = b.suite.tests.iter().find(|t| t.name == "duplicate_existing").unwrap();
    let a = &t.assertions[0];
    let (plain, _) = execute(&b.buggy, &a.call, DEFAULT_FUEL).unwrap();
    assert!(!a.expect.matches(&plain));
    let (forced, _) = execute_with_overrides(&b.buggy, &a.call, &sched, DEFAULT_FUEL).unwrap();
    assert!(a.expect.matches(&forced), "{forced:?}");
}

#[test]
fn per_occurrence_override_falls_through() {
    let p = parse("fn f() -> int { let i: int = 0; while (false) { i = i + 1; } return i; }").unwrap();
    let node = p.stmt_at_line("f", 3).unwrap().id;
    let sched = ConditionOverrideSchedule::single(node, OverridePolicy::PerOccurrence(vec![true]));
    let (t, trace) = execute_with_overrides(&p, &Call::new("f", vec![]), &sched, 10).unwrap();
    assert_eq!(t, Termination::Normal(Value::Int(1)));
    let outcomes: Vec<_> = trace.events.iter().filter_map(|e| e.branch_outcome).collect();
    assert_eq!(outcomes, [true, false]);
}
