mod common;

use std::collections::BTreeMap;

use mlrepair_core::fuzz::{random_call, random_program};
use mlrepair_core::harness::{load_corpus, prepare_suite};
use mlrepair_core::lang::*;
use mlrepair_core::testkit::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn assertion_multiset(s: &TestSuite) -> BTreeMap<String, usize> {
    let mut m = BTreeMap::new();
    for t in &s.tests {
        for a in &t.assertions {
            *m.entry(serde_json::to_string(a).unwrap()).or_default() += 1;
        }
    }
    m
}

#[test]
fn fixed_twin_guard_passes_its_suite() {
    let b = common::bug("twin_guard");
    assert_eq!(run_suite(&b.fixed, &b.suite, DEFAULT_FUEL).failing, 0);
}

#[test]
fn twin_guard_full_suite_has_two_failures() {
    let b = common::bug("twin_guard");
    assert_eq!(run_suite(&b.buggy, &b.suite, DEFAULT_FUEL).failing, 1);
    let full = prepare_suite(&b, true, true, 0, DEFAULT_FUEL);
    assert_eq!(run_suite(&b.buggy, &full, DEFAULT_FUEL).failing, 2);
}

#[test]
fn omission_stops_at_first_failure() {
    let p = parse("fn f(a: int) -> int { return a; }").unwrap();
    let call = |a| Call::new("f", vec![Value::Int(a)]);
    let expect = |v| Expect::Value(Value::Int(v));
    let t = TestCase {
        name: "t".into(),
        assertions: vec![
            Assertion {
                call: call(1),
                expect: expect(1),
            },
            Assertion {
                call: call(2),
                expect: expect(5),
            },
            Assertion {
                call: call(3),
                expect: expect(3),
            },
        ],
    };
    let r = run_suite(&p, &TestSuite::new(vec![t.clone()]), DEFAULT_FUEL);
    assert_eq!(r.results[0].status, TestStatus::Fail);
    assert_eq!(r.results[0].failed_assertion, Some(1));
    assert_eq!(r.results[0].observed, Some(Termination::Normal(Value::Int(2))));
    // the third assertion would pass, and a broken third one changes nothing
    let mut t2 = t;
    t2.assertions[2].expect = expect(99);
    let r2 = run_suite(&p, &TestSuite::new(vec![t2]), DEFAULT_FUEL);
    assert_eq!(r2.results[0].failed_assertion, Some(1));
}

#[test]
fn purify_examples() {
    let b = common::bug("multi_assert");
    let mixed = TestSuite::new(vec![b.suite.tests.iter().find(|t| t.name == "mixed").unwrap().clone()]);
    let split = purify(&mixed);
    let names: Vec<&str> = split.tests.iter().map(|t| t.name.as_str()).collect();
    assert_eq!(names, ["mixed#0", "mixed#1", "mixed#2"]);

    let singles = TestSuite::new(
        b.suite
            .tests
            .iter()
            .filter(|t| t.assertions.len() == 1)
            .cloned()
            .collect(),
    );
    let same = purify(&singles);
    assert_eq!(same.len(), singles.len());
    for (x, y) in same.tests.iter().zip(&singles.tests) {
        assert_eq!(x.name, format!("{}#0", y.name));
        assert_eq!(x.assertions, y.assertions);
    }
}

#[test]
fn multi_assert_purification_exposes_second_failure() {
    let b = common::bug("multi_assert");
    assert_eq!(run_suite(&b.buggy, &b.suite, DEFAULT_FUEL).failing, 1);
    let purified = purify(&b.suite);
    let r = run_suite(&b.buggy, &purified, DEFAULT_FUEL);
    assert_eq!(r.failing, 2);
    assert_eq!(assertion_multiset(&purified), assertion_multiset(&b.suite));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn purify_preserves_assertions_and_failures(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_program(&mut rng);
        let tests: Vec<TestCase> = (0..rng.gen_range(1..5))
            .map(|i| TestCase {
                name: format!("t{i}"),
                assertions: (0..rng.gen_range(1..4))
                    .map(|_| Assertion {
                        call: random_call(&p, &mut rng),
                        expect: Expect::Value(Value::Int(rng.gen_range(-1..=1))),
                    })
                    .collect(),
            })
            .collect();
        let suite = TestSuite::new(tests);
        let purified = purify(&suite);
        prop_assert_eq!(purified.len(), suite.assertion_count());
        prop_assert_eq!(assertion_multiset(&purified), assertion_multiset(&suite));
        let before = run_suite(&p, &suite, 2_000).failing;
        let after = run_suite(&p, &purified, 2_000).failing;
        prop_assert!(after >= before);
    }
}

fn augment_cfg(budget: usize, max_new: usize, seed: u64) -> AugmentConfig {
    AugmentConfig {
        budget,
        max_new,
        seed,
        ..AugmentConfig::default()
    }
}

#[test]
fn augment_reaches_the_second_twin() {
    let b = common::bug("twin_guard");
    let out = augment(&b.buggy, &b.fixed, &b.meta.domains, &augment_cfg(500, 4, 0));
    assert!(!out.tests.is_empty() && out.tests.len() <= 4);
    assert!(out.tests.iter().any(|t| t.assertions[0].call.function == "add_at"));
    assert!(augment(&b.buggy, &b.fixed, &b.meta.domains, &augment_cfg(0, 4, 0))
        .tests
        .is_empty());
    assert!(augment(&b.fixed, &b.fixed, &b.meta.domains, &augment_cfg(500, 4, 0))
        .tests
        .is_empty());
}

#[test]
fn augmented_tests_fail_on_buggy_and_pass_on_oracle() {
    for bug in load_corpus(&common::corpus_dir()).unwrap() {
        let cfg = AugmentConfig {
            include_passing: true,
            ..augment_cfg(300, 6, 3)
        };
        let out = augment(&bug.buggy, &bug.fixed, &bug.meta.domains, &cfg);
        let suite = TestSuite::new(out.tests.clone());
        let on_oracle = run_suite(&bug.fixed, &suite, DEFAULT_FUEL);
        assert!(on_oracle.all_pass(), "{}", bug.id);
        let on_buggy = run_suite(&bug.buggy, &suite, DEFAULT_FUEL);
        for (t, r) in suite.tests.iter().zip(&on_buggy.results) {
            let expect = if t.name.starts_with("gen_fail") {
                TestStatus::Fail
            } else {
                TestStatus::Pass
            };
            assert_eq!(r.status, expect, "{} {}", bug.id, t.name);
        }
        let mut calls: Vec<&Call> = suite.tests.iter().map(|t| &t.assertions[0].call).collect();
        calls.sort();
        calls.dedup();
        assert_eq!(calls.len(), suite.len(), "{}: duplicate inputs", bug.id);
    }
}

#[test]
fn seeds_reproduce_outputs() {
    let b = common::bug("twin_guard");
    let run = |seed| augment(&b.buggy, &b.fixed, &b.meta.domains, &augment_cfg(500, 8, seed));
    assert_eq!(run(7), run(7));
    let check = |seed| differential_check(&b.buggy, &b.fixed, &b.meta.domains, 1000, seed, DEFAULT_FUEL);
    assert_eq!(check(7), check(7));
}

#[test]
fn differential_check_examples() {
    let b = common::bug("twin_guard");
    assert!(differential_check(&b.fixed, &b.fixed, &b.meta.domains, 1000, 0, DEFAULT_FUEL).is_equivalent());
    let Equivalence::CounterExample {
        call,
        candidate,
        reference,
    } = differential_check(&b.buggy, &b.fixed, &b.meta.domains, 1000, 0, DEFAULT_FUEL)
    else {
        panic!("twin_guard buggy should differ from fixed");
    };
    assert_ne!(candidate, reference);
    let observe = |p: &Program| Observed::of(&evaluate(p, &call, DEFAULT_FUEL).unwrap());
    assert_eq!((observe(&b.buggy), observe(&b.fixed)), (candidate, reference));
}

#[test]
fn suites_roundtrip_through_json() {
    for bug in load_corpus(&common::corpus_dir()).unwrap() {
        assert_eq!(TestSuite::from_json(&bug.suite.to_json()).unwrap(), bug.suite);
    }
    assert!(TestSuite::from_json(r#"{"tests":[{"name":"t","assertions":[]}]}"#).is_err());
}
