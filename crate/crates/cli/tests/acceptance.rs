//! End-to-end acceptance checks, one PASS/FAIL line each. Runs the CLI for
//! the repair scenarios and the library for the structural claims.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use mlrepair_core::faultloc::{compute_epc, epc_intersections, ochiai_score, rank, Counts, Epc, Spectrum};
use mlrepair_core::fuzz::{random_call, random_edit, random_program, rename_source};
use mlrepair_core::harness::prepare_suite;
use mlrepair_core::harness::{load_corpus, percentage, BugEntry};
use mlrepair_core::lang::*;
use mlrepair_core::patch::{apply_patch, ast_diff, classify, PatchClass};
use mlrepair_core::repair::{s1_repair, S1Config};
use mlrepair_core::testkit::{purify, run_suite, TestSuite};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value as Json;

type Check = Result<(), String>;
type CheckFn = fn() -> Check;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($msg)+));
        }
    };
}

fn corpus() -> PathBuf {
    PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/../../corpus"))
}

fn bugs() -> Vec<BugEntry> {
    load_corpus(&corpus()).expect("corpus loads")
}

/// Runs the CLI and returns stdout and the wall time.
fn cli(args: &[&str]) -> (String, Duration) {
    let start = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_mlrepair"))
        .args(args)
        .output()
        .expect("mlrepair runs");
    (String::from_utf8(out.stdout).expect("utf-8 output"), start.elapsed())
}

fn repair(bug: &str, flags: &[&str]) -> Result<(Json, Duration), String> {
    let dir = corpus().join(bug);
    let mut args = vec!["repair", dir.to_str().unwrap()];
    args.extend(flags);
    let (out, t) = cli(&args);
    let json = serde_json::from_str(&out).map_err(|e| format!("repair {bug}: {e}"))?;
    Ok((json, t))
}

fn seeds(cases: u32, f: impl Fn(&mut ChaCha8Rng) -> Result<(), TestCaseError>) -> Check {
    let mut runner = TestRunner::new(Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    });
    runner
        .run(&any::<u64>(), |seed| f(&mut ChaCha8Rng::seed_from_u64(seed)))
        .map_err(|e| e.to_string())
}

fn ochiai_exactness() -> Check {
    let start = Instant::now();
    for (ef, ep, f, want) in [(2, 0, 2, 1.0), (1, 1, 2, 0.5), (0, 5, 2, 0.0)] {
        let got = ochiai_score(ef, ep, f);
        ensure!((got - want).abs() < 1e-12, "ochiai({ef},{ep},{f}) = {got}");
    }
    let src: String = (0..10)
        .map(|i| {
            format!(
                "  let v{i}: int = {};\n",
                if i == 0 { "x".into() } else { format!("v{}", i - 1) }
            )
        })
        .collect();
    let p = parse(&format!("fn f(x: int) -> int {{\n{src}  return v9;\n}}\n")).unwrap();
    let (failing, passing) = (5usize, 7usize);
    let table = [
        (5, 0),
        (4, 2),
        (3, 3),
        (1, 7),
        (0, 4),
        (5, 7),
        (2, 0),
        (4, 2),
        (2, 6),
        (1, 1),
    ];
    let mut sp = Spectrum {
        failing,
        passing,
        ..Spectrum::default()
    };
    for (s, &(ef, ep)) in p.statements().iter().zip(&table) {
        sp.counts.insert(
            s.id,
            Counts {
                ef,
                ep,
                nf: failing - ef,
                np: passing - ep,
            },
        );
    }
    let r = rank(&p, &sp);
    ensure!(r.len() == table.len(), "ranking has {} entries", r.len());
    for e in &r.entries {
        let (ef, ep) = table[(e.line - 2) as usize];
        let want = if ef == 0 {
            0.0
        } else {
            ef as f64 / ((failing * (ef + ep)) as f64).sqrt()
        };
        ensure!((e.score - want).abs() < 1e-12, "line {}: {} vs {want}", e.line, e.score);
    }
    ensure!(start.elapsed() < Duration::from_secs(1), "took {:?}", start.elapsed());
    Ok(())
}

fn percentages() -> Check {
    ensure!(percentage(70, 244) == 28.69, "70/244 -> {}", percentage(70, 244));
    ensure!(percentage(165, 244) == 67.62, "165/244 -> {}", percentage(165, 244));
    Ok(())
}

fn classifier_fidelity() -> Check {
    let bugs = bugs();
    let count = |f: &dyn Fn(PatchClass) -> bool| bugs.iter().filter(|b| f(b.meta.expected_class)).count();
    ensure!(bugs.len() >= 12, "only {} bugs", bugs.len());
    ensure!(
        count(&|c| matches!(c, PatchClass::Similar | PatchClass::SimilarExact)) >= 3,
        "too few similar bugs"
    );
    ensure!(count(&|c| c == PatchClass::Relevant) >= 3, "too few relevant bugs");
    ensure!(count(&|c| c == PatchClass::Other) >= 2, "too few other bugs");
    for b in &bugs {
        let got = classify(&b.ground_truth(), &b.buggy).map_err(|e| e.to_string())?;
        ensure!(
            got == b.meta.expected_class,
            "{}: {got} vs {}",
            b.id,
            b.meta.expected_class
        );
    }
    seeds(200, |rng| {
        let base = random_program(rng);
        let target = random_edit(&base, rng);
        let mut names = BTreeMap::new();
        let rb = parse(&rename_source(&pretty_print(&base), &mut names, false)).unwrap();
        let rt = parse(&rename_source(&pretty_print(&target), &mut names, false)).unwrap();
        prop_assert_eq!(
            classify(&ast_diff(&base, &target), &base),
            classify(&ast_diff(&rb, &rt), &rb)
        );
        Ok(())
    })?;
    seeds(200, |rng| {
        let base = loop {
            let p = random_program(rng);
            if p.functions.len() >= 2 {
                break p;
            }
        };
        let guard = |msg: &str, cond: bool| {
            Stmt::new(StmtKind::If(
                Expr::Bool(cond),
                Block::new(vec![Stmt::new(StmtKind::Abort(msg.into()))]),
                None,
            ))
        };
        let mut both = base.clone();
        for f in &mut both.functions {
            f.body.stmts.insert(0, guard("guard", false));
        }
        let body = &mut both.functions[0].body.stmts;
        let at = body.len() - 1;
        body.insert(at, guard("more", true));
        both.renumber();
        prop_assert_eq!(classify(&ast_diff(&base, &both), &base).unwrap(), PatchClass::Relevant);
        Ok(())
    })
}

fn case_study_similar() -> Check {
    let (r, t) = repair("twin_guard", &["--strategy", "s1", "--purify", "--augment"])?;
    ensure!(r["status"] == "Success", "status {}", r["status"]);
    ensure!(
        r["patch"]["chunks"].as_array().map_or(0, Vec::len) == 2,
        "chunks {}",
        r["patch"]["chunks"]
    );
    ensure!(r["class"] == "similar_exact", "class {}", r["class"]);
    ensure!(r["correct"] == true, "not correct");
    ensure!(t < Duration::from_secs(60), "took {t:?}");
    let (r, t) = repair("twin_guard", &["--strategy", "s1", "--purify"])?;
    ensure!(r["correct"] == false, "correct without augmentation");
    ensure!(t < Duration::from_secs(60), "took {t:?}");
    Ok(())
}

fn failing_chains(b: &BugEntry) -> Vec<Vec<Epc>> {
    let seeds: Vec<NodeId> = b
        .faulty_lines()
        .iter()
        .map(|(f, l)| b.buggy.stmt_at_line(f, *l).expect("faulty line").id)
        .collect();
    run_suite(&b.buggy, &purify(&b.suite), DEFAULT_FUEL)
        .results
        .into_iter()
        .filter_map(|r| Some((r.name, r.trace?)))
        .map(|(name, trace)| {
            seeds
                .iter()
                .filter_map(|&s| compute_epc(&b.buggy, &trace, s, &name).ok())
                .collect::<Vec<_>>()
        })
        .filter(|chains| chains.len() == seeds.len())
        .collect()
}

fn case_study_relevant() -> Check {
    let (r, t) = repair("dup_flag", &["--strategy", "s2", "--line-assumption"])?;
    ensure!(r["status"] == "Success", "status {}", r["status"]);
    ensure!(
        r["patch"]["chunks"].as_array().map_or(0, Vec::len) == 1,
        "chunks {}",
        r["patch"]["chunks"]
    );
    ensure!(r["correct"] == true, "not correct");
    ensure!(t < Duration::from_secs(60), "took {t:?}");
    let b = bugs().into_iter().find(|b| b.id == "dup_flag").unwrap();
    let loc = &r["witness"]["location"];
    let node = b
        .buggy
        .stmt_at_line(
            loc["fn"].as_str().unwrap_or(""),
            loc["line"].as_u64().unwrap_or(0) as u32,
        )
        .ok_or("witness location is not a statement")?
        .id;
    let meets = failing_chains(&b)
        .iter()
        .any(|chains| epc_intersections(&chains.iter().collect::<Vec<_>>()).contains(&node));
    ensure!(meets, "guard at {loc} is not an EPC intersection");
    Ok(())
}

fn epc_structure() -> Check {
    for b in bugs().iter().filter(|b| b.meta.expected_class == PatchClass::Relevant) {
        let hit = failing_chains(b)
            .iter()
            .any(|chains| !epc_intersections(&chains.iter().collect::<Vec<_>>()).is_empty());
        ensure!(hit, "{}: no failing run with intersecting chains", b.id);
    }
    Ok(())
}

fn failing_count(out: &str) -> Option<usize> {
    let last = out.lines().last()?;
    last.split(", ").nth(1)?.strip_suffix(" failing")?.parse().ok()
}

fn assertions(s: &TestSuite) -> Vec<String> {
    let mut v: Vec<String> = s
        .tests
        .iter()
        .flat_map(|t| &t.assertions)
        .map(|a| format!("{a:?}"))
        .collect();
    v.sort();
    v
}

fn purification() -> Check {
    let dir = corpus().join("multi_assert");
    let dir = dir.to_str().unwrap();
    let before = failing_count(&cli(&["run-tests", dir]).0);
    let after = failing_count(&cli(&["run-tests", dir, "--purify"]).0);
    ensure!(before == Some(1), "unpurified failing count {before:?}");
    ensure!(after.is_some_and(|n| n >= 2), "purified failing count {after:?}");
    let b = bugs().into_iter().find(|b| b.id == "multi_assert").unwrap();
    ensure!(
        assertions(&b.suite) == assertions(&purify(&b.suite)),
        "assertion multiset changed"
    );
    Ok(())
}

fn failure_taxonomy() -> Check {
    let cases: [(&str, &[&str], &str); 3] = [
        (
            "no_angelic",
            &["--strategy", "s2", "--line-assumption"],
            "NoAngelicValue",
        ),
        (
            "dup_flag",
            &["--strategy", "s2", "--line-assumption", "--depth-bound", "0"],
            "NoSynthesis",
        ),
        ("slow_sum", &["--purify", "--augment", "--time-budget", "1"], "Timeout"),
    ];
    for (bug, flags, want) in cases {
        let (r, _) = repair(bug, flags)?;
        ensure!(r["status"] == want, "{bug}: {} instead of {want}", r["status"]);
    }
    Ok(())
}

fn s1_monotonicity() -> Check {
    for b in bugs() {
        let suite = prepare_suite(&b, true, true, 0, DEFAULT_FUEL);
        let initial = run_suite(&b.buggy, &suite, DEFAULT_FUEL).failing;
        let cfg = S1Config {
            line_assumption: Some(b.faulty_lines()),
            ..S1Config::default()
        };
        let r = s1_repair(&b.buggy, &suite, &cfg);
        ensure!(
            r.iterations.len() <= initial,
            "{}: {} iterations for {initial} failing",
            b.id,
            r.iterations.len()
        );
        for it in &r.iterations {
            ensure!(
                it.after.residual < it.before.residual,
                "{}: {} did not shrink the residual",
                b.id,
                it.operator
            );
        }
    }
    Ok(())
}

fn determinism() -> Check {
    let dir = std::env::temp_dir().join(format!("mlrepair-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
    let table = |name: &str| -> Result<Vec<u8>, String> {
        let path = dir.join(name);
        cli(&[
            "bench",
            corpus().to_str().unwrap(),
            "--seed",
            "7",
            "--out",
            path.to_str().unwrap(),
        ]);
        std::fs::read(&path).map_err(|e| format!("{}: {e}", path.display()))
    };
    let (a, b) = (table("a.json")?, table("b.json")?);
    let _ = std::fs::remove_dir_all(&dir);
    ensure!(!a.is_empty() && a == b, "bench tables differ");
    seeds(1000, |rng| {
        let p = random_program(rng);
        let text = pretty_print(&p);
        prop_assert_eq!(&parse(&text).unwrap(), &p);
        let call = random_call(&p, rng);
        let plain = execute(&p, &call, 2_000).unwrap();
        prop_assert_eq!(
            execute_with_overrides(&p, &call, &ConditionOverrideSchedule::default(), 2_000).unwrap(),
            plain
        );
        let target = random_edit(&p, rng);
        let patch = ast_diff(&p, &target);
        prop_assert_eq!(apply_patch(&p, &patch).unwrap(), target.clone());
        prop_assert_eq!(classify(&patch, &p).is_ok(), !patch.is_empty());
        Ok(())
    })
}

fn main() -> ExitCode {
    let checks: [(&str, CheckFn); 10] = [
        ("ochiai exactness", ochiai_exactness),
        ("percentage arithmetic", percentages),
        ("classifier fidelity", classifier_fidelity),
        ("similar case study", case_study_similar),
        ("relevant case study", case_study_relevant),
        ("EPC intersections", epc_structure),
        ("purification effect", purification),
        ("failure taxonomy", failure_taxonomy),
        ("S1 monotonicity", s1_monotonicity),
        ("determinism", determinism),
    ];
    let only: Option<usize> = std::env::args().skip(1).find_map(|a| a.parse().ok());
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        if only.is_some_and(|n| n != i + 1) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(()) => println!("PASS {:>2} {name} ({secs:.1}s)", i + 1),
            Err(e) => {
                failed += 1;
                println!("FAIL {:>2} {name} ({secs:.1}s): {e}", i + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
