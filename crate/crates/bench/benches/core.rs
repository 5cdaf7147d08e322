use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use mlrepair_bench::{bug, corpus, edit_pairs, programs_with_calls};
use mlrepair_core::faultloc::{rank, Spectrum};
use mlrepair_core::lang::{
    evaluate, execute, parse, pretty_print, ConditionOverrideSchedule, OverridePolicy, DEFAULT_FUEL,
};
use mlrepair_core::patch::{ast_diff, classify};
use mlrepair_core::repair::guard::{collect_snapshots, placeholder, synthesize_condition, GuardMode};
use mlrepair_core::testkit::run_suite;

fn interpreter(c: &mut Criterion) {
    let runs = programs_with_calls(1, 64);
    c.bench_function("evaluate random programs", |b| {
        b.iter(|| {
            for (p, call) in &runs {
                black_box(evaluate(p, call, 2_000).ok());
            }
        })
    });
    c.bench_function("execute with full trace", |b| {
        b.iter(|| {
            for (p, call) in &runs {
                black_box(execute(p, call, 2_000).ok());
            }
        })
    });
    let bugs = corpus();
    c.bench_function("corpus suites", |b| {
        b.iter(|| {
            for bug in bugs.iter().filter(|b| b.id != "slow_sum") {
                black_box(run_suite(&bug.buggy, &bug.suite, DEFAULT_FUEL));
            }
        })
    });
    let texts: Vec<String> = runs.iter().map(|(p, _)| pretty_print(p)).collect();
    c.bench_function("parse", |b| {
        b.iter(|| {
            for t in &texts {
                black_box(parse(t).unwrap());
            }
        })
    });
}

fn patches(c: &mut Criterion) {
    let pairs = edit_pairs(2, 64);
    c.bench_function("ast_diff", |b| {
        b.iter(|| {
            for (p, q) in &pairs {
                black_box(ast_diff(p, q));
            }
        })
    });
    let diffs: Vec<_> = pairs
        .iter()
        .map(|(p, q)| (p, ast_diff(p, q)))
        .filter(|(_, d)| !d.is_empty())
        .collect();
    c.bench_function("classify", |b| {
        b.iter(|| {
            for (p, d) in &diffs {
                black_box(classify(d, p).ok());
            }
        })
    });
}

fn localization(c: &mut Criterion) {
    let bugs = corpus();
    let reports: Vec<_> = bugs
        .iter()
        .map(|b| (b, run_suite(&b.buggy, &b.suite, DEFAULT_FUEL)))
        .collect();
    c.bench_function("spectrum and ochiai ranking", |b| {
        b.iter(|| {
            for (bug, report) in &reports {
                black_box(rank(&bug.buggy, &Spectrum::from_report(&bug.buggy, report)));
            }
        })
    });
}

fn synthesis(c: &mut Criterion) {
    let b = bug("dup_flag");
    let late = b.buggy.stmt_at_line("add_or_update", 17).unwrap().id;
    let ph = placeholder(&b.buggy, late, &GuardMode::ModifyCondition).unwrap();
    let failing = run_suite(&b.buggy, &b.suite, DEFAULT_FUEL).failing_indices();
    let sched = ConditionOverrideSchedule::single(late, OverridePolicy::Uniform(false));
    let spec = collect_snapshots(&ph, &b.suite, &failing, Some(&sched), DEFAULT_FUEL);
    c.bench_function("condition synthesis", |bch| {
        bch.iter(|| black_box(synthesize_condition(&spec, 2, 200_000).ok()))
    });
}

criterion_group!(benches, interpreter, patches, localization, synthesis);
criterion_main!(benches);
