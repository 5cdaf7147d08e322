use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use mlrepair_core::faultloc::{compute_epc, line_assumption, rank, Spectrum};
use mlrepair_core::harness::{
    bench, bench_table, bench_text, check_result, load_bug, load_corpus, prepare_suite, repair_bug, stats, BenchConfig,
    BugEntry, RepairConfig, StrategyChoice,
};
use mlrepair_core::lang::DEFAULT_FUEL;
use mlrepair_core::patch::classify;
use mlrepair_core::repair::RepairStatus;
use mlrepair_core::testkit::{purify, run_suite, Observed, TestStatus, DEFAULT_TRIALS};
use mlrepair_core::{parse, pretty_print};

#[derive(Parser)]
#[command(name = "mlrepair", version, about = "Multi-location repair workbench for MiniLang")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Phases {
    /// Split multi-assertion tests into single-assertion tests.
    #[arg(long)]
    purify: bool,
    /// Add oracle-generated tests from the fixed program.
    #[arg(long)]
    augment: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Run the bug's suite against the buggy program.
    RunTests {
        bug: PathBuf,
        #[command(flatten)]
        phases: Phases,
        /// Run against fixed.ml instead.
        #[arg(long)]
        fixed: bool,
    },
    /// Print the Ochiai ranking as JSON.
    Localize {
        bug: PathBuf,
        #[arg(long)]
        top_k: Option<usize>,
        #[arg(long)]
        line_assumption: bool,
    },
    /// Print the error propagation chain of a statement in a failing test.
    Epc {
        bug: PathBuf,
        #[arg(long = "fn")]
        func: String,
        #[arg(long)]
        line: u32,
        #[arg(long)]
        test: String,
    },
    /// Classify the ground-truth patch.
    Classify {
        bug: PathBuf,
        /// Print the patch as JSON as well.
        #[arg(long)]
        json: bool,
    },
    /// Repair the buggy program.
    Repair {
        bug: PathBuf,
        #[arg(long, default_value = "auto")]
        strategy: StrategyChoice,
        #[command(flatten)]
        phases: Phases,
        #[arg(long)]
        line_assumption: bool,
        #[arg(long, default_value_t = 60.0)]
        time_budget: f64,
        #[arg(long, default_value_t = 1)]
        regression_budget: usize,
        /// Number of suspicious statements to consider.
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, default_value_t = 2)]
        depth_bound: u32,
        #[arg(long, default_value_t = DEFAULT_TRIALS)]
        trials: usize,
        /// Directory for result.json, patch.json and witness.json.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Log committed iterations to stderr.
        #[arg(long, short)]
        verbose: bool,
    },
    /// Class distribution of the corpus ground-truth patches.
    Stats {
        corpus: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Run both strategies on every corpus bug.
    Bench {
        corpus: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 60.0)]
        time_budget: f64,
        #[arg(long, default_value_t = DEFAULT_TRIALS)]
        trials: usize,
        /// Rank by Ochiai alone instead of injecting the known faulty lines.
        #[arg(long)]
        no_line_assumption: bool,
    },
    /// Print a MiniLang file in canonical form.
    Fmt { file: PathBuf },
}

fn budget(secs: f64) -> Result<Duration> {
    Duration::try_from_secs_f64(secs).map_err(|_| anyhow!("invalid time budget {secs}"))
}

fn bug(dir: &Path) -> Result<BugEntry> {
    load_bug(dir).with_context(|| format!("loading {}", dir.display()))
}

fn print_json(v: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("json"));
}

fn write_json(dir: &Path, name: &str, v: &serde_json::Value) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, serde_json::to_string_pretty(v)? + "\n").with_context(|| format!("writing {}", path.display()))
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::RunTests {
            bug: dir,
            phases,
            fixed,
        } => {
            let b = bug(&dir)?;
            let suite = prepare_suite(&b, phases.purify, phases.augment, phases.seed, DEFAULT_FUEL);
            let p = if fixed { &b.fixed } else { &b.buggy };
            let report = run_suite(p, &suite, DEFAULT_FUEL);
            for r in &report.results {
                match r.status {
                    TestStatus::Pass => println!("PASS {}", r.name),
                    TestStatus::Fail => println!(
                        "FAIL {} (assertion {}: got {})",
                        r.name,
                        r.failed_assertion.unwrap_or(0),
                        r.observed
                            .as_ref()
                            .map_or("?".to_string(), |o| Observed::of(o).to_string())
                    ),
                }
            }
            println!("{} passing, {} failing", report.passing, report.failing);
        }
        Command::Localize {
            bug: dir,
            top_k,
            line_assumption: la,
        } => {
            let b = bug(&dir)?;
            let report = run_suite(&b.buggy, &b.suite, DEFAULT_FUEL);
            let mut ranking = rank(&b.buggy, &Spectrum::from_report(&b.buggy, &report));
            if la {
                ranking = line_assumption(&b.buggy, &ranking, &b.faulty_lines());
            }
            if let Some(k) = top_k {
                ranking.entries.truncate(k);
            }
            print_json(&ranking.to_json());
        }
        Command::Epc {
            bug: dir,
            func,
            line,
            test,
        } => {
            let b = bug(&dir)?;
            let seed = b
                .buggy
                .stmt_at_line(&func, line)
                .ok_or_else(|| anyhow!("no statement at {func}:{line}"))?
                .id;
            // purified names (`t#k`) are accepted as well
            let suite = if b.suite.tests.iter().any(|t| t.name == test) {
                b.suite.clone()
            } else {
                purify(&b.suite)
            };
            let report = run_suite(&b.buggy, &suite, DEFAULT_FUEL);
            let result = report
                .results
                .iter()
                .find(|r| r.name == test)
                .ok_or_else(|| anyhow!("no test named {test}"))?;
            let trace = result
                .trace
                .as_ref()
                .ok_or_else(|| anyhow!("test {test} does not fail"))?;
            let epc = compute_epc(&b.buggy, trace, seed, &test)?;
            print_json(&epc.to_json(&b.buggy));
        }
        Command::Classify { bug: dir, json } => {
            let b = bug(&dir)?;
            let patch = b.ground_truth();
            let class = classify(&patch, &b.buggy)?;
            if json {
                print_json(&json!({"class": class.label(), "patch": patch.to_json()}));
            } else {
                println!("{class}");
            }
        }
        Command::Repair {
            bug: dir,
            strategy,
            phases,
            line_assumption,
            time_budget,
            regression_budget,
            k,
            depth_bound,
            trials,
            out,
            verbose,
        } => {
            let b = bug(&dir)?;
            let cfg = RepairConfig {
                strategy,
                purify: phases.purify,
                augment: phases.augment,
                line_assumption,
                seed: phases.seed,
                time_budget: budget(time_budget)?,
                regression_budget,
                top_k: k,
                depth_bound,
                ..RepairConfig::default()
            };
            let runs = repair_bug(&b, &cfg);
            if verbose {
                for r in &runs {
                    eprintln!("{}: {}", r.strategy.name(), r.status);
                    for it in &r.iterations {
                        eprintln!(
                            "  {} ({},{}) -> ({},{})",
                            it.operator,
                            it.before.residual,
                            it.before.regressions,
                            it.after.residual,
                            it.after.regressions
                        );
                    }
                }
            }
            let r = runs.last().expect("at least one strategy runs");
            let (plausible, correct) = check_result(&b, r, trials, phases.seed);
            let mut result = r.to_json();
            result["bug"] = json!(b.id);
            result["plausible"] = json!(plausible);
            result["correct"] = json!(correct);
            result["class"] = json!(classify(&r.patch, &b.buggy).ok().map(|c| c.label()));
            result["attempts"] = json!(runs
                .iter()
                .map(|r| json!({"strategy": r.strategy.name(), "status": r.status.name()}))
                .collect::<Vec<_>>());
            if let Some(dir) = &out {
                fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
                write_json(dir, "result.json", &result)?;
                write_json(dir, "patch.json", &r.patch.to_json())?;
                if let Some(w) = &r.witness {
                    write_json(dir, "witness.json", &w.to_json(&b.buggy))?;
                }
            }
            result["patch"] = r.patch.to_json();
            if let Some(w) = &r.witness {
                result["witness"] = w.to_json(&b.buggy);
            }
            print_json(&result);
            if r.status != RepairStatus::Success {
                return Ok(ExitCode::from(1));
            }
        }
        Command::Stats { corpus, json } => {
            let bugs = load_corpus(&corpus)?;
            let rows = stats(&bugs);
            if json {
                print_json(&serde_json::to_value(&rows)?);
            } else {
                println!("{:<16} {:>5} {:>8}", "class", "count", "percent");
                for r in &rows {
                    println!("{:<16} {:>5} {:>7.2}%", r.class.label(), r.count, r.percentage);
                }
                println!("{:<16} {:>5}", "total", bugs.len());
            }
        }
        Command::Bench {
            corpus,
            out,
            seed,
            time_budget,
            trials,
            no_line_assumption,
        } => {
            let bugs = load_corpus(&corpus)?;
            if bugs.is_empty() {
                bail!("no bugs under {}", corpus.display());
            }
            let cfg = BenchConfig {
                seed,
                time_budget: budget(time_budget)?,
                line_assumption: !no_line_assumption,
                trials,
                ..BenchConfig::default()
            };
            let rows = bench(&bugs, &cfg);
            print!("{}", bench_text(&rows));
            if let Some(path) = out {
                fs::write(&path, bench_table(&rows)).with_context(|| format!("writing {}", path.display()))?;
            }
        }
        Command::Fmt { file } => {
            let src = fs::read_to_string(&file).with_context(|| format!("reading {}", file.display()))?;
            let p = parse(&src).with_context(|| file.display().to_string())?;
            print!("{}", pretty_print(&p));
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            // library errors already embed their source in the message
            let mut msg = e.to_string();
            for cause in e.chain().skip(1).map(|c| c.to_string()) {
                if !msg.contains(&cause) {
                    msg = format!("{msg}: {cause}");
                }
            }
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
