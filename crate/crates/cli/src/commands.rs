use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use pairevo::backend::{Backend, HttpBackend, SyntheticBackend};
use pairevo::baselines::{judge_diagnostic, pointwise_score, DiagnosticOptions, sample_candidates, self_refine, LabeledPair};
use pairevo::elo::{estimate_elo, parse_outcomes_jsonl, ProblemOutcome};
use pairevo::pipeline::{run_pipeline_with_sink, RunConfig, TraceRecord, SCHEMA_VERSION};
use pairevo::scaling::{optimal_frontier, sweep, JudgmentMatrix, SimOptions};
use pairevo::seed::{derive_seed, SeedPurpose};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::{BackendKind, BaselineMethod, CliConfig};
use crate::Failure;

fn make_backend(config: &CliConfig) -> Result<Box<dyn Backend>, Failure> {
    Ok(match config.backend.kind {
        BackendKind::Synthetic => {
            Box::new(SyntheticBackend::new(config.backend.synthetic.clone()).map_err(Failure::from_core)?)
        }
        BackendKind::Http => {
            Box::new(HttpBackend::new(config.backend.http.clone()).map_err(|e| Failure::backend(&e))?)
        }
    })
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::io(path, e))
}

fn create_dir(path: &Path) -> Result<(), Failure> {
    fs::create_dir_all(path).map_err(|e| Failure::io(path, e))
}

fn write_json(path: &Path, value: &Value) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).expect("json values serialize");
    text.push('\n');
    fs::write(path, text).map_err(|e| Failure::io(path, e))
}

/// Stdout is a convenience copy of an artifact already on disk, so a closed
/// pipe is not an error.
fn print_json(value: &Value) {
    let text = serde_json::to_string_pretty(value).expect("json values serialize");
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

/// Writes `value` to `out/name` and prints it.
fn emit(out: &Path, name: &str, value: &Value) -> Result<(), Failure> {
    create_dir(out)?;
    write_json(&out.join(name), value)?;
    print_json(value);
    Ok(())
}

fn echo(config: &CliConfig) -> Value {
    serde_json::to_value(config).expect("config serializes")
}

/// Problem files under `dir`, sorted by name.
fn problem_files(dir: &Path) -> Result<Vec<PathBuf>, Failure> {
    let entries = fs::read_dir(dir).map_err(|e| Failure::io(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Failure::io(dir, e))?.path();
        if path.is_file() {
            files.push(path);
        }
    }
    files.sort();
    if files.is_empty() {
        return Err(Failure::config(format!("{}: no problem files", dir.display())));
    }
    Ok(files)
}

fn run_one(config: &CliConfig, backend: &dyn Backend, problem: &Path, seed: u64, out: &Path) -> Result<Value, Failure> {
    let text = read(problem)?;
    let mut resolved = config.clone();
    resolved.seed = seed;
    resolved.run = RunConfig {
        problem: text,
        seed,
        ..config.run.clone()
    };
    create_dir(out)?;
    let trace_path = out.join("trace.jsonl");
    let file = File::create(&trace_path).map_err(|e| Failure::io(&trace_path, e))?;
    let mut sink = BufWriter::new(file);
    let outcome = run_pipeline_with_sink(&resolved.run, backend, Some(&mut sink));
    sink.flush().map_err(|e| Failure::io(&trace_path, e))?;
    let outcome = outcome.map_err(|f| Failure::from_pipeline(&f.error))?;
    let score = outcome.trace.entries.iter().rev().find_map(|e| match &e.record {
        TraceRecord::Selection { score, .. } => Some(*score),
        _ => None,
    });
    let selection = json!({
        "schema_version": SCHEMA_VERSION,
        "seed": seed,
        "problem_file": problem,
        "selected_index": outcome.selected_index,
        "selected": outcome.selected,
        "score": score,
        "budget": resolved.run.budget().map_err(Failure::from_core)?,
        "primary_calls": outcome.trace.primary_calls(),
        "parse_retries": outcome.trace.parse_retries(),
        "barriers": outcome.trace.barriers(),
        "config": echo(&resolved),
    });
    write_json(&out.join("selection.json"), &selection)?;
    Ok(selection)
}

/// One problem file writes `trace.jsonl` and `selection.json` into `out`. A
/// directory gives each file its own subdirectory and seed, plus a summary.
pub fn run(config: &CliConfig, problem: &Path, out: &Path) -> Result<(), Failure> {
    let backend = make_backend(config)?;
    if !problem.is_dir() {
        let selection = run_one(config, backend.as_ref(), problem, config.seed, out)?;
        print_json(&selection);
        return Ok(());
    }
    let mut results = Vec::new();
    for (i, file) in problem_files(problem)?.iter().enumerate() {
        let stem = file.file_stem().map_or_else(|| format!("problem-{i}"), |s| s.to_string_lossy().into_owned());
        let seed = derive_seed(config.seed, 0, SeedPurpose::Problem, i as u64);
        let s = run_one(config, backend.as_ref(), file, seed, &out.join(&stem))?;
        results.push(json!({
            "problem_file": file,
            "output": out.join(&stem),
            "seed": seed,
            "selected_index": s["selected_index"],
            "score": s["score"],
            "primary_calls": s["primary_calls"],
        }));
    }
    emit(out, "summary.json", &json!({ "seed": config.seed, "config": echo(config), "problems": results }))
}

#[derive(Serialize)]
struct GridRow {
    #[serde(rename = "B")]
    budget: u64,
    n: usize,
    m: u64,
    trials: usize,
    top1_accuracy: f64,
    feasible: bool,
    accepted_count: usize,
    oracle_count: usize,
}

fn write_csv<R: Serialize>(path: &Path, config: &CliConfig, rows: impl IntoIterator<Item = R>) -> Result<(), Failure> {
    let mut file = BufWriter::new(File::create(path).map_err(|e| Failure::io(path, e))?);
    let header = serde_json::to_string(&echo(config)).expect("json values serialize");
    writeln!(file, "# config: {header}").map_err(|e| Failure::io(path, e))?;
    let mut writer = csv::Writer::from_writer(file);
    for row in rows {
        writer.serialize(row).map_err(|e| Failure::io(path, e))?;
    }
    writer.flush().map_err(|e| Failure::io(path, e))
}

/// Writes `grid.csv`, `frontier.csv` and `simulate.json`. The CSV files
/// start with a `#` comment line holding the config.
pub fn simulate(config: &CliConfig, out: &Path) -> Result<(), Failure> {
    let s = &config.simulate;
    let matrix = match &s.matrix {
        Some(path) => {
            let m: JudgmentMatrix = serde_json::from_str(&read(path)?)
                .map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
            m.validate().map_err(Failure::from_core)?;
            m
        }
        None => JudgmentMatrix::synthetic(s.pool_size, &config.backend.synthetic, config.seed)
            .map_err(Failure::from_core)?,
    };
    if s.budgets.is_empty() || s.ns.is_empty() {
        return Err(Failure::config("simulate needs at least one budget and one n"));
    }
    let options = SimOptions {
        trials: s.trials,
        lambda: s.lambda,
        pairing: s.pairing,
    };
    let cells = sweep(&matrix, &s.budgets, &s.ns, &options, config.seed).map_err(Failure::from_core)?;
    let frontier = optimal_frontier(&cells);
    create_dir(out)?;
    write_csv(
        &out.join("grid.csv"),
        config,
        cells.iter().map(|c| GridRow {
            budget: c.budget,
            n: c.n,
            m: c.m,
            trials: c.trials,
            top1_accuracy: c.top1_accuracy,
            feasible: c.feasible,
            accepted_count: c.accepted_count,
            oracle_count: c.oracle_count,
        }),
    )?;
    write_csv(&out.join("frontier.csv"), config, &frontier)?;
    emit(
        out,
        "simulate.json",
        &json!({ "seed": config.seed, "config": echo(config), "cells": cells, "frontier": frontier }),
    )
}

#[derive(Deserialize)]
struct OutcomeRow {
    problem_rating: f64,
    successes: Option<u32>,
    trials: Option<u32>,
    solved: Option<bool>,
}

fn parse_outcomes_csv(text: &str, path: &Path) -> Result<Vec<ProblemOutcome<f64>>, Failure> {
    let bad = |line: usize, msg: String| Failure::config(format!("{}: row {line}: {msg}", path.display()));
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).comment(Some(b'#')).from_reader(text.as_bytes());
    let mut outcomes = Vec::new();
    for (i, row) in reader.deserialize::<OutcomeRow>().enumerate() {
        let row = row.map_err(|e| bad(i + 1, e.to_string()))?;
        let outcome = match (row.successes, row.trials, row.solved) {
            (Some(s), Some(t), None) => ProblemOutcome::binomial(row.problem_rating, s, t),
            (None, None, Some(solved)) => ProblemOutcome::bernoulli(row.problem_rating, solved),
            _ => return Err(bad(i + 1, "need either successes and trials, or solved".into())),
        };
        outcome.validate().map_err(|e| bad(i + 1, e.to_string()))?;
        outcomes.push(outcome);
    }
    Ok(outcomes)
}

/// Reads `.csv` outcomes by header, anything else as JSONL, and writes
/// `elo.json`.
pub fn elo(config: &CliConfig, outcomes: &Path, out: &Path) -> Result<(), Failure> {
    let text = read(outcomes)?;
    let parsed = if outcomes.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        parse_outcomes_csv(&text, outcomes)?
    } else {
        parse_outcomes_jsonl(&text).map_err(|e| Failure::config(format!("{}: {e}", outcomes.display())))?
    };
    let estimate = estimate_elo(&parsed, &config.elo).map_err(Failure::from_core)?;
    emit(
        out,
        "elo.json",
        &json!({
            "seed": config.seed,
            "input": outcomes,
            "problems": parsed.len(),
            "estimate": estimate,
            "config": echo(config),
        }),
    )
}

/// Reads labeled pairs as JSONL and writes `diagnose.json`.
pub fn diagnose(config: &CliConfig, pairs: &Path, out: &Path) -> Result<(), Failure> {
    let text = read(pairs)?;
    let mut parsed = Vec::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let pair: LabeledPair = serde_json::from_str(line)
            .map_err(|e| Failure::config(format!("{}: line {}: {e}", pairs.display(), i + 1)))?;
        parsed.push(pair);
    }
    let backend = make_backend(config)?;
    let templates = &config.run.prompts;
    let options = DiagnosticOptions {
        parallelism: config.parallelism,
        ..config.diagnose
    };
    let report = judge_diagnostic(backend.as_ref(), templates, &parsed, &options)
        .map_err(|e| Failure::backend(&e))?;
    emit(
        out,
        "diagnose.json",
        &json!({ "seed": config.seed, "input": pairs, "report": report, "config": echo(config) }),
    )
}

/// Samples a pool, then scores it pointwise or refines it, and writes
/// `baseline.json`.
pub fn baseline(config: &CliConfig, problem: &Path, out: &Path) -> Result<(), Failure> {
    let text = read(problem)?;
    let backend = make_backend(config)?;
    let b = &config.baseline;
    let templates = &config.run.prompts;
    let pool = sample_candidates(backend.as_ref(), templates, &text, b.candidates, config.parallelism, config.seed)
        .map_err(|e| Failure::backend(&e))?;
    let mut result = match b.method {
        BaselineMethod::Pointwise => {
            let mut verdicts = Vec::with_capacity(pool.len());
            for (i, c) in pool.iter().enumerate() {
                let seed = derive_seed(config.seed, 0, SeedPurpose::Pointwise, i as u64);
                let v = pointwise_score(backend.as_ref(), templates, &text, c, b.votes, config.parallelism, seed)
                    .map_err(|e| Failure::backend(&e))?;
                verdicts.push(v);
            }
            let top = verdicts.iter().map(|v| v.yes_votes).max().unwrap_or(0);
            let selected = verdicts.iter().position(|v| v.yes_votes == top).unwrap_or(0);
            json!({
                "method": b.method,
                "calls": pool.len() * (1 + b.votes),
                "candidates": pool,
                "verdicts": verdicts,
                "selected_index": selected,
            })
        }
        BaselineMethod::SelfRefine => {
            let refined = self_refine(backend.as_ref(), templates, &text, &pool, b.rounds, config.parallelism, config.seed)
                .map_err(|f| Failure::backend(&f.error))?;
            json!({
                "method": b.method,
                "calls": pool.len() + refined.calls,
                "initial": pool,
                "candidates": refined.final_candidates(),
            })
        }
    };
    result["seed"] = json!(config.seed);
    result["problem_file"] = json!(problem);
    result["config"] = echo(config);
    emit(out, "baseline.json", &result)
}
