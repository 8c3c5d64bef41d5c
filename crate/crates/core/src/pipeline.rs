//! End-to-end orchestration: sample, evolve for `T` generations, run a dense
//! final comparison round, and select the top Bradley-Terry candidate.
//!
//! Each round issues all of its calls concurrently and joins before the next
//! round starts, so a run has exactly `2T + 2` join barriers. Everything the
//! run observes is appended to a [`RunTrace`], which [`replay`] can turn back
//! into the per-generation states without touching a backend.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{parallel_map, Backend, BackendError, CallPurpose, CompletionRequest};
use crate::bt::{self, ComparisonRecord, FitOptions, ScoreVector};
use crate::error::Error;
use crate::judge::{canonicalize, parse_judge_reply, render_comparison_prompt, Judgment};
use crate::pairing::sample_pairing;
use crate::population::{
    aggregate_feedback, assemble_next_generation, check_population_size, render_mutation_prompt,
    select_discards, select_elites, Candidate, CandidateId, FeedbackStrategy, GenerationState,
    IdGen,
};
use crate::prompts::{extract_code_block, fill, PromptTemplates};
use crate::seed::{derive_attempt_seed, derive_seed, SeedPurpose};

pub const SCHEMA_VERSION: u32 = 1;

/// Hyperparameters and inputs for one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// `n`: candidates per generation.
    pub population_size: usize,
    /// `K`: comparisons per candidate in each evolution generation.
    pub comparisons_per_candidate: usize,
    /// `T`: evolution generations.
    pub generations: usize,
    /// `M`: comparisons per candidate in the final round.
    pub final_comparisons: usize,
    pub lambda: f64,
    pub seed: u64,
    pub problem: String,
    pub feedback: FeedbackStrategy,
    /// Judge re-asks after an unparseable reply before forcing a tie.
    pub parse_retries: u32,
    /// Concurrent calls allowed within a round. Left out of trace echoes
    /// because it cannot change results.
    #[serde(skip_serializing)]
    pub parallelism: usize,
    pub bt_tolerance: f64,
    pub bt_max_iterations: usize,
    pub prompts: PromptTemplates,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            population_size: 20,
            comparisons_per_candidate: 4,
            generations: 3,
            final_comparisons: 10,
            lambda: bt::DEFAULT_LAMBDA,
            seed: 0,
            problem: String::new(),
            feedback: FeedbackStrategy::default(),
            parse_retries: 1,
            parallelism: 8,
            bt_tolerance: bt::DEFAULT_TOLERANCE,
            bt_max_iterations: bt::DEFAULT_MAX_ITERATIONS,
            prompts: PromptTemplates::default(),
        }
    }
}

fn check_degree(name: &str, n: usize, k: usize) -> Result<(), Error> {
    if k == 0 || k >= n {
        return Err(Error::InvalidConfig(format!("{name} must lie in [1, {}], got {k}", n - 1)));
    }
    if (n * k) % 2 != 0 {
        return Err(Error::InvalidConfig(format!("{name}·n must be even, got n={n}, {name}={k}")));
    }
    Ok(())
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), Error> {
        let n = self.population_size;
        check_population_size(n)?;
        if self.generations > 0 {
            check_degree("comparisons_per_candidate", n, self.comparisons_per_candidate)?;
        }
        check_degree("final_comparisons", n, self.final_comparisons)?;
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidConfig(format!("lambda must be > 0, got {}", self.lambda)));
        }
        if !(self.bt_tolerance > 0.0) {
            return Err(Error::InvalidConfig("bt_tolerance must be > 0".into()));
        }
        self.feedback.validate()
    }

    pub fn fit_options(&self) -> FitOptions<f64> {
        FitOptions {
            lambda: self.lambda,
            tolerance: self.bt_tolerance,
            max_iterations: self.bt_max_iterations,
        }
    }

    pub fn budget(&self) -> Result<u64, Error> {
        compute_budget(
            self.population_size,
            self.comparisons_per_candidate,
            self.generations,
            self.final_comparisons,
        )
    }

    /// Join barriers in a run: sampling, compare and mutate per generation,
    /// and the final comparison.
    pub fn sequential_depth(&self) -> usize {
        2 * self.generations + 2
    }
}

/// Primary backend calls: `n + T·(nK/2 + 3n/4) + nM/2`.
pub fn compute_budget(n: usize, k: usize, t: usize, m: usize) -> Result<u64, Error> {
    check_population_size(n)?;
    if (n * k) % 2 != 0 || (n * m) % 2 != 0 {
        return Err(Error::InvalidConfig(format!(
            "n·K and n·M must be even, got n={n}, K={k}, M={m}"
        )));
    }
    let (n, k, t, m) = (n as u64, k as u64, t as u64, m as u64);
    Ok(n + t * (n * k / 2 + 3 * n / 4) + n * m / 2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Sample,
    Compare,
    Mutate,
    FinalCompare,
}

/// One trace line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub schema_version: u32,
    /// Generation of the population the record describes.
    pub generation: usize,
    pub round: usize,
    #[serde(flatten)]
    pub record: TraceRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "kebab-case")]
pub enum TraceRecord {
    Config(Box<RunConfig>),
    Candidate(Candidate),
    Judgment {
        pair_index: usize,
        left_index: usize,
        right_index: usize,
        attempts: u32,
        judgment: Judgment,
    },
    ScoreFit(ScoreVector<f64>),
    Routing {
        ranking: Vec<usize>,
        elites: Vec<usize>,
        discards: Vec<usize>,
    },
    Barrier {
        stage: Stage,
        primary_calls: usize,
        parse_retries: usize,
    },
    Selection {
        index: usize,
        candidate_id: CandidateId,
        score: f64,
    },
}

impl TraceRecord {
    pub fn kind(&self) -> &'static str {
        match self {
            TraceRecord::Config(_) => "config",
            TraceRecord::Candidate(_) => "candidate",
            TraceRecord::Judgment { .. } => "judgment",
            TraceRecord::ScoreFit(_) => "score-fit",
            TraceRecord::Routing { .. } => "routing",
            TraceRecord::Barrier { .. } => "barrier",
            TraceRecord::Selection { .. } => "selection",
        }
    }
}

/// Append-only run log.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunTrace {
    pub entries: Vec<TraceEntry>,
}

impl RunTrace {
    fn push(&mut self, generation: usize, round: usize, record: TraceRecord) {
        self.entries.push(TraceEntry {
            schema_version: SCHEMA_VERSION,
            generation,
            round,
            record,
        });
    }

    pub fn barriers(&self) -> usize {
        self.entries
            .iter()
            .filter(|e| matches!(e.record, TraceRecord::Barrier { .. }))
            .count()
    }

    /// Sum of primary (budgeted) calls across all barriers.
    pub fn primary_calls(&self) -> usize {
        self.entries
            .iter()
            .map(|e| match e.record {
                TraceRecord::Barrier { primary_calls, .. } => primary_calls,
                _ => 0,
            })
            .sum()
    }

    pub fn parse_retries(&self) -> usize {
        self.entries
            .iter()
            .map(|e| match e.record {
                TraceRecord::Barrier { parse_retries, .. } => parse_retries,
                _ => 0,
            })
            .sum()
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&serde_json::to_string(e).expect("trace entries serialize"));
            out.push('\n');
        }
        out
    }

    /// Parses line-delimited JSON; blank lines are ignored.
    pub fn from_jsonl(text: &str) -> Result<Self, ReplayError> {
        let mut entries = Vec::new();
        for (line_no, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let entry: TraceEntry = serde_json::from_str(line).map_err(|e| ReplayError {
                record: entries.len(),
                message: format!(
                    "line {}: {e}; last valid record is {}",
                    line_no + 1,
                    last_valid(entries.len())
                ),
            })?;
            entries.push(entry);
        }
        Ok(Self { entries })
    }
}

fn last_valid(count: usize) -> String {
    match count {
        0 => "none".into(),
        c => format!("#{}", c - 1),
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(Error),
    #[error("backend failure in {context}: {source}")]
    Backend {
        context: String,
        #[source]
        source: BackendError,
    },
    #[error("trace write failed: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Internal(Error),
}

/// An aborted run together with everything logged up to the last barrier.
#[derive(Debug)]
pub struct RunFailure {
    pub error: PipelineError,
    pub trace: RunTrace,
}

impl std::fmt::Display for RunFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.error.fmt(f)
    }
}

impl std::error::Error for RunFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub selected: Candidate,
    pub selected_index: usize,
    /// `Y^(0) .. Y^(T)`, each with the judgments and scores computed on it.
    pub states: Vec<GenerationState>,
    pub trace: RunTrace,
}

/// A judged pair plus how many calls it took.
#[derive(Debug, Clone)]
pub struct JudgedPair {
    pub judgment: Judgment,
    pub attempts: u32,
}

/// Runs one comparison with the parse-retry-then-tie policy: an unparseable
/// reply is re-asked up to `parse_retries` times, after which the outcome
/// is a degraded tie. Transport failures propagate.
#[allow(clippy::too_many_arguments)]
pub fn judge_with_retry<B: Backend + ?Sized>(
    backend: &B,
    templates: &PromptTemplates,
    problem: &str,
    left: &Candidate,
    right: &Candidate,
    order_seed: u64,
    parse_retries: u32,
    call_seed: impl Fn(u32) -> u64,
) -> Result<JudgedPair, BackendError> {
    let task = render_comparison_prompt(&templates.comparison_user, problem, left, right, order_seed);
    let mut attempts = 0;
    while attempts <= parse_retries {
        let request = CompletionRequest::new(CallPurpose::Judge, None, task.prompt_text.clone())
            .with_seed(call_seed(attempts));
        attempts += 1;
        let reply = backend.complete(&request)?;
        if let Ok(parsed) = parse_judge_reply(&reply) {
            return Ok(JudgedPair {
                judgment: canonicalize(&task, &parsed),
                attempts,
            });
        }
    }
    Ok(JudgedPair {
        judgment: Judgment::degraded_tie(&task),
        attempts,
    })
}

struct Run<'a, B: ?Sized> {
    config: &'a RunConfig,
    backend: &'a B,
    trace: RunTrace,
    flushed: usize,
    sink: Option<&'a mut dyn Write>,
    ids: IdGen,
}

impl<'a, B: Backend + ?Sized> Run<'a, B> {
    fn flush(&mut self) -> Result<(), PipelineError> {
        if let Some(sink) = self.sink.as_mut() {
            for e in &self.trace.entries[self.flushed..] {
                serde_json::to_writer(&mut *sink, e).map_err(std::io::Error::from)?;
                sink.write_all(b"\n")?;
            }
            sink.flush()?;
        }
        self.flushed = self.trace.entries.len();
        Ok(())
    }

    fn barrier(&mut self, generation: usize, round: usize, stage: Stage, primary_calls: usize, parse_retries: usize) -> Result<(), PipelineError> {
        self.trace.push(
            generation,
            round,
            TraceRecord::Barrier {
                stage,
                primary_calls,
                parse_retries,
            },
        );
        self.flush()
    }

    fn seed(&self, generation: usize, purpose: SeedPurpose, index: usize) -> u64 {
        derive_seed(self.config.seed, generation as u64, purpose, index as u64)
    }

    fn sample(&mut self) -> Result<GenerationState, PipelineError> {
        let c = self.config;
        let user = fill(&c.prompts.generation_user, &[("problem", &c.problem)]);
        let backend = self.backend;
        let replies = parallel_map(c.population_size, c.parallelism, |i| {
            let request = CompletionRequest::new(
                CallPurpose::Generate,
                Some(c.prompts.generation_system.clone()),
                user.clone(),
            )
            .with_seed(derive_seed(c.seed, 0, SeedPurpose::Sample, i as u64));
            backend.complete(&request)
        });
        let mut members = Vec::with_capacity(replies.len());
        for (i, reply) in replies.into_iter().enumerate() {
            let text = reply.map_err(|source| PipelineError::Backend {
                context: format!("round 0 sampling, candidate {i}"),
                source,
            })?;
            members.push(Candidate::sampled(self.ids.next_id(), extract_code_block(&text)));
        }
        for m in &members {
            self.trace.push(0, 0, TraceRecord::Candidate(m.clone()));
        }
        self.barrier(0, 0, Stage::Sample, members.len(), 0)?;
        Ok(GenerationState::new(0, members))
    }

    /// Judges `state` on a fresh `degree`-regular pairing, fits scores, and
    /// logs everything. `step` is the seed coordinate: `t` for evolution
    /// rounds and `T + 1` for the final round.
    fn compare(
        &mut self,
        state: &mut GenerationState,
        degree: usize,
        step: usize,
        round: usize,
        stage: Stage,
    ) -> Result<(), PipelineError> {
        let c = self.config;
        let pair_purpose = match stage {
            Stage::FinalCompare => SeedPurpose::FinalPairing,
            _ => SeedPurpose::Pairing,
        };
        let pairing_seed = self.seed(step, pair_purpose, 0);
        let plan = sample_pairing(state.members.len(), degree, pairing_seed)
            .map_err(PipelineError::Internal)?;
        let root = c.seed;
        let judge_step = step as u64;
        let members = &state.members;
        let backend = self.backend;
        let results = parallel_map(plan.pairs.len(), c.parallelism, |p| {
            let (l, r) = plan.pairs[p];
            judge_with_retry(
                backend,
                &c.prompts,
                &c.problem,
                &members[l],
                &members[r],
                derive_seed(root, judge_step, SeedPurpose::Order, p as u64),
                c.parse_retries,
                |attempt| derive_attempt_seed(root, judge_step, SeedPurpose::Judge, p as u64, attempt),
            )
        });

        let generation = state.generation;
        let mut records = Vec::with_capacity(results.len());
        let mut retries = 0;
        let mut judgments = Vec::with_capacity(results.len());
        for (p, result) in results.into_iter().enumerate() {
            let judged = result.map_err(|source| PipelineError::Backend {
                context: format!("round {round} ({stage:?}), pair {p}"),
                source,
            })?;
            let (l, r) = plan.pairs[p];
            retries += (judged.attempts - 1) as usize;
            records.push(ComparisonRecord::new(l, r, judged.judgment.outcome));
            judgments.push((p, l, r, judged));
        }
        for (p, l, r, judged) in judgments {
            self.trace.push(
                generation,
                round,
                TraceRecord::Judgment {
                    pair_index: p,
                    left_index: l,
                    right_index: r,
                    attempts: judged.attempts,
                    judgment: judged.judgment.clone(),
                },
            );
            state.judgments.push(judged.judgment);
        }
        let scores = bt::fit_bt(&records, members.len(), &c.fit_options())
            .map_err(PipelineError::Internal)?;
        self.trace.push(generation, round, TraceRecord::ScoreFit(scores.clone()));
        state.scores = Some(scores);
        self.barrier(generation, round, stage, plan.pairs.len(), retries)
    }

    fn mutate(&mut self, state: &GenerationState, step: usize, round: usize) -> Result<GenerationState, PipelineError> {
        let c = self.config;
        let n = state.members.len();
        let scores = state.scores.as_ref().expect("compare runs before mutate");
        let elites = select_elites(scores, n).map_err(PipelineError::Internal)?;
        let discards = select_discards(scores, n).map_err(PipelineError::Internal)?;
        self.trace.push(
            state.generation,
            round,
            TraceRecord::Routing {
                ranking: scores.ranking(),
                elites: elites.clone(),
                discards: discards.clone(),
            },
        );

        let survivors: Vec<usize> = (0..n).filter(|i| !discards.contains(i)).collect();
        let backend = self.backend;
        let replies = parallel_map(survivors.len(), c.parallelism, |s| {
            let parent = &state.members[survivors[s]];
            let feedback = aggregate_feedback(parent.id, &state.judgments, c.feedback);
            let user = render_mutation_prompt(&c.prompts, &c.problem, parent, &feedback);
            let request = CompletionRequest::new(
                CallPurpose::Mutate,
                Some(c.prompts.generation_system.clone()),
                user,
            )
            .with_seed(derive_seed(c.seed, step as u64, SeedPurpose::Mutate, survivors[s] as u64));
            backend.complete(&request)
        });

        let mut children = Vec::with_capacity(survivors.len());
        for (s, reply) in replies.into_iter().enumerate() {
            let text = reply.map_err(|source| PipelineError::Backend {
                context: format!("round {round} (Mutate), candidate {}", survivors[s]),
                source,
            })?;
            let parent = state.members[survivors[s]].id;
            children.push((text, parent));
        }
        let mutated: Vec<Candidate> = children
            .into_iter()
            .map(|(text, parent)| Candidate::mutated(self.ids.next_id(), extract_code_block(&text), step, parent))
            .collect();
        let calls = mutated.len();
        let next = assemble_next_generation(state, &elites, &discards, mutated, &mut self.ids)
            .map_err(PipelineError::Internal)?;
        for m in &next.members {
            self.trace.push(next.generation, round, TraceRecord::Candidate(m.clone()));
        }
        self.barrier(next.generation, round, Stage::Mutate, calls, 0)?;
        Ok(next)
    }

    fn execute(&mut self) -> Result<RunOutcome, PipelineError> {
        let c = self.config;
        self.trace.push(0, 0, TraceRecord::Config(Box::new(c.clone())));
        let mut states = Vec::with_capacity(c.generations + 1);
        let mut current = self.sample()?;

        for t in 1..=c.generations {
            self.compare(&mut current, c.comparisons_per_candidate, t, 2 * t - 1, Stage::Compare)?;
            let next = self.mutate(&current, t, 2 * t)?;
            states.push(std::mem::replace(&mut current, next));
        }

        let final_round = 2 * c.generations + 1;
        self.compare(&mut current, c.final_comparisons, c.generations + 1, final_round, Stage::FinalCompare)?;
        let scores = current.scores.as_ref().expect("final scores present");
        let index = scores.ranking()[0];
        let selected = current.members[index].clone();
        self.trace.push(
            current.generation,
            final_round,
            TraceRecord::Selection {
                index,
                candidate_id: selected.id,
                score: scores.scores[index],
            },
        );
        self.flush()?;
        states.push(current);
        Ok(RunOutcome {
            selected,
            selected_index: index,
            states,
            trace: std::mem::take(&mut self.trace),
        })
    }
}

/// Runs the full pipeline; see [`run_pipeline_with_sink`].
pub fn run_pipeline<B: Backend + ?Sized>(config: &RunConfig, backend: &B) -> Result<RunOutcome, RunFailure> {
    run_pipeline_with_sink(config, backend, None)
}

/// Runs the full pipeline, streaming trace lines to `sink` at every barrier.
/// An invalid configuration is rejected before any backend call.
pub fn run_pipeline_with_sink<'a, B: Backend + ?Sized>(
    config: &'a RunConfig,
    backend: &'a B,
    sink: Option<&'a mut dyn Write>,
) -> Result<RunOutcome, RunFailure> {
    if let Err(e) = config.validate() {
        return Err(RunFailure {
            error: PipelineError::Config(e),
            trace: RunTrace::default(),
        });
    }
    let mut run = Run {
        config,
        backend,
        trace: RunTrace::default(),
        flushed: 0,
        sink,
        ids: IdGen::default(),
    };
    run.execute().map_err(|error| {
        let flushed = run.flushed;
        let mut trace = std::mem::take(&mut run.trace);
        trace.entries.truncate(flushed);
        RunFailure { error, trace }
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("replay failed at record #{record}: {message}")]
pub struct ReplayError {
    pub record: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayedRun {
    pub config: RunConfig,
    pub states: Vec<GenerationState>,
    pub selected_index: usize,
    pub selected: Candidate,
}

/// Rebuilds every generation from a trace. Logged scores are re-fitted from
/// the logged judgments and must agree within `1e-9`.
pub fn replay(trace: &RunTrace) -> Result<ReplayedRun, ReplayError> {
    let err = |record: usize, message: String| ReplayError { record, message };
    let mut config: Option<RunConfig> = None;
    let mut states: Vec<GenerationState> = Vec::new();
    let mut records: Vec<Vec<ComparisonRecord>> = Vec::new();
    let mut selection = None;

    for (i, entry) in trace.entries.iter().enumerate() {
        if entry.schema_version != SCHEMA_VERSION {
            return Err(err(i, format!("unsupported schema version {}", entry.schema_version)));
        }
        if selection.is_some() {
            return Err(err(i, "record after final selection".into()));
        }
        let g = entry.generation;
        if !matches!(entry.record, TraceRecord::Config(_)) && config.is_none() {
            return Err(err(i, "trace does not start with a config record".into()));
        }
        match &entry.record {
            TraceRecord::Config(c) => {
                if config.is_some() || i != 0 {
                    return Err(err(i, "unexpected config record".into()));
                }
                config = Some((**c).clone());
            }
            TraceRecord::Candidate(c) => {
                if g == states.len() {
                    states.push(GenerationState::new(g, Vec::new()));
                    records.push(Vec::new());
                }
                let Some(state) = states.get_mut(g) else {
                    return Err(err(i, format!("candidate for generation {g} out of order")));
                };
                if c.generation != g || !c.lineage_is_consistent() {
                    return Err(err(i, format!("candidate {} has inconsistent lineage", c.id)));
                }
                state.members.push(c.clone());
            }
            TraceRecord::Judgment {
                left_index,
                right_index,
                judgment,
                ..
            } => {
                let state = states
                    .get_mut(g)
                    .ok_or_else(|| err(i, format!("judgment for unknown generation {g}")))?;
                let ids = (
                    state.members.get(*left_index).map(|c| c.id),
                    state.members.get(*right_index).map(|c| c.id),
                );
                if ids != (Some(judgment.left_id), Some(judgment.right_id)) {
                    return Err(err(i, "judgment indices do not match candidate ids".into()));
                }
                records[g].push(ComparisonRecord::new(*left_index, *right_index, judgment.outcome));
                state.judgments.push(judgment.clone());
            }
            TraceRecord::ScoreFit(logged) => {
                let cfg = config.as_ref().expect("checked above");
                let state = states
                    .get_mut(g)
                    .ok_or_else(|| err(i, format!("score fit for unknown generation {g}")))?;
                let refit = bt::fit_bt(&records[g], state.members.len(), &cfg.fit_options())
                    .map_err(|e| err(i, e.to_string()))?;
                let agree = refit.scores.len() == logged.scores.len()
                    && refit
                        .scores
                        .iter()
                        .zip(&logged.scores)
                        .all(|(a, b)| (a - b).abs() <= 1e-9);
                if !agree {
                    return Err(err(i, format!("logged scores for generation {g} do not match a refit")));
                }
                state.scores = Some(logged.clone());
            }
            TraceRecord::Routing { .. } | TraceRecord::Barrier { .. } => {}
            TraceRecord::Selection {
                index,
                candidate_id,
                ..
            } => {
                let state = states
                    .get(g)
                    .ok_or_else(|| err(i, format!("selection from unknown generation {g}")))?;
                let candidate = state
                    .members
                    .get(*index)
                    .filter(|c| c.id == *candidate_id)
                    .ok_or_else(|| err(i, "selection does not match a final candidate".into()))?;
                let ranked_first = state.scores.as_ref().map(|s| s.ranking()[0]);
                if ranked_first != Some(*index) {
                    return Err(err(i, "selection is not the top-ranked candidate".into()));
                }
                selection = Some((*index, candidate.clone()));
            }
        }
    }

    let n = trace.entries.len();
    let config = config.ok_or_else(|| err(0, "empty trace".into()))?;
    let (selected_index, selected) = selection.ok_or_else(|| {
        err(
            n,
            format!("trace truncated: no final selection; last valid record is {}", last_valid(n)),
        )
    })?;
    if states.len() != config.generations + 1 {
        return Err(err(n, format!("expected {} generations, found {}", config.generations + 1, states.len())));
    }
    if let Some(bad) = states.iter().find(|s| s.members.len() != config.population_size) {
        return Err(err(n, format!("generation {} has {} members", bad.generation, bad.members.len())));
    }
    Ok(ReplayedRun {
        config,
        states,
        selected_index,
        selected,
    })
}
