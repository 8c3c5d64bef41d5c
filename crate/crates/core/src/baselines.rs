//! Reference selectors and judge diagnostics: pointwise YES/NO voting,
//! Self-Refine, majority vote, and a pairwise-versus-pointwise accuracy check
//! on externally labeled pairs.

use std::collections::HashMap;
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use crate::backend::{parallel_map, Backend, BackendError, CallPurpose, CompletionRequest};
use crate::bt::Outcome;
use crate::error::{Error, Result};
use crate::pipeline::judge_with_retry;
use crate::population::{Candidate, CandidateId};
use crate::prompts::{extract_code_block, fill, PromptTemplates};
use crate::seed::{derive_attempt_seed, derive_seed, SeedPurpose};

pub const DEFAULT_POINTWISE_VOTES: usize = 14;
pub const DEFAULT_REFINE_ROUNDS: usize = 6;

/// Draws `count` independent candidates for `problem`. Uses the same seeds
/// as a pipeline's round-0 sampling, so a baseline and a run with equal
/// seeds start from the same pool.
pub fn sample_candidates<B: Backend + ?Sized>(
    backend: &B,
    templates: &PromptTemplates,
    problem: &str,
    count: usize,
    parallelism: usize,
    seed: u64,
) -> std::result::Result<Vec<Candidate>, BackendError> {
    let user = fill(&templates.generation_user, &[("problem", problem)]);
    let replies = parallel_map(count, parallelism, |i| {
        let request = CompletionRequest::new(CallPurpose::Generate, Some(templates.generation_system.clone()), user.clone())
            .with_seed(derive_seed(seed, 0, SeedPurpose::Sample, i as u64));
        backend.complete(&request)
    });
    replies
        .into_iter()
        .enumerate()
        .map(|(i, r)| r.map(|text| Candidate::sampled(CandidateId(i as u32), extract_code_block(&text))))
        .collect()
}

/// Reads the verdict from the final non-empty line, which must be exactly
/// `VERDICT: YES` or `VERDICT: NO` after trailing whitespace is removed.
/// Anything else is `None`.
pub fn parse_verdict(reply: &str) -> Option<bool> {
    let last = reply.lines().map(str::trim_end).rfind(|l| !l.is_empty())?;
    match last {
        "VERDICT: YES" => Some(true),
        "VERDICT: NO" => Some(false),
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PointwiseVerdict {
    pub candidate_id: CandidateId,
    pub yes_votes: usize,
    /// Valid replies only.
    pub total_votes: usize,
    pub discarded: usize,
}

impl PointwiseVerdict {
    /// No valid reply was received.
    pub fn is_flagged(&self) -> bool {
        self.total_votes == 0
    }

    pub fn tally<I: IntoIterator<Item = Option<bool>>>(candidate_id: CandidateId, votes: I) -> Self {
        let mut v = Self {
            candidate_id,
            yes_votes: 0,
            total_votes: 0,
            discarded: 0,
        };
        for vote in votes {
            match vote {
                Some(yes) => {
                    v.total_votes += 1;
                    v.yes_votes += usize::from(yes);
                }
                None => v.discarded += 1,
            }
        }
        v
    }
}

/// Issues `votes` independent pointwise judge calls for one candidate.
/// Vote `v` uses a seed derived from `seed` and `v`.
pub fn pointwise_score<B: Backend + ?Sized>(
    backend: &B,
    templates: &PromptTemplates,
    problem: &str,
    candidate: &Candidate,
    votes: usize,
    parallelism: usize,
    seed: u64,
) -> std::result::Result<PointwiseVerdict, BackendError> {
    let prompt = fill(
        &templates.pointwise_user,
        &[("problem", problem), ("code", &candidate.content)],
    );
    let replies = parallel_map(votes, parallelism, |v| {
        let request = CompletionRequest::new(CallPurpose::Pointwise, None, prompt.clone())
            .with_seed(derive_seed(seed, 0, SeedPurpose::Pointwise, v as u64));
        backend.complete(&request)
    });
    let parsed = replies
        .into_iter()
        .map(|r| r.map(|text| parse_verdict(&text)))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(PointwiseVerdict::tally(candidate.id, parsed))
}

/// Expected accept rate of picking uniformly among the candidates tied for
/// the most YES votes.
pub fn pointwise_top1_expected_accuracy(verdicts: &[PointwiseVerdict], accepted: &[bool]) -> Result<f64> {
    if verdicts.is_empty() || verdicts.len() != accepted.len() {
        return Err(Error::InvalidInput(format!(
            "need one label per verdict, got {} verdicts and {} labels",
            verdicts.len(),
            accepted.len()
        )));
    }
    let top = verdicts.iter().map(|v| v.yes_votes).max().expect("nonempty");
    let (tied, good) = verdicts
        .iter()
        .zip(accepted)
        .filter(|(v, _)| v.yes_votes == top)
        .fold((0usize, 0usize), |(t, g), (_, &a)| (t + 1, g + usize::from(a)));
    Ok(good as f64 / tied as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelfRefineOutcome {
    /// `rounds[0]` is the input; `rounds[r]` holds every candidate after
    /// round `r`.
    pub rounds: Vec<Vec<Candidate>>,
    pub calls: usize,
}

impl SelfRefineOutcome {
    pub fn final_candidates(&self) -> &[Candidate] {
        self.rounds.last().expect("input round always present")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelfRefineFailure {
    pub error: BackendError,
    /// Rounds completed before the failure, starting with the input.
    pub partial: SelfRefineOutcome,
}

/// Refines each candidate on its own for `rounds` rounds. Each call sees
/// only the problem and that candidate's latest code. Candidates keep their
/// ids across rounds.
pub fn self_refine<B: Backend + ?Sized>(
    backend: &B,
    templates: &PromptTemplates,
    problem: &str,
    candidates: &[Candidate],
    rounds: usize,
    parallelism: usize,
    seed: u64,
) -> std::result::Result<SelfRefineOutcome, SelfRefineFailure> {
    let mut outcome = SelfRefineOutcome {
        rounds: vec![candidates.to_vec()],
        calls: 0,
    };
    for r in 1..=rounds {
        let current = outcome.final_candidates().to_vec();
        let replies = parallel_map(current.len(), parallelism, |i| {
            let user = fill(
                &templates.self_refine_user,
                &[("problem", problem), ("code", &current[i].content)],
            );
            let request = CompletionRequest::new(CallPurpose::Refine, Some(templates.generation_system.clone()), user)
                .with_seed(derive_seed(seed, r as u64, SeedPurpose::Refine, i as u64));
            backend.complete(&request)
        });
        let mut next = Vec::with_capacity(current.len());
        for (c, reply) in current.iter().zip(replies) {
            match reply {
                Ok(text) => next.push(Candidate {
                    content: extract_code_block(&text),
                    ..c.clone()
                }),
                Err(error) => {
                    return Err(SelfRefineFailure {
                        error,
                        partial: outcome,
                    })
                }
            }
        }
        outcome.calls += next.len();
        outcome.rounds.push(next);
    }
    Ok(outcome)
}

/// Most frequent answer, ties broken by first occurrence. `None` for empty
/// input.
pub fn majority_vote<S: Eq + Hash>(answers: &[S]) -> Option<&S> {
    let mut counts: HashMap<&S, (usize, usize)> = HashMap::new();
    for (i, a) in answers.iter().enumerate() {
        counts.entry(a).or_insert((0, i)).0 += 1;
    }
    counts
        .into_iter()
        .max_by(|(_, (ca, fa)), (_, (cb, fb))| ca.cmp(cb).then(fb.cmp(fa)))
        .map(|(a, _)| a)
}

/// Two solutions to one problem with externally supplied accept labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledPair {
    pub problem: String,
    pub first: String,
    pub second: String,
    pub first_accepted: bool,
    pub second_accepted: bool,
}

impl LabeledPair {
    /// Exactly one accepted member and both solutions present.
    pub fn is_well_formed(&self) -> bool {
        self.first_accepted != self.second_accepted
            && !self.first.trim().is_empty()
            && !self.second.trim().is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiagnosticOptions {
    /// Pointwise calls per solution; the class is YES on a strict majority.
    pub pointwise_votes: usize,
    pub parse_retries: u32,
    pub parallelism: usize,
    pub seed: u64,
}

impl Default for DiagnosticOptions {
    fn default() -> Self {
        Self {
            pointwise_votes: 1,
            parse_retries: 1,
            parallelism: 8,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DiagnosticReport {
    /// Well-formed pairs that were evaluated.
    pub pair_count: usize,
    pub skipped_pairs: usize,
    pub pairwise_accuracy: f64,
    /// Pairwise ties, including degraded ones; all scored as incorrect.
    pub pairwise_ties: usize,
    pub pointwise_accuracy_on_accepted: f64,
    pub pointwise_accuracy_on_rejected: f64,
    /// Both members of a pair classified correctly.
    pub pointwise_joint: f64,
}

struct PairResult {
    pairwise_correct: bool,
    tie: bool,
    accepted_ok: bool,
    rejected_ok: bool,
}

fn classify(v: &PointwiseVerdict) -> Option<bool> {
    (!v.is_flagged()).then(|| 2 * v.yes_votes > v.total_votes)
}

/// Measures pairwise and pointwise judge accuracy on labeled pairs.
/// Comparisons are order-randomized; a tie counts as a wrong pairwise call
/// and an all-discarded pointwise score as a wrong classification.
pub fn judge_diagnostic<B: Backend + ?Sized>(
    backend: &B,
    templates: &PromptTemplates,
    pairs: &[LabeledPair],
    options: &DiagnosticOptions,
) -> std::result::Result<DiagnosticReport, BackendError> {
    let valid: Vec<&LabeledPair> = pairs.iter().filter(|p| p.is_well_formed()).collect();
    let root = options.seed;
    let results = parallel_map(valid.len(), options.parallelism, |i| -> std::result::Result<PairResult, BackendError> {
        let pair = valid[i];
        let first = Candidate::sampled(CandidateId(0), pair.first.clone());
        let second = Candidate::sampled(CandidateId(1), pair.second.clone());
        let judged = judge_with_retry(
            backend,
            templates,
            &pair.problem,
            &first,
            &second,
            derive_seed(root, 0, SeedPurpose::Order, i as u64),
            options.parse_retries,
            |attempt| derive_attempt_seed(root, 0, SeedPurpose::Judge, i as u64, attempt),
        )?;
        let outcome = judged.judgment.outcome;
        let pairwise_correct = match outcome {
            Outcome::LeftWins => pair.first_accepted,
            Outcome::RightWins => pair.second_accepted,
            Outcome::Tie => false,
        };
        let [first_score, second_score] = [true, false].map(|is_first| {
            let c = if is_first { &first } else { &second };
            let index = 2 * i as u64 + u64::from(!is_first);
            pointwise_score(
                backend,
                templates,
                &pair.problem,
                c,
                options.pointwise_votes,
                1,
                derive_seed(root, 1, SeedPurpose::Pointwise, index),
            )
        });
        let (first_score, second_score) = (first_score?, second_score?);
        let (acc, rej) = if pair.first_accepted {
            (first_score, second_score)
        } else {
            (second_score, first_score)
        };
        Ok(PairResult {
            pairwise_correct,
            tie: outcome == Outcome::Tie,
            accepted_ok: classify(&acc) == Some(true),
            rejected_ok: classify(&rej) == Some(false),
        })
    });
    let results = results.into_iter().collect::<std::result::Result<Vec<_>, _>>()?;

    let n = results.len();
    let frac = |count: usize| if n == 0 { 0.0 } else { count as f64 / n as f64 };
    Ok(DiagnosticReport {
        pair_count: n,
        skipped_pairs: pairs.len() - n,
        pairwise_accuracy: frac(results.iter().filter(|r| r.pairwise_correct).count()),
        pairwise_ties: results.iter().filter(|r| r.tie).count(),
        pointwise_accuracy_on_accepted: frac(results.iter().filter(|r| r.accepted_ok).count()),
        pointwise_accuracy_on_rejected: frac(results.iter().filter(|r| r.rejected_ok).count()),
        pointwise_joint: frac(results.iter().filter(|r| r.accepted_ok && r.rejected_ok).count()),
    })
}
