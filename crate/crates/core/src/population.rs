//! Candidate pool bookkeeping: quartile routing, feedback aggregation,
//! mutation prompts and generation assembly.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::bt::{rank_scores, ScoreVector};
use crate::error::{Error, Result};
use crate::judge::{rewrite_self_relative, Judgment, SideResult};
use crate::prompts::{
    fill, PromptTemplates, LOSSES_HEADER, MUTATION_FEEDBACK_BLOCK, RESTART_CLAUSE, TIES_HEADER,
    WINS_HEADER,
};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CandidateId(pub u32);

impl fmt::Display for CandidateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "c{}", self.0)
    }
}

/// Hands out run-unique candidate ids in creation order.
#[derive(Debug, Clone, Default)]
pub struct IdGen(u32);

impl IdGen {
    pub fn starting_at(next: u32) -> Self {
        Self(next)
    }

    pub fn next_id(&mut self) -> CandidateId {
        let id = CandidateId(self.0);
        self.0 += 1;
        id
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Origin {
    Sampled,
    Mutated,
    EliteCarryover,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidate {
    pub id: CandidateId,
    pub content: String,
    pub generation: usize,
    pub origin: Origin,
    pub parent_id: Option<CandidateId>,
}

impl Candidate {
    pub fn sampled(id: CandidateId, content: String) -> Self {
        Self {
            id,
            content,
            generation: 0,
            origin: Origin::Sampled,
            parent_id: None,
        }
    }

    pub fn mutated(id: CandidateId, content: String, generation: usize, parent: CandidateId) -> Self {
        Self {
            id,
            content,
            generation,
            origin: Origin::Mutated,
            parent_id: Some(parent),
        }
    }

    /// Checks the lineage invariants.
    pub fn lineage_is_consistent(&self) -> bool {
        match self.origin {
            Origin::Sampled => self.generation == 0 && self.parent_id.is_none(),
            Origin::Mutated | Origin::EliteCarryover => self.parent_id.is_some(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationState {
    pub generation: usize,
    pub members: Vec<Candidate>,
    /// Comparisons run on `members` (empty until judged).
    pub judgments: Vec<Judgment>,
    pub scores: Option<ScoreVector<f64>>,
}

impl GenerationState {
    pub fn new(generation: usize, members: Vec<Candidate>) -> Self {
        Self {
            generation,
            members,
            judgments: Vec::new(),
            scores: None,
        }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Which critiques reach the mutator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FeedbackStrategy {
    None,
    PositiveOnly,
    NegativeOnly,
    PairwiseAll,
    /// All sections, from at most `k` comparisons per candidate.
    PairwiseK { k: usize },
}

impl Default for FeedbackStrategy {
    fn default() -> Self {
        FeedbackStrategy::PairwiseK { k: 4 }
    }
}

impl FeedbackStrategy {
    pub fn validate(&self) -> Result<()> {
        match self {
            FeedbackStrategy::PairwiseK { k: 0 } => Err(Error::InvalidConfig(
                "pairwise-k feedback needs k ≥ 1".into(),
            )),
            _ => Ok(()),
        }
    }
}

pub fn check_population_size(n: usize) -> Result<()> {
    if n < 4 || n % 4 != 0 {
        return Err(Error::InvalidConfig(format!(
            "population size must be a positive multiple of 4, got {n}"
        )));
    }
    Ok(())
}

fn quartile<T: Scalar>(scores: &ScoreVector<T>, n: usize) -> Result<(Vec<usize>, usize)> {
    check_population_size(n)?;
    if scores.len() != n {
        return Err(Error::InvalidInput(format!(
            "score vector has {} entries for a population of {n}",
            scores.len()
        )));
    }
    Ok((rank_scores(&scores.scores), n / 4))
}

/// Top quarter of the ranking, returned in ascending index order.
pub fn select_elites<T: Scalar>(scores: &ScoreVector<T>, n: usize) -> Result<Vec<usize>> {
    let (order, q) = quartile(scores, n)?;
    let mut elites = order[..q].to_vec();
    elites.sort_unstable();
    Ok(elites)
}

/// Bottom quarter of the ranking, returned in ascending index order.
pub fn select_discards<T: Scalar>(scores: &ScoreVector<T>, n: usize) -> Result<Vec<usize>> {
    let (order, q) = quartile(scores, n)?;
    let mut discards = order[n - q..].to_vec();
    discards.sort_unstable();
    Ok(discards)
}

/// Builds the feedback sections for `candidate` from the judgments it took
/// part in. Bullets are grouped Wins, Ties, Losses, each ordered by
/// ascending opponent id; empty sections and empty rationales are dropped.
pub fn aggregate_feedback(
    candidate: CandidateId,
    judgments: &[Judgment],
    strategy: FeedbackStrategy,
) -> String {
    let limit = match strategy {
        FeedbackStrategy::None => return String::new(),
        FeedbackStrategy::PairwiseK { k } => k,
        _ => usize::MAX,
    };
    let mut views: Vec<(CandidateId, SideResult, String)> = judgments
        .iter()
        .filter(|j| j.involves(candidate))
        .take(limit)
        .filter_map(|j| {
            let (text, perspective, result) = j.view_of(candidate)?;
            let opponent = j.opponent_of(candidate)?;
            (!text.trim().is_empty())
                .then(|| (opponent, result, rewrite_self_relative(text.trim(), perspective)))
        })
        .collect();
    views.sort_by_key(|(opponent, result, _)| (*result, *opponent));

    let wanted: &[SideResult] = match strategy {
        FeedbackStrategy::PositiveOnly => &[SideResult::Win],
        FeedbackStrategy::NegativeOnly => &[SideResult::Loss],
        _ => &[SideResult::Win, SideResult::Tie, SideResult::Loss],
    };
    let mut sections = Vec::new();
    for &side in wanted {
        let bullets: Vec<String> = views
            .iter()
            .filter(|(_, result, _)| *result == side)
            .map(|(_, _, text)| format!("- {text}"))
            .collect();
        if bullets.is_empty() {
            continue;
        }
        let header = match side {
            SideResult::Win => WINS_HEADER,
            SideResult::Tie => TIES_HEADER,
            SideResult::Loss => LOSSES_HEADER,
        };
        sections.push(format!("{header}\n{}", bullets.join("\n")));
    }
    sections.join("\n\n")
}

/// Renders the mutation request. Empty feedback drops the whole Pairwise
/// Feedback section.
pub fn render_mutation_prompt(
    templates: &PromptTemplates,
    problem: &str,
    candidate: &Candidate,
    feedback: &str,
) -> String {
    let mut template = templates.mutation_user.clone();
    if feedback.is_empty() {
        template = template.replace(MUTATION_FEEDBACK_BLOCK, "");
    }
    if !templates.allow_restart {
        template = template.replace(" {restart_clause}", "");
    }
    fill(
        &template,
        &[
            ("problem", problem),
            ("code", &candidate.content),
            ("feedback_sections", feedback),
            ("restart_clause", RESTART_CLAUSE),
        ],
    )
}

/// Builds generation `previous.generation + 1` from elite carryovers
/// followed by `mutated` (one child per non-discarded member, in order).
pub fn assemble_next_generation(
    previous: &GenerationState,
    elites: &[usize],
    discards: &[usize],
    mutated: Vec<Candidate>,
    ids: &mut IdGen,
) -> Result<GenerationState> {
    let n = previous.members.len();
    check_population_size(n).map_err(|e| Error::Assembly(e.to_string()))?;
    let q = n / 4;
    let elite_set: BTreeSet<usize> = elites.iter().copied().collect();
    let discard_set: BTreeSet<usize> = discards.iter().copied().collect();
    if elite_set.len() != q || elites.len() != q {
        return Err(Error::Assembly(format!("expected {q} distinct elites, got {}", elites.len())));
    }
    if discard_set.len() != q || discards.len() != q {
        return Err(Error::Assembly(format!(
            "expected {q} distinct discards, got {}",
            discards.len()
        )));
    }
    if elite_set.iter().chain(&discard_set).any(|&i| i >= n) {
        return Err(Error::Assembly("routing index outside the population".into()));
    }
    if !elite_set.is_disjoint(&discard_set) {
        return Err(Error::Assembly("elites and discards overlap".into()));
    }
    let survivors: Vec<CandidateId> = (0..n)
        .filter(|i| !discard_set.contains(i))
        .map(|i| previous.members[i].id)
        .collect();
    if mutated.len() != survivors.len() {
        return Err(Error::Assembly(format!(
            "expected {} mutated children, got {}",
            survivors.len(),
            mutated.len()
        )));
    }
    let generation = previous.generation + 1;
    for (child, parent) in mutated.iter().zip(&survivors) {
        if child.origin != Origin::Mutated
            || child.parent_id != Some(*parent)
            || child.generation != generation
        {
            return Err(Error::Assembly(format!(
                "child {} does not descend from survivor {parent} at generation {generation}",
                child.id
            )));
        }
    }

    let mut members = Vec::with_capacity(n);
    for &i in &elite_set {
        let elite = &previous.members[i];
        members.push(Candidate {
            id: ids.next_id(),
            content: elite.content.clone(),
            generation,
            origin: Origin::EliteCarryover,
            parent_id: Some(elite.id),
        });
    }
    members.extend(mutated);
    Ok(GenerationState::new(generation, members))
}
