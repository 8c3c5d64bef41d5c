//! Pairwise judge protocol: prompt rendering with randomized presentation
//! order, reply parsing, and mapping verdicts back to candidate identities.

use std::sync::LazyLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::bt::Outcome;
use crate::population::{Candidate, CandidateId};
use crate::prompts::fill;

/// Verdict in presentation space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    #[serde(rename = "A")]
    A,
    #[serde(rename = "B")]
    B,
    #[serde(rename = "TIE")]
    Tie,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::A => "A",
            Verdict::B => "B",
            Verdict::Tie => "TIE",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComparisonTask {
    pub left_id: CandidateId,
    pub right_id: CandidateId,
    /// The candidate shown as "Solution A".
    pub presented_first: CandidateId,
    pub prompt_text: String,
    pub seed: u64,
}

impl ComparisonTask {
    pub fn left_is_a(&self) -> bool {
        self.presented_first == self.left_id
    }
}

/// Outcome of one comparison in canonical left/right identity space.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Judgment {
    pub left_id: CandidateId,
    pub right_id: CandidateId,
    pub outcome: Outcome,
    pub rationale_for_left: String,
    pub rationale_for_right: String,
    pub presented_first: CandidateId,
    /// Forced to a tie after the reply could not be parsed.
    pub degraded: bool,
}

/// Which label a rationale's author used for the candidate it describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Perspective {
    AsA,
    AsB,
}

/// Result of a comparison seen from one participant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum SideResult {
    Win,
    Tie,
    Loss,
}

impl Judgment {
    pub fn degraded_tie(task: &ComparisonTask) -> Self {
        Self {
            left_id: task.left_id,
            right_id: task.right_id,
            outcome: Outcome::Tie,
            rationale_for_left: String::new(),
            rationale_for_right: String::new(),
            presented_first: task.presented_first,
            degraded: true,
        }
    }

    pub fn involves(&self, id: CandidateId) -> bool {
        self.left_id == id || self.right_id == id
    }

    pub fn opponent_of(&self, id: CandidateId) -> Option<CandidateId> {
        if self.left_id == id {
            Some(self.right_id)
        } else if self.right_id == id {
            Some(self.left_id)
        } else {
            None
        }
    }

    /// The rationale about `id`, the label it was written under, and the
    /// result from `id`'s side.
    pub fn view_of(&self, id: CandidateId) -> Option<(&str, Perspective, SideResult)> {
        let is_left = if self.left_id == id {
            true
        } else if self.right_id == id {
            false
        } else {
            return None;
        };
        let shown_first = self.presented_first == id;
        let perspective = if shown_first {
            Perspective::AsA
        } else {
            Perspective::AsB
        };
        let result = match (self.outcome, is_left) {
            (Outcome::Tie, _) => SideResult::Tie,
            (Outcome::LeftWins, true) | (Outcome::RightWins, false) => SideResult::Win,
            _ => SideResult::Loss,
        };
        let text = if is_left {
            &self.rationale_for_left
        } else {
            &self.rationale_for_right
        };
        Some((text, perspective, result))
    }
}

/// Draws the presentation order from `seed`: `true` shows left as A.
pub fn left_presented_first(seed: u64) -> bool {
    ChaCha8Rng::seed_from_u64(seed).random_bool(0.5)
}

pub fn render_comparison_prompt(
    template: &str,
    problem: &str,
    left: &Candidate,
    right: &Candidate,
    seed: u64,
) -> ComparisonTask {
    let left_first = left_presented_first(seed);
    let (a, b) = if left_first { (left, right) } else { (right, left) };
    let prompt_text = fill(
        template,
        &[
            ("problem", problem),
            ("code_a", &a.content),
            ("code_b", &b.content),
        ],
    );
    ComparisonTask {
        left_id: left.id,
        right_id: right.id,
        presented_first: a.id,
        prompt_text,
        seed,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JudgeReply {
    pub winner: Verdict,
    pub feedback_a: String,
    pub feedback_b: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseFailure {
    #[error("no JSON object found in judge reply")]
    NoObject,
    #[error("judge reply is missing string field `{0}`")]
    MissingKey(&'static str),
    #[error("unrecognized winner `{0}`")]
    UnknownWinner(String),
}

/// Returns the first balanced-brace substring that parses as a JSON object.
fn first_json_object(raw: &str) -> Option<serde_json::Map<String, Value>> {
    let bytes = raw.as_bytes();
    let mut start = 0;
    while let Some(offset) = raw[start..].find('{') {
        let open = start + offset;
        let mut depth = 0usize;
        let mut in_string = false;
        let mut escaped = false;
        let mut end = None;
        for (i, &c) in bytes.iter().enumerate().skip(open) {
            if in_string {
                match c {
                    _ if escaped => escaped = false,
                    b'\\' => escaped = true,
                    b'"' => in_string = false,
                    _ => {}
                }
                continue;
            }
            match c {
                b'"' => in_string = true,
                b'{' => depth += 1,
                b'}' => {
                    depth -= 1;
                    if depth == 0 {
                        end = Some(i);
                        break;
                    }
                }
                _ => {}
            }
        }
        if let Some(end) = end {
            if let Ok(Value::Object(map)) = serde_json::from_str::<Value>(&raw[open..=end]) {
                return Some(map);
            }
        }
        start = open + 1;
    }
    None
}

/// Parses a judge reply. Surrounding prose is tolerated; the first JSON
/// object wins. `winner` is trimmed and matched case-insensitively.
pub fn parse_judge_reply(raw: &str) -> Result<JudgeReply, ParseFailure> {
    let object = first_json_object(raw).ok_or(ParseFailure::NoObject)?;
    let field = |key: &'static str| -> Result<String, ParseFailure> {
        object
            .get(key)
            .and_then(Value::as_str)
            .map(str::to_owned)
            .ok_or(ParseFailure::MissingKey(key))
    };
    let feedback_a = field("feedback_a")?;
    let feedback_b = field("feedback_b")?;
    let winner_raw = field("winner")?;
    let winner = match winner_raw.trim().to_ascii_uppercase().as_str() {
        "A" => Verdict::A,
        "B" => Verdict::B,
        "TIE" => Verdict::Tie,
        _ => return Err(ParseFailure::UnknownWinner(winner_raw)),
    };
    Ok(JudgeReply {
        winner,
        feedback_a,
        feedback_b,
    })
}

/// Maps a presentation-space verdict back onto the task's left/right ids.
pub fn canonicalize(task: &ComparisonTask, reply: &JudgeReply) -> Judgment {
    let left_is_a = task.left_is_a();
    let outcome = match (reply.winner, left_is_a) {
        (Verdict::Tie, _) => Outcome::Tie,
        (Verdict::A, true) | (Verdict::B, false) => Outcome::LeftWins,
        (Verdict::A, false) | (Verdict::B, true) => Outcome::RightWins,
    };
    let (for_left, for_right) = if left_is_a {
        (&reply.feedback_a, &reply.feedback_b)
    } else {
        (&reply.feedback_b, &reply.feedback_a)
    };
    Judgment {
        left_id: task.left_id,
        right_id: task.right_id,
        outcome,
        rationale_for_left: for_left.clone(),
        rationale_for_right: for_right.clone(),
        presented_first: task.presented_first,
        degraded: false,
    }
}

static LABEL: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\b[Ss]olution ([AB])\b").expect("valid regex"));

/// Rewrites "Solution A"/"Solution B" (either capitalization of
/// "solution") into "this solution"/"the other solution" from the point of
/// view of the candidate shown under `perspective`.
pub fn rewrite_self_relative(feedback: &str, perspective: Perspective) -> String {
    let own = match perspective {
        Perspective::AsA => "A",
        Perspective::AsB => "B",
    };
    LABEL
        .replace_all(feedback, |caps: &regex::Captures<'_>| {
            if &caps[1] == own {
                "this solution"
            } else {
                "the other solution"
            }
        })
        .into_owned()
}
