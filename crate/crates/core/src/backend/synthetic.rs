//! Offline test double: every candidate carries a latent quality `θ` in its
//! text, and the world answers generation, judging and mutation calls from
//! `θ` and the request seed alone.

use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{Backend, BackendError, CallPurpose, CompletionRequest};
use crate::error::{Error, Result};
use crate::scalar::sigmoid;

const THETA_TAG: &str = "// theta = ";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalDist {
    pub mean: f64,
    pub std: f64,
}

impl NormalDist {
    pub fn point(value: f64) -> Self {
        Self {
            mean: value,
            std: 0.0,
        }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        if self.std == 0.0 {
            return self.mean;
        }
        Normal::new(self.mean, self.std)
            .expect("validated std")
            .sample(rng)
    }
}

/// How the synthetic judge decides between two candidates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum JudgeModel {
    /// `P(A wins) = σ(scale·(θ_A − θ_B))`.
    Logistic { scale: f64 },
    /// Picks the higher-θ side with probability `p`.
    FixedAccuracy { p: f64 },
}

/// Per-class recall of the synthetic pointwise judge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointwiseRecall {
    /// Probability of answering YES for an accepted candidate.
    pub accepted: f64,
    /// Probability of answering NO for a rejected candidate.
    pub rejected: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticWorldConfig {
    pub latent_quality: NormalDist,
    pub judge: JudgeModel,
    pub mutation_shift: NormalDist,
    /// Added to the mutation shift when the prompt carries feedback.
    pub feedback_bonus: f64,
    pub refine_shift: NormalDist,
    /// Candidates with `θ` strictly above this count as accepted.
    pub acceptance_threshold: f64,
    pub pointwise: PointwiseRecall,
    /// Probability that the judge declares a tie.
    pub tie_rate: f64,
    /// Probability that a judge or pointwise reply is unparseable.
    pub malformed_rate: f64,
    pub delay_ms: u64,
}

impl Default for SyntheticWorldConfig {
    fn default() -> Self {
        Self {
            latent_quality: NormalDist {
                mean: 0.0,
                std: 1.0,
            },
            judge: JudgeModel::FixedAccuracy { p: 0.862 },
            mutation_shift: NormalDist {
                mean: 0.2,
                std: 0.5,
            },
            feedback_bonus: 0.1,
            refine_shift: NormalDist {
                mean: 0.2,
                std: 0.5,
            },
            acceptance_threshold: 1.2816,
            pointwise: PointwiseRecall {
                accepted: 0.964,
                rejected: 0.622,
            },
            tie_rate: 0.0,
            malformed_rate: 0.0,
            delay_ms: 0,
        }
    }
}

fn unit(name: &str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("{name} must lie in [0, 1], got {value}")))
    }
}

impl SyntheticWorldConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, d) in [
            ("latent_quality", self.latent_quality),
            ("mutation_shift", self.mutation_shift),
            ("refine_shift", self.refine_shift),
        ] {
            if !(d.std >= 0.0 && d.std.is_finite() && d.mean.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} needs finite mean and std ≥ 0")));
            }
        }
        match self.judge {
            JudgeModel::FixedAccuracy { p } if !(0.5..=1.0).contains(&p) => {
                return Err(Error::InvalidConfig(format!(
                    "fixed-accuracy judge needs p in [0.5, 1], got {p}"
                )))
            }
            JudgeModel::Logistic { scale } if !(scale.is_finite() && scale >= 0.0) => {
                return Err(Error::InvalidConfig(format!("logistic scale must be ≥ 0, got {scale}")))
            }
            _ => {}
        }
        unit("pointwise.accepted", self.pointwise.accepted)?;
        unit("pointwise.rejected", self.pointwise.rejected)?;
        unit("tie_rate", self.tie_rate)?;
        unit("malformed_rate", self.malformed_rate)?;
        Ok(())
    }

    pub fn is_accepted(&self, theta: f64) -> bool {
        theta > self.acceptance_threshold
    }

    /// Probability that the candidate shown as A wins a decisive verdict.
    pub fn prob_first_wins(&self, theta_a: f64, theta_b: f64) -> f64 {
        match self.judge {
            JudgeModel::Logistic { scale } => sigmoid(scale * (theta_a - theta_b)),
            JudgeModel::FixedAccuracy { p } => {
                if theta_a > theta_b {
                    p
                } else if theta_a < theta_b {
                    1.0 - p
                } else {
                    0.5
                }
            }
        }
    }
}

/// Text for a synthetic candidate with quality `theta`. `tag` keeps
/// otherwise equal candidates distinguishable.
pub fn encode_candidate(theta: f64, tag: u64) -> String {
    format!("// synthetic candidate\n{THETA_TAG}{theta:?}\n// tag = {tag:016x}\nint main() {{ return 0; }}")
}

/// First `θ` encoded in `text`, if any.
pub fn decode_theta(text: &str) -> Option<f64> {
    let start = text.find(THETA_TAG)? + THETA_TAG.len();
    let rest = &text[start..];
    let end = rest.find('\n').unwrap_or(rest.len());
    rest[..end].trim().parse().ok()
}

/// Child quality after one mutation.
pub fn synthetic_mutate(
    parent_theta: f64,
    feedback_present: bool,
    world: &SyntheticWorldConfig,
    seed: u64,
) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bonus = if feedback_present {
        world.feedback_bonus
    } else {
        0.0
    };
    parent_theta + world.mutation_shift.sample(&mut rng) + bonus
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

#[derive(Debug, Clone)]
pub struct SyntheticBackend {
    world: SyntheticWorldConfig,
}

impl SyntheticBackend {
    pub fn new(world: SyntheticWorldConfig) -> Result<Self> {
        world.validate()?;
        Ok(Self { world })
    }

    pub fn world(&self) -> &SyntheticWorldConfig {
        &self.world
    }

    fn failure(message: String) -> BackendError {
        BackendError {
            message,
            attempts: 1,
        }
    }

    fn section_theta(prompt: &str, header: &str) -> Option<f64> {
        let at = prompt.find(header)?;
        decode_theta(&prompt[at + header.len()..])
    }

    fn judge(&self, prompt: &str, rng: &mut ChaCha8Rng) -> String {
        let split = prompt.find("## Solution B");
        let theta_a = split.and_then(|b| Self::section_theta(&prompt[..b], "## Solution A"));
        let theta_b = Self::section_theta(prompt, "## Solution B");
        let (Some(a), Some(b)) = (theta_a, theta_b) else {
            return "I could not find two solutions to compare.".into();
        };
        if rng.random_bool(self.world.malformed_rate) {
            return "Both solutions look plausible; winner: A (probably).".into();
        }
        let (winner, fa, fb) = if rng.random_bool(self.world.tie_rate) {
            (
                "TIE",
                "Solution A follows the same approach as Solution B.",
                "Solution B is equivalent to Solution A.",
            )
        } else if rng.random_bool(self.world.prob_first_wins(a, b)) {
            (
                "A",
                "Solution A handles the edge cases that Solution B misses.",
                "Solution B has a critical flaw on boundary inputs.",
            )
        } else {
            (
                "B",
                "Solution A has a critical flaw on boundary inputs.",
                "Solution B handles the edge cases that Solution A misses.",
            )
        };
        serde_json::json!({ "feedback_a": fa, "feedback_b": fb, "winner": winner }).to_string()
    }

    fn pointwise(&self, prompt: &str, rng: &mut ChaCha8Rng) -> String {
        let Some(theta) = Self::section_theta(prompt, "## Solution") else {
            return "No solution supplied.".into();
        };
        if rng.random_bool(self.world.malformed_rate) {
            return "The solution seems fine.\nVerdict: probably yes".into();
        }
        let yes = if self.world.is_accepted(theta) {
            rng.random_bool(self.world.pointwise.accepted)
        } else {
            !rng.random_bool(self.world.pointwise.rejected)
        };
        format!(
            "Checked the main cases.\nVERDICT: {}",
            if yes { "YES" } else { "NO" }
        )
    }

    fn rewrite(&self, theta: f64, rng: &mut ChaCha8Rng) -> String {
        let tag = rng.random::<u64>();
        format!(
            "Reasoning about the approach.\n```cpp\n{}\n```",
            encode_candidate(theta, tag)
        )
    }
}

impl Backend for SyntheticBackend {
    fn complete(&self, request: &CompletionRequest) -> std::result::Result<String, BackendError> {
        if self.world.delay_ms > 0 {
            std::thread::sleep(Duration::from_millis(self.world.delay_ms));
        }
        let seed = request
            .seed
            .unwrap_or_else(|| fnv1a(request.user_prompt.as_bytes()));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let prompt = &request.user_prompt;
        match request.purpose {
            CallPurpose::Generate => {
                let theta = self.world.latent_quality.sample(&mut rng);
                Ok(self.rewrite(theta, &mut rng))
            }
            CallPurpose::Mutate => {
                let parent = Self::section_theta(prompt, "## Solution")
                    .ok_or_else(|| Self::failure("mutation prompt without a synthetic solution".into()))?;
                let feedback = prompt.contains("## Pairwise Feedback");
                let child = synthetic_mutate(parent, feedback, &self.world, rng.random());
                Ok(self.rewrite(child, &mut rng))
            }
            CallPurpose::Refine => {
                let parent = Self::section_theta(prompt, "## Solution")
                    .ok_or_else(|| Self::failure("refine prompt without a synthetic solution".into()))?;
                let child = parent + self.world.refine_shift.sample(&mut rng);
                Ok(self.rewrite(child, &mut rng))
            }
            CallPurpose::Judge => Ok(self.judge(prompt, &mut rng)),
            CallPurpose::Pointwise => Ok(self.pointwise(prompt, &mut rng)),
        }
    }
}
