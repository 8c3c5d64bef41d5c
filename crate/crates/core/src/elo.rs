//! Effective Elo of a solver from per-problem outcomes.
//!
//! A solver rated `r` solves a problem rated `q` with probability
//! `1 / (1 + 10^((q − r)/400))`. The rating is the MAP estimate under a
//! Gaussian prior, searched on a bounded interval, and its uncertainty comes
//! from resampling problems with replacement.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{log_sigmoid, Scalar};
use crate::seed::{derive_seed, SeedPurpose};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Evidence {
    Binomial { successes: u32, trials: u32 },
    Bernoulli { solved: bool },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemOutcome<T> {
    pub problem_rating: T,
    #[serde(flatten)]
    pub evidence: Evidence,
}

impl<T: Scalar> ProblemOutcome<T> {
    pub fn binomial(problem_rating: T, successes: u32, trials: u32) -> Self {
        Self {
            problem_rating,
            evidence: Evidence::Binomial { successes, trials },
        }
    }

    pub fn bernoulli(problem_rating: T, solved: bool) -> Self {
        Self {
            problem_rating,
            evidence: Evidence::Bernoulli { solved },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.problem_rating.is_finite() {
            return Err(Error::InvalidInput("problem rating must be finite".into()));
        }
        if let Evidence::Binomial { successes, trials } = self.evidence {
            if successes > trials {
                return Err(Error::InvalidInput(format!(
                    "successes ({successes}) exceed trials ({trials})"
                )));
            }
        }
        Ok(())
    }

    /// `(successes, failures)` as real counts.
    fn counts(&self) -> (T, T) {
        match self.evidence {
            Evidence::Binomial { successes, trials } => {
                (T::lit(f64::from(successes)), T::lit(f64::from(trials - successes)))
            }
            Evidence::Bernoulli { solved: true } => (T::one(), T::zero()),
            Evidence::Bernoulli { solved: false } => (T::zero(), T::one()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EloConfig<T> {
    pub prior_mean: T,
    pub prior_std: T,
    pub bounds: (T, T),
    pub resamples: usize,
    pub seed: u64,
    /// Final bracket width of the scalar search, in Elo points.
    pub tolerance: T,
}

impl<T: Scalar> Default for EloConfig<T> {
    fn default() -> Self {
        Self {
            prior_mean: T::lit(3100.0),
            prior_std: T::lit(500.0),
            bounds: (T::lit(1000.0), T::lit(5000.0)),
            resamples: 1000,
            seed: 0,
            tolerance: T::lit(1e-6),
        }
    }
}

impl<T: Scalar> EloConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.prior_std > T::zero()) {
            return Err(Error::InvalidConfig("prior_std must be > 0".into()));
        }
        if !(self.bounds.0 < self.bounds.1) || !self.bounds.0.is_finite() || !self.bounds.1.is_finite() {
            return Err(Error::InvalidConfig("bounds must be finite with low < high".into()));
        }
        if !(self.tolerance > T::zero()) {
            return Err(Error::InvalidConfig("tolerance must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EloEstimate<T> {
    pub rating: T,
    pub ci_low: T,
    pub ci_high: T,
    pub prior_mean: T,
    pub prior_std: T,
    pub bounds: (T, T),
    pub resamples: usize,
}

fn logistic_argument<T: Scalar>(model_rating: T, problem_rating: T) -> T {
    (model_rating - problem_rating) * T::lit(std::f64::consts::LN_10 / 400.0)
}

pub fn solve_probability<T: Scalar>(model_rating: T, problem_rating: T) -> T {
    T::one() / (T::one() + T::lit(10.0).powf((problem_rating - model_rating) / T::lit(400.0)))
}

/// Log-likelihood of the outcomes plus the Gaussian log-prior (up to a
/// constant).
pub fn log_posterior<T: Scalar>(rating: T, outcomes: &[ProblemOutcome<T>], prior_mean: T, prior_std: T) -> T {
    let z = (rating - prior_mean) / prior_std;
    let prior = -T::lit(0.5) * z * z;
    prior + log_likelihood(rating, outcomes)
}

pub fn log_likelihood<T: Scalar>(rating: T, outcomes: &[ProblemOutcome<T>]) -> T {
    outcomes
        .iter()
        .map(|o| {
            let x = logistic_argument(rating, o.problem_rating);
            let (s, f) = o.counts();
            let mut term = T::zero();
            if s > T::zero() {
                term = term + s * log_sigmoid(x);
            }
            if f > T::zero() {
                term = term + f * log_sigmoid(-x);
            }
            term
        })
        .sum()
}

/// Golden-section search for the maximum of a unimodal `f` on `[lo, hi]`.
pub fn golden_section_max<T: Scalar>(mut lo: T, mut hi: T, tolerance: T, f: impl Fn(T) -> T) -> T {
    let inv_phi = T::lit((5f64.sqrt() - 1.0) / 2.0);
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    while hi - lo > tolerance {
        if fc >= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = f(d);
        }
        // Guard against a bracket that stops shrinking at low precision.
        if hi - lo <= (hi.abs() + lo.abs()) * T::epsilon() {
            break;
        }
    }
    (lo + hi) / T::lit(2.0)
}

pub fn map_estimate<T: Scalar>(outcomes: &[ProblemOutcome<T>], config: &EloConfig<T>) -> Result<T> {
    if outcomes.is_empty() {
        return Err(Error::InvalidInput("at least one problem outcome is required".into()));
    }
    config.validate()?;
    for o in outcomes {
        o.validate()?;
    }
    Ok(map_unchecked(outcomes, config))
}

fn map_unchecked<T: Scalar>(outcomes: &[ProblemOutcome<T>], config: &EloConfig<T>) -> T {
    golden_section_max(config.bounds.0, config.bounds.1, config.tolerance, |r| {
        log_posterior(r, outcomes, config.prior_mean, config.prior_std)
    })
}

/// Percentile of sorted data with linear interpolation between order
/// statistics at position `h = (N − 1)·q`.
pub fn percentile<T: Scalar>(sorted: &[T], q: f64) -> T {
    assert!(!sorted.is_empty(), "percentile of empty data");
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = T::lit(h - lo as f64);
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// MAP estimates on `resamples` bootstrap replicates, in replicate order.
pub fn bootstrap_ratings<T: Scalar>(outcomes: &[ProblemOutcome<T>], config: &EloConfig<T>) -> Result<Vec<T>> {
    if config.resamples == 0 {
        return Err(Error::InvalidConfig("resamples must be >= 1".into()));
    }
    map_estimate(outcomes, config)?;
    let n = outcomes.len();
    Ok((0..config.resamples)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, 0, SeedPurpose::Bootstrap, r as u64));
            let sample: Vec<ProblemOutcome<T>> = (0..n).map(|_| outcomes[rng.random_range(0..n)]).collect();
            map_unchecked(&sample, config)
        })
        .collect())
}

/// 2.5th and 97.5th percentiles of the bootstrap MAP distribution.
pub fn bootstrap_ci<T: Scalar>(outcomes: &[ProblemOutcome<T>], config: &EloConfig<T>) -> Result<(T, T)> {
    let mut ratings = bootstrap_ratings(outcomes, config)?;
    ratings.sort_by(|a, b| a.partial_cmp(b).expect("finite ratings"));
    Ok((percentile(&ratings, 0.025), percentile(&ratings, 0.975)))
}

pub fn estimate_elo<T: Scalar>(outcomes: &[ProblemOutcome<T>], config: &EloConfig<T>) -> Result<EloEstimate<T>> {
    let rating = map_estimate(outcomes, config)?;
    let (ci_low, ci_high) = bootstrap_ci(outcomes, config)?;
    Ok(EloEstimate {
        rating,
        ci_low,
        ci_high,
        prior_mean: config.prior_mean,
        prior_std: config.prior_std,
        bounds: config.bounds,
        resamples: config.resamples,
    })
}

/// Reads one JSON outcome per non-blank line.
pub fn parse_outcomes_jsonl(text: &str) -> Result<Vec<ProblemOutcome<f64>>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let o: ProblemOutcome<f64> = serde_json::from_str(l)
                .map_err(|e| Error::InvalidInput(format!("line {}: {e}", i + 1)))?;
            o.validate()?;
            Ok(o)
        })
        .collect()
}
