//! Bradley-Terry scores from pairwise outcomes.
//!
//! The win probability of `i` over `j` is `σ(s_i − s_j)`. Scores are fitted by
//! maximizing the ridge-penalized log-likelihood
//!
//! ```text
//! L(s) = Σ_records log-lik(record; s) − ½·λ·‖s‖²
//! ```
//!
//! where a decisive record contributes `log σ(s_winner − s_loser)` and a tie
//! contributes half a win to each side. The penalty fixes the additive-shift
//! gauge: at the optimum the scores sum to zero.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lbfgs::{self, LbfgsOptions};
use crate::scalar::{log_sigmoid, sigmoid, Scalar};

pub const DEFAULT_LAMBDA: f64 = 0.01;
pub const DEFAULT_TOLERANCE: f64 = 1e-8;
pub const DEFAULT_MAX_ITERATIONS: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    LeftWins,
    RightWins,
    Tie,
}

/// One pairwise outcome between two population indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComparisonRecord {
    pub left: usize,
    pub right: usize,
    pub outcome: Outcome,
}

impl ComparisonRecord {
    pub fn new(left: usize, right: usize, outcome: Outcome) -> Self {
        Self {
            left,
            right,
            outcome,
        }
    }

    /// Shorthand for a decisive record where `winner` beat `loser`.
    pub fn win(winner: usize, loser: usize) -> Self {
        Self::new(winner, loser, Outcome::LeftWins)
    }

    pub fn tie(left: usize, right: usize) -> Self {
        Self::new(left, right, Outcome::Tie)
    }

    /// `(winner, loser, weight)` observations; a tie yields two half wins.
    fn observations<T: Scalar>(&self) -> impl Iterator<Item = (usize, usize, T)> {
        let half = T::lit(0.5);
        let (first, second) = match self.outcome {
            Outcome::LeftWins => (Some((self.left, self.right, T::one())), None),
            Outcome::RightWins => (Some((self.right, self.left, T::one())), None),
            Outcome::Tie => (
                Some((self.left, self.right, half)),
                Some((self.right, self.left, half)),
            ),
        };
        first.into_iter().chain(second)
    }
}

/// Fitted scores for one population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreVector<T> {
    pub scores: Vec<T>,
    pub lambda: T,
    pub converged: bool,
    pub iterations: usize,
}

impl<T: Scalar> ScoreVector<T> {
    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// See [`rank`].
    pub fn ranking(&self) -> Vec<usize> {
        rank(self)
    }
}

fn validate(records: &[ComparisonRecord], population_size: usize) -> Result<()> {
    for (i, r) in records.iter().enumerate() {
        if r.left == r.right {
            return Err(Error::InvalidInput(format!(
                "record {i} compares candidate {} with itself",
                r.left
            )));
        }
        if r.left >= population_size || r.right >= population_size {
            return Err(Error::InvalidInput(format!(
                "record {i} references ({}, {}) outside population of {population_size}",
                r.left, r.right
            )));
        }
    }
    Ok(())
}

fn check_lambda<T: Scalar>(lambda: T) -> Result<()> {
    if lambda.is_finite() && lambda >= T::zero() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("lambda must be ≥ 0, got {lambda}")))
    }
}

/// Penalized log-likelihood of `scores`.
pub fn bt_objective<T: Scalar>(scores: &[T], records: &[ComparisonRecord], lambda: T) -> Result<T> {
    check_lambda(lambda)?;
    validate(records, scores.len())?;
    Ok(objective_unchecked(scores, records, lambda))
}

/// Gradient of [`bt_objective`] with respect to `scores`.
pub fn bt_gradient<T: Scalar>(
    scores: &[T],
    records: &[ComparisonRecord],
    lambda: T,
) -> Result<Vec<T>> {
    check_lambda(lambda)?;
    validate(records, scores.len())?;
    Ok(gradient_unchecked(scores, records, lambda))
}

fn objective_unchecked<T: Scalar>(scores: &[T], records: &[ComparisonRecord], lambda: T) -> T {
    let loglik: T = records
        .iter()
        .flat_map(|r| r.observations::<T>())
        .map(|(w, l, weight)| weight * log_sigmoid(scores[w] - scores[l]))
        .sum();
    let norm2: T = scores.iter().map(|&s| s * s).sum();
    loglik - T::lit(0.5) * lambda * norm2
}

fn gradient_unchecked<T: Scalar>(scores: &[T], records: &[ComparisonRecord], lambda: T) -> Vec<T> {
    let mut grad: Vec<T> = scores.iter().map(|&s| -lambda * s).collect();
    for (w, l, weight) in records.iter().flat_map(|r| r.observations::<T>()) {
        // d/ds_w log σ(s_w − s_l) = 1 − σ(s_w − s_l) = σ(s_l − s_w)
        let push = weight * sigmoid(scores[l] - scores[w]);
        grad[w] = grad[w] + push;
        grad[l] = grad[l] - push;
    }
    grad
}

/// Solver settings for [`fit_bt`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions<T> {
    pub lambda: T,
    pub tolerance: T,
    pub max_iterations: usize,
}

impl<T: Scalar> Default for FitOptions<T> {
    fn default() -> Self {
        Self {
            lambda: T::lit(DEFAULT_LAMBDA),
            tolerance: T::lit(DEFAULT_TOLERANCE),
            max_iterations: DEFAULT_MAX_ITERATIONS,
        }
    }
}

impl<T: Scalar> FitOptions<T> {
    pub fn with_lambda(lambda: T) -> Self {
        Self {
            lambda,
            ..Self::default()
        }
    }
}

/// Maximizes the penalized likelihood, starting from the zero vector.
///
/// Non-convergence is reported through `converged = false` rather than an
/// error so callers mid-run can still use the best point found.
pub fn fit_bt<T: Scalar>(
    records: &[ComparisonRecord],
    population_size: usize,
    options: &FitOptions<T>,
) -> Result<ScoreVector<T>> {
    if population_size < 2 {
        return Err(Error::InvalidInput(format!(
            "population size must be at least 2, got {population_size}"
        )));
    }
    if !(options.lambda > T::zero() && options.lambda.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "lambda must be > 0 to fix the shift gauge, got {}",
            options.lambda
        )));
    }
    validate(records, population_size)?;

    if records.is_empty() {
        return Ok(ScoreVector {
            scores: vec![T::zero(); population_size],
            lambda: options.lambda,
            converged: true,
            iterations: 0,
        });
    }

    let lambda = options.lambda;
    let result = lbfgs::minimize(
        vec![T::zero(); population_size],
        &LbfgsOptions {
            memory: 8,
            tolerance: options.tolerance,
            max_iterations: options.max_iterations,
        },
        |s| {
            let value = -objective_unchecked(s, records, lambda);
            let grad = gradient_unchecked(s, records, lambda)
                .into_iter()
                .map(|g| -g)
                .collect();
            (value, grad)
        },
    );

    Ok(ScoreVector {
        scores: result.x,
        lambda,
        converged: result.converged,
        iterations: result.iterations,
    })
}

/// Indices by descending score; equal scores keep ascending index order.
pub fn rank<T: Scalar>(score_vector: &ScoreVector<T>) -> Vec<usize> {
    rank_scores(&score_vector.scores)
}

pub fn rank_scores<T: Scalar>(scores: &[T]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    // Stable sort keeps the index tie-break. NaN sorts last.
    order.sort_by(|&a, &b| {
        let (sa, sb) = (scores[a], scores[b]);
        sb.partial_cmp(&sa).unwrap_or_else(|| sa.is_nan().cmp(&sb.is_nan()))
    });
    order
}

/// Raw win rate per candidate, ties counting as half a win.
pub fn win_rates(records: &[ComparisonRecord], population_size: usize) -> Vec<f64> {
    let mut wins = vec![0.0; population_size];
    let mut games = vec![0.0; population_size];
    for r in records {
        for (w, _, weight) in r.observations::<f64>() {
            wins[w] += weight;
        }
        games[r.left] += 1.0;
        games[r.right] += 1.0;
    }
    wins.iter()
        .zip(&games)
        .map(|(&w, &g)| if g > 0.0 { w / g } else { 0.0 })
        .collect()
}

/// Kendall rank correlation (tau-a) between two score lists of equal length.
pub fn kendall_tau<A: Scalar, B: Scalar>(a: &[A], b: &[B]) -> f64 {
    assert_eq!(a.len(), b.len(), "kendall_tau needs equal lengths");
    let n = a.len();
    if n < 2 {
        return 1.0;
    }
    let mut concordant = 0i64;
    let mut discordant = 0i64;
    for i in 0..n {
        for j in (i + 1)..n {
            let da = (a[i] - a[j]).to_f64_lossy();
            let db = (b[i] - b[j]).to_f64_lossy();
            let sign = da * db;
            if sign > 0.0 {
                concordant += 1;
            } else if sign < 0.0 {
                discordant += 1;
            }
        }
    }
    let pairs = (n * (n - 1) / 2) as f64;
    (concordant - discordant) as f64 / pairs
}
