//! Monte-Carlo study of Bradley-Terry selection at fixed call budgets.
//!
//! A pool of candidates is judged once on every pair. Each trial draws `n`
//! candidates, replays `m = ⌊2(B − n)/n⌋` rounds of perfect matchings against
//! the stored outcomes, fits scores, and checks whether the top candidate is
//! accepted.

use std::collections::BTreeMap;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backend::SyntheticWorldConfig;
use crate::bt::{self, ComparisonRecord, FitOptions, Outcome, ScoreVector};
use crate::error::{Error, Result};
use crate::seed::{derive_seed, SeedPurpose};

/// Outcomes of a full round-robin over a pool.
///
/// `outcomes` lists unordered pairs in row-major upper-triangular order
/// `(0,1), (0,2), …, (0,p−1), (1,2), …, (p−2,p−1)`; `LeftWins` means the
/// lower index won.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgmentMatrix {
    pub pool_size: usize,
    pub labels: Vec<bool>,
    pub outcomes: Vec<Outcome>,
    /// Latent qualities, when the matrix was generated synthetically.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thetas: Option<Vec<f64>>,
}

pub fn pair_count(pool_size: usize) -> usize {
    pool_size * pool_size.saturating_sub(1) / 2
}

impl JudgmentMatrix {
    pub fn new(labels: Vec<bool>, outcomes: Vec<Outcome>) -> Result<Self> {
        let m = Self {
            pool_size: labels.len(),
            labels,
            outcomes,
            thetas: None,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.pool_size < 2 {
            return Err(Error::InvalidInput("pool must hold at least two candidates".into()));
        }
        if self.labels.len() != self.pool_size {
            return Err(Error::InvalidInput(format!(
                "{} labels for a pool of {}",
                self.labels.len(),
                self.pool_size
            )));
        }
        if self.outcomes.len() != pair_count(self.pool_size) {
            return Err(Error::InvalidInput(format!(
                "expected {} outcomes, got {}",
                pair_count(self.pool_size),
                self.outcomes.len()
            )));
        }
        if let Some(t) = &self.thetas {
            if t.len() != self.pool_size {
                return Err(Error::InvalidInput("theta count does not match the pool".into()));
            }
        }
        Ok(())
    }

    /// Position of pair `(i, j)`, `i < j`, in `outcomes`.
    pub fn pair_index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < j && j < self.pool_size);
        i * self.pool_size - i * (i + 1) / 2 + (j - i - 1)
    }

    /// Outcome with `i` on the left.
    pub fn outcome(&self, i: usize, j: usize) -> Outcome {
        if i < j {
            self.outcomes[self.pair_index(i, j)]
        } else {
            match self.outcomes[self.pair_index(j, i)] {
                Outcome::LeftWins => Outcome::RightWins,
                Outcome::RightWins => Outcome::LeftWins,
                Outcome::Tie => Outcome::Tie,
            }
        }
    }

    /// A pool drawn from the synthetic world, with every pair judged once.
    pub fn synthetic(pool_size: usize, world: &SyntheticWorldConfig, seed: u64) -> Result<Self> {
        world.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let thetas: Vec<f64> = (0..pool_size).map(|_| world.latent_quality.sample(&mut rng)).collect();
        Self::judged_from_thetas(thetas, world, &mut rng)
    }

    /// Judges every pair of the given qualities with the world's judge.
    pub fn judged_from_thetas<R: Rng>(thetas: Vec<f64>, world: &SyntheticWorldConfig, rng: &mut R) -> Result<Self> {
        let p = thetas.len();
        let mut outcomes = Vec::with_capacity(pair_count(p));
        for i in 0..p {
            for j in i + 1..p {
                let o = if rng.random_bool(world.tie_rate) {
                    Outcome::Tie
                } else if rng.random_bool(world.prob_first_wins(thetas[i], thetas[j])) {
                    Outcome::LeftWins
                } else {
                    Outcome::RightWins
                };
                outcomes.push(o);
            }
        }
        let labels = thetas.iter().map(|&t| world.is_accepted(t)).collect();
        let mut m = Self::new(labels, outcomes)?;
        m.thetas = Some(thetas);
        Ok(m)
    }

    /// Records for the complete matrix.
    pub fn records(&self) -> Vec<ComparisonRecord> {
        let mut out = Vec::with_capacity(self.outcomes.len());
        for i in 0..self.pool_size {
            for j in i + 1..self.pool_size {
                out.push(ComparisonRecord::new(i, j, self.outcomes[self.pair_index(i, j)]));
            }
        }
        out
    }

    pub fn fit(&self, lambda: f64) -> Result<ScoreVector<f64>> {
        bt::fit_bt(&self.records(), self.pool_size, &FitOptions::with_lambda(lambda))
    }
}

/// Circle-method 1-factorization of the complete graph on `pool_size`
/// vertices: `pool_size − 1` rounds of `pool_size / 2` disjoint pairs.
pub fn round_robin_schedule(pool_size: usize) -> Result<Vec<Vec<(usize, usize)>>> {
    if pool_size < 2 || pool_size % 2 != 0 {
        return Err(Error::InvalidInput(format!(
            "round-robin needs an even pool of at least 2, got {pool_size}"
        )));
    }
    let fixed = pool_size - 1;
    let ring = pool_size - 1;
    Ok((0..ring)
        .map(|r| {
            let mut round = Vec::with_capacity(pool_size / 2);
            round.push((r.min(fixed), r.max(fixed)));
            for i in 1..pool_size / 2 {
                let a = (r + i) % ring;
                let b = (r + ring - i) % ring;
                round.push((a.min(b), a.max(b)));
            }
            round
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RoundPairing {
    /// Independent uniformly random perfect matchings.
    #[default]
    Random,
    /// Successive rounds of the circle-method schedule, cycling if `m`
    /// exceeds `n − 1`.
    RoundRobin,
}

/// Comparison rounds affordable at budget `B` with `n` candidates.
pub fn rounds_for_budget(budget: u64, n: usize) -> u64 {
    if n == 0 || budget < n as u64 {
        return 0;
    }
    2 * (budget - n as u64) / n as u64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimCell {
    pub budget: u64,
    pub n: usize,
    pub m: u64,
    pub trials: usize,
    /// Trials whose top-ranked candidate is accepted.
    pub accepted_count: usize,
    /// Trials whose sample contains at least one accepted candidate.
    pub oracle_count: usize,
    pub top1_accuracy: f64,
    pub feasible: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimOptions {
    pub trials: usize,
    pub lambda: f64,
    pub pairing: RoundPairing,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            trials: 500,
            lambda: bt::DEFAULT_LAMBDA,
            pairing: RoundPairing::Random,
        }
    }
}

/// Outcome of one trial: `(top1 accepted, any accepted in sample)`.
fn run_trial(matrix: &JudgmentMatrix, n: usize, m: u64, options: &SimOptions, seed: u64) -> Result<(bool, bool)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sample = index::sample(&mut rng, matrix.pool_size, n).into_vec();
    sample.sort_unstable();

    let mut records = Vec::with_capacity(m as usize * n / 2);
    let mut push = |a: usize, b: usize| {
        records.push(ComparisonRecord::new(a, b, matrix.outcome(sample[a], sample[b])));
    };
    match options.pairing {
        RoundPairing::Random => {
            let mut order: Vec<usize> = (0..n).collect();
            for _ in 0..m {
                order.shuffle(&mut rng);
                for pair in order.chunks_exact(2) {
                    push(pair[0], pair[1]);
                }
            }
        }
        RoundPairing::RoundRobin => {
            let schedule = round_robin_schedule(n)?;
            for r in 0..m as usize {
                for &(a, b) in &schedule[r % schedule.len()] {
                    push(a, b);
                }
            }
        }
    }
    let scores = bt::fit_bt(&records, n, &FitOptions::with_lambda(options.lambda))?;
    let top = scores.ranking()[0];
    Ok((matrix.labels[sample[top]], sample.iter().any(|&i| matrix.labels[i])))
}

/// Runs `options.trials` trials at `(B, n)`. A budget that affords no
/// comparison round yields an infeasible cell without running any trial.
pub fn simulate_cell(matrix: &JudgmentMatrix, budget: u64, n: usize, options: &SimOptions, seed: u64) -> Result<SimCell> {
    matrix.validate()?;
    if n < 2 || n > matrix.pool_size {
        return Err(Error::InvalidInput(format!(
            "n must lie in [2, {}], got {n}",
            matrix.pool_size
        )));
    }
    if options.trials == 0 {
        return Err(Error::InvalidConfig("trials must be >= 1".into()));
    }
    if !(options.lambda > 0.0) {
        return Err(Error::InvalidConfig("lambda must be > 0".into()));
    }
    let m = rounds_for_budget(budget, n);
    let mut cell = SimCell {
        budget,
        n,
        m,
        trials: options.trials,
        accepted_count: 0,
        oracle_count: 0,
        top1_accuracy: 0.0,
        feasible: m >= 1,
    };
    if !cell.feasible {
        return Ok(cell);
    }
    let results = (0..options.trials)
        .into_par_iter()
        .map(|t| run_trial(matrix, n, m, options, derive_seed(seed, 0, SeedPurpose::Trial, t as u64)))
        .collect::<Result<Vec<_>>>()?;
    cell.accepted_count = results.iter().filter(|r| r.0).count();
    cell.oracle_count = results.iter().filter(|r| r.1).count();
    cell.top1_accuracy = cell.accepted_count as f64 / options.trials as f64;
    Ok(cell)
}

/// Every `(B, n)` cell of the grid. Each cell's seed depends only on its
/// coordinates, so results do not depend on grid order.
pub fn sweep(matrix: &JudgmentMatrix, budgets: &[u64], ns: &[usize], options: &SimOptions, seed: u64) -> Result<Vec<SimCell>> {
    let mut cells = Vec::with_capacity(budgets.len() * ns.len());
    for &b in budgets {
        for &n in ns {
            cells.push(simulate_cell(matrix, b, n, options, derive_seed(seed, b, SeedPurpose::Trial, n as u64))?);
        }
    }
    Ok(cells)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrontierPoint {
    pub budget: u64,
    pub n: usize,
    pub m: u64,
    pub top1_accuracy: f64,
}

/// Best feasible cell per budget; ties go to the smaller `n`. Budgets with
/// no feasible cell are omitted.
pub fn optimal_frontier(cells: &[SimCell]) -> Vec<FrontierPoint> {
    let mut best: BTreeMap<u64, SimCell> = BTreeMap::new();
    for c in cells.iter().filter(|c| c.feasible) {
        best.entry(c.budget)
            .and_modify(|b| {
                if c.top1_accuracy > b.top1_accuracy || (c.top1_accuracy == b.top1_accuracy && c.n < b.n) {
                    *b = *c;
                }
            })
            .or_insert(*c);
    }
    best.into_values()
        .map(|c| FrontierPoint {
            budget: c.budget,
            n: c.n,
            m: c.m,
            top1_accuracy: c.top1_accuracy,
        })
        .collect()
}
