//! Random K-regular comparison schedules.
//!
//! Every candidate is paired with exactly `k` distinct peers, never with
//! itself, and no unordered pair repeats. Half-edges ("points", `k` per
//! vertex) are matched one pair at a time, each step drawing uniformly among
//! the point pairs that keep the graph simple; a dead end restarts the whole
//! sample. Dense requests (`k > (n − 1) / 2`) sample the sparser complement
//! and invert it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_RESTARTS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairingPlan {
    /// Unordered pairs stored as `(low, high)`, sorted ascending.
    pub pairs: Vec<(usize, usize)>,
    pub degree: usize,
    pub seed: u64,
}

impl PairingPlan {
    /// Number of pairs touching each index.
    pub fn degrees(&self, n: usize) -> Vec<usize> {
        let mut deg = vec![0; n];
        for &(a, b) in &self.pairs {
            deg[a] += 1;
            deg[b] += 1;
        }
        deg
    }
}

/// Samples a simple `k`-regular graph on `n` vertices from `seed`.
pub fn sample_pairing(n: usize, k: usize, seed: u64) -> Result<PairingPlan> {
    if n < 2 {
        return Err(Error::InvalidInput(format!("pairing needs n ≥ 2, got {n}")));
    }
    if k == 0 || k > n - 1 {
        return Err(Error::InvalidInput(format!(
            "pairing degree must lie in [1, {}], got {k}",
            n - 1
        )));
    }
    if (n * k) % 2 != 0 {
        return Err(Error::InvalidInput(format!(
            "n·k must be even for a k-regular pairing, got n={n}, k={k}"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let complement_degree = n - 1 - k;
    let pairs = if complement_degree < k {
        let sparse = sample_simple_regular(n, complement_degree, &mut rng)
            .ok_or(Error::SamplingFailed { n, k })?;
        let mut adjacent = vec![vec![false; n]; n];
        for (a, b) in sparse {
            adjacent[a][b] = true;
            adjacent[b][a] = true;
        }
        let mut dense = Vec::with_capacity(n * k / 2);
        for a in 0..n {
            for b in (a + 1)..n {
                if !adjacent[a][b] {
                    dense.push((a, b));
                }
            }
        }
        dense
    } else {
        sample_simple_regular(n, k, &mut rng).ok_or(Error::SamplingFailed { n, k })?
    };

    Ok(PairingPlan {
        pairs,
        degree: k,
        seed,
    })
}

fn sample_simple_regular(n: usize, k: usize, rng: &mut ChaCha8Rng) -> Option<Vec<(usize, usize)>> {
    if k == 0 {
        return Some(Vec::new());
    }
    let edges = n * k / 2;
    'restart: for _ in 0..MAX_RESTARTS {
        let mut remaining = vec![k as u64; n];
        let mut adjacent = vec![vec![false; n]; n];
        let mut pairs = Vec::with_capacity(edges);

        for _ in 0..edges {
            // Weight of vertex pair (a, b) = number of suitable point pairs.
            let mut total = 0u64;
            for a in 0..n {
                if remaining[a] == 0 {
                    continue;
                }
                for b in (a + 1)..n {
                    if !adjacent[a][b] {
                        total += remaining[a] * remaining[b];
                    }
                }
            }
            if total == 0 {
                continue 'restart;
            }
            let mut pick = rng.random_range(0..total);
            let mut chosen = None;
            'scan: for a in 0..n {
                if remaining[a] == 0 {
                    continue;
                }
                for b in (a + 1)..n {
                    if adjacent[a][b] {
                        continue;
                    }
                    let w = remaining[a] * remaining[b];
                    if pick < w {
                        chosen = Some((a, b));
                        break 'scan;
                    }
                    pick -= w;
                }
            }
            let (a, b) = chosen.expect("pick lies below total weight");
            remaining[a] -= 1;
            remaining[b] -= 1;
            adjacent[a][b] = true;
            adjacent[b][a] = true;
            pairs.push((a, b));
        }
        pairs.sort_unstable();
        return Some(pairs);
    }
    None
}
