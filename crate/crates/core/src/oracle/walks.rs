use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{AffinityError, Result};
use crate::graph::Graph;

/// Monte-Carlo hitting-time estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkEstimate {
    pub mean: f64,
    /// Sample standard deviation over `√num_walks`.
    pub stderr: f64,
    pub num_walks: usize,
    pub seed: u64,
    /// Walks stopped at `max_steps` before reaching the target; they are
    /// included in `mean` at `max_steps`.
    pub truncated: usize,
}

/// Simulates `num_walks` weighted random walks from `u` until they first
/// reach `v`. `max_steps` defaults to `100·n²`. Walk `i` draws from a
/// generator keyed by `(seed, i)`.
pub fn mc_hitting_time(
    g: &Graph,
    u: usize,
    v: usize,
    num_walks: usize,
    max_steps: Option<usize>,
    seed: u64,
) -> Result<WalkEstimate> {
    g.check_node(u)?;
    g.check_node(v)?;
    if !g.same_component(u, v) {
        return Err(AffinityError::CrossComponent { u, v });
    }
    if num_walks == 0 {
        return Err(AffinityError::InvalidConfig("num_walks must be positive".into()));
    }
    let n = g.num_nodes();
    let cap = max_steps.unwrap_or(100 * n * n);

    // per-node cumulative weights for inverse-CDF sampling
    let tables: Vec<(Vec<usize>, Vec<f64>)> = (0..n)
        .map(|x| {
            let mut acc = 0.0;
            g.neighbors(x)
                .map(|(y, w, _)| {
                    acc += w;
                    (y, acc)
                })
                .unzip()
        })
        .collect();

    let walk = |i: usize| -> (usize, bool) {
        if u == v {
            return (0, false);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let mut at = u;
        for step in 1..=cap {
            let (nbrs, cum) = &tables[at];
            let r = rng.random::<f64>() * cum[cum.len() - 1];
            let idx = cum.partition_point(|&c| c <= r).min(nbrs.len() - 1);
            at = nbrs[idx];
            if at == v {
                return (step, false);
            }
        }
        (cap, true)
    };

    let results: Vec<(usize, bool)> = (0..num_walks).into_par_iter().map(walk).collect();
    let truncated = results.iter().filter(|r| r.1).count();
    let k = num_walks as f64;
    let mean = results.iter().map(|r| r.0 as f64).sum::<f64>() / k;
    let var =
        if num_walks > 1 { results.iter().map(|r| (r.0 as f64 - mean).powi(2)).sum::<f64>() / (k - 1.0) } else { 0.0 };
    Ok(WalkEstimate { mean, stderr: (var / k).sqrt(), num_walks, seed, truncated })
}
