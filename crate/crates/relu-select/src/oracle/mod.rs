//! Brute-force order statistics and reference runs of the probabilistic
//! selection algorithms.

mod linear;
mod max;

pub use linear::{run_algorithm4, Halt, IterationTrace, TraceRecord};
pub use max::{run_algorithm1_2_max, MaxRun};

use rand::Rng;
use thiserror::Error;

use crate::params::{median_rank, Depth5Layout};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("rank {k} is outside 1..={len}")]
    RankOutOfRange { k: usize, len: usize },
    #[error("empty input")]
    Empty,
}

fn sorted(x: &[f64]) -> Vec<f64> {
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// The `k`-th smallest entry, `1 ≤ k ≤ len`.
pub fn rank_k(x: &[f64], k: usize) -> Result<f64, OracleError> {
    if k == 0 || k > x.len() {
        return Err(OracleError::RankOutOfRange { k, len: x.len() });
    }
    Ok(sorted(x)[k - 1])
}

/// `R_{⌈d/2⌉}(x)`.
pub fn median(x: &[f64]) -> Result<f64, OracleError> {
    if x.is_empty() {
        return Err(OracleError::Empty);
    }
    rank_k(x, median_rank(x.len()))
}

pub fn max(x: &[f64]) -> Result<f64, OracleError> {
    x.iter().copied().reduce(f64::max).ok_or(OracleError::Empty)
}

/// Every non-zero entry lies in `[δ, 1 − δ]` and non-zero entries differ
/// pairwise by at least `δ`.
pub fn is_delta_separated(x: &[f64], delta: f64) -> bool {
    let nz: Vec<f64> = sorted(&x.iter().copied().filter(|v| *v != 0.0).collect::<Vec<_>>());
    if nz.iter().any(|&v| v < delta || v > 1.0 - delta) {
        return false;
    }
    nz.windows(2).all(|w| w[1] - w[0] >= delta)
}

/// Whether `x` has no zero entry and is `δ`-separated.
pub fn is_good_input(x: &[f64], delta: f64) -> bool {
    x.iter().all(|v| *v != 0.0) && is_delta_separated(x, delta)
}

/// Fraction of uniform draws from `[0, 1]^d` that are not entirely non-zero
/// and `δ`-separated.
pub fn separation_probability_check(d: usize, delta: f64, trials: usize, rng: &mut impl Rng) -> f64 {
    if trials == 0 {
        return 0.0;
    }
    let mut x = vec![0.0; d];
    let mut bad = 0usize;
    for _ in 0..trials {
        x.iter_mut().for_each(|v| *v = rng.gen::<f64>());
        if delta > 0.0 && !is_good_input(&x, delta) {
            bad += 1;
        }
    }
    bad as f64 / trials as f64
}

/// Reference run of the block-window median algorithm behind the depth-5
/// network.
#[derive(Clone, Debug, PartialEq)]
pub struct Depth5Run {
    /// Some candidate equals the median.
    pub success: bool,
    pub candidates: Vec<f64>,
    /// The candidate beaten by exactly `⌈d/2⌉ − 1` entries, if any.
    pub result: Option<f64>,
}

pub fn run_algorithm3(x: &[f64], gamma: f64) -> Result<Depth5Run, crate::BuildError> {
    let layout = Depth5Layout::new(x.len(), gamma)?;
    let last = layout.blocks.len() - 1;
    let mut candidates = Vec::new();
    for (b, range) in layout.blocks.iter().enumerate() {
        let block = sorted(&x[range.clone()]);
        if b == last {
            candidates.extend_from_slice(&x[range.clone()]);
        } else {
            candidates.extend(layout.ranks.clone().map(|r| block[r - 1]));
        }
    }
    let target = median_rank(x.len()) - 1;
    let med = median(x).expect("layout guarantees a non-empty input");
    let result = candidates.iter().copied().find(|&y| x.iter().filter(|&&v| v < y).count() == target);
    Ok(Depth5Run { success: candidates.contains(&med), candidates, result })
}
