//! Integer parameters derived from real exponents, shared by the network
//! builders and the reference algorithms.

use crate::error::BuildError;

/// `d^e`, snapped to the nearest integer when within `1e-9` relative of it,
/// so that exact powers such as `512^{2/3}` are not spoiled by rounding.
pub fn snapped_pow(d: usize, e: f64) -> f64 {
    let v = (d as f64).powf(e);
    let r = v.round();
    if (v - r).abs() <= 1e-9 * r.max(1.0) {
        r
    } else {
        v
    }
}

pub fn pow_ceil(d: usize, e: f64) -> usize {
    snapped_pow(d, e).ceil() as usize
}

pub fn pow_floor(d: usize, e: f64) -> usize {
    snapped_pow(d, e).floor() as usize
}

/// `⌈d/2⌉`, the rank of the median.
pub fn median_rank(d: usize) -> usize {
    d.div_ceil(2)
}

fn floor_div(a: i64, b: i64) -> i64 {
    a.div_euclid(b)
}

fn ceil_div(a: i64, b: i64) -> i64 {
    -(-a).div_euclid(b)
}

/// `(⌊r·z/n − w⌋, ⌈r·z/n + w⌉)` in exact integer arithmetic.
pub fn rank_window(r: usize, n: usize, z: usize, w: usize) -> (i64, i64) {
    let (r, n, z, w) = (r as i64, n as i64, z as i64, w as i64);
    (floor_div(r * z - w * n, n), ceil_div(r * z + w * n, n))
}

/// Ranks `(max(⌊L⌋ + 1, 1), min(⌈R⌉ + 1, z + 2))` of the window ends inside
/// a sample of size `z` extended by the values 0 and 1.
pub fn padded_window(floor_l: i64, ceil_r: i64, z: usize) -> (usize, usize) {
    ((floor_l + 1).max(1) as usize, (ceil_r + 1).min(z as i64 + 2) as usize)
}

/// Per-iteration parameters of the four-round sparsification.
#[derive(Clone, Debug, PartialEq)]
pub struct Iteration {
    pub y: f64,
    pub z: usize,
    pub w: usize,
    /// Block length for rounds after the first.
    pub block: usize,
    /// Number of blocks sampled from.
    pub blocks: usize,
    /// Non-zero entries requested per block, `⌈d^{0.01}⌉`.
    pub per_block: usize,
}

impl Iteration {
    /// Entries requested from block `b` so that `z` are chosen in total.
    pub fn quota(&self, b: usize) -> usize {
        self.z.saturating_sub(b * self.per_block).min(self.per_block)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SparsifierSchedule {
    pub d: usize,
    pub exponents: [(f64, f64, f64); 4],
    pub y5_exponent: f64,
    pub block_exponent: f64,
    pub iterations: Vec<Iteration>,
}

impl SparsifierSchedule {
    pub const DEFAULT_EXPONENTS: [(f64, f64, f64); 4] =
        [(1.0, 0.5, 0.26), (0.76, 0.5, 0.26), (0.52, 0.5, 0.26), (0.28, 0.26, 0.14)];

    pub fn new(d: usize) -> Result<SparsifierSchedule, BuildError> {
        SparsifierSchedule::with_exponents(d, SparsifierSchedule::DEFAULT_EXPONENTS, 0.16)
    }

    pub fn with_exponents(
        d: usize,
        exponents: [(f64, f64, f64); 4],
        y5_exponent: f64,
    ) -> Result<SparsifierSchedule, BuildError> {
        if d < 2 {
            return Err(BuildError::param("d", "the sparsifier needs d ≥ 2"));
        }
        let block_exponent = 0.01;
        let per_block = pow_ceil(d, block_exponent);
        let spread = snapped_pow(d, block_exponent);
        let mut iterations = Vec::with_capacity(4);
        for (i, &(ye, ze, we)) in exponents.iter().enumerate() {
            let round = i + 1;
            let y = snapped_pow(d, ye);
            let z = pow_ceil(d, ze);
            let w = pow_floor(d, we);
            let block = (3f64.powi(round as i32) * snapped_pow(d, 1.0 + block_exponent) / y).ceil() as usize;
            let blocks = (z as f64 / spread).ceil() as usize;
            for (name, v) in [("z", z), ("w", w), ("block", block), ("blocks", blocks)] {
                if v < 1 {
                    return Err(BuildError::degenerate(format!("{name}_{round}"), format!("is {v} at d = {d}")));
                }
            }
            if z > d {
                return Err(BuildError::degenerate(format!("z_{round}"), format!("{z} exceeds d = {d}")));
            }
            if blocks * per_block < z {
                return Err(BuildError::degenerate(
                    format!("blocks_{round}"),
                    format!("{blocks} blocks of {per_block} cannot hold {z} samples"),
                ));
            }
            iterations.push(Iteration { y, z, w, block, blocks, per_block });
        }
        Ok(SparsifierSchedule { d, exponents, y5_exponent, block_exponent, iterations })
    }

    pub fn y5(&self) -> f64 {
        snapped_pow(self.d, self.y5_exponent)
    }

    /// `y_{i}` for `i = 1..=5`.
    pub fn y(&self, i: usize) -> f64 {
        if i == 5 {
            self.y5()
        } else {
            self.iterations[i - 1].y
        }
    }

    /// Index ranges of the blocks sampled in round `i ≥ 2`, paired with their
    /// quotas. Blocks are cut at `d`; blocks with a zero quota are skipped.
    pub fn sample_blocks(&self, i: usize) -> Vec<(std::ops::Range<usize>, usize)> {
        let it = &self.iterations[i - 1];
        (0..it.blocks)
            .filter_map(|b| {
                let q = it.quota(b);
                if q == 0 {
                    return None;
                }
                let start = (b * it.block).min(self.d);
                let end = ((b + 1) * it.block).min(self.d);
                Some((start..end, q))
            })
            .collect()
    }
}

/// Parameters of the two-round sparsification for the maximum.
#[derive(Clone, Debug, PartialEq)]
pub struct MaxSchedule {
    pub d: usize,
    /// First-round sample: the first `z1` entries.
    pub z1: usize,
    /// Second-round sample size.
    pub z2: usize,
    pub per_block: usize,
    /// Second-round blocks tile `[0, d)`.
    pub blocks: Vec<std::ops::Range<usize>>,
    pub hash_exponent: f64,
}

impl MaxSchedule {
    pub fn new(d: usize) -> Result<MaxSchedule, BuildError> {
        if d < 16 {
            return Err(BuildError::param("d", "the maximum pipeline needs d ≥ 16"));
        }
        let z1 = pow_ceil(d, 0.5);
        let z2 = pow_ceil(d, 0.4);
        let per_block = pow_ceil(d, 0.01);
        let count = z2.div_ceil(per_block);
        let len = d.div_ceil(count);
        let blocks = (0..count).map(|b| (b * len).min(d)..((b + 1) * len).min(d)).collect();
        Ok(MaxSchedule { d, z1, z2, per_block, blocks, hash_exponent: 0.5 })
    }

    pub fn quota(&self, b: usize) -> usize {
        self.z2.saturating_sub(b * self.per_block).min(self.per_block)
    }
}

/// Block layout of the depth-5 construction.
#[derive(Clone, Debug, PartialEq)]
pub struct Depth5Layout {
    pub d: usize,
    pub block: usize,
    pub blocks: Vec<std::ops::Range<usize>>,
    /// Ranks kept from every block but the last.
    pub ranks: std::ops::RangeInclusive<usize>,
}

impl Depth5Layout {
    pub fn new(d: usize, gamma: f64) -> Result<Depth5Layout, BuildError> {
        if d < 8 {
            return Err(BuildError::param("d", "the depth-5 construction needs d ≥ 8"));
        }
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(BuildError::param("gamma", format!("{gamma} is not in (0, 1)")));
        }
        let block = pow_ceil(d, 2.0 / 3.0);
        let half = snapped_pow(d, 2.0 / 3.0) / 2.0;
        let spread = snapped_pow(d, 1.0 / 3.0 + gamma);
        let lo = ((half - spread).floor() as i64).max(1) as usize;
        let hi = ((half + spread).ceil() as usize).min(block);
        let count = d.div_ceil(block);
        let blocks = (0..count).map(|b| b * block..((b + 1) * block).min(d)).collect();
        Ok(Depth5Layout { d, block, blocks, ranks: lo.min(hi)..=hi })
    }
}
