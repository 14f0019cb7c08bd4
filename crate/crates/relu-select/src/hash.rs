//! The polynomial hash family `h_a(i) = a + Σⱼ aʲ·digitⱼ(i) mod p` over the
//! base-`p` digits of an index.

use crate::error::BuildError;
use crate::params::snapped_pow;

fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n % 2 == 0 {
        return n == 2;
    }
    let mut k = 3;
    while k * k <= n {
        if n % k == 0 {
            return false;
        }
        k += 2;
    }
    true
}

/// The least prime strictly greater than `t`.
pub fn smallest_prime_above(t: f64) -> u64 {
    assert!(t.is_finite() && t >= 0.0, "threshold must be finite and non-negative");
    let mut n = t.floor() as u64 + 1;
    while !is_prime(n) {
        n += 1;
    }
    n
}

/// Base-`p` digits of `i`, least significant first, exactly `n` of them.
pub fn base_p_digits(i: u64, p: u64, n: u32) -> Result<Vec<u64>, BuildError> {
    if p < 2 {
        return Err(BuildError::param("p", format!("{p} is not a valid base")));
    }
    if p.checked_pow(n).is_some_and(|cap| i >= cap) {
        return Err(BuildError::param("i", format!("{i} needs more than {n} digits in base {p}")));
    }
    let mut rest = i;
    Ok((0..n)
        .map(|_| {
            let digit = rest % p;
            rest /= p;
            digit
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct HashFamily {
    dprime: usize,
    exponent: f64,
    p: u64,
    n: u32,
}

impl HashFamily {
    /// The family on the domain `[d']` with `p` the least prime above
    /// `d'^{ε'}` and `n = ⌈1/ε'⌉` digits.
    pub fn new(dprime: usize, exponent: f64) -> Result<HashFamily, BuildError> {
        if dprime == 0 {
            return Err(BuildError::param("d'", "must be positive"));
        }
        if !(exponent > 0.0 && exponent < 1.0) {
            return Err(BuildError::param("epsilon'", format!("{exponent} is not in (0, 1)")));
        }
        let p = smallest_prime_above(snapped_pow(dprime, exponent));
        let n = (1.0 / exponent).ceil() as u32;
        Ok(HashFamily { dprime, exponent, p, n })
    }

    pub fn domain(&self) -> usize {
        self.dprime
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    pub fn prime(&self) -> u64 {
        self.p
    }

    pub fn digits(&self) -> u32 {
        self.n
    }

    /// Number of members, which is also the number of buckets.
    pub fn size(&self) -> usize {
        self.p as usize
    }

    /// Bucket of index `i ∈ [d']` (1-based) under member `a`.
    pub fn eval(&self, a: u64, i: u64) -> Result<u64, BuildError> {
        if a >= self.p {
            return Err(BuildError::param("a", format!("{a} is not below p = {}", self.p)));
        }
        if i == 0 || i > self.dprime as u64 {
            return Err(BuildError::param("i", format!("{i} is outside 1..={}", self.dprime)));
        }
        Ok(self.eval_unchecked(a, i))
    }

    fn eval_unchecked(&self, a: u64, i: u64) -> u64 {
        let p = self.p;
        let mut acc = a % p;
        let mut power = 1;
        let mut rest = i;
        for _ in 0..self.n {
            power = power * a % p;
            acc = (acc + power * (rest % p)) % p;
            rest /= p;
        }
        acc
    }

    /// Buckets of the coordinates `0..d'`, coordinate `j` hashed as `j + 1`.
    pub fn member_map(&self, a: u64) -> Vec<usize> {
        (1..=self.dprime as u64).map(|i| self.eval_unchecked(a, i) as usize).collect()
    }

    /// Smallest `a` whose member is injective on `indices` (1-based).
    pub fn find_collision_free(&self, indices: &[u64]) -> Option<u64> {
        let mut seen = vec![u32::MAX; self.p as usize];
        (0..self.p).find(|&a| {
            let tag = a as u32;
            indices.iter().all(|&i| {
                let b = self.eval_unchecked(a, i) as usize;
                let fresh = seen[b] != tag;
                seen[b] = tag;
                fresh
            })
        })
    }

    /// Number of members under which `i` and `j` collide.
    pub fn colliding_members(&self, i: u64, j: u64) -> usize {
        (0..self.p).filter(|&a| self.eval_unchecked(a, i) == self.eval_unchecked(a, j)).count()
    }

    /// Largest fraction of members under which a pair of distinct indices
    /// collides, by exhaustive enumeration.
    pub fn verify_universality(&self) -> f64 {
        let d = self.dprime as u64;
        let table: Vec<Vec<u64>> = (0..self.p).map(|a| (1..=d).map(|i| self.eval_unchecked(a, i)).collect()).collect();
        let mut worst = 0usize;
        for i in 0..d as usize {
            for j in i + 1..d as usize {
                let hits = table.iter().filter(|row| row[i] == row[j]).count();
                worst = worst.max(hits);
            }
        }
        worst as f64 / self.p as f64
    }

    /// `⌈1/ε'⌉ / d'^{ε'}`.
    pub fn universality_bound(&self) -> f64 {
        (1.0 / self.exponent).ceil() / snapped_pow(self.dprime, self.exponent)
    }
}

/// Smallest dimension for which a `(d, ε)`-sparse support is guaranteed a
/// collision-free member of the family at exponent `2ε + γ`.
pub fn existence_threshold(epsilon: f64, gamma: f64) -> f64 {
    (0.5 * (1.0 / (2.0 * epsilon + gamma)).ceil()).powf(1.0 / gamma)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SparseProfile {
    pub d: usize,
    pub epsilon: f64,
    pub nonzero_count: usize,
}

impl SparseProfile {
    pub fn of(x: &[f64], epsilon: f64) -> SparseProfile {
        SparseProfile { d: x.len(), epsilon, nonzero_count: x.iter().filter(|v| **v != 0.0).count() }
    }

    /// Largest admissible number of non-zero entries, `⌊d^ε⌋`.
    pub fn capacity(d: usize, epsilon: f64) -> usize {
        snapped_pow(d, epsilon).floor() as usize
    }

    pub fn is_sparse(&self) -> bool {
        self.nonzero_count <= SparseProfile::capacity(self.d, self.epsilon)
    }
}
