//! The thirteen elementary sub-networks, each returned with its size contract.

pub(crate) mod gates;

use crate::circuit::{Circuit, CircuitNet, Wire};
use crate::error::BuildError;
use crate::network::{NetworkStats, ReluNetwork};

/// Separation and boundedness parameter, `0 < δ ≤ 1`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct Delta(f64);

impl Delta {
    pub fn new(value: f64) -> Result<Delta, BuildError> {
        if !(value > 0.0 && value <= 1.0) {
            return Err(BuildError::param("delta", format!("{value} is not in (0, 1]")));
        }
        if !(1.0 / value).is_finite() {
            return Err(BuildError::Precision(format!("1/δ overflows for δ = {value:e}")));
        }
        Ok(Delta(value))
    }

    /// The smallest power of two that is at least `value`.
    pub fn power_of_two_at_least(value: f64) -> Result<Delta, BuildError> {
        let d = Delta::new(value)?;
        let mut p = 1.0f64;
        while p / 2.0 >= d.0 {
            p /= 2.0;
        }
        Delta::new(p)
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn inv(self) -> f64 {
        1.0 / self.0
    }
}

/// Bounds a built network must satisfy.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GadgetContract {
    pub declared_width_bound: usize,
    pub declared_hidden_layers: usize,
    pub declared_weight_bound: f64,
}

impl GadgetContract {
    pub fn check(&self, stats: &NetworkStats) -> Result<(), String> {
        let mut problems = Vec::new();
        if stats.width > self.declared_width_bound {
            problems.push(format!("width {} > {}", stats.width, self.declared_width_bound));
        }
        if stats.hidden_layers() != self.declared_hidden_layers {
            problems.push(format!("hidden layers {} != {}", stats.hidden_layers(), self.declared_hidden_layers));
        }
        if stats.max_abs_weight > self.declared_weight_bound * (1.0 + 1e-12) {
            problems.push(format!("max |weight| {:e} > {:e}", stats.max_abs_weight, self.declared_weight_bound));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(problems.join(", "))
        }
    }
}

#[derive(Clone, Debug)]
pub struct Gadget {
    pub net: ReluNetwork,
    pub contract: GadgetContract,
}

impl Gadget {
    pub fn evaluate(&self, x: &[f64]) -> Vec<f64> {
        self.net.evaluate(x).expect("input matches the gadget")
    }
}

pub(crate) fn finish(
    c: Circuit,
    outputs: &[Wire],
    name: &str,
    contract: GadgetContract,
) -> Result<(CircuitNet, GadgetContract), BuildError> {
    let mut built = c.finish(outputs, contract.declared_hidden_layers)?;
    contract
        .check(&built.net.stats())
        .map_err(|e| BuildError::Contract(format!("{name}: {e}")))?;
    built.net.set_metadata("construction", name);
    Ok((built, contract))
}

fn gadget(c: Circuit, outputs: &[Wire], name: &str, contract: GadgetContract) -> Result<Gadget, BuildError> {
    let (built, contract) = finish(c, outputs, name, contract)?;
    Ok(Gadget { net: built.net, contract })
}

fn contract(width: usize, hidden: usize, weight: f64) -> GadgetContract {
    GadgetContract { declared_width_bound: width, declared_hidden_layers: hidden, declared_weight_bound: weight }
}

fn positive(name: &'static str, v: usize) -> Result<(), BuildError> {
    if v == 0 {
        return Err(BuildError::param(name, "must be positive"));
    }
    Ok(())
}

/// `max(x₁, x₂)`.
pub fn build_max() -> Result<Gadget, BuildError> {
    let mut c = Circuit::new(2);
    let (a, b) = (c.input(0), c.input(1));
    let m = gates::max_at(&mut c, 1, &a, &b);
    gadget(c, &[m], "max", contract(3, 1, 1.0))
}

/// Ramp comparison: 1 when `x₁ ≥ x₂ + δ`, 0 when `x₁ ≤ x₂`.
pub fn build_comparison(delta: Delta) -> Result<Gadget, BuildError> {
    let mut c = Circuit::new(2);
    let (a, b) = (c.input(0), c.input(1));
    let out = gates::cmp_at(&mut c, 1, &a, &b, delta.inv(), 0.0);
    gadget(c, &[out], "comparison", contract(2, 1, delta.inv()))
}

pub fn build_nonzero_counter(delta: Delta, dprime: usize) -> Result<Gadget, BuildError> {
    positive("d'", dprime)?;
    let mut c = Circuit::new(dprime);
    let xs = c.inputs(0..dprime);
    let out = gates::nzc_at(&mut c, 1, &xs, delta.inv());
    gadget(c, &[out], "nonzero_counter", contract(2 * dprime, 1, delta.inv()))
}

/// Inputs `[x…, u, ℓ]`.
pub fn build_masking(delta: Delta, dprime: usize) -> Result<Gadget, BuildError> {
    positive("d'", dprime)?;
    let mut c = Circuit::new(dprime + 2);
    let xs = c.inputs(0..dprime);
    let (u, l) = (c.input(dprime), c.input(dprime + 1));
    let out = gates::mask_at(&mut c, 1, &xs, &u, &l, delta.inv());
    gadget(c, &out, "masking", contract(4 * dprime, 1, delta.inv()))
}

/// Inputs `[x…, u, ℓ]`.
pub fn build_filtering(delta: Delta, dprime: usize) -> Result<Gadget, BuildError> {
    positive("d'", dprime)?;
    let mut c = Circuit::new(dprime + 2);
    let xs = c.inputs(0..dprime);
    let (u, l) = (c.input(dprime), c.input(dprime + 1));
    let out = gates::filter_at(&mut c, 1, &xs, &u, &l, delta.inv());
    gadget(c, &out, "filtering", contract(4 * dprime, 1, delta.inv() + 1.0))
}

/// Inputs `[x, s]`; output `x·1{s = 0}`.
pub fn build_indicator_product() -> Result<Gadget, BuildError> {
    let mut c = Circuit::new(2);
    let (x, s) = (c.input(0), c.input(1));
    let out = gates::ifp_at(&mut c, 1, &x, &s);
    gadget(c, &[out], "indicator_product", contract(4, 1, 1.0))
}

fn rank_selection_contract(delta: Delta, dprime: usize, p: usize) -> GadgetContract {
    let width = (2 * dprime * dprime + 2 * dprime + 2 * p).max(4 * p * dprime);
    contract(width, 2, delta.inv().max(dprime as f64))
}

/// Rank selection with the ranks folded into biases. Inputs `x`.
pub fn build_rank_selection(delta: Delta, dprime: usize, ranks: &[usize]) -> Result<Gadget, BuildError> {
    positive("d'", dprime)?;
    if ranks.is_empty() {
        return Err(BuildError::param("ranks", "at least one rank is needed"));
    }
    if let Some(&r) = ranks.iter().find(|&&r| r == 0 || r > dprime) {
        return Err(BuildError::param("ranks", format!("rank {r} is outside 1..={dprime}")));
    }
    let mut c = Circuit::new(dprime);
    let xs = c.inputs(0..dprime);
    let rs: Vec<Wire> = ranks.iter().map(|&r| Wire::constant(r as f64)).collect();
    let out = gates::rank_select(&mut c, &xs, &rs, delta.inv());
    gadget(c, &out, "rank_selection", rank_selection_contract(delta, dprime, ranks.len()))
}

/// Rank selection reading its `p` ranks as inputs. Inputs `[x…, r₁…r_p]`.
pub fn build_rank_selection_runtime(delta: Delta, dprime: usize, p: usize) -> Result<Gadget, BuildError> {
    positive("d'", dprime)?;
    positive("p", p)?;
    let mut c = Circuit::new(dprime + p);
    let xs = c.inputs(0..dprime);
    let rs = c.inputs(dprime..dprime + p);
    let out = gates::rank_select(&mut c, &xs, &rs, delta.inv());
    let mut k = rank_selection_contract(delta, dprime, p);
    k.declared_weight_bound = delta.inv().max(2.0);
    gadget(c, &out, "rank_selection_runtime", k)
}

/// Inputs `[x…, u, ℓ]`; outputs the first `p` non-zero entries in `[ℓ, u]`.
pub fn build_nonzero_shortlist(delta: Delta, dprime: usize, p: usize) -> Result<Gadget, BuildError> {
    positive("d'", dprime)?;
    positive("p", p)?;
    let mut c = Circuit::new(dprime + 2);
    let xs = c.inputs(0..dprime);
    let (u, l) = (c.input(dprime), c.input(dprime + 1));
    let out = gates::shortlist(&mut c, &xs, &u, &l, p, delta.value());
    let k = contract(4 * (p + 2) * dprime + 8, 3, (2.0 * delta.inv()).max(p as f64));
    gadget(c, &out, "nonzero_shortlist", k)
}

/// Inputs `[x…, y…, e]`. The constant of the defining formula is `target`,
/// which is `⌈d'/2⌉` for the median.
pub fn build_rank_computing(delta: Delta, dprime: usize, dsecond: usize, target: usize) -> Result<Gadget, BuildError> {
    positive("d'", dprime)?;
    positive("d''", dsecond)?;
    let mut c = Circuit::new(dprime + dsecond + 1);
    let xs = c.inputs(0..dprime);
    let ys = c.inputs(dprime..dprime + dsecond);
    let e = c.input(dprime + dsecond);
    let (r, _) = gates::rank_compute_at(&mut c, 1, &xs, &ys, &e, target as f64, delta.inv());
    let bias = (target as f64 - dsecond as f64).abs();
    let k = contract(2 * dprime + 4 * dsecond, 1, delta.inv().max(bias));
    gadget(c, &[r], "rank_computing", k)
}

/// Inputs `[x…, r]`; output `r·b / |x^{≠0}|`.
pub fn build_rank_scaling(delta: Delta, dprime: usize, b: usize) -> Result<Gadget, BuildError> {
    positive("d'", dprime)?;
    positive("b", b)?;
    let mut c = Circuit::new(dprime + 1);
    let xs = c.inputs(0..dprime);
    let r = c.input(dprime);
    let count = gates::nzc_at(&mut c, 1, &xs, delta.inv());
    let out = gates::rank_scale_at(&mut c, 2, &r, &count, dprime, b as f64);
    let k = contract(4 * dprime, 2, delta.inv().max((dprime * b).max(dprime + 1) as f64));
    gadget(c, &[out], "rank_scaling", k)
}

/// `⌈x⌉` for rationals in `[−d', d']` with denominator at most `d'`.
pub fn build_ceiling(dprime: usize) -> Result<Gadget, BuildError> {
    positive("d'", dprime)?;
    let mut c = Circuit::new(1);
    let x = c.input(0);
    let d = dprime as f64;
    let out = gates::ceiling_at(&mut c, 1, &x, -(dprime as i64), dprime as i64 + 1, d);
    gadget(c, &[out], "ceiling", contract(4 * (dprime + 1), 1, d * (d + 1.0)))
}

/// Bucket sums for the index map `h: [d'] → [p']` (0-based buckets).
pub fn build_hashing(h: &[usize], buckets: usize) -> Result<Gadget, BuildError> {
    positive("d'", h.len())?;
    positive("p'", buckets)?;
    if let Some((j, &b)) = h.iter().enumerate().find(|(_, &b)| b >= buckets) {
        return Err(BuildError::param("h", format!("index {j} maps to bucket {b} of {buckets}")));
    }
    let mut c = Circuit::new(h.len());
    let xs = c.inputs(0..h.len());
    let out = gates::hashing_at(&mut c, 1, &xs, h, buckets);
    gadget(c, &out, "hashing", contract(buckets, 1, 1.0))
}

/// Inputs `[x…, s]` with `x` made of `q` blocks of length `p`.
pub fn build_block_extraction(delta: Delta, p: usize, q: usize) -> Result<Gadget, BuildError> {
    positive("p", p)?;
    positive("q", q)?;
    let mut c = Circuit::new(p * q + 1);
    let xs = c.inputs(0..p * q);
    let s = c.input(p * q);
    let out = gates::block_extract(&mut c, &xs, &s, p, delta.inv());
    let k = contract(4 * p * q + 4 * q + 4, 3, delta.inv());
    gadget(c, &out, "block_extraction", k)
}
