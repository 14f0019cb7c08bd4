use super::{check_depth, stage_name, ConstructionKind, ConstructionParams, ProbedNetwork};
use crate::circuit::{Circuit, Wire};
use crate::error::BuildError;
use crate::hash::{existence_threshold, HashFamily};
use crate::network::ReluNetwork;
use crate::params::{median_rank, padded_window, pow_ceil, rank_window, SparsifierSchedule};
use crate::primitives::{gates, Delta};

/// Largest number of hash neurons a hashing stage may use.
pub const HASHING_NEURON_BUDGET: usize = 1 << 26;

type Probes = Vec<(String, Vec<Wire>)>;

fn probe(probes: &mut Probes, iteration: usize, field: &str, wires: Vec<Wire>) {
    probes.push((stage_name(iteration, field), wires));
}

fn k(v: f64) -> Wire {
    Wire::constant(v)
}

/// Four sparsification iterations on the inputs `x1` (level 0); returns the
/// filtered vector on level 33.
pub(crate) fn sparsify(
    c: &mut Circuit,
    probes: &mut Probes,
    x1: &[Wire],
    schedule: &SparsifierSchedule,
    delta: Delta,
) -> Vec<Wire> {
    let d = schedule.d;
    let inv = delta.inv();
    let target = median_rank(d);

    let it = &schedule.iterations[0];
    let (floor_l, ceil_r) = rank_window(target, d, it.z, it.w);
    let (lo, hi) = padded_window(floor_l, ceil_r, it.z);
    let sample = x1[..it.z].to_vec();
    let mut padded = sample.clone();
    padded.extend([k(0.0), k(1.0)]);
    let e = gates::rank_select(c, &padded, &[k(lo as f64), k(hi as f64)], inv);
    let next = gates::filter_at(c, 3, x1, &e[1], &e[0], inv);
    let mut xi: Vec<Wire> = next.iter().map(|w| c.share(w)).collect();
    probe(probes, 1, "sample", sample);
    probe(probes, 1, "rank", vec![k(target as f64)]);
    probe(probes, 1, "nonzeros", vec![k(d as f64)]);
    probe(probes, 1, "floor_l", vec![k(floor_l as f64)]);
    probe(probes, 1, "ceil_r", vec![k(ceil_r as f64)]);
    probe(probes, 1, "e_minus", vec![e[0].clone()]);
    probe(probes, 1, "e_plus", vec![e[1].clone()]);
    probe(probes, 1, "next", xi.clone());

    for i in 2..=4 {
        let b = 3 + 10 * (i - 2);
        let it = &schedule.iterations[i - 1];
        let (z, w) = (it.z, it.w as f64);

        let mut sample = Vec::with_capacity(z);
        for (range, quota) in schedule.sample_blocks(i) {
            if range.is_empty() {
                sample.extend((0..quota).map(|_| k(0.0)));
            } else {
                sample.extend(gates::shortlist(c, &xi[range], &k(1.0), &k(0.0), quota, delta.value()));
            }
        }
        let sample: Vec<Wire> = sample.iter().map(|s| c.share(s)).collect();

        let (r, nz) = gates::rank_compute_at(c, b + 4, x1, &xi, &sample[0], target as f64, inv);
        let scaled = gates::rank_scale_at(c, b + 5, &r, &nz, d, z as f64);
        let up = gates::ceiling_at(c, b + 6, &scaled, 0, z as i64, d as f64);
        let down = gates::ceiling_at(c, b + 6, &scaled.scaled(-1.0), -(z as i64), 0, d as f64);
        let floor_l = c.share(&down.scaled(-1.0).plus(-w));
        let ceil_r = c.share(&up.plus(w));
        let lo = gates::max_at(c, b + 7, &floor_l.plus(1.0), &k(1.0));
        let hi = gates::min_at(c, b + 7, &ceil_r.plus(1.0), &k(z as f64 + 2.0));
        let mut padded = sample.clone();
        padded.extend([k(0.0), k(1.0)]);
        let e = gates::rank_select(c, &padded, &[lo, hi], inv);
        let next = gates::filter_at(c, b + 10, &xi, &e[1], &e[0], inv);
        let next: Vec<Wire> = next.iter().map(|w| c.share(w)).collect();

        probe(probes, i, "sample", sample);
        probe(probes, i, "rank", vec![r]);
        probe(probes, i, "nonzeros", vec![nz]);
        probe(probes, i, "floor_l", vec![floor_l]);
        probe(probes, i, "ceil_r", vec![ceil_r]);
        probe(probes, i, "e_minus", vec![e[0].clone()]);
        probe(probes, i, "e_plus", vec![e[1].clone()]);
        probe(probes, i, "next", next.clone());
        xi = next;
    }
    xi
}

fn sparsifier_circuit(schedule: &SparsifierSchedule, delta: Delta) -> (Circuit, Probes, Vec<Wire>) {
    let mut c = Circuit::new(schedule.d);
    let x1 = c.inputs(0..schedule.d);
    let mut probes = Vec::new();
    let out = sparsify(&mut c, &mut probes, &x1, schedule, delta);
    (c, probes, out)
}

pub fn build_sparsifier_probed(
    d: usize,
    delta: Delta,
    schedule: &SparsifierSchedule,
) -> Result<ProbedNetwork, BuildError> {
    if schedule.d != d {
        return Err(BuildError::param("schedule", format!("built for d = {}, not {d}", schedule.d)));
    }
    let (c, probes, out) = sparsifier_circuit(schedule, delta);
    let mut built = c.finish(&out, 33)?;
    check_depth(&built.net, "sparsifier", 33)?;
    built.net.set_metadata("construction", "sparsifier");
    built.net.set_metadata("d", d.to_string());
    built.net.set_metadata("delta_effective", format!("{:e}", delta.value()));
    Ok(ProbedNetwork::new(built, probes))
}

/// The 33-hidden-layer sparsifier: outputs `x` with every entry outside the
/// final value window set to zero.
pub fn build_sparsifier(d: usize, delta: Delta, schedule: &SparsifierSchedule) -> Result<ReluNetwork, BuildError> {
    Ok(build_sparsifier_probed(d, delta, schedule)?.into_net())
}

/// Sizes of a hashing stage on `d` coordinates at sparsity exponent
/// `epsilon` and slack `gamma`.
pub(crate) struct HashingPlan {
    pub family: HashFamily,
    pub outputs: usize,
}

impl HashingPlan {
    pub fn new(d: usize, epsilon: f64, gamma: f64) -> Result<HashingPlan, BuildError> {
        if !(epsilon > 0.0) || !(gamma > 0.0) {
            return Err(BuildError::param("epsilon", "sparsity and slack exponents must be positive"));
        }
        let exponent = 2.0 * epsilon + gamma;
        let threshold = existence_threshold(epsilon, gamma);
        if (d as f64) < threshold {
            return Err(BuildError::param("d", format!("{d} is below the hashing threshold {threshold:.3}")));
        }
        if exponent >= 1.0 {
            let neurons = (d as f64).powf(2.0 * exponent);
            return Err(BuildError::degenerate(
                "p",
                format!(
                    "2ε + γ = {exponent:.4} ≥ 1 needs a prime above {:.3e}, about {neurons:.3e} hash neurons, beyond the budget of {HASHING_NEURON_BUDGET}",
                    (d as f64).powf(exponent)
                ),
            ));
        }
        let family = HashFamily::new(d, exponent)?;
        let p = family.size();
        if p.saturating_mul(p) > HASHING_NEURON_BUDGET {
            return Err(BuildError::degenerate(
                "p",
                format!("p² = {} hash neurons exceed the budget of {HASHING_NEURON_BUDGET}", p * p),
            ));
        }
        let outputs = pow_ceil(d, epsilon).min(p);
        Ok(HashingPlan { family, outputs })
    }
}

/// Hashing stage on `xs` (all on one level): the non-zero entries of `xs`
/// in increasing order, then zeros, six hidden layers higher.
pub(crate) fn hash_compact(c: &mut Circuit, xs: &[Wire], plan: &HashingPlan, inv: f64) -> Vec<Wire> {
    let refs: Vec<&Wire> = xs.iter().collect();
    let base = c.base(&refs);
    let p = plan.family.size();
    let mut buckets = Vec::with_capacity(p * p);
    for a in 0..p as u64 {
        buckets.extend(gates::hashing_at(c, base + 1, xs, &plan.family.member_map(a), p));
    }
    let s = gates::nzc_at(c, base + 1, xs, inv);
    let block = gates::block_extract(c, &buckets, &s, p, inv);
    let block: Vec<Wire> = block.iter().map(|w| c.share(w)).collect();
    let ranks: Vec<Wire> = (1..=plan.outputs).map(|i| s.scaled(-1.0).plus((p + i) as f64)).collect();
    gates::rank_select(c, &block, &ranks, inv)
}

/// The six-hidden-layer network compacting a `(d, ε)`-sparse vector into
/// `⌈d^ε⌉` entries.
pub fn build_hashing_stage(d: usize, delta: Delta, epsilon: f64, gamma: f64) -> Result<ReluNetwork, BuildError> {
    let plan = HashingPlan::new(d, epsilon, gamma)?;
    let mut c = Circuit::new(d);
    let xs = c.inputs(0..d);
    let out = hash_compact(&mut c, &xs, &plan, delta.inv());
    let mut net = c.finish(&out, 6)?.net;
    check_depth(&net, "hashing stage", 6)?;
    net.set_metadata("construction", "hashing_stage");
    net.set_metadata("d", d.to_string());
    net.set_metadata("epsilon", epsilon.to_string());
    net.set_metadata("gamma", gamma.to_string());
    net.set_metadata("prime", plan.family.prime().to_string());
    net.set_metadata("delta_effective", format!("{:e}", delta.value()));
    Ok(net)
}

/// Sparsity exponent assumed by the hashing stage of the median pipeline.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum HashingExponent {
    /// `ε = y'₅ = 0.16`.
    Reduced,
    /// `ε = 0.16 + 4·log_d 6`, which covers `6⁴·d^{0.16}` survivors.
    Annotated,
    Fixed(f64),
}

impl HashingExponent {
    pub fn value(self, d: usize) -> f64 {
        match self {
            HashingExponent::Reduced => 0.16,
            HashingExponent::Annotated => 0.16 + 4.0 * 6f64.ln() / (d as f64).ln(),
            HashingExponent::Fixed(e) => e,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearOptions {
    pub hashing: HashingExponent,
    pub gamma: f64,
}

impl Default for LinearOptions {
    fn default() -> LinearOptions {
        LinearOptions { hashing: HashingExponent::Reduced, gamma: 0.18 }
    }
}

pub fn build_linear_median(d: usize, epsilon: f64) -> Result<ReluNetwork, BuildError> {
    build_linear_median_with(d, epsilon, &LinearOptions::default())
}

pub fn build_linear_median_with(d: usize, epsilon: f64, options: &LinearOptions) -> Result<ReluNetwork, BuildError> {
    Ok(build_linear_median_probed(d, epsilon, options)?.into_net())
}

/// The 45-hidden-layer median: sparsifier, hashing stage, rank of the median
/// among the survivors, selection and a clamp to `[0, 1]`. Probes cover the
/// sparsifier iterations plus `hashed`, `rank`, `nonzeros` and `pivot`.
pub fn build_linear_median_probed(
    d: usize,
    epsilon: f64,
    options: &LinearOptions,
) -> Result<ProbedNetwork, BuildError> {
    let params = ConstructionParams::new(ConstructionKind::LinearWidth, d, epsilon, options.gamma)?;
    let schedule = SparsifierSchedule::new(d)?;
    let sparsity = options.hashing.value(d);
    let plan = HashingPlan::new(d, sparsity, options.gamma)?;
    let delta = params.effective_delta;
    let inv = delta.inv();
    let m = plan.outputs;

    let (mut c, mut probes, sparse) = sparsifier_circuit(&schedule, delta);
    let x1 = c.inputs(0..d);
    let hashed = hash_compact(&mut c, &sparse, &plan, inv);
    let hashed: Vec<Wire> = hashed.iter().map(|w| c.share(w)).collect();
    let pivot = gates::rank_select(&mut c, &hashed, &[k(m as f64)], inv).remove(0);
    let (r, nz) = gates::rank_compute_at(&mut c, 42, &x1, &hashed, &pivot, median_rank(d) as f64, inv);
    let rank = c.sum(&[(1.0, &r), (-1.0, &nz)], m as f64);
    let v = gates::rank_select(&mut c, &hashed, &[rank], inv).remove(0);
    let hi = c.relu(&v, 45);
    let lo = c.relu(&v.plus(-1.0), 45);
    let out = c.sub(&hi, &lo);
    probes.push(("hashed".into(), hashed));
    probes.push(("pivot".into(), vec![pivot]));
    probes.push(("rank".into(), vec![r]));
    probes.push(("nonzeros".into(), vec![nz]));

    let built = c.finish(&[out], 45)?;
    let mut probed = ProbedNetwork::new(built, probes);
    check_depth(probed.net(), "linear", 45)?;
    let net = probed.net_mut();
    params.echo(net);
    net.set_metadata("hashing_epsilon", format!("{sparsity}"));
    net.set_metadata("prime", plan.family.prime().to_string());
    net.set_metadata("survivors", m.to_string());
    Ok(probed)
}
