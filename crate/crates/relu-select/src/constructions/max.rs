use super::check_depth;
use crate::circuit::{Circuit, Wire};
use crate::error::BuildError;
use crate::hash::HashFamily;
use crate::network::ReluNetwork;
use crate::params::MaxSchedule;
use crate::primitives::{gates, Delta};

/// Maximum of `x ∈ [0, 1]^d` with fifteen hidden layers: two rounds that
/// zero every entry below the maximum of a sample, then the hashing step and
/// a top-rank selection.
pub fn build_max_linear(d: usize, delta: Delta) -> Result<ReluNetwork, BuildError> {
    let schedule = MaxSchedule::new(d)?;
    let inv = delta.inv();
    let mut c = Circuit::new(d);
    let xs = c.inputs(0..d);

    let m1 = gates::rank_select(&mut c, &xs[..schedule.z1], &[Wire::constant(schedule.z1 as f64)], inv).remove(0);
    let x2 = gates::filter_at(&mut c, 3, &xs, &Wire::constant(1.0), &m1, inv);
    let x2: Vec<Wire> = x2.iter().map(|w| c.share(w)).collect();

    let mut sample = Vec::with_capacity(schedule.z2);
    for (b, range) in schedule.blocks.iter().enumerate() {
        let q = schedule.quota(b);
        if q == 0 || range.is_empty() {
            continue;
        }
        let found = gates::shortlist(&mut c, &x2[range.clone()], &Wire::constant(1.0), &Wire::constant(0.0), q, delta.value());
        sample.extend(found.iter().map(|w| c.share(w)));
    }
    let top = Wire::constant(sample.len() as f64);
    let m2 = gates::rank_select(&mut c, &sample, &[top], inv).remove(0);
    let x3 = gates::filter_at(&mut c, 9, &x2, &Wire::constant(1.0), &m2, inv);
    let x3: Vec<Wire> = x3.iter().map(|w| c.share(w)).collect();

    let family = HashFamily::new(d, schedule.hash_exponent)?;
    let p = family.size();
    let mut buckets = Vec::with_capacity(p * p);
    for a in 0..p as u64 {
        buckets.extend(gates::hashing_at(&mut c, 10, &x3, &family.member_map(a), p));
    }
    let s = gates::nzc_at(&mut c, 10, &x3, inv);
    let block = gates::block_extract(&mut c, &buckets, &s, p, inv);
    let block: Vec<Wire> = block.iter().map(|w| c.share(w)).collect();
    let out = gates::rank_select(&mut c, &block, &[Wire::constant(p as f64)], inv);

    let mut net = c.finish(&out, 15)?.net;
    check_depth(&net, "maxlinear", 15)?;
    net.set_metadata("construction", "maxlinear");
    net.set_metadata("d", d.to_string());
    net.set_metadata("delta_effective", format!("{:e}", delta.value()));
    net.set_metadata("prime", p.to_string());
    Ok(net)
}
