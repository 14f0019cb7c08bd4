use super::{check_depth, ConstructionKind, ConstructionParams};
use crate::circuit::{Circuit, Wire};
use crate::error::BuildError;
use crate::network::ReluNetwork;
use crate::params::{median_rank, Depth5Layout};
use crate::primitives::gates;

/// Rank selection of the given ranks of `x ∈ [0, 1]^d` with two hidden
/// layers, built at `δ = ε/(12d⁴)`.
pub fn build_depth3_rank(d: usize, epsilon: f64, ranks: &[usize]) -> Result<ReluNetwork, BuildError> {
    let params = ConstructionParams::with_default_gamma(ConstructionKind::Depth3, d, epsilon)?;
    if ranks.is_empty() {
        return Err(BuildError::param("ranks", "at least one rank is needed"));
    }
    if let Some(&r) = ranks.iter().find(|&&r| r == 0 || r > d) {
        return Err(BuildError::param("ranks", format!("rank {r} is outside 1..={d}")));
    }
    let mut c = Circuit::new(d);
    let xs = c.inputs(0..d);
    let rs: Vec<Wire> = ranks.iter().map(|&r| Wire::constant(r as f64)).collect();
    let out = gates::rank_select(&mut c, &xs, &rs, params.effective_delta.inv());
    let mut net = c.finish(&out, 2)?.net;
    check_depth(&net, "depth3", 2)?;
    params.echo(&mut net);
    net.set_metadata("ranks", ranks.iter().map(|r| r.to_string()).collect::<Vec<_>>().join(" "));
    Ok(net)
}

pub fn build_depth3_median(d: usize, epsilon: f64) -> Result<ReluNetwork, BuildError> {
    build_depth3_rank(d, epsilon, &[median_rank(d)])
}

/// Median with four hidden layers: windowed rank selection inside blocks of
/// length `⌈d^{2/3}⌉`, then the candidate beaten by exactly `⌈d/2⌉ − 1`
/// entries. Built at `δ = ε/(12d⁶)`.
pub fn build_depth5_median(d: usize, epsilon: f64, gamma: f64) -> Result<ReluNetwork, BuildError> {
    let params = ConstructionParams::new(ConstructionKind::Depth5, d, epsilon, gamma)?;
    let layout = Depth5Layout::new(d, gamma)?;
    let inv = params.effective_delta.inv();
    let mut c = Circuit::new(d);
    let xs = c.inputs(0..d);
    let ranks: Vec<Wire> = layout.ranks.clone().map(|r| Wire::constant(r as f64)).collect();
    let last = layout.blocks.len() - 1;
    let mut candidates = Vec::new();
    for (b, range) in layout.blocks.iter().enumerate() {
        if b == last {
            candidates.extend(xs[range.clone()].iter().map(|x| c.at(x, 2)));
        } else {
            for y in gates::rank_select(&mut c, &xs[range.clone()], &ranks, inv) {
                candidates.push(c.share(&y));
            }
        }
    }
    let target = (median_rank(d) - 1) as f64;
    let mut parts = Vec::with_capacity(candidates.len());
    for y in &candidates {
        let wins: Vec<Wire> = xs.iter().map(|x| gates::cmp_at(&mut c, 3, y, x, inv, 0.0)).collect();
        let refs: Vec<(f64, &Wire)> = wins.iter().map(|w| (1.0, w)).collect();
        let count = c.sum(&refs, -target);
        let count = c.share(&count);
        parts.push(gates::ifp_at(&mut c, 4, y, &count));
    }
    let refs: Vec<(f64, &Wire)> = parts.iter().map(|w| (1.0, w)).collect();
    let out = c.sum(&refs, 0.0);
    let mut net = c.finish(&[out], 4)?.net;
    check_depth(&net, "depth5", 4)?;
    params.echo(&mut net);
    net.set_metadata("block", layout.block.to_string());
    net.set_metadata("window", format!("{}..={}", layout.ranks.start(), layout.ranks.end()));
    Ok(net)
}
