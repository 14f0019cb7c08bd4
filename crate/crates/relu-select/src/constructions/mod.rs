//! End-to-end selection networks: depth 3 and depth 5 medians, the
//! linear-width median pipeline, the linear-width maximum and the padding
//! reduction from rank selection to the maximum.

mod depth;
mod linear;
mod max;
mod reduce;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

pub use depth::{build_depth3_median, build_depth3_rank, build_depth5_median};
pub use linear::{
    build_hashing_stage, build_linear_median, build_linear_median_probed, build_linear_median_with,
    build_sparsifier, build_sparsifier_probed, HashingExponent, LinearOptions, HASHING_NEURON_BUDGET,
};
pub use max::build_max_linear;
pub use reduce::reduce_rank_to_max;

use crate::circuit::{CircuitNet, Wire};
use crate::error::BuildError;
use crate::network::{NetworkError, ReluNetwork};
use crate::oracle::IterationTrace;
use crate::primitives::{Delta, GadgetContract};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ConstructionKind {
    Depth3,
    Depth5,
    LinearWidth,
    MaxLinear,
}

impl ConstructionKind {
    pub const ALL: [ConstructionKind; 4] =
        [ConstructionKind::Depth3, ConstructionKind::Depth5, ConstructionKind::LinearWidth, ConstructionKind::MaxLinear];

    pub fn as_str(self) -> &'static str {
        match self {
            ConstructionKind::Depth3 => "depth3",
            ConstructionKind::Depth5 => "depth5",
            ConstructionKind::LinearWidth => "linear",
            ConstructionKind::MaxLinear => "maxlinear",
        }
    }

    /// Number of hidden layers of the built network.
    pub fn hidden_layers(self) -> usize {
        match self {
            ConstructionKind::Depth3 => 2,
            ConstructionKind::Depth5 => 4,
            ConstructionKind::LinearWidth => 45,
            ConstructionKind::MaxLinear => 15,
        }
    }

    pub fn default_gamma(self) -> f64 {
        match self {
            ConstructionKind::Depth5 => 0.25,
            ConstructionKind::LinearWidth => LinearOptions::default().gamma,
            _ => 0.0,
        }
    }

    /// The separation parameter at which the accuracy target is met.
    pub fn nominal_delta(self, d: usize, epsilon: f64) -> f64 {
        let d = d as f64;
        match self {
            ConstructionKind::Depth3 => epsilon / (12.0 * d.powi(4)),
            ConstructionKind::Depth5 => epsilon / (12.0 * d.powi(6)),
            ConstructionKind::LinearWidth | ConstructionKind::MaxLinear => epsilon / (3.0 * d * d),
        }
    }
}

impl fmt::Display for ConstructionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ConstructionKind {
    type Err = BuildError;

    fn from_str(s: &str) -> Result<ConstructionKind, BuildError> {
        ConstructionKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| BuildError::param("construction", format!("unknown construction {s:?}")))
    }
}

/// Parameters of one construction. `delta` is the nominal separation and
/// `effective_delta` the power of two at least as large that the network
/// is built with.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConstructionParams {
    pub kind: ConstructionKind,
    pub d: usize,
    pub epsilon: f64,
    pub gamma: f64,
    pub delta: f64,
    pub effective_delta: Delta,
}

impl ConstructionParams {
    pub fn new(kind: ConstructionKind, d: usize, epsilon: f64, gamma: f64) -> Result<ConstructionParams, BuildError> {
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return Err(BuildError::param("epsilon", format!("{epsilon} is not in (0, 1]")));
        }
        if kind == ConstructionKind::Depth5 && !(gamma > 0.0 && gamma < 1.0) {
            return Err(BuildError::param("gamma", format!("{gamma} is not in (0, 1)")));
        }
        let min_d = match kind {
            ConstructionKind::Depth3 => 2,
            ConstructionKind::Depth5 => 8,
            ConstructionKind::LinearWidth => 2,
            ConstructionKind::MaxLinear => 16,
        };
        if d < min_d {
            return Err(BuildError::param("d", format!("{} needs d ≥ {min_d}, got {d}", kind.as_str())));
        }
        let delta = kind.nominal_delta(d, epsilon);
        if !(delta > 0.0) || !(1.0 / delta).is_finite() {
            return Err(BuildError::Precision(format!(
                "δ = {delta:e} for {} at d = {d}, ε = {epsilon} cannot be represented",
                kind.as_str()
            )));
        }
        let effective_delta = Delta::power_of_two_at_least(delta)?;
        Ok(ConstructionParams { kind, d, epsilon, gamma, delta, effective_delta })
    }

    pub fn with_default_gamma(kind: ConstructionKind, d: usize, epsilon: f64) -> Result<ConstructionParams, BuildError> {
        ConstructionParams::new(kind, d, epsilon, kind.default_gamma())
    }

    /// Size bounds every network built from these parameters satisfies.
    pub fn contract(&self) -> GadgetContract {
        let d = self.d;
        let inv = self.effective_delta.inv();
        let (width, weight) = match self.kind {
            ConstructionKind::Depth3 | ConstructionKind::Depth5 => (4 * d * d, inv),
            ConstructionKind::LinearWidth | ConstructionKind::MaxLinear => (16 * d, 2.0 * inv + 1.0),
        };
        GadgetContract { declared_width_bound: width, declared_hidden_layers: self.kind.hidden_layers(), declared_weight_bound: weight }
    }

    pub(crate) fn echo(&self, net: &mut ReluNetwork) {
        net.set_metadata("construction", self.kind.as_str());
        net.set_metadata("d", self.d.to_string());
        net.set_metadata("epsilon", format!("{:e}", self.epsilon));
        net.set_metadata("gamma", format!("{}", self.gamma));
        net.set_metadata("delta", format!("{:e}", self.delta));
        net.set_metadata("delta_effective", format!("{:e}", self.effective_delta.value()));
    }
}

/// Builds the network described by `params`.
pub fn build(params: &ConstructionParams) -> Result<ReluNetwork, BuildError> {
    let (d, eps) = (params.d, params.epsilon);
    match params.kind {
        ConstructionKind::Depth3 => build_depth3_median(d, eps),
        ConstructionKind::Depth5 => build_depth5_median(d, eps, params.gamma),
        ConstructionKind::LinearWidth => {
            let options = LinearOptions { gamma: params.gamma, ..LinearOptions::default() };
            build_linear_median_with(d, eps, &options)
        }
        ConstructionKind::MaxLinear => {
            let mut net = build_max_linear(d, params.effective_delta)?;
            params.echo(&mut net);
            Ok(net)
        }
    }
}

/// A network together with named groups of intermediate wires.
pub struct ProbedNetwork {
    built: CircuitNet,
    probes: Vec<(String, Vec<Wire>)>,
}

impl ProbedNetwork {
    pub(crate) fn new(built: CircuitNet, probes: Vec<(String, Vec<Wire>)>) -> ProbedNetwork {
        ProbedNetwork { built, probes }
    }

    pub fn net(&self) -> &ReluNetwork {
        &self.built.net
    }

    pub(crate) fn net_mut(&mut self) -> &mut ReluNetwork {
        &mut self.built.net
    }

    pub fn into_net(self) -> ReluNetwork {
        self.built.net
    }

    pub fn probe_names(&self) -> impl Iterator<Item = &str> {
        self.probes.iter().map(|(n, _)| n.as_str())
    }

    /// Values of every probe together with the network output.
    pub fn read(&self, x: &[f64]) -> Result<(BTreeMap<String, Vec<f64>>, Vec<f64>), NetworkError> {
        let mut probe = self.built.probe(x)?;
        let values = self.probes.iter().map(|(n, ws)| (n.clone(), probe.read_all(ws))).collect();
        Ok((values, probe.output()))
    }

    /// Sparsification iterations as read from the network, in the same form
    /// as the reference trace.
    pub fn iterations(&self, x: &[f64]) -> Result<Vec<IterationTrace>, NetworkError> {
        let (values, _) = self.read(x)?;
        Ok(iterations_from(&values))
    }
}

fn stage_name(iteration: usize, field: &str) -> String {
    format!("iteration{iteration}.{field}")
}

pub(crate) fn iterations_from(values: &BTreeMap<String, Vec<f64>>) -> Vec<IterationTrace> {
    (1..)
        .map_while(|i| {
            let get = |f: &str| values.get(&stage_name(i, f)).cloned();
            let one = |f: &str| get(f).map(|v| v[0]);
            Some(IterationTrace {
                sample: get("sample")?,
                rank: one("rank")?,
                nonzeros: one("nonzeros")?,
                floor_l: one("floor_l")?,
                ceil_r: one("ceil_r")?,
                e_minus: one("e_minus")?,
                e_plus: one("e_plus")?,
                next: get("next")?,
            })
        })
        .collect()
}

pub(crate) fn check_depth(net: &ReluNetwork, name: &str, hidden: usize) -> Result<(), BuildError> {
    if net.hidden_layers() != hidden {
        return Err(BuildError::Contract(format!(
            "{name}: {} hidden layers instead of {hidden}",
            net.hidden_layers()
        )));
    }
    Ok(())
}
