//! Feed-forward ReLU networks: layers, evaluation, composition and size accounting.

use std::collections::BTreeMap;

use thiserror::Error;

pub(crate) mod dd;
mod format;
mod matrix;

pub use format::{deserialize, serialize};
pub use matrix::WeightMatrix;

pub(crate) use dd::Dd;
pub(crate) use matrix::Csr;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetworkError {
    #[error("{what}: expected {expected}, got {got}")]
    DimensionMismatch { what: &'static str, expected: usize, got: usize },
    #[error("input entry {0} is not finite")]
    NonFiniteInput(usize),
    #[error("invalid network: {0}")]
    Invalid(String),
    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    pub fn as_str(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Identity => "identity",
        }
    }
}

/// One affine map, optionally followed by a coordinatewise ReLU.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineLayer {
    weights: WeightMatrix,
    biases: Vec<f64>,
    activation: Activation,
}

impl AffineLayer {
    pub fn new(
        weights: WeightMatrix,
        biases: Vec<f64>,
        activation: Activation,
    ) -> Result<AffineLayer, NetworkError> {
        if biases.len() != weights.rows() {
            return Err(NetworkError::DimensionMismatch {
                what: "bias length",
                expected: weights.rows(),
                got: biases.len(),
            });
        }
        if let Some(i) = biases.iter().position(|b| !b.is_finite()) {
            return Err(NetworkError::Invalid(format!("bias {i} is not finite")));
        }
        Ok(AffineLayer { weights, biases, activation })
    }

    pub fn from_dense(
        weights: &[Vec<f64>],
        biases: Vec<f64>,
        activation: Activation,
    ) -> Result<AffineLayer, NetworkError> {
        let cols = weights.first().map_or(0, |r| r.len());
        AffineLayer::new(WeightMatrix::from_dense(weights, cols)?, biases, activation)
    }

    pub fn identity(n: usize) -> AffineLayer {
        AffineLayer { weights: WeightMatrix::identity(n), biases: vec![0.0; n], activation: Activation::Identity }
    }

    pub fn weights(&self) -> &WeightMatrix {
        &self.weights
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn rows(&self) -> usize {
        self.weights.rows()
    }

    pub fn cols(&self) -> usize {
        self.weights.cols()
    }

    /// `outer ∘ self` as a single affine map carrying `outer`'s activation.
    fn fused_into(&self, outer: &AffineLayer) -> AffineLayer {
        let weights = outer.weights.matmul(&self.weights);
        let shifted = outer.weights.mul_vec(&self.biases);
        let biases = shifted.iter().zip(&outer.biases).map(|(a, b)| a + b).collect();
        AffineLayer { weights, biases, activation: outer.activation }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NetworkStats {
    pub width: usize,
    pub depth: usize,
    pub max_abs_weight: f64,
    pub total_neurons: usize,
}

impl NetworkStats {
    pub fn hidden_layers(&self) -> usize {
        self.depth - 1
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReluNetwork {
    input_dim: usize,
    output_dim: usize,
    layers: Vec<AffineLayer>,
    metadata: BTreeMap<String, String>,
}

/// Post-activation values of every layer for one input.
#[derive(Clone, Debug)]
pub struct Trace {
    levels: Vec<Vec<Dd>>,
}

impl Trace {
    /// Level 0 is the input, level `k` the output of hidden layer `k`, and
    /// the last level is the network output.
    pub fn level(&self, k: usize) -> Vec<f64> {
        self.levels[k].iter().map(|v| v.to_f64()).collect()
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub(crate) fn raw(&self, k: usize) -> &[Dd] {
        &self.levels[k]
    }
}

impl ReluNetwork {
    pub fn new(input_dim: usize, layers: Vec<AffineLayer>) -> Result<ReluNetwork, NetworkError> {
        if input_dim == 0 {
            return Err(NetworkError::Invalid("input dimension must be positive".into()));
        }
        if layers.is_empty() {
            return Err(NetworkError::Invalid("a network needs at least one layer".into()));
        }
        let mut prev = input_dim;
        let last = layers.len() - 1;
        for (k, layer) in layers.iter().enumerate() {
            if layer.cols() != prev {
                return Err(NetworkError::DimensionMismatch {
                    what: "layer column count",
                    expected: prev,
                    got: layer.cols(),
                });
            }
            let want = if k == last { Activation::Identity } else { Activation::Relu };
            if layer.activation != want {
                return Err(NetworkError::Invalid(format!(
                    "layer {k} has activation {}, expected {}",
                    layer.activation.as_str(),
                    want.as_str()
                )));
            }
            prev = layer.rows();
        }
        if prev == 0 {
            return Err(NetworkError::Invalid("output dimension must be positive".into()));
        }
        Ok(ReluNetwork { input_dim, output_dim: prev, layers, metadata: BTreeMap::new() })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn layers(&self) -> &[AffineLayer] {
        &self.layers
    }

    pub fn hidden_layers(&self) -> usize {
        self.layers.len() - 1
    }

    pub fn metadata(&self) -> &BTreeMap<String, String> {
        &self.metadata
    }

    pub fn set_metadata(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.metadata.insert(key.into(), value.into());
    }

    fn check_input(&self, x: &[f64]) -> Result<(), NetworkError> {
        if x.len() != self.input_dim {
            return Err(NetworkError::DimensionMismatch {
                what: "input length",
                expected: self.input_dim,
                got: x.len(),
            });
        }
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(NetworkError::NonFiniteInput(i));
        }
        Ok(())
    }

    /// Forward pass. Hidden activations are accumulated in double-double
    /// precision and the outputs rounded to `f64` at the end.
    pub fn evaluate(&self, x: &[f64]) -> Result<Vec<f64>, NetworkError> {
        self.check_input(x)?;
        let mut cur: Vec<Dd> = x.iter().map(|&v| Dd::from_f64(v)).collect();
        let mut next = Vec::new();
        for layer in &self.layers {
            layer.weights.apply(&cur, &layer.biases, &mut next);
            if layer.activation == Activation::Relu {
                next.iter_mut().for_each(|v| *v = v.relu());
            }
            std::mem::swap(&mut cur, &mut next);
        }
        Ok(cur.iter().map(|v| v.to_f64()).collect())
    }

    pub fn trace(&self, x: &[f64]) -> Result<Trace, NetworkError> {
        self.check_input(x)?;
        let mut levels = vec![x.iter().map(|&v| Dd::from_f64(v)).collect::<Vec<_>>()];
        for layer in &self.layers {
            let mut next = Vec::new();
            layer.weights.apply(levels.last().unwrap(), &layer.biases, &mut next);
            if layer.activation == Activation::Relu {
                next.iter_mut().for_each(|v| *v = v.relu());
            }
            levels.push(next);
        }
        Ok(Trace { levels })
    }

    pub fn stats(&self) -> NetworkStats {
        let mut width = 0;
        let mut max_abs_weight = 0.0f64;
        let mut total_neurons = 0;
        for layer in &self.layers {
            if layer.activation == Activation::Relu {
                width = width.max(layer.rows());
            }
            total_neurons += layer.rows();
            max_abs_weight = max_abs_weight.max(layer.weights.max_abs());
            for b in &layer.biases {
                max_abs_weight = max_abs_weight.max(b.abs());
            }
        }
        NetworkStats { width, depth: self.layers.len(), max_abs_weight, total_neurons }
    }

    /// Rows per layer, hidden layers first.
    pub fn layer_widths(&self) -> Vec<usize> {
        self.layers.iter().map(|l| l.rows()).collect()
    }
}

pub fn evaluate(net: &ReluNetwork, x: &[f64]) -> Result<Vec<f64>, NetworkError> {
    net.evaluate(x)
}

pub fn stats(net: &ReluNetwork) -> NetworkStats {
    net.stats()
}

/// `second ∘ first`, fusing the output layer of `first` into the first layer
/// of `second` so that no hidden layer is added.
pub fn compose_serial(first: &ReluNetwork, second: &ReluNetwork) -> Result<ReluNetwork, NetworkError> {
    if first.output_dim != second.input_dim {
        return Err(NetworkError::DimensionMismatch {
            what: "serial composition",
            expected: first.output_dim,
            got: second.input_dim,
        });
    }
    let n = first.layers.len();
    let mut layers: Vec<AffineLayer> = first.layers[..n - 1].to_vec();
    layers.push(first.layers[n - 1].fused_into(&second.layers[0]));
    layers.extend(second.layers[1..].iter().cloned());
    ReluNetwork::new(first.input_dim, layers)
}

pub fn append_output_combiner(net: &ReluNetwork, combiner: &AffineLayer) -> Result<ReluNetwork, NetworkError> {
    if combiner.cols() != net.output_dim {
        return Err(NetworkError::DimensionMismatch {
            what: "combiner column count",
            expected: net.output_dim,
            got: combiner.cols(),
        });
    }
    if combiner.activation != Activation::Identity {
        return Err(NetworkError::Invalid("combiner must be an identity layer".into()));
    }
    let mut layers = net.layers.clone();
    let last = layers.pop().unwrap();
    layers.push(last.fused_into(combiner));
    let mut out = ReluNetwork::new(net.input_dim, layers)?;
    out.metadata = net.metadata.clone();
    Ok(out)
}

fn pair_stack(n: usize) -> WeightMatrix {
    let mut m = Csr::empty(2 * n);
    for i in 0..n {
        m.push_row([(i, 1.0), (n + i, -1.0)]);
    }
    for i in 0..n {
        m.push_row([(i, -1.0), (n + i, 1.0)]);
    }
    WeightMatrix::from_csr(m)
}

fn pad_to_hidden(net: &ReluNetwork, hidden: usize) -> Vec<AffineLayer> {
    let have = net.hidden_layers();
    if have == hidden {
        return net.layers.clone();
    }
    let mut layers = net.layers[..have].to_vec();
    let last = &net.layers[have];
    let n = last.rows();
    let mut m = Csr::empty(last.cols());
    let mut biases = Vec::with_capacity(2 * n);
    for sign in [1.0, -1.0] {
        last.weights.for_each_row(|_, e| m.push_row(e.iter().map(|&(c, v)| (c, sign * v))));
        biases.extend(last.biases.iter().map(|b| sign * b));
    }
    layers.push(AffineLayer { weights: WeightMatrix::from_csr(m), biases, activation: Activation::Relu });
    for _ in have + 1..hidden {
        layers.push(AffineLayer { weights: pair_stack(n), biases: vec![0.0; 2 * n], activation: Activation::Relu });
    }
    let mut out = Csr::empty(2 * n);
    for i in 0..n {
        out.push_row([(i, 1.0), (n + i, -1.0)]);
    }
    layers.push(AffineLayer { weights: WeightMatrix::from_csr(out), biases: vec![0.0; n], activation: Activation::Identity });
    layers
}

/// Stacks networks side by side. Branch `k` reads the input coordinates
/// listed in `branches[k].1`; outputs are concatenated in branch order.
pub fn compose_parallel(
    branches: &[(&ReluNetwork, &[usize])],
    input_dim: usize,
    equalize_depth: bool,
) -> Result<ReluNetwork, NetworkError> {
    if branches.is_empty() {
        return Err(NetworkError::Invalid("parallel composition of zero networks".into()));
    }
    for (k, (net, map)) in branches.iter().enumerate() {
        if map.len() != net.input_dim {
            return Err(NetworkError::DimensionMismatch {
                what: "input index map length",
                expected: net.input_dim,
                got: map.len(),
            });
        }
        if let Some(&bad) = map.iter().find(|&&i| i >= input_dim) {
            return Err(NetworkError::Invalid(format!("branch {k} reads input {bad} of {input_dim}")));
        }
    }
    let hidden = branches.iter().map(|(n, _)| n.hidden_layers()).max().unwrap();
    if !equalize_depth && branches.iter().any(|(n, _)| n.hidden_layers() != hidden) {
        return Err(NetworkError::Invalid("branches have different depths".into()));
    }
    let padded: Vec<Vec<AffineLayer>> = branches.iter().map(|(n, _)| pad_to_hidden(n, hidden)).collect();
    let mut layers = Vec::with_capacity(hidden + 1);
    for k in 0..=hidden {
        let cols: usize = if k == 0 { input_dim } else { padded.iter().map(|p| p[k - 1].rows()).sum() };
        let mut m = Csr::empty(cols);
        let mut biases = Vec::new();
        let mut col_off = 0;
        for (b, p) in padded.iter().enumerate() {
            let layer = &p[k];
            let map = branches[b].1;
            layer.weights.for_each_row(|_, e| {
                let mut row: Vec<(usize, f64)> = e
                    .iter()
                    .map(|&(c, v)| (if k == 0 { map[c] } else { col_off + c }, v))
                    .collect();
                row.sort_by_key(|e| e.0);
                let mut merged: Vec<(usize, f64)> = Vec::with_capacity(row.len());
                for (c, v) in row {
                    match merged.last_mut() {
                        Some(last) if last.0 == c => last.1 += v,
                        _ => merged.push((c, v)),
                    }
                }
                m.push_row(merged);
            });
            biases.extend_from_slice(&layer.biases);
            if k > 0 {
                col_off += p[k - 1].rows();
            }
        }
        let activation = if k == hidden { Activation::Identity } else { Activation::Relu };
        layers.push(AffineLayer { weights: WeightMatrix::from_csr(m), biases, activation });
    }
    ReluNetwork::new(input_dim, layers)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_net() -> ReluNetwork {
        let l1 = AffineLayer::from_dense(
            &[vec![0.0, 1.0], vec![0.0, -1.0], vec![1.0, -1.0]],
            vec![0.0; 3],
            Activation::Relu,
        )
        .unwrap();
        let l2 = AffineLayer::from_dense(&[vec![1.0, -1.0, 1.0]], vec![0.0], Activation::Identity).unwrap();
        ReluNetwork::new(2, vec![l1, l2]).unwrap()
    }

    #[test]
    fn identity_layer_net() {
        let net = ReluNetwork::new(1, vec![AffineLayer::identity(1)]).unwrap();
        assert_eq!(net.evaluate(&[0.3]).unwrap(), vec![0.3]);
        assert_eq!(net.stats().depth, 1);
    }

    #[test]
    fn relu_pair_identity() {
        let l1 = AffineLayer::from_dense(&[vec![1.0], vec![-1.0]], vec![0.0; 2], Activation::Relu).unwrap();
        let l2 = AffineLayer::from_dense(&[vec![1.0, -1.0]], vec![0.0], Activation::Identity).unwrap();
        let net = ReluNetwork::new(1, vec![l1, l2]).unwrap();
        assert_eq!(net.evaluate(&[-0.4]).unwrap(), vec![-0.4]);
    }

    #[test]
    fn max_net_stats() {
        let net = max_net();
        assert_eq!(net.evaluate(&[0.3, 0.7]).unwrap(), vec![0.7]);
        let s = net.stats();
        assert_eq!((s.width, s.depth, s.max_abs_weight), (3, 2, 1.0));
    }

    #[test]
    fn rejects_bad_inputs() {
        let net = max_net();
        assert!(matches!(net.evaluate(&[0.1]), Err(NetworkError::DimensionMismatch { .. })));
        assert_eq!(net.evaluate(&[0.1, f64::NAN]), Err(NetworkError::NonFiniteInput(1)));
    }

    #[test]
    fn structural_checks() {
        assert!(ReluNetwork::new(2, vec![]).is_err());
        let relu_last = AffineLayer::from_dense(&[vec![1.0]], vec![0.0], Activation::Relu).unwrap();
        assert!(ReluNetwork::new(1, vec![relu_last]).is_err());
    }

    #[test]
    fn parallel_max_nets() {
        let m = max_net();
        let net = compose_parallel(&[(&m, &[0, 1]), (&m, &[2, 3])], 4, false).unwrap();
        assert_eq!(net.evaluate(&[1.0, 2.0, 3.0, 4.0]).unwrap(), vec![2.0, 4.0]);
        assert_eq!(net.stats().width, 6);
    }

    #[test]
    fn serial_depth_adds() {
        let m = max_net();
        let neg = ReluNetwork::new(1, vec![AffineLayer::from_dense(&[vec![-1.0], vec![2.0]], vec![0.0, 0.0], Activation::Identity).unwrap()]).unwrap();
        let both = compose_serial(&m, &neg).unwrap();
        assert_eq!(both.stats().depth, 2);
        assert_eq!(both.evaluate(&[0.5, 0.25]).unwrap(), vec![-0.5, 1.0]);
        let twice = compose_serial(&max_net(), &compose_parallel(&[(&m, &[0, 0])], 1, false).unwrap()).unwrap();
        assert_eq!(twice.hidden_layers(), 2);
    }
}
