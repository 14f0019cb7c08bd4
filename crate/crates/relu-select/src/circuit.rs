//! Level-scheduled builder for layered ReLU networks.
//!
//! A [`Wire`] is an affine expression over the units of one level: level 0
//! holds the inputs and level `k ≥ 1` the neurons of hidden layer `k`.
//! Wires used above their own level are carried upward through identity
//! pairs `[w]₊ − [−w]₊`. Neurons whose pre-activation is constant are folded
//! into constants and identical neurons on a level are shared.

use std::collections::HashMap;

use crate::network::{Activation, AffineLayer, Csr, Dd, NetworkError, ReluNetwork, Trace, WeightMatrix};

const LIN: u32 = 1 << 31;

type Terms = Vec<(u32, f64)>;
type Key = (usize, Vec<(u32, u64)>, u64);

#[derive(Clone, Debug, PartialEq)]
pub struct Wire {
    level: usize,
    terms: Terms,
    bias: f64,
}

impl Wire {
    pub fn constant(c: f64) -> Wire {
        Wire { level: 0, terms: Vec::new(), bias: c }
    }

    pub fn is_const(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn const_value(&self) -> Option<f64> {
        self.is_const().then_some(self.bias)
    }

    pub fn level(&self) -> usize {
        if self.is_const() {
            0
        } else {
            self.level
        }
    }

    pub fn scaled(&self, c: f64) -> Wire {
        if c == 0.0 {
            return Wire::constant(0.0);
        }
        Wire {
            level: self.level,
            terms: self.terms.iter().map(|&(n, v)| (n, v * c)).collect(),
            bias: self.bias * c,
        }
    }

    pub fn plus(&self, c: f64) -> Wire {
        Wire { level: self.level, terms: self.terms.clone(), bias: self.bias + c }
    }
}

fn key(level: usize, terms: &[(u32, f64)], bias: f64) -> Key {
    (level, terms.iter().map(|&(n, v)| (n, v.to_bits())).collect(), bias.to_bits())
}

#[derive(Default)]
struct Level {
    neurons: usize,
    pre: Vec<Wire>,
    linear: Vec<Terms>,
}

pub struct Circuit {
    levels: Vec<Level>,
    neuron_cache: HashMap<Key, u32>,
    share_cache: HashMap<Key, u32>,
}

impl Circuit {
    pub fn new(input_dim: usize) -> Circuit {
        let inputs = Level { neurons: input_dim, ..Level::default() };
        Circuit { levels: vec![inputs], neuron_cache: HashMap::new(), share_cache: HashMap::new() }
    }

    pub fn input(&self, i: usize) -> Wire {
        assert!(i < self.levels[0].neurons);
        Wire { level: 0, terms: vec![(i as u32, 1.0)], bias: 0.0 }
    }

    pub fn inputs(&self, range: std::ops::Range<usize>) -> Vec<Wire> {
        range.map(|i| self.input(i)).collect()
    }

    pub fn top(&self) -> usize {
        self.levels.len() - 1
    }

    fn ensure(&mut self, level: usize) {
        while self.levels.len() <= level {
            self.levels.push(Level::default());
        }
    }

    /// Highest level among the non-constant wires.
    pub fn base(&self, wires: &[&Wire]) -> usize {
        wires.iter().map(|w| w.level()).max().unwrap_or(0)
    }

    /// A single ReLU neuron on `level` fed by `pre`.
    pub fn relu(&mut self, pre: &Wire, level: usize) -> Wire {
        assert!(level >= 1, "neurons live on hidden levels");
        if let Some(c) = pre.const_value() {
            return Wire::constant(c.max(0.0));
        }
        let pre = self.at(pre, level - 1);
        self.ensure(level);
        let k = key(level, &pre.terms, pre.bias);
        let id = match self.neuron_cache.get(&k) {
            Some(&id) => id,
            None => {
                let l = &mut self.levels[level];
                let id = l.neurons as u32;
                assert!(id < LIN, "level too wide");
                l.neurons += 1;
                l.pre.push(pre);
                self.neuron_cache.insert(k, id);
                id
            }
        };
        Wire { level, terms: vec![(id, 1.0)], bias: 0.0 }
    }

    /// The same affine function expressed on a higher level.
    pub fn at(&mut self, w: &Wire, level: usize) -> Wire {
        if w.is_const() {
            return Wire { level, terms: Vec::new(), bias: w.bias };
        }
        assert!(w.level <= level, "cannot move a wire from level {} down to {level}", w.level);
        let mut cur = Wire { level: w.level, terms: w.terms.clone(), bias: 0.0 };
        while cur.level < level {
            let next = cur.level + 1;
            let pos = self.relu(&cur, next);
            let neg = self.relu(&cur.scaled(-1.0), next);
            cur = self.sum(&[(1.0, &pos), (-1.0, &neg)], 0.0);
        }
        cur.bias = w.bias;
        cur
    }

    /// `Σ cᵢ·wᵢ + bias` on the highest level among the inputs.
    pub fn sum(&mut self, parts: &[(f64, &Wire)], bias: f64) -> Wire {
        let level = parts.iter().map(|(_, w)| w.level()).max().unwrap_or(0);
        let mut terms: Terms = Vec::new();
        let mut b = bias;
        for &(c, w) in parts {
            if c == 0.0 {
                continue;
            }
            let lifted = if w.is_const() || w.level == level { None } else { Some(self.at(w, level)) };
            let w = lifted.as_ref().unwrap_or(w);
            b += c * w.bias;
            terms.extend(w.terms.iter().map(|&(n, v)| (n, c * v)));
        }
        terms.sort_by_key(|t| t.0);
        let mut merged: Terms = Vec::with_capacity(terms.len());
        for (n, v) in terms {
            match merged.last_mut() {
                Some(last) if last.0 == n => last.1 += v,
                _ => merged.push((n, v)),
            }
        }
        merged.retain(|t| t.1 != 0.0);
        Wire { level, terms: merged, bias: b }
    }

    pub fn add(&mut self, a: &Wire, b: &Wire) -> Wire {
        self.sum(&[(1.0, a), (1.0, b)], 0.0)
    }

    pub fn sub(&mut self, a: &Wire, b: &Wire) -> Wire {
        self.sum(&[(1.0, a), (-1.0, b)], 0.0)
    }

    /// Replaces a long affine expression by a single linear node so that
    /// many neurons can read it cheaply. The network computes the same map.
    pub fn share(&mut self, w: &Wire) -> Wire {
        if w.terms.len() <= 2 {
            return w.clone();
        }
        let k = key(w.level, &w.terms, 0.0);
        let id = match self.share_cache.get(&k) {
            Some(&id) => id,
            None => {
                self.ensure(w.level);
                let l = &mut self.levels[w.level];
                let id = l.linear.len() as u32;
                l.linear.push(w.terms.clone());
                self.share_cache.insert(k, id);
                id
            }
        };
        Wire { level: w.level, terms: vec![(LIN | id, 1.0)], bias: w.bias }
    }

    fn layer_matrix(&self, below: usize, rows: &[&Wire]) -> WeightMatrix {
        let lv = &self.levels[below];
        let n = lv.neurons;
        let k = lv.linear.len();
        let col = |id: u32| if id & LIN != 0 { n + (id & !LIN) as usize } else { id as usize };
        let mut inner = Csr::empty(n + k);
        for t in &lv.linear {
            inner.push_row(t.iter().map(|&(id, v)| (col(id), v)));
        }
        let mut outer = Csr::empty(n + k);
        for w in rows {
            debug_assert!(w.is_const() || w.level == below);
            let mut row: Vec<(usize, f64)> = w.terms.iter().map(|&(id, v)| (col(id), v)).collect();
            row.sort_by_key(|e| e.0);
            outer.push_row(row);
        }
        WeightMatrix::factored(n, inner, outer)
    }

    /// Emits the network whose outputs are `outputs`, with at least
    /// `min_hidden` hidden layers.
    pub fn finish(mut self, outputs: &[Wire], min_hidden: usize) -> Result<CircuitNet, NetworkError> {
        let top = outputs.iter().map(|w| w.level()).max().unwrap_or(0).max(self.top()).max(min_hidden);
        let outs: Vec<Wire> = outputs.iter().map(|w| self.at(w, top)).collect();
        self.ensure(top);
        let mut layers = Vec::with_capacity(top + 1);
        for level in 1..=top {
            let pre: Vec<&Wire> = self.levels[level].pre.iter().collect();
            let biases = pre.iter().map(|w| w.bias).collect();
            let weights = self.layer_matrix(level - 1, &pre);
            layers.push(AffineLayer::new(weights, biases, Activation::Relu)?);
        }
        let refs: Vec<&Wire> = outs.iter().collect();
        let weights = self.layer_matrix(top, &refs);
        let biases = outs.iter().map(|w| w.bias).collect();
        layers.push(AffineLayer::new(weights, biases, Activation::Identity)?);
        let input_dim = self.levels[0].neurons;
        let net = ReluNetwork::new(input_dim, layers)?;
        let linear = self.levels.into_iter().map(|l| (l.neurons, l.linear)).collect();
        Ok(CircuitNet { net, linear })
    }
}

/// A built network together with what is needed to read intermediate wires.
pub struct CircuitNet {
    pub net: ReluNetwork,
    linear: Vec<(usize, Vec<Terms>)>,
}

/// Values of every unit of every level for one input.
pub struct Probe<'a> {
    circuit: &'a CircuitNet,
    trace: Trace,
    levels: Vec<Option<Vec<Dd>>>,
}

impl CircuitNet {
    pub fn probe(&self, x: &[f64]) -> Result<Probe<'_>, NetworkError> {
        let trace = self.net.trace(x)?;
        let n = self.linear.len();
        Ok(Probe { circuit: self, trace, levels: vec![None; n] })
    }
}

impl Probe<'_> {
    fn units(&mut self, level: usize) -> &[Dd] {
        if self.levels[level].is_none() {
            let (n, defs) = &self.circuit.linear[level];
            let mut vals: Vec<Dd> = self.trace.raw(level).to_vec();
            debug_assert_eq!(vals.len(), *n);
            for t in defs {
                let mut acc = Dd::ZERO;
                for &(id, v) in t {
                    let i = if id & LIN != 0 { n + (id & !LIN) as usize } else { id as usize };
                    acc = acc.fma(vals[i], v);
                }
                vals.push(acc);
            }
            self.levels[level] = Some(vals);
        }
        self.levels[level].as_deref().unwrap()
    }

    pub fn read(&mut self, w: &Wire) -> f64 {
        if w.is_const() {
            return w.bias;
        }
        let n = self.circuit.linear[w.level].0;
        let vals = self.units(w.level);
        let mut acc = Dd::from_f64(w.bias);
        for &(id, v) in &w.terms {
            let i = if id & LIN != 0 { n + (id & !LIN) as usize } else { id as usize };
            acc = acc.fma(vals[i], v);
        }
        acc.to_f64()
    }

    pub fn read_all(&mut self, ws: &[Wire]) -> Vec<f64> {
        ws.iter().map(|w| self.read(w)).collect()
    }

    pub fn output(&self) -> Vec<f64> {
        self.trace.level(self.trace.len() - 1)
    }
}
