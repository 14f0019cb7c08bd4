use crate::error::BuildError;
use crate::network::{AffineLayer, Csr, NetworkError, ReluNetwork, WeightMatrix};

/// Fixes the last `r − 1` inputs of `net` to `pad` by folding them into the
/// first-layer biases. With `pad = 1` a median network on `2d − 1` inputs
/// becomes a maximum network on `d` inputs; with `pad = 0` it selects the
/// minimum side instead. Layer shapes are unchanged apart from the input
/// dimension.
pub fn reduce_rank_to_max(net: &ReluNetwork, d: usize, r: usize, pad: f64) -> Result<ReluNetwork, BuildError> {
    if r == 0 {
        return Err(BuildError::param("r", "rank must be positive"));
    }
    if net.input_dim() != d + r - 1 {
        return Err(NetworkError::DimensionMismatch {
            what: "padded input dimension",
            expected: d + r - 1,
            got: net.input_dim(),
        }
        .into());
    }
    if !pad.is_finite() {
        return Err(BuildError::param("pad_value", "must be finite"));
    }
    let first = &net.layers()[0];
    let mut biases = first.biases().to_vec();
    let mut m = Csr::empty(d);
    first.weights().for_each_row(|row, entries| {
        let mut kept = Vec::with_capacity(entries.len());
        for &(c, v) in entries {
            if c < d {
                kept.push((c, v));
            } else {
                biases[row] += v * pad;
            }
        }
        m.push_row(kept);
    });
    let mut layers = vec![AffineLayer::new(WeightMatrix::from_csr(m), biases, first.activation())?];
    layers.extend(net.layers()[1..].iter().cloned());
    let mut out = ReluNetwork::new(d, layers)?;
    for (k, v) in net.metadata() {
        out.set_metadata(k.clone(), v.clone());
    }
    out.set_metadata("padded_inputs", (r - 1).to_string());
    out.set_metadata("pad_value", pad.to_string());
    Ok(out)
}
