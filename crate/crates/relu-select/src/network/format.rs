use std::collections::BTreeMap;
use std::fmt::Write;

use serde::Deserialize;

use super::{Activation, AffineLayer, NetworkError, ReluNetwork, WeightMatrix};

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Doc {
    input_dim: usize,
    output_dim: usize,
    #[serde(default)]
    metadata: BTreeMap<String, String>,
    layers: Vec<LayerDoc>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerDoc {
    rows: usize,
    cols: usize,
    activation: String,
    weights: Vec<(usize, usize, f64)>,
    biases: Vec<f64>,
}

fn num(out: &mut String, v: f64) {
    write!(out, "{v:.16e}").unwrap();
}

fn json_str(out: &mut String, s: &str) {
    out.push_str(&serde_json::to_string(s).unwrap());
}

/// Writes the network as a JSON document. Every value is printed with 17
/// significant digits so that a round trip reproduces the weights exactly.
pub fn serialize(net: &ReluNetwork) -> String {
    let mut out = String::new();
    writeln!(out, "{{").unwrap();
    writeln!(out, "  \"input_dim\": {},", net.input_dim).unwrap();
    writeln!(out, "  \"output_dim\": {},", net.output_dim).unwrap();
    if !net.metadata.is_empty() {
        out.push_str("  \"metadata\": {");
        for (i, (k, v)) in net.metadata.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            json_str(&mut out, k);
            out.push_str(": ");
            json_str(&mut out, v);
        }
        out.push_str("},\n");
    }
    out.push_str("  \"layers\": [\n");
    for (k, layer) in net.layers.iter().enumerate() {
        writeln!(out, "    {{").unwrap();
        writeln!(out, "      \"rows\": {},", layer.rows()).unwrap();
        writeln!(out, "      \"cols\": {},", layer.cols()).unwrap();
        writeln!(out, "      \"activation\": \"{}\",", layer.activation.as_str()).unwrap();
        out.push_str("      \"weights\": [");
        let mut first = true;
        layer.weights.for_each_row(|r, e| {
            for &(c, v) in e {
                if !first {
                    out.push_str(", ");
                }
                first = false;
                write!(out, "[{r}, {c}, ").unwrap();
                num(&mut out, v);
                out.push(']');
            }
        });
        out.push_str("],\n      \"biases\": [");
        for (i, &b) in layer.biases.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            num(&mut out, b);
        }
        out.push_str("]\n    }");
        out.push_str(if k + 1 < net.layers.len() { ",\n" } else { "\n" });
    }
    out.push_str("  ]\n}\n");
    out
}

fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let mut off = 0;
    for (i, l) in text.split_inclusive('\n').enumerate() {
        if i + 1 == line {
            return (off + column.saturating_sub(1)).min(text.len());
        }
        off += l.len();
    }
    text.len()
}

fn layers_offset(text: &str, k: usize) -> usize {
    let start = text.find("\"layers\"").unwrap_or(0);
    if k == 0 {
        return start;
    }
    text[start..]
        .match_indices("\"rows\"")
        .nth(k)
        .map_or(start, |(i, _)| start + i)
}

pub fn deserialize(bytes: &[u8]) -> Result<ReluNetwork, NetworkError> {
    let text = std::str::from_utf8(bytes).map_err(|e| NetworkError::Parse {
        offset: e.valid_up_to(),
        message: "stream is not valid UTF-8".into(),
    })?;
    let doc: Doc = serde_json::from_str(text).map_err(|e| NetworkError::Parse {
        offset: byte_offset(text, e.line(), e.column()),
        message: e.to_string(),
    })?;
    let structural = |k: usize, message: String| NetworkError::Parse { offset: layers_offset(text, k), message };
    if doc.layers.is_empty() {
        return Err(structural(0, "layer list is empty".into()));
    }
    let mut layers = Vec::with_capacity(doc.layers.len());
    for (k, l) in doc.layers.into_iter().enumerate() {
        let activation = match l.activation.as_str() {
            "relu" => Activation::Relu,
            "identity" => Activation::Identity,
            other => return Err(structural(k, format!("layer {k}: unknown activation {other:?}"))),
        };
        let weights = WeightMatrix::from_triplets(l.rows, l.cols, &l.weights)
            .map_err(|e| structural(k, format!("layer {k}: {e}")))?;
        let layer =
            AffineLayer::new(weights, l.biases, activation).map_err(|e| structural(k, format!("layer {k}: {e}")))?;
        layers.push(layer);
    }
    let mut net = ReluNetwork::new(doc.input_dim, layers).map_err(|e| structural(0, e.to_string()))?;
    if net.output_dim != doc.output_dim {
        return Err(structural(0, format!("output_dim {} does not match the last layer ({})", doc.output_dim, net.output_dim)));
    }
    net.metadata = doc.metadata;
    Ok(net)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ReluNetwork {
        let l1 = AffineLayer::from_dense(&[vec![0.1, -1.0 / 3.0], vec![1e-300, 7.0]], vec![0.5, -2.0], Activation::Relu)
            .unwrap();
        let l2 = AffineLayer::from_dense(&[vec![1.0, -1.0]], vec![std::f64::consts::PI], Activation::Identity).unwrap();
        let mut net = ReluNetwork::new(2, vec![l1, l2]).unwrap();
        net.set_metadata("construction", "tiny \"test\"");
        net
    }

    #[test]
    fn round_trip_is_exact() {
        let net = tiny();
        let text = serialize(&net);
        let back = deserialize(text.as_bytes()).unwrap();
        assert_eq!(back, net);
        assert_eq!(serialize(&back), text);
    }

    #[test]
    fn empty_layers_rejected() {
        let err = deserialize(br#"{"input_dim": 1, "output_dim": 1, "layers": []}"#).unwrap_err();
        assert!(matches!(err, NetworkError::Parse { offset: 34, .. }), "{err:?}");
    }

    #[test]
    fn truncated_stream_rejected() {
        let text = serialize(&tiny());
        let cut = &text.as_bytes()[..text.len() / 2];
        match deserialize(cut).unwrap_err() {
            NetworkError::Parse { offset, .. } => assert!(offset <= cut.len()),
            other => panic!("unexpected {other:?}"),
        }
    }
}
