mod common;

use common::{rng, uniform};
use rand::Rng;
use relu_select::constructions::build_depth3_rank;
use relu_select::primitives::{build_comparison, build_max, Delta};
use relu_select::{
    append_output_combiner, compose_parallel, compose_serial, deserialize, serialize, Activation, AffineLayer,
    NetworkError, ReluNetwork,
};

fn affine(rows: &[Vec<f64>], b: Vec<f64>) -> ReluNetwork {
    let cols = rows[0].len();
    ReluNetwork::new(cols, vec![AffineLayer::from_dense(rows, b, Activation::Identity).unwrap()]).unwrap()
}

#[test]
fn serial_composition_with_a_prescaler() {
    let delta = Delta::new(0.125).unwrap();
    let cmp = build_comparison(delta).unwrap().net;
    let scale = affine(&[vec![2.0, 0.0], vec![0.0, 0.5]], vec![0.1, -0.1]);
    let net = compose_serial(&scale, &cmp).unwrap();
    assert_eq!(net.hidden_layers(), 1);
    let mut r = rng(41);
    for _ in 0..100 {
        let x = [r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)];
        let direct = cmp.evaluate(&[2.0 * x[0] + 0.1, 0.5 * x[1] - 0.1]).unwrap();
        let fused = net.evaluate(&x).unwrap();
        assert!((direct[0] - fused[0]).abs() <= 1e-12);
    }
    let two = compose_serial(&build_max().unwrap().net, &affine(&[vec![1.0]], vec![0.0])).unwrap();
    assert_eq!(two.hidden_layers(), 1);
    let max = build_max().unwrap().net;
    assert!(matches!(compose_serial(&max, &max), Err(NetworkError::DimensionMismatch { .. })));
}

#[test]
fn serial_composition_is_associative() {
    let a = build_depth3_rank(4, 0.01, &[1, 2, 3, 4]).unwrap();
    let b = affine(&[vec![1.0, -1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0, -1.0]], vec![0.0, 0.0]);
    let c = build_max().unwrap().net;
    let left = compose_serial(&compose_serial(&a, &b).unwrap(), &c).unwrap();
    let right = compose_serial(&a, &compose_serial(&b, &c).unwrap()).unwrap();
    let mut r = rng(42);
    for _ in 0..100 {
        let x = uniform(&mut r, 4);
        let (u, v) = (left.evaluate(&x).unwrap()[0], right.evaluate(&x).unwrap()[0]);
        assert!((u - v).abs() <= 1e-12 * u.abs().max(1.0));
    }
}

#[test]
fn parallel_padding_preserves_outputs() {
    let max = build_max().unwrap().net;
    let deep = build_depth3_rank(3, 0.01, &[1, 3]).unwrap();
    let net = compose_parallel(&[(&max, &[0, 1]), (&deep, &[1, 2, 3])], 4, true).unwrap();
    assert_eq!(net.hidden_layers(), 2);
    assert_eq!(net.layer_widths()[0], max.layer_widths()[0] + deep.layer_widths()[0]);
    let mut r = rng(43);
    for _ in 0..100 {
        let x = uniform(&mut r, 4);
        let out = net.evaluate(&x).unwrap();
        let want: Vec<f64> =
            max.evaluate(&x[..2]).unwrap().into_iter().chain(deep.evaluate(&x[1..]).unwrap()).collect();
        assert_eq!(out, want);
    }
    assert!(compose_parallel(&[(&max, &[0, 1]), (&deep, &[1, 2, 3])], 4, false).is_err());
    let pair = compose_parallel(&[(&max, &[0, 1]), (&max, &[2, 3])], 4, false).unwrap();
    assert_eq!(pair.evaluate(&[1.0, 2.0, 3.0, 4.0]).unwrap(), vec![2.0, 4.0]);
    assert_eq!(pair.stats().width, 6);
}

#[test]
fn output_combiners() {
    let net = build_depth3_rank(3, 0.01, &[1, 2, 3]).unwrap();
    let sum = append_output_combiner(&net, &AffineLayer::from_dense(&[vec![1.0; 3]], vec![0.0], Activation::Identity).unwrap()).unwrap();
    let neg = append_output_combiner(&net, &AffineLayer::from_dense(
        &[vec![-1.0, 0.0, 0.0], vec![0.0, -1.0, 0.0], vec![0.0, 0.0, -1.0]],
        vec![0.0; 3],
        Activation::Identity,
    ).unwrap()).unwrap();
    let id = append_output_combiner(&net, &AffineLayer::identity(3)).unwrap();
    assert_eq!(sum.hidden_layers(), net.hidden_layers());
    let mut r = rng(44);
    for _ in 0..100 {
        let x = uniform(&mut r, 3);
        let out = net.evaluate(&x).unwrap();
        assert!((sum.evaluate(&x).unwrap()[0] - out.iter().sum::<f64>()).abs() <= 1e-12);
        assert_eq!(neg.evaluate(&x).unwrap(), out.iter().map(|v| -v).collect::<Vec<_>>());
        assert_eq!(id.evaluate(&x).unwrap(), out);
    }
}

#[test]
fn serialization_round_trip_is_exact() {
    let net = build_depth3_rank(6, 0.01, &[1, 3, 6]).unwrap();
    let text = serialize(&net);
    let back = deserialize(text.as_bytes()).unwrap();
    assert_eq!(back.layers().len(), net.layers().len());
    for (a, b) in net.layers().iter().zip(back.layers()) {
        assert_eq!(a.weights().triplets(), b.weights().triplets());
        assert_eq!(a.biases(), b.biases());
        assert_eq!(a.activation(), b.activation());
    }
    assert_eq!(back.metadata(), net.metadata());
    assert_eq!(serialize(&back), text);
}

#[test]
fn malformed_streams_are_rejected_with_offsets() {
    let text = serialize(&build_max().unwrap().net);
    let truncated = &text.as_bytes()[..text.len() / 2];
    assert!(matches!(deserialize(truncated), Err(NetworkError::Parse { .. })));
    let empty = r#"{"input_dim": 2, "output_dim": 1, "layers": []}"#;
    assert!(deserialize(empty.as_bytes()).is_err());
    let bad_dims = text.replacen("\"input_dim\": 2", "\"input_dim\": 3", 1);
    assert!(deserialize(bad_dims.as_bytes()).is_err());
}

#[test]
fn evaluation_is_deterministic_across_threads() {
    let net = build_depth3_rank(20, 0.01, &[10]).unwrap();
    let x = uniform(&mut rng(45), 20);
    let want = net.evaluate(&x).unwrap();
    std::thread::scope(|s| {
        let handles: Vec<_> = (0..4).map(|_| s.spawn(|| net.evaluate(&x).unwrap())).collect();
        for h in handles {
            assert_eq!(h.join().unwrap(), want);
        }
    });
}
