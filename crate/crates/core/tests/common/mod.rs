//! Shared helpers for the gradient-check and acceptance suites: central
//! finite differences of the reverse-mode engine.
//!
//! Every layer kind is embedded in a small double-precision graph with
//! weighted layers upstream and downstream, so perturbing the weights
//! exercises the layer's backward path. Analytic gradients must match
//! central differences (step 1e-5) to a relative error below 1e-4.
#![allow(dead_code)]

use cellpk::nn::{
    backward, forward_with_contexts, LayerKind, LayerNode, Mode, ModelGraph, Tensor,
};
use cellpk::seeds;
use rand::Rng as _;

pub const FD_STEP: f64 = 1e-5;
pub const REL_TOL: f64 = 1e-4;

fn mse(graph: &ModelGraph<f64>, batch: &Tensor<f64>, targets: &[f64], seed: u64) -> f64 {
    let (preds, _) = forward_with_contexts(graph, batch, Mode::Train, seed).unwrap();
    let n = targets.len() as f64;
    preds
        .data()
        .iter()
        .zip(targets)
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / n
}

/// Max relative error between analytic and finite-difference gradients over
/// every weight element of the graph.
pub fn max_rel_error(graph: &mut ModelGraph<f64>, batch: &Tensor<f64>, targets: &[f64], seed: u64) -> f64 {
    let target_tensor = Tensor::new(vec![targets.len(), 1], targets.to_vec()).unwrap();
    let (_, ctxs) = forward_with_contexts(graph, batch, Mode::Train, seed).unwrap();
    let (_, grads) = backward(graph, &ctxs, &target_tensor).unwrap();

    let names: Vec<String> = graph.weights().keys().cloned().collect();
    let mut worst = 0.0f64;
    for name in names {
        let numel = graph.weight(&name).unwrap().numel();
        for i in 0..numel {
            let original = graph.weight(&name).unwrap().data()[i];
            graph.weights_mut().get_mut(&name).unwrap().data_mut()[i] = original + FD_STEP;
            let up = mse(graph, batch, targets, seed);
            graph.weights_mut().get_mut(&name).unwrap().data_mut()[i] = original - FD_STEP;
            let down = mse(graph, batch, targets, seed);
            graph.weights_mut().get_mut(&name).unwrap().data_mut()[i] = original;

            let fd = (up - down) / (2.0 * FD_STEP);
            let analytic = grads.get(&name).unwrap()[i];
            let scale = analytic.abs().max(fd.abs());
            let err = if scale > 1e-7 {
                (analytic - fd).abs() / scale
            } else {
                (analytic - fd).abs()
            };
            worst = worst.max(err);
        }
    }
    worst
}

fn random_batch(shape: [usize; 3], n: usize, seed: u64) -> (Tensor<f64>, Vec<f64>) {
    let [c, h, w] = shape;
    let mut rng = seeds::rng(seed);
    let data: Vec<f64> = (0..n * c * h * w).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
    let targets: Vec<f64> = (0..n).map(|_| rng.random()).collect();
    (Tensor::new(vec![n, c, h, w], data).unwrap(), targets)
}

fn dense_tail(nodes: &mut Vec<LayerNode>, from: &str, needs_flatten: bool) {
    if needs_flatten {
        nodes.push(LayerNode::new("tail_flat", LayerKind::Flatten, &[from]));
        nodes.push(LayerNode::new("out", LayerKind::Dense { units: 1 }, &["tail_flat"]));
    } else {
        nodes.push(LayerNode::new("out", LayerKind::Dense { units: 1 }, &[from]));
    }
}

/// Build the test graph for one layer kind; returns (graph, input shape).
pub fn graph_for(kind: &str, seed: u64) -> (ModelGraph<f64>, [usize; 3]) {
    let shape = [2usize, 6, 6];
    let conv = |name: &str, from: &str, k: usize, pad: usize| {
        LayerNode::new(
            name,
            LayerKind::Conv2d { out_channels: 3, kernel: k, stride: 1, pad },
            &[from],
        )
    };
    let mut nodes = vec![LayerNode::new("input", LayerKind::Input, &[])];
    let penultimate;
    match kind {
        "conv2d" => {
            nodes.push(conv("probe", "input", 3, 1));
            penultimate = "probe";
            dense_tail(&mut nodes, "probe", true);
        }
        "conv2d_strided" => {
            nodes.push(LayerNode::new(
                "probe",
                LayerKind::Conv2d { out_channels: 3, kernel: 3, stride: 2, pad: 0 },
                &["input"],
            ));
            penultimate = "probe";
            dense_tail(&mut nodes, "probe", true);
        }
        "maxpool" => {
            nodes.push(conv("pre", "input", 3, 1));
            nodes.push(LayerNode::new("probe", LayerKind::MaxPool { kernel: 2, stride: 2 }, &["pre"]));
            penultimate = "probe";
            dense_tail(&mut nodes, "probe", true);
        }
        "concat" => {
            nodes.push(conv("pre_a", "input", 3, 1));
            nodes.push(LayerNode::new(
                "pre_b",
                LayerKind::Conv2d { out_channels: 2, kernel: 1, stride: 1, pad: 0 },
                &["input"],
            ));
            nodes.push(LayerNode::new("probe", LayerKind::Concat, &["pre_a", "pre_b"]));
            penultimate = "probe";
            dense_tail(&mut nodes, "probe", true);
        }
        "dense" => {
            nodes.push(LayerNode::new("flat", LayerKind::Flatten, &["input"]));
            nodes.push(LayerNode::new("probe", LayerKind::Dense { units: 5 }, &["flat"]));
            penultimate = "probe";
            dense_tail(&mut nodes, "probe", false);
        }
        "relu" => {
            nodes.push(conv("pre", "input", 3, 1));
            nodes.push(LayerNode::new("probe", LayerKind::Relu, &["pre"]));
            penultimate = "probe";
            dense_tail(&mut nodes, "probe", true);
        }
        "sigmoid" => {
            nodes.push(conv("pre", "input", 3, 1));
            nodes.push(LayerNode::new("probe", LayerKind::Sigmoid, &["pre"]));
            penultimate = "probe";
            dense_tail(&mut nodes, "probe", true);
        }
        "dropout" => {
            nodes.push(conv("pre", "input", 3, 1));
            nodes.push(LayerNode::new("probe", LayerKind::Dropout { p: 0.5 }, &["pre"]));
            penultimate = "probe";
            dense_tail(&mut nodes, "probe", true);
        }
        "global_avg_pool" => {
            nodes.push(conv("pre", "input", 3, 1));
            nodes.push(LayerNode::new("probe", LayerKind::GlobalAvgPool, &["pre"]));
            penultimate = "probe";
            dense_tail(&mut nodes, "probe", false);
        }
        "flatten" => {
            nodes.push(conv("pre", "input", 3, 1));
            nodes.push(LayerNode::new("probe", LayerKind::Flatten, &["pre"]));
            penultimate = "probe";
            dense_tail(&mut nodes, "probe", false);
        }
        other => panic!("unknown layer kind {other}"),
    }
    let graph = ModelGraph::new(nodes, "input", "out", penultimate, shape, seed).unwrap();
    (graph, shape)
}

pub const LAYER_KINDS: [&str; 10] = [
    "conv2d",
    "conv2d_strided",
    "maxpool",
    "concat",
    "dense",
    "relu",
    "sigmoid",
    "dropout",
    "global_avg_pool",
    "flatten",
];

/// Shared by the acceptance suite: worst relative error for one layer kind
/// over `n_seeds` random graphs/batches.
pub fn check_layer(kind: &str, n_seeds: u64) -> f64 {
    let mut worst = 0.0f64;
    for seed in 0..n_seeds {
        let (mut graph, shape) = graph_for(kind, seeds::derive_indexed(401, kind, seed));
        let (batch, targets) = random_batch(shape, 2, seeds::derive_indexed(402, kind, seed));
        let err = max_rel_error(&mut graph, &batch, &targets, seeds::derive_indexed(403, kind, seed));
        worst = worst.max(err);
    }
    worst
}

