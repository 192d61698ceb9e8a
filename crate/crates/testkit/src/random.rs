use std::collections::BTreeMap;

use dane::diffnum::Tensor;
use dane::graph::{DynamicGraph, NodeId, Snapshot};
use dane::training::{Model, Sample, TrainConfig};
use rand::Rng;
use rand_distr::StandardNormal;

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

pub fn gaussian_tensor<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, scale: f64) -> Tensor {
    let data = (0..rows * cols).map(|_| scale * normal(rng)).collect();
    Tensor::from_vec(rows, cols, data).expect("shape matches")
}

/// Independent random snapshots, each edge present with probability `density`.
pub fn random_graph<R: Rng + ?Sized>(
    rng: &mut R,
    nodes: usize,
    snapshots: usize,
    attr_dim: usize,
    directed: bool,
    density: f64,
) -> DynamicGraph {
    let mut out = Vec::with_capacity(snapshots);
    for t in 1..=snapshots {
        let mut edges = Vec::new();
        for u in 0..nodes {
            for v in 0..nodes {
                if u != v && (directed || u < v) && rng.random_bool(density) {
                    edges.push((NodeId(u), NodeId(v)));
                }
            }
        }
        let labels: BTreeMap<NodeId, u32> = (0..nodes).map(|v| (NodeId(v), rng.random_range(0..3))).collect();
        let attrs = gaussian_tensor(rng, nodes, attr_dim, 1.0);
        out.push(Snapshot::new(t, nodes, directed, edges, attrs, Some(labels)).expect("valid snapshot"));
    }
    DynamicGraph::new(nodes, attr_dim, directed, out).expect("valid graph")
}

/// Freshly initialized model with every parameter shifted by Gaussian noise,
/// so biases and gates start away from their special initial values.
pub fn perturbed_model<R: Rng + ?Sized>(rng: &mut R, nodes: usize, attr_dim: usize, cfg: &TrainConfig, scale: f64) -> Model {
    let mut model = Model::init(nodes, attr_dim, cfg).expect("valid config");
    for (_, p) in model.store.iter_mut() {
        for x in p.value_mut().data_mut() {
            *x += scale * normal(rng);
        }
    }
    model
}

pub fn random_samples<R: Rng + ?Sized>(rng: &mut R, nodes: usize, count: usize, negatives: usize) -> Vec<Sample> {
    (0..count)
        .map(|_| Sample {
            context: NodeId(rng.random_range(0..nodes)),
            center: NodeId(rng.random_range(0..nodes)),
            noise: (0..negatives).map(|_| NodeId(rng.random_range(0..nodes))).collect(),
        })
        .collect()
}

/// Scores in `[0, 1]`, quantized to a few levels half of the time to force ties.
pub fn random_scores<R: Rng + ?Sized>(rng: &mut R, len: usize) -> Vec<f64> {
    let levels = if rng.random_bool(0.5) { Some(rng.random_range(2..6)) } else { None };
    (0..len)
        .map(|_| {
            let s: f64 = rng.random();
            levels.map_or(s, |k| (s * k as f64).floor() / k as f64)
        })
        .collect()
}

/// Labels with at least one of each class.
pub fn random_labels<R: Rng + ?Sized>(rng: &mut R, len: usize) -> Vec<bool> {
    assert!(len >= 2);
    let p = rng.random_range(0.1..0.9);
    let mut labels: Vec<bool> = (0..len).map(|_| rng.random_bool(p)).collect();
    labels[0] = true;
    labels[1] = false;
    labels
}
