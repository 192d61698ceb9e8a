use std::collections::BTreeMap;

use dane::diffnum::ParamStore;
use dane::graph::{Edge, NodeId, Snapshot};
use dane::training::Sample;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Mat = Vec<Vec<f64>>;

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn param(store: &ParamStore, name: &str) -> Mat {
    store
        .by_name(name)
        .unwrap_or_else(|| panic!("missing parameter {name}"))
        .value()
        .to_rows()
}

/// `W v` for `W` stored output-major.
pub fn matvec(w: &Mat, v: &[f64]) -> Vec<f64> {
    w.iter()
        .map(|row| {
            assert_eq!(row.len(), v.len());
            let mut s = 0.0;
            for k in 0..v.len() {
                s += row[k] * v[k];
            }
            s
        })
        .collect()
}

fn concat(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().chain(b).copied().collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for k in 0..a.len() {
        s += a[k] * b[k];
    }
    s
}

/// Layerwise `(x, p)` of one snapshot, straight from the per-node update rules.
/// `p` is empty when `gated` is false (plain mean aggregation).
pub fn spatial(snapshot: &Snapshot, store: &ParamStore, layers: usize, gated: bool) -> (Vec<Mat>, Vec<Mat>) {
    let n = snapshot.num_nodes();
    let attrs = snapshot.attributes().to_rows();
    let w_in = param(store, "spatial.input");
    let mut xs = vec![(0..n).map(|v| matvec(&w_in, &attrs[v])).collect::<Mat>()];
    let mut ps = Vec::new();
    if gated {
        ps.push(param(store, "spatial.activeness"));
    }
    let dim = w_in.len();
    for l in 0..layers {
        let w_x = param(store, &format!("spatial.x.{l}"));
        let (x, p) = (&xs[l], ps.get(l));
        let mut next_x = Vec::with_capacity(n);
        let mut next_p = Vec::with_capacity(n);
        for v in 0..n {
            let nbrs = snapshot.neighbors(NodeId(v));
            let mut x_bar = vec![0.0; dim];
            let mut p_bar = vec![0.0; dim];
            for u in nbrs {
                for k in 0..dim {
                    let gate = p.map_or(1.0, |p| p[u.0][k]);
                    x_bar[k] += gate * x[u.0][k];
                    if let Some(p) = p {
                        p_bar[k] += p[u.0][k];
                    }
                }
            }
            if !nbrs.is_empty() {
                for k in 0..dim {
                    x_bar[k] /= nbrs.len() as f64;
                    p_bar[k] /= nbrs.len() as f64;
                }
            }
            next_x.push(matvec(&w_x, &concat(&x_bar, &x[v])).into_iter().map(f64::tanh).collect());
            if let Some(p) = p {
                let w_p = param(store, &format!("spatial.p.{l}"));
                next_p.push(matvec(&w_p, &concat(&p_bar, &p[v])).into_iter().map(sigmoid).collect());
            }
        }
        xs.push(next_x);
        if gated {
            ps.push(next_p);
        }
    }
    (xs, ps)
}

/// Attention summary of one node's history (oldest first, query last).
/// Returns `(x̃, α)`.
pub fn summary(history: &[&[f64]], w_beta: &Mat) -> (Vec<f64>, Vec<f64>) {
    let query = history[history.len() - 1];
    let projected = matvec(w_beta, query);
    let beta: Vec<f64> = history.iter().map(|h| sigmoid(dot(h, &projected))).collect();
    let total: f64 = beta.iter().map(|b| b.exp()).sum();
    let alpha: Vec<f64> = beta.iter().map(|b| b.exp() / total).collect();
    let mut pooled = vec![0.0; query.len()];
    for (h, a) in history.iter().zip(&alpha) {
        for k in 0..pooled.len() {
            pooled[k] += a * h[k];
        }
    }
    (pooled.into_iter().map(f64::tanh).collect(), alpha)
}

/// `x_t + g ⊙ (x_t − x̃)` with `g = σ(W_g [x̃ ; x_t] + b_g)`. Returns `(x̂, g)`.
pub fn extrapolate(current: &[f64], summary: &[f64], w_g: &Mat, b_g: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let pre = matvec(w_g, &concat(summary, current));
    let gate: Vec<f64> = pre.iter().zip(b_g).map(|(z, b)| sigmoid(z + b)).collect();
    let pred = (0..current.len())
        .map(|k| current[k] + gate[k] * (current[k] - summary[k]))
        .collect();
    (pred, gate)
}

/// `(1/L) Σ_ℓ (W_y x̂^ℓ + b_y)` for one node.
pub fn merge(per_layer: &[&[f64]], w_y: &Mat, b_y: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; b_y.len()];
    for x in per_layer {
        let mapped = matvec(w_y, x);
        for k in 0..out.len() {
            out[k] += mapped[k] + b_y[k];
        }
    }
    out.iter().map(|v| v / per_layer.len() as f64).collect()
}

/// Merged predictions for every node from `window[time][layer][node]`
/// (chronological, last entry is the current snapshot, layer 0 included).
pub fn predict(window: &[Vec<Mat>], store: &ParamStore, temporal: bool) -> Mat {
    let current = window.last().expect("non-empty window");
    let layers = current.len() - 1;
    let n = current[0].len();
    let w_y = param(store, "temporal.merge_w");
    let b_y = param(store, "temporal.merge_b").remove(0);
    (0..n)
        .map(|v| {
            let per_layer: Vec<Vec<f64>> = (1..=layers)
                .map(|l| {
                    if !temporal {
                        return current[l][v].clone();
                    }
                    let history: Vec<&[f64]> = window[..window.len() - 1].iter().map(|s| s[l][v].as_slice()).collect();
                    let (x_tilde, _) = summary(&history, &param(store, &format!("temporal.attention.{}", l - 1)));
                    let w_g = param(store, &format!("temporal.gate_w.{}", l - 1));
                    let b_g = param(store, &format!("temporal.gate_b.{}", l - 1)).remove(0);
                    extrapolate(&current[l][v], &x_tilde, &w_g, &b_g).0
                })
                .collect();
            let refs: Vec<&[f64]> = per_layer.iter().map(Vec::as_slice).collect();
            merge(&refs, &w_y, &b_y)
        })
        .collect()
}

/// Batch-mean negative-sampling loss, term by term.
pub fn ns_loss(pred: &Mat, batch: &[Sample]) -> f64 {
    let mut total = 0.0;
    for s in batch {
        let center = &pred[s.center.0];
        total -= sigmoid(dot(&pred[s.context.0], center)).ln();
        for z in &s.noise {
            total -= sigmoid(-dot(&pred[z.0], center)).ln();
        }
    }
    total / batch.len() as f64
}

/// Exact softmax objective with plain exponentials. Undirected edges count in
/// both orientations; the normalizer runs over nodes sharing an edge with the center.
pub fn softmax_loss(pred: &Mat, edges: &[Edge], directed: bool) -> f64 {
    let mut scope: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    let mut pairs = Vec::new();
    for &(a, b) in edges {
        scope.entry(a.0).or_default().push(b.0);
        pairs.push((a.0, b.0));
        if !directed {
            scope.entry(b.0).or_default().push(a.0);
            pairs.push((b.0, a.0));
        }
    }
    let mut loss = 0.0;
    for (center, context) in pairs {
        let norm: f64 = scope[&center].iter().map(|&z| dot(&pred[z], &pred[center]).exp()).sum();
        loss -= (dot(&pred[context], &pred[center]).exp() / norm).ln();
    }
    loss
}

/// Fraction of positive/negative pairs ordered correctly, ties counting half.
pub fn roc_auc_pairs(scores: &[f64], labels: &[bool]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for i in 0..scores.len() {
        for j in 0..scores.len() {
            if labels[i] && !labels[j] {
                pairs += 1.0;
                if scores[i] > scores[j] {
                    wins += 1.0;
                } else if scores[i] == scores[j] {
                    wins += 0.5;
                }
            }
        }
    }
    wins / pairs
}

/// Average precision by recounting every prefix. Ties are ordered by a seeded
/// shuffle of the input followed by a stable descending sort.
pub fn average_precision(scores: &[f64], labels: &[bool], seed: u64) -> f64 {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    // stable insertion sort, descending
    for i in 1..order.len() {
        let mut j = i;
        while j > 0 && scores[order[j - 1]] < scores[order[j]] {
            order.swap(j - 1, j);
            j -= 1;
        }
    }
    let positives = labels.iter().filter(|&&l| l).count() as f64;
    let mut total = 0.0;
    for k in 0..order.len() {
        if labels[order[k]] {
            let hits = order[..=k].iter().filter(|&&i| labels[i]).count() as f64;
            total += hits / (k + 1) as f64;
        }
    }
    total / positives
}

pub struct Confusion {
    pub tp: f64,
    pub fp: f64,
    pub fn_: f64,
}

impl Confusion {
    pub fn f1(&self) -> f64 {
        let precision = if self.tp + self.fp == 0.0 { 0.0 } else { self.tp / (self.tp + self.fp) };
        let recall = if self.tp + self.fn_ == 0.0 { 0.0 } else { self.tp / (self.tp + self.fn_) };
        if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        }
    }
}

pub fn f1_at(scores: &[f64], labels: &[bool], threshold: f64) -> f64 {
    let mut c = Confusion { tp: 0.0, fp: 0.0, fn_: 0.0 };
    for (s, l) in scores.iter().zip(labels) {
        let predicted = *s >= threshold;
        if predicted && *l {
            c.tp += 1.0;
        } else if predicted {
            c.fp += 1.0;
        } else if *l {
            c.fn_ += 1.0;
        }
    }
    c.f1()
}

/// `Σ_c (support_c / N) F1_c` over the classes present in `truth`.
pub fn weighted_f1(predicted: &[u32], truth: &[u32]) -> f64 {
    let mut classes: Vec<u32> = truth.to_vec();
    classes.sort_unstable();
    classes.dedup();
    let mut total = 0.0;
    for c in classes {
        let scores: Vec<f64> = predicted.iter().map(|&p| if p == c { 1.0 } else { 0.0 }).collect();
        let labels: Vec<bool> = truth.iter().map(|&t| t == c).collect();
        let support = labels.iter().filter(|&&l| l).count() as f64;
        total += support / truth.len() as f64 * f1_at(&scores, &labels, 0.5);
    }
    total
}
