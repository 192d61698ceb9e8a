//! Link-prediction and node-classification evaluation.

mod logreg;
mod metrics;

pub use logreg::{train_logreg, LogRegObjective, LogisticRegression, EPOCHS, L2_LAMBDA, STEP_SIZE};
pub use metrics::{f1_binary, pr_auc, pr_ranking, roc_auc, score_link, weighted_f1};

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::diffnum::Tensor;
use crate::graph::{canonical, DynamicGraph, Edge, NodeId};
use crate::training::{fine_tune, Model};
use crate::Error;

pub const FINE_TUNE_FRACTION: f64 = 0.2;
pub const F1_THRESHOLD: f64 = 0.5;

/// Independent per-repeat seed derived from a master seed.
pub fn repeat_seed(seed: u64, repeat: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(repeat as u64 + 1);
    rng.next_u64()
}

/// Split of the final snapshot's new edges into revealed and held-out parts,
/// with an equal number of never-linked node pairs as negatives.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkEvalSplit {
    pub fine_tune_edges: Vec<Edge>,
    pub test_positives: Vec<Edge>,
    pub test_negatives: Vec<Edge>,
    pub seed: u64,
}

impl LinkEvalSplit {
    pub fn draw(g: &DynamicGraph, seed: u64) -> Result<Self, Error> {
        let n = g.num_timestamps();
        if n < 2 {
            return Err(Error::Eval("link evaluation needs at least 2 snapshots".into()));
        }
        let mut new = g.new_edges(n)?;
        if new.is_empty() {
            return Err(Error::Eval(format!("no new edges at the final timestamp {n}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        new.shuffle(&mut rng);
        let reveal = (FINE_TUNE_FRACTION * new.len() as f64).round() as usize;
        let test_positives = new.split_off(reveal.min(new.len() - 1));
        let fine_tune_edges = new;

        let seen = g.cumulative_edges(n)?;
        let num_nodes = g.num_nodes();
        let candidates = if g.is_directed() {
            num_nodes * (num_nodes - 1)
        } else {
            num_nodes * (num_nodes - 1) / 2
        };
        if candidates - seen.len() < test_positives.len() {
            return Err(Error::Eval("graph too dense to draw unlinked negatives".into()));
        }
        let mut negatives = BTreeSet::new();
        let mut test_negatives = Vec::with_capacity(test_positives.len());
        while test_negatives.len() < test_positives.len() {
            let u = NodeId(rng.random_range(0..num_nodes));
            let v = NodeId(rng.random_range(0..num_nodes));
            if u == v {
                continue;
            }
            let pair = if g.is_directed() { (u, v) } else { canonical(u, v) };
            if !seen.contains(&pair) && negatives.insert(pair) {
                test_negatives.push(pair);
            }
        }
        let split = Self {
            fine_tune_edges,
            test_positives,
            test_negatives,
            seed,
        };
        split.assert_disjoint(&seen);
        Ok(split)
    }

    /// Panics if revealed and held-out edges overlap or a negative was ever linked.
    pub fn assert_disjoint(&self, seen: &BTreeSet<Edge>) {
        let revealed: BTreeSet<_> = self.fine_tune_edges.iter().collect();
        assert!(
            self.test_positives.iter().all(|e| !revealed.contains(e)),
            "fine-tune and test edges overlap"
        );
        assert!(
            self.test_negatives.iter().all(|e| !seen.contains(e)),
            "a test negative appears in the graph"
        );
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub metric: String,
    pub mean: f64,
    pub std: f64,
    pub values: Vec<f64>,
}

impl MetricSummary {
    /// `std` is the sample standard deviation, zero for a single value.
    pub fn new(metric: impl Into<String>, values: Vec<f64>) -> Self {
        let k = values.len() as f64;
        let mean = values.iter().sum::<f64>() / k;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt()
        } else {
            0.0
        };
        Self {
            metric: metric.into(),
            mean,
            std,
            values,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub repeats: usize,
    pub seed: u64,
    pub metrics: Vec<MetricSummary>,
}

impl MetricsReport {
    pub fn get(&self, metric: &str) -> Option<&MetricSummary> {
        self.metrics.iter().find(|m| m.metric == metric)
    }

    pub fn mean(&self, metric: &str) -> Option<f64> {
        self.get(metric).map(|m| m.mean)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,mean,std,repeats\n");
        for m in &self.metrics {
            out.push_str(&format!("{},{:?},{:?},{}\n", m.metric, m.mean, m.std, m.values.len()));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }
}

/// Scores for one split under already fine-tuned predictions of the final snapshot.
pub fn link_metrics(pred: &Tensor, split: &LinkEvalSplit) -> Result<BTreeMap<&'static str, f64>, Error> {
    let mut scores = Vec::new();
    let mut labels = Vec::new();
    for (edges, label) in [(&split.test_positives, true), (&split.test_negatives, false)] {
        for &(u, v) in edges {
            scores.push(score_link(pred.row(u.0), pred.row(v.0)));
            labels.push(label);
        }
    }
    Ok(BTreeMap::from([
        ("roc_auc", roc_auc(&scores, &labels)?),
        ("pr_auc", pr_auc(&scores, &labels, split.seed)?),
        ("f1", f1_binary(&scores, &labels, F1_THRESHOLD)?),
    ]))
}

/// Per repeat: draw a split, fine-tune on the revealed edges, predict the
/// final snapshot from the window ending one step earlier and score the
/// held-out pairs.
pub fn eval_link_prediction(g: &DynamicGraph, model: &Model, repeats: usize, seed: u64) -> Result<MetricsReport, Error> {
    if repeats == 0 {
        return Err(Error::Eval("repeats must be positive".into()));
    }
    let n = g.num_timestamps();
    let mut per_metric: BTreeMap<&'static str, Vec<f64>> = BTreeMap::new();
    for r in 0..repeats {
        let split_seed = repeat_seed(seed, r);
        let split = LinkEvalSplit::draw(g, split_seed)?;
        let tuned = fine_tune(model, g, &split.fine_tune_edges, model.config.fine_tune_steps, split_seed)?;
        let pred = tuned.model.predict(g, n - 1)?;
        for (name, value) in link_metrics(&pred, &split)? {
            per_metric.entry(name).or_default().push(value);
        }
        log::info!("link repeat {r}: {:?}", per_metric.values().map(|v| v[r]).collect::<Vec<_>>());
    }
    let metrics = ["roc_auc", "pr_auc", "f1"]
        .into_iter()
        .map(|name| MetricSummary::new(name, per_metric.remove(name).unwrap_or_default()))
        .collect();
    Ok(MetricsReport { repeats, seed, metrics })
}

/// Classifies the nodes whose label changes at the final snapshot using the
/// predicted embeddings as features. Repeats whose test half has no such
/// node are skipped.
pub fn eval_node_classification(g: &DynamicGraph, model: &Model, repeats: usize, seed: u64) -> Result<MetricsReport, Error> {
    if repeats == 0 {
        return Err(Error::Eval("repeats must be positive".into()));
    }
    let n = g.num_timestamps();
    if n < 2 {
        return Err(Error::Eval("node classification needs at least 2 snapshots".into()));
    }
    let labels_at = |t: usize| -> Result<BTreeMap<NodeId, u32>, Error> {
        g.snapshot(t)?
            .labels()
            .cloned()
            .ok_or_else(|| Error::Eval(format!("snapshot {t} has no labels")))
    };
    let (last, previous) = (labels_at(n)?, labels_at(n - 1)?);
    let features = model.predict(g, n - 1)?;
    let labeled: Vec<NodeId> = last.keys().copied().collect();

    let mut values = Vec::new();
    for r in 0..repeats {
        let mut rng = ChaCha8Rng::seed_from_u64(repeat_seed(seed, r));
        let mut nodes = labeled.clone();
        nodes.shuffle(&mut rng);
        let (train, test) = nodes.split_at(nodes.len() / 2);
        let changed: Vec<NodeId> = test
            .iter()
            .copied()
            .filter(|v| previous.get(v).is_some_and(|p| *p != last[v]))
            .collect();
        if changed.is_empty() {
            log::warn!("node repeat {r} skipped: no label changes in the test half");
            continue;
        }
        let rows = |set: &[NodeId]| -> Tensor {
            let data: Vec<Vec<f64>> = set.iter().map(|v| features.row(v.0).to_vec()).collect();
            Tensor::from_rows(&data).expect("consistent widths")
        };
        let train_labels: Vec<u32> = train.iter().map(|v| last[v]).collect();
        let classifier = train_logreg(&rows(train), &train_labels, L2_LAMBDA, EPOCHS, STEP_SIZE)?;
        let predicted = classifier.predict(&rows(&changed))?;
        let truth: Vec<u32> = changed.iter().map(|v| last[v]).collect();
        values.push(weighted_f1(&predicted, &truth)?);
    }
    if values.is_empty() {
        return Err(Error::Eval("every repeat skipped: no nodes change label at the final timestamp".into()));
    }
    Ok(MetricsReport {
        repeats: values.len(),
        seed,
        metrics: vec![MetricSummary::new("weighted_f1", values)],
    })
}
