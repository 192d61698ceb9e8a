//! Measurement suites. Each returns the worst deviation it saw so callers
//! can both assert and report.

use std::collections::BTreeSet;
use std::sync::Arc;

use dane::diffnum::{grad_check, DiffError, ParamStore, Tape, TapeObjective, Tensor};
use dane::eval::{f1_binary, pr_auc, roc_auc, weighted_f1, LinkEvalSplit};
use dane::graph::{canonical, generate_synthetic, AccessLog, DynamicGraph, Edge, NodeId, Snapshot, SyntheticParams};
use dane::spatial::{
    embed_snapshot, propagate_activeness, record_snapshot, GateMode, LayerEmbeddings, SpatialParams,
};
use dane::temporal::{predict_layer, predict_next, record_prediction, summarize_history, EmbeddingHistory, TemporalParams};
use dane::training::{ns_loss, record_ns_loss, softmax_loss_oracle, train, Sample, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::oracle::{self, Mat};
use crate::random::{gaussian_tensor, perturbed_model, random_graph, random_labels, random_samples, random_scores};
use crate::{max_rel_err, rel_err};

pub const GRAD_EPSILON: f64 = 1e-6;

/// A small random configuration within the grad-check limits.
fn small_config<R: Rng + ?Sized>(rng: &mut R) -> TrainConfig {
    TrainConfig {
        dim: rng.random_range(1..=6),
        layers: rng.random_range(1..=3),
        lookback: rng.random_range(1..=3),
        negatives: rng.random_range(1..=2),
        no_activeness: rng.random_bool(0.25),
        no_temporal: rng.random_bool(0.25),
        seed: rng.random(),
        ..TrainConfig::default()
    }
}

fn gate_mode(cfg: &TrainConfig) -> GateMode {
    if cfg.no_activeness {
        GateMode::Disabled
    } else {
        GateMode::Learned
    }
}

fn window_snapshots<'g>(g: &'g DynamicGraph, cfg: &TrainConfig, t: usize) -> Vec<&'g Snapshot> {
    let start = if cfg.no_temporal { t } else { t.saturating_sub(cfg.lookback).max(1) };
    (start..=t).map(|s| g.snapshot(s).expect("in range")).collect()
}

/// Records spatial → temporal → negative-sampling loss against an arbitrary store.
fn record_pipeline(
    tape: &mut Tape,
    store: &ParamStore,
    cfg: &TrainConfig,
    window: &[&Snapshot],
    batch: &[Sample],
) -> Result<dane::diffnum::Var, DiffError> {
    let spatial = SpatialParams::from_store(store, cfg.layers).expect("spatial parameters");
    let temporal = TemporalParams::from_store(store, cfg.layers).expect("temporal parameters");
    let mut vars = Vec::new();
    for s in window {
        vars.push(record_snapshot(tape, store, &spatial, s, s.neighbor_groups(), gate_mode(cfg))?.x);
    }
    let pred = record_prediction(tape, store, &temporal, &vars)?;
    record_ns_loss(tape, pred.merged.expect("merged"), batch)
}

#[derive(Debug, Clone)]
pub struct GradReport {
    pub instances: usize,
    pub max_rel_error: f64,
}

/// Central-difference check of the full pipeline on random instances with
/// at most 6 nodes, `L ≤ 3`, `K ≤ 3`, `d ≤ 6`.
pub fn grad_check_pipeline(instances: usize, seed: u64) -> GradReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let cfg = small_config(&mut rng);
        let nodes = rng.random_range(2..=6);
        let attr_dim = rng.random_range(1..=4);
        let snapshots = cfg.lookback + 2;
        let directed = rng.random_bool(0.3);
        let g = random_graph(&mut rng, nodes, snapshots, attr_dim, directed, 0.4);
        let mut model = perturbed_model(&mut rng, nodes, attr_dim, &cfg, 0.3);
        let t = snapshots - 1;
        let window = window_snapshots(&g, &cfg, t);
        let count = rng.random_range(1..=4);
        let batch = random_samples(&mut rng, nodes, count, cfg.negatives);
        let objective = TapeObjective(|tape: &mut Tape, store: &ParamStore| record_pipeline(tape, store, &cfg, &window, &batch));
        let err = grad_check(&objective, &mut model.store, GRAD_EPSILON).expect("finite objective");
        worst = worst.max(err);
    }
    GradReport {
        instances,
        max_rel_error: worst,
    }
}

#[derive(Debug, Clone, Default)]
pub struct OracleCheck {
    pub name: &'static str,
    pub instances: usize,
    pub max_rel_error: f64,
}

fn rows(t: &Tensor) -> Mat {
    t.to_rows()
}

/// Compares every value-level model function with its scalar re-derivation.
pub fn model_oracles(instances: usize, seed: u64) -> Vec<OracleCheck> {
    let names = [
        "embed_snapshot",
        "propagate_activeness",
        "summarize_history",
        "predict_layer",
        "predict_next",
        "ns_loss",
        "softmax_loss_oracle",
    ];
    let mut checks: Vec<OracleCheck> = names
        .iter()
        .map(|&name| OracleCheck {
            name,
            ..Default::default()
        })
        .collect();
    let mut record = |idx: usize, err: f64| {
        checks[idx].instances += 1;
        checks[idx].max_rel_error = checks[idx].max_rel_error.max(err);
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..instances {
        let mut cfg = small_config(&mut rng);
        cfg.no_activeness = false;
        cfg.no_temporal = false;
        cfg.dim = rng.random_range(1..=8);
        let nodes = rng.random_range(2..=8);
        let attr_dim = rng.random_range(1..=5);
        let snapshots = cfg.lookback + 1;
        let directed = rng.random_bool(0.3);
        let g = random_graph(&mut rng, nodes, snapshots, attr_dim, directed, 0.4);
        let model = perturbed_model(&mut rng, nodes, attr_dim, &cfg, 0.3);
        let store = &model.store;

        // spatial, gated and plain
        let s = g.snapshot(snapshots).unwrap();
        let (ox, op) = oracle::spatial(s, store, cfg.layers, true);
        let emb = embed_snapshot(s, store, &model.spatial, GateMode::Learned).unwrap();
        let err = emb.x.iter().zip(&ox).map(|(a, e)| max_rel_err(&rows(a), e)).fold(0.0, f64::max);
        let (plain, _) = oracle::spatial(s, store, cfg.layers, false);
        let emb_plain = embed_snapshot(s, store, &model.spatial, GateMode::Disabled).unwrap();
        let err_plain = emb_plain.x.iter().zip(&plain).map(|(a, e)| max_rel_err(&rows(a), e)).fold(0.0, f64::max);
        record(0, err.max(err_plain));
        let p = propagate_activeness(s, store, &model.spatial).unwrap();
        record(1, p.iter().zip(&op).map(|(a, e)| max_rel_err(&rows(a), e)).fold(0.0, f64::max));

        // attention summary over random history tensors
        let layer = rng.random_range(1..=cfg.layers);
        let history: Vec<Tensor> = (0..rng.random_range(1..=cfg.lookback))
            .map(|_| gaussian_tensor(&mut rng, nodes, cfg.dim, 0.7))
            .collect();
        let (summary, alpha) = summarize_history(&history, store, &model.temporal, layer).unwrap();
        let w_beta = oracle::param(store, &format!("temporal.attention.{}", layer - 1));
        let mut expected_summary = Vec::new();
        let mut expected_alpha = Vec::new();
        for v in 0..nodes {
            let h: Vec<&[f64]> = history.iter().map(|t| t.row(v)).collect();
            let (x, a) = oracle::summary(&h, &w_beta);
            expected_summary.push(x);
            expected_alpha.push(a);
        }
        record(
            2,
            max_rel_err(&rows(&summary), &expected_summary).max(max_rel_err(&rows(&alpha), &expected_alpha)),
        );

        // gated extrapolation
        let current = gaussian_tensor(&mut rng, nodes, cfg.dim, 0.7);
        let pred = predict_layer(&current, &summary, store, &model.temporal, layer).unwrap();
        let w_g = oracle::param(store, &format!("temporal.gate_w.{}", layer - 1));
        let b_g = oracle::param(store, &format!("temporal.gate_b.{}", layer - 1)).remove(0);
        let expected: Mat = (0..nodes)
            .map(|v| oracle::extrapolate(current.row(v), summary.row(v), &w_g, &b_g).0)
            .collect();
        record(3, max_rel_err(&rows(&pred), &expected));

        // full prediction from embedded window
        let steps: Vec<LayerEmbeddings> = g
            .snapshots()
            .map(|s| embed_snapshot(s, store, &model.spatial, GateMode::Learned).unwrap())
            .collect();
        let window: Vec<Vec<Mat>> = steps.iter().map(|s| s.x.iter().map(rows).collect()).collect();
        let history = EmbeddingHistory::new(steps).unwrap();
        let prediction = predict_next(&history, store, &model.temporal).unwrap();
        record(4, max_rel_err(&rows(&prediction.merged), &oracle::predict(&window, store, true)));

        // losses on random predictions
        let pred = gaussian_tensor(&mut rng, nodes, cfg.dim, 0.8);
        let (count, negatives) = (rng.random_range(1..=6), rng.random_range(0..=3));
        let batch = random_samples(&mut rng, nodes, count, negatives);
        record(5, rel_err(ns_loss(&pred, &batch).unwrap(), oracle::ns_loss(&rows(&pred), &batch)));
        let mut edges: BTreeSet<Edge> = BTreeSet::new();
        // at least one distinct pair always exists since nodes >= 2
        let wanted = rng.random_range(1..=nodes - 1);
        while edges.len() < wanted {
            let (u, v) = (NodeId(rng.random_range(0..nodes)), NodeId(rng.random_range(0..nodes)));
            if u != v {
                edges.insert(if directed { (u, v) } else { canonical(u, v) });
            }
        }
        let edges: Vec<Edge> = edges.into_iter().collect();
        record(
            6,
            rel_err(
                softmax_loss_oracle(&pred, &edges, directed).unwrap(),
                oracle::softmax_loss(&rows(&pred), &edges, directed),
            ),
        );
    }
    checks
}

#[derive(Debug, Clone, Default)]
pub struct MetricCheck {
    pub name: &'static str,
    pub instances: usize,
    pub max_abs_error: f64,
}

/// Metric implementations against brute-force pair counting and confusion matrices.
pub fn metric_oracles(instances: usize, seed: u64) -> Vec<MetricCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = [0.0f64; 4];
    for i in 0..instances {
        let len = rng.random_range(2..=60);
        let scores = random_scores(&mut rng, len);
        let labels = random_labels(&mut rng, len);
        let tie_seed = i as u64;
        worst[0] = worst[0].max((roc_auc(&scores, &labels).unwrap() - oracle::roc_auc_pairs(&scores, &labels)).abs());
        worst[1] = worst[1].max(
            (pr_auc(&scores, &labels, tie_seed).unwrap() - oracle::average_precision(&scores, &labels, tie_seed)).abs(),
        );
        let threshold = if rng.random_bool(0.5) { 0.5 } else { rng.random() };
        worst[2] = worst[2].max((f1_binary(&scores, &labels, threshold).unwrap() - oracle::f1_at(&scores, &labels, threshold)).abs());
        let classes = rng.random_range(2..=5);
        let truth: Vec<u32> = (0..len).map(|_| rng.random_range(0..classes)).collect();
        let predicted: Vec<u32> = (0..len).map(|_| rng.random_range(0..classes)).collect();
        worst[3] = worst[3].max((weighted_f1(&predicted, &truth).unwrap() - oracle::weighted_f1(&predicted, &truth)).abs());
    }
    ["roc_auc", "pr_auc", "f1", "weighted_f1"]
        .into_iter()
        .zip(worst)
        .map(|(name, max_abs_error)| MetricCheck {
            name,
            instances,
            max_abs_error,
        })
        .collect()
}

#[derive(Debug, Clone, Default)]
pub struct InvariantReport {
    /// Largest `|Σα − 1|`.
    pub alpha_sum_deviation: f64,
    /// Every gate `g` and propagated activeness `p^ℓ`, `ℓ ≥ 1`, in the open unit interval.
    pub gates_in_range: bool,
    /// Largest deviation between permuted outputs and outputs of the permuted input.
    pub permutation_error: f64,
    /// Eval splits disjoint and training never read the final snapshot.
    pub no_leakage: bool,
}

/// Relabels nodes with `perm` (old id → new id), moving attribute and activeness rows along.
pub fn permute(g: &DynamicGraph, store: &ParamStore, perm: &[usize]) -> (DynamicGraph, ParamStore) {
    let n = g.num_nodes();
    let move_rows = |t: &Tensor| {
        let mut out = Tensor::zeros(t.rows(), t.cols());
        for v in 0..n {
            out.row_mut(perm[v]).copy_from_slice(t.row(v));
        }
        out
    };
    let snapshots = g
        .snapshots()
        .map(|s| {
            let edges = s.edges().iter().map(|&(u, v)| (NodeId(perm[u.0]), NodeId(perm[v.0])));
            let labels = s.labels().map(|l| l.iter().map(|(v, c)| (NodeId(perm[v.0]), *c)).collect());
            Snapshot::new(s.timestamp(), n, g.is_directed(), edges, move_rows(s.attributes()), labels).unwrap()
        })
        .collect();
    let permuted = DynamicGraph::new(n, g.attr_dim(), g.is_directed(), snapshots).unwrap();
    let mut store = store.clone();
    if let Some(id) = store.id("spatial.activeness") {
        let moved = move_rows(store.get(id).value());
        *store.get_mut(id).value_mut() = moved;
    }
    (permuted, store)
}

pub fn invariants(instances: usize, seed: u64) -> InvariantReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = InvariantReport {
        gates_in_range: true,
        no_leakage: true,
        ..Default::default()
    };
    let open_unit = |t: &Tensor| t.data().iter().all(|&x| x > 0.0 && x < 1.0);
    for _ in 0..instances {
        let mut cfg = small_config(&mut rng);
        cfg.no_activeness = false;
        cfg.no_temporal = false;
        let nodes = rng.random_range(2..=8);
        let attr_dim = rng.random_range(1..=4);
        let snapshots = cfg.lookback + 2;
        let directed = rng.random_bool(0.3);
        let g = random_graph(&mut rng, nodes, snapshots, attr_dim, directed, 0.4);
        // large weights push gates towards saturation
        let model = perturbed_model(&mut rng, nodes, attr_dim, &cfg, 1.0);
        let t = snapshots - 1;
        let pred = model.predict_detailed(&g, t).unwrap();
        for a in &pred.alpha {
            for r in 0..a.rows() {
                let sum: f64 = a.row(r).iter().sum();
                report.alpha_sum_deviation = report.alpha_sum_deviation.max((sum - 1.0).abs());
            }
        }
        report.gates_in_range &= pred.gate.iter().all(open_unit);
        let emb = model.embed(&g, t).unwrap();
        report.gates_in_range &= emb.p.iter().skip(1).all(open_unit);

        let mut perm: Vec<usize> = (0..nodes).collect();
        rand::seq::SliceRandom::shuffle(perm.as_mut_slice(), &mut rng);
        let (pg, pstore) = permute(&g, &model.store, &perm);
        let mut pmodel = model.clone();
        pmodel.store = pstore;
        let ppred = pmodel.predict_detailed(&pg, t).unwrap();
        for v in 0..nodes {
            for (a, b) in pred.merged.row(v).iter().zip(ppred.merged.row(perm[v])) {
                report.permutation_error = report.permutation_error.max((a - b).abs());
            }
        }
    }
    report.no_leakage = leakage_guard(seed);
    report
}

/// Draws several eval splits and a short training run on a small synthetic
/// graph; true when splits are disjoint and training never read snapshot n.
pub fn leakage_guard(seed: u64) -> bool {
    let params = SyntheticParams {
        num_nodes: 40,
        num_communities: 2,
        num_snapshots: 6,
        attr_dim: 4,
        ..SyntheticParams::default()
    };
    let g = generate_synthetic(&params, seed).unwrap();
    let n = g.num_timestamps();
    let new: BTreeSet<Edge> = g.new_edges(n).unwrap().into_iter().collect();
    let seen = g.cumulative_edges(n).unwrap();
    for s in 0..10 {
        let split = LinkEvalSplit::draw(&g, seed.wrapping_add(s)).unwrap();
        let fine: BTreeSet<Edge> = split.fine_tune_edges.iter().copied().collect();
        let test: BTreeSet<Edge> = split.test_positives.iter().copied().collect();
        let union: BTreeSet<Edge> = fine.union(&test).copied().collect();
        if !fine.is_disjoint(&test) || union != new || split.test_negatives.iter().any(|e| seen.contains(e)) {
            return false;
        }
    }
    let log = Arc::new(AccessLog::default());
    let watched = g.instrumented(log.clone());
    let cfg = TrainConfig {
        dim: 4,
        layers: 1,
        lookback: 2,
        epochs: 1,
        seed,
        ..TrainConfig::default()
    };
    train(&watched, &cfg).unwrap();
    !log.accessed().contains(&n)
}
