//! The pre-registered synthetic benchmark: one planted-community graph per
//! seed, one model trained per seed, one held-out evaluation per model.

use std::time::{Duration, Instant};

use dane::eval::eval_link_prediction;
use dane::graph::{generate_synthetic, SyntheticParams};
use dane::training::{train, TrainConfig};

pub const SEEDS: std::ops::Range<u64> = 0..10;

/// Fixed before any ablation or sweep number was looked at.
pub fn benchmark_config() -> TrainConfig {
    TrainConfig {
        dim: 32,
        layers: 2,
        lookback: 3,
        epochs: 30,
        batch_size: 256,
        learning_rate: 0.003,
        ..TrainConfig::default()
    }
}

pub fn benchmark_graph_params() -> SyntheticParams {
    SyntheticParams {
        num_nodes: 200,
        num_communities: 4,
        num_snapshots: 10,
        ..SyntheticParams::default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Full,
    NoActiveness,
    NoTemporal,
    NoBoth,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Full => "Dane-ATT",
            Variant::NoActiveness => "w/o-P",
            Variant::NoTemporal => "w/o-D",
            Variant::NoBoth => "w/o-DP",
        }
    }

    pub fn apply(self, cfg: &TrainConfig) -> TrainConfig {
        let (no_activeness, no_temporal) = match self {
            Variant::Full => (false, false),
            Variant::NoActiveness => (true, false),
            Variant::NoTemporal => (false, true),
            Variant::NoBoth => (true, true),
        };
        TrainConfig {
            no_activeness,
            no_temporal,
            ..cfg.clone()
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub label: String,
    pub aucs: Vec<f64>,
    pub elapsed: Duration,
}

impl RunSummary {
    pub fn mean(&self) -> f64 {
        self.aucs.iter().sum::<f64>() / self.aucs.len() as f64
    }
}

/// Trains and evaluates `cfg` on each seed's graph, returning per-seed ROC-AUC.
pub fn run(label: impl Into<String>, cfg: &TrainConfig, seeds: impl IntoIterator<Item = u64>) -> RunSummary {
    let start = Instant::now();
    let params = benchmark_graph_params();
    let aucs = seeds
        .into_iter()
        .map(|seed| {
            let g = generate_synthetic(&params, seed).expect("benchmark graph");
            let model = train(&g, &TrainConfig { seed, ..cfg.clone() }).expect("training");
            let report = eval_link_prediction(&g, &model, 1, seed).expect("evaluation");
            report.mean("roc_auc").expect("roc_auc reported")
        })
        .collect();
    RunSummary {
        label: label.into(),
        aucs,
        elapsed: start.elapsed(),
    }
}

pub fn run_variant(variant: Variant, seeds: impl IntoIterator<Item = u64>) -> RunSummary {
    run(variant.name(), &variant.apply(&benchmark_config()), seeds)
}

/// Mean ROC-AUC of the full model for each layer count.
pub fn layer_sweep(layers: &[usize], seeds: &[u64]) -> Vec<RunSummary> {
    layers
        .iter()
        .map(|&l| {
            let cfg = TrainConfig {
                layers: l,
                ..benchmark_config()
            };
            run(format!("L={l}"), &cfg, seeds.iter().copied())
        })
        .collect()
}
