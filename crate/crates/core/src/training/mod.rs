//! Negative-sampling training with Adam.
//!
//! Each training transition `t → t + 1` embeds the lookback window ending at
//! `t`, predicts embeddings for `t + 1`, and scores edges of `t + 1` against
//! noise nodes drawn `∝ degree^{3/4}` from the graph up to `t`. Windows end at
//! `t = 2..=n−2`, so every transition has at least one history step and the
//! last transition `n−1 → n` stays unseen until evaluation.

mod adam;
mod config;
mod loss;
mod model;

pub use adam::{adam_step, AdamState, BETA1, BETA2, EPSILON};
pub use config::{EdgeScope, TrainConfig};
pub use loss::{ns_loss, record_ns_loss, softmax_loss_oracle, Sample};
pub use model::Model;

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::diffnum::{Tape, Tensor};
use crate::graph::{DynamicGraph, Edge, NoiseDistribution};
use crate::spatial::GroupCache;
use crate::Error;

const TRAIN_STREAM: u64 = 1;
const FINE_TUNE_STREAM: u64 = 2;

/// Window end timestamps used for training on a graph with `n` snapshots.
pub fn training_transitions(n: usize) -> std::ops::RangeInclusive<usize> {
    2..=n.saturating_sub(2)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub mean_loss: f64,
    pub wall_ms: u128,
}

/// Pairs each edge with `negatives` noise nodes; the center endpoint is picked
/// by a fair coin so undirected edges train both orientations.
pub fn draw_samples<R: Rng + ?Sized>(
    edges: &[Edge],
    noise: &NoiseDistribution,
    negatives: usize,
    directed: bool,
    rng: &mut R,
) -> Vec<Sample> {
    edges
        .iter()
        .map(|&(a, b)| {
            let (context, center) = if directed || rng.random_bool(0.5) { (b, a) } else { (a, b) };
            Sample {
                context,
                center,
                noise: (0..negatives).map(|_| noise.sample(rng)).collect(),
            }
        })
        .collect()
}

/// Loss on `batch` for the transition `t → t + 1` without updating anything.
pub fn batch_loss(model: &Model, g: &DynamicGraph, t: usize, batch: &[Sample]) -> Result<f64, Error> {
    let mut tape = Tape::new();
    let pred = model.record_forward(&mut tape, g, t, &mut model.group_cache())?;
    let loss = record_ns_loss(&mut tape, pred.merged.expect("merged"), batch)?;
    Ok(tape.value(loss).item())
}

/// One forward/backward/Adam step. Returns the loss before the update.
pub fn training_step(
    model: &mut Model,
    adam: &mut AdamState,
    groups: &mut GroupCache,
    g: &DynamicGraph,
    t: usize,
    batch: &[Sample],
) -> Result<f64, Error> {
    let mut tape = Tape::new();
    let pred = model.record_forward(&mut tape, g, t, groups)?;
    let loss = record_ns_loss(&mut tape, pred.merged.expect("merged"), batch)?;
    let value = tape.value(loss).item();
    model.store.zero_grads();
    tape.backward(loss, &Tensor::scalar(1.0), &mut model.store)?;
    adam_step(&mut model.store, adam, model.config.learning_rate);
    Ok(value)
}

pub fn train(g: &DynamicGraph, cfg: &TrainConfig) -> Result<Model, Error> {
    train_logged(g, cfg, |_| {})
}

/// Trains from scratch, reporting each finished epoch to `on_epoch`.
pub fn train_logged(
    g: &DynamicGraph,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<Model, Error> {
    cfg.validate()?;
    let n = g.num_timestamps();
    if n < 3 {
        return Err(Error::Training(format!("need at least 3 snapshots, got {n}")));
    }
    let mut transitions = Vec::new();
    for t in training_transitions(n) {
        let positives = match cfg.edge_scope {
            EdgeScope::All => g.snapshot(t + 1)?.edges().to_vec(),
            EdgeScope::New => g.new_edges(t + 1)?,
        };
        if positives.is_empty() {
            continue;
        }
        transitions.push((t, positives, g.noise_distribution(t)?));
    }
    if transitions.is_empty() {
        return Err(Error::Training(format!(
            "no trainable edges: windows ending at 2..={} yield no positives",
            n.saturating_sub(2)
        )));
    }

    let mut model = Model::init(g.num_nodes(), g.attr_dim(), cfg)?;
    let mut adam = AdamState::new(&model.store);
    let mut groups = model.group_cache();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(TRAIN_STREAM);

    for epoch in 1..=cfg.epochs {
        let start = Instant::now();
        let mut batches = Vec::new();
        for (idx, (_, positives, _)) in transitions.iter().enumerate() {
            let mut shuffled = positives.clone();
            shuffled.shuffle(&mut rng);
            for chunk in shuffled.chunks(cfg.batch_size) {
                batches.push((idx, chunk.to_vec()));
            }
        }
        batches.shuffle(&mut rng);

        let mut total = 0.0;
        for (idx, edges) in &batches {
            let (t, _, noise) = &transitions[*idx];
            let batch = draw_samples(edges, noise, cfg.negatives, g.is_directed(), &mut rng);
            total += training_step(&mut model, &mut adam, &mut groups, g, *t, &batch)?;
        }
        let mean_loss = total / batches.len() as f64;
        if !mean_loss.is_finite() {
            return Err(Error::Training(format!("loss diverged at epoch {epoch}")));
        }
        model.epoch_losses.push(mean_loss);
        let log = EpochLog {
            epoch,
            mean_loss,
            wall_ms: start.elapsed().as_millis(),
        };
        log::debug!("epoch {epoch}: mean loss {mean_loss:.6}");
        on_epoch(&log);
    }
    Ok(model)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FineTuned {
    pub model: Model,
    /// Set when there was nothing to fine-tune on and the model was returned unchanged.
    pub skipped: bool,
}

/// Continues training on the final transition `n−1 → n` with only the
/// `revealed` edges of `n` as positives. All parameters are updated;
/// `salt` separates the sampling streams of independent calls.
pub fn fine_tune(
    model: &Model,
    g: &DynamicGraph,
    revealed: &[Edge],
    steps: usize,
    salt: u64,
) -> Result<FineTuned, Error> {
    if revealed.is_empty() || steps == 0 {
        if revealed.is_empty() {
            log::warn!("fine-tuning skipped: no revealed edges");
        }
        return Ok(FineTuned {
            model: model.clone(),
            skipped: revealed.is_empty(),
        });
    }
    let t = g.num_timestamps() - 1;
    let noise = g.noise_distribution(t)?;
    let mut tuned = model.clone();
    let mut adam = AdamState::new(&tuned.store);
    let mut groups = tuned.group_cache();
    let mut rng = ChaCha8Rng::seed_from_u64(model.config.seed ^ salt);
    rng.set_stream(FINE_TUNE_STREAM);

    let mut order: Vec<Edge> = revealed.to_vec();
    let mut cursor = order.len();
    for _ in 0..steps {
        let mut edges = Vec::with_capacity(model.config.batch_size);
        while edges.len() < model.config.batch_size.min(order.len()) {
            if cursor == order.len() {
                order.shuffle(&mut rng);
                cursor = 0;
            }
            edges.push(order[cursor]);
            cursor += 1;
        }
        let batch = draw_samples(&edges, &noise, model.config.negatives, g.is_directed(), &mut rng);
        training_step(&mut tuned, &mut adam, &mut groups, g, t, &batch)?;
    }
    Ok(FineTuned {
        model: tuned,
        skipped: false,
    })
}
