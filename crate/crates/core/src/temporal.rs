//! Next-timestamp embedding prediction.
//!
//! For each layer `ℓ`, the last `K'` embeddings before `t` are summarized with
//! attention queried by `x_{t−1}`:
//!
//! ```text
//! β_k = σ(x_{t−k}ᵀ W_β x_{t−1})      α = softmax(β)      x̃ = tanh(Σ_k α_k x_{t−k})
//! g   = σ(W_g [x̃ ; x_t] + b_g)       x̂_{t+1} = x_t + g ⊙ (x_t − x̃)
//! ```
//!
//! and the per-layer predictions are merged as `(1/L) Σ_ℓ (W_y x̂^ℓ + b_y)`.
//!
//! The attention weights use the normalized softmax `exp(β_k) / Σ_j exp(β_j)`.
//! A denominator of `exp(Σ_j β_j)` would not sum to one.

use rand::Rng;

use crate::diffnum::{DiffError, ParamId, ParamStore, Tape, Tensor, Var};
use crate::spatial::{glorot, LayerEmbeddings};

/// Which sequence model produces the per-layer predictions. Only the
/// attention predictor is provided; recurrent predictors would be added as
/// further variants with their own parameter sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PredictorKind {
    #[default]
    Attention,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TemporalParams {
    pub attention: Vec<ParamId>,
    pub gate_weight: Vec<ParamId>,
    pub gate_bias: Vec<ParamId>,
    pub merge_weight: ParamId,
    pub merge_bias: ParamId,
}

impl TemporalParams {
    /// Registers `W_y`, `b_y` and, when `with_temporal`, `W_β[ℓ]`, `W_g[ℓ]`, `b_g[ℓ]`.
    pub fn init<R: Rng + ?Sized>(
        store: &mut ParamStore,
        dim: usize,
        layers: usize,
        with_temporal: bool,
        rng: &mut R,
    ) -> Result<Self, DiffError> {
        let (mut attention, mut gate_weight, mut gate_bias) = (Vec::new(), Vec::new(), Vec::new());
        if with_temporal {
            for l in 0..layers {
                attention.push(store.insert(format!("temporal.attention.{l}"), glorot(dim, dim, rng))?);
                gate_weight.push(store.insert(format!("temporal.gate_w.{l}"), glorot(dim, 2 * dim, rng))?);
                gate_bias.push(store.insert(format!("temporal.gate_b.{l}"), Tensor::zeros(1, dim))?);
            }
        }
        let merge_weight = store.insert("temporal.merge_w", glorot(dim, dim, rng))?;
        let merge_bias = store.insert("temporal.merge_b", Tensor::zeros(1, dim))?;
        Ok(Self {
            attention,
            gate_weight,
            gate_bias,
            merge_weight,
            merge_bias,
        })
    }

    pub fn from_store(store: &ParamStore, layers: usize) -> Option<Self> {
        let lookup = |prefix: &str| -> Option<Vec<ParamId>> {
            if store.id(&format!("{prefix}.0")).is_none() {
                return Some(Vec::new());
            }
            (0..layers).map(|l| store.id(&format!("{prefix}.{l}"))).collect()
        };
        Some(Self {
            attention: lookup("temporal.attention")?,
            gate_weight: lookup("temporal.gate_w")?,
            gate_bias: lookup("temporal.gate_b")?,
            merge_weight: store.id("temporal.merge_w")?,
            merge_bias: store.id("temporal.merge_b")?,
        })
    }

    pub fn is_temporal(&self) -> bool {
        !self.attention.is_empty()
    }
}

/// Attention summary of `history` (oldest first, last entry is the query
/// `x_{t−1}`). Rows are nodes. Returns `(x̃, α)` with `α` of shape
/// `rows × K'`, columns in the same chronological order as `history`.
pub fn record_summary(
    tape: &mut Tape,
    store: &ParamStore,
    attention: ParamId,
    history: &[Var],
) -> Result<(Var, Var), DiffError> {
    let query = *history.last().ok_or(DiffError::Empty("attention history"))?;
    let w = tape.param(store, attention)?;
    // row form of W_β x_{t−1}
    let projected = tape.matmul_nt(query, w)?;
    let mut scores = Vec::with_capacity(history.len());
    for &h in history {
        let raw = tape.row_dot(h, projected)?;
        scores.push(tape.sigmoid(raw)?);
    }
    let scores = tape.concat_cols(&scores)?;
    let alpha = tape.softmax_rows(scores)?;
    let mut pooled = None;
    for (k, &h) in history.iter().enumerate() {
        let weight = tape.column(alpha, k)?;
        let term = tape.scale_rows(h, weight)?;
        pooled = Some(match pooled {
            None => term,
            Some(acc) => tape.add(acc, term)?,
        });
    }
    let summary = tape.tanh(pooled.expect("non-empty history"))?;
    Ok((summary, alpha))
}

/// Gated extrapolation. Returns `(x̂_{t+1}, g)`.
pub fn record_extrapolation(
    tape: &mut Tape,
    store: &ParamStore,
    gate_weight: ParamId,
    gate_bias: ParamId,
    current: Var,
    summary: Var,
) -> Result<(Var, Var), DiffError> {
    let joined = tape.concat_cols(&[summary, current])?;
    let w = tape.param(store, gate_weight)?;
    let b = tape.param(store, gate_bias)?;
    let pre = tape.matmul_nt(joined, w)?;
    let pre = tape.add_row(pre, b)?;
    let gate = tape.sigmoid(pre)?;
    let change = tape.sub(current, summary)?;
    let step = tape.mul(gate, change)?;
    Ok((tape.add(current, step)?, gate))
}

/// `(1/L) Σ_ℓ (W_y x̂^ℓ + b_y)`.
pub fn record_merge(
    tape: &mut Tape,
    store: &ParamStore,
    params: &TemporalParams,
    per_layer: &[Var],
) -> Result<Var, DiffError> {
    if per_layer.is_empty() {
        return Err(DiffError::Empty("layer merge"));
    }
    let w = tape.param(store, params.merge_weight)?;
    let b = tape.param(store, params.merge_bias)?;
    let mut total = None;
    for &x in per_layer {
        let mapped = tape.matmul_nt(x, w)?;
        let mapped = tape.add_row(mapped, b)?;
        total = Some(match total {
            None => mapped,
            Some(acc) => tape.add(acc, mapped)?,
        });
    }
    tape.scale(total.expect("non-empty"), 1.0 / per_layer.len() as f64)
}

/// Intermediate tape handles of one prediction, per layer `ℓ = 1..=L`.
#[derive(Debug, Clone, Default)]
pub struct PredictionVars {
    pub merged: Option<Var>,
    pub per_layer: Vec<Var>,
    pub alpha: Vec<Var>,
    pub gate: Vec<Var>,
}

/// Predicts `x̂_{t+1}` from `window[i][ℓ]` (chronological, last entry is `t`,
/// layer 0 included and ignored). Without temporal parameters only the last
/// entry is used and the merge is applied to the current embeddings.
pub fn record_prediction(
    tape: &mut Tape,
    store: &ParamStore,
    params: &TemporalParams,
    window: &[Vec<Var>],
) -> Result<PredictionVars, DiffError> {
    let (current, history) = window.split_last().ok_or(DiffError::Empty("embedding window"))?;
    let layers = current.len() - 1;
    let mut out = PredictionVars::default();
    if !params.is_temporal() {
        out.per_layer = current[1..].to_vec();
    } else {
        if history.is_empty() {
            return Err(DiffError::Empty("attention history"));
        }
        if params.attention.len() != layers {
            return Err(DiffError::ShapeMismatch {
                op: "prediction layers",
                lhs: (params.attention.len(), 0),
                rhs: (layers, 0),
            });
        }
        for l in 1..=layers {
            let seq: Vec<Var> = history.iter().map(|step| step[l]).collect();
            let (summary, alpha) = record_summary(tape, store, params.attention[l - 1], &seq)?;
            let (pred, gate) = record_extrapolation(
                tape,
                store,
                params.gate_weight[l - 1],
                params.gate_bias[l - 1],
                current[l],
                summary,
            )?;
            out.per_layer.push(pred);
            out.alpha.push(alpha);
            out.gate.push(gate);
        }
    }
    out.merged = Some(record_merge(tape, store, params, &out.per_layer)?);
    Ok(out)
}

/// Layerwise embeddings over a contiguous run of timestamps, oldest first.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingHistory {
    steps: Vec<LayerEmbeddings>,
}

impl EmbeddingHistory {
    pub fn new(steps: Vec<LayerEmbeddings>) -> Result<Self, DiffError> {
        if steps.is_empty() {
            return Err(DiffError::Empty("embedding history"));
        }
        let contiguous = steps.windows(2).all(|w| w[1].timestamp == w[0].timestamp + 1);
        let layers = steps[0].x.len();
        if !contiguous || steps.iter().any(|s| s.x.len() != layers) {
            return Err(DiffError::Checkpoint(
                "history must cover contiguous timestamps with equal layer counts".into(),
            ));
        }
        Ok(Self { steps })
    }

    pub fn steps(&self) -> &[LayerEmbeddings] {
        &self.steps
    }

    pub fn last_timestamp(&self) -> usize {
        self.steps.last().expect("non-empty").timestamp
    }
}

/// Merged prediction for every node plus its per-layer pieces.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub merged: Tensor,
    pub per_layer: Vec<Tensor>,
    pub alpha: Vec<Tensor>,
    pub gate: Vec<Tensor>,
}

pub fn predict_next(
    history: &EmbeddingHistory,
    store: &ParamStore,
    params: &TemporalParams,
) -> Result<Prediction, DiffError> {
    let mut tape = Tape::new();
    let window = history
        .steps
        .iter()
        .map(|s| s.x.iter().map(|x| tape.input(x.clone())).collect())
        .collect::<Result<Vec<Vec<Var>>, _>>()?;
    let vars = record_prediction(&mut tape, store, params, &window)?;
    let grab = |vs: &[Var]| vs.iter().map(|&v| tape.value(v).clone()).collect::<Vec<_>>();
    Ok(Prediction {
        merged: tape.value(vars.merged.expect("merged")).clone(),
        per_layer: grab(&vars.per_layer),
        alpha: grab(&vars.alpha),
        gate: grab(&vars.gate),
    })
}

/// Value-level attention summary for layer `layer` (1-based). See [`record_summary`].
pub fn summarize_history(
    history: &[Tensor],
    store: &ParamStore,
    params: &TemporalParams,
    layer: usize,
) -> Result<(Tensor, Tensor), DiffError> {
    let attention = *params
        .attention
        .get(layer.wrapping_sub(1))
        .ok_or(DiffError::Empty("attention parameters for layer"))?;
    let mut tape = Tape::new();
    let seq = history
        .iter()
        .map(|h| tape.input(h.clone()))
        .collect::<Result<Vec<_>, _>>()?;
    let (summary, alpha) = record_summary(&mut tape, store, attention, &seq)?;
    Ok((tape.value(summary).clone(), tape.value(alpha).clone()))
}

/// Value-level gated extrapolation for layer `layer` (1-based).
pub fn predict_layer(
    current: &Tensor,
    summary: &Tensor,
    store: &ParamStore,
    params: &TemporalParams,
    layer: usize,
) -> Result<Tensor, DiffError> {
    let idx = layer.wrapping_sub(1);
    let (Some(&w), Some(&b)) = (params.gate_weight.get(idx), params.gate_bias.get(idx)) else {
        return Err(DiffError::Empty("gate parameters for layer"));
    };
    let mut tape = Tape::new();
    let c = tape.input(current.clone())?;
    let s = tape.input(summary.clone())?;
    let (pred, _) = record_extrapolation(&mut tape, store, w, b, c, s)?;
    Ok(tape.value(pred).clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup(dim: usize, layers: usize, seed: u64) -> (ParamStore, TemporalParams) {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = TemporalParams::init(&mut store, dim, layers, true, &mut rng).unwrap();
        (store, p)
    }

    fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Tensor {
        Tensor::from_vec(rows, cols, (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn single_step_history_has_unit_weight() {
        let (store, params) = setup(3, 1, 1);
        let x = Tensor::row_vector(vec![0.4, -1.2, 2.0]);
        let (summary, alpha) = summarize_history(&[x.clone()], &store, &params, 1).unwrap();
        assert_eq!(alpha.data(), &[1.0]);
        assert_eq!(summary, x.map(f64::tanh));
    }

    #[test]
    fn equal_history_gives_uniform_weights() {
        let (store, params) = setup(4, 1, 2);
        let x = Tensor::row_vector(vec![0.1, 0.2, -0.3, 0.9]);
        let (_, alpha) = summarize_history(&[x.clone(), x.clone(), x], &store, &params, 1).unwrap();
        for &a in alpha.data() {
            assert!((a - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn empty_history_is_an_error() {
        let (store, params) = setup(2, 1, 3);
        assert!(summarize_history(&[], &store, &params, 1).is_err());
    }

    #[test]
    fn saturated_gate_keeps_current_embedding() {
        let (mut store, params) = setup(4, 1, 4);
        store.get_mut(params.gate_bias[0]).value_mut().fill(-40.0);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (x, s) = (random(1, 4, &mut rng), random(1, 4, &mut rng));
        let pred = predict_layer(&x, &s, &store, &params, 1).unwrap();
        for (a, b) in pred.data().iter().zip(x.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_change_keeps_current_embedding_exactly() {
        let (store, params) = setup(4, 1, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let x = random(3, 4, &mut rng);
        assert_eq!(predict_layer(&x, &x, &store, &params, 1).unwrap(), x);
    }

    #[test]
    fn zero_history_predicts_merge_bias() {
        let (mut store, params) = setup(3, 2, 6);
        let bias = Tensor::row_vector(vec![0.5, -0.25, 1.5]);
        *store.get_mut(params.merge_bias).value_mut() = bias.clone();
        let steps = (1..=3)
            .map(|t| LayerEmbeddings {
                timestamp: t,
                x: vec![Tensor::zeros(2, 3); 3],
                p: Vec::new(),
            })
            .collect();
        let pred = predict_next(&EmbeddingHistory::new(steps).unwrap(), &store, &params).unwrap();
        for r in 0..2 {
            assert_eq!(pred.merged.row(r), bias.data());
        }
    }

    #[test]
    fn history_must_be_contiguous() {
        let step = |t| LayerEmbeddings {
            timestamp: t,
            x: vec![Tensor::zeros(1, 1); 2],
            p: Vec::new(),
        };
        assert!(EmbeddingHistory::new(vec![step(1), step(3)]).is_err());
        assert!(EmbeddingHistory::new(vec![step(2), step(3)]).is_ok());
    }

    #[test]
    fn params_round_trip_through_store_lookup() {
        let (store, params) = setup(3, 2, 7);
        assert_eq!(TemporalParams::from_store(&store, 2).unwrap(), params);
        let mut flat = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let static_params = TemporalParams::init(&mut flat, 3, 2, false, &mut rng).unwrap();
        assert!(!static_params.is_temporal());
        assert_eq!(TemporalParams::from_store(&flat, 2).unwrap(), static_params);
    }
}
