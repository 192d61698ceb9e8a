//! Activeness-aware neighborhood embedding of a single snapshot.
//!
//! Each node carries an embedding `x` and an activeness gate `p`. Per layer,
//! a node averages its neighbors' gated messages `p ⊙ x` and their gates,
//! then mixes each average with its own state:
//!
//! ```text
//! x̄ = mean_{u ∈ N(v)} p_u ⊙ x_u        x' = tanh(W_x [x̄ ; x])
//! p̄ = mean_{u ∈ N(v)} p_u              p' = σ(W_p [p̄ ; p])
//! ```
//!
//! Layer 0 uses `x⁰ = W_in a_v` (projected attributes) and `p⁰ = P_v`, one row
//! of a time-invariant learned matrix. An empty neighborhood averages to zero.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};

use crate::diffnum::{DiffError, ParamId, ParamStore, RowGroups, Tape, Tensor, Var};
use crate::graph::{DynamicGraph, GraphError, Snapshot};

/// How neighbor messages are gated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GateMode {
    /// `p ⊙ x` with learned activeness.
    Learned,
    /// Plain mean aggregation of `x` (no activeness parameters).
    Disabled,
    /// Gates forced to the all-ones vector. Numerically identical to `Disabled`.
    Ones,
}

/// Handles to the spatial parameters inside a [`ParamStore`].
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialParams {
    pub input: ParamId,
    pub layer_x: Vec<ParamId>,
    pub layer_p: Vec<ParamId>,
    pub activeness: Option<ParamId>,
}

/// Glorot-uniform `rows × cols` matrix.
pub(crate) fn glorot<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Tensor {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    let dist = Uniform::new_inclusive(-limit, limit).expect("finite bounds");
    let data = (0..rows * cols).map(|_| dist.sample(rng)).collect();
    Tensor::from_vec(rows, cols, data).expect("shape matches")
}

impl SpatialParams {
    /// Registers `W_in`, `W_x[ℓ]` and, when `with_activeness`, `W_p[ℓ]` and `P`.
    pub fn init<R: Rng + ?Sized>(
        store: &mut ParamStore,
        num_nodes: usize,
        attr_dim: usize,
        dim: usize,
        layers: usize,
        with_activeness: bool,
        rng: &mut R,
    ) -> Result<Self, DiffError> {
        let input = store.insert("spatial.input", glorot(dim, attr_dim, rng))?;
        let mut layer_x = Vec::with_capacity(layers);
        let mut layer_p = Vec::new();
        for l in 0..layers {
            layer_x.push(store.insert(format!("spatial.x.{l}"), glorot(dim, 2 * dim, rng))?);
            if with_activeness {
                layer_p.push(store.insert(format!("spatial.p.{l}"), glorot(dim, 2 * dim, rng))?);
            }
        }
        let activeness = if with_activeness {
            let normal = Normal::new(0.0, 0.1).expect("valid std");
            let data = (0..num_nodes * dim).map(|_| normal.sample(rng)).collect();
            Some(store.insert("spatial.activeness", Tensor::from_vec(num_nodes, dim, data)?)?)
        } else {
            None
        };
        Ok(Self {
            input,
            layer_x,
            layer_p,
            activeness,
        })
    }

    /// Looks up handles by the names `init` registers.
    pub fn from_store(store: &ParamStore, layers: usize) -> Option<Self> {
        let layer_x = (0..layers)
            .map(|l| store.id(&format!("spatial.x.{l}")))
            .collect::<Option<Vec<_>>>()?;
        let activeness = store.id("spatial.activeness");
        let layer_p = if activeness.is_some() {
            (0..layers)
                .map(|l| store.id(&format!("spatial.p.{l}")))
                .collect::<Option<Vec<_>>>()?
        } else {
            Vec::new()
        };
        Some(Self {
            input: store.id("spatial.input")?,
            layer_x,
            layer_p,
            activeness,
        })
    }

    pub fn num_layers(&self) -> usize {
        self.layer_x.len()
    }

    pub fn has_activeness(&self) -> bool {
        self.activeness.is_some()
    }

    fn gate_for(&self, requested: GateMode) -> GateMode {
        match (requested, self.has_activeness()) {
            (GateMode::Learned, false) => GateMode::Disabled,
            (mode, _) => mode,
        }
    }
}

/// Tape handles for one snapshot: `x[ℓ]` and `p[ℓ]` for `ℓ = 0..=L`
/// (`p` is empty when gating is not learned).
#[derive(Debug, Clone)]
pub struct SnapshotVars {
    pub x: Vec<Var>,
    pub p: Vec<Var>,
}

/// Records the activeness recursion for every node of `snapshot`.
pub fn record_activeness(
    tape: &mut Tape,
    store: &ParamStore,
    params: &SpatialParams,
    groups: &Arc<RowGroups>,
) -> Result<Vec<Var>, DiffError> {
    let Some(p_id) = params.activeness else {
        return Ok(Vec::new());
    };
    let mut p = vec![tape.param(store, p_id)?];
    for &w_id in &params.layer_p {
        let prev = *p.last().expect("layer 0 present");
        let pooled = tape.neighbor_mean(prev, groups.clone())?;
        let joined = tape.concat_cols(&[pooled, prev])?;
        let w = tape.param(store, w_id)?;
        let pre = tape.matmul_nt(joined, w)?;
        p.push(tape.sigmoid(pre)?);
    }
    Ok(p)
}

/// Records all layers of the neighborhood embedding for `snapshot`.
pub fn record_snapshot(
    tape: &mut Tape,
    store: &ParamStore,
    params: &SpatialParams,
    snapshot: &Snapshot,
    groups: &Arc<RowGroups>,
    gate: GateMode,
) -> Result<SnapshotVars, DiffError> {
    let gate = params.gate_for(gate);
    let p = if gate == GateMode::Learned {
        record_activeness(tape, store, params, groups)?
    } else {
        Vec::new()
    };
    let ones = if gate == GateMode::Ones {
        let dim = store.get(params.input).value().rows();
        Some(tape.input(Tensor::filled(snapshot.num_nodes(), dim, 1.0))?)
    } else {
        None
    };

    let attrs = tape.input(snapshot.attributes().clone())?;
    let w_in = tape.param(store, params.input)?;
    let mut x = vec![tape.matmul_nt(attrs, w_in)?];
    for (l, &w_id) in params.layer_x.iter().enumerate() {
        let prev = x[l];
        let message = match gate {
            GateMode::Learned => tape.mul(p[l], prev)?,
            GateMode::Ones => tape.mul(ones.expect("ones recorded"), prev)?,
            GateMode::Disabled => prev,
        };
        let pooled = tape.neighbor_mean(message, groups.clone())?;
        let joined = tape.concat_cols(&[pooled, prev])?;
        let w = tape.param(store, w_id)?;
        let pre = tape.matmul_nt(joined, w)?;
        x.push(tape.tanh(pre)?);
    }
    Ok(SnapshotVars { x, p })
}

/// Layerwise embeddings of one snapshot: `x[ℓ]`, `p[ℓ]` are `|V| × d` for `ℓ = 0..=L`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerEmbeddings {
    pub timestamp: usize,
    pub x: Vec<Tensor>,
    pub p: Vec<Tensor>,
}

/// Activeness vectors `p[0..=L]` for every node.
pub fn propagate_activeness(
    snapshot: &Snapshot,
    store: &ParamStore,
    params: &SpatialParams,
) -> Result<Vec<Tensor>, DiffError> {
    let mut tape = Tape::new();
    let p = record_activeness(&mut tape, store, params, snapshot.neighbor_groups())?;
    Ok(p.into_iter().map(|v| tape.value(v).clone()).collect())
}

pub fn embed_snapshot(
    snapshot: &Snapshot,
    store: &ParamStore,
    params: &SpatialParams,
    gate: GateMode,
) -> Result<LayerEmbeddings, DiffError> {
    let mut tape = Tape::new();
    let vars = record_snapshot(&mut tape, store, params, snapshot, snapshot.neighbor_groups(), gate)?;
    Ok(LayerEmbeddings {
        timestamp: snapshot.timestamp(),
        x: vars.x.iter().map(|&v| tape.value(v).clone()).collect(),
        p: vars.p.iter().map(|&v| tape.value(v).clone()).collect(),
    })
}

/// Timestamps `max(1, t − K) ..= t`.
pub fn window_range(t: usize, lookback: usize) -> std::ops::RangeInclusive<usize> {
    t.saturating_sub(lookback).max(1)..=t
}

/// Embeds every snapshot in the lookback window ending at `t`.
pub fn embed_window(
    g: &DynamicGraph,
    store: &ParamStore,
    params: &SpatialParams,
    t: usize,
    lookback: usize,
    gate: GateMode,
) -> Result<Vec<LayerEmbeddings>, crate::Error> {
    if t == 0 || t > g.num_timestamps() {
        return Err(GraphError::TimestampOutOfRange {
            t,
            min: 1,
            max: g.num_timestamps(),
        }
        .into());
    }
    window_range(t, lookback)
        .map(|s| Ok(embed_snapshot(g.snapshot(s)?, store, params, gate)?))
        .collect()
}

/// Neighbor lists capped at `cap` entries, subsampled uniformly and
/// deterministically from `seed` and the snapshot timestamp.
pub fn capped_groups(snapshot: &Snapshot, cap: usize, seed: u64) -> Arc<RowGroups> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (snapshot.timestamp() as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    let lists = (0..snapshot.num_nodes()).map(|v| {
        let all = snapshot.neighbors(crate::graph::NodeId(v));
        if all.len() <= cap {
            all.iter().map(|u| u.0).collect::<Vec<_>>()
        } else {
            let mut picked: Vec<usize> = sample(&mut rng, all.len(), cap).into_iter().map(|i| all[i].0).collect();
            picked.sort_unstable();
            picked
        }
    });
    Arc::new(RowGroups::from_lists(lists))
}

/// Aggregation groups for each timestamp, honoring an optional neighbor cap.
#[derive(Debug, Clone, Default)]
pub struct GroupCache {
    cap: Option<(usize, u64)>,
    cache: BTreeMap<usize, Arc<RowGroups>>,
}

impl GroupCache {
    pub fn new(max_neighbors: Option<usize>, seed: u64) -> Self {
        Self {
            cap: max_neighbors.map(|c| (c, seed)),
            cache: BTreeMap::new(),
        }
    }

    pub fn groups(&mut self, snapshot: &Snapshot) -> Arc<RowGroups> {
        match self.cap {
            None => snapshot.neighbor_groups().clone(),
            Some((cap, seed)) => self
                .cache
                .entry(snapshot.timestamp())
                .or_insert_with(|| capped_groups(snapshot, cap, seed))
                .clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::NodeId;

    fn snapshot(n: usize, edges: &[(usize, usize)], attrs: Tensor) -> Snapshot {
        Snapshot::new(1, n, false, edges.iter().map(|&(u, v)| (NodeId(u), NodeId(v))), attrs, None).unwrap()
    }

    fn params(n: usize, attr_dim: usize, dim: usize, layers: usize, seed: u64) -> (ParamStore, SpatialParams) {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = SpatialParams::init(&mut store, n, attr_dim, dim, layers, true, &mut rng).unwrap();
        (store, p)
    }

    #[test]
    fn activeness_on_cycle_with_equal_rows_is_uniform() {
        let n = 5;
        let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        let s = snapshot(n, &edges, Tensor::zeros(n, 2));
        let (mut store, params) = params(n, 2, 3, 3, 1);
        let row = [0.3, -0.2, 0.05];
        let p = store.get_mut(params.activeness.unwrap()).value_mut();
        for v in 0..n {
            p.row_mut(v).copy_from_slice(&row);
        }
        let layers = propagate_activeness(&s, &store, &params).unwrap();
        for layer in &layers {
            for v in 1..n {
                assert_eq!(layer.row(v), layer.row(0));
            }
        }
        for layer in &layers[1..] {
            assert!(layer.data().iter().all(|&x| x > 0.0 && x < 1.0));
        }
    }

    #[test]
    fn isolated_node_sees_zero_neighborhood() {
        let attrs = Tensor::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![0.5, 0.5]]).unwrap();
        let s = snapshot(3, &[(0, 1)], attrs.clone());
        let (store, params) = params(3, 2, 3, 1, 2);
        let e = embed_snapshot(&s, &store, &params, GateMode::Learned).unwrap();
        let w_in = store.get(params.input).value();
        let w_x = store.get(params.layer_x[0]).value();
        let x0: Vec<f64> = (0..3).map(|i| (0..2).map(|j| w_in.get(i, j) * attrs.get(2, j)).sum()).collect();
        for i in 0..3 {
            let pre: f64 = (0..3).map(|j| w_x.get(i, 3 + j) * x0[j]).sum();
            assert!((e.x[1].get(2, i) - pre.tanh()).abs() < 1e-15);
        }
    }

    #[test]
    fn symmetric_pair_embeds_identically() {
        let attrs = Tensor::from_rows(&[vec![0.2, 0.7], vec![0.2, 0.7], vec![1.0, -1.0]]).unwrap();
        let s = snapshot(3, &[(0, 1)], attrs);
        let (mut store, params) = params(3, 2, 4, 3, 3);
        let p = store.get_mut(params.activeness.unwrap()).value_mut();
        let row0 = p.row(0).to_vec();
        p.row_mut(1).copy_from_slice(&row0);
        let e = embed_snapshot(&s, &store, &params, GateMode::Learned).unwrap();
        for layer in &e.x {
            assert_eq!(layer.row(0), layer.row(1));
        }
    }

    #[test]
    fn disabled_gate_matches_gate_of_ones() {
        let attrs = Tensor::from_rows(&[vec![0.3, 0.1], vec![-0.5, 0.9], vec![1.0, 0.0], vec![0.0, 2.0]]).unwrap();
        let s = snapshot(4, &[(0, 1), (1, 2), (1, 3)], attrs);
        let (store, params) = params(4, 2, 3, 2, 4);
        let off = embed_snapshot(&s, &store, &params, GateMode::Disabled).unwrap();
        let ones = embed_snapshot(&s, &store, &params, GateMode::Ones).unwrap();
        assert_eq!(off.x, ones.x);
    }

    #[test]
    fn window_truncates_at_first_timestamp() {
        assert_eq!(window_range(1, 3), 1..=1);
        assert_eq!(window_range(5, 3), 2..=5);
        assert_eq!(window_range(2, 3), 1..=2);
    }

    #[test]
    fn pooled_message_is_linear_in_one_neighbor_gate() {
        // atanh(x¹_v) = W_x [x̄_v ; x⁰_v] and x̄_v is linear in p⁰_u = P_u
        let attrs = Tensor::from_rows(&[vec![0.3, 0.1], vec![-0.5, 0.9], vec![1.0, 0.0]]).unwrap();
        let s = snapshot(3, &[(0, 1), (0, 2)], attrs);
        let (store, params) = params(3, 2, 3, 1, 8);
        let pre = |scale: f64| {
            let mut store = store.clone();
            let p = store.get_mut(params.activeness.unwrap()).value_mut();
            p.row_mut(1).iter_mut().for_each(|x| *x *= scale);
            let e = embed_snapshot(&s, &store, &params, GateMode::Learned).unwrap();
            e.x[1].row(0).iter().map(|x| x.atanh()).collect::<Vec<_>>()
        };
        let (full, half, none) = (pre(1.0), pre(0.5), pre(0.0));
        for j in 0..3 {
            assert!((half[j] - 0.5 * (full[j] + none[j])).abs() < 1e-12);
        }
    }

    #[test]
    fn capped_groups_respect_cap_and_are_deterministic() {
        let edges: Vec<_> = (1..10).map(|u| (0, u)).collect();
        let s = snapshot(10, &edges, Tensor::zeros(10, 1));
        let a = capped_groups(&s, 3, 42);
        let b = capped_groups(&s, 3, 42);
        assert_eq!(a, b);
        assert_eq!(a.group(0).len(), 3);
        assert_eq!(a.group(5), &[0]);
    }
}
