use std::collections::BTreeMap;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::TrainConfig;
use crate::diffnum::{ParamCheckpoint, ParamStore, Tape, Tensor, Var};
use crate::graph::{DynamicGraph, GraphError};
use crate::spatial::{record_snapshot, window_range, GateMode, GroupCache, LayerEmbeddings, SpatialParams};
use crate::temporal::{record_prediction, Prediction, PredictionVars, TemporalParams};
use crate::Error;

/// Learned parameters plus the configuration that produced them.
#[derive(Debug, Clone)]
pub struct Model {
    pub store: ParamStore,
    pub spatial: SpatialParams,
    pub temporal: TemporalParams,
    pub config: TrainConfig,
    pub num_nodes: usize,
    pub attr_dim: usize,
    pub epoch_losses: Vec<f64>,
}

/// Parameter handles are store-specific, so equality compares parameters by name.
impl PartialEq for Model {
    fn eq(&self, other: &Self) -> bool {
        self.store == other.store
            && self.config == other.config
            && self.num_nodes == other.num_nodes
            && self.attr_dim == other.attr_dim
            && self.epoch_losses == other.epoch_losses
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelCheckpoint {
    #[serde(flatten)]
    params: ParamCheckpoint,
    config: TrainConfig,
    seed: u64,
    epoch_losses: Vec<f64>,
}

impl Model {
    /// Fresh parameters, initialized from `config.seed`.
    pub fn init(num_nodes: usize, attr_dim: usize, config: &TrainConfig) -> Result<Self, Error> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut store = ParamStore::new();
        let spatial = SpatialParams::init(
            &mut store,
            num_nodes,
            attr_dim,
            config.dim,
            config.layers,
            !config.no_activeness,
            &mut rng,
        )?;
        let temporal = TemporalParams::init(&mut store, config.dim, config.layers, !config.no_temporal, &mut rng)?;
        Ok(Self {
            store,
            spatial,
            temporal,
            config: config.clone(),
            num_nodes,
            attr_dim,
            epoch_losses: Vec::new(),
        })
    }

    pub fn gate(&self) -> GateMode {
        if self.spatial.has_activeness() {
            GateMode::Learned
        } else {
            GateMode::Disabled
        }
    }

    /// Parameter names, sorted.
    pub fn parameter_names(&self) -> Vec<String> {
        self.store.names().map(str::to_owned).collect()
    }

    fn check_graph(&self, g: &DynamicGraph) -> Result<(), Error> {
        if g.num_nodes() != self.num_nodes || g.attr_dim() != self.attr_dim {
            return Err(Error::Config(format!(
                "model expects {} nodes with {} attributes, graph has {} and {}",
                self.num_nodes,
                self.attr_dim,
                g.num_nodes(),
                g.attr_dim()
            )));
        }
        Ok(())
    }

    /// Records the prediction of embeddings at `t + 1` from the window ending at `t`.
    pub fn record_forward(
        &self,
        tape: &mut Tape,
        g: &DynamicGraph,
        t: usize,
        groups: &mut GroupCache,
    ) -> Result<PredictionVars, Error> {
        self.check_graph(g)?;
        let range = if self.temporal.is_temporal() {
            if t < 2 {
                return Err(GraphError::TimestampOutOfRange {
                    t,
                    min: 2,
                    max: g.num_timestamps(),
                }
                .into());
            }
            window_range(t, self.config.lookback)
        } else {
            t..=t
        };
        let gate = self.gate();
        let mut window: Vec<Vec<Var>> = Vec::new();
        for s in range {
            let snapshot = g.snapshot(s)?;
            let groups = groups.groups(snapshot);
            let vars = record_snapshot(tape, &self.store, &self.spatial, snapshot, &groups, gate)?;
            window.push(vars.x);
        }
        Ok(record_prediction(tape, &self.store, &self.temporal, &window)?)
    }

    pub(crate) fn group_cache(&self) -> GroupCache {
        GroupCache::new(self.config.max_neighbors, self.config.seed)
    }

    /// Predicted embeddings `x̂_{t+1}` for every node.
    pub fn predict(&self, g: &DynamicGraph, t: usize) -> Result<Tensor, Error> {
        let mut tape = Tape::new();
        let vars = self.record_forward(&mut tape, g, t, &mut self.group_cache())?;
        Ok(tape.value(vars.merged.expect("merged prediction")).clone())
    }

    /// Merged and per-layer predictions for `t + 1` with attention and gate values.
    pub fn predict_detailed(&self, g: &DynamicGraph, t: usize) -> Result<Prediction, Error> {
        let mut tape = Tape::new();
        let vars = self.record_forward(&mut tape, g, t, &mut self.group_cache())?;
        let grab = |vs: &[Var]| vs.iter().map(|&v| tape.value(v).clone()).collect::<Vec<_>>();
        Ok(Prediction {
            merged: tape.value(vars.merged.expect("merged prediction")).clone(),
            per_layer: grab(&vars.per_layer),
            alpha: grab(&vars.alpha),
            gate: grab(&vars.gate),
        })
    }

    /// Spatial embeddings `x[0..=L]` and activeness of snapshot `t`.
    pub fn embed(&self, g: &DynamicGraph, t: usize) -> Result<LayerEmbeddings, Error> {
        self.check_graph(g)?;
        let snapshot = g.snapshot(t)?;
        let groups = self.group_cache().groups(snapshot);
        let mut tape = Tape::new();
        let vars = record_snapshot(&mut tape, &self.store, &self.spatial, snapshot, &groups, self.gate())?;
        let grab = |vs: &[Var]| vs.iter().map(|&v| tape.value(v).clone()).collect::<Vec<_>>();
        Ok(LayerEmbeddings {
            timestamp: t,
            x: grab(&vars.x),
            p: grab(&vars.p),
        })
    }

    pub fn to_json(&self) -> String {
        let dims = BTreeMap::from([
            ("attr_dim".to_string(), self.attr_dim),
            ("dim".to_string(), self.config.dim),
            ("layers".to_string(), self.config.layers),
            ("num_nodes".to_string(), self.num_nodes),
        ]);
        let ckpt = ModelCheckpoint {
            params: self.store.to_checkpoint(dims),
            config: self.config.clone(),
            seed: self.config.seed,
            epoch_losses: self.epoch_losses.clone(),
        };
        // round-trip through Value so every object's keys come out sorted
        let value = serde_json::to_value(&ckpt).expect("checkpoint serializes");
        serde_json::to_string_pretty(&value).expect("value serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self, Error> {
        let bad = |message: String| Error::Format {
            path: "<checkpoint>".into(),
            message,
        };
        let ckpt: ModelCheckpoint = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
        let dim = |key: &str| {
            ckpt.params
                .dims
                .get(key)
                .copied()
                .ok_or_else(|| bad(format!("missing dims.{key}")))
        };
        let (num_nodes, attr_dim) = (dim("num_nodes")?, dim("attr_dim")?);
        let config = ckpt.config;
        config.validate()?;
        if dim("dim")? != config.dim || dim("layers")? != config.layers {
            return Err(bad("dims disagree with config".into()));
        }
        let store = ParamStore::from_checkpoint(&ckpt.params)?;
        let spatial = SpatialParams::from_store(&store, config.layers)
            .ok_or_else(|| bad("missing spatial parameters".into()))?;
        let temporal = TemporalParams::from_store(&store, config.layers)
            .ok_or_else(|| bad("missing temporal parameters".into()))?;
        if spatial.has_activeness() == config.no_activeness || temporal.is_temporal() == config.no_temporal {
            return Err(bad("parameter inventory disagrees with ablation flags".into()));
        }
        let shapes_ok = store.iter().all(|(_, p)| {
            let (r, c) = p.value().shape();
            match p.name() {
                "spatial.input" => (r, c) == (config.dim, attr_dim),
                "spatial.activeness" => (r, c) == (num_nodes, config.dim),
                n if n.contains("gate_b") || n == "temporal.merge_b" => (r, c) == (1, config.dim),
                n if n.starts_with("spatial.") || n.contains("gate_w") => (r, c) == (config.dim, 2 * config.dim),
                _ => (r, c) == (config.dim, config.dim),
            }
        });
        if !shapes_ok {
            return Err(bad("parameter shapes disagree with dims".into()));
        }
        Ok(Self {
            store,
            spatial,
            temporal,
            config,
            num_nodes,
            attr_dim,
            epoch_losses: ckpt.epoch_losses,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), Error> {
        std::fs::write(path, self.to_json()).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Format { message, .. } => Error::Format {
                path: path.to_path_buf(),
                message,
            },
            other => other,
        })
    }
}
