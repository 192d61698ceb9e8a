//! Dynamic attributed networks: an ordered sequence of snapshots over one
//! global node set.

mod io;
mod noise;
mod synthetic;

pub use io::{load_dynamic_graph, save_dynamic_graph, DatasetMeta, LoadOptions};
pub use noise::NoiseDistribution;
pub use synthetic::{generate_synthetic, generate_with_truth, Migration, PlantedStructure, SyntheticParams};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use thiserror::Error;

use crate::diffnum::{RowGroups, Tensor};

/// Dense index into the global node set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// An edge. Undirected edges are stored with the smaller id first.
pub type Edge = (NodeId, NodeId);

pub fn canonical(u: NodeId, v: NodeId) -> Edge {
    if u <= v {
        (u, v)
    } else {
        (v, u)
    }
}

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("{}{}: {message}", path.display(), line.map(|l| format!(":{l}")).unwrap_or_default())]
    Load {
        path: PathBuf,
        line: Option<usize>,
        message: String,
    },
    #[error("io error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid graph: {0}")]
    Invalid(String),
    #[error("timestamp {t} outside {min}..={max}")]
    TimestampOutOfRange { t: usize, min: usize, max: usize },
    #[error("no edges observed up to timestamp {0}")]
    NoEdges(usize),
    #[error("invalid generator parameter: {0}")]
    BadParameter(String),
}

/// The attributed graph observed at one timestamp.
#[derive(Debug, Clone)]
pub struct Snapshot {
    timestamp: usize,
    edges: Vec<Edge>,
    adjacency: Vec<Vec<NodeId>>,
    attributes: Tensor,
    labels: Option<BTreeMap<NodeId, u32>>,
    groups: Arc<RowGroups>,
}

impl Snapshot {
    /// Validates and indexes a snapshot. Duplicate edges are merged; self-loops
    /// and out-of-range endpoints are rejected.
    pub fn new(
        timestamp: usize,
        num_nodes: usize,
        directed: bool,
        edges: impl IntoIterator<Item = Edge>,
        attributes: Tensor,
        labels: Option<BTreeMap<NodeId, u32>>,
    ) -> Result<Self, GraphError> {
        if attributes.rows() != num_nodes {
            return Err(GraphError::Invalid(format!(
                "t={timestamp}: attribute matrix has {} rows, expected {num_nodes}",
                attributes.rows()
            )));
        }
        let mut set = BTreeSet::new();
        for (u, v) in edges {
            if u.0 >= num_nodes || v.0 >= num_nodes {
                return Err(GraphError::Invalid(format!(
                    "t={timestamp}: edge ({u}, {v}) references a node outside 0..{num_nodes}"
                )));
            }
            if u == v {
                return Err(GraphError::Invalid(format!("t={timestamp}: self-loop on node {u}")));
            }
            set.insert(if directed { (u, v) } else { canonical(u, v) });
        }
        if let Some(labels) = &labels {
            if let Some(bad) = labels.keys().find(|v| v.0 >= num_nodes) {
                return Err(GraphError::Invalid(format!("t={timestamp}: label for unknown node {bad}")));
            }
        }
        let edges: Vec<Edge> = set.into_iter().collect();
        let mut adjacency = vec![Vec::new(); num_nodes];
        for &(u, v) in &edges {
            adjacency[u.0].push(v);
            if !directed {
                adjacency[v.0].push(u);
            }
        }
        adjacency.iter_mut().for_each(|n| n.sort_unstable());
        let groups = Arc::new(RowGroups::from_lists(
            adjacency.iter().map(|n| n.iter().map(|v| v.0)),
        ));
        Ok(Self {
            timestamp,
            edges,
            adjacency,
            attributes,
            labels,
            groups,
        })
    }

    pub fn timestamp(&self) -> usize {
        self.timestamp
    }

    /// Sorted, duplicate-free edge list.
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn neighbors(&self, v: NodeId) -> &[NodeId] {
        &self.adjacency[v.0]
    }

    pub fn attributes(&self) -> &Tensor {
        &self.attributes
    }

    pub fn labels(&self) -> Option<&BTreeMap<NodeId, u32>> {
        self.labels.as_ref()
    }

    /// Neighbor lists in the layout used by the aggregation primitive.
    pub fn neighbor_groups(&self) -> &Arc<RowGroups> {
        &self.groups
    }

    pub fn num_nodes(&self) -> usize {
        self.adjacency.len()
    }
}

/// Records which snapshots had their topology read. Used to assert that
/// training never touches held-out timestamps.
#[derive(Debug, Default)]
pub struct AccessLog {
    timestamps: Mutex<BTreeSet<usize>>,
}

impl AccessLog {
    pub fn accessed(&self) -> BTreeSet<usize> {
        self.timestamps.lock().expect("access log poisoned").clone()
    }

    fn record(&self, t: usize) {
        self.timestamps.lock().expect("access log poisoned").insert(t);
    }
}

/// Ordered snapshots `1..=n` sharing one node set and attribute dimension.
#[derive(Debug, Clone)]
pub struct DynamicGraph {
    num_nodes: usize,
    attr_dim: usize,
    directed: bool,
    snapshots: Vec<Snapshot>,
    access_log: Option<Arc<AccessLog>>,
}

impl DynamicGraph {
    pub fn new(
        num_nodes: usize,
        attr_dim: usize,
        directed: bool,
        snapshots: Vec<Snapshot>,
    ) -> Result<Self, GraphError> {
        if snapshots.is_empty() {
            return Err(GraphError::Invalid("no snapshots".into()));
        }
        for (i, s) in snapshots.iter().enumerate() {
            if s.timestamp != i + 1 {
                return Err(GraphError::Invalid(format!(
                    "snapshot {} has timestamp {}, expected {}",
                    i + 1,
                    s.timestamp,
                    i + 1
                )));
            }
            if s.num_nodes() != num_nodes || s.attributes.cols() != attr_dim {
                return Err(GraphError::Invalid(format!(
                    "snapshot {} has shape {}x{}, expected {num_nodes}x{attr_dim}",
                    s.timestamp,
                    s.num_nodes(),
                    s.attributes.cols()
                )));
            }
        }
        Ok(Self {
            num_nodes,
            attr_dim,
            directed,
            snapshots,
            access_log: None,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn attr_dim(&self) -> usize {
        self.attr_dim
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    /// Number of snapshots `n`.
    pub fn num_timestamps(&self) -> usize {
        self.snapshots.len()
    }

    /// Snapshot at 1-based timestamp `t`.
    pub fn snapshot(&self, t: usize) -> Result<&Snapshot, GraphError> {
        self.check_range(t, 1)?;
        if let Some(log) = &self.access_log {
            log.record(t);
        }
        Ok(&self.snapshots[t - 1])
    }

    pub fn snapshots(&self) -> impl Iterator<Item = &Snapshot> {
        if let Some(log) = &self.access_log {
            (1..=self.snapshots.len()).for_each(|t| log.record(t));
        }
        self.snapshots.iter()
    }

    /// Returns a copy that records every snapshot access into `log`.
    pub fn instrumented(&self, log: Arc<AccessLog>) -> Self {
        Self {
            access_log: Some(log),
            ..self.clone()
        }
    }

    fn check_range(&self, t: usize, min: usize) -> Result<(), GraphError> {
        let max = self.snapshots.len();
        if t < min || t > max {
            return Err(GraphError::TimestampOutOfRange { t, min, max });
        }
        Ok(())
    }

    /// `E_1 ∪ … ∪ E_t`.
    pub fn cumulative_edges(&self, t: usize) -> Result<BTreeSet<Edge>, GraphError> {
        self.check_range(t, 1)?;
        let mut all = BTreeSet::new();
        for s in 1..=t {
            all.extend(self.snapshot(s)?.edges.iter().copied());
        }
        Ok(all)
    }

    /// Edges present at `t` and absent from every earlier snapshot.
    pub fn new_edges(&self, t: usize) -> Result<Vec<Edge>, GraphError> {
        self.check_range(t, 2)?;
        let seen = self.cumulative_edges(t - 1)?;
        Ok(self
            .snapshot(t)?
            .edges
            .iter()
            .filter(|e| !seen.contains(e))
            .copied()
            .collect())
    }

    /// Degrees over `E_1 ∪ … ∪ E_t`: out-degree when directed, total degree otherwise.
    pub fn cumulative_degrees(&self, t: usize) -> Result<Vec<usize>, GraphError> {
        let mut degree = vec![0; self.num_nodes];
        for (u, v) in self.cumulative_edges(t)? {
            degree[u.0] += 1;
            if !self.directed {
                degree[v.0] += 1;
            }
        }
        Ok(degree)
    }

    /// Negative-sampling distribution `∝ degree^{3/4}` on the cumulative graph up to `t`.
    pub fn noise_distribution(&self, t: usize) -> Result<NoiseDistribution, GraphError> {
        let degrees = self.cumulative_degrees(t)?;
        NoiseDistribution::from_degrees(&degrees).ok_or(GraphError::NoEdges(t))
    }

    /// A copy restricted to snapshots `1..=t`.
    pub fn prefix(&self, t: usize) -> Result<Self, GraphError> {
        self.check_range(t, 1)?;
        Ok(Self {
            snapshots: self.snapshots[..t].to_vec(),
            ..self.clone()
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn snap(t: usize, n: usize, edges: &[(usize, usize)]) -> Snapshot {
        Snapshot::new(
            t,
            n,
            false,
            edges.iter().map(|&(u, v)| (NodeId(u), NodeId(v))),
            Tensor::zeros(n, 1),
            None,
        )
        .unwrap()
    }

    fn graph(n: usize, snaps: &[&[(usize, usize)]]) -> DynamicGraph {
        let s = snaps.iter().enumerate().map(|(i, e)| snap(i + 1, n, e)).collect();
        DynamicGraph::new(n, 1, false, s).unwrap()
    }

    fn ids(edges: &[(usize, usize)]) -> Vec<Edge> {
        edges.iter().map(|&(u, v)| (NodeId(u), NodeId(v))).collect()
    }

    #[test]
    fn new_edges_is_set_difference() {
        let g = graph(3, &[&[(0, 1)], &[(0, 1), (1, 2)]]);
        assert_eq!(g.new_edges(2).unwrap(), ids(&[(1, 2)]));
    }

    #[test]
    fn reappearing_edge_is_not_new() {
        let g = graph(3, &[&[(0, 1)], &[(1, 2)], &[(0, 1), (1, 2), (0, 2)]]);
        assert_eq!(g.new_edges(3).unwrap(), ids(&[(0, 2)]));
    }

    #[test]
    fn new_edges_rejects_first_timestamp() {
        let g = graph(3, &[&[(0, 1)], &[(1, 2)]]);
        assert!(matches!(g.new_edges(1), Err(GraphError::TimestampOutOfRange { .. })));
        assert!(g.new_edges(3).is_err());
    }

    #[test]
    fn adjacency_inverts_edges() {
        let s = snap(1, 4, &[(2, 0), (0, 1), (1, 0)]);
        assert_eq!(s.edges(), ids(&[(0, 1), (0, 2)]).as_slice());
        assert_eq!(s.neighbors(NodeId(0)), &[NodeId(1), NodeId(2)]);
        assert_eq!(s.neighbors(NodeId(3)), &[] as &[NodeId]);
    }

    #[test]
    fn self_loops_rejected() {
        let err = Snapshot::new(1, 2, false, [(NodeId(1), NodeId(1))], Tensor::zeros(2, 1), None);
        assert!(err.is_err());
    }

    #[test]
    fn random_graph_new_edges_match_brute_force_union() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let snaps: Vec<Vec<(usize, usize)>> = (0..3)
                .map(|_| {
                    (0..12)
                        .map(|_| (rng.random_range(0..10), rng.random_range(0..10)))
                        .filter(|(u, v)| u != v)
                        .collect()
                })
                .collect();
            let refs: Vec<&[(usize, usize)]> = snaps.iter().map(Vec::as_slice).collect();
            let g = graph(10, &refs);
            for t in 2..=3 {
                // brute force: canonicalize everything by hand
                let norm = |e: &(usize, usize)| (e.0.min(e.1), e.0.max(e.1));
                let union: Vec<(usize, usize)> = snaps[..t - 1].iter().flatten().map(norm).collect();
                let mut expected: Vec<(usize, usize)> = snaps[t - 1]
                    .iter()
                    .map(norm)
                    .filter(|e| !union.contains(e))
                    .collect();
                expected.sort();
                expected.dedup();
                assert_eq!(g.new_edges(t).unwrap(), ids(&expected));
            }
        }
    }

    #[test]
    fn access_log_records_reads() {
        let g = graph(3, &[&[(0, 1)], &[(1, 2)], &[(0, 2)]]);
        let log = Arc::new(AccessLog::default());
        let g = g.instrumented(log.clone());
        g.cumulative_edges(2).unwrap();
        assert_eq!(log.accessed(), BTreeSet::from([1, 2]));
    }

    proptest! {
        #[test]
        fn new_edges_disjoint_from_history(
            raw in proptest::collection::vec(proptest::collection::vec((0usize..8, 0usize..8), 0..15), 2..5)
        ) {
            let snaps: Vec<Vec<(usize, usize)>> = raw
                .into_iter()
                .map(|s| s.into_iter().filter(|(u, v)| u != v).collect())
                .collect();
            let refs: Vec<&[(usize, usize)]> = snaps.iter().map(Vec::as_slice).collect();
            let g = graph(8, &refs);
            for t in 2..=g.num_timestamps() {
                let history = g.cumulative_edges(t - 1).unwrap();
                for e in g.new_edges(t).unwrap() {
                    prop_assert!(!history.contains(&e));
                    prop_assert!(e.0 <= e.1);
                }
            }
        }
    }
}
