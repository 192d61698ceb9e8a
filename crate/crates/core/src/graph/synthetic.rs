//! Planted-community dynamic graph generator.
//!
//! Snapshots are cumulative: each one holds every earlier edge plus the edges
//! formed in that period. New edges form through four processes:
//!
//! * hubs (a `hub_fraction` of each community) keep attaching to members of
//!   their own community, occasionally to anyone;
//! * ordinary nodes sometimes link inside their community;
//! * triadic closure through hubs: two neighbors of a hub become linked;
//! * migration: some ordinary nodes spend a few snapshots linking into a
//!   target community at an accelerating rate while their attributes drift
//!   towards it, then join it. Migrations end at staggered times, some of
//!   them exactly at the final timestamp.
//!
//! Attributes are the scaled community indicator (blended for migrants) plus
//! Gaussian noise; labels are community ids.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{canonical, DynamicGraph, Edge, GraphError, NodeId, Snapshot};
use crate::diffnum::Tensor;

const INITIAL_DEGREE: usize = 3;
const INITIAL_HUB_EXTRA: usize = 6;
const INTRA_PROBABILITY: f64 = 0.3;
const HUB_ATTACHMENTS: usize = 4;
const HUB_CROSS_PROBABILITY: f64 = 0.1;
const CLOSURES_PER_HUB: usize = 1;
const MIGRANT_FRACTION: f64 = 0.25;
/// Edges into the target community at each step of a migration; the last
/// entry is the snapshot at which the node joins.
const MIGRANT_EDGES: [usize; 4] = [1, 1, 2, 4];
const ATTRIBUTE_SCALE: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticParams {
    pub num_nodes: usize,
    pub num_communities: usize,
    pub num_snapshots: usize,
    pub attr_dim: usize,
    pub hub_fraction: f64,
    pub noise_sigma: f64,
}

impl Default for SyntheticParams {
    fn default() -> Self {
        Self {
            num_nodes: 200,
            num_communities: 4,
            num_snapshots: 10,
            attr_dim: 16,
            hub_fraction: 0.1,
            noise_sigma: 0.2,
        }
    }
}

impl SyntheticParams {
    fn validate(&self) -> Result<(), GraphError> {
        let bad = |m: &str| Err(GraphError::BadParameter(m.into()));
        if self.num_communities == 0 || self.num_snapshots == 0 || self.attr_dim == 0 {
            return bad("num_communities, num_snapshots and attr_dim must be positive");
        }
        if self.num_nodes < 4 * self.num_communities {
            return bad("num_nodes must be at least 4 per community");
        }
        if self.attr_dim < self.num_communities {
            return bad("attr_dim must be at least num_communities");
        }
        if !(self.hub_fraction > 0.0 && self.hub_fraction < 1.0) {
            return bad("hub_fraction must lie in (0, 1)");
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad("noise_sigma must be a finite non-negative number");
        }
        Ok(())
    }
}

/// Ground truth the generator planted, for self-audits.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedStructure {
    pub community: Vec<usize>,
    pub hubs: BTreeSet<NodeId>,
    pub migrants: BTreeMap<NodeId, Migration>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Migration {
    pub target: usize,
    /// Snapshot at which the node joins `target` and takes its label.
    pub end: usize,
}

impl Migration {
    const SPAN: usize = MIGRANT_EDGES.len();

    /// 1-based step of the migration at snapshot `t`, if it is under way.
    fn step(&self, t: usize) -> Option<usize> {
        (t + Self::SPAN > self.end && t <= self.end).then(|| t + Self::SPAN - self.end)
    }

    /// Share of the attribute indicator already moved to the target.
    fn drift(&self, t: usize) -> f64 {
        match self.step(t) {
            Some(j) => (j as f64 / Self::SPAN as f64).powi(3),
            None if t > self.end => 1.0,
            None => 0.0,
        }
    }
}

struct Growing {
    edges: BTreeSet<Edge>,
    adjacency: Vec<BTreeSet<NodeId>>,
}

impl Growing {
    fn link(&mut self, u: NodeId, v: NodeId) -> bool {
        if u == v || !self.edges.insert(canonical(u, v)) {
            return false;
        }
        self.adjacency[u.0].insert(v);
        self.adjacency[v.0].insert(u);
        true
    }
}

pub fn generate_synthetic(params: &SyntheticParams, seed: u64) -> Result<DynamicGraph, GraphError> {
    generate_with_truth(params, seed).map(|(g, _)| g)
}

pub fn generate_with_truth(
    params: &SyntheticParams,
    seed: u64,
) -> Result<(DynamicGraph, PlantedStructure), GraphError> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = params.num_nodes;
    let k = params.num_communities;

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut community = vec![0; n];
    let mut members: Vec<Vec<NodeId>> = vec![Vec::new(); k];
    for (i, &v) in order.iter().enumerate() {
        community[v] = i % k;
    }
    for v in 0..n {
        members[community[v]].push(NodeId(v));
    }

    let mut hubs = BTreeSet::new();
    for group in &members {
        let count = ((params.hub_fraction * group.len() as f64).ceil() as usize).clamp(1, group.len() - 1);
        hubs.extend(group.choose_multiple(&mut rng, count).copied());
    }
    let hub_list: Vec<NodeId> = hubs.iter().copied().collect();

    let mut migrants = BTreeMap::new();
    if k > 1 && params.num_snapshots > 1 {
        let ordinary: Vec<NodeId> = (0..n).map(NodeId).filter(|v| !hubs.contains(v)).collect();
        let count = (MIGRANT_FRACTION * ordinary.len() as f64).round() as usize;
        let earliest = (Migration::SPAN + 1).min(params.num_snapshots);
        for &v in ordinary.choose_multiple(&mut rng, count) {
            let shift = rng.random_range(1..k);
            let migration = Migration {
                target: (community[v.0] + shift) % k,
                end: rng.random_range(earliest..=params.num_snapshots),
            };
            migrants.insert(v, migration);
        }
    }
    let origin = community.clone();

    let mut graph = Growing {
        edges: BTreeSet::new(),
        adjacency: vec![BTreeSet::new(); n],
    };
    let noise = Normal::new(0.0, params.noise_sigma.max(f64::MIN_POSITIVE)).expect("valid sigma");
    let mut snapshots = Vec::with_capacity(params.num_snapshots);

    for t in 1..=params.num_snapshots {
        if t == 1 {
            for v in 0..n {
                let group = &members[community[v]];
                let extra = if hubs.contains(&NodeId(v)) { INITIAL_HUB_EXTRA } else { 0 };
                for _ in 0..INITIAL_DEGREE + extra {
                    let u = *group.choose(&mut rng).expect("non-empty community");
                    graph.link(NodeId(v), u);
                }
            }
        } else {
            for (v, m) in &migrants {
                if m.end == t {
                    community[v.0] = m.target;
                }
            }
            for group in &mut members {
                group.clear();
            }
            for v in 0..n {
                members[community[v]].push(NodeId(v));
            }
            // closures read the topology from before this period
            let previous: Vec<Vec<NodeId>> = graph.adjacency.iter().map(|a| a.iter().copied().collect()).collect();
            for v in 0..n {
                if rng.random_bool(INTRA_PROBABILITY) {
                    let u = *members[community[v]].choose(&mut rng).expect("non-empty community");
                    graph.link(NodeId(v), u);
                }
            }
            for &h in &hub_list {
                for _ in 0..HUB_ATTACHMENTS {
                    let target = if rng.random_bool(HUB_CROSS_PROBABILITY) {
                        NodeId(rng.random_range(0..n))
                    } else {
                        *members[community[h.0]].choose(&mut rng).expect("non-empty community")
                    };
                    graph.link(h, target);
                }
                let around = &previous[h.0];
                if around.len() >= 2 {
                    for _ in 0..CLOSURES_PER_HUB {
                        let pair: Vec<NodeId> = around.choose_multiple(&mut rng, 2).copied().collect();
                        graph.link(pair[0], pair[1]);
                    }
                }
            }
            for (&v, m) in &migrants {
                let Some(j) = m.step(t) else { continue };
                for _ in 0..MIGRANT_EDGES[j - 1] {
                    let u = *members[m.target].choose(&mut rng).expect("non-empty community");
                    graph.link(v, u);
                }
            }
        }

        let labels: BTreeMap<NodeId, u32> = (0..n).map(|v| (NodeId(v), community[v] as u32)).collect();
        let mut attributes = Tensor::zeros(n, params.attr_dim);
        for v in 0..n {
            let row = attributes.row_mut(v);
            match migrants.get(&NodeId(v)) {
                Some(m) => {
                    let drift = m.drift(t);
                    row[origin[v]] += (1.0 - drift) * ATTRIBUTE_SCALE;
                    row[m.target] += drift * ATTRIBUTE_SCALE;
                }
                None => row[community[v]] = ATTRIBUTE_SCALE,
            }
            if params.noise_sigma > 0.0 {
                for x in row.iter_mut() {
                    *x += noise.sample(&mut rng);
                }
            }
        }
        snapshots.push(Snapshot::new(
            t,
            n,
            false,
            graph.edges.iter().copied(),
            attributes,
            Some(labels),
        )?);
    }

    let g = DynamicGraph::new(n, params.attr_dim, false, snapshots)?;
    Ok((
        g,
        PlantedStructure {
            community: origin,
            hubs,
            migrants,
        },
    ))
}
