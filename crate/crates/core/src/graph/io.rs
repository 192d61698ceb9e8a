//! Dataset directory format.
//!
//! ```text
//! meta.json          {"num_nodes", "num_timestamps", "attr_dim", "directed", "cumulative"}
//! t001.edges         one "u v" pair per line
//! t001.attrs         CSV, num_nodes rows of attr_dim floats (optional after t001)
//! t001.labels        optional CSV "node,label"
//! ```
//! All node indices are 0-based. A missing `.attrs` file reuses the previous
//! timestamp's matrix.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{DynamicGraph, Edge, GraphError, NodeId, Snapshot};
use crate::diffnum::Tensor;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub num_nodes: usize,
    pub num_timestamps: usize,
    pub attr_dim: usize,
    #[serde(default)]
    pub directed: bool,
    /// Snapshot files hold only the edges observed in that period; union them on load.
    #[serde(default)]
    pub cumulative: bool,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    /// Forces cumulative unioning regardless of the meta flag.
    pub cumulative: bool,
}

fn stem(t: usize) -> String {
    format!("t{t:03}")
}

fn load_err(path: &Path, line: Option<usize>, message: impl Into<String>) -> GraphError {
    GraphError::Load {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn read(path: &Path) -> Result<String, GraphError> {
    fs::read_to_string(path).map_err(|source| GraphError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_node(path: &Path, line: usize, token: &str, num_nodes: usize) -> Result<NodeId, GraphError> {
    let id: usize = token
        .parse()
        .map_err(|_| load_err(path, Some(line), format!("invalid node id {token:?}")))?;
    if id >= num_nodes {
        return Err(load_err(
            path,
            Some(line),
            format!("node id {id} out of range (num_nodes = {num_nodes})"),
        ));
    }
    Ok(NodeId(id))
}

fn parse_edges(path: &Path, num_nodes: usize) -> Result<Vec<Edge>, GraphError> {
    let text = read(path)?;
    let mut edges = Vec::new();
    for (line, content) in content_lines(&text) {
        let mut parts = content.split_whitespace();
        let (Some(u), Some(v), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(load_err(path, Some(line), format!("expected \"u v\", got {content:?}")));
        };
        let u = parse_node(path, line, u, num_nodes)?;
        let v = parse_node(path, line, v, num_nodes)?;
        if u == v {
            return Err(load_err(path, Some(line), format!("self-loop on node {u}")));
        }
        edges.push((u, v));
    }
    Ok(edges)
}

fn parse_attrs(path: &Path, num_nodes: usize, attr_dim: usize) -> Result<Tensor, GraphError> {
    let text = read(path)?;
    let mut data = Vec::with_capacity(num_nodes * attr_dim);
    let mut rows = 0;
    for (line, content) in content_lines(&text) {
        let before = data.len();
        for token in content.split(',') {
            let x: f64 = token
                .trim()
                .parse()
                .map_err(|_| load_err(path, Some(line), format!("invalid float {token:?}")))?;
            if !x.is_finite() {
                return Err(load_err(path, Some(line), "non-finite attribute value"));
            }
            data.push(x);
        }
        if data.len() - before != attr_dim {
            return Err(load_err(
                path,
                Some(line),
                format!("row has {} values, expected attr_dim = {attr_dim}", data.len() - before),
            ));
        }
        rows += 1;
    }
    if rows != num_nodes {
        return Err(load_err(path, None, format!("{rows} attribute rows, expected {num_nodes}")));
    }
    Tensor::from_vec(num_nodes, attr_dim, data).map_err(|e| load_err(path, None, e.to_string()))
}

fn parse_labels(path: &Path, num_nodes: usize) -> Result<BTreeMap<NodeId, u32>, GraphError> {
    let text = read(path)?;
    let mut labels = BTreeMap::new();
    for (line, content) in content_lines(&text) {
        if line == 1 && content == "node,label" {
            continue;
        }
        let Some((node, label)) = content.split_once(',') else {
            return Err(load_err(path, Some(line), format!("expected \"node,label\", got {content:?}")));
        };
        let node = parse_node(path, line, node.trim(), num_nodes)?;
        let label: u32 = label
            .trim()
            .parse()
            .map_err(|_| load_err(path, Some(line), format!("invalid label {label:?}")))?;
        labels.insert(node, label);
    }
    Ok(labels)
}

pub fn load_dynamic_graph(dir: &Path, options: LoadOptions) -> Result<DynamicGraph, GraphError> {
    let meta_path = dir.join("meta.json");
    if !meta_path.exists() {
        return Err(load_err(&meta_path, None, "missing meta.json"));
    }
    let meta: DatasetMeta =
        serde_json::from_str(&read(&meta_path)?).map_err(|e| load_err(&meta_path, None, e.to_string()))?;
    if meta.num_timestamps == 0 {
        return Err(load_err(&meta_path, None, "num_timestamps must be positive"));
    }
    let cumulative = meta.cumulative || options.cumulative;

    let mut snapshots = Vec::with_capacity(meta.num_timestamps);
    let mut attrs: Option<Tensor> = None;
    let mut union: BTreeSet<Edge> = BTreeSet::new();
    for t in 1..=meta.num_timestamps {
        let base: PathBuf = dir.join(stem(t));
        let edges_path = base.with_extension("edges");
        if !edges_path.exists() {
            return Err(load_err(&edges_path, None, "missing edge file"));
        }
        let mut edges = parse_edges(&edges_path, meta.num_nodes)?;
        if cumulative {
            union.extend(edges.iter().copied());
            edges = union.iter().copied().collect();
        }
        let attrs_path = base.with_extension("attrs");
        if attrs_path.exists() {
            attrs = Some(parse_attrs(&attrs_path, meta.num_nodes, meta.attr_dim)?);
        }
        let Some(current) = attrs.clone() else {
            return Err(load_err(&attrs_path, None, "first timestamp needs an attribute file"));
        };
        let labels_path = base.with_extension("labels");
        let labels = if labels_path.exists() {
            Some(parse_labels(&labels_path, meta.num_nodes)?)
        } else {
            None
        };
        let snapshot = Snapshot::new(t, meta.num_nodes, meta.directed, edges, current, labels)
            .map_err(|e| load_err(&edges_path, None, e.to_string()))?;
        snapshots.push(snapshot);
    }
    DynamicGraph::new(meta.num_nodes, meta.attr_dim, meta.directed, snapshots)
}

fn write(path: &Path, contents: &str) -> Result<(), GraphError> {
    fs::write(path, contents).map_err(|source| GraphError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes every snapshot as stored, so the result always loads with `cumulative = false`.
pub fn save_dynamic_graph(g: &DynamicGraph, dir: &Path) -> Result<(), GraphError> {
    fs::create_dir_all(dir).map_err(|source| GraphError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let meta = DatasetMeta {
        num_nodes: g.num_nodes(),
        num_timestamps: g.num_timestamps(),
        attr_dim: g.attr_dim(),
        directed: g.is_directed(),
        cumulative: false,
    };
    let meta_json = serde_json::to_string_pretty(&meta).expect("meta serializes");
    write(&dir.join("meta.json"), &(meta_json + "\n"))?;

    for s in g.snapshots() {
        let base = dir.join(stem(s.timestamp()));
        let mut edges = String::new();
        for (u, v) in s.edges() {
            writeln!(edges, "{u} {v}").unwrap();
        }
        write(&base.with_extension("edges"), &edges)?;

        let mut attrs = String::new();
        let a = s.attributes();
        for r in 0..a.rows() {
            let row: Vec<String> = a.row(r).iter().map(|x| format!("{x:?}")).collect();
            writeln!(attrs, "{}", row.join(",")).unwrap();
        }
        write(&base.with_extension("attrs"), &attrs)?;

        if let Some(labels) = s.labels() {
            let mut out = String::from("node,label\n");
            for (v, l) in labels {
                writeln!(out, "{v},{l}").unwrap();
            }
            write(&base.with_extension("labels"), &out)?;
        }
    }
    Ok(())
}
