//! JSON interchange for metric trees (`rtree-v1`).
//!
//! A document is an object with keys `format` ("rtree-v1"), `nodes` (array of
//! `{id, parent, edge_len}`), `root`, `marked` (nullable), `leaf_mass`
//! (nullable map id → mass), and `labels` (nullable map id → string). Writers
//! emit nodes sorted by id; readers accept any order and any (not necessarily
//! dense) id values, remapping them to dense indices in increasing-id order.
//!
//! Junction flags are not persisted. Readers re-infer them from the anomalies
//! they license: a zero-length non-root edge, or mass on an internal vertex.
//! A flag that licenses nothing visible (on a positive-length massless or
//! leaf vertex) is therefore dropped by a write/read round trip.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tree::{MetricTree, NodeId};

pub const FORMAT: &str = "rtree-v1";

#[derive(Serialize, Deserialize)]
struct NodeDoc {
    id: u64,
    parent: Option<u64>,
    edge_len: f64,
}

#[derive(Serialize, Deserialize)]
struct TreeDoc {
    format: String,
    root: u64,
    marked: Option<u64>,
    nodes: Vec<NodeDoc>,
    leaf_mass: Option<BTreeMap<String, f64>>,
    labels: Option<BTreeMap<String, String>>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum DocSet {
    One(TreeDoc),
    Many(Vec<TreeDoc>),
}

fn to_doc(t: &MetricTree) -> TreeDoc {
    let nodes = (0..t.len())
        .map(|v| NodeDoc {
            id: v as u64,
            parent: t.parent(v).map(|p| p as u64),
            edge_len: t.edge_len(v),
        })
        .collect();
    let leaf_mass = t
        .leaf_mass()
        .map(|m| m.iter().map(|(&v, &x)| (v.to_string(), x)).collect());
    let labels = if t.labels().is_empty() {
        None
    } else {
        Some(
            t.labels()
                .iter()
                .map(|(&v, l)| (v.to_string(), l.clone()))
                .collect(),
        )
    };
    TreeDoc {
        format: FORMAT.into(),
        root: t.root() as u64,
        marked: t.marked().map(|m| m as u64),
        nodes,
        leaf_mass,
        labels,
    }
}

fn from_doc(doc: TreeDoc) -> Result<MetricTree> {
    if doc.format != FORMAT {
        return Err(Error::Format(format!(
            "unknown format {:?}, expected {FORMAT:?}",
            doc.format
        )));
    }
    if doc.nodes.is_empty() {
        return Err(Error::Format("tree has no nodes".into()));
    }
    let mut ids: Vec<u64> = doc.nodes.iter().map(|n| n.id).collect();
    ids.sort_unstable();
    ids.dedup();
    if ids.len() != doc.nodes.len() {
        return Err(Error::Format("duplicate node id".into()));
    }
    let dense: BTreeMap<u64, NodeId> = ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
    let lookup = |id: u64| -> Result<NodeId> {
        dense
            .get(&id)
            .copied()
            .ok_or_else(|| Error::Format(format!("reference to unknown node id {id}")))
    };

    let n = doc.nodes.len();
    let mut parent: Vec<Option<NodeId>> = vec![None; n];
    let mut edge_len: Vec<f64> = vec![0.0; n];
    let mut n_roots = 0usize;
    for nd in &doc.nodes {
        let v = lookup(nd.id)?;
        edge_len[v] = nd.edge_len;
        match nd.parent {
            Some(p) => parent[v] = Some(lookup(p)?),
            None => n_roots += 1,
        }
    }
    if n_roots != 1 {
        return Err(Error::Format(format!(
            "expected exactly one parentless node, found {n_roots}"
        )));
    }
    let root = lookup(doc.root)?;
    if parent[root].is_some() {
        return Err(Error::Format("declared root has a parent".into()));
    }
    let marked = doc.marked.map(lookup).transpose()?;

    let parse_key = |k: &str| -> Result<NodeId> {
        let id: u64 = k
            .parse()
            .map_err(|_| Error::Format(format!("bad node id key {k:?}")))?;
        lookup(id)
    };
    let leaf_mass = doc
        .leaf_mass
        .map(|m| {
            m.iter()
                .map(|(k, &x)| Ok((parse_key(k)?, x)))
                .collect::<Result<BTreeMap<NodeId, f64>>>()
        })
        .transpose()?;
    let labels = doc
        .labels
        .map(|m| {
            m.into_iter()
                .map(|(k, l)| Ok((parse_key(&k)?, l)))
                .collect::<Result<BTreeMap<NodeId, String>>>()
        })
        .transpose()?
        .unwrap_or_default();

    let mut child_count = vec![0usize; n];
    for v in 0..n {
        if let Some(p) = parent[v] {
            if p >= n {
                return Err(Error::Format(format!("node {v} has missing parent {p}")));
            }
            child_count[p] += 1;
        }
    }
    let mut junction = vec![false; n];
    for v in 0..n {
        if v == root {
            continue;
        }
        if edge_len[v] == 0.0 {
            junction[v] = true;
        }
        if child_count[v] > 0 {
            if let Some(mass) = &leaf_mass {
                if mass.contains_key(&v) {
                    junction[v] = true;
                }
            }
        }
    }

    MetricTree::from_parts(parent, edge_len, root, marked, leaf_mass, labels, junction)
}

/// Serializes one tree as pretty-printed `rtree-v1` JSON.
pub fn to_json(t: &MetricTree) -> Result<String> {
    Ok(serde_json::to_string_pretty(&to_doc(t))?)
}

/// Parses one tree from `rtree-v1` JSON.
pub fn from_json(s: &str) -> Result<MetricTree> {
    from_doc(serde_json::from_str(s)?)
}

pub fn write_tree<W: Write>(mut w: W, t: &MetricTree) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, &to_doc(t))?;
    w.write_all(b"\n")?;
    Ok(())
}

pub fn read_tree<R: Read>(r: R) -> Result<MetricTree> {
    from_doc(serde_json::from_reader(r)?)
}

/// Writes several trees as a JSON array of `rtree-v1` documents.
pub fn write_trees<W: Write>(mut w: W, trees: &[MetricTree]) -> Result<()> {
    let docs: Vec<TreeDoc> = trees.iter().map(to_doc).collect();
    serde_json::to_writer_pretty(&mut w, &docs)?;
    w.write_all(b"\n")?;
    Ok(())
}

/// Reads either a single `rtree-v1` document or a JSON array of them.
pub fn read_trees<R: Read>(r: R) -> Result<Vec<MetricTree>> {
    match serde_json::from_reader(r)? {
        DocSet::One(doc) => Ok(vec![from_doc(doc)?]),
        DocSet::Many(docs) => docs.into_iter().map(from_doc).collect(),
    }
}
