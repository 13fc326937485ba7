//! Finite rooted metric trees with marks, leaf masses, and the operations the
//! rest of the crate leans on: path distances, spanned-subtree reduction,
//! summary statistics, mass/distance rescaling, and mass-weighted leaf
//! sampling.
//!
//! A tree is a dense arena of nodes; each non-root node stores the length of
//! the edge to its parent. Trees are immutable after construction: every
//! operation returns a new value, and an explicit RNG is threaded into the one
//! operation that samples. Edge lengths are strictly positive except at
//! vertices flagged as concatenation junctions (gluing points are allowed to
//! sit at distance zero from a neighbor), and the optional mass map lives on
//! leaves, again with junction-flagged vertices as the sanctioned exception:
//! finite-stage concatenations legitimately park mass at gluing points.

pub mod io;

use std::collections::BTreeMap;

use rand::Rng;

use crate::error::{Error, Result};

/// Dense node index into a tree's arena.
pub type NodeId = usize;

/// Tolerance for leaf-mass normalization checks.
pub const MASS_TOL: f64 = 1e-12;

/// How [`MetricTree::rescale`] treats the mass map.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MassMode {
    /// Multiply every mass by the mass factor (total mass becomes the factor;
    /// the result is a measured intermediate, not an interchange-valid tree
    /// unless the factor is 1).
    Scaled,
    /// Leave masses untouched (the measure stays a probability).
    Normalized,
}

/// Summary statistics of a tree.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct TreeStats {
    /// Largest distance from the root to any vertex.
    pub height: f64,
    /// Distance from the root to the marked vertex, when one exists.
    pub spine_len: Option<f64>,
    /// Number of degree-1 non-root vertices.
    pub n_leaves: usize,
    /// Sum of all edge lengths.
    pub total_length: f64,
}

/// A finite rooted metric tree, optionally marked and optionally measured.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricTree {
    parent: Vec<Option<NodeId>>,
    edge_len: Vec<f64>,
    children: Vec<Vec<NodeId>>,
    junction: Vec<bool>,
    root: NodeId,
    marked: Option<NodeId>,
    leaf_mass: Option<BTreeMap<NodeId, f64>>,
    labels: BTreeMap<NodeId, String>,
    /// Distance from the root, accumulated parent-to-child.
    depth_len: Vec<f64>,
    /// Edge count from the root.
    depth_int: Vec<u32>,
}

impl MetricTree {
    /// Single-vertex tree (just a root).
    pub fn point() -> MetricTree {
        TreeBuilder::new().build().expect("point tree is valid")
    }

    /// Segment of length `len`: root plus one marked leaf of mass 1.
    pub fn segment(len: f64) -> Result<MetricTree> {
        let mut b = TreeBuilder::new();
        let end = b.add_child(TreeBuilder::ROOT, len)?;
        b.mark(end)?;
        b.set_mass(end, 1.0)?;
        b.build()
    }

    /// Builds a tree from parallel per-node arrays, validating every invariant.
    pub(crate) fn from_parts(
        parent: Vec<Option<NodeId>>,
        edge_len: Vec<f64>,
        root: NodeId,
        marked: Option<NodeId>,
        leaf_mass: Option<BTreeMap<NodeId, f64>>,
        labels: BTreeMap<NodeId, String>,
        junction: Vec<bool>,
    ) -> Result<MetricTree> {
        let n = parent.len();
        if n == 0 {
            return Err(Error::Format("tree has no nodes".into()));
        }
        if edge_len.len() != n || junction.len() != n {
            return Err(Error::Format("per-node arrays disagree in length".into()));
        }
        if root >= n {
            return Err(Error::Format(format!("root id {root} out of range")));
        }
        if parent[root].is_some() {
            return Err(Error::Format("root has a parent".into()));
        }
        if edge_len[root] != 0.0 {
            return Err(Error::Format("root edge length must be 0".into()));
        }
        let mut children: Vec<Vec<NodeId>> = vec![Vec::new(); n];
        for v in 0..n {
            match parent[v] {
                Some(p) => {
                    if p >= n {
                        return Err(Error::Format(format!("node {v} has missing parent {p}")));
                    }
                    children[p].push(v);
                }
                None => {
                    if v != root {
                        return Err(Error::Format(format!(
                            "node {v} has no parent but is not the root"
                        )));
                    }
                }
            }
            let len = edge_len[v];
            if !len.is_finite() || len < 0.0 {
                return Err(Error::Format(format!("node {v} has bad edge length {len}")));
            }
            if len == 0.0 && v != root && !junction[v] {
                return Err(Error::Format(format!(
                    "node {v} has a zero-length edge without a junction flag"
                )));
            }
        }
        // children were pushed in id order, so adjacency is deterministic
        let mut tree = MetricTree {
            parent,
            edge_len,
            children,
            junction,
            root,
            marked: None,
            leaf_mass: None,
            labels: BTreeMap::new(),
            depth_len: Vec::new(),
            depth_int: Vec::new(),
        };
        tree.recompute_depths()?;
        if let Some(m) = marked {
            if m >= n {
                return Err(Error::Format(format!("marked id {m} out of range")));
            }
            tree.marked = Some(m);
        }
        for (&v, _) in &labels {
            if v >= n {
                return Err(Error::Format(format!("label on unknown node {v}")));
            }
        }
        tree.labels = labels;
        if let Some(mass) = leaf_mass {
            tree.validate_mass(&mass)?;
            tree.leaf_mass = Some(mass);
        }
        Ok(tree)
    }

    /// Rebuilds depth caches; fails on unreachable nodes (cycles, forests).
    fn recompute_depths(&mut self) -> Result<()> {
        let n = self.parent.len();
        self.depth_len = vec![f64::NAN; n];
        self.depth_int = vec![u32::MAX; n];
        self.depth_len[self.root] = 0.0;
        self.depth_int[self.root] = 0;
        let mut stack = vec![self.root];
        let mut seen = 1usize;
        while let Some(v) = stack.pop() {
            for &c in &self.children[v] {
                self.depth_len[c] = self.depth_len[v] + self.edge_len[c];
                self.depth_int[c] = self.depth_int[v] + 1;
                seen += 1;
                stack.push(c);
            }
        }
        if seen != n {
            return Err(Error::Format(format!(
                "{} of {} nodes unreachable from the root",
                n - seen,
                n
            )));
        }
        Ok(())
    }

    /// Mass placement rules, independent of the total: in range, finite,
    /// nonnegative, never on the root, and only on leaves or flagged
    /// junctions.
    fn validate_mass_keys(&self, mass: &BTreeMap<NodeId, f64>) -> Result<()> {
        for (&v, &m) in mass {
            if v >= self.len() {
                return Err(Error::Format(format!("mass on unknown node {v}")));
            }
            if !m.is_finite() || m < 0.0 {
                return Err(Error::Format(format!("bad mass {m} on node {v}")));
            }
            if v == self.root {
                return Err(Error::Format("mass on the root".into()));
            }
            if !self.is_leaf(v) && !self.junction[v] {
                return Err(Error::Format(format!(
                    "mass on internal node {v} without a junction flag"
                )));
            }
        }
        Ok(())
    }

    fn validate_mass(&self, mass: &BTreeMap<NodeId, f64>) -> Result<()> {
        self.validate_mass_keys(mass)?;
        let sum: f64 = mass.values().sum();
        if (sum - 1.0).abs() > MASS_TOL {
            return Err(Error::Format(format!(
                "leaf masses sum to {sum}, expected 1 within {MASS_TOL}"
            )));
        }
        Ok(())
    }

    /// Attaches a mass map whose placement is validated but whose total is
    /// deliberately left free (operators that are linear in mass preserve
    /// whatever total their inputs carry).
    pub(crate) fn with_unnormalized_mass(
        mut self,
        mass: BTreeMap<NodeId, f64>,
    ) -> Result<MetricTree> {
        self.validate_mass_keys(&mass)?;
        self.leaf_mass = Some(mass);
        Ok(self)
    }

    /// Internal constructor for outputs whose structure is valid by
    /// construction but whose mass map may be deliberately unnormalized
    /// (rescale in [`MassMode::Scaled`]).
    fn finish_unvalidated(
        parent: Vec<Option<NodeId>>,
        edge_len: Vec<f64>,
        children: Vec<Vec<NodeId>>,
        junction: Vec<bool>,
        root: NodeId,
        marked: Option<NodeId>,
        leaf_mass: Option<BTreeMap<NodeId, f64>>,
        labels: BTreeMap<NodeId, String>,
    ) -> MetricTree {
        let mut tree = MetricTree {
            parent,
            edge_len,
            children,
            junction,
            root,
            marked,
            leaf_mass,
            labels,
            depth_len: Vec::new(),
            depth_int: Vec::new(),
        };
        tree.recompute_depths()
            .expect("structure preserved by rescale");
        tree
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        false // a tree always has a root
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn marked(&self) -> Option<NodeId> {
        self.marked
    }

    pub fn parent(&self, v: NodeId) -> Option<NodeId> {
        self.parent.get(v).copied().flatten()
    }

    /// Length of the edge from `v` to its parent (0 at the root).
    pub fn edge_len(&self, v: NodeId) -> f64 {
        self.edge_len[v]
    }

    pub fn children(&self, v: NodeId) -> &[NodeId] {
        &self.children[v]
    }

    pub fn degree(&self, v: NodeId) -> usize {
        self.children[v].len() + usize::from(self.parent[v].is_some())
    }

    pub fn is_leaf(&self, v: NodeId) -> bool {
        v != self.root && self.degree(v) == 1
    }

    pub fn is_junction(&self, v: NodeId) -> bool {
        self.junction[v]
    }

    /// Degree-1 non-root vertices, in id order.
    pub fn leaves(&self) -> Vec<NodeId> {
        (0..self.len()).filter(|&v| self.is_leaf(v)).collect()
    }

    pub fn leaf_mass(&self) -> Option<&BTreeMap<NodeId, f64>> {
        self.leaf_mass.as_ref()
    }

    pub fn label(&self, v: NodeId) -> Option<&str> {
        self.labels.get(&v).map(|s| s.as_str())
    }

    pub fn labels(&self) -> &BTreeMap<NodeId, String> {
        &self.labels
    }

    /// Distance from the root to `v` along parent edges.
    pub fn root_dist(&self, v: NodeId) -> Result<f64> {
        self.check(v)?;
        Ok(self.depth_len[v])
    }

    fn check(&self, v: NodeId) -> Result<()> {
        if v < self.len() {
            Ok(())
        } else {
            Err(Error::InvalidNode(v))
        }
    }

    fn lca(&self, mut u: NodeId, mut v: NodeId) -> NodeId {
        while self.depth_int[u] > self.depth_int[v] {
            u = self.parent[u].expect("deeper node has a parent");
        }
        while self.depth_int[v] > self.depth_int[u] {
            v = self.parent[v].expect("deeper node has a parent");
        }
        while u != v {
            u = self.parent[u].expect("non-root in lca walk");
            v = self.parent[v].expect("non-root in lca walk");
        }
        u
    }

    /// Sum of edge lengths along the unique path between `u` and `v`.
    pub fn dist(&self, u: NodeId, v: NodeId) -> Result<f64> {
        self.check(u)?;
        self.check(v)?;
        Ok(self.dist_unchecked(u, v))
    }

    pub(crate) fn dist_unchecked(&self, u: NodeId, v: NodeId) -> f64 {
        if u == v {
            return 0.0;
        }
        let w = self.lca(u, v);
        let d = (self.depth_len[u] - self.depth_len[w]) + (self.depth_len[v] - self.depth_len[w]);
        d.max(0.0)
    }

    /// Summary statistics; `spine_len` is present iff the tree is marked.
    pub fn stats(&self) -> TreeStats {
        let height = self.depth_len.iter().copied().fold(0.0, f64::max);
        let total_length = (0..self.len())
            .filter(|&v| v != self.root)
            .map(|v| self.edge_len[v])
            .sum();
        TreeStats {
            height,
            spine_len: self.marked.map(|m| self.depth_len[m]),
            n_leaves: self.leaves().len(),
            total_length,
        }
    }

    /// The subtree spanned by `pts` and the root, with degree-2 vertices
    /// suppressed (edge lengths summed parent-to-child). Points in `pts`, the
    /// root, branch vertices of the span, and the marked point (when spanned)
    /// are retained. The output carries no mass map; labels of retained nodes
    /// survive.
    pub fn reduce(&self, pts: &[NodeId]) -> Result<MetricTree> {
        if pts.is_empty() {
            return Err(Error::Domain("reduce needs a nonempty point set".into()));
        }
        for &p in pts {
            self.check(p)?;
        }
        let n = self.len();
        let mut spanned = vec![false; n];
        for &p in pts {
            let mut v = p;
            loop {
                if spanned[v] {
                    break;
                }
                spanned[v] = true;
                match self.parent[v] {
                    Some(par) => v = par,
                    None => break,
                }
            }
        }
        let mut is_pt = vec![false; n];
        for &p in pts {
            is_pt[p] = true;
        }
        let kept = |v: NodeId| -> bool {
            if !spanned[v] {
                return false;
            }
            if v == self.root || is_pt[v] || self.marked == Some(v) {
                return true;
            }
            self.children[v].iter().filter(|&&c| spanned[c]).count() >= 2
        };

        let mut b = TreeBuilder::new();
        if self.marked == Some(self.root) {
            b.mark(TreeBuilder::ROOT)?;
        }
        if let Some(l) = self.labels.get(&self.root) {
            b.label(TreeBuilder::ROOT, l.clone())?;
        }
        let mut out_marked: Option<NodeId> = None;
        // (node, nearest kept ancestor's output id, length accumulated below it)
        let mut stack: Vec<(NodeId, NodeId, f64)> = Vec::new();
        for &c in self.children[self.root].iter().rev() {
            if spanned[c] {
                stack.push((c, TreeBuilder::ROOT, 0.0));
            }
        }
        while let Some((v, anchor, acc)) = stack.pop() {
            let reach = acc + self.edge_len[v];
            let next_anchor = if kept(v) {
                let out = b.add_child(anchor, reach)?;
                if reach == 0.0 {
                    b.flag_junction(out)?;
                }
                if self.marked == Some(v) {
                    out_marked = Some(out);
                }
                if let Some(l) = self.labels.get(&v) {
                    b.label(out, l.clone())?;
                }
                Some(out)
            } else {
                None
            };
            for &c in self.children[v].iter().rev() {
                if spanned[c] {
                    match next_anchor {
                        Some(out) => stack.push((c, out, 0.0)),
                        None => stack.push((c, anchor, reach)),
                    }
                }
            }
        }
        if let Some(m) = out_marked {
            b.mark(m)?;
        }
        b.build()
    }

    /// Scales distances by `mass_factor^beta`; masses follow `mode`.
    pub fn rescale(&self, mass_factor: f64, beta: f64, mode: MassMode) -> Result<MetricTree> {
        if !mass_factor.is_finite() || mass_factor <= 0.0 {
            return Err(Error::Param(format!(
                "mass factor must be positive, got {mass_factor}"
            )));
        }
        if !(0.0..=1.0).contains(&beta) || beta == 0.0 {
            return Err(Error::Param(format!("beta must lie in (0,1], got {beta}")));
        }
        let factor = mass_factor.powf(beta);
        let edge_len: Vec<f64> = self.edge_len.iter().map(|&e| e * factor).collect();
        let leaf_mass = self.leaf_mass.as_ref().map(|mass| match mode {
            MassMode::Normalized => mass.clone(),
            MassMode::Scaled => mass.iter().map(|(&v, &m)| (v, m * mass_factor)).collect(),
        });
        Ok(MetricTree::finish_unvalidated(
            self.parent.clone(),
            edge_len,
            self.children.clone(),
            self.junction.clone(),
            self.root,
            self.marked,
            leaf_mass,
            self.labels.clone(),
        ))
    }

    /// Draws a mass carrier: proportionally to the mass map when present,
    /// uniformly over leaves otherwise.
    pub fn sample_leaf<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<NodeId> {
        if let Some(mass) = &self.leaf_mass {
            let total: f64 = mass.values().sum();
            if total <= 0.0 {
                return Err(Error::Domain("mass map carries no mass".into()));
            }
            let mut u: f64 = rng.random::<f64>() * total;
            let mut last = None;
            for (&v, &m) in mass {
                if m <= 0.0 {
                    continue;
                }
                last = Some(v);
                if u < m {
                    return Ok(v);
                }
                u -= m;
            }
            return last.ok_or_else(|| Error::Domain("mass map carries no mass".into()));
        }
        let leaves = self.leaves();
        if leaves.is_empty() {
            return Err(Error::Domain("tree has no leaves to sample".into()));
        }
        Ok(leaves[rng.random_range(0..leaves.len())])
    }

    /// Tests isometry of two trees with root and marked point pinned; labels,
    /// masses, and junction flags are ignored. Degree-2 vertices are *not*
    /// suppressed here; reduce first if the comparison should ignore them.
    /// Edge lengths match within `tol` (absolute).
    pub fn isometric_to(&self, other: &MetricTree, tol: f64) -> bool {
        if self.marked.is_some() != other.marked.is_some() {
            return false;
        }
        let sig_a = Signatures::new(self);
        let sig_b = Signatures::new(other);
        match_subtrees(self, other, &sig_a, &sig_b, self.root, other.root, tol)
    }
}

/// Per-node structural summaries used to prune isometry matching.
struct Signatures {
    size: Vec<usize>,
    leaves: Vec<usize>,
    height: Vec<f64>,
    has_mark: Vec<bool>,
}

impl Signatures {
    fn new(t: &MetricTree) -> Signatures {
        let n = t.len();
        let mut s = Signatures {
            size: vec![1; n],
            leaves: vec![0; n],
            height: vec![0.0; n],
            has_mark: vec![false; n],
        };
        // children ids are always larger than clean topological order would
        // need, so compute bottom-up over a post-order
        let order = post_order(t);
        for &v in &order {
            if t.is_leaf(v) {
                s.leaves[v] = 1;
            }
            if t.marked() == Some(v) {
                s.has_mark[v] = true;
            }
            for &c in t.children(v) {
                s.size[v] += s.size[c];
                s.leaves[v] += s.leaves[c];
                s.height[v] = s.height[v].max(t.edge_len(c) + s.height[c]);
                s.has_mark[v] = s.has_mark[v] || s.has_mark[c];
            }
        }
        s
    }
}

fn post_order(t: &MetricTree) -> Vec<NodeId> {
    let mut order = Vec::with_capacity(t.len());
    let mut stack = vec![(t.root(), false)];
    while let Some((v, expanded)) = stack.pop() {
        if expanded {
            order.push(v);
        } else {
            stack.push((v, true));
            for &c in t.children(v) {
                stack.push((c, false));
            }
        }
    }
    order
}

fn match_subtrees(
    a: &MetricTree,
    b: &MetricTree,
    sa: &Signatures,
    sb: &Signatures,
    u: NodeId,
    v: NodeId,
    tol: f64,
) -> bool {
    if sa.size[u] != sb.size[v]
        || sa.leaves[u] != sb.leaves[v]
        || sa.has_mark[u] != sb.has_mark[v]
        || (sa.height[u] - sb.height[v]).abs() > tol * sa.size[u] as f64
    {
        return false;
    }
    if (a.marked() == Some(u)) != (b.marked() == Some(v)) {
        return false;
    }
    let cu = a.children(u);
    let cv = b.children(v);
    if cu.len() != cv.len() {
        return false;
    }
    // backtracking assignment of children of u to children of v
    fn assign(
        a: &MetricTree,
        b: &MetricTree,
        sa: &Signatures,
        sb: &Signatures,
        cu: &[NodeId],
        cv: &[NodeId],
        used: &mut Vec<bool>,
        i: usize,
        tol: f64,
    ) -> bool {
        if i == cu.len() {
            return true;
        }
        for (j, &w) in cv.iter().enumerate() {
            if used[j] || (a.edge_len(cu[i]) - b.edge_len(w)).abs() > tol {
                continue;
            }
            if match_subtrees(a, b, sa, sb, cu[i], w, tol) {
                used[j] = true;
                if assign(a, b, sa, sb, cu, cv, used, i + 1, tol) {
                    return true;
                }
                used[j] = false;
            }
        }
        false
    }
    let mut used = vec![false; cv.len()];
    assign(a, b, sa, sb, cu, cv, &mut used, 0, tol)
}

/// Incremental constructor for [`MetricTree`]; node 0 is always the root.
#[derive(Clone, Debug, Default)]
pub struct TreeBuilder {
    parent: Vec<Option<NodeId>>,
    edge_len: Vec<f64>,
    junction: Vec<bool>,
    marked: Option<NodeId>,
    mass: BTreeMap<NodeId, f64>,
    has_mass: bool,
    labels: BTreeMap<NodeId, String>,
}

impl TreeBuilder {
    pub const ROOT: NodeId = 0;

    pub fn new() -> TreeBuilder {
        TreeBuilder {
            parent: vec![None],
            edge_len: vec![0.0],
            junction: vec![false],
            marked: None,
            mass: BTreeMap::new(),
            has_mass: false,
            labels: BTreeMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn check(&self, v: NodeId) -> Result<()> {
        if v < self.parent.len() {
            Ok(())
        } else {
            Err(Error::InvalidNode(v))
        }
    }

    /// Appends a child of `parent` at edge distance `edge_len`, returning its id.
    pub fn add_child(&mut self, parent: NodeId, edge_len: f64) -> Result<NodeId> {
        self.check(parent)?;
        if !edge_len.is_finite() || edge_len < 0.0 {
            return Err(Error::Param(format!("bad edge length {edge_len}")));
        }
        let id = self.parent.len();
        self.parent.push(Some(parent));
        self.edge_len.push(edge_len);
        self.junction.push(false);
        Ok(id)
    }

    /// Flags `v` as a concatenation junction (licenses zero-length edges and
    /// mass at an internal vertex).
    pub fn flag_junction(&mut self, v: NodeId) -> Result<()> {
        self.check(v)?;
        self.junction[v] = true;
        Ok(())
    }

    pub fn mark(&mut self, v: NodeId) -> Result<()> {
        self.check(v)?;
        self.marked = Some(v);
        Ok(())
    }

    pub fn label(&mut self, v: NodeId, label: impl Into<String>) -> Result<()> {
        self.check(v)?;
        self.labels.insert(v, label.into());
        Ok(())
    }

    /// Adds `mass` at node `v` (accumulating across calls).
    pub fn set_mass(&mut self, v: NodeId, mass: f64) -> Result<()> {
        self.check(v)?;
        if !mass.is_finite() || mass < 0.0 {
            return Err(Error::Param(format!("bad mass {mass}")));
        }
        self.has_mass = true;
        *self.mass.entry(v).or_insert(0.0) += mass;
        Ok(())
    }

    pub fn build(self) -> Result<MetricTree> {
        MetricTree::from_parts(
            self.parent,
            self.edge_len,
            Self::ROOT,
            self.marked,
            if self.has_mass { Some(self.mass) } else { None },
            self.labels,
            self.junction,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    fn path_tree() -> MetricTree {
        // root -a(1.0)- b(2.0)
        let mut b = TreeBuilder::new();
        let a = b.add_child(TreeBuilder::ROOT, 1.0).unwrap();
        let bb = b.add_child(a, 2.0).unwrap();
        b.mark(bb).unwrap();
        b.build().unwrap()
    }

    fn y_tree() -> MetricTree {
        // center at distance 1 from root, two unit-length leaves
        let mut b = TreeBuilder::new();
        let c = b.add_child(TreeBuilder::ROOT, 1.0).unwrap();
        let l1 = b.add_child(c, 1.0).unwrap();
        let _l2 = b.add_child(c, 1.0).unwrap();
        b.mark(l1).unwrap();
        b.build().unwrap()
    }

    #[test]
    fn dist_sums_single_path() {
        let t = path_tree();
        assert_eq!(t.dist(0, 2).unwrap(), 3.0);
        assert_eq!(t.dist(2, 0).unwrap(), 3.0);
        assert_eq!(t.dist(1, 1).unwrap(), 0.0);
    }

    #[test]
    fn dist_crosses_branch_point() {
        let t = y_tree();
        assert_eq!(t.dist(2, 3).unwrap(), 2.0);
        assert_eq!(t.dist(0, 2).unwrap(), 2.0);
    }

    #[test]
    fn dist_rejects_bad_node() {
        let t = y_tree();
        assert!(matches!(t.dist(0, 99), Err(Error::InvalidNode(99))));
    }

    #[test]
    fn stats_of_unit_segment() {
        let t = MetricTree::segment(1.0).unwrap();
        let s = t.stats();
        assert_eq!(s.height, 1.0);
        assert_eq!(s.spine_len, Some(1.0));
        assert_eq!(s.n_leaves, 1);
        assert_eq!(s.total_length, 1.0);
    }

    #[test]
    fn stats_of_y_tree() {
        let s = y_tree().stats();
        assert_eq!(s.height, 2.0);
        assert_eq!(s.spine_len, Some(2.0));
        assert_eq!(s.n_leaves, 2);
        assert_eq!(s.total_length, 3.0);
    }

    #[test]
    fn y_tree_has_two_proper_leaves() {
        // guard against the test above drifting: leaves are degree-1 non-root
        let t = y_tree();
        assert_eq!(t.leaves(), vec![2, 3]);
    }

    #[test]
    fn reduce_to_single_point_keeps_its_root_distance() {
        let t = path_tree();
        let r = t.reduce(&[1]).unwrap();
        assert_eq!(r.len(), 2);
        assert_eq!(r.dist(0, 1).unwrap(), 1.0);
    }

    #[test]
    fn reduce_suppresses_degree_two() {
        let t = path_tree();
        let r = t.reduce(&[2]).unwrap();
        assert_eq!(r.len(), 2);
        assert_eq!(r.dist(0, 1).unwrap(), 3.0);
        // the marked far end survives as the kept point
        assert_eq!(r.marked(), Some(1));
    }

    #[test]
    fn reduce_preserves_pairwise_distances() {
        // caterpillar: root - a - b - c with side leaves
        let mut b = TreeBuilder::new();
        let a = b.add_child(TreeBuilder::ROOT, 0.5).unwrap();
        let l1 = b.add_child(a, 1.25).unwrap();
        let m = b.add_child(a, 0.75).unwrap();
        let l2 = b.add_child(m, 2.0).unwrap();
        let l3 = b.add_child(m, 0.25).unwrap();
        let t = b.build().unwrap();
        let keep = [l1, l3];
        let r = t.reduce(&keep).unwrap();
        // preorder output: branch vertex first, then l1, then l3
        let (r1, r3) = (2, 3);
        assert_eq!(r.dist(0, r1).unwrap(), t.dist(0, l1).unwrap());
        assert_eq!(r.dist(0, r3).unwrap(), t.dist(0, l3).unwrap());
        assert_eq!(r.dist(r1, r3).unwrap(), t.dist(l1, l3).unwrap());
        let _ = l2;
    }

    #[test]
    fn reduce_rejects_empty_points() {
        assert!(path_tree().reduce(&[]).is_err());
    }

    #[test]
    fn rescale_scales_height_by_factor_pow_beta() {
        let t = MetricTree::segment(1.0).unwrap();
        let r = t.rescale(4.0, 0.5, MassMode::Normalized).unwrap();
        assert_eq!(r.stats().height, 2.0);
        let id = t.rescale(1.0, 0.5, MassMode::Normalized).unwrap();
        assert_eq!(id, t);
    }

    #[test]
    fn rescale_composes_multiplicatively() {
        let t = y_tree();
        let ab = t
            .rescale(2.0, 0.5, MassMode::Normalized)
            .unwrap()
            .rescale(8.0, 0.5, MassMode::Normalized)
            .unwrap();
        let once = t.rescale(16.0, 0.5, MassMode::Normalized).unwrap();
        for v in 0..t.len() {
            assert!((ab.edge_len(v) - once.edge_len(v)).abs() < 1e-12);
        }
    }

    #[test]
    fn rescale_scaled_mode_multiplies_mass() {
        let t = MetricTree::segment(1.0).unwrap();
        let r = t.rescale(0.25, 0.5, MassMode::Scaled).unwrap();
        let mass = r.leaf_mass().unwrap();
        assert_eq!(mass[&1], 0.25);
        assert_eq!(r.stats().height, 0.5);
    }

    #[test]
    fn sample_leaf_single_leaf() {
        let t = MetricTree::segment(2.0).unwrap();
        let mut rng = SplitMix64::new(1);
        for _ in 0..10 {
            assert_eq!(t.sample_leaf(&mut rng).unwrap(), 1);
        }
    }

    #[test]
    fn sample_leaf_requires_leaves() {
        let t = MetricTree::point();
        let mut rng = SplitMix64::new(1);
        assert!(t.sample_leaf(&mut rng).is_err());
    }

    #[test]
    fn sample_leaf_follows_masses() {
        let mut b = TreeBuilder::new();
        let l1 = b.add_child(TreeBuilder::ROOT, 1.0).unwrap();
        let l2 = b.add_child(TreeBuilder::ROOT, 1.0).unwrap();
        b.set_mass(l1, 0.9).unwrap();
        b.set_mass(l2, 0.1).unwrap();
        let t = b.build().unwrap();
        let mut rng = SplitMix64::new(42);
        let n = 10_000;
        let hits = (0..n)
            .filter(|_| t.sample_leaf(&mut rng).unwrap() == l1)
            .count();
        let freq = hits as f64 / n as f64;
        // binomial 3-sigma band around 0.9
        let sigma = (0.9 * 0.1 / n as f64).sqrt();
        assert!(
            (freq - 0.9).abs() < 3.0 * sigma,
            "frequency {freq} outside band"
        );
    }

    #[test]
    fn builder_rejects_zero_edge_without_flag() {
        let mut b = TreeBuilder::new();
        b.add_child(TreeBuilder::ROOT, 0.0).unwrap();
        assert!(b.build().is_err());
    }

    #[test]
    fn builder_accepts_flagged_zero_edge() {
        let mut b = TreeBuilder::new();
        let v = b.add_child(TreeBuilder::ROOT, 0.0).unwrap();
        b.flag_junction(v).unwrap();
        let t = b.build().unwrap();
        assert!(t.is_junction(v));
    }

    #[test]
    fn builder_rejects_unnormalized_mass() {
        let mut b = TreeBuilder::new();
        let l = b.add_child(TreeBuilder::ROOT, 1.0).unwrap();
        b.set_mass(l, 0.5).unwrap();
        assert!(b.build().is_err());
    }

    #[test]
    fn builder_rejects_mass_on_plain_internal_node() {
        let mut b = TreeBuilder::new();
        let mid = b.add_child(TreeBuilder::ROOT, 1.0).unwrap();
        let _leaf = b.add_child(mid, 1.0).unwrap();
        b.set_mass(mid, 1.0).unwrap();
        assert!(b.build().is_err());
    }

    #[test]
    fn isometry_ignores_child_order() {
        let mut b1 = TreeBuilder::new();
        let c = b1.add_child(TreeBuilder::ROOT, 1.0).unwrap();
        let m = b1.add_child(c, 2.0).unwrap();
        b1.add_child(c, 3.0).unwrap();
        b1.mark(m).unwrap();
        let t1 = b1.build().unwrap();

        let mut b2 = TreeBuilder::new();
        let c = b2.add_child(TreeBuilder::ROOT, 1.0).unwrap();
        b2.add_child(c, 3.0).unwrap();
        let m = b2.add_child(c, 2.0).unwrap();
        b2.mark(m).unwrap();
        let t2 = b2.build().unwrap();

        assert!(t1.isometric_to(&t2, 1e-12));
    }

    #[test]
    fn isometry_respects_marks() {
        let mut b1 = TreeBuilder::new();
        let c = b1.add_child(TreeBuilder::ROOT, 1.0).unwrap();
        let m = b1.add_child(c, 2.0).unwrap();
        b1.add_child(c, 2.0).unwrap();
        b1.mark(m).unwrap();
        let t1 = b1.build().unwrap();

        // same shape, mark on a leaf at a different edge length
        let mut b2 = TreeBuilder::new();
        let c = b2.add_child(TreeBuilder::ROOT, 1.0).unwrap();
        let m = b2.add_child(c, 2.0).unwrap();
        b2.add_child(c, 2.0).unwrap();
        b2.mark(m).unwrap();
        let t2 = b2.build().unwrap();
        assert!(t1.isometric_to(&t2, 1e-12));

        let mut b3 = TreeBuilder::new();
        let c = b3.add_child(TreeBuilder::ROOT, 1.0).unwrap();
        b3.add_child(c, 2.0).unwrap();
        let far = b3.add_child(c, 3.0).unwrap();
        b3.mark(far).unwrap();
        let t3 = b3.build().unwrap();
        assert!(!t1.isometric_to(&t3, 1e-12));
    }
}
