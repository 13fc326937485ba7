//! Exact (marked) Gromov–Hausdorff distances between small finite trees.
//!
//! The distance is half the minimal distortion over correspondences between
//! the two vertex sets that pair the roots (and, in marked mode, the marked
//! vertices). The search runs over function-pair correspondences
//! `graph(f) ∪ graph(g)⁻¹`: every correspondence contains one, and distortion
//! only shrinks when passing to a subset, so the minimum over this family is
//! the true minimum. Exactness costs a hard size cap; callers with bigger
//! trees are expected to reduce them first.

use crate::error::{Error, Result};
use crate::tree::{MetricTree, NodeId};

/// Node cap for the exact search. The family has roughly `m^n · n^m`
/// members; branch-and-bound prunes most, but growth past 7 nodes per tree
/// is steep enough that the cap refuses rather than stalls.
pub const DEFAULT_MAX_NODES: usize = 7;

/// An exact distance together with a correspondence achieving it.
#[derive(Clone, Debug)]
pub struct GhOutcome {
    pub dist: f64,
    /// Node pairs (id in the first tree, id in the second) of the achieving
    /// correspondence, sorted and deduplicated.
    pub pairs: Vec<(NodeId, NodeId)>,
}

fn dist_matrix(t: &MetricTree) -> Result<Vec<Vec<f64>>> {
    let n = t.len();
    let mut d = vec![vec![0.0; n]; n];
    for u in 0..n {
        for v in (u + 1)..n {
            let x = t.dist(u, v)?;
            d[u][v] = x;
            d[v][u] = x;
        }
    }
    Ok(d)
}

struct Search<'a> {
    da: &'a [Vec<f64>],
    db: &'a [Vec<f64>],
    /// Pinned image of each a-node (root and optionally mark), else usize::MAX.
    pin_f: Vec<usize>,
    pin_g: Vec<usize>,
    best: f64,
    best_pairs: Vec<(usize, usize)>,
}

impl Search<'_> {
    /// Assigns f over a-nodes in index order, tracking the running internal
    /// distortion of graph(f) and pruning against the incumbent.
    fn assign_f(&mut self, f: &mut Vec<usize>, worst: f64) {
        let u = f.len();
        if u == self.da.len() {
            let mut g = Vec::with_capacity(self.db.len());
            self.assign_g(f, &mut g, worst);
            return;
        }
        let candidates: Vec<usize> = if self.pin_f[u] != usize::MAX {
            vec![self.pin_f[u]]
        } else {
            (0..self.db.len()).collect()
        };
        for v in candidates {
            let mut w = worst;
            for (x, &fx) in f.iter().enumerate() {
                w = w.max((self.da[u][x] - self.db[v][fx]).abs());
                if w >= self.best {
                    break;
                }
            }
            if w < self.best {
                f.push(v);
                self.assign_f(f, w);
                f.pop();
            }
        }
    }

    /// Assigns g over b-nodes, tracking both the internal distortion of
    /// graph(g)⁻¹ and the cross terms against the fixed f.
    fn assign_g(&mut self, f: &[usize], g: &mut Vec<usize>, worst: f64) {
        let v = g.len();
        if v == self.db.len() {
            if worst < self.best {
                self.best = worst;
                let mut pairs: Vec<(usize, usize)> =
                    f.iter().enumerate().map(|(x, &y)| (x, y)).collect();
                pairs.extend(g.iter().enumerate().map(|(y, &x)| (x, y)));
                pairs.sort_unstable();
                pairs.dedup();
                self.best_pairs = pairs;
            }
            return;
        }
        let candidates: Vec<usize> = if self.pin_g[v] != usize::MAX {
            vec![self.pin_g[v]]
        } else {
            (0..self.da.len()).collect()
        };
        for u in candidates {
            let mut w = worst;
            for (y, &gy) in g.iter().enumerate() {
                w = w.max((self.db[v][y] - self.da[u][gy]).abs());
                if w >= self.best {
                    break;
                }
            }
            if w < self.best {
                for (x, &fx) in f.iter().enumerate() {
                    w = w.max((self.da[x][u] - self.db[fx][v]).abs());
                    if w >= self.best {
                        break;
                    }
                }
            }
            if w < self.best {
                g.push(u);
                self.assign_g(f, g, w);
                g.pop();
            }
        }
    }
}

/// Exact (marked) Gromov–Hausdorff distance with the achieving
/// correspondence. Roots are always paired; `marked` additionally pairs the
/// marked vertices (both trees must then have one). Trees larger than
/// `max_nodes` are refused.
pub fn gh_dist_detailed(
    a: &MetricTree,
    b: &MetricTree,
    marked: bool,
    max_nodes: usize,
) -> Result<GhOutcome> {
    for t in [a, b] {
        if t.len() > max_nodes {
            return Err(Error::SizeLimit { got: t.len(), cap: max_nodes });
        }
    }
    let mut pin_f = vec![usize::MAX; a.len()];
    let mut pin_g = vec![usize::MAX; b.len()];
    pin_f[a.root()] = b.root();
    pin_g[b.root()] = a.root();
    if marked {
        let (xa, xb) = match (a.marked(), b.marked()) {
            (Some(xa), Some(xb)) => (xa, xb),
            _ => {
                return Err(Error::Domain(
                    "marked distance needs a marked vertex in both trees".into(),
                ))
            }
        };
        pin_f[xa] = xb;
        pin_g[xb] = xa;
    }
    let da = dist_matrix(a)?;
    let db = dist_matrix(b)?;
    let mut search = Search {
        da: &da,
        db: &db,
        pin_f,
        pin_g,
        best: f64::INFINITY,
        best_pairs: Vec::new(),
    };
    let mut f = Vec::with_capacity(a.len());
    search.assign_f(&mut f, 0.0);
    Ok(GhOutcome { dist: search.best / 2.0, pairs: search.best_pairs })
}

/// Exact (marked) Gromov–Hausdorff distance at the default size cap.
pub fn gh_dist(a: &MetricTree, b: &MetricTree, marked: bool) -> Result<f64> {
    gh_dist_detailed(a, b, marked, DEFAULT_MAX_NODES).map(|o| o.dist)
}
