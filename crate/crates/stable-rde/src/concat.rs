//! The scaling-factor sequences, the single-point concatenation operator on
//! marked trees, and the metric comparing scaled families coordinate-wise.
//!
//! A scaling sequence carries four head entries (x₀,x₁,x₂,x₃) summing to 1
//! and a decreasing stick vector p splitting x₃ into the remaining atoms
//! ξ_{j+2} = x₃·p_j. Concatenation takes a sequence, an exponent `beta`, and
//! one marked tree per positive atom: the base copy τ₀ is rescaled by ξ₀^β
//! and keeps its root; all other copies, rescaled by ξ_i^β, are glued by
//! their roots to the image of τ₀'s marked point; the result is marked at
//! the image of τ₁'s marked point. Distances in the glued tree follow the
//! four-case formula (within one copy: the scaled original; across copies:
//! scaled legs through the junction) by construction.

use std::collections::BTreeMap;

use rand::Rng;

use crate::error::{Error, Result};
use crate::ghdist::gh_dist_detailed;
use crate::laws::{dirichlet_sample, pd_sample};
use crate::tree::{MassMode, MetricTree, NodeId};

const SUM_TOL: f64 = 1e-12;

/// A sequence of nonnegative scaling atoms: x₀, x₁, x₂ directly, then
/// x₃·p_j for a decreasing stick vector p. Atoms sum to 1; `tail` bounds any
/// atom lost to truncation of an originally infinite stick vector.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalingSeq {
    x: [f64; 4],
    p: Vec<f64>,
    tail: f64,
}

impl ScalingSeq {
    pub fn new(x: [f64; 4], p: Vec<f64>) -> Result<ScalingSeq> {
        ScalingSeq::with_tail(x, p, 0.0)
    }

    /// As `new`, recording an upper bound for atoms dropped by truncation.
    pub fn with_tail(x: [f64; 4], p: Vec<f64>, tail: f64) -> Result<ScalingSeq> {
        for &v in &x {
            if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                return Err(Error::Param(format!("head entry {v} outside [0,1]")));
            }
        }
        let sum: f64 = x.iter().sum();
        if (sum - 1.0).abs() > SUM_TOL {
            return Err(Error::Param(format!("head entries sum to {sum}, expected 1")));
        }
        if !p.is_empty() {
            for pair in p.windows(2) {
                if pair[1] > pair[0] {
                    return Err(Error::Param("stick vector must be nonincreasing".into()));
                }
            }
            if !p.iter().all(|&w| w.is_finite() && w > 0.0) {
                return Err(Error::Param("stick entries must be positive".into()));
            }
            let psum: f64 = p.iter().sum();
            if (psum - 1.0).abs() > SUM_TOL {
                return Err(Error::Param(format!("sticks sum to {psum}, expected 1")));
            }
        }
        if !tail.is_finite() || tail < 0.0 {
            return Err(Error::Param(format!("bad tail bound {tail}")));
        }
        Ok(ScalingSeq { x, p, tail })
    }

    /// Builds a sequence from an explicit finite atom list: the first three
    /// entries become the head, the rest (nonincreasing, trailing zeros
    /// allowed) are folded into x₃ and its sticks.
    pub fn from_atoms(atoms: &[f64]) -> Result<ScalingSeq> {
        let get = |i: usize| atoms.get(i).copied().unwrap_or(0.0);
        let mut rest: Vec<f64> = atoms.iter().skip(3).copied().collect();
        while rest.last() == Some(&0.0) {
            rest.pop();
        }
        if rest.iter().any(|&r| r <= 0.0) {
            return Err(Error::Param(
                "atoms past the head must be positive before the first zero".into(),
            ));
        }
        let x3: f64 = rest.iter().sum();
        let p: Vec<f64> = rest.iter().map(|&r| r / x3).collect();
        ScalingSeq::new([get(0), get(1), get(2), x3], p)
    }

    pub fn x(&self) -> &[f64; 4] {
        &self.x
    }

    pub fn sticks(&self) -> &[f64] {
        &self.p
    }

    /// Upper bound on any atom beyond the stored ones.
    pub fn tail(&self) -> f64 {
        self.tail
    }

    /// Number of stored atoms (the head plus one per stick).
    pub fn n_atoms(&self) -> usize {
        3 + self.p.len()
    }

    /// Atom `i`; indices past the stored range are 0.
    pub fn atom(&self, i: usize) -> f64 {
        if i < 3 {
            self.x[i]
        } else {
            self.p.get(i - 3).map_or(0.0, |&w| self.x[3] * w)
        }
    }

    /// All stored atoms in order.
    pub fn atoms(&self) -> Vec<f64> {
        (0..self.n_atoms()).map(|i| self.atom(i)).collect()
    }
}

/// Samples the scaling sequence of the self-similar branching law with
/// index `alpha`: head ~ Dirichlet(β,β,β,1−2β) with β = 1−1/α, sticks an
/// independent size-ordered PD(1−β, 1−2β) vector truncated at `eps`. At
/// α = 2 the head is Dirichlet(1/2,1/2,1/2) and the stick part vanishes.
///
/// The head is drawn before the sticks, so a run that needs only (ξ₀,ξ₁)
/// can stop after the head and still agree with a full draw from the same
/// stream; see [`stable_xi_first_two`].
pub fn stable_xi<R: Rng + ?Sized>(alpha: f64, eps: f64, rng: &mut R) -> Result<ScalingSeq> {
    check_alpha(alpha)?;
    if alpha == 2.0 {
        let d = dirichlet_half_triple(rng);
        return ScalingSeq::new([d[0], d[1], d[2], 0.0], Vec::new());
    }
    let beta = 1.0 - 1.0 / alpha;
    let d = dirichlet_sample(&[beta, beta, beta, 1.0 - 2.0 * beta], rng)?;
    let sticks = pd_sample(1.0 - beta, 1.0 - 2.0 * beta, eps, rng)?;
    let mut p = sticks.weights;
    p.retain(|&w| w > 0.0);
    ScalingSeq::with_tail([d[0], d[1], d[2], d[3]], p, d[3] * sticks.residual)
}

/// The first two atoms of [`stable_xi`], drawing exactly the head and
/// nothing else. With the same stream this returns bitwise the same
/// (ξ₀, ξ₁) a full draw would.
pub fn stable_xi_first_two<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> Result<(f64, f64)> {
    check_alpha(alpha)?;
    if alpha == 2.0 {
        let d = dirichlet_half_triple(rng);
        return Ok((d[0], d[1]));
    }
    let beta = 1.0 - 1.0 / alpha;
    let d = dirichlet_sample(&[beta, beta, beta, 1.0 - 2.0 * beta], rng)?;
    Ok((d[0], d[1]))
}

/// Dirichlet(1/2,1/2,1/2) via three squared standard normals. A squared
/// normal is Gamma(1/2) up to a common scale, and the scale cancels in the
/// normalization, so the law is exact. Much cheaper than generic Gamma
/// rejection sampling, which matters on deep recursion trajectories.
fn dirichlet_half_triple<R: Rng + ?Sized>(rng: &mut R) -> [f64; 3] {
    loop {
        let a: f64 = rng.sample::<f64, _>(rand_distr::StandardNormal);
        let b: f64 = rng.sample::<f64, _>(rand_distr::StandardNormal);
        let c: f64 = rng.sample::<f64, _>(rand_distr::StandardNormal);
        let (a, b, c) = (a * a, b * b, c * c);
        let s = a + b + c;
        if s > 0.0 && s.is_finite() {
            return [a / s, b / s, c / s];
        }
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 1.0 && alpha <= 2.0 {
        Ok(())
    } else {
        Err(Error::Param(format!("alpha {alpha} outside (1,2]")))
    }
}

/// A scaling sequence, the marked trees aligned with its atoms, and the
/// scaling exponent. Trees at zero atoms (or past the stored atoms) are
/// ignored; every positive atom must have a marked tree.
#[derive(Clone, Debug)]
pub struct ConcatInput<'a> {
    pub xi: &'a ScalingSeq,
    pub trees: Vec<&'a MetricTree>,
    pub beta: f64,
}

/// A concatenation result with its bookkeeping: the junction node and, per
/// input slot, the map from original node ids to output ids (`None` for
/// ignored trees).
#[derive(Clone, Debug)]
pub struct ConcatOutcome {
    pub tree: MetricTree,
    pub junction: NodeId,
    pub node_map: Vec<Option<Vec<NodeId>>>,
}

/// Copies `t` into the arena with edges scaled by `scale`, identifying t's
/// root with `root_image`. Returns the node map.
fn copy_tree(
    t: &MetricTree,
    scale: f64,
    root_image: usize,
    parent: &mut Vec<Option<usize>>,
    edge_len: &mut Vec<f64>,
    junction: &mut Vec<bool>,
) -> Vec<usize> {
    let mut map = vec![usize::MAX; t.len()];
    map[t.root()] = root_image;
    junction[root_image] |= t.is_junction(t.root());
    let mut stack = vec![t.root()];
    while let Some(v) = stack.pop() {
        for &c in t.children(v) {
            let id = parent.len();
            map[c] = id;
            parent.push(Some(map[v]));
            edge_len.push(t.edge_len(c) * scale);
            junction.push(t.is_junction(c));
            stack.push(c);
        }
    }
    map
}

/// Glues the input trees at a single junction per the four-case metric and
/// returns the result with its node maps.
///
/// Leaf masses are propagated as atom × original mass (landing on the
/// junction is allowed) when every retained tree carries them; if any
/// retained tree has none, the output has none.
pub fn concat_detailed(input: &ConcatInput) -> Result<ConcatOutcome> {
    let beta = input.beta;
    if !beta.is_finite() || !(0.0..=1.0).contains(&beta) || beta == 0.0 {
        return Err(Error::Param(format!("beta must lie in (0,1], got {beta}")));
    }
    let n_atoms = input.xi.n_atoms();
    let mut retained = Vec::new();
    for i in 0..n_atoms {
        if input.xi.atom(i) > 0.0 {
            let t = input.trees.get(i).copied().ok_or_else(|| {
                Error::Domain(format!("atom {i} is positive but no tree was supplied for it"))
            })?;
            if t.marked().is_none() {
                return Err(Error::Domain(format!("tree {i} has no marked vertex")));
            }
            retained.push(i);
        }
    }
    let mut parent: Vec<Option<usize>> = vec![None];
    let mut edge_len = vec![0.0];
    let mut junction = vec![false];
    let mut node_map: Vec<Option<Vec<usize>>> = vec![None; input.trees.len()];

    let junction_node = if input.xi.atom(0) > 0.0 {
        let t0 = input.trees[0];
        let map = copy_tree(
            t0,
            input.xi.atom(0).powf(beta),
            0,
            &mut parent,
            &mut edge_len,
            &mut junction,
        );
        let j = map[t0.marked().expect("checked above")];
        node_map[0] = Some(map);
        j
    } else {
        0
    };
    junction[junction_node] = true;

    for &i in &retained {
        if i == 0 {
            continue;
        }
        let t = input.trees[i];
        let map = copy_tree(
            t,
            input.xi.atom(i).powf(beta),
            junction_node,
            &mut parent,
            &mut edge_len,
            &mut junction,
        );
        node_map[i] = Some(map);
    }

    let marked = if input.xi.atom(1) > 0.0 {
        let t1 = input.trees[1];
        node_map[1].as_ref().expect("retained")[t1.marked().expect("checked above")]
    } else {
        junction_node
    };

    let mut tree = MetricTree::from_parts(
        parent,
        edge_len,
        0,
        Some(marked),
        None,
        BTreeMap::new(),
        junction,
    )?;
    // mass is linear under gluing: atom × original, totals add up to
    // whatever the inputs carried (1 for normalized inputs)
    if !retained.is_empty() && retained.iter().all(|&i| input.trees[i].leaf_mass().is_some()) {
        let mut mass: BTreeMap<usize, f64> = BTreeMap::new();
        for &i in &retained {
            let map = node_map[i].as_ref().expect("retained");
            for (&v, &m) in input.trees[i].leaf_mass().expect("checked above") {
                *mass.entry(map[v]).or_insert(0.0) += input.xi.atom(i) * m;
            }
        }
        tree = tree.with_unnormalized_mass(mass)?;
    }
    Ok(ConcatOutcome { tree, junction: junction_node, node_map })
}

/// As [`concat_detailed`], returning only the glued tree.
pub fn concat(input: &ConcatInput) -> Result<MetricTree> {
    concat_detailed(input).map(|o| o.tree)
}

/// A coordinate-wise distance value together with the bound on what the
/// truncated coordinates could still contribute.
#[derive(Clone, Copy, Debug)]
pub struct DBetaOutcome {
    pub value: f64,
    /// Upper bound on the contribution of atoms beyond the stored range:
    /// (largest possibly-dropped atom)^β.
    pub tail_bound: f64,
}

fn marked_point() -> MetricTree {
    MetricTree::from_parts(
        vec![None],
        vec![0.0],
        0,
        Some(0),
        None,
        BTreeMap::new(),
        vec![false],
    )
    .expect("one-point tree is valid")
}

/// Coordinate-wise distance between two scaled families: the sup over
/// stored coordinates of |ξ_i^β − ξ'_i^β|, the marked distance of the
/// unscaled trees, and the marked distance of the rescaled trees. A
/// coordinate whose atom is 0 (or missing) compares as the one-point tree.
/// Both inputs must use the same `beta`.
pub fn d_beta(k1: &ConcatInput, k2: &ConcatInput, max_nodes: usize) -> Result<DBetaOutcome> {
    if k1.beta != k2.beta {
        return Err(Error::Param(format!(
            "inputs use different exponents: {} vs {}",
            k1.beta, k2.beta
        )));
    }
    let beta = k1.beta;
    if !beta.is_finite() || !(0.0..=1.0).contains(&beta) || beta == 0.0 {
        return Err(Error::Param(format!("beta must lie in (0,1], got {beta}")));
    }
    let point = marked_point();
    let coord = |k: &ConcatInput, i: usize| -> Result<(f64, MetricTree)> {
        let a = k.xi.atom(i);
        if a > 0.0 {
            let t = k.trees.get(i).copied().ok_or_else(|| {
                Error::Domain(format!("atom {i} is positive but no tree was supplied for it"))
            })?;
            Ok((a, t.clone()))
        } else {
            Ok((0.0, point.clone()))
        }
    };
    let n = k1.xi.n_atoms().max(k2.xi.n_atoms());
    let mut sup = 0.0f64;
    for i in 0..n {
        let (a1, t1) = coord(k1, i)?;
        let (a2, t2) = coord(k2, i)?;
        sup = sup.max((a1.powf(beta) - a2.powf(beta)).abs());
        sup = sup.max(gh_dist_detailed(&t1, &t2, true, max_nodes)?.dist);
        let s1 = if a1 > 0.0 { t1.rescale(a1, beta, MassMode::Normalized)? } else { t1 };
        let s2 = if a2 > 0.0 { t2.rescale(a2, beta, MassMode::Normalized)? } else { t2 };
        sup = sup.max(gh_dist_detailed(&s1, &s2, true, max_nodes)?.dist);
    }
    let tail_bound = k1.xi.tail().max(k2.xi.tail()).powf(beta);
    Ok(DBetaOutcome { value: sup, tail_bound })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ghdist::DEFAULT_MAX_NODES;
    use crate::rng::SplitMix64;
    use crate::tree::TreeBuilder;

    fn seg() -> MetricTree {
        MetricTree::segment(1.0).unwrap()
    }

    fn y_tree() -> MetricTree {
        let mut b = TreeBuilder::new();
        let v = b.add_child(TreeBuilder::ROOT, 0.5).unwrap();
        let l1 = b.add_child(v, 0.75).unwrap();
        let l2 = b.add_child(v, 0.25).unwrap();
        b.mark(l1).unwrap();
        b.set_mass(l1, 0.5).unwrap();
        b.set_mass(l2, 0.5).unwrap();
        b.build().unwrap()
    }

    #[test]
    fn glued_segments_follow_the_hand_computation() {
        let xi = ScalingSeq::new([0.25, 0.25, 0.5, 0.0], vec![]).unwrap();
        let (s0, s1, s2) = (seg(), seg(), seg());
        let out = concat_detailed(&ConcatInput {
            xi: &xi,
            trees: vec![&s0, &s1, &s2],
            beta: 0.5,
        })
        .unwrap();
        let t = &out.tree;
        let spine = t.root_dist(t.marked().unwrap()).unwrap();
        assert!((spine - 1.0).abs() < 1e-12);
        let stats = t.stats();
        assert!((stats.height - (0.5 + 0.5f64.sqrt())).abs() < 1e-12);
        assert!((stats.height - 1.20711).abs() < 1e-5);
        assert!(t.is_junction(out.junction));
        // masses: 0.25 at the junction (old mark of the base), 0.25 and 0.5
        // at the two glued far ends
        let mass = t.leaf_mass().unwrap();
        assert!((mass[&out.junction] - 0.25).abs() < 1e-15);
        assert!((mass.values().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn single_atom_is_the_identity() {
        let t0 = y_tree();
        let xi = ScalingSeq::new([1.0, 0.0, 0.0, 0.0], vec![]).unwrap();
        let out = concat(&ConcatInput { xi: &xi, trees: vec![&t0], beta: 0.5 }).unwrap();
        assert!(out.isometric_to(&t0, 1e-12));
    }

    #[test]
    fn distances_within_a_copy_scale_by_atom_pow_beta() {
        let t2 = y_tree();
        let xi = ScalingSeq::new([0.3, 0.2, 0.5, 0.0], vec![]).unwrap();
        let (s0, s1) = (seg(), seg());
        let beta = 0.7;
        let out = concat_detailed(&ConcatInput {
            xi: &xi,
            trees: vec![&s0, &s1, &t2],
            beta,
        })
        .unwrap();
        let map = out.node_map[2].as_ref().unwrap();
        let s = 0.5f64.powf(beta);
        for u in 0..t2.len() {
            for v in 0..t2.len() {
                let want = s * t2.dist(u, v).unwrap();
                let got = out.tree.dist(map[u], map[v]).unwrap();
                assert!((got - want).abs() < 1e-12, "{u},{v}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn cross_copy_distances_follow_the_four_case_formula() {
        let trees = [y_tree(), y_tree(), seg(), y_tree()];
        let xi = ScalingSeq::from_atoms(&[0.4, 0.1, 0.2, 0.3]).unwrap();
        let beta = 0.6;
        let out = concat_detailed(&ConcatInput {
            xi: &xi,
            trees: trees.iter().collect(),
            beta,
        })
        .unwrap();
        let scale: Vec<f64> = (0..4).map(|i| xi.atom(i).powf(beta)).collect();
        let maps: Vec<&Vec<usize>> =
            (0..4).map(|i| out.node_map[i].as_ref().unwrap()).collect();
        let x0 = trees[0].marked().unwrap();
        // case 2: base to copy j through the junction
        for j in 1..4 {
            for u in 0..trees[0].len() {
                for v in 0..trees[j].len() {
                    let want = scale[0] * trees[0].dist(u, x0).unwrap()
                        + scale[j] * trees[j].root_dist(v).unwrap();
                    let got = out.tree.dist(maps[0][u], maps[j][v]).unwrap();
                    assert!((got - want).abs() < 1e-9, "0->{j} {u},{v}");
                }
            }
        }
        // case 4: copy i to copy j, both through the junction
        for i in 1..4 {
            for j in 1..4 {
                if i == j {
                    continue;
                }
                for u in 0..trees[i].len() {
                    for v in 0..trees[j].len() {
                        if maps[i][u] == maps[j][v] {
                            continue; // both roots land on the junction
                        }
                        let want = scale[i] * trees[i].root_dist(u).unwrap()
                            + scale[j] * trees[j].root_dist(v).unwrap();
                        let got = out.tree.dist(maps[i][u], maps[j][v]).unwrap();
                        assert!((got - want).abs() < 1e-9, "{i}->{j} {u},{v}");
                    }
                }
            }
        }
        // case 1: within the base
        for u in 0..trees[0].len() {
            for v in 0..trees[0].len() {
                let want = scale[0] * trees[0].dist(u, v).unwrap();
                let got = out.tree.dist(maps[0][u], maps[0][v]).unwrap();
                assert!((got - want).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn masses_sum_to_one_and_respect_atoms() {
        let trees = [y_tree(), seg(), seg()];
        let xi = ScalingSeq::from_atoms(&[0.5, 0.3, 0.2]).unwrap();
        let out = concat(&ConcatInput { xi: &xi, trees: trees.iter().collect(), beta: 0.5 })
            .unwrap();
        let mass = out.leaf_mass().unwrap();
        assert!((mass.values().sum::<f64>() - 1.0).abs() < 1e-12);
        // the y-tree's two half-masses now weigh 0.25 each
        let count_quarter = mass.values().filter(|&&m| (m - 0.25).abs() < 1e-15).count();
        assert_eq!(count_quarter, 2);
    }

    #[test]
    fn scaling_equivariance_in_mass() {
        let trees = [y_tree(), y_tree(), seg()];
        let xi = ScalingSeq::from_atoms(&[0.5, 0.25, 0.25]).unwrap();
        let beta = 0.5;
        let c = 0.37;
        let pre: Vec<MetricTree> = trees
            .iter()
            .map(|t| t.rescale(c, beta, MassMode::Scaled).unwrap())
            .collect();
        let glued_pre = concat(&ConcatInput {
            xi: &xi,
            trees: pre.iter().collect(),
            beta,
        })
        .unwrap();
        let glued_post = concat(&ConcatInput {
            xi: &xi,
            trees: trees.iter().collect(),
            beta,
        })
        .unwrap();
        // same arena layout on both sides, so compare node by node
        assert_eq!(glued_pre.len(), glued_post.len());
        let factor = c.powf(beta);
        for u in 0..glued_pre.len() {
            for v in 0..glued_pre.len() {
                let a = glued_pre.dist(u, v).unwrap();
                let b = glued_post.dist(u, v).unwrap() * factor;
                assert!((a - b).abs() < 1e-12 * a.abs().max(1.0), "{u},{v}");
            }
        }
    }

    #[test]
    fn zero_atoms_drop_their_trees() {
        let trees = [y_tree(), seg(), seg()];
        let xi = ScalingSeq::new([0.5, 0.0, 0.5, 0.0], vec![]).unwrap();
        let out = concat_detailed(&ConcatInput {
            xi: &xi,
            trees: trees.iter().collect(),
            beta: 0.5,
        })
        .unwrap();
        assert!(out.node_map[1].is_none());
        // mark falls back to the junction when atom 1 vanishes
        assert_eq!(out.tree.marked(), Some(out.junction));
        // nodes: 4 from the base + 1 glued leaf (copy 2's root merges in)
        assert_eq!(out.tree.len(), 5);
    }

    #[test]
    fn collapsed_base_glues_at_the_root() {
        let trees = [y_tree(), seg(), seg()];
        let xi = ScalingSeq::new([0.0, 0.5, 0.5, 0.0], vec![]).unwrap();
        let out = concat_detailed(&ConcatInput {
            xi: &xi,
            trees: trees.iter().collect(),
            beta: 0.5,
        })
        .unwrap();
        assert_eq!(out.junction, out.tree.root());
        assert_eq!(out.tree.len(), 3);
        let d = out.tree.root_dist(out.tree.marked().unwrap()).unwrap();
        assert!((d - 0.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn missing_trees_and_marks_are_domain_errors() {
        let xi = ScalingSeq::from_atoms(&[0.5, 0.5]).unwrap();
        let s = seg();
        let err = concat(&ConcatInput { xi: &xi, trees: vec![&s], beta: 0.5 });
        assert!(err.is_err());

        let mut b = TreeBuilder::new();
        b.add_child(TreeBuilder::ROOT, 1.0).unwrap();
        let unmarked = b.build().unwrap();
        let err = concat(&ConcatInput { xi: &xi, trees: vec![&s, &unmarked], beta: 0.5 });
        assert!(err.is_err());
    }

    #[test]
    fn stable_xi_at_alpha_two_has_dirichlet_head_and_no_sticks() {
        let mut rng = SplitMix64::new(20);
        let reps = 2000;
        let mut means = [0.0f64; 3];
        for _ in 0..reps {
            let xi = stable_xi(2.0, 1e-3, &mut rng).unwrap();
            assert_eq!(xi.x()[3], 0.0);
            assert!(xi.sticks().is_empty());
            let sum: f64 = xi.atoms().iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
            for i in 0..3 {
                means[i] += xi.atom(i);
            }
        }
        // Dir(1/2,1/2,1/2) coordinates have mean 1/3, sd ~0.236
        let sigma = 0.236 / (reps as f64).sqrt();
        for m in means {
            let m = m / reps as f64;
            assert!((m - 1.0 / 3.0).abs() < 3.0 * sigma, "mean {m}");
        }
    }

    #[test]
    fn stable_xi_head_mean_at_alpha_three_halves() {
        // head ~ Dir(1/3,1/3,1/3,1/3): E[x0] = 1/4, sd ~0.25
        let mut rng = SplitMix64::new(21);
        let reps = 2000;
        let mut mean = 0.0;
        for _ in 0..reps {
            let xi = stable_xi(1.5, 1e-2, &mut rng).unwrap();
            let sum: f64 = xi.atoms().iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
            mean += xi.atom(0);
        }
        mean /= reps as f64;
        let sigma = 0.25 / (reps as f64).sqrt();
        assert!((mean - 0.25).abs() < 3.0 * sigma, "mean {mean}");
    }

    #[test]
    fn first_two_atoms_couple_bitwise_with_the_full_draw() {
        for &alpha in &[1.5, 2.0] {
            let full = stable_xi(alpha, 1e-2, &mut SplitMix64::new(22)).unwrap();
            let (x0, x1) = stable_xi_first_two(alpha, &mut SplitMix64::new(22)).unwrap();
            assert_eq!(full.atom(0), x0);
            assert_eq!(full.atom(1), x1);
        }
    }

    #[test]
    fn sticks_are_sorted_and_tail_bound_tracks_truncation() {
        let mut rng = SplitMix64::new(23);
        let xi = stable_xi(1.5, 1e-2, &mut rng).unwrap();
        let p = xi.sticks();
        assert!(!p.is_empty());
        assert!(p.windows(2).all(|w| w[1] <= w[0]));
        assert!(xi.tail() >= 0.0);
        assert!(xi.tail() < 1e-2);
    }

    #[test]
    fn distance_of_input_to_itself_is_zero() {
        let trees = [y_tree(), seg(), seg()];
        let xi = ScalingSeq::from_atoms(&[0.5, 0.25, 0.25]).unwrap();
        let k = ConcatInput { xi: &xi, trees: trees.iter().collect(), beta: 0.5 };
        let out = d_beta(&k, &k, DEFAULT_MAX_NODES).unwrap();
        assert_eq!(out.value, 0.0);
        assert_eq!(out.tail_bound, 0.0);
    }

    #[test]
    fn head_perturbation_dominates_the_sup() {
        let (a0, a1, a2) = (seg(), seg(), seg());
        let xi1 = ScalingSeq::new([0.25, 0.25, 0.5, 0.0], vec![]).unwrap();
        let xi2 = ScalingSeq::new([0.16, 0.34, 0.5, 0.0], vec![]).unwrap();
        let k1 = ConcatInput { xi: &xi1, trees: vec![&a0, &a1, &a2], beta: 0.5 };
        let k2 = ConcatInput { xi: &xi2, trees: vec![&a0, &a1, &a2], beta: 0.5 };
        let out = d_beta(&k1, &k2, DEFAULT_MAX_NODES).unwrap();
        // coordinate 0: atom term |0.5 − 0.4| = 0.1, scaled-tree term 0.05,
        // unscaled term 0; coordinate 1 stays below
        assert!((out.value - 0.1).abs() < 1e-12, "value {}", out.value);
    }

    #[test]
    fn unmatched_coordinates_compare_against_a_point() {
        let trees1 = [seg(), seg(), seg(), seg()];
        let xi1 = ScalingSeq::from_atoms(&[0.25, 0.25, 0.25, 0.25]).unwrap();
        let trees2 = [seg(), seg(), seg()];
        let xi2 = ScalingSeq::from_atoms(&[0.3, 0.3, 0.4]).unwrap();
        let k1 = ConcatInput { xi: &xi1, trees: trees1.iter().collect(), beta: 0.5 };
        let k2 = ConcatInput { xi: &xi2, trees: trees2.iter().collect(), beta: 0.5 };
        let out = d_beta(&k1, &k2, DEFAULT_MAX_NODES).unwrap();
        // coordinate 3: unit segment vs point gives unscaled distance 1/2
        assert!(out.value >= 0.5 - 1e-12, "value {}", out.value);
    }

    #[test]
    fn scaling_seq_validation_rejects_bad_input() {
        assert!(ScalingSeq::new([0.5, 0.5, 0.1, 0.0], vec![]).is_err());
        assert!(ScalingSeq::new([0.5, 0.25, 0.0, 0.25], vec![0.4, 0.6]).is_err());
        assert!(ScalingSeq::new([0.5, 0.25, 0.0, 0.25], vec![0.5, 0.5, 0.1]).is_err());
        assert!(ScalingSeq::from_atoms(&[0.5, 0.25, 0.0, 0.0, 0.25]).is_err());
        assert!(ScalingSeq::from_atoms(&[0.25, 0.25, 0.25, 0.25]).is_ok());
    }

    #[test]
    fn atoms_recover_head_and_sticks() {
        let xi = ScalingSeq::from_atoms(&[0.1, 0.2, 0.3, 0.25, 0.15]).unwrap();
        assert_eq!(xi.n_atoms(), 5);
        let atoms = xi.atoms();
        for (got, want) in atoms.iter().zip([0.1, 0.2, 0.3, 0.25, 0.15]) {
            assert!((got - want).abs() < 1e-12);
        }
        assert_eq!(xi.atom(99), 0.0);
    }
}
