//! Iteration engine for the single-junction gluing map: scaling-law models,
//! initial laws, the recursion in three modes (full tree, marked-spine
//! scalar, depth-k spanning skeleton), the additive level martingale, the
//! dyadic string construction with its bead-replacement growth scheme, and
//! the convergence experiment harness.
//!
//! Reproducibility contract: every random object is driven by a stream
//! derived from a node seed, and child node seeds are folded from the parent
//! seed and the child index. Modes that visit the same node therefore see
//! the same draws, which is what makes cross-mode comparisons on coupled
//! seeds possible: a spine run consumes a strict prefix of the draws a full
//! run makes at each node, and skips exactly the nodes a full run skips.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::concat::{concat_detailed, stable_xi, stable_xi_first_two, ConcatInput, ScalingSeq};
use crate::error::{Error, Result};
use crate::laws::{dirichlet_sample, ml_moment};
use crate::rng::{child_seed, run_replicates, SplitMix64};
use crate::stats::{ks_test, mean_stderr, moment_test, Rule, StatReport};
use crate::tree::{MetricTree, NodeId};

/// Default truncation threshold for stick atoms of the stable scaling law.
pub const DEFAULT_XI_EPS: f64 = 1e-3;

/// Hard ceiling on arena nodes for full-mode iteration and string growth.
pub const MAX_FULL_NODES: usize = 10_000_000;

/// Hard ceiling on spine depth: the binary recursion has 2^depth leaves.
pub const MAX_SPINE_DEPTH: usize = 25;

/// Hard ceiling on the dyadic depth of the string construction.
pub const MAX_STRING_DEPTH: usize = 20;

const SUM_TOL: f64 = 1e-12;

/// Distribution of the scaling sequence ξ. Every variant guarantees
/// ξ₀ > 0 and ξ₁ > 0 by construction, which the gluing fixpoint theory
/// requires and which cannot be checked from samples.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum XiLaw {
    /// Head Dirichlet(β,β,β,1−2β) with β = 1−1/α plus a size-ordered
    /// PD(1−β,1−2β) stick part; at α = 2 the stick part vanishes.
    Stable { alpha: f64 },
    /// Finite mixture over fixed atom vectors: row i is drawn with
    /// probability probs[i].
    Atoms { rows: Vec<Vec<f64>>, probs: Vec<f64> },
    /// Dirichlet over the atom coordinates; entries past the third are
    /// sorted into nonincreasing order so they form a valid stick part.
    Dirichlet { params: Vec<f64> },
}

impl XiLaw {
    pub fn validate(&self) -> Result<()> {
        match self {
            XiLaw::Stable { alpha } => {
                if !alpha.is_finite() || *alpha <= 1.0 || *alpha > 2.0 {
                    return Err(Error::Param(format!("alpha {alpha} outside (1,2]")));
                }
            }
            XiLaw::Atoms { rows, probs } => {
                if rows.is_empty() || rows.len() != probs.len() {
                    return Err(Error::Param(format!(
                        "{} atom rows against {} probabilities",
                        rows.len(),
                        probs.len()
                    )));
                }
                let psum: f64 = probs.iter().sum();
                if probs.iter().any(|&p| !p.is_finite() || p <= 0.0)
                    || (psum - 1.0).abs() > SUM_TOL
                {
                    return Err(Error::Param(format!(
                        "row probabilities must be positive and sum to 1, got sum {psum}"
                    )));
                }
                for row in rows {
                    ScalingSeq::from_atoms(row)?;
                    if row.len() < 2 || row[0] <= 0.0 || row[1] <= 0.0 {
                        return Err(Error::Param(
                            "every atom row needs positive first and second entries".into(),
                        ));
                    }
                }
            }
            XiLaw::Dirichlet { params } => {
                if params.len() < 2 {
                    return Err(Error::Param(format!(
                        "Dirichlet scaling law needs at least 2 parameters, got {}",
                        params.len()
                    )));
                }
                if params.iter().any(|&a| !a.is_finite() || a <= 0.0) {
                    return Err(Error::Param("Dirichlet parameters must be positive".into()));
                }
            }
        }
        Ok(())
    }

    /// Draws a full scaling sequence. `eps` truncates the stick part of the
    /// stable law; the other laws ignore it.
    pub fn sample<R: Rng + ?Sized>(&self, eps: f64, rng: &mut R) -> Result<ScalingSeq> {
        match self {
            XiLaw::Stable { alpha } => stable_xi(*alpha, eps, rng),
            XiLaw::Atoms { rows, probs } => {
                let row = &rows[pick_index(probs, rng)];
                ScalingSeq::from_atoms(row)
            }
            XiLaw::Dirichlet { params } => {
                let mut d = dirichlet_sample(params, rng)?;
                if d.len() > 3 {
                    d[3..].sort_by(|a, b| b.partial_cmp(a).expect("finite draws"));
                }
                ScalingSeq::from_atoms(&d)
            }
        }
    }

    /// Draws only (ξ₀, ξ₁). On the same stream this agrees bitwise with the
    /// first two atoms of [`XiLaw::sample`]: the stable law draws its head
    /// before its sticks, and the other laws resolve both coordinates with
    /// the same draws a full sample makes.
    pub fn sample_first_two<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(f64, f64)> {
        match self {
            XiLaw::Stable { alpha } => stable_xi_first_two(*alpha, rng),
            XiLaw::Atoms { rows, probs } => {
                let row = &rows[pick_index(probs, rng)];
                Ok((row[0], row[1]))
            }
            XiLaw::Dirichlet { params } => {
                let d = dirichlet_sample(params, rng)?;
                Ok((d[0], d[1]))
            }
        }
    }
}

fn pick_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let mut u: f64 = rng.random::<f64>();
    for (i, &p) in probs.iter().enumerate() {
        if u < p {
            return i;
        }
        u -= p;
    }
    probs.len() - 1
}

/// A scaling law paired with the exponent β it is calibrated to and the
/// stick truncation threshold used when sampling.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct XiModel {
    pub law: XiLaw,
    pub beta: f64,
    pub eps: f64,
}

impl XiModel {
    /// Stable scaling law with its exact exponent β = 1 − 1/α.
    pub fn stable(alpha: f64) -> Result<XiModel> {
        let law = XiLaw::Stable { alpha };
        law.validate()?;
        Ok(XiModel { law, beta: 1.0 - 1.0 / alpha, eps: DEFAULT_XI_EPS })
    }

    /// Custom law with a caller-supplied exponent (see [`calibrate_beta`]).
    pub fn custom(law: XiLaw, beta: f64) -> Result<XiModel> {
        let model = XiModel { law, beta, eps: DEFAULT_XI_EPS };
        model.validate()?;
        Ok(model)
    }

    pub fn with_eps(mut self, eps: f64) -> Result<XiModel> {
        self.eps = eps;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        self.law.validate()?;
        if !self.beta.is_finite() || self.beta <= 0.0 || self.beta >= 1.0 {
            return Err(Error::Param(format!(
                "exponent beta must lie strictly inside (0,1), got {}",
                self.beta
            )));
        }
        if !self.eps.is_finite() || self.eps <= 0.0 || self.eps >= 0.5 {
            return Err(Error::Param(format!(
                "stick truncation eps must lie in (0, 0.5), got {}",
                self.eps
            )));
        }
        Ok(())
    }

    pub fn alpha(&self) -> Option<f64> {
        match self.law {
            XiLaw::Stable { alpha } => Some(alpha),
            _ => None,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<ScalingSeq> {
        self.law.sample(self.eps, rng)
    }

    pub fn sample_first_two<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(f64, f64)> {
        self.law.sample_first_two(rng)
    }
}

/// Finds the exponent b in (0,1) with E[ξ₀^b + ξ₁^b] = 1.
///
/// For the stable law the exact value 1 − 1/α is returned without sampling.
/// Otherwise `reps` pairs (ξ₀, ξ₁) are drawn once and b is bisected on the
/// fixed sample: the empirical map b ↦ mean(ξ₀^b + ξ₁^b) is continuous and
/// strictly decreasing (all atoms lie in (0,1)), starts at 2, and must drop
/// below 1 by b = 1 for a root to exist.
pub fn calibrate_beta(law: &XiLaw, tol: f64, reps: usize, seed: u64) -> Result<f64> {
    law.validate()?;
    if let XiLaw::Stable { alpha } = law {
        return Ok(1.0 - 1.0 / alpha);
    }
    if !(tol.is_finite() && tol > 0.0 && tol < 0.5) {
        return Err(Error::Param(format!("bisection tolerance {tol} outside (0, 0.5)")));
    }
    if reps < 100 {
        return Err(Error::Domain(format!(
            "calibration needs at least 100 sample pairs, got {reps}"
        )));
    }
    let mut rng = SplitMix64::new(seed);
    let mut pairs = Vec::with_capacity(reps);
    for _ in 0..reps {
        pairs.push(law.sample_first_two(&mut rng)?);
    }
    let f = |b: f64| -> f64 {
        pairs.iter().map(|&(x0, x1)| x0.powf(b) + x1.powf(b)).sum::<f64>() / reps as f64
    };
    if f(1.0) >= 1.0 {
        return Err(Error::Domain(
            "no exponent in (0,1) balances the law: E[ξ₀ + ξ₁] is already at least 1".into(),
        ));
    }
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if f(mid) >= 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Length distribution for segment-shaped initial trees.
#[derive(Clone, Debug, PartialEq)]
pub enum LengthLaw {
    Constant(f64),
    Exponential { mean: f64 },
    Empirical(Vec<f64>),
}

/// Initial distribution η for the iteration: marked segments with random
/// length, or a uniform pick from a fixed list of marked trees.
#[derive(Clone, Debug)]
pub enum InitLaw {
    Segment(LengthLaw),
    Trees(Vec<MetricTree>),
}

impl InitLaw {
    pub fn validate(&self) -> Result<()> {
        match self {
            InitLaw::Segment(LengthLaw::Constant(l)) => {
                if !l.is_finite() || *l <= 0.0 {
                    return Err(Error::Param(format!("segment length {l} must be positive")));
                }
            }
            InitLaw::Segment(LengthLaw::Exponential { mean }) => {
                if !mean.is_finite() || *mean <= 0.0 {
                    return Err(Error::Param(format!("mean length {mean} must be positive")));
                }
            }
            InitLaw::Segment(LengthLaw::Empirical(v)) => {
                if v.is_empty() || v.iter().any(|&l| !l.is_finite() || l <= 0.0) {
                    return Err(Error::Param(
                        "empirical lengths must be a nonempty list of positive reals".into(),
                    ));
                }
            }
            InitLaw::Trees(ts) => {
                if ts.is_empty() {
                    return Err(Error::Param("initial tree list is empty".into()));
                }
                let mut total = 0.0;
                for t in ts {
                    let m = t
                        .marked()
                        .ok_or_else(|| Error::Param("every initial tree must be marked".into()))?;
                    total += t.root_dist(m)?;
                }
                if total <= 0.0 {
                    return Err(Error::Param(
                        "initial trees have zero mean root-to-mark distance".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Draws an initial marked tree.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<MetricTree> {
        match self {
            InitLaw::Segment(law) => MetricTree::segment(draw_length(law, rng)),
            InitLaw::Trees(ts) => Ok(ts[rng.random_range(0..ts.len())].clone()),
        }
    }

    /// Draws only the root-to-mark distance, consuming the stream exactly as
    /// [`InitLaw::sample`] would.
    pub fn spine_sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        match self {
            InitLaw::Segment(law) => Ok(draw_length(law, rng)),
            InitLaw::Trees(ts) => {
                let t = &ts[rng.random_range(0..ts.len())];
                let m = t.marked().ok_or_else(|| {
                    Error::Param("every initial tree must be marked".into())
                })?;
                t.root_dist(m)
            }
        }
    }

    /// Mean root-to-mark distance h, exact for every supported variant.
    pub fn mean_spine(&self) -> f64 {
        match self {
            InitLaw::Segment(LengthLaw::Constant(l)) => *l,
            InitLaw::Segment(LengthLaw::Exponential { mean }) => *mean,
            InitLaw::Segment(LengthLaw::Empirical(v)) => {
                v.iter().sum::<f64>() / v.len() as f64
            }
            InitLaw::Trees(ts) => {
                let total: f64 = ts
                    .iter()
                    .map(|t| {
                        let m = t.marked().expect("validated init trees are marked");
                        t.root_dist(m).expect("validated init trees have finite spines")
                    })
                    .sum();
                total / ts.len() as f64
            }
        }
    }
}

fn draw_length<R: Rng + ?Sized>(law: &LengthLaw, rng: &mut R) -> f64 {
    match law {
        LengthLaw::Constant(l) => *l,
        LengthLaw::Exponential { mean } => {
            let exp = Exp::new(1.0 / mean).expect("validated positive mean");
            exp.sample(rng).max(f64::MIN_POSITIVE)
        }
        LengthLaw::Empirical(v) => v[rng.random_range(0..v.len())],
    }
}

/// How to materialize one sample of the depth-n iteration.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IterMode {
    /// The whole glued tree.
    Full,
    /// Only the root-to-mark distance, via the binary sub-recursion.
    Spine,
    /// The subtree spanned by the root and the marks of all copies at depth
    /// k, built without materializing the full tree.
    Skeleton(usize),
}

/// Result of [`iterate`]: a tree for full/skeleton mode, a scalar for spine
/// mode.
#[derive(Clone, Debug)]
pub enum IterOutcome {
    Tree(MetricTree),
    Spine(f64),
}

/// Draws one sample of the depth-n iterated law started from `init`, using
/// `seed` as the root node seed.
pub fn iterate(
    xi: &XiModel,
    init: &InitLaw,
    depth: usize,
    mode: IterMode,
    seed: u64,
) -> Result<IterOutcome> {
    match mode {
        IterMode::Spine => Ok(IterOutcome::Spine(iterate_spine(xi, init, depth, seed)?)),
        IterMode::Full => Ok(IterOutcome::Tree(iterate_full(xi, init, depth, seed)?)),
        IterMode::Skeleton(k) => {
            Ok(IterOutcome::Tree(iterate_skeleton(xi, init, depth, k, seed)?))
        }
    }
}

/// Root-to-mark distance of the depth-n sample: the sum over binary words
/// u of length n of (∏ ξ along u)^β times the initial spine drawn at u.
pub fn iterate_spine(xi: &XiModel, init: &InitLaw, depth: usize, seed: u64) -> Result<f64> {
    xi.validate()?;
    init.validate()?;
    check_spine_depth(depth)?;
    spine_rec(xi, init, depth, seed)
}

fn check_spine_depth(depth: usize) -> Result<()> {
    if depth > MAX_SPINE_DEPTH {
        return Err(Error::Param(format!(
            "spine depth {depth} exceeds the ceiling {MAX_SPINE_DEPTH}"
        )));
    }
    Ok(())
}

/// x^β, routed through `sqrt` when β = 1/2. `powf(0.5)` and `sqrt` differ
/// by at most one ulp but `sqrt` is an order of magnitude faster, and deep
/// trajectories evaluate this hundreds of millions of times.
#[inline]
fn pow_beta(x: f64, beta: f64) -> f64 {
    if beta == 0.5 {
        x.sqrt()
    } else {
        x.powf(beta)
    }
}

fn spine_rec(xi: &XiModel, init: &InitLaw, depth: usize, seed: u64) -> Result<f64> {
    let mut rng = SplitMix64::new(seed);
    if depth == 0 {
        return init.spine_sample(&mut rng);
    }
    let (x0, x1) = xi.sample_first_two(&mut rng)?;
    let a = spine_rec(xi, init, depth - 1, child_seed(seed, 0))?;
    let b = spine_rec(xi, init, depth - 1, child_seed(seed, 1))?;
    Ok(pow_beta(x0, xi.beta) * a + pow_beta(x1, xi.beta) * b)
}

/// The whole depth-n glued tree. Refuses to build past [`MAX_FULL_NODES`]
/// arena nodes.
pub fn iterate_full(xi: &XiModel, init: &InitLaw, depth: usize, seed: u64) -> Result<MetricTree> {
    xi.validate()?;
    init.validate()?;
    let mut budget = 0usize;
    full_rec(xi, init, depth, None, seed, &mut budget, MAX_FULL_NODES).map(|(t, _)| t)
}

/// As [`iterate_full`], additionally returning the node ids of the marks of
/// all copies at depth min(`track`, `depth`). Those marks, together with the
/// root, span the depth-`track` skeleton inside the full tree.
pub fn iterate_full_traced(
    xi: &XiModel,
    init: &InitLaw,
    depth: usize,
    track: usize,
    seed: u64,
) -> Result<(MetricTree, Vec<NodeId>)> {
    xi.validate()?;
    init.validate()?;
    let mut budget = 0usize;
    full_rec(xi, init, depth, Some(track), seed, &mut budget, MAX_FULL_NODES)
}

fn charge(budget: &mut usize, amount: usize, cap: usize) -> Result<()> {
    *budget += amount;
    if *budget > cap {
        return Err(Error::SizeLimit { got: *budget, cap });
    }
    Ok(())
}

fn full_rec(
    xi: &XiModel,
    init: &InitLaw,
    depth: usize,
    track: Option<usize>,
    seed: u64,
    budget: &mut usize,
    cap: usize,
) -> Result<(MetricTree, Vec<NodeId>)> {
    let mut rng = SplitMix64::new(seed);
    if depth == 0 {
        let t = init.sample(&mut rng)?;
        charge(budget, t.len(), cap)?;
        let tracked = match track {
            Some(_) => vec![t.marked().expect("validated init trees are marked")],
            None => Vec::new(),
        };
        return Ok((t, tracked));
    }
    let seq = xi.sample(&mut rng)?;
    charge(budget, 1, cap)?;
    let child_track = match track {
        Some(j) if j > 0 => Some(j - 1),
        _ => None,
    };
    let n = seq.n_atoms();
    let mut children: Vec<Option<(MetricTree, Vec<NodeId>)>> = Vec::with_capacity(n);
    for i in 0..n {
        if seq.atom(i) > 0.0 {
            let sub = full_rec(xi, init, depth - 1, child_track, child_seed(seed, i as u64), budget, cap)?;
            children.push(Some(sub));
        } else {
            children.push(None);
        }
    }
    let placeholder = MetricTree::point();
    let trees: Vec<&MetricTree> = children
        .iter()
        .map(|c| c.as_ref().map_or(&placeholder, |(t, _)| t))
        .collect();
    let out = concat_detailed(&ConcatInput { xi: &seq, trees, beta: xi.beta })?;
    let tracked = match track {
        Some(0) => vec![out
            .tree
            .marked()
            .ok_or_else(|| Error::Domain("glued tree lost its mark".into()))?],
        Some(_) => {
            let mut pts = Vec::new();
            for (i, c) in children.iter().enumerate() {
                if let Some((_, tr)) = c {
                    let map = out.node_map[i].as_ref().expect("positive atoms are retained");
                    pts.extend(tr.iter().map(|&v| map[v]));
                }
            }
            pts
        }
        None => Vec::new(),
    };
    Ok((out.tree, tracked))
}

/// The subtree spanned by the root and the marks of all copies at depth
/// min(k, depth), built by replacing every deeper branch with its spine
/// segment instead of materializing it.
pub fn iterate_skeleton(
    xi: &XiModel,
    init: &InitLaw,
    depth: usize,
    k: usize,
    seed: u64,
) -> Result<MetricTree> {
    iterate_skeleton_traced(xi, init, depth, k, seed).map(|(t, _)| t)
}

/// As [`iterate_skeleton`], additionally returning the node ids of the
/// depth-k copy marks (the far ends of the spine segments).
pub fn iterate_skeleton_traced(
    xi: &XiModel,
    init: &InitLaw,
    depth: usize,
    k: usize,
    seed: u64,
) -> Result<(MetricTree, Vec<NodeId>)> {
    xi.validate()?;
    init.validate()?;
    check_spine_depth(depth)?;
    let mut budget = 0usize;
    skeleton_rec(xi, init, depth, k, seed, &mut budget, MAX_FULL_NODES)
}

fn skeleton_rec(
    xi: &XiModel,
    init: &InitLaw,
    depth: usize,
    k_left: usize,
    seed: u64,
    budget: &mut usize,
    cap: usize,
) -> Result<(MetricTree, Vec<NodeId>)> {
    if k_left == 0 || depth == 0 {
        // The copy rooted here contributes only its root-to-mark distance;
        // spine_rec consumes this node's stream exactly as a full build
        // would start to, so the modes stay coupled.
        let len = spine_rec(xi, init, depth, seed)?;
        let t = MetricTree::segment(len)?;
        charge(budget, t.len(), cap)?;
        let m = t.marked().expect("segments are marked");
        return Ok((t, vec![m]));
    }
    let mut rng = SplitMix64::new(seed);
    let seq = xi.sample(&mut rng)?;
    charge(budget, 1, cap)?;
    let n = seq.n_atoms();
    let mut children: Vec<Option<(MetricTree, Vec<NodeId>)>> = Vec::with_capacity(n);
    for i in 0..n {
        if seq.atom(i) > 0.0 {
            let sub =
                skeleton_rec(xi, init, depth - 1, k_left - 1, child_seed(seed, i as u64), budget, cap)?;
            children.push(Some(sub));
        } else {
            children.push(None);
        }
    }
    let placeholder = MetricTree::point();
    let trees: Vec<&MetricTree> = children
        .iter()
        .map(|c| c.as_ref().map_or(&placeholder, |(t, _)| t))
        .collect();
    let out = concat_detailed(&ConcatInput { xi: &seq, trees, beta: xi.beta })?;
    let mut pts = Vec::new();
    for (i, c) in children.iter().enumerate() {
        if let Some((_, tr)) = c {
            let map = out.node_map[i].as_ref().expect("positive atoms are retained");
            pts.extend(tr.iter().map(|&v| map[v]));
        }
    }
    Ok((out.tree, pts))
}

/// Per-level sums L_n = Σ over binary words u of length n of (∏ ξ along u)^β,
/// estimated over `reps` replicates: checks the mean-1 property at two levels
/// and that the variance at the deepest level stays below the bound implied
/// by the second-moment recursion m_{n+1} = q·m_n + c with
/// q = E[ξ₀^{2β} + ξ₁^{2β}] and c = 2·E[ξ₀^β ξ₁^β], both estimated from the
/// same law.
pub fn spine_martingale(
    xi: &XiModel,
    depth: usize,
    reps: usize,
    seed: u64,
    threads: usize,
) -> Result<StatReport> {
    xi.validate()?;
    check_spine_depth(depth)?;
    if reps < 30 {
        return Err(Error::Domain(format!("martingale check needs at least 30 replicates, got {reps}")));
    }
    let rows: Vec<Result<Vec<f64>>> = run_replicates(reps, threads, seed, |_, rng| {
        let mut levels = vec![0.0; depth + 1];
        mart_rec(xi, depth, 0, 1.0, &mut levels, rng)?;
        Ok(levels)
    });
    let rows: Vec<Vec<f64>> = rows.into_iter().collect::<Result<_>>()?;
    let level = |n: usize| -> Vec<f64> { rows.iter().map(|r| r[n]).collect() };

    let mut report = StatReport::new("spine-martingale", seed);
    let mid = depth / 2;
    for n in [mid, depth] {
        let vals = level(n);
        let (mean, se) = mean_stderr(&vals);
        report.push_comparison(
            format!("mean-L{n}"),
            mean,
            se,
            reps as u64,
            1.0,
            "closed-form",
            Rule::ThreeSigma,
        );
        if n == mid && mid == depth {
            break;
        }
    }
    if depth > 0 {
        let vals = level(depth);
        let (mean, _) = mean_stderr(&vals);
        let nf = reps as f64;
        let var = vals.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (nf - 1.0);
        let m4 = vals.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / nf;
        let se_var = ((m4 - var * var).max(0.0) / nf).sqrt();
        let (q, c) = second_moment_rates(xi, child_seed(seed, reps as u64))?;
        if q >= 1.0 - 1e-9 {
            return Err(Error::Domain(format!(
                "second-moment rate q = {q} is not contracting; the variance bound is void"
            )));
        }
        let qn = q.powi(depth as i32);
        let bound = qn + c * (1.0 - qn) / (1.0 - q) - 1.0;
        report.push_comparison(
            format!("var-L{depth}"),
            var,
            se_var,
            reps as u64,
            bound,
            "recursion",
            Rule::UpperThreeSigma,
        );
    }
    Ok(report)
}

fn mart_rec<R: Rng + ?Sized>(
    xi: &XiModel,
    depth: usize,
    level: usize,
    weight: f64,
    levels: &mut [f64],
    rng: &mut R,
) -> Result<()> {
    levels[level] += weight;
    if level == depth {
        return Ok(());
    }
    let (x0, x1) = xi.sample_first_two(rng)?;
    mart_rec(xi, depth, level + 1, weight * pow_beta(x0, xi.beta), levels, rng)?;
    mart_rec(xi, depth, level + 1, weight * pow_beta(x1, xi.beta), levels, rng)
}

/// Monte Carlo estimates of q = E[ξ₀^{2β} + ξ₁^{2β}] and c = 2·E[ξ₀^β ξ₁^β].
fn second_moment_rates(xi: &XiModel, seed: u64) -> Result<(f64, f64)> {
    const QC_REPS: usize = 50_000;
    let mut rng = SplitMix64::new(seed);
    let (mut q, mut c) = (0.0, 0.0);
    for _ in 0..QC_REPS {
        let (x0, x1) = xi.sample_first_two(&mut rng)?;
        let (a, b) = (pow_beta(x0, xi.beta), pow_beta(x1, xi.beta));
        q += a * a + b * b;
        c += 2.0 * a * b;
    }
    Ok((q / QC_REPS as f64, c / QC_REPS as f64))
}

/// A string of beads: an interval [0, length] carrying finitely many mass
/// atoms at nondecreasing locations. Masses are positive and sum to 1.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GenString {
    pub length: f64,
    /// (location, mass), strictly increasing in location.
    pub atoms: Vec<(f64, f64)>,
}

impl GenString {
    pub fn new(length: f64, atoms: Vec<(f64, f64)>) -> Result<GenString> {
        if !length.is_finite() || length <= 0.0 {
            return Err(Error::Format(format!("string length {length} must be positive")));
        }
        let mut prev = f64::NEG_INFINITY;
        for &(pos, mass) in &atoms {
            if !pos.is_finite() || !(0.0..=length).contains(&pos) {
                return Err(Error::Format(format!(
                    "atom location {pos} outside [0, {length}]"
                )));
            }
            if pos <= prev {
                return Err(Error::Format(
                    "atom locations must be strictly increasing".into(),
                ));
            }
            if !mass.is_finite() || mass <= 0.0 {
                return Err(Error::Format(format!("atom mass {mass} must be positive")));
            }
            prev = pos;
        }
        // compensated summation: the atom count can be large and the unit
        // total is a hard invariant, not a statistical one
        let (mut sum, mut comp) = (0.0_f64, 0.0_f64);
        for &(_, mass) in &atoms {
            let y = mass - comp;
            let t = sum + y;
            comp = (t - sum) - y;
            sum = t;
        }
        if (sum - 1.0).abs() > SUM_TOL {
            return Err(Error::Format(format!(
                "atom masses sum to {sum}, expected 1 within {SUM_TOL}"
            )));
        }
        Ok(GenString { length, atoms })
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|&(_, m)| m).sum()
    }
}

/// Builds the dyadic string at truncation depth m.
///
/// The interval is split into the 2^m lexicographic blocks: block v has
/// length (∏ ξ along v)^β times an initial spine drawn at v, so the total
/// length equals the level-m martingale sum. Atoms:
/// - for every binary word w shorter than m, the merged junction mass
///   ξ̄_w·(1 − ξ_{w0} − ξ_{w1}) sits exactly at the boundary between the
///   w0-side and w1-side blocks;
/// - each block v additionally resolves its own split: its junction mass
///   sits inside the block at the ξ₀-side fraction (ξ_{v0})^β of its length,
///   and the two unresolved halves ξ̄_{v0}, ξ̄_{v1} sit at the block's outer
///   endpoints.
/// The halves telescope against the junction masses, so the atom masses sum
/// to 1 exactly; atoms that land on a shared boundary are merged.
///
/// Each binary word draws (ξ₀, ξ₁) from its node stream, and blocks draw
/// their initial length from the same stream right after: a depth-m and a
/// depth-(m+1) string from the same seed therefore share every ξ they both
/// use, which makes the length difference a mean-zero increment.
pub fn build_string(xi: &XiModel, init: &InitLaw, m: usize, seed: u64) -> Result<GenString> {
    xi.validate()?;
    init.validate()?;
    if m > MAX_STRING_DEPTH {
        return Err(Error::Param(format!(
            "string depth {m} exceeds the ceiling {MAX_STRING_DEPTH}"
        )));
    }
    let mut cursor = 0.0_f64;
    let mut atoms: Vec<(f64, f64)> = Vec::new();
    string_rec(xi, init, m, seed, 1.0, &mut cursor, &mut atoms)?;
    let mut merged: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
    for (pos, mass) in atoms {
        match merged.last_mut() {
            Some((p, q)) if *p == pos => *q += mass,
            _ => merged.push((pos, mass)),
        }
    }
    merged.retain(|&(_, mass)| mass > 0.0);
    GenString::new(cursor, merged)
}

fn string_rec(
    xi: &XiModel,
    init: &InitLaw,
    m_left: usize,
    seed: u64,
    weight: f64,
    cursor: &mut f64,
    atoms: &mut Vec<(f64, f64)>,
) -> Result<()> {
    let mut rng = SplitMix64::new(seed);
    let (x0, x1) = xi.sample_first_two(&mut rng)?;
    if m_left == 0 {
        let y = init.spine_sample(&mut rng)?;
        let len = pow_beta(weight, xi.beta) * y;
        let start = *cursor;
        atoms.push((start, weight * x0));
        atoms.push((start + pow_beta(x0, xi.beta) * len, weight * (1.0 - x0 - x1)));
        *cursor = start + len;
        atoms.push((*cursor, weight * x1));
        return Ok(());
    }
    string_rec(xi, init, m_left - 1, child_seed(seed, 0), weight * x0, cursor, atoms)?;
    atoms.push((*cursor, weight * (1.0 - x0 - x1)));
    string_rec(xi, init, m_left - 1, child_seed(seed, 1), weight * x1, cursor, atoms)
}

/// Recursive bead replacement: draws a string, lays it out as a path, and
/// for `levels` rounds replaces every atom of mass q by an independent
/// sub-string scaled by q^β in the metric and q in mass. Atoms remaining at
/// the last level become zero-length leaves carrying their masses. The far
/// end of the top-level path is the marked point.
pub fn grow_from_string(
    xi: &XiModel,
    init: &InitLaw,
    m: usize,
    levels: usize,
    seed: u64,
) -> Result<MetricTree> {
    grow_capped(xi, init, m, levels, seed, MAX_FULL_NODES)
}

fn grow_capped(
    xi: &XiModel,
    init: &InitLaw,
    m: usize,
    levels: usize,
    seed: u64,
    cap: usize,
) -> Result<MetricTree> {
    xi.validate()?;
    init.validate()?;
    let mut arena = GrowArena {
        xi,
        init,
        m,
        parent: vec![None],
        edge: vec![0.0],
        junction: vec![false],
        mass: Vec::new(),
        cap,
    };
    let far = grow_rec(&mut arena, 0, 1.0, 1.0, levels, seed)?;
    let mut map: BTreeMap<NodeId, f64> = arena.mass.into_iter().collect();
    // the last carrier absorbs accumulated product rounding so the unit
    // total holds exactly under the constructor's in-order summation
    if let Some(&last) = map.keys().next_back() {
        let partial: f64 = map.iter().filter(|&(&k, _)| k != last).map(|(_, &v)| v).sum();
        map.insert(last, 1.0 - partial);
    }
    MetricTree::from_parts(
        arena.parent,
        arena.edge,
        0,
        Some(far),
        Some(map),
        BTreeMap::new(),
        arena.junction,
    )
}

struct GrowArena<'a> {
    xi: &'a XiModel,
    init: &'a InitLaw,
    m: usize,
    parent: Vec<Option<NodeId>>,
    edge: Vec<f64>,
    junction: Vec<bool>,
    mass: Vec<(NodeId, f64)>,
    cap: usize,
}

impl GrowArena<'_> {
    fn add(&mut self, parent: NodeId, edge: f64, junction: bool) -> Result<NodeId> {
        if self.parent.len() >= self.cap {
            return Err(Error::SizeLimit { got: self.parent.len() + 1, cap: self.cap });
        }
        let id = self.parent.len();
        self.parent.push(Some(parent));
        self.edge.push(edge);
        self.junction.push(junction);
        Ok(id)
    }
}

fn grow_rec(
    g: &mut GrowArena,
    attach: NodeId,
    metric_scale: f64,
    mass_scale: f64,
    levels: usize,
    seed: u64,
) -> Result<NodeId> {
    let s = build_string(g.xi, g.init, g.m, child_seed(seed, 0))?;
    let beta = g.xi.beta;
    let mut prev = attach;
    let mut prev_pos = 0.0;
    for (idx, &(pos, q)) in s.atoms.iter().enumerate() {
        let node = if pos == 0.0 {
            attach
        } else {
            g.add(prev, (pos - prev_pos) * metric_scale, true)?
        };
        if levels == 0 {
            let bead = g.add(node, 0.0, true)?;
            g.mass.push((bead, q * mass_scale));
        } else {
            grow_rec(
                g,
                node,
                metric_scale * pow_beta(q, beta),
                mass_scale * q,
                levels - 1,
                child_seed(seed, idx as u64 + 1),
            )?;
        }
        prev = node;
        prev_pos = pos;
    }
    Ok(prev)
}

/// Convergence experiment: draws spine samples at `depth` and `depth + 2`
/// on independent streams and reports, depending on the law:
/// - stable(α): moments p = 1, 2 of the deeper batch rescaled by
///   α·Γ(β)/Γ(2β) / h against the fixpoint values α^p times the p-th
///   moment of the (β, β) limit law;
/// - custom laws: mean preservation E[spine] = h at both depths;
/// plus, for both, the two-sample KS statistic between the depths as a
/// stabilization check. The KS row only means convergence when the
/// fixpoint is nondegenerate; a deterministic scaling law contracts the
/// spine variance to zero and the statistic settles at the gap between
/// two nearby point masses, so callers judging such laws should read the
/// mean rows and treat the KS row as descriptive.
pub fn attraction_experiment(
    xi: &XiModel,
    init: &InitLaw,
    depth: usize,
    reps: usize,
    seed: u64,
    threads: usize,
) -> Result<StatReport> {
    xi.validate()?;
    init.validate()?;
    if depth + 2 > MAX_SPINE_DEPTH {
        return Err(Error::Param(format!(
            "depth {depth} leaves no room for the depth+2 comparison under the ceiling {MAX_SPINE_DEPTH}"
        )));
    }
    if reps < 100 {
        return Err(Error::Domain(format!(
            "the experiment needs at least 100 replicates, got {reps}"
        )));
    }
    let sample_depth = |d: usize, salt: u64| -> Result<Vec<f64>> {
        let vals: Vec<Result<f64>> =
            run_replicates(reps, threads, child_seed(seed, salt), |_, rng| {
                let root = rng.next_raw();
                spine_rec(xi, init, d, root)
            });
        vals.into_iter().collect()
    };
    let main = sample_depth(depth, 0)?;
    let next = sample_depth(depth + 2, 1)?;
    let h = init.mean_spine();

    let mut report = StatReport::new("attraction", seed);
    match xi.law {
        XiLaw::Stable { alpha } => {
            let ml1 = ml_moment(xi.beta, xi.beta, 1.0)?;
            let ml2 = ml_moment(xi.beta, xi.beta, 2.0)?;
            let scale = alpha * ml1 / h;
            let scaled: Vec<f64> = next.iter().map(|&s| s * scale).collect();
            let t1 = moment_test(&scaled, 1.0, alpha * ml1, Rule::Rel(0.05))?;
            report.push_comparison(
                "moment-p1",
                t1.value,
                t1.stderr,
                t1.n,
                alpha * ml1,
                "closed-form",
                Rule::Rel(0.05),
            );
            let t2 = moment_test(&scaled, 2.0, alpha * alpha * ml2, Rule::Rel(0.10))?;
            report.push_comparison(
                "moment-p2",
                t2.value,
                t2.stderr,
                t2.n,
                alpha * alpha * ml2,
                "closed-form",
                Rule::Rel(0.10),
            );
        }
        _ => {
            let t1 = moment_test(&main, 1.0, h, Rule::ThreeSigma)?;
            report.push_comparison(
                format!("mean-depth{depth}"),
                t1.value,
                t1.stderr,
                t1.n,
                h,
                "closed-form",
                Rule::ThreeSigma,
            );
            let t2 = moment_test(&next, 1.0, h, Rule::ThreeSigma)?;
            report.push_comparison(
                format!("mean-depth{}", depth + 2),
                t2.value,
                t2.stderr,
                t2.n,
                h,
                "closed-form",
                Rule::ThreeSigma,
            );
        }
    }
    let ks = ks_test(&main, &next)?;
    report.push_threshold(
        format!("ks-depth{}-vs-{}", depth, depth + 2),
        ks.statistic,
        ks.critical,
        reps as u64,
        "reference-sim",
        ks.pass,
    );
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::mean_stderr;

    fn three_atom_law() -> XiModel {
        // f(b) = 0.45^b + 0.35^b + 0.2^b has its root near b = 0.690
        let law = XiLaw::Atoms { rows: vec![vec![0.45, 0.35, 0.2]], probs: vec![1.0] };
        let beta = calibrate_beta(&law, 1e-9, 100, 7).unwrap();
        XiModel::custom(law, beta).unwrap()
    }

    #[test]
    fn law_validation_rejects_bad_shapes() {
        assert!(XiLaw::Stable { alpha: 1.0 }.validate().is_err());
        assert!(XiLaw::Stable { alpha: 2.2 }.validate().is_err());
        // second coordinate must be positive
        assert!(XiLaw::Atoms { rows: vec![vec![0.7, 0.0, 0.3]], probs: vec![1.0] }
            .validate()
            .is_err());
        // probabilities must sum to one
        assert!(XiLaw::Atoms { rows: vec![vec![0.5, 0.3, 0.2]], probs: vec![0.5] }
            .validate()
            .is_err());
        // stick part must be nonincreasing
        assert!(XiLaw::Atoms { rows: vec![vec![0.4, 0.3, 0.1, 0.05, 0.15]], probs: vec![1.0] }
            .validate()
            .is_err());
        assert!(XiLaw::Dirichlet { params: vec![0.5] }.validate().is_err());
        assert!(XiLaw::Dirichlet { params: vec![0.5, -1.0] }.validate().is_err());
        assert!(XiModel::custom(XiLaw::Dirichlet { params: vec![1.0, 1.0] }, 1.0).is_err());
    }

    #[test]
    fn first_two_agrees_with_full_sample_on_one_stream() {
        let laws = [
            XiLaw::Stable { alpha: 2.0 },
            XiLaw::Stable { alpha: 1.5 },
            XiLaw::Dirichlet { params: vec![0.4, 0.4, 0.4, 0.3, 0.3] },
            XiLaw::Atoms {
                rows: vec![vec![0.5, 0.3, 0.2], vec![0.4, 0.4, 0.2]],
                probs: vec![0.6, 0.4],
            },
        ];
        for law in laws {
            for seed in 0..20 {
                let full = law.sample(1e-4, &mut SplitMix64::new(seed)).unwrap();
                let (x0, x1) = law.sample_first_two(&mut SplitMix64::new(seed)).unwrap();
                assert_eq!(full.atom(0), x0);
                assert_eq!(full.atom(1), x1);
            }
        }
    }

    #[test]
    fn calibrate_beta_stable_is_exact_and_custom_matches_closed_form() {
        assert_eq!(calibrate_beta(&XiLaw::Stable { alpha: 2.0 }, 1e-6, 100, 1).unwrap(), 0.5);
        let b = calibrate_beta(&XiLaw::Stable { alpha: 1.5 }, 1e-6, 100, 1).unwrap();
        assert!((b - 1.0 / 3.0).abs() < 1e-15);
        // four equal Dirichlet parameters 1/3 balance at exponent 1/3:
        // each coordinate is Beta(1/3, 1) with E[X^s] = (1/3)/(1/3 + s)
        let law = XiLaw::Dirichlet { params: vec![1.0 / 3.0; 4] };
        let b = calibrate_beta(&law, 1e-5, 100_000, 42).unwrap();
        assert!((b - 1.0 / 3.0).abs() < 0.01, "calibrated {b}");
    }

    #[test]
    fn calibrate_beta_reports_missing_root() {
        let law = XiLaw::Atoms { rows: vec![vec![0.6, 0.4]], probs: vec![1.0] };
        let err = calibrate_beta(&law, 1e-6, 200, 3).unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
    }

    #[test]
    fn init_law_draws_are_coupled_and_validated() {
        assert!(InitLaw::Segment(LengthLaw::Constant(0.0)).validate().is_err());
        assert!(InitLaw::Segment(LengthLaw::Empirical(vec![])).validate().is_err());
        assert!(InitLaw::Trees(vec![MetricTree::point()]).validate().is_err());

        let init = InitLaw::Segment(LengthLaw::Exponential { mean: 2.0 });
        init.validate().unwrap();
        for seed in 0..10 {
            let t = init.sample(&mut SplitMix64::new(seed)).unwrap();
            let s = init.spine_sample(&mut SplitMix64::new(seed)).unwrap();
            let m = t.marked().unwrap();
            assert_eq!(t.root_dist(m).unwrap(), s);
        }
        assert_eq!(init.mean_spine(), 2.0);
        let emp = InitLaw::Segment(LengthLaw::Empirical(vec![1.0, 2.0, 6.0]));
        assert_eq!(emp.mean_spine(), 3.0);
    }

    #[test]
    fn depth_zero_returns_an_init_draw() {
        let xi = XiModel::stable(2.0).unwrap();
        let init = InitLaw::Segment(LengthLaw::Constant(1.0));
        let spine = iterate_spine(&xi, &init, 0, 9).unwrap();
        assert_eq!(spine, 1.0);
        match iterate(&xi, &init, 0, IterMode::Full, 9).unwrap() {
            IterOutcome::Tree(t) => {
                assert_eq!(t.len(), 2);
                assert_eq!(t.root_dist(t.marked().unwrap()).unwrap(), 1.0);
            }
            IterOutcome::Spine(_) => panic!("full mode returns a tree"),
        }
    }

    #[test]
    fn depth_one_spine_has_unit_mean() {
        let xi = XiModel::stable(2.0).unwrap();
        let init = InitLaw::Segment(LengthLaw::Constant(1.0));
        let vals: Vec<f64> = (0..4000)
            .map(|r| spine_rec(&xi, &init, 1, child_seed(11, r)).unwrap())
            .collect();
        let (mean, se) = mean_stderr(&vals);
        assert!((mean - 1.0).abs() <= 3.0 * se, "mean {mean} se {se}");
    }

    #[test]
    fn spine_matches_direct_word_summation() {
        // independent oracle: enumerate the binary words and rebuild each
        // term from the node streams directly
        fn oracle(xi: &XiModel, init: &InitLaw, depth: usize, seed: u64) -> f64 {
            fn walk(xi: &XiModel, init: &InitLaw, depth: usize, seed: u64, prod: f64) -> f64 {
                let mut rng = SplitMix64::new(seed);
                if depth == 0 {
                    return prod * init.spine_sample(&mut rng).unwrap();
                }
                let (x0, x1) = xi.sample_first_two(&mut rng).unwrap();
                walk(xi, init, depth - 1, child_seed(seed, 0), prod * x0.powf(xi.beta))
                    + walk(xi, init, depth - 1, child_seed(seed, 1), prod * x1.powf(xi.beta))
            }
            walk(xi, init, depth, seed, 1.0)
        }
        let xi = three_atom_law();
        let init = InitLaw::Segment(LengthLaw::Exponential { mean: 1.0 });
        for seed in 0..10 {
            let got = iterate_spine(&xi, &init, 6, seed).unwrap();
            let want = oracle(&xi, &init, 6, seed);
            assert!((got - want).abs() <= 1e-12 * want.abs(), "{got} vs {want}");
        }
    }

    #[test]
    fn full_mode_spine_agrees_with_spine_mode_on_coupled_seeds() {
        let xi = three_atom_law();
        let init = InitLaw::Segment(LengthLaw::Exponential { mean: 1.0 });
        for seed in 0..15 {
            let t = iterate_full(&xi, &init, 6, seed).unwrap();
            let full_spine = t.root_dist(t.marked().unwrap()).unwrap();
            let spine = iterate_spine(&xi, &init, 6, seed).unwrap();
            assert!(
                (full_spine - spine).abs() <= 1e-9,
                "full {full_spine} vs spine {spine} at seed {seed}"
            );
        }
    }

    #[test]
    fn stable_two_full_mode_keeps_unit_mass() {
        let xi = XiModel::stable(2.0).unwrap();
        let init = InitLaw::Segment(LengthLaw::Constant(1.0));
        let t = iterate_full(&xi, &init, 5, 23).unwrap();
        let total: f64 = t.leaf_mass().expect("segments carry mass").values().sum();
        assert!((total - 1.0).abs() < 1e-9, "total {total}");
    }

    #[test]
    fn skeleton_is_the_reduced_full_tree_on_coupled_seeds() {
        let xi = three_atom_law();
        let init = InitLaw::Segment(LengthLaw::Exponential { mean: 1.0 });
        for depth in 1..=3 {
            for k in 0..=2 {
                for seed in [3, 17] {
                    let (full, marks) =
                        iterate_full_traced(&xi, &init, depth, k, seed).unwrap();
                    let want = full.reduce(&marks).unwrap();
                    let (skel, skel_marks) =
                        iterate_skeleton_traced(&xi, &init, depth, k, seed).unwrap();
                    let got = skel.reduce(&skel_marks).unwrap();
                    assert!(
                        got.isometric_to(&want, 1e-9),
                        "skeleton mismatch at depth {depth}, k {k}, seed {seed}"
                    );
                }
            }
        }
    }

    #[test]
    fn full_mode_budget_guard_fires() {
        let xi = three_atom_law();
        let init = InitLaw::Segment(LengthLaw::Constant(1.0));
        let mut budget = 0usize;
        let err = full_rec(&xi, &init, 8, None, 5, &mut budget, 64).unwrap_err();
        assert!(matches!(err, Error::SizeLimit { cap: 64, .. }));
        assert!(iterate_spine(&xi, &init, MAX_SPINE_DEPTH + 1, 5).is_err());
    }

    #[test]
    fn martingale_levels_start_at_exactly_one() {
        let xi = three_atom_law();
        let mut levels = vec![0.0; 4];
        mart_rec(&xi, 3, 0, 1.0, &mut levels, &mut SplitMix64::new(2)).unwrap();
        assert_eq!(levels[0], 1.0);
    }

    #[test]
    fn martingale_report_passes_for_stable_two() {
        let xi = XiModel::stable(2.0).unwrap();
        let report = spine_martingale(&xi, 8, 2000, 42, 1).unwrap();
        assert!(report.all_pass(), "{}", report.to_csv());
        assert!(spine_martingale(&xi, MAX_SPINE_DEPTH + 1, 100, 1, 1).is_err());
    }

    #[test]
    fn second_moment_rates_match_closed_form_for_stable_two() {
        // Dirichlet(1/2,1/2,1/2): q = 2·E[ξ₀] = 2/3 and
        // c = 2·E[√(ξ₀ξ₁)] = (2/3)·(2/π)·... = 4/(3π)·... checked numerically
        let xi = XiModel::stable(2.0).unwrap();
        let (q, c) = second_moment_rates(&xi, 77).unwrap();
        assert!((q - 2.0 / 3.0).abs() < 0.01, "q {q}");
        assert!((c - 0.4244).abs() < 0.01, "c {c}");
    }

    #[test]
    fn string_depth_zero_matches_the_hand_construction() {
        let xi = three_atom_law();
        let init = InitLaw::Segment(LengthLaw::Constant(2.0));
        let seed = 31;
        let s = build_string(&xi, &init, 0, seed).unwrap();
        // replay the single node stream by hand
        let mut rng = SplitMix64::new(seed);
        let (x0, x1) = xi.sample_first_two(&mut rng).unwrap();
        let y = init.spine_sample(&mut rng).unwrap();
        assert_eq!(s.length, y);
        assert_eq!(s.atoms.len(), 3);
        assert_eq!(s.atoms[0], (0.0, x0));
        assert_eq!(s.atoms[1].0, x0.powf(xi.beta) * y);
        assert!((s.atoms[1].1 - (1.0 - x0 - x1)).abs() < 1e-15);
        assert_eq!(s.atoms[2], (y, x1));
    }

    #[test]
    fn string_atoms_merge_at_block_boundaries_and_sum_to_one() {
        let xi = XiModel::stable(1.5).unwrap();
        let init = InitLaw::Segment(LengthLaw::Exponential { mean: 1.0 });
        for seed in 0..10 {
            let s = build_string(&xi, &init, 2, seed).unwrap();
            // 4 blocks with 3 atoms each plus 3 junctions, minus 3 triple
            // merges at the interior boundaries
            assert_eq!(s.atoms.len(), 9, "seed {seed}");
            assert!((s.total_mass() - 1.0).abs() <= 1e-12);
            for w in s.atoms.windows(2) {
                assert!(w[1].0 > w[0].0);
            }
        }
    }

    #[test]
    fn string_length_increment_is_mean_zero_on_coupled_seeds() {
        let xi = three_atom_law();
        let init = InitLaw::Segment(LengthLaw::Exponential { mean: 1.0 });
        let diffs: Vec<f64> = (0..600)
            .map(|r| {
                let seed = child_seed(1009, r);
                let a = build_string(&xi, &init, 2, seed).unwrap().length;
                let b = build_string(&xi, &init, 3, seed).unwrap().length;
                b - a
            })
            .collect();
        let (mean, se) = mean_stderr(&diffs);
        assert!(mean.abs() <= 3.0 * se, "mean {mean} se {se}");
    }

    #[test]
    fn grown_string_at_level_zero_is_a_path_with_bead_leaves() {
        let xi = three_atom_law();
        let init = InitLaw::Segment(LengthLaw::Constant(1.0));
        let t = grow_from_string(&xi, &init, 1, 0, 5).unwrap();
        let mass = t.leaf_mass().expect("beads carry mass");
        let total: f64 = mass.values().sum();
        assert_eq!(total, 1.0);
        for (&v, _) in mass {
            assert!(t.is_leaf(v));
            assert_eq!(t.edge_len(v), 0.0);
        }
        assert!(t.marked().is_some());
    }

    #[test]
    fn grown_string_height_is_nondecreasing_in_levels() {
        let xi = XiModel::stable(2.0).unwrap();
        let init = InitLaw::Segment(LengthLaw::Constant(1.0));
        for seed in 0..6 {
            let mut prev = 0.0;
            for levels in 0..=3 {
                let t = grow_from_string(&xi, &init, 1, levels, seed).unwrap();
                let ht = t.stats().height;
                assert!(
                    ht >= prev - 1e-12,
                    "height dropped from {prev} to {ht} at levels {levels}"
                );
                prev = ht;
            }
        }
    }

    #[test]
    fn grow_budget_guard_fires() {
        let xi = XiModel::stable(2.0).unwrap();
        let init = InitLaw::Segment(LengthLaw::Constant(1.0));
        let err = grow_capped(&xi, &init, 2, 6, 3, 200).unwrap_err();
        assert!(matches!(err, Error::SizeLimit { cap: 200, .. }));
    }

    #[test]
    fn genstring_validation_rejects_bad_atom_lists() {
        assert!(GenString::new(0.0, vec![]).is_err());
        assert!(GenString::new(1.0, vec![(0.5, 1.0), (0.4, 0.0)]).is_err());
        assert!(GenString::new(1.0, vec![(1.5, 1.0)]).is_err());
        assert!(GenString::new(1.0, vec![(0.5, 0.4)]).is_err());
        assert!(GenString::new(1.0, vec![(0.2, 0.5), (0.8, 0.5)]).is_ok());
    }

    // The deterministic three-atom law has a degenerate fixpoint (spine
    // variance contracts to zero), so its KS row measures the residual gap
    // between two near-point-masses rather than convergence. These tests
    // gate only on the mean rows.
    fn mean_rows_pass(report: &StatReport) -> bool {
        let rows: Vec<_> =
            report.verdicts.iter().filter(|v| v.estimate.starts_with("mean-")).collect();
        !rows.is_empty() && rows.iter().all(|v| v.pass)
    }

    // A constant init would make every depth-k sample a single point mass
    // whose stderr is float noise, so the three-sigma band collapses below
    // the beta-calibration residual; the exponential init keeps genuine
    // sampling spread in both batches.
    #[test]
    fn attraction_depth_zero_reports_raw_init_moments() {
        let xi = three_atom_law();
        let init = InitLaw::Segment(LengthLaw::Exponential { mean: 2.0 });
        let report = attraction_experiment(&xi, &init, 0, 400, 4, 1).unwrap();
        assert!(mean_rows_pass(&report), "{}", report.to_csv());
    }

    #[test]
    fn attraction_mean_is_preserved_for_calibrated_custom_law() {
        let xi = three_atom_law();
        let init = InitLaw::Segment(LengthLaw::Exponential { mean: 2.0 });
        let report = attraction_experiment(&xi, &init, 5, 1500, 42, 1).unwrap();
        assert!(mean_rows_pass(&report), "{}", report.to_csv());
    }

    #[test]
    fn attraction_stable_two_moments_match_the_limit() {
        let xi = XiModel::stable(2.0).unwrap();
        let init = InitLaw::Segment(LengthLaw::Constant(1.0));
        let report = attraction_experiment(&xi, &init, 8, 1500, 42, 1).unwrap();
        assert!(report.all_pass(), "{}", report.to_csv());
    }
}
