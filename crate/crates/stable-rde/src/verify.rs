//! The crate-level acceptance suite: twelve checks, one per load-bearing
//! claim, each comparing a component against the exact law or identity that
//! governs it.
//!
//! Checks come in two kinds. Exact checks (shape enumeration totals, the
//! correspondence-search oracle, the concatenation algebra) must hold at
//! float precision and carry deterministic pass thresholds. Statistical
//! checks are Monte Carlo estimates judged under three-sigma bands,
//! relative tolerances, or 1% critical values; their sample sizes are fixed
//! here, not caller-tunable, so a pass means the same thing on every
//! machine.
//!
//! The runner derives every replicate stream from the one master seed, so a
//! suite run is reproducible byte for byte (runtimes aside) at any thread
//! count. The suite holds 24 comparisons; the chance that one full pass on
//! a sound build raises at least one false alarm is about six percent,
//! dominated by the four 1% critical-value rows. [`run_check_with_retry`]
//! reruns a failed check once on a seed derived with [`RETRY_SALT`], which
//! drops the false-failure chance of the whole suite below one in a
//! thousand.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::Rng;

use crate::concat::{concat_detailed, ConcatInput, ConcatOutcome, ScalingSeq};
use crate::error::{Error, Result};
use crate::ghdist::gh_dist;
use crate::laws::{dirichlet_sample, ml_moment, CrpState, UrnState};
use crate::marchal::{enumerate_shapes, grow, spine_scaling_stat};
use crate::rde::{
    attraction_experiment, calibrate_beta, iterate, spine_martingale, InitLaw, IterMode,
    IterOutcome, LengthLaw, XiLaw, XiModel,
};
use crate::rng::{child_seed, run_replicates, SplitMix64};
use crate::stats::{ks_test, mean_stderr, multinomial_gof, Rule, StatReport};
use crate::tree::{MassMode, MetricTree, NodeId, TreeBuilder};

/// Salt for the single deterministic retry seed.
pub const RETRY_SALT: u64 = 101;

/// Which checks a `verify` run executes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    /// The checks that finish in seconds: exact identities plus the cheap
    /// growth statistics.
    Quick,
    /// All twelve checks.
    Full,
}

impl std::str::FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Suite> {
        match s {
            "quick" => Ok(Suite::Quick),
            "full" => Ok(Suite::Full),
            other => Err(Error::Param(format!(
                "unknown suite {other:?}; expected quick or full"
            ))),
        }
    }
}

/// One suite entry: a stable id, the report name, and quick-suite membership.
#[derive(Clone, Copy, Debug)]
pub struct CheckInfo {
    pub id: usize,
    pub name: &'static str,
    pub quick: bool,
}

/// The twelve checks in id order.
pub const CHECKS: [CheckInfo; 12] = [
    CheckInfo { id: 1, name: "shape-law", quick: true },
    CheckInfo { id: 2, name: "growth-gof", quick: true },
    CheckInfo { id: 3, name: "weight-invariant", quick: true },
    CheckInfo { id: 4, name: "urn-limit", quick: false },
    CheckInfo { id: 5, name: "crp-tables", quick: false },
    CheckInfo { id: 6, name: "growth-spine", quick: false },
    CheckInfo { id: 7, name: "martingale", quick: true },
    CheckInfo { id: 8, name: "calibration", quick: true },
    CheckInfo { id: 9, name: "one-step-fixpoint", quick: false },
    CheckInfo { id: 10, name: "attraction", quick: false },
    CheckInfo { id: 11, name: "gh-oracle", quick: true },
    CheckInfo { id: 12, name: "concat-algebra", quick: true },
];

/// Runs one check by id (1 through 12) and stamps its runtime.
pub fn run_check(id: usize, seed: u64, threads: usize) -> Result<StatReport> {
    let start = Instant::now();
    let mut report = match id {
        1 => shape_law(seed),
        2 => growth_gof(seed, threads),
        3 => weight_invariant(seed, threads),
        4 => urn_limit(seed, threads),
        5 => crp_tables(seed, threads),
        6 => growth_spine(seed, threads),
        7 => martingale(seed, threads),
        8 => calibration(seed),
        9 => one_step_fixpoint(seed, threads),
        10 => attraction(seed, threads),
        11 => gh_oracle(seed),
        12 => concat_algebra(seed),
        _ => Err(Error::Param(format!("check id {id} outside 1..=12"))),
    }?;
    report.runtime_secs = start.elapsed().as_secs_f64();
    Ok(report)
}

/// Runs one check and, if any row fails, reruns it once on the seed derived
/// with [`RETRY_SALT`]. Returns the decisive report and whether the retry
/// was taken.
pub fn run_check_with_retry(id: usize, seed: u64, threads: usize) -> Result<(StatReport, bool)> {
    let first = run_check(id, seed, threads)?;
    if first.all_pass() {
        return Ok((first, false));
    }
    let second = run_check(id, child_seed(seed, RETRY_SALT), threads)?;
    Ok((second, true))
}

/// Runs a suite and returns the reports sorted by name, so assembly order
/// never depends on execution order.
pub fn run_suite(
    suite: Suite,
    seed: u64,
    threads: usize,
    retry_once: bool,
) -> Result<Vec<StatReport>> {
    let mut out = Vec::new();
    for check in &CHECKS {
        if suite == Suite::Quick && !check.quick {
            continue;
        }
        let report = if retry_once {
            run_check_with_retry(check.id, seed, threads)?.0
        } else {
            run_check(check.id, seed, threads)?
        };
        out.push(report);
    }
    out.sort_by(|a, b| a.name.cmp(&b.name));
    Ok(out)
}

/// Copies one labelled row of `src` into `dst` under a new label.
fn copy_row(dst: &mut StatReport, src: &StatReport, label: &str, new_label: &str) -> Result<()> {
    let i = src
        .estimates
        .iter()
        .position(|e| e.label == label)
        .ok_or_else(|| Error::Domain(format!("row {label} missing from report {}", src.name)))?;
    let mut est = src.estimates[i].clone();
    let mut tgt = src.targets[i].clone();
    let mut verdict = src.verdicts[i].clone();
    est.label = new_label.to_string();
    tgt.label = new_label.to_string();
    verdict.estimate = new_label.to_string();
    verdict.target = new_label.to_string();
    dst.estimates.push(est);
    dst.targets.push(tgt);
    dst.verdicts.push(verdict);
    Ok(())
}

/// Check 1: per-shape probabilities from the exhaustive enumeration sum to
/// 1 within 1e-9 for three and four leaves across the index grid.
fn shape_law(seed: u64) -> Result<StatReport> {
    let mut report = StatReport::new("shape-law", seed);
    let mut worst = 0.0f64;
    let mut shapes_seen = 0u64;
    for n in [3usize, 4] {
        for alpha in [1.2, 1.5, 2.0] {
            let shapes = enumerate_shapes(alpha, n)?;
            let mut total = 0.0;
            for (t, _) in &shapes {
                total += t.shape_prob()?;
            }
            worst = worst.max((total - 1.0).abs());
            shapes_seen += shapes.len() as u64;
        }
    }
    report.push_threshold("max-total-gap", worst, 1e-9, shapes_seen, "enumeration", worst <= 1e-9);
    Ok(report)
}

/// Check 2: shape counts from 10^4 three-leaf growths at index 1.5 pass a
/// 1% chi-square against the enumerated law, and the star shape comes up at
/// its enumerated rate (1/4) within three sigma.
fn growth_gof(seed: u64, threads: usize) -> Result<StatReport> {
    const REPS: usize = 10_000;
    let mut report = StatReport::new("growth-gof", seed);
    let shapes = enumerate_shapes(1.5, 3)?;
    let mut probs: BTreeMap<String, f64> = BTreeMap::new();
    let mut star_key = None;
    for (t, p) in &shapes {
        *probs.entry(t.shape_key()).or_insert(0.0) += p;
        if t.n_branches() == 1 {
            star_key = Some(t.shape_key());
        }
    }
    let star_key =
        star_key.ok_or_else(|| Error::Domain("no star shape among three-leaf trees".into()))?;
    let keys: Vec<Result<String>> =
        run_replicates(REPS, threads, seed, |_, rng| Ok(grow(1.5, 3, rng)?.shape_key()));
    let mut counts: BTreeMap<String, u64> = probs.keys().map(|k| (k.clone(), 0)).collect();
    for key in keys {
        let key = key?;
        match counts.get_mut(&key) {
            Some(c) => *c += 1,
            None => {
                return Err(Error::Domain(format!(
                    "grown shape {key} is missing from the enumeration"
                )))
            }
        }
    }
    let cells: Vec<u64> = counts.values().copied().collect();
    let cell_probs: Vec<f64> = probs.values().copied().collect();
    let gof = multinomial_gof(&cells, &cell_probs)?;
    report.push_threshold(
        "shape-chi2",
        gof.statistic,
        gof.critical,
        REPS as u64,
        "enumeration",
        gof.pass,
    );
    let phat = counts[&star_key] as f64 / REPS as f64;
    let se = (phat * (1.0 - phat) / REPS as f64).sqrt();
    report.push_comparison(
        "star-frequency",
        phat,
        se,
        REPS as u64,
        probs[&star_key],
        "enumeration",
        Rule::ThreeSigma,
    );
    Ok(report)
}

/// Check 3: the total growth weight equals n·alpha − 1 after every step.
/// The grower re-checks the identity before each draw and aborts past 1e-9
/// relative drift, so the row reports the worst final-tree drift over 10^3
/// growths to 10^3 leaves per index.
fn weight_invariant(seed: u64, threads: usize) -> Result<StatReport> {
    const GROWTHS: usize = 1000;
    const LEAVES: usize = 1000;
    let mut report = StatReport::new("weight-invariant", seed);
    let mut worst = 0.0f64;
    for (i, alpha) in [1.2, 1.5, 2.0].into_iter().enumerate() {
        let target = LEAVES as f64 * alpha - 1.0;
        let ws: Vec<Result<f64>> =
            run_replicates(GROWTHS, threads, child_seed(seed, i as u64), move |_, rng| {
                Ok(grow(alpha, LEAVES, rng)?.weight())
            });
        for w in ws {
            worst = worst.max((w? - target).abs() / target);
        }
    }
    let n = (3 * GROWTHS) as u64;
    report.push_threshold("max-weight-drift", worst, 1e-9, n, "closed-form", worst <= 1e-9);
    Ok(report)
}

/// Check 4: the four-color reinforced urn with weights
/// (alpha−1, alpha−1, alpha−1, 2−alpha) and step alpha at index 1.5 has
/// draw frequencies converging to a symmetric Dirichlet: all four component
/// means within three sigma of 1/4 after 10^4 draws, and the first
/// component passes a 1% two-sample KS against direct Dirichlet samples.
fn urn_limit(seed: u64, threads: usize) -> Result<StatReport> {
    const REPS: usize = 1000;
    const DRAWS: usize = 10_000;
    let alpha = 1.5;
    let mut report = StatReport::new("urn-limit", seed);
    let gamma = vec![alpha - 1.0, alpha - 1.0, alpha - 1.0, 2.0 - alpha];
    let proto = UrnState::new(gamma.clone(), alpha)?;
    let freqs: Vec<Result<Vec<f64>>> =
        run_replicates(REPS, threads, child_seed(seed, 0), |_, rng| {
            let mut urn = UrnState::new(gamma.clone(), alpha)?;
            for _ in 0..DRAWS {
                urn.step_draw(rng);
            }
            Ok(urn.frequencies())
        });
    let freqs: Vec<Vec<f64>> = freqs.into_iter().collect::<Result<_>>()?;
    let mut max_z = 0.0f64;
    for j in 0..4 {
        let col: Vec<f64> = freqs.iter().map(|f| f[j]).collect();
        let (mean, se) = mean_stderr(&col);
        max_z = max_z.max((mean - 0.25).abs() / se);
    }
    report.push_threshold("max-mean-z", max_z, 3.0, REPS as u64, "closed-form", max_z <= 3.0);
    let col0: Vec<f64> = freqs.iter().map(|f| f[0]).collect();
    let direct: Vec<Result<f64>> =
        run_replicates(REPS, threads, child_seed(seed, 1), |_, rng| {
            Ok(proto.limit_sample(rng)?[0])
        });
    let direct: Vec<f64> = direct.into_iter().collect::<Result<_>>()?;
    let ks = ks_test(&col0, &direct)?;
    report.push_threshold(
        "ks-vs-dirichlet",
        ks.statistic,
        ks.critical,
        REPS as u64,
        "reference-sim",
        ks.pass,
    );
    Ok(report)
}

/// Check 5: the seating process at (1/2, 1/2) opens K_n tables with
/// K_n/sqrt(n) converging in mean to sqrt(pi), checked at 5% relative over
/// 400 runs of 10^5 seatings.
fn crp_tables(seed: u64, threads: usize) -> Result<StatReport> {
    const REPS: usize = 400;
    const N: u64 = 100_000;
    let mut report = StatReport::new("crp-tables", seed);
    let samples: Vec<Result<f64>> = run_replicates(REPS, threads, seed, |_, rng| {
        let mut crp = CrpState::new(0.5, 0.5)?;
        while crp.n() < N {
            crp.step_seat(rng);
        }
        Ok(crp.n_tables() as f64 / (N as f64).sqrt())
    });
    let samples: Vec<f64> = samples.into_iter().collect::<Result<_>>()?;
    let (mean, se) = mean_stderr(&samples);
    let target = ml_moment(0.5, 0.5, 1.0)?;
    report.push_comparison(
        "tables-scaled-mean",
        mean,
        se,
        REPS as u64,
        target,
        "closed-form",
        Rule::Rel(0.05),
    );
    Ok(report)
}

/// Check 6: the rescaled distance from the root to the first leaf in a
/// 10^4-leaf grown tree has the limit mean (the first moment of the scaled
/// root-to-leaf law) within 5%, at both index 1.5 and index 2.
fn growth_spine(seed: u64, threads: usize) -> Result<StatReport> {
    const REPS: usize = 1000;
    const LEAVES: usize = 10_000;
    let mut report = StatReport::new("growth-spine", seed);
    for (i, alpha) in [1.5, 2.0].into_iter().enumerate() {
        let sub = spine_scaling_stat(alpha, LEAVES, REPS, child_seed(seed, i as u64), threads)?;
        copy_row(&mut report, &sub, "moment-p1", &format!("spine-mean-alpha-{alpha}"))?;
    }
    Ok(report)
}

/// Check 7: the additive level sums are a mean-one martingale with bounded
/// variance: mean at level 10 within three sigma of 1 over 10^4 runs, and
/// the level-10 and level-20 variances below the second-moment recursion
/// values, so the trajectory cannot blow up.
fn martingale(seed: u64, threads: usize) -> Result<StatReport> {
    let xi = XiModel::stable(2.0)?;
    let mut report = StatReport::new("martingale", seed);
    let shallow = spine_martingale(&xi, 10, 10_000, child_seed(seed, 0), threads)?;
    copy_row(&mut report, &shallow, "mean-L10", "mean-L10")?;
    copy_row(&mut report, &shallow, "var-L10", "var-L10")?;
    let deep = spine_martingale(&xi, 20, 150, child_seed(seed, 1), threads)?;
    copy_row(&mut report, &deep, "var-L20", "var-L20")?;
    Ok(report)
}

/// Check 8: calibrating the exponent of a symmetric Dirichlet scaling law
/// with parameter 1/3 recovers 1/3 within 0.01 (each head coordinate is
/// Beta(1/3, 1), whose 1/3-moment is exactly 1/2).
fn calibration(seed: u64) -> Result<StatReport> {
    const REPS: usize = 20_000;
    let mut report = StatReport::new("calibration", seed);
    let law = XiLaw::Dirichlet { params: vec![1.0 / 3.0; 4] };
    let beta = calibrate_beta(&law, 1e-6, REPS, seed)?;
    let gap = (beta - 1.0 / 3.0).abs();
    report.push_threshold("beta-gap", gap, 0.01, REPS as u64, "closed-form", gap <= 0.01);
    Ok(report)
}

/// Check 9: one iteration step leaves its own deep samples fixed in
/// distribution. Depth-11 spine samples at index 1.5 are fed back as the
/// initial law; one further step must keep the mean (conditionally exact,
/// three sigma) and pass a 1% two-sample KS against the input pool.
fn one_step_fixpoint(seed: u64, threads: usize) -> Result<StatReport> {
    const REPS: usize = 2000;
    const POOL_DEPTH: usize = 11;
    let xi = XiModel::stable(1.5)?;
    let base = InitLaw::Segment(LengthLaw::Constant(1.0));
    let mut report = StatReport::new("one-step-fixpoint", seed);
    let pool = spine_batch(&xi, &base, POOL_DEPTH, REPS, child_seed(seed, 0), threads)?;
    let empirical = InitLaw::Segment(LengthLaw::Empirical(pool.clone()));
    let out = spine_batch(&xi, &empirical, 1, REPS, child_seed(seed, 1), threads)?;
    let (mean_out, se_out) = mean_stderr(&out);
    let (mean_in, _) = mean_stderr(&pool);
    report.push_comparison(
        "one-step-mean",
        mean_out,
        se_out,
        REPS as u64,
        mean_in,
        "reference-sim",
        Rule::ThreeSigma,
    );
    let ks = ks_test(&out, &pool)?;
    report.push_threshold(
        "ks-vs-input",
        ks.statistic,
        ks.critical,
        REPS as u64,
        "reference-sim",
        ks.pass,
    );
    Ok(report)
}

/// Spine-mode samples of the iterated law, one per replicate stream.
fn spine_batch(
    xi: &XiModel,
    init: &InitLaw,
    depth: usize,
    reps: usize,
    seed: u64,
    threads: usize,
) -> Result<Vec<f64>> {
    let vals: Vec<Result<f64>> = run_replicates(reps, threads, seed, |_, rng| {
        let root = rng.next_raw();
        match iterate(xi, init, depth, IterMode::Spine, root)? {
            IterOutcome::Spine(x) => Ok(x),
            IterOutcome::Tree(_) => Err(Error::Domain("spine mode returned a tree".into())),
        }
    });
    vals.into_iter().collect()
}

/// Check 10: iterating from a unit segment at index 2 lands on the fixpoint
/// law: the rescaled depth-12 spine has mean within 5% and second moment
/// within 10% of the limit values, and depth-10 versus depth-12 samples
/// pass a 1% KS, so the law has stabilized.
fn attraction(seed: u64, threads: usize) -> Result<StatReport> {
    const REPS: usize = 10_000;
    let xi = XiModel::stable(2.0)?;
    let init = InitLaw::Segment(LengthLaw::Constant(1.0));
    let sub = attraction_experiment(&xi, &init, 10, REPS, seed, threads)?;
    let mut report = StatReport::new("attraction", seed);
    report.merge(sub);
    Ok(report)
}

/// Check 11: on a fixed corpus of marked trees with at most four nodes, the
/// function-pair correspondence search returns exactly the exhaustive
/// superset-search value; the distance satisfies the metric axioms; and the
/// marked segments of lengths 3 and 5 are at distance exactly 1.
fn gh_oracle(seed: u64) -> Result<StatReport> {
    let mut report = StatReport::new("gh-oracle", seed);
    let corpus = oracle_corpus()?;
    let n = corpus.len();
    let mut dist = vec![vec![0.0f64; n]; n];
    for (i, a) in corpus.iter().enumerate() {
        for (j, b) in corpus.iter().enumerate() {
            dist[i][j] = gh_dist(a, b, true)?;
        }
    }
    let mut pair_gap = 0.0f64;
    let mut pairs = 0u64;
    for i in 0..n {
        for j in i..n {
            let oracle = superset_search(&corpus[i], &corpus[j], true)?;
            pair_gap = pair_gap.max((dist[i][j] - oracle).abs());
            pairs += 1;
        }
    }
    report.push_threshold("oracle-gap", pair_gap, 0.0, pairs, "enumeration", pair_gap == 0.0);
    let mut axiom_gap = 0.0f64;
    for i in 0..n {
        axiom_gap = axiom_gap.max(dist[i][i]);
        for j in 0..n {
            axiom_gap = axiom_gap.max((dist[i][j] - dist[j][i]).abs());
            for k in 0..n {
                axiom_gap = axiom_gap.max(dist[i][k] - dist[i][j] - dist[j][k]);
            }
        }
    }
    report.push_threshold(
        "metric-axioms",
        axiom_gap.max(0.0),
        1e-12,
        (n * n * n) as u64,
        "closed-form",
        axiom_gap <= 1e-12,
    );
    let seg = gh_dist(&MetricTree::segment(3.0)?, &MetricTree::segment(5.0)?, true)?;
    report.push_threshold("segment-gap", (seg - 1.0).abs(), 0.0, 1, "hand-computed", seg == 1.0);
    Ok(report)
}

/// Six marked trees with 2 to 4 nodes: segments, paths, and two Y shapes.
fn oracle_corpus() -> Result<Vec<MetricTree>> {
    let mut out = vec![MetricTree::segment(1.0)?, MetricTree::segment(2.5)?];
    {
        let mut b = TreeBuilder::new();
        let a = b.add_child(TreeBuilder::ROOT, 0.7)?;
        let c = b.add_child(a, 0.4)?;
        b.mark(c)?;
        out.push(b.build()?);
    }
    {
        let mut b = TreeBuilder::new();
        b.add_child(TreeBuilder::ROOT, 1.2)?;
        let c = b.add_child(TreeBuilder::ROOT, 0.3)?;
        b.mark(c)?;
        out.push(b.build()?);
    }
    {
        let mut b = TreeBuilder::new();
        let s = b.add_child(TreeBuilder::ROOT, 1.0)?;
        let l = b.add_child(s, 0.5)?;
        b.add_child(s, 2.0)?;
        b.mark(l)?;
        out.push(b.build()?);
    }
    {
        let mut b = TreeBuilder::new();
        let s = b.add_child(TreeBuilder::ROOT, 0.2)?;
        b.add_child(s, 1.4)?;
        let l = b.add_child(s, 0.9)?;
        b.mark(l)?;
        out.push(b.build()?);
    }
    Ok(out)
}

/// Half the minimal distortion over every subset of the pair grid that
/// covers both trees and contains the pinned pairs. Exponential in the grid
/// size; the reference the fast search is judged against.
fn superset_search(a: &MetricTree, b: &MetricTree, marked: bool) -> Result<f64> {
    let n = a.len();
    let m = b.len();
    if n * m > 16 {
        return Err(Error::SizeLimit { got: n * m, cap: 16 });
    }
    let da = full_dist(a)?;
    let db = full_dist(b)?;
    let mut required = vec![(a.root(), b.root())];
    if marked {
        match (a.marked(), b.marked()) {
            (Some(x), Some(y)) => required.push((x, y)),
            _ => {
                return Err(Error::Domain("marked search needs marks on both trees".into()));
            }
        }
    }
    let mut best = f64::INFINITY;
    'mask: for mask in 0u32..(1u32 << (n * m)) {
        let has = |u: usize, v: usize| mask & (1 << (u * m + v)) != 0;
        for &(u, v) in &required {
            if !has(u, v) {
                continue 'mask;
            }
        }
        for u in 0..n {
            if !(0..m).any(|v| has(u, v)) {
                continue 'mask;
            }
        }
        for v in 0..m {
            if !(0..n).any(|u| has(u, v)) {
                continue 'mask;
            }
        }
        let mut pairs = Vec::new();
        for u in 0..n {
            for v in 0..m {
                if has(u, v) {
                    pairs.push((u, v));
                }
            }
        }
        let mut worst = 0.0f64;
        for &(u, v) in &pairs {
            for &(x, y) in &pairs {
                worst = worst.max((da[u][x] - db[v][y]).abs());
            }
        }
        best = best.min(worst);
    }
    Ok(best / 2.0)
}

fn full_dist(t: &MetricTree) -> Result<Vec<Vec<f64>>> {
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

/// Check 12: on 10^3 random gluing inputs, output distances match the
/// case-by-case formula evaluated independently within 1e-9, output masses
/// sum to 1 within 1e-12, and scaling every input's mass by 4 at exponent
/// 1/2 (so distances by exactly 2) commutes with gluing bitwise.
fn concat_algebra(seed: u64) -> Result<StatReport> {
    const REPS: usize = 1000;
    let mut report = StatReport::new("concat-algebra", seed);
    let mut rng = SplitMix64::new(seed);
    let mut worst_dist = 0.0f64;
    let mut worst_mass = 0.0f64;
    let mut worst_scale = 0.0f64;
    for _ in 0..REPS {
        let beta = 0.3 + 0.4 * rng.random::<f64>();
        let xi = random_seq(&mut rng)?;
        let trees: Vec<MetricTree> =
            (0..xi.n_atoms()).map(|_| random_mass_tree(&mut rng)).collect::<Result<_>>()?;
        let refs: Vec<&MetricTree> = trees.iter().collect();
        let out = concat_detailed(&ConcatInput { xi: &xi, trees: refs.clone(), beta })?;
        worst_dist = worst_dist.max(four_case_gap(&xi, &trees, beta, &out)?);
        let mass_sum: f64 = out
            .tree
            .leaf_mass()
            .ok_or_else(|| Error::Domain("gluing dropped the mass measure".into()))?
            .values()
            .sum();
        worst_mass = worst_mass.max((mass_sum - 1.0).abs());
        // pre-scale: masses times 4, distances times exactly 2
        let pre: Vec<MetricTree> = trees
            .iter()
            .map(|t| t.rescale(4.0, 0.5, MassMode::Scaled))
            .collect::<Result<_>>()?;
        let pre_refs: Vec<&MetricTree> = pre.iter().collect();
        let a = concat_detailed(&ConcatInput { xi: &xi, trees: pre_refs, beta: 0.5 })?;
        let b = concat_detailed(&ConcatInput { xi: &xi, trees: refs, beta: 0.5 })?
            .tree
            .rescale(4.0, 0.5, MassMode::Scaled)?;
        for v in 0..a.tree.len() {
            worst_scale = worst_scale.max((a.tree.edge_len(v) - b.edge_len(v)).abs());
        }
    }
    report.push_threshold(
        "four-case-gap",
        worst_dist,
        1e-9,
        REPS as u64,
        "closed-form",
        worst_dist < 1e-9,
    );
    report.push_threshold(
        "mass-total-gap",
        worst_mass,
        1e-12,
        REPS as u64,
        "closed-form",
        worst_mass <= 1e-12,
    );
    report.push_threshold(
        "scale-equivariance",
        worst_scale,
        0.0,
        REPS as u64,
        "closed-form",
        worst_scale == 0.0,
    );
    Ok(report)
}

/// Worst gap between output distances and the gluing metric evaluated
/// independently: within one retained tree the input distance scales by its
/// atom to the exponent; across trees the two junction legs add; tree 0
/// hangs by its marked vertex, every other tree by its root.
fn four_case_gap(
    xi: &ScalingSeq,
    trees: &[MetricTree],
    beta: f64,
    out: &ConcatOutcome,
) -> Result<f64> {
    let to_junction = |i: usize, v: NodeId| -> Result<f64> {
        let t = &trees[i];
        let anchor =
            if i == 0 { t.marked().expect("retained trees are marked") } else { t.root() };
        Ok(xi.atom(i).powf(beta) * t.dist(v, anchor)?)
    };
    let retained: Vec<usize> = (0..trees.len()).filter(|&i| out.node_map[i].is_some()).collect();
    let mut worst = 0.0f64;
    for &i in &retained {
        let map_i = out.node_map[i].as_ref().expect("retained");
        for &j in &retained {
            let map_j = out.node_map[j].as_ref().expect("retained");
            for x in 0..trees[i].len() {
                for y in 0..trees[j].len() {
                    let expected = if i == j {
                        xi.atom(i).powf(beta) * trees[i].dist(x, y)?
                    } else {
                        to_junction(i, x)? + to_junction(j, y)?
                    };
                    let got = out.tree.dist(map_i[x], map_j[y])?;
                    worst = worst.max((got - expected).abs());
                }
            }
        }
    }
    Ok(worst)
}

/// A random six-atom scaling sequence. Atom 0, atom 1, and the smallest
/// tail atoms are sometimes zeroed to exercise the degenerate gluing cases;
/// whatever remains is renormalized to sum 1.
fn random_seq(rng: &mut SplitMix64) -> Result<ScalingSeq> {
    let mut atoms = dirichlet_sample(&[1.0; 6], rng)?;
    if rng.random::<f64>() < 0.25 {
        atoms[0] = 0.0;
    }
    if rng.random::<f64>() < 0.25 {
        atoms[1] = 0.0;
    }
    let mut tail: Vec<f64> = atoms[3..].to_vec();
    tail.sort_by(|a, b| b.partial_cmp(a).expect("atoms are finite"));
    let keep = rng.random_range(0..=tail.len());
    tail.truncate(keep);
    let mut all = vec![atoms[0], atoms[1], atoms[2]];
    all.extend(tail);
    let total: f64 = all.iter().sum();
    for a in &mut all {
        *a /= total;
    }
    ScalingSeq::from_atoms(&all)
}

/// A random marked tree of 2 to 5 nodes with unit-total leaf masses.
fn random_mass_tree(rng: &mut SplitMix64) -> Result<MetricTree> {
    let extra = rng.random_range(1..=4);
    let mut b = TreeBuilder::new();
    let mut kids = vec![0usize];
    for _ in 0..extra {
        let p = rng.random_range(0..kids.len());
        b.add_child(p, 0.25 + rng.random::<f64>())?;
        kids[p] += 1;
        kids.push(0);
    }
    b.mark(rng.random_range(1..kids.len()))?;
    let leaves: Vec<NodeId> = (1..kids.len()).filter(|&v| kids[v] == 0).collect();
    let weights: Vec<f64> = leaves.iter().map(|_| 0.1 + rng.random::<f64>()).collect();
    let total: f64 = weights.iter().sum();
    for (&v, &w) in leaves.iter().zip(&weights) {
        b.set_mass(v, w / total)?;
    }
    b.build()
}
