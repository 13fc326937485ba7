//! Samplers and exact moment formulas for the distribution families the tree
//! machinery is built from: Dirichlet vectors, generalized Pólya urns, the
//! two-parameter Chinese restaurant process, GEM / Poisson–Dirichlet
//! stick-breaking, and generalized Mittag-Leffler moments.
//!
//! Everything here is a pure function of its inputs and an explicit RNG.

use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::fenwick::Fenwick;

/// Draws a probability vector from a Dirichlet law with the given shape
/// parameters (gamma-ratio construction).
pub fn dirichlet_sample<R: Rng + ?Sized>(params: &[f64], rng: &mut R) -> Result<Vec<f64>> {
    if params.is_empty() {
        return Err(Error::Domain("dirichlet needs at least one parameter".into()));
    }
    for &a in params {
        if !a.is_finite() || a <= 0.0 {
            return Err(Error::Domain(format!("dirichlet parameter {a} must be positive")));
        }
    }
    let gammas: Vec<Gamma<f64>> = params
        .iter()
        .map(|&a| Gamma::new(a, 1.0).map_err(|e| Error::Domain(e.to_string())))
        .collect::<Result<_>>()?;
    loop {
        let draws: Vec<f64> = gammas.iter().map(|g| g.sample(rng)).collect();
        let sum: f64 = draws.iter().sum();
        // tiny shapes can underflow every coordinate to zero; redraw
        if sum > 0.0 {
            return Ok(draws.into_iter().map(|x| x / sum).collect());
        }
    }
}

/// Generalized Pólya urn: color `j` starts with weight `gamma[j]` and gains
/// `step` weight each time it is drawn.
#[derive(Clone, Debug)]
pub struct UrnState {
    initial: Vec<f64>,
    step: f64,
    draws: Vec<u64>,
}

impl UrnState {
    pub fn new(gamma: Vec<f64>, step: f64) -> Result<UrnState> {
        if gamma.is_empty() {
            return Err(Error::Domain("urn needs at least one color".into()));
        }
        for &g in &gamma {
            if !g.is_finite() || g <= 0.0 {
                return Err(Error::Domain(format!("urn weight {g} must be positive")));
            }
        }
        if !step.is_finite() || step <= 0.0 {
            return Err(Error::Domain(format!("urn step {step} must be positive")));
        }
        let draws = vec![0; gamma.len()];
        Ok(UrnState { initial: gamma, step, draws })
    }

    pub fn n_colors(&self) -> usize {
        self.initial.len()
    }

    /// Total draws so far.
    pub fn n(&self) -> u64 {
        self.draws.iter().sum()
    }

    pub fn draws(&self) -> &[u64] {
        &self.draws
    }

    /// Current weight of color `j`: initial + step × draws.
    pub fn weight(&self, j: usize) -> f64 {
        self.initial[j] + self.step * self.draws[j] as f64
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..self.n_colors()).map(|j| self.weight(j)).collect()
    }

    pub fn total_weight(&self) -> f64 {
        (0..self.n_colors()).map(|j| self.weight(j)).sum()
    }

    /// Empirical draw frequencies; all zero before the first draw.
    pub fn frequencies(&self) -> Vec<f64> {
        let n = self.n();
        if n == 0 {
            return vec![0.0; self.n_colors()];
        }
        self.draws.iter().map(|&d| d as f64 / n as f64).collect()
    }

    /// Draws one color proportionally to current weights and reinforces it.
    pub fn step_draw<R: Rng + ?Sized>(&mut self, rng: &mut R) -> usize {
        let total = self.total_weight();
        let mut u = rng.random::<f64>() * total;
        let last = self.n_colors() - 1;
        for j in 0..last {
            let w = self.weight(j);
            if u < w {
                self.draws[j] += 1;
                return j;
            }
            u -= w;
        }
        self.draws[last] += 1;
        last
    }

    /// One draw from the almost-sure limit of the frequency vector:
    /// Dirichlet with parameters `initial[j] / step`.
    pub fn limit_sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<f64>> {
        let params: Vec<f64> = self.initial.iter().map(|&g| g / self.step).collect();
        dirichlet_sample(&params, rng)
    }
}

/// Two-parameter Chinese restaurant process. Customer `n+1` joins table `j`
/// with probability `(N_j − beta)/(n + theta)` and opens a new table with the
/// complementary probability `(theta + K·beta)/(n + theta)`.
///
/// The seating draw splits each table weight into an integer part `N_j − 1`
/// (served by a Fenwick index) plus a flat `1 − beta` per table, so a step
/// costs O(log K) no matter how many tables are open.
#[derive(Clone, Debug)]
pub struct CrpState {
    beta: f64,
    theta: f64,
    sizes: Vec<u64>,
    /// Per-table weight N_j − 1.
    excess: Fenwick,
    n: u64,
}

impl CrpState {
    /// Starts with a single customer at a single table.
    pub fn new(beta: f64, theta: f64) -> Result<CrpState> {
        if !(0.0..=1.0).contains(&beta) {
            return Err(Error::Domain(format!("beta {beta} outside [0,1]")));
        }
        if !theta.is_finite() || theta <= -beta {
            return Err(Error::Domain(format!("theta {theta} must exceed -beta")));
        }
        let mut excess = Fenwick::new();
        excess.push(0);
        Ok(CrpState { beta, theta, sizes: vec![1], excess, n: 1 })
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    /// Open table count K.
    pub fn n_tables(&self) -> usize {
        self.sizes.len()
    }

    pub fn table_sizes(&self) -> &[u64] {
        &self.sizes
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Seats one customer; returns the table index (a fresh index when a new
    /// table opens).
    pub fn step_seat<R: Rng + ?Sized>(&mut self, rng: &mut R) -> usize {
        let k = self.sizes.len() as f64;
        let int_part = self.excess.total() as f64; // n − K
        let flat_part = k * (1.0 - self.beta); // K·(1−β)
        let total = self.n as f64 + self.theta;
        let u = rng.random::<f64>() * total;
        let j = if u < int_part {
            self.excess.select(u as u64)
        } else if u < int_part + flat_part {
            let idx = ((u - int_part) / (1.0 - self.beta)) as usize;
            idx.min(self.sizes.len() - 1)
        } else {
            self.sizes.push(1);
            self.excess.push(0);
            self.n += 1;
            return self.sizes.len() - 1;
        };
        self.sizes[j] += 1;
        self.excess.add(j, 1);
        self.n += 1;
        j
    }
}

/// A truncated stick-breaking sample: retained atoms (renormalized to sum 1)
/// plus the raw tail mass that was folded back in.
#[derive(Clone, Debug)]
pub struct StickSeq {
    pub weights: Vec<f64>,
    pub residual: f64,
}

fn check_gem_params(beta: f64, theta: f64, eps: f64) -> Result<()> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::Domain(format!("stick parameter beta {beta} outside (0,1)")));
    }
    if !theta.is_finite() || theta <= -beta {
        return Err(Error::Domain(format!("stick parameter theta {theta} must exceed -beta")));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Domain(format!("truncation eps {eps} outside (0,1)")));
    }
    Ok(())
}

/// Hard ceiling on stick count. The unbroken remainder of GEM(beta, theta)
/// decays only polynomially, like j^(−(1−beta)/beta), so a small `eps` with
/// beta near 1 would otherwise demand astronomically many sticks; past the
/// ceiling the remainder is folded in by the same renormalization.
pub const MAX_STICKS: usize = 1 << 20;

/// GEM(beta, theta) stick-breaking in size-biased (arrival) order:
/// atom j is `W_j · ∏_{i<j} (1 − W_i)` with `W_j ~ Beta(1−beta, theta+j·beta)`.
/// Breaking stops once the unbroken remainder drops below `eps` (or at
/// [`MAX_STICKS`]); retained atoms are renormalized to sum to 1.
pub fn gem_sticks<R: Rng + ?Sized>(
    beta: f64,
    theta: f64,
    eps: f64,
    rng: &mut R,
) -> Result<StickSeq> {
    check_gem_params(beta, theta, eps)?;
    let mut weights = Vec::new();
    let mut remaining = 1.0f64;
    let mut j = 1u32;
    while remaining >= eps && weights.len() < MAX_STICKS {
        let w = Beta::new(1.0 - beta, theta + j as f64 * beta)
            .map_err(|e| Error::Domain(e.to_string()))?
            .sample(rng);
        weights.push(remaining * w);
        remaining *= 1.0 - w;
        j += 1;
    }
    if weights.is_empty() {
        // eps close to 1 can stop before the first break; keep one atom
        weights.push(1.0);
        remaining = 0.0;
    }
    let retained: f64 = weights.iter().sum();
    if retained > 0.0 {
        for w in &mut weights {
            *w /= retained;
        }
    } else {
        weights = vec![1.0];
    }
    Ok(StickSeq { weights, residual: remaining })
}

/// Poisson–Dirichlet(beta, theta) sample: the GEM atoms sorted decreasing.
pub fn pd_sample<R: Rng + ?Sized>(
    beta: f64,
    theta: f64,
    eps: f64,
    rng: &mut R,
) -> Result<StickSeq> {
    let mut s = gem_sticks(beta, theta, eps, rng)?;
    s.weights.sort_unstable_by(|a, b| b.partial_cmp(a).expect("atoms are finite"));
    Ok(s)
}

/// p-th moment of the generalized Mittag-Leffler law ML(beta, theta):
/// `Γ(theta+1) Γ(theta/beta+1+p) / (Γ(theta/beta+1) Γ(theta+beta·p+1))`,
/// evaluated through log-gamma. Any real `p` keeping all four gamma
/// arguments positive is accepted.
pub fn ml_moment(beta: f64, theta: f64, p: f64) -> Result<f64> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::Domain(format!("ml beta {beta} outside (0,1]")));
    }
    if !theta.is_finite() || theta <= -beta {
        return Err(Error::Domain(format!("ml theta {theta} must exceed -beta")));
    }
    let args = [
        theta + 1.0,
        theta / beta + 1.0 + p,
        theta / beta + 1.0,
        theta + beta * p + 1.0,
    ];
    for &a in &args {
        if !a.is_finite() || a <= 0.0 {
            return Err(Error::Domain(format!("gamma argument {a} out of range for moment p={p}")));
        }
    }
    let log = ln_gamma(args[0]) + ln_gamma(args[1]) - ln_gamma(args[2]) - ln_gamma(args[3]);
    Ok(log.exp())
}
