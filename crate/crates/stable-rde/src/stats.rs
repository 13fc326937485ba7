//! Statistical comparison engine: moment tests with standard-error bands,
//! two-sample Kolmogorov-Smirnov tests, multinomial goodness-of-fit, and the
//! report structure the verification suites assemble their results into.
//!
//! Reports serialize to CSV with one row per comparison:
//! `test,label,estimate,stderr,n,target,provenance,rule,verdict`.

use std::fmt;

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};

/// Decision rule for comparing an estimate against a target.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Rule {
    /// |estimate − target| ≤ 3·stderr; with stderr 0 the match must be exact.
    ThreeSigma,
    /// |estimate − target| ≤ tol·|target| (absolute comparison when the
    /// target is zero).
    Rel(f64),
    /// estimate ≤ target + 3·stderr, one-sided: for checks whose target is
    /// an upper bound rather than a point value. With stderr 0 the estimate
    /// must not exceed the target.
    UpperThreeSigma,
}

impl Rule {
    pub fn check(self, estimate: f64, stderr: f64, target: f64) -> bool {
        match self {
            Rule::ThreeSigma => {
                if stderr == 0.0 {
                    estimate == target
                } else {
                    (estimate - target).abs() <= 3.0 * stderr
                }
            }
            Rule::Rel(tol) => {
                if target == 0.0 {
                    estimate.abs() <= tol
                } else {
                    (estimate - target).abs() <= tol * target.abs()
                }
            }
            Rule::UpperThreeSigma => estimate <= target + 3.0 * stderr,
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rule::ThreeSigma => write!(f, "3sigma"),
            Rule::Rel(tol) => write!(f, "rel({tol})"),
            Rule::UpperThreeSigma => write!(f, "upper3sigma"),
        }
    }
}

/// Sample mean and standard error of the mean.
pub fn mean_stderr(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    if samples.len() < 2 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Outcome of a single estimate-vs-target comparison.
#[derive(Clone, Debug, Serialize)]
pub struct TestOutcome {
    pub value: f64,
    pub stderr: f64,
    pub n: u64,
    pub rule: Rule,
    pub pass: bool,
}

/// Compares the empirical p-th moment of `samples` against `target`.
/// The standard error is the sample standard error of x^p.
pub fn moment_test(samples: &[f64], p: f64, target: f64, rule: Rule) -> Result<TestOutcome> {
    if samples.len() < 30 {
        return Err(Error::Domain(format!(
            "moment test needs at least 30 samples, got {}",
            samples.len()
        )));
    }
    let powered: Vec<f64> = samples.iter().map(|&x| x.powf(p)).collect();
    let (mean, se) = mean_stderr(&powered);
    Ok(TestOutcome {
        value: mean,
        stderr: se,
        n: samples.len() as u64,
        rule,
        pass: rule.check(mean, se, target),
    })
}

/// Two-sample KS coefficient for the 1% level: c(0.01) = sqrt(-ln(0.005)/2).
pub const KS_COEFF_1PCT: f64 = 1.6276236307187293;

/// Outcome of a two-sample Kolmogorov-Smirnov comparison at the 1% level.
#[derive(Clone, Debug, Serialize)]
pub struct KsOutcome {
    pub statistic: f64,
    pub critical: f64,
    pub n_a: u64,
    pub n_b: u64,
    pub pass: bool,
}

/// Two-sample KS test: supremum gap between empirical CDFs, compared against
/// the asymptotic 1% critical value `c(0.01)·sqrt((n+m)/(n·m))`.
pub fn ks_test(samples_a: &[f64], samples_b: &[f64]) -> Result<KsOutcome> {
    if samples_a.len() < 100 || samples_b.len() < 100 {
        return Err(Error::Domain(format!(
            "ks test needs at least 100 samples per side, got {} and {}",
            samples_a.len(),
            samples_b.len()
        )));
    }
    let mut a = samples_a.to_vec();
    let mut b = samples_b.to_vec();
    a.sort_unstable_by(|x, y| x.partial_cmp(y).expect("finite samples"));
    b.sort_unstable_by(|x, y| x.partial_cmp(y).expect("finite samples"));
    let (n, m) = (a.len(), b.len());
    let mut i = 0usize;
    let mut j = 0usize;
    let mut d: f64 = 0.0;
    while i < n && j < m {
        // evaluate the CDF gap only after consuming every sample tied at x
        let x = a[i].min(b[j]);
        while i < n && a[i] == x {
            i += 1;
        }
        while j < m && b[j] == x {
            j += 1;
        }
        let fa = i as f64 / n as f64;
        let fb = j as f64 / m as f64;
        d = d.max((fa - fb).abs());
    }
    let critical = KS_COEFF_1PCT * ((n + m) as f64 / (n as f64 * m as f64)).sqrt();
    Ok(KsOutcome {
        statistic: d,
        critical,
        n_a: n as u64,
        n_b: m as u64,
        pass: d <= critical,
    })
}

/// Outcome of a chi-square multinomial goodness-of-fit test at the 1% level.
#[derive(Clone, Debug, Serialize)]
pub struct GofOutcome {
    pub statistic: f64,
    pub critical: f64,
    pub dof: usize,
    pub pass: bool,
}

/// Pearson chi-square test of observed category counts against expected
/// probabilities, at the 1% level. Every expected count must be at least 5.
pub fn multinomial_gof(counts: &[u64], probs: &[f64]) -> Result<GofOutcome> {
    if counts.len() != probs.len() || counts.len() < 2 {
        return Err(Error::Domain("counts and probs must align, length >= 2".into()));
    }
    let total: u64 = counts.iter().sum();
    let psum: f64 = probs.iter().sum();
    if (psum - 1.0).abs() > 1e-9 {
        return Err(Error::Domain(format!("probabilities sum to {psum}, expected 1")));
    }
    let mut stat = 0.0;
    for (&c, &p) in counts.iter().zip(probs) {
        let expected = total as f64 * p;
        if expected < 5.0 {
            return Err(Error::Domain(format!(
                "expected count {expected:.2} below 5; cell too thin for chi-square"
            )));
        }
        stat += (c as f64 - expected).powi(2) / expected;
    }
    let dof = counts.len() - 1;
    let critical = ChiSquared::new(dof as f64)
        .map_err(|e| Error::Domain(e.to_string()))?
        .inverse_cdf(0.99);
    Ok(GofOutcome {
        statistic: stat,
        critical,
        dof,
        pass: stat <= critical,
    })
}

/// One labelled Monte Carlo estimate.
#[derive(Clone, Debug, Serialize)]
pub struct Estimate {
    pub label: String,
    pub value: f64,
    pub stderr: f64,
    pub n: u64,
}

/// One labelled comparison target with its provenance note (how the value
/// was obtained: closed form, exact identity, simulated reference, or hand
/// computation).
#[derive(Clone, Debug, Serialize)]
pub struct Target {
    pub label: String,
    pub value: f64,
    pub provenance: String,
}

/// Pass/fail decision tying one estimate to one target under a rule.
#[derive(Clone, Debug, Serialize)]
pub struct Verdict {
    pub estimate: String,
    pub target: String,
    pub rule: Rule,
    pub pass: bool,
}

/// A named bundle of estimates, targets, and verdicts from one experiment.
#[derive(Clone, Debug, Serialize)]
pub struct StatReport {
    pub name: String,
    pub estimates: Vec<Estimate>,
    pub targets: Vec<Target>,
    pub verdicts: Vec<Verdict>,
    pub seed: u64,
    pub runtime_secs: f64,
}

impl StatReport {
    pub fn new(name: impl Into<String>, seed: u64) -> StatReport {
        StatReport {
            name: name.into(),
            estimates: Vec::new(),
            targets: Vec::new(),
            verdicts: Vec::new(),
            seed,
            runtime_secs: 0.0,
        }
    }

    /// Records one estimate/target pair and its verdict; returns the verdict.
    #[allow(clippy::too_many_arguments)]
    pub fn push_comparison(
        &mut self,
        label: impl Into<String>,
        value: f64,
        stderr: f64,
        n: u64,
        target: f64,
        provenance: impl Into<String>,
        rule: Rule,
    ) -> bool {
        let label = label.into();
        let pass = rule.check(value, stderr, target);
        self.estimates.push(Estimate { label: label.clone(), value, stderr, n });
        self.targets.push(Target {
            label: label.clone(),
            value: target,
            provenance: provenance.into(),
        });
        self.verdicts.push(Verdict { estimate: label.clone(), target: label, rule, pass });
        pass
    }

    /// Records a binary pass/fail check (KS or goodness-of-fit style) where
    /// the "target" is the critical value and the estimate the statistic.
    pub fn push_threshold(
        &mut self,
        label: impl Into<String>,
        statistic: f64,
        critical: f64,
        n: u64,
        provenance: impl Into<String>,
        pass: bool,
    ) {
        let label = label.into();
        self.estimates.push(Estimate { label: label.clone(), value: statistic, stderr: 0.0, n });
        self.targets.push(Target {
            label: label.clone(),
            value: critical,
            provenance: provenance.into(),
        });
        self.verdicts.push(Verdict {
            estimate: label.clone(),
            target: label,
            rule: Rule::ThreeSigma,
            pass,
        });
    }

    pub fn all_pass(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }

    /// Folds another report's rows into this one (order-independent assembly:
    /// rows are sorted by label on output).
    pub fn merge(&mut self, other: StatReport) {
        self.estimates.extend(other.estimates);
        self.targets.extend(other.targets);
        self.verdicts.extend(other.verdicts);
        self.runtime_secs += other.runtime_secs;
    }

    /// CSV rows: `test,label,estimate,stderr,n,target,provenance,rule,verdict`,
    /// sorted by label, with a header line.
    pub fn to_csv(&self) -> String {
        let mut rows: Vec<String> = Vec::with_capacity(self.verdicts.len());
        for ((est, tgt), verdict) in self.estimates.iter().zip(&self.targets).zip(&self.verdicts) {
            let clean = |s: &str| s.replace(',', ";");
            rows.push(format!(
                "{},{},{},{},{},{},{},{},{}",
                clean(&self.name),
                clean(&est.label),
                est.value,
                est.stderr,
                est.n,
                tgt.value,
                clean(&tgt.provenance),
                verdict.rule,
                if verdict.pass { "pass" } else { "fail" }
            ));
        }
        rows.sort();
        let mut out = String::from("test,label,estimate,stderr,n,target,provenance,rule,verdict\n");
        for r in rows {
            out.push_str(&r);
            out.push('\n');
        }
        out
    }
}
