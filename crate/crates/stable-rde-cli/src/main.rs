//! Command line front end for the stable-rde library: growth chains, urn and
//! seating simulations, scaling-sequence draws, tree gluing, correspondence
//! distances, the fixpoint iteration, and the verification suite.
//!
//! Every subcommand takes `--seed` and, where it writes data, `--out` (with
//! `-` streaming to standard output). A JSON config file given via
//! `--config` supplies defaults; explicit flags always win. Unknown or
//! wrongly typed config keys are rejected with the offending keys named.
//! Exit codes: 0 success, 1 domain errors (and failed verification), 2 usage
//! and config errors.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{Map, Value};

use stable_rde::concat::{concat_detailed, ConcatInput, ScalingSeq};
use stable_rde::ghdist::{gh_dist_detailed, DEFAULT_MAX_NODES};
use stable_rde::laws::{CrpState, UrnState};
use stable_rde::marchal::grow;
use stable_rde::rde::{
    attraction_experiment, calibrate_beta, grow_from_string, iterate, spine_martingale, InitLaw,
    IterMode, IterOutcome, LengthLaw, XiLaw, XiModel, DEFAULT_XI_EPS,
};
use stable_rde::rng::{child_seed, default_threads, run_replicates, SplitMix64};
use stable_rde::stats::StatReport;
use stable_rde::tree::io::{read_tree, write_tree, write_trees};
use stable_rde::tree::MetricTree;
use stable_rde::verify::{run_check, run_check_with_retry, Suite, CHECKS};
use stable_rde::{Error, Result};

/// Seed salt for on-the-fly exponent calibration of custom scaling laws.
const CALIBRATION_SALT: u64 = 9001;
/// Replicates used for on-the-fly exponent calibration.
const CALIBRATION_REPS: usize = 20_000;

#[derive(Parser)]
#[command(
    name = "stable-rde",
    version,
    about = "Random stable trees: growth, gluing, and the distributional fixpoint"
)]
struct Cli {
    /// JSON config file with per-command defaults; explicit flags override it
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// The random growth chain
    #[command(subcommand)]
    Marchal(MarchalCmd),
    /// Reinforced urn draws and their Dirichlet limit
    Urn(UrnArgs),
    /// Seating-process table counts
    Crp(CrpArgs),
    /// Scaling-sequence draws
    Xi(XiArgs),
    /// Glue marked trees along a scaling sequence
    Concat(ConcatArgs),
    /// Correspondence distance between two small trees
    Ghdist(GhArgs),
    /// The distributional fixpoint iteration
    #[command(subcommand)]
    Rde(RdeCmd),
    /// Run the statistical verification suite
    Verify(VerifyArgs),
}

#[derive(Subcommand)]
enum MarchalCmd {
    /// Grow a tree and write it as rtree-v1 JSON (file outputs gain a
    /// .discrete.json sidecar carrying the vertex labels)
    Grow(GrowArgs),
}

#[derive(Args)]
struct GrowArgs {
    /// Growth index in (1, 2]
    #[arg(long)]
    alpha: Option<f64>,
    /// Number of leaves
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output path, or - for stdout
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args)]
struct UrnArgs {
    /// Initial color weights, comma separated
    #[arg(long)]
    gamma: Option<String>,
    /// Weight added to the drawn color
    #[arg(long)]
    step: Option<f64>,
    /// Draws per replicate
    #[arg(long)]
    draws: Option<u64>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Sample the Dirichlet limit law instead of running the urn
    #[arg(long)]
    limit: bool,
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args)]
struct CrpArgs {
    /// Discount parameter in [0, 1)
    #[arg(long)]
    beta: Option<f64>,
    /// Strength parameter, above -beta
    #[arg(long)]
    theta: Option<f64>,
    /// Customers to seat per replicate
    #[arg(long)]
    n: Option<u64>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args)]
struct XiArgs {
    /// Index of the stable scaling law, in (1, 2]
    #[arg(long)]
    alpha: Option<f64>,
    /// Stick truncation threshold
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args)]
struct ConcatArgs {
    /// Tree files (rtree-v1), one per scaling atom; the first must be marked
    trees: Vec<PathBuf>,
    /// Scaling atoms, comma separated, summing to 1
    #[arg(long)]
    xi: Option<String>,
    /// Metric exponent in (0, 1)
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args)]
struct GhArgs {
    a: PathBuf,
    b: PathBuf,
    /// Pin the marked points onto each other
    #[arg(long)]
    marked: bool,
    /// Refuse trees with more nodes than this
    #[arg(long)]
    max_nodes: Option<usize>,
}

#[derive(Subcommand)]
enum RdeCmd {
    /// Draw samples of the depth-n iterated law
    Iterate(IterateArgs),
    /// Level sums of the spine martingale, with moment verdicts
    Martingale(MartingaleArgs),
    /// Convergence of the iteration toward the fixpoint law
    Attract(AttractArgs),
    /// Build the dyadic string and grow a tree from it
    String(StringArgs),
}

#[derive(Args)]
struct IterateArgs {
    /// Scaling law: stable:ALPHA or custom:FILE
    #[arg(long)]
    xi: Option<String>,
    /// Initial law: segment:LEN, exp:MEAN, or file:PATH
    #[arg(long)]
    init: Option<String>,
    /// Iteration depth
    #[arg(long)]
    depth: Option<usize>,
    /// full, spine, or skeleton:K
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args)]
struct MartingaleArgs {
    /// Scaling law: stable:ALPHA or custom:FILE
    #[arg(long)]
    xi: Option<String>,
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Replicate-level parallelism (default: RDE_THREADS or 1)
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args)]
struct AttractArgs {
    /// Scaling law: stable:ALPHA or custom:FILE
    #[arg(long)]
    xi: Option<String>,
    /// Initial law: segment:LEN, exp:MEAN, or file:PATH
    #[arg(long)]
    init: Option<String>,
    /// Base observation depth (moments are reported two levels deeper)
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args)]
struct StringArgs {
    /// Scaling law: stable:ALPHA or custom:FILE
    #[arg(long)]
    xi: Option<String>,
    /// Initial law: segment:LEN, exp:MEAN, or file:PATH
    #[arg(long)]
    init: Option<String>,
    /// String truncation depth
    #[arg(long)]
    m: Option<usize>,
    /// Bead replacement rounds
    #[arg(long)]
    levels: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args)]
struct VerifyArgs {
    /// quick or full
    #[arg(long)]
    suite: Option<String>,
    /// Run a single check by id (1 through 12) instead of a suite
    #[arg(long)]
    check: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    /// Rerun a failed check once on a derived seed
    #[arg(long)]
    retry_once: bool,
    #[arg(long)]
    out: Option<String>,
}

/// JSON config: a flat object whose keys mirror the long flags of one
/// subcommand.
struct Config(Map<String, Value>);

impl Config {
    fn load(path: Option<&Path>) -> Result<Config> {
        let Some(path) = path else {
            return Ok(Config(Map::new()));
        };
        let text = fs::read_to_string(path)?;
        if text.trim().is_empty() {
            return Ok(Config(Map::new()));
        }
        let value: Value = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        match value {
            Value::Object(map) => Ok(Config(map)),
            other => Err(Error::Config(format!(
                "{}: expected a JSON object, got {other}",
                path.display()
            ))),
        }
    }

    fn check_keys(&self, allowed: &[&str]) -> Result<()> {
        let bad: Vec<&str> = self
            .0
            .keys()
            .map(|k| k.as_str())
            .filter(|k| !allowed.contains(k))
            .collect();
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "unrecognized config keys for this command: {}",
                bad.join(", ")
            )))
        }
    }

    fn f64(&self, key: &str) -> Result<Option<f64>> {
        match self.0.get(key) {
            None => Ok(None),
            Some(Value::Number(n)) => Ok(n.as_f64()),
            Some(other) => Err(type_error(key, "a number", other)),
        }
    }

    fn u64(&self, key: &str) -> Result<Option<u64>> {
        match self.0.get(key) {
            None => Ok(None),
            Some(Value::Number(n)) => n
                .as_u64()
                .map(Some)
                .ok_or_else(|| type_error(key, "a nonnegative integer", self.0.get(key).unwrap())),
            Some(other) => Err(type_error(key, "a nonnegative integer", other)),
        }
    }

    fn usize(&self, key: &str) -> Result<Option<usize>> {
        Ok(self.u64(key)?.map(|v| v as usize))
    }

    fn string(&self, key: &str) -> Result<Option<String>> {
        match self.0.get(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.clone())),
            Some(other) => Err(type_error(key, "a string", other)),
        }
    }

    fn bool(&self, key: &str) -> Result<Option<bool>> {
        match self.0.get(key) {
            None => Ok(None),
            Some(Value::Bool(b)) => Ok(Some(*b)),
            Some(other) => Err(type_error(key, "a boolean", other)),
        }
    }

    /// A list of numbers, given either as a JSON array or as a comma string.
    fn f64_list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        match self.0.get(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(parse_f64_list(s)?)),
            Some(Value::Array(items)) => items
                .iter()
                .map(|v| {
                    v.as_f64()
                        .ok_or_else(|| type_error(key, "an array of numbers", v))
                })
                .collect::<Result<Vec<f64>>>()
                .map(Some),
            Some(other) => Err(type_error(key, "an array of numbers", other)),
        }
    }
}

fn type_error(key: &str, want: &str, got: &Value) -> Error {
    Error::Config(format!("key {key:?} must be {want}, got {got}"))
}

fn parse_f64_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| Error::Param(format!("bad number {:?} in list", p.trim())))
        })
        .collect()
}

/// Required parameter: flag wins, then config, else an error naming it.
fn need<T>(flag: Option<T>, cfg: Result<Option<T>>, name: &str) -> Result<T> {
    flag.or(cfg?).ok_or_else(|| {
        Error::Config(format!("missing parameter {name:?} (pass --{name} or set it in the config)"))
    })
}

/// Optional parameter with a default: flag wins, then config, then default.
fn or_default<T>(flag: Option<T>, cfg: Result<Option<T>>, default: T) -> Result<T> {
    Ok(flag.or(cfg?).unwrap_or(default))
}

enum OutTarget {
    Stdout,
    File(PathBuf),
}

impl OutTarget {
    fn resolve(flag: Option<String>, cfg: &Config) -> Result<OutTarget> {
        let out = or_default(flag, cfg.string("out"), "-".into())?;
        if out == "-" {
            Ok(OutTarget::Stdout)
        } else {
            Ok(OutTarget::File(PathBuf::from(out)))
        }
    }

    fn write(&self, body: &str) -> Result<()> {
        match self {
            OutTarget::Stdout => {
                let mut w = std::io::stdout().lock();
                w.write_all(body.as_bytes())?;
                if !body.ends_with('\n') {
                    w.write_all(b"\n")?;
                }
                Ok(())
            }
            OutTarget::File(path) => {
                let mut body = body.to_string();
                if !body.ends_with('\n') {
                    body.push('\n');
                }
                fs::write(path, body)?;
                Ok(())
            }
        }
    }

    fn describe(&self) -> String {
        match self {
            OutTarget::Stdout => "stdout".into(),
            OutTarget::File(p) => p.display().to_string(),
        }
    }
}

/// Parses stable:ALPHA or custom:FILE. A custom file holds either a full
/// model (law, beta, eps) or a bare law, whose exponent is then calibrated
/// on a seed derived from `seed`.
fn parse_xi_spec(spec: &str, seed: u64) -> Result<XiModel> {
    if let Some(alpha) = spec.strip_prefix("stable:") {
        let alpha: f64 = alpha
            .parse()
            .map_err(|_| Error::Param(format!("bad index in xi spec {spec:?}")))?;
        return XiModel::stable(alpha);
    }
    if let Some(path) = spec.strip_prefix("custom:") {
        let text = fs::read_to_string(path)?;
        if let Ok(model) = serde_json::from_str::<XiModel>(&text) {
            model.validate()?;
            return Ok(model);
        }
        let law: XiLaw = serde_json::from_str(&text).map_err(|e| {
            Error::Param(format!("{path}: neither a scaling model nor a scaling law: {e}"))
        })?;
        let beta =
            calibrate_beta(&law, 1e-6, CALIBRATION_REPS, child_seed(seed, CALIBRATION_SALT))?;
        return XiModel::custom(law, beta);
    }
    Err(Error::Param(format!(
        "bad xi spec {spec:?}; expected stable:ALPHA or custom:FILE"
    )))
}

/// Parses segment:LEN, exp:MEAN, or file:PATH (whitespace-separated floats).
fn parse_init_spec(spec: &str) -> Result<InitLaw> {
    if let Some(len) = spec.strip_prefix("segment:") {
        let len: f64 = len
            .parse()
            .map_err(|_| Error::Param(format!("bad length in init spec {spec:?}")))?;
        return Ok(InitLaw::Segment(LengthLaw::Constant(len)));
    }
    if let Some(mean) = spec.strip_prefix("exp:") {
        let mean: f64 = mean
            .parse()
            .map_err(|_| Error::Param(format!("bad mean in init spec {spec:?}")))?;
        return Ok(InitLaw::Segment(LengthLaw::Exponential { mean }));
    }
    if let Some(path) = spec.strip_prefix("file:") {
        let text = fs::read_to_string(path)?;
        let vals: Vec<f64> = text
            .split_whitespace()
            .map(|p| {
                p.parse::<f64>()
                    .map_err(|_| Error::Param(format!("{path}: bad sample {p:?}")))
            })
            .collect::<Result<_>>()?;
        return Ok(InitLaw::Segment(LengthLaw::Empirical(vals)));
    }
    Err(Error::Param(format!(
        "bad init spec {spec:?}; expected segment:LEN, exp:MEAN, or file:PATH"
    )))
}

fn parse_mode_spec(spec: &str) -> Result<IterMode> {
    match spec {
        "full" => Ok(IterMode::Full),
        "spine" => Ok(IterMode::Spine),
        _ => {
            if let Some(k) = spec.strip_prefix("skeleton:") {
                let k: usize = k
                    .parse()
                    .map_err(|_| Error::Param(format!("bad depth in mode spec {spec:?}")))?;
                return Ok(IterMode::Skeleton(k));
            }
            Err(Error::Param(format!(
                "bad mode spec {spec:?}; expected full, spine, or skeleton:K"
            )))
        }
    }
}

fn tree_json(t: &MetricTree) -> Result<String> {
    let mut buf = Vec::new();
    write_tree(&mut buf, t)?;
    Ok(String::from_utf8(buf).expect("serializer emits utf-8"))
}

fn read_tree_file(path: &Path) -> Result<MetricTree> {
    let file = fs::File::open(path)
        .map_err(|e| Error::Param(format!("{}: {e}", path.display())))?;
    read_tree(file)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let cfg = Config::load(cli.config.as_deref())?;
    match cli.command {
        Command::Marchal(MarchalCmd::Grow(a)) => marchal_grow(a, &cfg),
        Command::Urn(a) => urn(a, &cfg),
        Command::Crp(a) => crp(a, &cfg),
        Command::Xi(a) => xi_draws(a, &cfg),
        Command::Concat(a) => concat_trees(a, &cfg),
        Command::Ghdist(a) => ghdist(a, &cfg),
        Command::Rde(RdeCmd::Iterate(a)) => rde_iterate(a, &cfg),
        Command::Rde(RdeCmd::Martingale(a)) => rde_martingale(a, &cfg),
        Command::Rde(RdeCmd::Attract(a)) => rde_attract(a, &cfg),
        Command::Rde(RdeCmd::String(a)) => rde_string(a, &cfg),
        Command::Verify(a) => verify(a, &cfg),
    }
}

fn marchal_grow(a: GrowArgs, cfg: &Config) -> Result<ExitCode> {
    cfg.check_keys(&["alpha", "n", "seed", "out"])?;
    let alpha = need(a.alpha, cfg.f64("alpha"), "alpha")?;
    let n = need(a.n, cfg.usize("n"), "n")?;
    let seed = or_default(a.seed, cfg.u64("seed"), 0)?;
    let out = OutTarget::resolve(a.out, cfg)?;

    let t = grow(alpha, n, &mut SplitMix64::new(seed))?;
    let metric = t.to_metric()?;
    out.write(&tree_json(&metric)?)?;
    if let OutTarget::File(path) = &out {
        let sidecar = path.with_extension("discrete.json");
        let labels: Map<String, Value> = t
            .labels()
            .into_iter()
            .map(|(v, l)| (v.to_string(), Value::String(l)))
            .collect();
        let doc = serde_json::json!({
            "format": "marchal-discrete-v1",
            "alpha": alpha,
            "n_leaves": n,
            "labels": labels,
        });
        fs::write(&sidecar, serde_json::to_string_pretty(&doc)? + "\n")?;
    }
    let stats = metric.stats();
    eprintln!(
        "grew {n} leaves at alpha {alpha} (seed {seed}): {} nodes, height {:.6}, wrote {}",
        metric.len(),
        stats.height,
        out.describe()
    );
    Ok(ExitCode::SUCCESS)
}

fn urn(a: UrnArgs, cfg: &Config) -> Result<ExitCode> {
    cfg.check_keys(&["gamma", "step", "draws", "reps", "seed", "limit", "out"])?;
    let gamma = match a.gamma {
        Some(s) => parse_f64_list(&s)?,
        None => need(None, cfg.f64_list("gamma"), "gamma")?,
    };
    let step = need(a.step, cfg.f64("step"), "step")?;
    let draws = need(a.draws, cfg.u64("draws"), "draws")?;
    let reps = or_default(a.reps, cfg.usize("reps"), 1)?;
    let seed = or_default(a.seed, cfg.u64("seed"), 0)?;
    let limit = a.limit || cfg.bool("limit")?.unwrap_or(false);
    let out = OutTarget::resolve(a.out, cfg)?;

    let proto = UrnState::new(gamma.clone(), step)?;
    let rows: Vec<Result<Vec<f64>>> = run_replicates(reps, 1, seed, |_, rng| {
        if limit {
            proto.limit_sample(rng)
        } else {
            let mut urn = UrnState::new(gamma.clone(), step)?;
            for _ in 0..draws {
                urn.step_draw(rng);
            }
            Ok(urn.frequencies())
        }
    });
    let mut csv = String::from("rep");
    for j in 0..proto.n_colors() {
        csv.push_str(&format!(",freq{j}"));
    }
    csv.push('\n');
    for (r, row) in rows.into_iter().enumerate() {
        csv.push_str(&r.to_string());
        for v in row? {
            csv.push_str(&format!(",{v}"));
        }
        csv.push('\n');
    }
    out.write(&csv)?;
    let kind = if limit { "limit samples" } else { "urn runs" };
    eprintln!(
        "{reps} {kind} of {} colors (step {step}, seed {seed}), wrote {}",
        proto.n_colors(),
        out.describe()
    );
    Ok(ExitCode::SUCCESS)
}

fn crp(a: CrpArgs, cfg: &Config) -> Result<ExitCode> {
    cfg.check_keys(&["beta", "theta", "n", "reps", "seed", "out"])?;
    let beta = need(a.beta, cfg.f64("beta"), "beta")?;
    let theta = need(a.theta, cfg.f64("theta"), "theta")?;
    let n = need(a.n, cfg.u64("n"), "n")?;
    let reps = or_default(a.reps, cfg.usize("reps"), 1)?;
    let seed = or_default(a.seed, cfg.u64("seed"), 0)?;
    let out = OutTarget::resolve(a.out, cfg)?;

    let rows: Vec<Result<usize>> = run_replicates(reps, 1, seed, |_, rng| {
        let mut crp = CrpState::new(beta, theta)?;
        while crp.n() < n {
            crp.step_seat(rng);
        }
        Ok(crp.n_tables())
    });
    let mut csv = String::from("rep,tables,scaled\n");
    for (r, row) in rows.into_iter().enumerate() {
        let k = row?;
        let scaled = if beta > 0.0 {
            k as f64 / (n as f64).powf(beta)
        } else {
            k as f64 / (n as f64).ln()
        };
        csv.push_str(&format!("{r},{k},{scaled}\n"));
    }
    out.write(&csv)?;
    eprintln!(
        "{reps} seatings of {n} customers at ({beta}, {theta}) (seed {seed}), wrote {}",
        out.describe()
    );
    Ok(ExitCode::SUCCESS)
}

fn xi_draws(a: XiArgs, cfg: &Config) -> Result<ExitCode> {
    cfg.check_keys(&["alpha", "eps", "reps", "seed", "out"])?;
    let alpha = need(a.alpha, cfg.f64("alpha"), "alpha")?;
    let eps = or_default(a.eps, cfg.f64("eps"), DEFAULT_XI_EPS)?;
    let reps = or_default(a.reps, cfg.usize("reps"), 1)?;
    let seed = or_default(a.seed, cfg.u64("seed"), 0)?;
    let out = OutTarget::resolve(a.out, cfg)?;

    let model = XiModel::stable(alpha)?.with_eps(eps)?;
    let rows: Vec<Result<ScalingSeq>> =
        run_replicates(reps, 1, seed, |_, rng| model.sample(rng));
    let mut csv = String::from("rep,x0,x1,x2,x3,sticks,tail\n");
    for (r, row) in rows.into_iter().enumerate() {
        let seq = row?;
        let x = seq.x();
        csv.push_str(&format!(
            "{r},{},{},{},{},{},{}\n",
            x[0],
            x[1],
            x[2],
            x[3],
            seq.sticks().len(),
            seq.tail()
        ));
    }
    out.write(&csv)?;
    eprintln!(
        "{reps} scaling draws at alpha {alpha} (eps {eps}, seed {seed}), wrote {}",
        out.describe()
    );
    Ok(ExitCode::SUCCESS)
}

fn concat_trees(a: ConcatArgs, cfg: &Config) -> Result<ExitCode> {
    cfg.check_keys(&["xi", "beta", "out"])?;
    if a.trees.is_empty() {
        return Err(Error::Config("concat needs at least one tree file".into()));
    }
    let atoms = match a.xi {
        Some(s) => parse_f64_list(&s)?,
        None => need(None, cfg.f64_list("xi"), "xi")?,
    };
    let beta = need(a.beta, cfg.f64("beta"), "beta")?;
    let out = OutTarget::resolve(a.out, cfg)?;

    let seq = ScalingSeq::from_atoms(&atoms)?;
    let trees: Vec<MetricTree> =
        a.trees.iter().map(|p| read_tree_file(p)).collect::<Result<_>>()?;
    let refs: Vec<&MetricTree> = trees.iter().collect();
    let outcome = concat_detailed(&ConcatInput { xi: &seq, trees: refs, beta })?;
    out.write(&tree_json(&outcome.tree)?)?;
    eprintln!(
        "glued {} trees over {} atoms (beta {beta}): {} nodes, junction at {}, wrote {}",
        a.trees.len(),
        seq.n_atoms(),
        outcome.tree.len(),
        outcome.junction,
        out.describe()
    );
    Ok(ExitCode::SUCCESS)
}

fn ghdist(a: GhArgs, cfg: &Config) -> Result<ExitCode> {
    cfg.check_keys(&["marked", "max_nodes"])?;
    let marked = a.marked || cfg.bool("marked")?.unwrap_or(false);
    let max_nodes = or_default(a.max_nodes, cfg.usize("max_nodes"), DEFAULT_MAX_NODES)?;
    let ta = read_tree_file(&a.a)?;
    let tb = read_tree_file(&a.b)?;
    let outcome = gh_dist_detailed(&ta, &tb, marked, max_nodes)?;
    let pairs: Vec<Value> = outcome
        .pairs
        .iter()
        .map(|&(u, v)| Value::Array(vec![u.into(), v.into()]))
        .collect();
    let doc = serde_json::json!({ "distance": outcome.dist, "pairs": pairs });
    println!("{}", serde_json::to_string_pretty(&doc)?);
    eprintln!(
        "distance {} over {} aligned pairs ({})",
        outcome.dist,
        outcome.pairs.len(),
        if marked { "marked" } else { "unmarked" }
    );
    Ok(ExitCode::SUCCESS)
}

fn rde_iterate(a: IterateArgs, cfg: &Config) -> Result<ExitCode> {
    cfg.check_keys(&["xi", "init", "depth", "mode", "reps", "seed", "out"])?;
    let seed = or_default(a.seed, cfg.u64("seed"), 0)?;
    let xi = parse_xi_spec(&need(a.xi, cfg.string("xi"), "xi")?, seed)?;
    let init = parse_init_spec(&need(a.init, cfg.string("init"), "init")?)?;
    let depth = need(a.depth, cfg.usize("depth"), "depth")?;
    let mode = parse_mode_spec(&need(a.mode, cfg.string("mode"), "mode")?)?;
    let reps = or_default(a.reps, cfg.usize("reps"), 1)?;
    let out = OutTarget::resolve(a.out, cfg)?;

    if mode == IterMode::Spine {
        let mut csv = String::from("rep,value\n");
        for r in 0..reps {
            match iterate(&xi, &init, depth, mode, child_seed(seed, r as u64))? {
                IterOutcome::Spine(x) => csv.push_str(&format!("{r},{x}\n")),
                IterOutcome::Tree(_) => unreachable!("spine mode yields scalars"),
            }
        }
        out.write(&csv)?;
        eprintln!(
            "{reps} spine samples at depth {depth} (seed {seed}), wrote {}",
            out.describe()
        );
        return Ok(ExitCode::SUCCESS);
    }

    let mut trees = Vec::with_capacity(reps);
    for r in 0..reps {
        match iterate(&xi, &init, depth, mode, child_seed(seed, r as u64))? {
            IterOutcome::Tree(t) => trees.push(t),
            IterOutcome::Spine(_) => unreachable!("tree modes yield trees"),
        }
    }
    let body = if trees.len() == 1 {
        tree_json(&trees[0])?
    } else {
        let mut buf = Vec::new();
        write_trees(&mut buf, &trees)?;
        String::from_utf8(buf).expect("serializer emits utf-8")
    };
    out.write(&body)?;
    eprintln!(
        "{} tree sample(s) at depth {depth} (seed {seed}), wrote {}",
        trees.len(),
        out.describe()
    );
    Ok(ExitCode::SUCCESS)
}

fn rde_martingale(a: MartingaleArgs, cfg: &Config) -> Result<ExitCode> {
    cfg.check_keys(&["xi", "depth", "reps", "seed", "threads", "out"])?;
    let seed = or_default(a.seed, cfg.u64("seed"), 0)?;
    let xi = parse_xi_spec(&need(a.xi, cfg.string("xi"), "xi")?, seed)?;
    let depth = need(a.depth, cfg.usize("depth"), "depth")?;
    let reps = need(a.reps, cfg.usize("reps"), "reps")?;
    let threads = or_default(a.threads, cfg.usize("threads"), default_threads())?;
    let out = OutTarget::resolve(a.out, cfg)?;

    let report = spine_martingale(&xi, depth, reps, seed, threads)?;
    let pass = report.all_pass();
    out.write(&report.to_csv())?;
    eprintln!(
        "martingale to depth {depth} over {reps} replicates (seed {seed}): {}, wrote {}",
        if pass { "all rows pass" } else { "ROWS FAILED" },
        out.describe()
    );
    Ok(if pass { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn rde_attract(a: AttractArgs, cfg: &Config) -> Result<ExitCode> {
    cfg.check_keys(&["xi", "init", "depth", "reps", "seed", "threads", "out"])?;
    let seed = or_default(a.seed, cfg.u64("seed"), 0)?;
    let xi = parse_xi_spec(&need(a.xi, cfg.string("xi"), "xi")?, seed)?;
    let init = parse_init_spec(&need(a.init, cfg.string("init"), "init")?)?;
    let depth = need(a.depth, cfg.usize("depth"), "depth")?;
    let reps = need(a.reps, cfg.usize("reps"), "reps")?;
    let threads = or_default(a.threads, cfg.usize("threads"), default_threads())?;
    let out = OutTarget::resolve(a.out, cfg)?;

    let report = attraction_experiment(&xi, &init, depth, reps, seed, threads)?;
    let pass = report.all_pass();
    out.write(&report.to_csv())?;
    eprintln!(
        "attraction at depth {depth} over {reps} replicates (seed {seed}): {}, wrote {}",
        if pass { "all rows pass" } else { "ROWS FAILED" },
        out.describe()
    );
    Ok(if pass { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn rde_string(a: StringArgs, cfg: &Config) -> Result<ExitCode> {
    cfg.check_keys(&["xi", "init", "m", "levels", "seed", "out"])?;
    let seed = or_default(a.seed, cfg.u64("seed"), 0)?;
    let xi = parse_xi_spec(&need(a.xi, cfg.string("xi"), "xi")?, seed)?;
    let init_spec = or_default(a.init, cfg.string("init"), "segment:1.0".into())?;
    let init = parse_init_spec(&init_spec)?;
    let m = need(a.m, cfg.usize("m"), "m")?;
    let levels = or_default(a.levels, cfg.usize("levels"), 0)?;
    let out = OutTarget::resolve(a.out, cfg)?;

    let t = grow_from_string(&xi, &init, m, levels, seed)?;
    out.write(&tree_json(&t)?)?;
    let stats = t.stats();
    eprintln!(
        "string depth {m}, {levels} bead levels (seed {seed}): {} nodes, height {:.6}, wrote {}",
        t.len(),
        stats.height,
        out.describe()
    );
    Ok(ExitCode::SUCCESS)
}

fn verify(a: VerifyArgs, cfg: &Config) -> Result<ExitCode> {
    cfg.check_keys(&["suite", "check", "seed", "threads", "retry_once", "out"])?;
    let seed = or_default(a.seed, cfg.u64("seed"), 42)?;
    let threads = or_default(a.threads, cfg.usize("threads"), default_threads())?;
    let retry = a.retry_once || cfg.bool("retry_once")?.unwrap_or(false);
    let check = match a.check {
        Some(c) => Some(c),
        None => cfg.usize("check")?,
    };
    let out = OutTarget::resolve(a.out, cfg)?;

    let reports: Vec<StatReport> = match check {
        Some(id) => {
            if a.suite.is_some() {
                return Err(Error::Config("--check and --suite are mutually exclusive".into()));
            }
            let report = if retry {
                run_check_with_retry(id, seed, threads)?.0
            } else {
                run_check(id, seed, threads)?
            };
            vec![report]
        }
        None => {
            let suite: Suite =
                or_default(a.suite, cfg.string("suite"), "full".into())?.parse()?;
            stable_rde::verify::run_suite(suite, seed, threads, retry)?
        }
    };

    let mut csv = String::new();
    for (i, report) in reports.iter().enumerate() {
        let body = report.to_csv();
        let mut lines = body.lines();
        if i == 0 {
            if let Some(header) = lines.next() {
                csv.push_str(header);
                csv.push('\n');
            }
        } else {
            lines.next();
        }
        for line in lines {
            csv.push_str(line);
            csv.push('\n');
        }
    }
    out.write(&csv)?;

    let pass = reports.iter().all(|r| r.all_pass());
    let named: Vec<&str> = reports.iter().map(|r| r.name.as_str()).collect();
    let total = CHECKS.len();
    eprintln!(
        "ran {}/{} checks (seed {seed}{}): {}",
        named.len(),
        total,
        if retry { ", retry once" } else { "" },
        if pass { "all pass" } else { "FAILURES" }
    );
    Ok(if pass { ExitCode::SUCCESS } else { ExitCode::from(1) })
}
