//! Command-line front end. Exit codes: 0 on success, 1 when validation or a
//! check fails, 2 on usage errors (reported by clap).

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::environment::{BanditInstance, EnvironmentError, ProblemSpec, RewardFamily};
use crate::experiments::{
    checkpoint_grid, decomposition_check, lower_bound_csv, run_and_write, AlgorithmSpec,
    ExperimentConfig, ExperimentError, FULL_HORIZON, FULL_REPETITIONS,
};
use crate::policies::PolicyKind;
use crate::sequences::{DoublingSequence, SequenceError};
use crate::theory::{
    lai_robbins_curve, loss_exponential, loss_geometric, optimal_geometric_b, validate_lemmas,
    LossQuery, TheoryError,
};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Invalid(String),
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Output(#[from] io::Error),
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
    #[error(transparent)]
    Theory(#[from] TheoryError),
    #[error(transparent)]
    Sequence(#[from] SequenceError),
    #[error(transparent)]
    Environment(#[from] EnvironmentError),
}

fn invalid<T>(message: impl Into<String>) -> Result<T, CliError> {
    Err(CliError::Invalid(message.into()))
}

#[derive(Debug, Parser)]
#[command(name = "doubling-trick", version, about = "Doubling tricks for stochastic bandits")]
pub struct Cli {
    /// Suppress human-readable output on stdout.
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a regret experiment and write its CSV files.
    Simulate(SimulateArgs),
    /// Print the terms of a doubling sequence up to its last term for T.
    Sequence(SequenceArgs),
    /// Print the constant multiplicative loss of a doubling trick.
    Losses(LossesArgs),
    /// Print the geometric rate b* minimizing the loss for a given gamma.
    OptimalB {
        #[arg(long)]
        gamma: f64,
    },
    /// Write the Lai-Robbins lower-bound curve as CSV `t,bound`.
    Bound(BoundArgs),
    /// Check the elementary inequalities behind the loss constants.
    CheckLemmas {
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Compare a restarting doubling trick with its segment-wise regrets.
    DecompositionCheck(DecompositionArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// File of `key = value` lines; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(short = 'K', long = "arms")]
    pub k: Option<usize>,
    #[arg(short = 'T', long = "horizon")]
    pub horizon: Option<u64>,
    #[arg(short = 'n', long = "repetitions")]
    pub repetitions: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// evenly-spaced, uniform, uniform-gaussian or fixed.
    #[arg(long)]
    pub problem: Option<String>,
    /// Comma-separated arm means; implies a fixed problem.
    #[arg(long)]
    pub means: Option<String>,
    #[arg(long)]
    pub family: Option<String>,
    #[arg(short = 'V', long = "variance")]
    pub variance: Option<f64>,
    /// Semicolon-separated algorithm specs.
    #[arg(long)]
    pub algorithms: Option<String>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    /// Use T = 45678 and n = 1000 unless set explicitly.
    #[arg(long)]
    pub full: bool,
}

#[derive(Debug, Args)]
pub struct SequenceSpecArgs {
    /// geometric or exponential.
    #[arg(long, default_value = "geometric")]
    pub kind: String,
    #[arg(long)]
    pub t0: u64,
    /// Exponential base, required for the exponential kind.
    #[arg(long)]
    pub a: Option<f64>,
    #[arg(long)]
    pub b: f64,
}

impl SequenceSpecArgs {
    fn build(&self) -> Result<DoublingSequence, CliError> {
        match self.kind.as_str() {
            "geometric" => {
                if self.a.is_some() {
                    return invalid("--a only applies to the exponential sequence");
                }
                Ok(DoublingSequence::geometric(self.t0, self.b)?)
            }
            "exponential" => {
                let Some(a) = self.a else {
                    return invalid("the exponential sequence needs --a");
                };
                Ok(DoublingSequence::exponential(self.t0, a, self.b)?)
            }
            other => invalid(format!("unknown sequence kind `{other}`")),
        }
    }
}

#[derive(Debug, Args)]
pub struct SequenceArgs {
    #[command(flatten)]
    pub sequence: SequenceSpecArgs,
    #[arg(long)]
    pub horizon: u64,
}

#[derive(Debug, Args)]
pub struct LossesArgs {
    /// geometric or exponential.
    #[arg(long)]
    pub family: String,
    #[arg(long)]
    pub gamma: f64,
    #[arg(long)]
    pub delta: f64,
    #[arg(long)]
    pub t0: u64,
    #[arg(long)]
    pub a: Option<f64>,
    #[arg(long)]
    pub b: f64,
}

#[derive(Debug, Args)]
pub struct BoundArgs {
    #[arg(long)]
    pub means: String,
    #[arg(long, default_value = "bernoulli")]
    pub family: RewardFamily,
    #[arg(short = 'V', long = "variance", default_value_t = 1.0)]
    pub variance: f64,
    #[arg(long)]
    pub horizon: u64,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DecompositionArgs {
    #[arg(long, default_value = "klucbpp")]
    pub policy: PolicyKind,
    #[command(flatten)]
    pub sequence: SequenceSpecArgs,
    /// Comma-separated Bernoulli means; evenly spaced means when absent.
    #[arg(long)]
    pub means: Option<String>,
    #[arg(short = 'K', long = "arms", default_value_t = 9)]
    pub k: usize,
    #[arg(long, default_value_t = 2000)]
    pub horizon: u64,
    #[arg(short = 'n', long = "repetitions", default_value_t = 500)]
    pub repetitions: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

pub fn parse_means(text: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().or_else(|_| invalid(format!("`{s}` is not a number"))))
        .collect()
}

pub fn parse_algorithms(text: &str) -> Result<Vec<AlgorithmSpec>, CliError> {
    text.split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| Ok(s.parse::<AlgorithmSpec>()?))
        .collect()
}

const CONFIG_KEYS: [&str; 10] = ["K", "T", "n", "seed", "problem", "means", "family", "V", "algorithms", "output_dir"];

/// Parses `key = value` lines; blank lines and `#` comments are skipped.
pub fn parse_config_file(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut entries = BTreeMap::new();
    for (number, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return invalid(format!("line {}: expected `key = value`", number + 1));
        };
        let key = key.trim();
        if !CONFIG_KEYS.contains(&key) {
            return invalid(format!("line {}: unknown key `{key}`", number + 1));
        }
        entries.insert(key.to_string(), value.trim().to_string());
    }
    Ok(entries)
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .parse()
        .or_else(|_| invalid(format!("invalid value `{value}` for {key}")))
}

/// Merges the config file, the `--full` preset and explicit flags, in
/// increasing order of precedence.
pub fn simulate_config(args: &SimulateArgs) -> Result<ExperimentConfig, CliError> {
    let mut file = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|source| CliError::Read {
                path: path.clone(),
                source,
            })?;
            parse_config_file(&text)?
        }
        None => BTreeMap::new(),
    };
    let mut take = |key: &str| file.remove(key);

    let mut config = ExperimentConfig::default();
    if args.full {
        config.horizon = FULL_HORIZON;
        config.repetitions = FULL_REPETITIONS;
    }
    let k = match (args.k, take("K")) {
        (Some(k), _) => Some(k),
        (None, Some(v)) => Some(parse_value("K", &v)?),
        _ => None,
    };
    if let Some(t) = args.horizon.map(Ok).or_else(|| take("T").map(|v| parse_value("T", &v))) {
        config.horizon = t?;
    }
    if let Some(n) = args.repetitions.map(Ok).or_else(|| take("n").map(|v| parse_value("n", &v))) {
        config.repetitions = n?;
    }
    if let Some(seed) = args.seed.map(Ok).or_else(|| take("seed").map(|v| parse_value("seed", &v))) {
        config.master_seed = seed?;
    }
    let means = match args.means.clone().or_else(|| take("means")) {
        Some(text) => Some(parse_means(&text)?),
        None => None,
    };
    let family: RewardFamily = match args.family.clone().or_else(|| take("family")) {
        Some(text) => text.parse()?,
        None => RewardFamily::Bernoulli,
    };
    let variance = match args.variance.map(Ok).or_else(|| take("V").map(|v| parse_value("V", &v))) {
        Some(v) => Some(v?),
        None => None,
    };
    let problem = args.problem.clone().or_else(|| take("problem"));
    if let Some(text) = args.algorithms.clone().or_else(|| take("algorithms")) {
        config.algorithms = parse_algorithms(&text)?;
    }
    if let Some(dir) = args.output_dir.clone().or_else(|| take("output_dir").map(PathBuf::from)) {
        config.output_dir = Some(dir);
    }

    let problem_name = problem.as_deref().unwrap_or(if means.is_some() { "fixed" } else { "evenly-spaced" });
    config.problem = match problem_name {
        "evenly-spaced" => ProblemSpec::EvenlySpaced,
        "uniform" => match family {
            RewardFamily::Bernoulli => ProblemSpec::UniformBernoulli,
            RewardFamily::Gaussian => ProblemSpec::uniform_gaussian(),
        },
        "uniform-gaussian" => ProblemSpec::uniform_gaussian(),
        "fixed" => {
            let Some(means) = means.clone() else {
                return invalid("a fixed problem needs means");
            };
            ProblemSpec::Fixed {
                family,
                means,
                variance: variance.unwrap_or(1.0),
            }
        }
        other => return invalid(format!("unknown problem `{other}`")),
    };
    if let (ProblemSpec::UniformGaussian { variance: v, .. }, Some(value)) = (&mut config.problem, variance) {
        *v = value;
    }
    if means.is_some() && problem_name != "fixed" {
        return invalid(format!("means are only used by the fixed problem, not `{problem_name}`"));
    }
    config.n_arms = match (k, &means) {
        (Some(k), _) => k,
        (None, Some(means)) => means.len(),
        (None, None) => config.n_arms,
    };
    config.validate()?;
    config.fixed_instance()?;
    Ok(config)
}

fn run_simulate(args: &SimulateArgs, out: &mut dyn Write) -> Result<u8, CliError> {
    let config = simulate_config(args)?;
    let (result, written) = run_and_write(&config)?;
    writeln!(
        out,
        "K = {}, T = {}, n = {}, seed = {}, problem = {}",
        config.n_arms,
        config.horizon,
        config.repetitions,
        config.master_seed,
        config.problem.name()
    )?;
    for curve in &result.curves {
        writeln!(
            out,
            "{}\tR_T = {:.4} +- {:.4}",
            curve.id,
            curve.final_mean(),
            curve.final_stderr()
        )?;
    }
    for path in written {
        writeln!(out, "wrote {}", path.display())?;
    }
    Ok(0)
}

fn run_sequence(args: &SequenceArgs, out: &mut dyn Write) -> Result<u8, CliError> {
    if args.horizon == 0 {
        return invalid("--horizon must be at least 1");
    }
    let sequence = args.sequence.build()?;
    let last = sequence.last_term_closed(args.horizon);
    for i in 0..=last {
        writeln!(out, "{i}\t{}", sequence.term(i))?;
    }
    writeln!(out, "L_T = {last}")?;
    Ok(0)
}

fn run_losses(args: &LossesArgs, out: &mut dyn Write) -> Result<u8, CliError> {
    let loss = match args.family.as_str() {
        "geometric" => {
            if args.a.is_some() {
                return invalid("--a only applies to the exponential family");
            }
            loss_geometric(&LossQuery::geometric(args.gamma, args.delta, args.t0, args.b))?
        }
        "exponential" => {
            let Some(a) = args.a else {
                return invalid("the exponential family needs --a");
            };
            loss_exponential(&LossQuery::exponential(args.gamma, args.delta, args.t0, a, args.b))?
        }
        other => return invalid(format!("unknown family `{other}`")),
    };
    writeln!(out, "{loss}")?;
    Ok(0)
}

fn run_optimal_b(gamma: f64, out: &mut dyn Write) -> Result<u8, CliError> {
    let optimum = optimal_geometric_b(gamma)?;
    writeln!(out, "b* = {}", optimum.b)?;
    writeln!(out, "residual = {:e}", optimum.residual)?;
    Ok(0)
}

fn run_bound(args: &BoundArgs, out: &mut dyn Write) -> Result<u8, CliError> {
    if args.horizon == 0 {
        return invalid("--horizon must be at least 1");
    }
    let instance = BanditInstance::new(args.family, parse_means(&args.means)?, args.variance)?;
    let times = checkpoint_grid(args.horizon, &[]);
    let bound = lai_robbins_curve(&instance, &times)?;
    let csv = lower_bound_csv(&times, &bound);
    match &args.output {
        Some(path) => fs::write(path, csv)?,
        None => out.write_all(csv.as_bytes())?,
    }
    Ok(0)
}

fn run_check_lemmas(trials: u64, seed: u64, out: &mut dyn Write) -> Result<u8, CliError> {
    let report = validate_lemmas(seed, trials)?;
    for outcome in &report.outcomes {
        let status = if outcome.violations == 0 { "ok" } else { "VIOLATED" };
        writeln!(
            out,
            "{}: {} checks, {} violations, worst margin {:e} [{status}]",
            outcome.lemma, outcome.checks, outcome.violations, outcome.worst_margin
        )?;
    }
    Ok(if report.all_hold() { 0 } else { 1 })
}

fn run_decomposition(args: &DecompositionArgs, out: &mut dyn Write) -> Result<u8, CliError> {
    let sequence = args.sequence.build()?;
    let means = match &args.means {
        Some(text) => parse_means(text)?,
        None => (1..=args.k).map(|k| k as f64 / (args.k + 1) as f64).collect(),
    };
    let instance = BanditInstance::bernoulli(means)?;
    let report = decomposition_check(args.policy, sequence, &instance, args.horizon, args.repetitions, args.seed)?;
    writeln!(out, "DT({}, {sequence}), T = {}, n = {}", args.policy, report.horizon, report.repetitions)?;
    writeln!(out, "R_T(DT) = {:.4} +- {:.4}", report.dt_mean, report.dt_stderr)?;
    for s in &report.segments {
        writeln!(out, "segment {} (length {}): {:.4} +- {:.4}", s.index, s.length, s.mean, s.stderr)?;
    }
    let verdict = |holds| if holds { "holds" } else { "FAILS" };
    writeln!(
        out,
        "upper: {:.4} <= {:.4} + 3 * {:.4}, margin {:.4} [{}]",
        report.dt_mean,
        report.upper_sum,
        report.upper_stderr,
        report.upper_margin(),
        verdict(report.upper_holds())
    )?;
    writeln!(
        out,
        "lower: {:.4} >= {:.4} - 3 * {:.4}, margin {:.4} [{}]",
        report.dt_mean,
        report.lower_sum,
        report.lower_stderr,
        report.lower_margin(),
        verdict(report.lower_holds())
    )?;
    Ok(if report.passed() { 0 } else { 1 })
}

/// Runs a parsed command and returns its exit code. Output goes to `out`
/// unless `--quiet` is set.
pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<u8, CliError> {
    let mut sink = io::sink();
    let out: &mut dyn Write = if cli.quiet { &mut sink } else { out };
    match &cli.command {
        Command::Simulate(args) => run_simulate(args, out),
        Command::Sequence(args) => run_sequence(args, out),
        Command::Losses(args) => run_losses(args, out),
        Command::OptimalB { gamma } => run_optimal_b(*gamma, out),
        Command::Bound(args) => run_bound(args, out),
        Command::CheckLemmas { trials, seed } => run_check_lemmas(*trials, *seed, out),
        Command::DecompositionCheck(args) => run_decomposition(args, out),
    }
}
