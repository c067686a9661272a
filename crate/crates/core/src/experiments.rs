//! Seeded Monte Carlo experiments: algorithm rosters, regret curves at a
//! checkpoint grid, CSV output, and the empirical check of the regret
//! decomposition of a restarting doubling trick.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use thiserror::Error;

use crate::environment::{
    make_problem, run_single, BanditInstance, EnvironmentError, ProblemSpec, RewardFamily,
    StreamKey, StreamRole,
};
use crate::meta::{MetaError, MetaPolicy, PolicySpec, RestartMode};
use crate::policies::{BanditPolicy, IndexPolicy, PolicyError, PolicyKind};
use crate::sequences::{DoublingSequence, SequenceError, SequenceKind, Term};
use crate::theory::lai_robbins_curve;

pub const DEFAULT_ARMS: usize = 9;
pub const DEFAULT_HORIZON: u64 = 10_000;
pub const DEFAULT_REPETITIONS: u64 = 100;
pub const DEFAULT_T0: u64 = 200;
pub const FULL_HORIZON: u64 = 45_678;
pub const FULL_REPETITIONS: u64 = 1000;

/// Number of log-spaced points in every checkpoint grid.
pub const GRID_POINTS: usize = 200;

/// Longest standalone segment run accepted by [`decomposition_check`].
pub const MAX_SEGMENT_RUN: u64 = 100_000_000;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("cannot parse algorithm `{spec}`: {reason}")]
    BadAlgorithm { spec: String, reason: String },
    #[error("invalid experiment: {0}")]
    InvalidConfig(String),
    #[error("segment {index} has length {length}, too long to simulate")]
    SegmentTooLong { index: u64, length: Term },
    #[error(transparent)]
    Environment(#[from] EnvironmentError),
    #[error(transparent)]
    Meta(#[from] MetaError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Sequence(#[from] SequenceError),
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Wrapper {
    /// The base policy alone, told the horizon when it needs one.
    Plain,
    DoublingTrick {
        mode: RestartMode,
        sequence: DoublingSequence,
    },
}

/// One entry of an experiment roster.
///
/// Textual form: `NAME`, `DT(NAME, geometric, t0=.., b=..)`,
/// `DT(NAME, exponential, t0=.., a=.., b=..)`, or the same with `DTnr`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlgorithmSpec {
    pub base: PolicyKind,
    pub wrapper: Wrapper,
}

impl AlgorithmSpec {
    pub fn plain(base: PolicyKind) -> Self {
        Self {
            base,
            wrapper: Wrapper::Plain,
        }
    }

    pub fn doubling(base: PolicyKind, mode: RestartMode, sequence: DoublingSequence) -> Self {
        Self {
            base,
            wrapper: Wrapper::DoublingTrick { mode, sequence },
        }
    }

    pub fn sequence(&self) -> Option<&DoublingSequence> {
        match &self.wrapper {
            Wrapper::Plain => None,
            Wrapper::DoublingTrick { sequence, .. } => Some(sequence),
        }
    }

    /// File-name-safe identifier, unique per distinct spec.
    pub fn slug(&self) -> String {
        match &self.wrapper {
            Wrapper::Plain => self.base.name().to_string(),
            Wrapper::DoublingTrick { mode, sequence } => {
                let mut slug = format!(
                    "{}-{}-{}-t0-{}",
                    mode.to_string().to_lowercase(),
                    self.base,
                    sequence.kind(),
                    sequence.t0()
                );
                if let Some(a) = sequence.a() {
                    slug.push_str(&format!("-a-{a}"));
                }
                slug.push_str(&format!("-b-{}", sequence.b()));
                slug
            }
        }
    }

    /// A fresh policy for a run of `horizon` steps.
    pub fn instantiate(
        &self,
        n_arms: usize,
        horizon: u64,
        variance: f64,
        key: StreamKey,
    ) -> Result<Box<dyn BanditPolicy + Send>, ExperimentError> {
        match &self.wrapper {
            Wrapper::Plain => {
                let known = self.base.requires_horizon().then_some(horizon);
                let policy = IndexPolicy::new(self.base, n_arms, known, variance, key.rng(0))?;
                Ok(Box::new(policy))
            }
            Wrapper::DoublingTrick { mode, sequence } => {
                let factory = PolicySpec::new(self.base, n_arms, variance, key)?;
                Ok(Box::new(MetaPolicy::new(factory, *sequence, *mode)?))
            }
        }
    }
}

impl fmt::Display for AlgorithmSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.wrapper {
            Wrapper::Plain => write!(f, "{}", self.base),
            Wrapper::DoublingTrick { mode, sequence } => {
                write!(f, "{mode}({}, {}, t0={}", self.base, sequence.kind(), sequence.t0())?;
                if let Some(a) = sequence.a() {
                    write!(f, ", a={a}")?;
                }
                write!(f, ", b={})", sequence.b())
            }
        }
    }
}

impl FromStr for AlgorithmSpec {
    type Err = ExperimentError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let fail = |reason: &str| ExperimentError::BadAlgorithm {
            spec: text.to_string(),
            reason: reason.to_string(),
        };
        let trimmed = text.trim();
        let Some(open) = trimmed.find('(') else {
            let base = trimmed.parse::<PolicyKind>().map_err(|e| fail(&e.to_string()))?;
            return Ok(Self::plain(base));
        };
        let mode = match trimmed[..open].trim() {
            "DT" => RestartMode::Restart,
            "DTnr" => RestartMode::NoRestart,
            other => return Err(fail(&format!("unknown wrapper `{other}`, expected DT or DTnr"))),
        };
        let inner = trimmed[open + 1..]
            .strip_suffix(')')
            .ok_or_else(|| fail("missing closing parenthesis"))?;
        let parts: Vec<&str> = inner.split(',').map(str::trim).collect();
        if parts.len() < 2 {
            return Err(fail("expected a policy name and a sequence kind"));
        }
        let base = parts[0].parse::<PolicyKind>().map_err(|e| fail(&e.to_string()))?;
        let (mut t0, mut a, mut b) = (None, None, None);
        for param in &parts[2..] {
            let (key, value) = param
                .split_once('=')
                .ok_or_else(|| fail(&format!("expected key=value, got `{param}`")))?;
            let value = value.trim();
            match key.trim() {
                "t0" => t0 = Some(value.parse::<u64>().map_err(|_| fail("t0 must be a positive integer"))?),
                "a" => a = Some(value.parse::<f64>().map_err(|_| fail("a must be a number"))?),
                "b" => b = Some(value.parse::<f64>().map_err(|_| fail("b must be a number"))?),
                other => return Err(fail(&format!("unknown parameter `{other}`"))),
            }
        }
        let t0 = t0.ok_or_else(|| fail("missing t0"))?;
        let b = b.ok_or_else(|| fail("missing b"))?;
        let sequence = match parts[1] {
            "geometric" => {
                if a.is_some() {
                    return Err(fail("the geometric sequence takes no `a`"));
                }
                DoublingSequence::geometric(t0, b)
            }
            "exponential" => DoublingSequence::exponential(t0, a.ok_or_else(|| fail("missing a"))?, b),
            other => return Err(fail(&format!("unknown sequence `{other}`"))),
        }
        .map_err(|e| fail(&e.to_string()))?;
        Ok(Self::doubling(base, mode, sequence))
    }
}

/// The roster of the desk-scale Bernoulli figure: the known-horizon
/// KL-UCB++ and its geometric and exponential doubling tricks.
pub fn default_roster() -> Vec<AlgorithmSpec> {
    let geometric = DoublingSequence::geometric(DEFAULT_T0, 2.0).expect("valid sequence");
    let exponential = DoublingSequence::exponential(DEFAULT_T0, DEFAULT_T0 as f64, 2.0).expect("valid sequence");
    vec![
        AlgorithmSpec::plain(PolicyKind::KlUcbPlusPlus),
        AlgorithmSpec::doubling(PolicyKind::KlUcbPlusPlus, RestartMode::Restart, exponential),
        AlgorithmSpec::doubling(PolicyKind::KlUcbPlusPlus, RestartMode::Restart, geometric),
        AlgorithmSpec::plain(PolicyKind::KlUcb),
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub n_arms: usize,
    pub horizon: u64,
    pub repetitions: u64,
    pub master_seed: u64,
    pub problem: ProblemSpec,
    pub algorithms: Vec<AlgorithmSpec>,
    pub output_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n_arms: DEFAULT_ARMS,
            horizon: DEFAULT_HORIZON,
            repetitions: DEFAULT_REPETITIONS,
            master_seed: 0,
            problem: ProblemSpec::EvenlySpaced,
            algorithms: default_roster(),
            output_dir: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        let invalid = |m: String| Err(ExperimentError::InvalidConfig(m));
        if self.n_arms < 2 {
            return invalid(format!("K = {} but at least 2 arms are needed", self.n_arms));
        }
        if self.repetitions == 0 {
            return invalid("n must be at least 1".into());
        }
        if self.horizon < self.n_arms as u64 {
            return invalid(format!("T = {} is smaller than K = {}", self.horizon, self.n_arms));
        }
        if self.algorithms.is_empty() {
            return invalid("no algorithms".into());
        }
        let mut slugs = BTreeSet::new();
        for algorithm in &self.algorithms {
            if !slugs.insert(algorithm.slug()) {
                return invalid(format!("algorithm {algorithm} is listed twice"));
            }
        }
        if let ProblemSpec::Fixed { means, .. } = &self.problem {
            if means.len() != self.n_arms {
                return invalid(format!("{} means given for K = {}", means.len(), self.n_arms));
            }
        }
        Ok(())
    }

    /// The instance shared by every repetition, if the problem is fixed.
    pub fn fixed_instance(&self) -> Result<Option<BanditInstance>, ExperimentError> {
        if !self.problem.is_fixed() {
            return Ok(None);
        }
        let mut unused = StreamKey::new(self.master_seed, 0, StreamRole::Problem).rng(0);
        Ok(Some(make_problem(&self.problem, self.n_arms, &mut unused)?))
    }

    fn instance_for(&self, fixed: &Option<BanditInstance>, repetition: u64) -> Result<BanditInstance, ExperimentError> {
        match fixed {
            Some(instance) => Ok(instance.clone()),
            None => {
                let mut rng = StreamKey::new(self.master_seed, repetition, StreamRole::Problem).rng(0);
                Ok(make_problem(&self.problem, self.n_arms, &mut rng)?)
            }
        }
    }
}

/// Times at which regret is recorded: `1`, `T`, [`GRID_POINTS`] log-spaced
/// times, and every restart boundary `T_i` and `T_i + 1` up to `T`.
pub fn checkpoint_grid(horizon: u64, sequences: &[DoublingSequence]) -> Vec<u64> {
    let mut grid = BTreeSet::from([1, horizon.max(1)]);
    let top = (horizon.max(1) as f64).ln();
    for j in 0..GRID_POINTS {
        let t = (top * j as f64 / (GRID_POINTS - 1) as f64).exp().round() as u64;
        grid.insert(t.clamp(1, horizon.max(1)));
    }
    for sequence in sequences {
        let mut i = 0;
        while let Some(term) = sequence.term(i).finite() {
            if term > horizon {
                break;
            }
            grid.insert(term);
            if term < horizon {
                grid.insert(term + 1);
            }
            i += 1;
        }
    }
    grid.into_iter().collect()
}

/// Mean cumulative regret of one algorithm over the repetitions.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretCurve {
    pub id: String,
    pub slug: String,
    pub times: Vec<u64>,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    pub n: u64,
}

impl RegretCurve {
    pub fn final_mean(&self) -> f64 {
        *self.mean.last().expect("non-empty grid")
    }

    pub fn final_stderr(&self) -> f64 {
        *self.stderr.last().expect("non-empty grid")
    }

    /// Mean and standard error at checkpoint `t`, if it is on the grid.
    pub fn at(&self, t: u64) -> Option<(f64, f64)> {
        let i = self.times.binary_search(&t).ok()?;
        Some((self.mean[i], self.stderr[i]))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub curves: Vec<RegretCurve>,
    /// `(t, C log t)` on the checkpoint grid, for fixed problems.
    pub lower_bound: Option<(Vec<u64>, Vec<f64>)>,
}

/// Sample mean and standard error of the mean, summed in the given order.
pub fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let squares: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, (squares / (n - 1.0) / n).sqrt())
}

/// Cumulative regret at `checkpoints` of one algorithm in one repetition.
/// Rewards come from the repetition's shared stream, so every algorithm of a
/// roster faces the same draws for the same queries.
pub fn run_repetition(
    algorithm: &AlgorithmSpec,
    instance: &BanditInstance,
    horizon: u64,
    master_seed: u64,
    repetition: u64,
    checkpoints: &[u64],
) -> Result<Vec<f64>, ExperimentError> {
    let key = StreamKey::new(master_seed, repetition, StreamRole::Tiebreak);
    let mut policy = algorithm.instantiate(instance.n_arms(), horizon, instance.variance(), key)?;
    let mut rewards = StreamKey::new(master_seed, repetition, StreamRole::Rewards).rng(0);
    Ok(run_single(&mut policy, instance, horizon, &mut rewards, checkpoints)?.regret)
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult, ExperimentError> {
    config.validate()?;
    let sequences: Vec<DoublingSequence> = config.algorithms.iter().filter_map(|a| a.sequence().copied()).collect();
    let checkpoints = checkpoint_grid(config.horizon, &sequences);
    let fixed = config.fixed_instance()?;

    // runs[r][algorithm][checkpoint]
    let runs: Vec<Vec<Vec<f64>>> = (0..config.repetitions)
        .into_par_iter()
        .map(|r| {
            let instance = config.instance_for(&fixed, r)?;
            config
                .algorithms
                .iter()
                .map(|algorithm| run_repetition(algorithm, &instance, config.horizon, config.master_seed, r, &checkpoints))
                .collect()
        })
        .collect::<Result<_, ExperimentError>>()?;

    let mut column = vec![0.0; runs.len()];
    let curves = config
        .algorithms
        .iter()
        .enumerate()
        .map(|(a, algorithm)| {
            let mut mean = Vec::with_capacity(checkpoints.len());
            let mut stderr = Vec::with_capacity(checkpoints.len());
            for c in 0..checkpoints.len() {
                for (slot, run) in column.iter_mut().zip(&runs) {
                    *slot = run[a][c];
                }
                let (m, s) = mean_and_stderr(&column);
                mean.push(m);
                stderr.push(s);
            }
            RegretCurve {
                id: algorithm.to_string(),
                slug: algorithm.slug(),
                times: checkpoints.clone(),
                mean,
                stderr,
                n: config.repetitions,
            }
        })
        .collect();

    let lower_bound = match &fixed {
        Some(instance) if instance.n_best() == 1 => {
            let bound = lai_robbins_curve(instance, &checkpoints).expect("single best arm");
            Some((checkpoints.clone(), bound))
        }
        _ => None,
    };
    Ok(ExperimentResult { curves, lower_bound })
}

/// `x` with 10 significant digits, in the style of C's `%.10g`.
pub fn format_significant(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let scientific = format!("{x:.9e}");
    let (mantissa, exponent) = scientific.split_once('e').expect("exponent present");
    let exponent: i32 = exponent.parse().expect("integer exponent");
    if !(-4..10).contains(&exponent) {
        let mantissa = trim_fraction(mantissa);
        let sign = if exponent < 0 { '-' } else { '+' };
        return format!("{mantissa}e{sign}{:02}", exponent.abs());
    }
    let decimals = (9 - exponent).max(0) as usize;
    trim_fraction(&format!("{x:.decimals$}")).to_string()
}

fn trim_fraction(text: &str) -> &str {
    if text.contains('.') {
        text.trim_end_matches('0').trim_end_matches('.')
    } else {
        text
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), ExperimentError> {
    let io_error = |source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut file = fs::File::create(path).map_err(io_error)?;
    file.write_all(contents.as_bytes()).map_err(io_error)
}

pub fn curve_csv(curve: &RegretCurve) -> String {
    let mut out = String::from("t,mean_regret,stderr,n\n");
    for ((t, m), s) in curve.times.iter().zip(&curve.mean).zip(&curve.stderr) {
        out.push_str(&format!("{t},{},{},{}\n", format_significant(*m), format_significant(*s), curve.n));
    }
    out
}

pub fn lower_bound_csv(times: &[u64], bound: &[f64]) -> String {
    let mut out = String::from("t,bound\n");
    for (t, b) in times.iter().zip(bound) {
        out.push_str(&format!("{t},{}\n", format_significant(*b)));
    }
    out
}

/// The configuration as `key = value` lines, readable back by the CLI.
pub fn config_echo(config: &ExperimentConfig) -> String {
    let mut lines = vec![
        format!("K = {}", config.n_arms),
        format!("T = {}", config.horizon),
        format!("n = {}", config.repetitions),
        format!("seed = {}", config.master_seed),
        format!("problem = {}", config.problem.name()),
    ];
    match &config.problem {
        ProblemSpec::Fixed { family, means, variance } => {
            let means: Vec<String> = means.iter().map(|m| m.to_string()).collect();
            lines.push(format!("means = {}", means.join(", ")));
            lines.push(format!("family = {family}"));
            if *family == RewardFamily::Gaussian {
                lines.push(format!("V = {variance}"));
            }
        }
        ProblemSpec::UniformGaussian { variance, .. } => {
            lines.push(format!("family = {}", RewardFamily::Gaussian));
            lines.push(format!("V = {variance}"));
        }
        ProblemSpec::EvenlySpaced | ProblemSpec::UniformBernoulli => {
            lines.push(format!("family = {}", RewardFamily::Bernoulli));
        }
    }
    let algorithms: Vec<String> = config.algorithms.iter().map(|a| a.to_string()).collect();
    lines.push(format!("algorithms = {}", algorithms.join("; ")));
    if let Some(dir) = &config.output_dir {
        lines.push(format!("output_dir = {}", dir.display()));
    }
    lines.join("\n") + "\n"
}

/// Writes one CSV per curve, `config.txt`, and `lower_bound.csv` when
/// available; returns the written paths.
pub fn write_outputs(
    config: &ExperimentConfig,
    result: &ExperimentResult,
    dir: &Path,
) -> Result<Vec<PathBuf>, ExperimentError> {
    fs::create_dir_all(dir).map_err(|source| ExperimentError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut written = Vec::new();
    for curve in &result.curves {
        let path = dir.join(format!("{}.csv", curve.slug));
        write_file(&path, &curve_csv(curve))?;
        written.push(path);
    }
    let path = dir.join("config.txt");
    write_file(&path, &config_echo(config))?;
    written.push(path);
    if let Some((times, bound)) = &result.lower_bound {
        let path = dir.join("lower_bound.csv");
        write_file(&path, &lower_bound_csv(times, bound))?;
        written.push(path);
    }
    Ok(written)
}

/// Runs the experiment and writes its files when `output_dir` is set.
pub fn run_and_write(config: &ExperimentConfig) -> Result<(ExperimentResult, Vec<PathBuf>), ExperimentError> {
    let result = run_experiment(config)?;
    let written = match &config.output_dir {
        Some(dir) => write_outputs(config, &result, dir)?,
        None => Vec::new(),
    };
    Ok((result, written))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentEstimate {
    pub index: u64,
    pub length: u64,
    pub mean: f64,
    pub stderr: f64,
}

/// Restarting doubling trick against the sum of standalone segment regrets:
/// `R_T(DT) <= sum_{i=0}^{L_T} R_{T_i - T_{i-1}}` and
/// `R_T(DT) >= sum_{i=0}^{L_T - 1} R_{T_i - T_{i-1}}`, each up to three
/// combined standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionReport {
    pub horizon: u64,
    pub last_term: u64,
    pub repetitions: u64,
    pub dt_mean: f64,
    pub dt_stderr: f64,
    pub segments: Vec<SegmentEstimate>,
    pub upper_sum: f64,
    pub upper_stderr: f64,
    pub lower_sum: f64,
    pub lower_stderr: f64,
}

pub const DECOMPOSITION_SIGMAS: f64 = 3.0;

impl DecompositionReport {
    /// `upper_sum + 3 se - dt_mean`; non-negative when the upper bound holds.
    pub fn upper_margin(&self) -> f64 {
        self.upper_sum + DECOMPOSITION_SIGMAS * self.upper_stderr - self.dt_mean
    }

    /// `dt_mean - (lower_sum - 3 se)`; non-negative when the lower bound holds.
    pub fn lower_margin(&self) -> f64 {
        self.dt_mean - (self.lower_sum - DECOMPOSITION_SIGMAS * self.lower_stderr)
    }

    pub fn upper_holds(&self) -> bool {
        self.upper_margin() >= 0.0
    }

    pub fn lower_holds(&self) -> bool {
        self.lower_margin() >= 0.0
    }

    pub fn passed(&self) -> bool {
        self.upper_holds() && self.lower_holds()
    }
}

fn final_regrets<F>(repetitions: u64, run: F) -> Result<Vec<f64>, ExperimentError>
where
    F: Fn(u64) -> Result<f64, ExperimentError> + Sync + Send,
{
    (0..repetitions).into_par_iter().map(run).collect()
}

pub fn decomposition_check(
    base: PolicyKind,
    sequence: DoublingSequence,
    instance: &BanditInstance,
    horizon: u64,
    repetitions: u64,
    seed: u64,
) -> Result<DecompositionReport, ExperimentError> {
    if horizon == 0 {
        return Err(EnvironmentError::ZeroHorizon.into());
    }
    if repetitions == 0 {
        return Err(ExperimentError::InvalidConfig("n must be at least 1".into()));
    }
    let last_term = sequence.last_term_closed(horizon);
    let mut lengths = Vec::new();
    for i in 0..=last_term {
        let length = sequence.segment_length(i);
        match length.finite() {
            Some(l) if l <= MAX_SEGMENT_RUN => lengths.push(l),
            _ => return Err(ExperimentError::SegmentTooLong { index: i, length }),
        }
    }
    let n_arms = instance.n_arms();
    let variance = instance.variance();

    let wrapped = AlgorithmSpec::doubling(base, RestartMode::Restart, sequence);
    let dt = final_regrets(repetitions, |r| {
        let regret = run_repetition(&wrapped, instance, horizon, seed, r, &[horizon])?;
        Ok(regret[0])
    })?;
    let (dt_mean, dt_stderr) = mean_and_stderr(&dt);

    let mut segments = Vec::with_capacity(lengths.len());
    for (i, &length) in lengths.iter().enumerate() {
        let salt = 1 + i as u64;
        let finals = final_regrets(repetitions, |r| {
            let key = StreamKey::new(seed, r, StreamRole::Tiebreak).with_salt(salt);
            let mut policy = IndexPolicy::new(base, n_arms, Some(length), variance, key.rng(0))?;
            let mut rewards = StreamKey::new(seed, r, StreamRole::Rewards).with_salt(salt).rng(0);
            Ok(run_single(&mut policy, instance, length, &mut rewards, &[length])?.regret[0])
        })?;
        let (mean, stderr) = mean_and_stderr(&finals);
        segments.push(SegmentEstimate {
            index: i as u64,
            length,
            mean,
            stderr,
        });
    }

    let sum = |range: &[SegmentEstimate]| {
        let mean: f64 = range.iter().map(|s| s.mean).sum();
        let variance: f64 = dt_stderr * dt_stderr + range.iter().map(|s| s.stderr * s.stderr).sum::<f64>();
        (mean, variance.sqrt())
    };
    let (upper_sum, upper_stderr) = sum(&segments);
    let (lower_sum, lower_stderr) = sum(&segments[..last_term as usize]);
    Ok(DecompositionReport {
        horizon,
        last_term,
        repetitions,
        dt_mean,
        dt_stderr,
        segments,
        upper_sum,
        upper_stderr,
        lower_sum,
        lower_stderr,
    })
}

/// Sequences of kind `kind` used by the figures, with `T0 = 200`.
pub fn figure_sequence(kind: SequenceKind) -> DoublingSequence {
    match kind {
        SequenceKind::Geometric => DoublingSequence::geometric(DEFAULT_T0, 2.0),
        SequenceKind::Exponential => DoublingSequence::exponential(DEFAULT_T0, DEFAULT_T0 as f64, 2.0),
    }
    .expect("valid sequence")
}
