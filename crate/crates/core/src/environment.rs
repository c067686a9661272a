//! Stochastic reward models, problem generation and single-run simulation.
//!
//! Regret is accumulated as the sum of gaps `mu* - mu_{A(t)}` of the played
//! arms, which has the same expectation as the reward-difference pseudo-regret
//! with far less variance.
//!
//! Every random stream is a ChaCha8 generator keyed by
//! `(master_seed, repetition, role, salt)`, so a run never depends on thread
//! scheduling and all algorithms of an experiment see the same reward stream
//! for a given repetition.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::policies::{BanditPolicy, PolicyError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvironmentError {
    #[error("a bandit instance needs at least {min} arms, got {got}")]
    TooFewArms { min: usize, got: usize },
    #[error("Bernoulli mean {0} is outside [0, 1]")]
    MeanOutOfRange(f64),
    #[error("mean {0} is not finite")]
    NonFiniteMean(f64),
    #[error("variance must be finite and > 0, got {0}")]
    InvalidVariance(f64),
    #[error("problem has {means} means but K = {k}")]
    ArmCountMismatch { means: usize, k: usize },
    #[error("policy plays {policy} arms but the instance has {instance}")]
    PolicyArmMismatch { policy: usize, instance: usize },
    #[error("horizon must be at least 1")]
    ZeroHorizon,
    #[error("checkpoints must be strictly increasing and within 1..={horizon}")]
    BadCheckpoints { horizon: u64 },
    #[error("unknown reward family `{0}` (expected bernoulli or gaussian)")]
    UnknownFamily(String),
    #[error("unknown problem `{0}` (expected evenly-spaced, uniform, uniform-gaussian or fixed)")]
    UnknownProblem(String),
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RewardFamily {
    Bernoulli,
    Gaussian,
}

impl fmt::Display for RewardFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RewardFamily::Bernoulli => f.write_str("bernoulli"),
            RewardFamily::Gaussian => f.write_str("gaussian"),
        }
    }
}

impl FromStr for RewardFamily {
    type Err = EnvironmentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "bernoulli" => Ok(RewardFamily::Bernoulli),
            "gaussian" | "normal" => Ok(RewardFamily::Gaussian),
            other => Err(EnvironmentError::UnknownFamily(other.to_string())),
        }
    }
}

/// A stochastic bandit problem: one reward distribution per arm.
#[derive(Debug, Clone, PartialEq)]
pub struct BanditInstance {
    family: RewardFamily,
    means: Vec<f64>,
    variance: f64,
    best: f64,
    gaps: Vec<f64>,
}

impl BanditInstance {
    /// `variance` is only meaningful for Gaussian arms; Bernoulli instances
    /// store `1/4`, the variance proxy of rewards in `[0, 1]`.
    pub fn new(family: RewardFamily, means: Vec<f64>, variance: f64) -> Result<Self, EnvironmentError> {
        if means.len() < 2 {
            return Err(EnvironmentError::TooFewArms {
                min: 2,
                got: means.len(),
            });
        }
        for &mu in &means {
            if !mu.is_finite() {
                return Err(EnvironmentError::NonFiniteMean(mu));
            }
            if family == RewardFamily::Bernoulli && !(0.0..=1.0).contains(&mu) {
                return Err(EnvironmentError::MeanOutOfRange(mu));
            }
        }
        let variance = match family {
            RewardFamily::Bernoulli => 0.25,
            RewardFamily::Gaussian => {
                if !(variance.is_finite() && variance > 0.0) {
                    return Err(EnvironmentError::InvalidVariance(variance));
                }
                variance
            }
        };
        let best = means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let gaps = means.iter().map(|mu| best - mu).collect();
        Ok(Self {
            family,
            means,
            variance,
            best,
            gaps,
        })
    }

    pub fn bernoulli(means: Vec<f64>) -> Result<Self, EnvironmentError> {
        Self::new(RewardFamily::Bernoulli, means, 0.25)
    }

    pub fn gaussian(means: Vec<f64>, variance: f64) -> Result<Self, EnvironmentError> {
        Self::new(RewardFamily::Gaussian, means, variance)
    }

    pub fn family(&self) -> RewardFamily {
        self.family
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn n_arms(&self) -> usize {
        self.means.len()
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    /// `mu* = max_k mu_k`.
    pub fn best(&self) -> f64 {
        self.best
    }

    pub fn gaps(&self) -> &[f64] {
        &self.gaps
    }

    /// Smallest positive gap, `None` when all arms are optimal.
    pub fn min_gap(&self) -> Option<f64> {
        self.gaps
            .iter()
            .copied()
            .filter(|&g| g > 0.0)
            .fold(None, |acc, g| Some(acc.map_or(g, |a: f64| a.min(g))))
    }

    /// Number of arms whose mean equals `mu*`.
    pub fn n_best(&self) -> usize {
        self.gaps.iter().filter(|&&g| g == 0.0).count()
    }

    pub fn sample<R: Rng + ?Sized>(&self, arm: usize, rng: &mut R) -> f64 {
        let mu = self.means[arm];
        match self.family {
            RewardFamily::Bernoulli => {
                if rng.random::<f64>() < mu {
                    1.0
                } else {
                    0.0
                }
            }
            RewardFamily::Gaussian => Normal::new(mu, self.variance.sqrt())
                .expect("validated variance")
                .sample(rng),
        }
    }
}

/// How the instance of a repetition is obtained.
#[derive(Debug, Clone, PartialEq)]
pub enum ProblemSpec {
    /// Bernoulli means `k / (K + 1)` for `k = 1..=K`.
    EvenlySpaced,
    /// Bernoulli means drawn uniformly in `[0, 1]^K`.
    UniformBernoulli,
    /// Gaussian means drawn uniformly in `[low, high]^K`.
    UniformGaussian { low: f64, high: f64, variance: f64 },
    Fixed {
        family: RewardFamily,
        means: Vec<f64>,
        variance: f64,
    },
}

impl ProblemSpec {
    /// Gaussian means uniform in `[-5, 5]` with unit variance.
    pub fn uniform_gaussian() -> Self {
        ProblemSpec::UniformGaussian {
            low: -5.0,
            high: 5.0,
            variance: 1.0,
        }
    }

    /// Whether every repetition sees the same instance.
    pub fn is_fixed(&self) -> bool {
        matches!(self, ProblemSpec::EvenlySpaced | ProblemSpec::Fixed { .. })
    }

    pub fn name(&self) -> &'static str {
        match self {
            ProblemSpec::EvenlySpaced => "evenly-spaced",
            ProblemSpec::UniformBernoulli => "uniform",
            ProblemSpec::UniformGaussian { .. } => "uniform-gaussian",
            ProblemSpec::Fixed { .. } => "fixed",
        }
    }
}

pub fn make_problem<R: Rng + ?Sized>(
    spec: &ProblemSpec,
    n_arms: usize,
    rng: &mut R,
) -> Result<BanditInstance, EnvironmentError> {
    if n_arms < 2 {
        return Err(EnvironmentError::TooFewArms {
            min: 2,
            got: n_arms,
        });
    }
    match spec {
        ProblemSpec::EvenlySpaced => {
            let means = (1..=n_arms)
                .map(|k| k as f64 / (n_arms + 1) as f64)
                .collect();
            BanditInstance::bernoulli(means)
        }
        ProblemSpec::UniformBernoulli => {
            let means = (0..n_arms).map(|_| rng.random::<f64>()).collect();
            BanditInstance::bernoulli(means)
        }
        ProblemSpec::UniformGaussian {
            low,
            high,
            variance,
        } => {
            let means = (0..n_arms)
                .map(|_| low + (high - low) * rng.random::<f64>())
                .collect();
            BanditInstance::gaussian(means, *variance)
        }
        ProblemSpec::Fixed {
            family,
            means,
            variance,
        } => {
            if means.len() != n_arms {
                return Err(EnvironmentError::ArmCountMismatch {
                    means: means.len(),
                    k: n_arms,
                });
            }
            BanditInstance::new(*family, means.clone(), *variance)
        }
    }
}

/// What a random stream is used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StreamRole {
    Rewards = 0,
    Tiebreak = 1,
    Problem = 2,
}

/// Key of a family of ChaCha8 streams for one `(seed, repetition, role)`.
///
/// Distinct keys give independent generators; [`rng`](Self::rng) selects one
/// of the 2^64 streams under the key (used for successive restarts).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    seed: [u8; 32],
}

impl StreamKey {
    pub fn new(master_seed: u64, repetition: u64, role: StreamRole) -> Self {
        let mut seed = [0u8; 32];
        seed[..8].copy_from_slice(&master_seed.to_le_bytes());
        seed[8..16].copy_from_slice(&repetition.to_le_bytes());
        seed[16..24].copy_from_slice(&(role as u64).to_le_bytes());
        Self { seed }
    }

    /// Same key in a separate namespace, for auxiliary runs that must not
    /// share randomness with the main ones.
    pub fn with_salt(mut self, salt: u64) -> Self {
        self.seed[24..].copy_from_slice(&salt.to_le_bytes());
        self
    }

    pub fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.seed);
        rng.set_stream(stream);
        rng
    }
}

/// Result of one simulated run.
#[derive(Debug, Clone, PartialEq)]
pub struct SingleRun {
    /// Cumulative pseudo-regret at each requested checkpoint.
    pub regret: Vec<f64>,
    /// Sum of the realized rewards over the whole run.
    pub total_reward: f64,
}

/// Plays `policy` on `instance` for `horizon` steps and calls `observe`
/// with `(t, arm, reward)` after each step.
pub fn simulate<P, R, F>(
    policy: &mut P,
    instance: &BanditInstance,
    horizon: u64,
    rewards: &mut R,
    mut observe: F,
) -> Result<(), EnvironmentError>
where
    P: BanditPolicy + ?Sized,
    R: Rng + ?Sized,
    F: FnMut(u64, usize, f64),
{
    if horizon == 0 {
        return Err(EnvironmentError::ZeroHorizon);
    }
    if policy.n_arms() != instance.n_arms() {
        return Err(EnvironmentError::PolicyArmMismatch {
            policy: policy.n_arms(),
            instance: instance.n_arms(),
        });
    }
    for t in 1..=horizon {
        let arm = policy.select();
        let reward = instance.sample(arm, rewards);
        policy.update(arm, reward)?;
        observe(t, arm, reward);
    }
    Ok(())
}

/// Cumulative pseudo-regret `sum_{s <= t} (mu* - mu_{A(s)})` at each
/// checkpoint (sorted, within `1..=horizon`).
pub fn run_single<P, R>(
    policy: &mut P,
    instance: &BanditInstance,
    horizon: u64,
    rewards: &mut R,
    checkpoints: &[u64],
) -> Result<SingleRun, EnvironmentError>
where
    P: BanditPolicy + ?Sized,
    R: Rng + ?Sized,
{
    let sorted = checkpoints.windows(2).all(|w| w[0] < w[1]);
    let in_range = checkpoints.iter().all(|&c| (1..=horizon).contains(&c));
    if !sorted || !in_range {
        return Err(EnvironmentError::BadCheckpoints { horizon });
    }
    let gaps = instance.gaps();
    let mut regret = Vec::with_capacity(checkpoints.len());
    let mut next = checkpoints.iter().peekable();
    let mut cumulative = 0.0;
    let mut total_reward = 0.0;
    simulate(policy, instance, horizon, rewards, |t, arm, reward| {
        cumulative += gaps[arm];
        total_reward += reward;
        if next.peek() == Some(&&t) {
            regret.push(cumulative);
            next.next();
        }
    })?;
    Ok(SingleRun {
        regret,
        total_reward,
    })
}

/// The sequence of arms played over `horizon` steps.
pub fn action_trace<P, R>(
    policy: &mut P,
    instance: &BanditInstance,
    horizon: u64,
    rewards: &mut R,
) -> Result<Vec<usize>, EnvironmentError>
where
    P: BanditPolicy + ?Sized,
    R: Rng + ?Sized,
{
    let mut trace = Vec::with_capacity(horizon as usize);
    simulate(policy, instance, horizon, rewards, |_, arm, _| trace.push(arm))?;
    Ok(trace)
}
