//! Index policies and their shared select/update lifecycle.
//!
//! Horizon-dependent (non-anytime) policies:
//!
//! * KL-UCB++, the largest `q` with `kl(mean, q) <= g(N_k, T) / N_k`;
//! * approximated finite-horizon Gittins (AFHG) for Gaussian rewards.
//!
//! Anytime baselines: KL-UCB with exploration `log t` (Bernoulli) and its
//! Gaussian counterpart UCB, plus a uniform-random control policy.
//!
//! Unpulled arms are played first in increasing arm order; after that the
//! arm with the highest index is played, ties broken uniformly at random.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::environment::RewardFamily;

/// Probabilities handed to the binary KL divergence are clamped into
/// `[KL_EPSILON, 1 - KL_EPSILON]`.
pub const KL_EPSILON: f64 = 1e-7;

/// Absolute tolerance, in `q`, of the KL-UCB bisection.
pub const BISECTION_TOLERANCE: f64 = 1e-6;

/// Iteration cap of the KL-UCB bisection.
pub const BISECTION_MAX_ITERATIONS: usize = 40;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolicyError {
    #[error("a policy needs at least one arm")]
    NoArms,
    #[error("arm {arm} out of range for {n_arms} arms")]
    ArmOutOfRange { arm: usize, n_arms: usize },
    #[error("{0} needs a known horizon")]
    MissingHorizon(PolicyKind),
    #[error("horizon must be at least 1")]
    ZeroHorizon,
    #[error("reward variance must be finite and > 0, got {0}")]
    InvalidVariance(f64),
    #[error("divergence argument is NaN")]
    NotANumber,
    #[error("reward {0} is not finite")]
    NonFiniteReward(f64),
    #[error("update received without a preceding select")]
    UpdateWithoutSelect,
    #[error("unknown policy `{0}` (expected klucbpp, afhg, klucb, ucb or random)")]
    UnknownPolicy(String),
}

/// Anything that plays a bandit game one step at a time.
pub trait BanditPolicy {
    fn n_arms(&self) -> usize;

    /// Chooses the arm to play at the next step.
    fn select(&mut self) -> usize;

    /// Feeds back the reward of the arm played at the last step.
    fn update(&mut self, arm: usize, reward: f64) -> Result<(), PolicyError>;
}

impl<P: BanditPolicy + ?Sized> BanditPolicy for Box<P> {
    fn n_arms(&self) -> usize {
        (**self).n_arms()
    }

    fn select(&mut self) -> usize {
        (**self).select()
    }

    fn update(&mut self, arm: usize, reward: f64) -> Result<(), PolicyError> {
        (**self).update(arm, reward)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PolicyKind {
    KlUcbPlusPlus,
    Afhg,
    /// Anytime KL-UCB for Bernoulli rewards.
    KlUcb,
    /// Anytime UCB, i.e. KL-UCB with the Gaussian divergence.
    Ucb,
    Random,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 5] = [
        PolicyKind::KlUcbPlusPlus,
        PolicyKind::Afhg,
        PolicyKind::KlUcb,
        PolicyKind::Ucb,
        PolicyKind::Random,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::KlUcbPlusPlus => "klucbpp",
            PolicyKind::Afhg => "afhg",
            PolicyKind::KlUcb => "klucb",
            PolicyKind::Ucb => "ucb",
            PolicyKind::Random => "random",
        }
    }

    pub fn requires_horizon(self) -> bool {
        matches!(self, PolicyKind::KlUcbPlusPlus | PolicyKind::Afhg)
    }

    /// Whether a fresh instance can be brought up to date by replaying past
    /// observations through `update`. All built-in policies are index
    /// policies that only use the horizon as a numerical parameter.
    pub fn supports_replay(self) -> bool {
        true
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = PolicyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PolicyKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| PolicyError::UnknownPolicy(s.trim().to_string()))
    }
}

/// Per-arm statistics and clock of one policy instance.
#[derive(Debug, Clone)]
pub struct PolicyState {
    counts: Vec<u64>,
    sums: Vec<f64>,
    t: u64,
    horizon: Option<u64>,
    variance: f64,
    rng: ChaCha8Rng,
}

impl PolicyState {
    pub fn new(
        n_arms: usize,
        horizon: Option<u64>,
        variance: f64,
        rng: ChaCha8Rng,
    ) -> Result<Self, PolicyError> {
        if n_arms == 0 {
            return Err(PolicyError::NoArms);
        }
        if horizon == Some(0) {
            return Err(PolicyError::ZeroHorizon);
        }
        if !(variance.is_finite() && variance > 0.0) {
            return Err(PolicyError::InvalidVariance(variance));
        }
        Ok(Self {
            counts: vec![0; n_arms],
            sums: vec![0.0; n_arms],
            t: 1,
            horizon,
            variance,
            rng,
        })
    }

    pub fn n_arms(&self) -> usize {
        self.counts.len()
    }

    /// `N_k`, pulls of each arm so far.
    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// `X_k`, cumulated reward of each arm so far.
    pub fn sums(&self) -> &[f64] {
        &self.sums
    }

    /// Local time of the next step; `counts().sum() == t() - 1`.
    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn horizon(&self) -> Option<u64> {
        self.horizon
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn mean(&self, arm: usize) -> f64 {
        self.sums[arm] / self.counts[arm] as f64
    }

    pub fn update(&mut self, arm: usize, reward: f64) -> Result<(), PolicyError> {
        if arm >= self.counts.len() {
            return Err(PolicyError::ArmOutOfRange {
                arm,
                n_arms: self.counts.len(),
            });
        }
        if !reward.is_finite() {
            return Err(PolicyError::NonFiniteReward(reward));
        }
        self.counts[arm] += 1;
        self.sums[arm] += reward;
        self.t += 1;
        Ok(())
    }

    fn first_unpulled(&self) -> Option<usize> {
        self.counts.iter().position(|&n| n == 0)
    }
}

fn clamp_probability(p: f64) -> f64 {
    p.clamp(KL_EPSILON, 1.0 - KL_EPSILON)
}

// Both arguments already clamped, so no 0 * log 0 terms remain.
fn kl_clamped(x: f64, y: f64) -> f64 {
    let value = x * (x / y).ln() + (1.0 - x) * ((1.0 - x) / (1.0 - y)).ln();
    value.max(0.0)
}

/// Binary Kullback-Leibler divergence `kl(x, y)` with both arguments
/// clamped into `[KL_EPSILON, 1 - KL_EPSILON]`.
pub fn kl_bernoulli(x: f64, y: f64) -> Result<f64, PolicyError> {
    if x.is_nan() || y.is_nan() {
        return Err(PolicyError::NotANumber);
    }
    let (x, y) = (clamp_probability(x), clamp_probability(y));
    if x == y {
        return Ok(0.0);
    }
    Ok(kl_clamped(x, y))
}

/// Gaussian divergence `(x - y)^2 / 2` (unit variance).
pub fn kl_gaussian(x: f64, y: f64) -> f64 {
    (x - y) * (x - y) / 2.0
}

/// Largest `q` in `[mean, 1 - KL_EPSILON]` with `kl(mean, q) <= budget`,
/// by bisection.
///
/// The returned value is always feasible and within [`BISECTION_TOLERANCE`]
/// of the supremum. A `mean` of 1 is capped at `1 - KL_EPSILON`.
pub fn klucb_sup_q(mean: f64, budget: f64) -> f64 {
    let x = clamp_probability(mean);
    let mut hi = 1.0 - KL_EPSILON;
    if budget.is_nan() || budget <= 0.0 {
        return x.max(mean).min(hi);
    }
    if kl_clamped(x, hi) <= budget {
        return hi;
    }
    let mut lo = x;
    for _ in 0..BISECTION_MAX_ITERATIONS {
        if hi - lo < BISECTION_TOLERANCE {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if kl_clamped(x, mid) <= budget {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo.max(mean.min(1.0 - KL_EPSILON))
}

fn log_plus(x: f64) -> f64 {
    if x > 1.0 {
        x.ln()
    } else {
        0.0
    }
}

/// Exploration function of KL-UCB++,
/// `g(n, T) = log+( T/(K n) * (1 + log+(T/(K n))^2) )`.
pub fn g_klucbpp(n: u64, horizon: u64, n_arms: usize) -> f64 {
    let ratio = horizon as f64 / (n_arms as f64 * n as f64);
    let inner = log_plus(ratio);
    log_plus(ratio * (1.0 + inner * inner))
}

/// KL-UCB++ index of a pulled arm. Requires a horizon and `N_k >= 1`.
pub fn index_klucbpp(state: &PolicyState, arm: usize) -> f64 {
    let n = state.counts[arm];
    let horizon = state.horizon.expect("KL-UCB++ index needs a horizon");
    let budget = g_klucbpp(n, horizon, state.n_arms()) / n as f64;
    klucb_sup_q(state.mean(arm), budget)
}

/// AFHG index of a pulled arm with remaining time `m = T - t + 1`.
///
/// Both logarithms are guarded: the inner `log(m / N_k)` is clamped below
/// at 1 before its square root, the outer one below at 0, and the bonus is
/// zero whenever `m <= N_k`.
pub fn index_afhg(state: &PolicyState, arm: usize) -> f64 {
    let horizon = state.horizon.expect("AFHG index needs a horizon");
    let n = state.counts[arm] as f64;
    let remaining = horizon as f64 - state.t as f64 + 1.0;
    let mean = state.mean(arm);
    if remaining <= n {
        return mean;
    }
    let ratio = remaining / n;
    let inner = ratio.ln().max(1.0);
    let outer = (remaining / (n * inner.sqrt())).ln().max(0.0);
    mean + (state.variance / n * outer).sqrt()
}

/// Anytime KL-UCB index with exploration `log t`, for the given reward
/// family. For Gaussian rewards it inverts `(x - y)^2 / (2V)` in closed form.
pub fn index_klucb_anytime(state: &PolicyState, arm: usize, family: RewardFamily) -> f64 {
    let n = state.counts[arm] as f64;
    let budget = (state.t as f64).ln().max(0.0) / n;
    let mean = state.mean(arm);
    match family {
        RewardFamily::Bernoulli => klucb_sup_q(mean, budget),
        RewardFamily::Gaussian => mean + (2.0 * state.variance * budget).sqrt(),
    }
}

/// Index of the maximum, ties broken by a uniform draw among the tied arms.
/// The generator is only consumed when there is an actual tie.
pub fn argmax_with_ties<R: Rng + ?Sized>(values: &[f64], rng: &mut R) -> usize {
    let mut best = f64::NEG_INFINITY;
    let mut tied: Vec<usize> = Vec::new();
    for (arm, &v) in values.iter().enumerate() {
        if v > best {
            best = v;
            tied.clear();
            tied.push(arm);
        } else if v == best {
            tied.push(arm);
        }
    }
    match tied.len() {
        0 => 0,
        1 => tied[0],
        n => tied[rng.random_range(0..n)],
    }
}

/// One of the built-in policies together with its state.
#[derive(Debug, Clone)]
pub struct IndexPolicy {
    kind: PolicyKind,
    state: PolicyState,
    // KL-UCB++ indexes only change for the arm that was just pulled.
    cached: Vec<Option<f64>>,
    scratch: Vec<f64>,
}

impl IndexPolicy {
    pub fn new(
        kind: PolicyKind,
        n_arms: usize,
        horizon: Option<u64>,
        variance: f64,
        rng: ChaCha8Rng,
    ) -> Result<Self, PolicyError> {
        if kind.requires_horizon() && horizon.is_none() {
            return Err(PolicyError::MissingHorizon(kind));
        }
        let state = PolicyState::new(n_arms, horizon, variance, rng)?;
        Ok(Self {
            kind,
            state,
            cached: vec![None; n_arms],
            scratch: vec![0.0; n_arms],
        })
    }

    pub fn kind(&self) -> PolicyKind {
        self.kind
    }

    pub fn state(&self) -> &PolicyState {
        &self.state
    }

    /// Index of a pulled arm; `None` for unpulled arms and for the random
    /// policy, which has no index.
    pub fn index(&self, arm: usize) -> Option<f64> {
        if self.state.counts[arm] == 0 {
            return None;
        }
        match self.kind {
            PolicyKind::KlUcbPlusPlus => Some(index_klucbpp(&self.state, arm)),
            PolicyKind::Afhg => Some(index_afhg(&self.state, arm)),
            PolicyKind::KlUcb => Some(index_klucb_anytime(
                &self.state,
                arm,
                RewardFamily::Bernoulli,
            )),
            PolicyKind::Ucb => Some(index_klucb_anytime(
                &self.state,
                arm,
                RewardFamily::Gaussian,
            )),
            PolicyKind::Random => None,
        }
    }
}

impl BanditPolicy for IndexPolicy {
    fn n_arms(&self) -> usize {
        self.state.n_arms()
    }

    fn select(&mut self) -> usize {
        if self.kind == PolicyKind::Random {
            let k = self.state.n_arms();
            return self.state.rng.random_range(0..k);
        }
        if let Some(arm) = self.state.first_unpulled() {
            return arm;
        }
        for arm in 0..self.state.n_arms() {
            let value = match (self.kind, self.cached[arm]) {
                (PolicyKind::KlUcbPlusPlus, Some(v)) => v,
                _ => {
                    let v = self.index(arm).expect("every arm has been pulled");
                    if self.kind == PolicyKind::KlUcbPlusPlus {
                        self.cached[arm] = Some(v);
                    }
                    v
                }
            };
            self.scratch[arm] = value;
        }
        argmax_with_ties(&self.scratch, &mut self.state.rng)
    }

    fn update(&mut self, arm: usize, reward: f64) -> Result<(), PolicyError> {
        self.state.update(arm, reward)?;
        self.cached[arm] = None;
        Ok(())
    }
}
