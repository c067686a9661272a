//! Closed-form constants of the doubling-trick regret bounds, and numeric
//! validators for the elementary inequalities they rest on.
//!
//! For a base algorithm with `R_T <= c T^gamma (log T)^delta`:
//!
//! * the geometric doubling trick keeps the bound up to the factor
//!   `l = l1(delta, T0, b) * l2(gamma, b)`, with
//!   `l1 = (log(T0 (b-1) + 1) / log(T0 (b-1)))^delta` and
//!   `l2 = b^gamma (b-1)^gamma / (b^gamma - 1)`;
//! * the exponential doubling trick turns `T^gamma` into `T^(b gamma)` and
//!   loses `(a/T0)^((b-1) gamma) b^(2 delta) / (b^delta - 1)` when
//!   `delta > 0`, `1 + 1 / (log(a) log(b^gamma))` when `delta = 0`.
//!
//! A geometric doubling trick applied to an algorithm with regret at least
//! `c T^gamma` suffers at least `l0(gamma, b) = (b-1)^gamma / (b^gamma (b^gamma - 1))`.

use std::fmt;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::environment::{BanditInstance, RewardFamily};
use crate::policies::kl_bernoulli;
use crate::sequences::{DoublingSequence, SequenceKind};

/// Relative slack allowed by the lemma validators.
pub const LEMMA_SLACK: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TheoryError {
    #[error("gamma = {0} is outside its domain")]
    GammaOutOfRange(f64),
    #[error("delta must be finite and >= 0, got {0}")]
    DeltaOutOfRange(f64),
    #[error("growth exponent b must be > 1, got {0}")]
    InvalidGrowth(f64),
    #[error("exponential base a must be > 1, got {0}")]
    InvalidBase(f64),
    #[error("the exponential loss needs a base a")]
    MissingBase,
    #[error("T0 must be at least 1")]
    ZeroFirstHorizon,
    #[error("the geometric loss with delta > 0 needs T0 (b - 1) > 1, got {0}")]
    DegenerateFirstSegment(f64),
    #[error("the exponential loss with delta = 0 needs gamma > 0")]
    ZeroGammaAndDelta,
    #[error("b^(gamma+1) - 2b + 1 has no root in (1 + 1e-6, 1e6) for gamma = {0}")]
    NoRootAboveOne(f64),
    #[error("the best mean is shared by {0} arms, the Lai-Robbins constant is undefined")]
    DuplicateBest(usize),
    #[error("at least one trial is needed")]
    NoTrials,
}

/// Parameters of the regret bound to conserve and of the doubling sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossQuery {
    pub gamma: f64,
    pub delta: f64,
    pub t0: u64,
    /// Exponential base; ignored by the geometric loss.
    pub a: Option<f64>,
    pub b: f64,
    /// Leading constant of the conserved bound.
    pub c: f64,
}

impl LossQuery {
    pub fn geometric(gamma: f64, delta: f64, t0: u64, b: f64) -> Self {
        Self {
            gamma,
            delta,
            t0,
            a: None,
            b,
            c: 1.0,
        }
    }

    pub fn exponential(gamma: f64, delta: f64, t0: u64, a: f64, b: f64) -> Self {
        Self {
            gamma,
            delta,
            t0,
            a: Some(a),
            b,
            c: 1.0,
        }
    }

    pub fn with_constant(mut self, c: f64) -> Self {
        self.c = c;
        self
    }

    fn check_common(&self) -> Result<(), TheoryError> {
        if !(self.gamma >= 0.0 && self.gamma < 1.0) {
            return Err(TheoryError::GammaOutOfRange(self.gamma));
        }
        if !(self.delta.is_finite() && self.delta >= 0.0) {
            return Err(TheoryError::DeltaOutOfRange(self.delta));
        }
        if !(self.b.is_finite() && self.b > 1.0) {
            return Err(TheoryError::InvalidGrowth(self.b));
        }
        if self.t0 == 0 {
            return Err(TheoryError::ZeroFirstHorizon);
        }
        Ok(())
    }

    /// Right-hand side `l c T^gamma (log T)^delta` of the conserved geometric
    /// bound, without its lower-order term.
    pub fn geometric_bound(&self, horizon: f64) -> Result<f64, TheoryError> {
        let loss = loss_geometric(self)?;
        Ok(loss * self.c * horizon.powf(self.gamma) * horizon.ln().powf(self.delta))
    }

    /// Right-hand side `l c T^(b gamma) (log T)^delta` of the exponential
    /// bound, without its lower-order term.
    pub fn exponential_bound(&self, horizon: f64) -> Result<f64, TheoryError> {
        let loss = loss_exponential(self)?;
        Ok(loss * self.c * horizon.powf(self.b * self.gamma) * horizon.ln().powf(self.delta))
    }
}

/// `l1(delta, T0, b)`, the `delta`-dependent factor of the geometric loss.
pub fn geometric_delta_factor(delta: f64, t0: u64, b: f64) -> f64 {
    if delta == 0.0 {
        return 1.0;
    }
    let first = t0 as f64 * (b - 1.0);
    ((first + 1.0).ln() / first.ln()).powf(delta)
}

/// `l2(gamma, b) = b^gamma (b-1)^gamma / (b^gamma - 1)`.
pub fn geometric_rate_factor(gamma: f64, b: f64) -> f64 {
    let bg = b.powf(gamma);
    bg * (b - 1.0).powf(gamma) / (gamma * b.ln()).exp_m1()
}

/// Constant multiplicative loss of the geometric doubling trick.
pub fn loss_geometric(q: &LossQuery) -> Result<f64, TheoryError> {
    q.check_common()?;
    if q.gamma == 0.0 {
        return Err(TheoryError::GammaOutOfRange(q.gamma));
    }
    let first = q.t0 as f64 * (q.b - 1.0);
    if q.delta > 0.0 && first <= 1.0 {
        return Err(TheoryError::DegenerateFirstSegment(first));
    }
    Ok(geometric_delta_factor(q.delta, q.t0, q.b) * geometric_rate_factor(q.gamma, q.b))
}

/// Constant multiplicative loss of the exponential doubling trick.
pub fn loss_exponential(q: &LossQuery) -> Result<f64, TheoryError> {
    q.check_common()?;
    let a = q.a.ok_or(TheoryError::MissingBase)?;
    if !(a.is_finite() && a > 1.0) {
        return Err(TheoryError::InvalidBase(a));
    }
    if q.delta > 0.0 {
        let head = (a / q.t0 as f64).powf((q.b - 1.0) * q.gamma);
        Ok(head * q.b.powf(2.0 * q.delta) / (q.delta * q.b.ln()).exp_m1())
    } else {
        if q.gamma == 0.0 {
            return Err(TheoryError::ZeroGammaAndDelta);
        }
        Ok(1.0 + 1.0 / (a.ln() * q.gamma * q.b.ln()))
    }
}

/// Lower-bound loss `l0(gamma, b)` of the geometric doubling trick.
pub fn lower_loss_geometric(gamma: f64, b: f64) -> Result<f64, TheoryError> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(TheoryError::GammaOutOfRange(gamma));
    }
    if !(b.is_finite() && b > 1.0) {
        return Err(TheoryError::InvalidGrowth(b));
    }
    let bg = b.powf(gamma);
    Ok((b - 1.0).powf(gamma) / (bg * (gamma * b.ln()).exp_m1()))
}

/// Minimizer of `l2(gamma, .)` found as a root of `b^(gamma+1) - 2b + 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimalBase {
    pub b: f64,
    /// `|b^(gamma+1) - 2b + 1|` at the returned `b`.
    pub residual: f64,
    pub iterations: usize,
}

const ROOT_BRACKET: (f64, f64) = (1.0 + 1e-6, 1e6);

fn optimality_polynomial(gamma: f64, b: f64) -> f64 {
    b.powf(gamma + 1.0) - 2.0 * b + 1.0
}

/// Root `b* > 1` of `b^(gamma+1) - 2b + 1 = 0`: Newton's method started at
/// `b = 3`, falling back to bisection whenever a step leaves the bracket.
pub fn optimal_geometric_b(gamma: f64) -> Result<OptimalBase, TheoryError> {
    if !gamma.is_finite() {
        return Err(TheoryError::GammaOutOfRange(gamma));
    }
    let f = |b: f64| optimality_polynomial(gamma, b);
    let df = |b: f64| (gamma + 1.0) * b.powf(gamma) - 2.0;
    let (mut lo, mut hi) = ROOT_BRACKET;
    // f(1) = 0 and f'(1) = gamma - 1, so a root above 1 exists only when f
    // dips below zero and comes back up inside the bracket.
    if !(f(lo) < 0.0 && f(hi) > 0.0) {
        return Err(TheoryError::NoRootAboveOne(gamma));
    }
    let mut b = 3.0f64.clamp(lo, hi);
    let mut iterations = 0;
    for _ in 0..500 {
        iterations += 1;
        let value = f(b);
        if value == 0.0 {
            break;
        }
        if value < 0.0 {
            lo = b;
        } else {
            hi = b;
        }
        let slope = df(b);
        let newton = b - value / slope;
        let next = if slope > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        let step = (next - b).abs();
        b = next;
        if step <= 4.0 * f64::EPSILON * b || hi - lo <= 4.0 * f64::EPSILON * b {
            break;
        }
    }
    Ok(OptimalBase {
        b,
        residual: f(b).abs(),
        iterations,
    })
}

/// `C(nu) = sum over suboptimal arms of 1 / kl(mu_k, mu*)`.
pub fn lai_robbins_constant(instance: &BanditInstance) -> Result<f64, TheoryError> {
    let n_best = instance.n_best();
    if n_best > 1 {
        return Err(TheoryError::DuplicateBest(n_best));
    }
    let best = instance.best();
    let mut total = 0.0;
    for (&mu, &gap) in instance.means().iter().zip(instance.gaps()) {
        if gap <= 0.0 {
            continue;
        }
        let divergence = match instance.family() {
            RewardFamily::Bernoulli => kl_bernoulli(mu, best).expect("finite means"),
            RewardFamily::Gaussian => gap * gap / (2.0 * instance.variance()),
        };
        total += 1.0 / divergence;
    }
    Ok(total)
}

/// Asymptotic lower bound `C(nu) log t` at each time.
pub fn lai_robbins_curve(instance: &BanditInstance, times: &[u64]) -> Result<Vec<f64>, TheoryError> {
    let constant = lai_robbins_constant(instance)?;
    Ok(times.iter().map(|&t| constant * (t as f64).ln()).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Lemma {
    /// `sum_{i<=n} f(i) b^(i delta) <= b^delta / (b^delta - 1) f(n) b^(n delta)`.
    WeightedGeometric,
    /// `sum_{i<=n} a^(gamma b^i) <= a^gamma + (1 + 1/(log a log b^gamma)) a^(gamma b^n)`.
    DoubleExponentialSum,
    /// `(x + y)^delta <= x^delta + y^delta` and `(x - y)^delta >= x^delta - y^delta`.
    SquareRoot,
    /// `log(x0 - D) / log(x0) log(x) <= log(x - D) <= log(x)` for `x >= x0`.
    LogShift,
    /// `x^gamma (log x)^delta` is non-decreasing on `[1, inf)`.
    PowerLogMonotone,
    /// A sum of `o(g)` terms over the sequence stays `o(h)`.
    DominatedSum,
}

impl Lemma {
    pub const ALL: [Lemma; 6] = [
        Lemma::WeightedGeometric,
        Lemma::DoubleExponentialSum,
        Lemma::SquareRoot,
        Lemma::LogShift,
        Lemma::PowerLogMonotone,
        Lemma::DominatedSum,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Lemma::WeightedGeometric => "weighted-geometric",
            Lemma::DoubleExponentialSum => "double-exponential-sum",
            Lemma::SquareRoot => "square-root",
            Lemma::LogShift => "log-shift",
            Lemma::PowerLogMonotone => "power-log-monotone",
            Lemma::DominatedSum => "dominated-sum",
        }
    }
}

impl fmt::Display for Lemma {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LemmaOutcome {
    pub lemma: Lemma,
    pub checks: u64,
    pub violations: u64,
    /// Smallest `(rhs - lhs) / max(|lhs|, |rhs|)` seen, negative on violation.
    pub worst_margin: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LemmaReport {
    pub outcomes: Vec<LemmaOutcome>,
}

impl LemmaReport {
    pub fn total_checks(&self) -> u64 {
        self.outcomes.iter().map(|o| o.checks).sum()
    }

    pub fn total_violations(&self) -> u64 {
        self.outcomes.iter().map(|o| o.violations).sum()
    }

    pub fn all_hold(&self) -> bool {
        self.total_violations() == 0
    }
}

struct Tally {
    lemma: Lemma,
    checks: u64,
    violations: u64,
    worst: f64,
}

impl Tally {
    fn new(lemma: Lemma) -> Self {
        Self {
            lemma,
            checks: 0,
            violations: 0,
            worst: f64::INFINITY,
        }
    }

    /// Records the check `lhs <= rhs`, up to [`LEMMA_SLACK`] relative.
    fn le(&mut self, lhs: f64, rhs: f64) {
        self.checks += 1;
        let scale = lhs.abs().max(rhs.abs());
        let margin = if scale > 0.0 { (rhs - lhs) / scale } else { 0.0 };
        if margin.is_nan() || margin < -LEMMA_SLACK {
            self.violations += 1;
        }
        self.worst = self.worst.min(if margin.is_nan() { f64::NEG_INFINITY } else { margin });
    }

    fn finish(self) -> LemmaOutcome {
        LemmaOutcome {
            lemma: self.lemma,
            checks: self.checks,
            violations: self.violations,
            worst_margin: self.worst,
        }
    }
}

fn open_unit<R: Rng>(rng: &mut R) -> f64 {
    // (0, 1]
    1.0 - rng.random::<f64>()
}

fn log_uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    (lo.ln() + (hi.ln() - lo.ln()) * rng.random::<f64>()).exp()
}

/// Non-negative, non-decreasing polynomial on `[0, inf)`.
fn random_polynomial<R: Rng>(rng: &mut R) -> [f64; 4] {
    let mut c = [0.0; 4];
    for coef in &mut c {
        if rng.random_bool(0.6) {
            *coef = rng.random::<f64>() * 3.0;
        }
    }
    if c.iter().all(|&v| v == 0.0) {
        c[0] = 1.0;
    }
    c
}

fn eval_polynomial(c: &[f64; 4], x: f64) -> f64 {
    c[0] + x * (c[1] + x * (c[2] + x * c[3]))
}

fn check_weighted_geometric<R: Rng>(rng: &mut R, tally: &mut Tally) {
    let n = rng.random_range(1..=30u32);
    let b = 1.0 + 4.0 * open_unit(rng);
    let delta = open_unit(rng);
    let poly = random_polynomial(rng);
    let ratio = (delta * b.ln()).exp();
    let lhs: f64 = (0..=n)
        .map(|i| eval_polynomial(&poly, i as f64) * ratio.powi(i as i32))
        .sum();
    let rhs = ratio / (delta * b.ln()).exp_m1() * eval_polynomial(&poly, n as f64) * ratio.powi(n as i32);
    tally.le(lhs, rhs);
}

fn check_double_exponential<R: Rng>(rng: &mut R, tally: &mut Tally) {
    let n = rng.random_range(1..=30u32);
    let a = 1.0 + 9.0 * open_unit(rng);
    // The bound needs gamma b > 1.
    let (b, gamma) = loop {
        let b = 1.0 + 4.0 * open_unit(rng);
        let gamma = open_unit(rng);
        if gamma * b > 1.0 {
            break (b, gamma);
        }
    };
    let scale = gamma * a.ln();
    let last = b.powi(n as i32);
    // Both sides divided by the last term a^(gamma b^n).
    let lhs: f64 = (0..=n)
        .map(|i| (scale * (b.powi(i as i32) - last)).exp())
        .sum();
    let rhs = (scale * (1.0 - last)).exp() + 1.0 + 1.0 / (a.ln() * gamma * b.ln());
    tally.le(lhs, rhs);
}

fn check_square_root<R: Rng>(rng: &mut R, tally: &mut Tally, trial: u64) {
    let delta = open_unit(rng);
    let draw = |rng: &mut R| {
        if rng.random_bool(0.05) {
            0.0
        } else {
            log_uniform(rng, 1e-6, 1e6)
        }
    };
    let (mut x, mut y) = if trial == 0 { (0.0, 0.0) } else { (draw(rng), draw(rng)) };
    tally.le((x + y).powf(delta), x.powf(delta) + y.powf(delta));
    if x < y {
        std::mem::swap(&mut x, &mut y);
    }
    tally.le(x.powf(delta) - y.powf(delta), (x - y).powf(delta));
}

fn check_log_shift<R: Rng>(rng: &mut R, tally: &mut Tally) {
    let x0 = log_uniform(rng, 1.001, 1e6);
    let shift = x0 * open_unit(rng) * (1.0 - 1e-9);
    let x = if rng.random_bool(0.1) {
        x0
    } else {
        x0 * (1.0 + log_uniform(rng, 1e-6, 1e6))
    };
    let lower = (x0 - shift).ln() / x0.ln() * x.ln();
    tally.le(lower, (x - shift).ln());
    tally.le((x - shift).ln(), x.ln());

    // Unit shift along a geometric sequence with T0 (b - 1) > 1.
    let (t0, b) = loop {
        let t0 = rng.random_range(1..=1000u64) as f64;
        let b = 1.0 + 4.0 * open_unit(rng);
        if t0 * (b - 1.0) > 1.0 + 1e-9 {
            break (t0, b);
        }
    };
    let first = t0 * (b - 1.0);
    let i = rng.random_range(0..=30);
    let xi = first * b.powi(i);
    tally.le((first - 1.0).ln() / first.ln() * xi.ln(), (xi - 1.0).ln());
}

fn check_power_log<R: Rng>(rng: &mut R, tally: &mut Tally) {
    let gamma = rng.random::<f64>();
    let delta = open_unit(rng);
    let x1 = if rng.random_bool(0.05) { 1.0 } else { log_uniform(rng, 1.0, 1e8) };
    let x2 = x1 * (1.0 + log_uniform(rng, 1e-9, 10.0));
    let f = |x: f64| x.powf(gamma) * x.ln().powf(delta);
    tally.le(f(x1), f(x2));
}

fn check_dominated_sum<R: Rng>(rng: &mut R, tally: &mut Tally) {
    // f(t) = t^(gamma/2) = eps(t) g(t) with eps(t) = t^(-gamma/2), g = h = t^gamma.
    let gamma = 0.05 + 0.95 * open_unit(rng);
    let eta = 0.01 + 0.49 * rng.random::<f64>();
    let threshold = eta.powf(-2.0 / gamma);
    let f = |t: f64| t.powf(gamma / 2.0);
    let g = |t: f64| t.powf(gamma);

    let geometric = rng.random_bool(0.5);
    let t0 = rng.random_range(1..=1000u64);
    let b = 1.1 + 3.9 * open_unit(rng);
    let sequence = if geometric {
        DoublingSequence::geometric(t0, b).expect("valid parameters")
    } else {
        let a = 1.5 + 298.5 * rng.random::<f64>();
        DoublingSequence::exponential(t0, a, b).expect("valid parameters")
    };
    // Redrawn until the last term T_{L_T} is below the saturation ceiling.
    let (horizon, last) = loop {
        let horizon = log_uniform(rng, 1.0, 1e12).round().max(1.0) as u64;
        let last = sequence.last_term_closed(horizon);
        if !sequence.term(last).is_saturated() {
            break (horizon, last);
        }
    };
    let terms: Vec<f64> = (0..=last)
        .map(|i| sequence.term(i).finite().expect("T below the ceiling") as f64)
        .collect();
    let sum_f: f64 = terms.iter().map(|&t| f(t)).sum();
    let sum_g: f64 = terms.iter().map(|&t| g(t)).sum();
    let below = terms.iter().filter(|&&t| t < threshold).count() as f64;

    // Splitting the sum at the first term past the threshold.
    tally.le(sum_f, below * f(threshold) + eta * sum_g);

    if sequence.kind() == SequenceKind::Geometric {
        let bg = b.powf(gamma);
        let c = bg / (bg - 1.0) * (2.0 * b).max(t0 as f64).powf(gamma);
        let h = g(horizon as f64);
        tally.le(sum_g, c * h);
        if h >= below * g(threshold) {
            tally.le(sum_f, eta * (c + 1.0) * h);
        }
    }
}

/// Checks each lemma on `trials` random instances of its hypotheses.
///
/// Domains: `n` in `1..=30`, `b` in `(1, 5]`, `a` in `(1, 10]`, `gamma`
/// and `delta` in `(0, 1]`, `x, y` in `{0} U [1e-6, 1e6]`, `D` in `(0, x0)`,
/// and non-decreasing non-negative cubic weights.
pub fn validate_lemmas(seed: u64, trials: u64) -> Result<LemmaReport, TheoryError> {
    if trials == 0 {
        return Err(TheoryError::NoTrials);
    }
    let mut outcomes = Vec::with_capacity(Lemma::ALL.len());
    for (offset, lemma) in Lemma::ALL.into_iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(offset as u64);
        let mut tally = Tally::new(lemma);
        for trial in 0..trials {
            match lemma {
                Lemma::WeightedGeometric => check_weighted_geometric(&mut rng, &mut tally),
                Lemma::DoubleExponentialSum => check_double_exponential(&mut rng, &mut tally),
                Lemma::SquareRoot => check_square_root(&mut rng, &mut tally, trial),
                Lemma::LogShift => check_log_shift(&mut rng, &mut tally),
                Lemma::PowerLogMonotone => check_power_log(&mut rng, &mut tally),
                Lemma::DominatedSum => check_dominated_sum(&mut rng, &mut tally),
            }
        }
        outcomes.push(tally.finish());
    }
    Ok(LemmaReport { outcomes })
}
