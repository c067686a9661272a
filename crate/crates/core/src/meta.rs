//! Doubling-trick wrappers turning a horizon-dependent policy into an
//! anytime one.
//!
//! At global time `t`, segment `i` is active when `T_{i-1} < t <= T_i`
//! (with `T_{-1} = 0`). Entering segment `i` builds a fresh base policy:
//!
//! * [`RestartMode::Restart`]: with horizon `T_i - T_{i-1}` and no memory;
//! * [`RestartMode::NoRestart`]: with horizon `T_i`, then every past
//!   observation is replayed into it in chronological order.

use std::fmt;

use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::environment::StreamKey;
use crate::policies::{BanditPolicy, IndexPolicy, PolicyError, PolicyKind};
use crate::sequences::{DoublingSequence, Term, SATURATION_CEILING};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetaError {
    #[error("base policy cannot be brought up to date by replaying observations")]
    ReplayUnsupported,
    #[error("select called for t = {got}, expected t = {expected}")]
    NonMonotoneTime { expected: u64, got: u64 },
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RestartMode {
    Restart,
    NoRestart,
}

impl fmt::Display for RestartMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RestartMode::Restart => f.write_str("DT"),
            RestartMode::NoRestart => f.write_str("DTnr"),
        }
    }
}

/// Builds fresh base policies for a given horizon.
pub trait PolicyFactory {
    type Policy: BanditPolicy;

    /// A new policy for `horizon` steps. `segment` is the sequence index the
    /// policy is built for and selects its private random stream.
    fn build(&self, horizon: u64, segment: u64) -> Self::Policy;

    fn supports_replay(&self) -> bool;
}

/// Recipe for one of the built-in index policies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicySpec {
    kind: PolicyKind,
    n_arms: usize,
    variance: f64,
    key: StreamKey,
}

impl PolicySpec {
    pub fn new(kind: PolicyKind, n_arms: usize, variance: f64, key: StreamKey) -> Result<Self, PolicyError> {
        // Surface argument errors now rather than at the first restart.
        IndexPolicy::new(kind, n_arms, Some(1), variance, key.rng(0))?;
        Ok(Self {
            kind,
            n_arms,
            variance,
            key,
        })
    }

    pub fn kind(&self) -> PolicyKind {
        self.kind
    }

    fn rng(&self, segment: u64) -> ChaCha8Rng {
        self.key.rng(segment)
    }
}

impl PolicyFactory for PolicySpec {
    type Policy = IndexPolicy;

    fn build(&self, horizon: u64, segment: u64) -> IndexPolicy {
        IndexPolicy::new(
            self.kind,
            self.n_arms,
            Some(horizon.max(1)),
            self.variance,
            self.rng(segment),
        )
        .expect("arguments validated by PolicySpec::new")
    }

    fn supports_replay(&self) -> bool {
        self.kind.supports_replay()
    }
}

fn horizon_of(term: Term) -> u64 {
    term.finite().unwrap_or(SATURATION_CEILING)
}

/// A doubling-trick wrapper around the policies built by `F`.
pub struct MetaPolicy<F: PolicyFactory> {
    factory: F,
    sequence: DoublingSequence,
    mode: RestartMode,
    segment: u64,
    inner: F::Policy,
    history: Vec<(usize, f64)>,
    t: u64,
    pending: Option<usize>,
    restarts: u64,
}

impl<F: PolicyFactory> MetaPolicy<F> {
    pub fn new(factory: F, sequence: DoublingSequence, mode: RestartMode) -> Result<Self, MetaError> {
        if mode == RestartMode::NoRestart && !factory.supports_replay() {
            return Err(MetaError::ReplayUnsupported);
        }
        let inner = factory.build(horizon_of(sequence.term(0)), 0);
        Ok(Self {
            factory,
            sequence,
            mode,
            segment: 0,
            inner,
            history: Vec::new(),
            t: 0,
            pending: None,
            restarts: 0,
        })
    }

    pub fn mode(&self) -> RestartMode {
        self.mode
    }

    pub fn sequence(&self) -> &DoublingSequence {
        &self.sequence
    }

    /// Index `i` of the active segment.
    pub fn segment(&self) -> u64 {
        self.segment
    }

    pub fn restarts(&self) -> u64 {
        self.restarts
    }

    /// Global time of the last selection (0 before the first step).
    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn inner(&self) -> &F::Policy {
        &self.inner
    }

    /// Observations kept for replay (always empty in restart mode).
    pub fn history(&self) -> &[(usize, f64)] {
        &self.history
    }

    /// Arm to play at global time `t`, which must be exactly one more than
    /// the previous call's.
    pub fn select_at(&mut self, t: u64) -> Result<usize, MetaError> {
        if t != self.t + 1 || self.pending.is_some() {
            return Err(MetaError::NonMonotoneTime {
                expected: self.t + 1,
                got: t,
            });
        }
        let mut advanced = false;
        while !self.sequence.term(self.segment).exceeds(t - 1) {
            self.segment += 1;
            advanced = true;
        }
        if advanced {
            self.restart()?;
        }
        self.t = t;
        let arm = self.inner.select();
        self.pending = Some(arm);
        Ok(arm)
    }

    fn restart(&mut self) -> Result<(), MetaError> {
        let length = horizon_of(self.sequence.segment_length(self.segment));
        self.restarts += 1;
        match self.mode {
            RestartMode::Restart => {
                self.inner = self.factory.build(length, self.segment);
            }
            RestartMode::NoRestart => {
                let horizon = length.saturating_add(self.history.len() as u64);
                let mut fresh = self.factory.build(horizon, self.segment);
                for &(arm, reward) in &self.history {
                    fresh.update(arm, reward)?;
                }
                self.inner = fresh;
            }
        }
        Ok(())
    }
}

impl<F: PolicyFactory> BanditPolicy for MetaPolicy<F> {
    fn n_arms(&self) -> usize {
        self.inner.n_arms()
    }

    fn select(&mut self) -> usize {
        if let Some(arm) = self.pending {
            return arm;
        }
        self.select_at(self.t + 1)
            .expect("time advances by one and replay was validated at construction")
    }

    fn update(&mut self, arm: usize, reward: f64) -> Result<(), PolicyError> {
        if self.pending.is_none() {
            return Err(PolicyError::UpdateWithoutSelect);
        }
        self.inner.update(arm, reward)?;
        if self.mode == RestartMode::NoRestart {
            self.history.push((arm, reward));
        }
        self.pending = None;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::StreamRole;
    use crate::policies::PolicyState;

    fn spec(kind: PolicyKind, k: usize, seed: u64) -> PolicySpec {
        PolicySpec::new(kind, k, 1.0, StreamKey::new(seed, 0, StreamRole::Tiebreak)).unwrap()
    }

    // Records the horizon of every policy it builds.
    struct Recording {
        inner: PolicySpec,
        horizons: std::cell::RefCell<Vec<u64>>,
    }

    impl PolicyFactory for &Recording {
        type Policy = IndexPolicy;

        fn build(&self, horizon: u64, segment: u64) -> IndexPolicy {
            self.horizons.borrow_mut().push(horizon);
            self.inner.build(horizon, segment)
        }

        fn supports_replay(&self) -> bool {
            true
        }
    }

    struct NoReplay;

    impl PolicyFactory for NoReplay {
        type Policy = IndexPolicy;

        fn build(&self, horizon: u64, segment: u64) -> IndexPolicy {
            spec(PolicyKind::KlUcbPlusPlus, 2, 0).build(horizon, segment)
        }

        fn supports_replay(&self) -> bool {
            false
        }
    }

    fn drive<F: PolicyFactory>(meta: &mut MetaPolicy<F>, steps: u64) {
        for _ in 0..steps {
            let arm = meta.select();
            meta.update(arm, (arm % 2) as f64).unwrap();
        }
    }

    #[test]
    fn restart_horizons_follow_segment_lengths() {
        let rec = Recording {
            inner: spec(PolicyKind::KlUcbPlusPlus, 3, 1),
            horizons: Default::default(),
        };
        let seq = DoublingSequence::geometric(200, 2.0).unwrap();
        let mut meta = MetaPolicy::new(&rec, seq, RestartMode::Restart).unwrap();
        let mut restart_times = Vec::new();
        for t in 1..=1000 {
            let before = meta.restarts();
            let arm = meta.select_at(t).unwrap();
            if meta.restarts() > before {
                restart_times.push(t);
            }
            meta.update(arm, 0.5).unwrap();
        }
        assert_eq!(restart_times, vec![201, 401, 801]);
        assert_eq!(*rec.horizons.borrow(), vec![200, 200, 400, 800]);
        assert!(meta.history().is_empty());
        // Inner clock counts steps since the last restart (t = 800 was the last one before it).
        assert_eq!(meta.inner().state().counts().iter().sum::<u64>(), 200);
    }

    #[test]
    fn no_restart_replays_history() {
        let seq = DoublingSequence::geometric(200, 2.0).unwrap();
        let mut meta = MetaPolicy::new(spec(PolicyKind::KlUcbPlusPlus, 3, 2), seq, RestartMode::NoRestart).unwrap();
        drive(&mut meta, 200);
        assert_eq!(meta.restarts(), 0);
        let arm = meta.select_at(201).unwrap();
        assert_eq!(meta.restarts(), 1);
        let state: &PolicyState = meta.inner().state();
        assert_eq!(state.counts().iter().sum::<u64>(), 200);
        // Horizon of a replayed policy is the absolute T_1 = 400.
        assert_eq!(state.horizon(), Some(400));
        let mut counts = [0u64; 3];
        let mut sums = [0f64; 3];
        for &(a, r) in meta.history() {
            counts[a] += 1;
            sums[a] += r;
        }
        assert_eq!(state.counts(), &counts);
        assert_eq!(state.sums(), &sums);
        meta.update(arm, 1.0).unwrap();
        assert_eq!(meta.history().len(), 201);
    }

    #[test]
    fn sequence_beyond_horizon_never_restarts() {
        let seq = DoublingSequence::geometric(5000, 2.0).unwrap();
        let mut meta = MetaPolicy::new(spec(PolicyKind::Afhg, 4, 3), seq, RestartMode::Restart).unwrap();
        drive(&mut meta, 1000);
        assert_eq!(meta.restarts(), 0);
        assert_eq!(meta.segment(), 0);
    }

    #[test]
    fn misuse_is_rejected() {
        let seq = DoublingSequence::geometric(10, 2.0).unwrap();
        let mut meta = MetaPolicy::new(spec(PolicyKind::KlUcb, 2, 0), seq, RestartMode::Restart).unwrap();
        assert_eq!(meta.update(0, 1.0), Err(PolicyError::UpdateWithoutSelect));
        assert_eq!(
            meta.select_at(2),
            Err(MetaError::NonMonotoneTime { expected: 1, got: 2 })
        );
        let arm = meta.select_at(1).unwrap();
        assert!(meta.select_at(2).is_err());
        meta.update(arm, 1.0).unwrap();
        assert!(meta.select_at(1).is_err());
        assert!(MetaPolicy::new(NoReplay, seq, RestartMode::NoRestart).is_err());
        assert!(MetaPolicy::new(NoReplay, seq, RestartMode::Restart).is_ok());
    }

    #[test]
    fn restart_count_matches_last_term() {
        for seq in [
            DoublingSequence::geometric(50, 2.0).unwrap(),
            DoublingSequence::geometric(3, 1.5).unwrap(),
            DoublingSequence::exponential(20, 2.0, 2.0).unwrap(),
        ] {
            let mut meta = MetaPolicy::new(spec(PolicyKind::Random, 2, 0), seq, RestartMode::Restart).unwrap();
            for t in 1..=3000u64 {
                let arm = meta.select_at(t).unwrap();
                meta.update(arm, 0.0).unwrap();
                // Restarts so far: every i with T_i < t.
                assert_eq!(meta.restarts(), seq.last_term_closed(t - 1), "{seq} t={t}");
                let seg = meta.segment();
                let prev = if seg == 0 { Term::Finite(0) } else { seq.term(seg - 1) };
                assert!(prev < Term::Finite(t) && !Term::Finite(t).exceeds(horizon_of(seq.term(seg))));
            }
        }
    }
}
