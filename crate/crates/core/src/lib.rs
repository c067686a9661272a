//! Doubling-trick meta-algorithms for stochastic multi-armed bandits.
//!
//! A doubling trick turns a policy that needs its horizon `T` into an
//! anytime one by running it on successive segments `T_{i-1} + 1 ..= T_i`
//! of a diverging sequence. The crate provides:
//!
//! * [`sequences`]: geometric and exponential doubling sequences;
//! * [`policies`]: KL-UCB++, approximated finite-horizon Gittins, anytime
//!   KL-UCB and UCB, and a uniform-random control;
//! * [`meta`]: the restarting and non-restarting doubling tricks;
//! * [`environment`]: Bernoulli and Gaussian arms and single-run simulation;
//! * [`theory`]: loss constants of the regret bounds and lemma validators;
//! * [`experiments`]: seeded parallel regret experiments and CSV output;
//! * [`cli`]: the `doubling-trick` command line.

pub mod cli;
pub mod environment;
pub mod experiments;
pub mod meta;
pub mod policies;
pub mod sequences;
pub mod theory;

pub use environment::{BanditInstance, ProblemSpec, RewardFamily};
pub use experiments::{AlgorithmSpec, ExperimentConfig, RegretCurve};
pub use meta::{MetaPolicy, PolicySpec, RestartMode};
pub use policies::{BanditPolicy, IndexPolicy, PolicyKind};
pub use sequences::{DoublingSequence, Term};
