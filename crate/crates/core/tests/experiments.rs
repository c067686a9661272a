use std::fs;

use doubling_trick::environment::{action_trace, BanditInstance, ProblemSpec, RewardFamily, StreamKey, StreamRole};
use doubling_trick::experiments::{run_and_write, run_experiment, AlgorithmSpec, ExperimentConfig};
use doubling_trick::meta::{MetaPolicy, PolicySpec, RestartMode};
use doubling_trick::policies::{BanditPolicy, IndexPolicy, PolicyKind};
use doubling_trick::sequences::DoublingSequence;

fn roster(specs: &[&str]) -> Vec<AlgorithmSpec> {
    specs.iter().map(|s| s.parse().unwrap()).collect()
}

fn config(specs: &[&str]) -> ExperimentConfig {
    ExperimentConfig {
        n_arms: 4,
        horizon: 600,
        repetitions: 12,
        master_seed: 99,
        problem: ProblemSpec::EvenlySpaced,
        algorithms: roster(specs),
        output_dir: None,
    }
}

const ROSTER: [&str; 4] = [
    "klucbpp",
    "DT(klucbpp, geometric, t0=50, b=2)",
    "DTnr(afhg, exponential, t0=20, a=20, b=2)",
    "ucb",
];

#[test]
fn reruns_write_identical_files() {
    let first = tempfile::tempdir().unwrap();
    let second = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for dir in [&first, &second] {
        let mut cfg = config(&ROSTER);
        cfg.output_dir = Some(dir.path().to_path_buf());
        let (_, written) = run_and_write(&cfg).unwrap();
        outputs.push(written);
    }
    assert_eq!(outputs[0].len(), ROSTER.len() + 2);
    for (a, b) in outputs[0].iter().zip(&outputs[1]) {
        assert_eq!(a.file_name(), b.file_name());
        if a.file_name().unwrap() != "config.txt" {
            assert_eq!(fs::read(a).unwrap(), fs::read(b).unwrap(), "{}", a.display());
        }
    }
}

#[test]
fn curves_do_not_depend_on_roster() {
    let full = run_experiment(&config(&ROSTER)).unwrap();
    for (i, spec) in ROSTER.iter().enumerate() {
        let alone = run_experiment(&config(&[spec])).unwrap();
        let curve = &full.curves[i];
        // The lone run has a coarser grid without the other sequences' boundaries.
        for (j, &t) in alone.curves[0].times.iter().enumerate() {
            let (mean, stderr) = curve.at(t).expect("grid contains the lone grid");
            assert_eq!(mean, alone.curves[0].mean[j], "{spec} at {t}");
            assert_eq!(stderr, alone.curves[0].stderr[j]);
        }
    }
}

#[test]
fn csv_files_follow_schema() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(&ROSTER);
    cfg.output_dir = Some(dir.path().to_path_buf());
    let (result, _) = run_and_write(&cfg).unwrap();
    for curve in &result.curves {
        let text = fs::read_to_string(dir.path().join(format!("{}.csv", curve.slug))).unwrap();
        assert!(!text.contains('\r'));
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("t,mean_regret,stderr,n"));
        let mut previous = (0u64, 0.0f64);
        let mut rows = 0;
        for line in lines {
            let fields: Vec<&str> = line.split(',').collect();
            assert_eq!(fields.len(), 4, "{line}");
            let t: u64 = fields[0].parse().unwrap();
            let mean: f64 = fields[1].parse().unwrap();
            let stderr: f64 = fields[2].parse().unwrap();
            assert_eq!(fields[3], "12");
            assert!(t > previous.0 && mean >= previous.1 && stderr >= 0.0);
            previous = (t, mean);
            rows += 1;
        }
        assert_eq!(rows, curve.times.len());
        assert_eq!(previous.0, 600);
    }
    let bound = fs::read_to_string(dir.path().join("lower_bound.csv")).unwrap();
    assert!(bound.starts_with("t,bound\n1,0\n"));
    let echo = fs::read_to_string(dir.path().join("config.txt")).unwrap();
    assert!(echo.contains("problem = evenly-spaced\n"));
}

#[test]
fn restart_boundaries_are_on_the_grid() {
    let result = run_experiment(&config(&ROSTER)).unwrap();
    let times = &result.curves[0].times;
    for t in [20, 21, 50, 51, 100, 101, 200, 201, 400, 401] {
        assert!(times.binary_search(&t).is_ok(), "{t}");
    }
}

#[test]
fn single_repetition_of_random_policy() {
    let cfg = ExperimentConfig {
        n_arms: 2,
        horizon: 1000,
        repetitions: 1,
        master_seed: 5,
        problem: ProblemSpec::Fixed {
            family: RewardFamily::Bernoulli,
            means: vec![0.2, 0.8],
            variance: 0.25,
        },
        algorithms: roster(&["random"]),
        output_dir: None,
    };
    let curve = &run_experiment(&cfg).unwrap().curves[0];
    assert_eq!(curve.final_stderr(), 0.0);
    // Each pull of arm 0 costs 0.6.
    let pulls = curve.final_mean() / 0.6;
    assert!((pulls - pulls.round()).abs() < 1e-9);
    assert!((300.0..700.0).contains(&pulls));
}

#[test]
fn gaussian_uniform_problem_runs() {
    let cfg = ExperimentConfig {
        n_arms: 3,
        horizon: 300,
        repetitions: 4,
        master_seed: 1,
        problem: ProblemSpec::uniform_gaussian(),
        algorithms: roster(&["ucb", "DT(afhg, geometric, t0=30, b=2)", "DTnr(ucb, geometric, t0=30, b=2)"]),
        output_dir: None,
    };
    let result = run_experiment(&cfg).unwrap();
    assert!(result.lower_bound.is_none());
    for curve in &result.curves {
        assert!(curve.mean.windows(2).all(|w| w[0] <= w[1]));
        assert!(curve.final_mean() > 0.0);
    }
}

#[test]
fn degenerate_doubling_trick_matches_base_trace() {
    let instance = BanditInstance::bernoulli(vec![0.1, 0.5, 0.55, 0.9]).unwrap();
    let sequence = DoublingSequence::geometric(300, 2.0).unwrap();
    for kind in [PolicyKind::KlUcbPlusPlus, PolicyKind::Afhg, PolicyKind::KlUcb, PolicyKind::Ucb] {
        for seed in 0..5 {
            let key = StreamKey::new(seed, 0, StreamRole::Tiebreak);
            let mut base = IndexPolicy::new(kind, 4, Some(300), 0.25, key.rng(0)).unwrap();
            let spec = PolicySpec::new(kind, 4, 0.25, key).unwrap();
            let mut wrapped = MetaPolicy::new(spec, sequence, RestartMode::Restart).unwrap();
            let rewards = || StreamKey::new(seed, 0, StreamRole::Rewards).rng(0);
            let a = action_trace(&mut base, &instance, 300, &mut rewards()).unwrap();
            let b = action_trace(&mut wrapped, &instance, 300, &mut rewards()).unwrap();
            assert_eq!(a, b, "{kind} seed {seed}");
            assert_eq!(wrapped.restarts(), 0);
        }
    }
}

#[test]
fn no_restart_keeps_counts_across_segments() {
    let instance = BanditInstance::bernoulli(vec![0.3, 0.7]).unwrap();
    let sequence = DoublingSequence::geometric(10, 2.0).unwrap();
    let spec = PolicySpec::new(PolicyKind::KlUcb, 2, 0.25, StreamKey::new(0, 0, StreamRole::Tiebreak)).unwrap();
    let mut policy = MetaPolicy::new(spec, sequence, RestartMode::NoRestart).unwrap();
    let mut rewards = StreamKey::new(0, 0, StreamRole::Rewards).rng(0);
    let trace = action_trace(&mut policy, &instance, 100, &mut rewards).unwrap();
    assert_eq!(policy.history().len(), 100);
    assert_eq!(policy.restarts(), 4);
    let counts = policy.inner().state().counts();
    assert_eq!(counts.iter().sum::<u64>(), 100);
    assert_eq!(counts[1], trace.iter().filter(|&&a| a == 1).count() as u64);
    assert_eq!(policy.n_arms(), 2);
}
