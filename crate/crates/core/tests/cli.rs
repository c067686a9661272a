use std::fs;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_doubling-trick"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(output: &Output) -> String {
    String::from_utf8(output.stdout.clone()).unwrap()
}

#[test]
fn optimal_b() {
    let out = run(&["optimal-b", "--gamma", "0.5"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.starts_with("b* = 2.618033988"), "{text}");
    let residual: f64 = text.lines().nth(1).unwrap().trim_start_matches("residual = ").parse().unwrap();
    assert!(residual < 1e-12);
    let out = run(&["optimal-b", "--gamma", "1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no root"));
}

#[test]
fn losses() {
    let out = run(&[
        "losses", "--family", "exponential", "--gamma", "0", "--delta", "1", "--t0", "200", "--a", "200", "--b", "2",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out), "4\n");
    let out = run(&["losses", "--family", "geometric", "--gamma", "0.5", "--delta", "1", "--t0", "1", "--b", "2"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(&["optimal-b"]).status.code(), Some(2));
    assert_eq!(run(&["optimal-b", "--gamma", "x"]).status.code(), Some(2));
    assert_eq!(run(&["losses", "--colour", "red"]).status.code(), Some(2));
    assert_eq!(run(&[]).status.code(), Some(2));
}

#[test]
fn check_lemmas() {
    let out = run(&["check-lemmas", "--trials", "500", "--seed", "7"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert_eq!(text.lines().count(), 6);
    assert!(text.lines().all(|l| l.contains(" 0 violations") && l.ends_with("[ok]")), "{text}");
}

#[test]
fn sequence_listing() {
    let out = run(&["sequence", "--kind", "geometric", "--t0", "3", "--b", "1.5", "--horizon", "10"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out), "0\t3\n1\t4\n2\t6\n3\t10\n4\t15\nL_T = 4\n");
    assert_eq!(run(&["sequence", "--kind", "exponential", "--t0", "3", "--b", "2", "--horizon", "10"]).status.code(), Some(1));
}

#[test]
fn bound_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bound.csv");
    let out = run(&["bound", "--means", "0.2, 0.8", "--horizon", "100", "--output", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = fs::read_to_string(&path).unwrap();
    let last = text.lines().last().unwrap();
    let value: f64 = last.strip_prefix("100,").unwrap().parse().unwrap();
    let expected = 100f64.ln() / (0.6 * 4f64.ln());
    assert!((value - expected).abs() < 1e-8 * expected);
}

#[test]
fn simulate_from_config_file_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    let outputs = [dir.path().join("a"), dir.path().join("b")];
    fs::write(
        &cfg,
        "# small run\nK = 3\nT = 400\nn = 8\nseed = 11\nproblem = evenly-spaced\n\
         algorithms = klucbpp; DT(klucbpp, geometric, t0=40, b=2); DTnr(klucb, exponential, t0=40, a=40, b=2)\n",
    )
    .unwrap();
    for output in &outputs {
        let out = run(&[
            "--quiet",
            "simulate",
            "--config",
            cfg.to_str().unwrap(),
            "--output-dir",
            output.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        assert!(out.stdout.is_empty());
    }
    let mut names: Vec<String> = fs::read_dir(&outputs[0])
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(
        names,
        [
            "config.txt",
            "dt-klucbpp-geometric-t0-40-b-2.csv",
            "dtnr-klucb-exponential-t0-40-a-40-b-2.csv",
            "klucbpp.csv",
            "lower_bound.csv",
        ]
    );
    for name in &names {
        if name != "config.txt" {
            assert_eq!(fs::read(outputs[0].join(name)).unwrap(), fs::read(outputs[1].join(name)).unwrap());
        }
    }
    // The echoed configuration is itself a valid config file.
    let echo = outputs[0].join("config.txt");
    let rerun = dir.path().join("c");
    let out = run(&["--quiet", "simulate", "--config", echo.to_str().unwrap(), "--output-dir", rerun.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(fs::read(outputs[0].join("klucbpp.csv")).unwrap(), fs::read(rerun.join("klucbpp.csv")).unwrap());
}

#[test]
fn simulate_validation_failure() {
    let out = run(&["simulate", "--means", "0.2,0.8", "--algorithms", "DT(klucbpp, geometric, t0=0, b=2)"]);
    assert_eq!(out.status.code(), Some(1));
    let out = run(&["simulate", "-n", "0"]);
    assert_eq!(out.status.code(), Some(1));
    let out = run(&["simulate", "--config", "/nonexistent/run.cfg"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn decomposition_check_small() {
    let out = run(&[
        "decomposition-check", "--kind", "geometric", "--t0", "20", "--b", "2", "--means", "0.5,0.5", "--horizon", "100", "-n", "10",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("[holds]"));
    assert!(!text.contains("FAILS"));
}
