use std::process::{Command, Output};

fn misti(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_misti")).args(args).output().expect("spawn misti")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn column(line: &str, i: usize) -> f64 {
    line.split(',').nth(i).unwrap().parse().unwrap()
}

const NB_PATH: [&str; 11] = [
    "simulate", "--process", "branching-nb", "--alpha", "1.5", "--p", "0.4", "--rho", "0.6", "--steps", "1000",
];

#[test]
fn simulate_is_reproducible() {
    let a = misti(&[&NB_PATH[..], &["--seed", "11"]].concat());
    assert_eq!(a.status.code(), Some(0));
    let text = stdout(&a);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 1001);
    assert_eq!(lines[0], "t,x");
    assert_eq!(lines[1].split(',').next(), Some("0"));
    let b = misti(&[&NB_PATH[..], &["--seed", "11"]].concat());
    assert_eq!(a.stdout, b.stdout);
    let c = misti(&[&NB_PATH[..], &["--seed", "12"]].concat());
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn zero_steps_is_a_config_error() {
    let out = misti(&["simulate", "--process", "thinning", "--law", "poisson", "--theta", "1", "--rho", "0.5", "--steps", "0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
    assert!(!out.stderr.is_empty());
}

#[test]
fn bad_parameters_exit_two() {
    assert_eq!(misti(&["simulate", "--process", "branching-poisson", "--theta", "1", "--rho", "1.5"]).status.code(), Some(2));
    assert_eq!(misti(&["simulate", "--bogus"]).status.code(), Some(2));
    assert_eq!(misti(&["verify", "--suite", "nonsense"]).status.code(), Some(2));
}

#[test]
fn config_file_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.conf");
    std::fs::write(&path, "# nb thinning\nprocess = thinning\nlaw = nb\ntheta = 2\np = 0.5\nrho = 0.3\nsteps = 50\nseed = 4\n").unwrap();
    let cfg = path.to_str().unwrap();
    let dumped = misti(&["simulate", "--config", cfg, "--rho", "0.7", "--dump-config"]);
    assert_eq!(dumped.status.code(), Some(0));
    let text = stdout(&dumped);
    assert!(text.contains("rho = 0.7"), "{text}");
    assert!(text.contains("law = nb"));

    let again = dir.path().join("again.conf");
    std::fs::write(&again, &text).unwrap();
    let from_dump = misti(&["simulate", "--config", again.to_str().unwrap()]);
    let direct = misti(&["simulate", "--config", cfg, "--rho", "0.7"]);
    assert_eq!(from_dump.status.code(), Some(0));
    assert_eq!(from_dump.stdout, direct.stdout);
    assert_eq!(stdout(&direct).lines().count(), 51);
}

#[test]
fn unknown_config_key_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.conf");
    std::fs::write(&path, "process = iid\nthetta = 1\n").unwrap();
    let out = misti(&["simulate", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("thetta"));
}

fn suite_lines(suite: &str) -> Vec<serde_json::Value> {
    let out = misti(&["verify", "--suite", suite]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    stdout(&out).lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

#[test]
fn verify_suites_match_polarity() {
    for suite in ["theorem1", "theorem2", "theorem3", "poisson-coincidence", "continuous-time"] {
        let lines = suite_lines(suite);
        assert!(!lines.is_empty());
        for v in &lines {
            assert_eq!(v["pass"], v["expected"], "{v}");
        }
    }
}

#[test]
fn thinning_nb_fails_mvid() {
    let lines = suite_lines("theorem2");
    let mvid = lines
        .iter()
        .find(|v| v["name"].as_str().unwrap().ends_with("/mvid") && v["name"].as_str().unwrap().contains("nb"))
        .expect("an nb mvid line");
    assert_eq!(mvid["pass"], false);
    assert!(mvid["value"].as_f64().unwrap() < -1e-3);
}

#[test]
fn random_measure_gap_at_zero_two_zero() {
    let lines = suite_lines("theorem3");
    let gap = lines.iter().find(|v| v["name"] == "random-measure-nb/markov-gap-0-2-0").unwrap();
    assert_eq!(gap["witness"], serde_json::json!([0, 2, 0]));
    assert!((gap["violation"].as_f64().unwrap() - 0.0078125).abs() < 1e-8);
    let closed = lines.iter().find(|v| v["name"] == "random-measure-nb/zero-two-zero-closed-form").unwrap();
    assert_eq!(closed["pass"], true);
}

#[test]
fn table_reference_row() {
    let out = misti(&["table", "--theta", "1", "--p", "0.5", "--rho", "0.5"]);
    let text = stdout(&out);
    let row = text.lines().nth(1).unwrap();
    assert!((column(row, 3) - 0.0703125).abs() < 1e-12);
    assert!((column(row, 6) - 0.078125).abs() < 1e-12);
    assert!((column(row, 9) - 0.0078125).abs() < 1e-12);
    assert!(column(row, 5) < 1e-10 && column(row, 8) < 1e-10);
}

#[test]
fn table_limits() {
    let out = misti(&["table", "--thetas", "1e-9,1,2", "--ps", "0.5", "--rhos", "1e-6,0.5"]);
    assert_eq!(out.status.code(), Some(0));
    for row in stdout(&out).lines().skip(1) {
        let (theta, p, rho) = (column(row, 0), column(row, 1), column(row, 2));
        if rho < 1e-3 {
            // nearly independent: both reduce to P[X = 0]^2
            let want = p.powf(2.0 * theta);
            assert!((column(row, 3) - want).abs() < 1e-5, "{row}");
            assert!((column(row, 6) - want).abs() < 1e-5, "{row}");
        }
        if theta < 1e-6 {
            let want = (1.0 - rho) * (1.0 - rho);
            assert!((column(row, 3) - want).abs() < 1e-6, "{row}");
            assert!((column(row, 6) - want).abs() < 1e-6, "{row}");
        }
    }
}

#[test]
fn classify_outputs_family() {
    let out = misti(&["classify", "--r0", "0.5", "--r1", "0.5", "--r2", "0", "--theta1", "1"]);
    let v: serde_json::Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert_eq!(v["family"], "branching-poisson");
    assert_eq!(v["rho"], 0.5);
    let iid = misti(&["classify", "--r0", "1", "--r1", "0", "--r2", "0", "--theta1", "2"]);
    assert!(stdout(&iid).contains("\"iid\""));
}

#[test]
fn continuous_time_output() {
    let out = misti(&["simulate", "--process", "poisson-bd", "--theta", "3", "--lambda", "1", "--horizon", "20", "--seed", "5"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("time,state"));
    let mut last = -1.0;
    for l in lines {
        let t = column(l, 0);
        assert!(t >= last && t <= 20.0);
        last = t;
    }
}

#[test]
fn out_file_and_jsonl() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("path.jsonl");
    let out = misti(&[
        "simulate", "--process", "iid", "--law", "poisson", "--theta", "2", "--steps", "10", "--seed", "1",
        "--format", "jsonl", "--out", path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 10);
    for l in text.lines() {
        let v: serde_json::Value = serde_json::from_str(l).unwrap();
        assert!(v.is_object());
    }
}
