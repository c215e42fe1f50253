use std::fs;
use std::process::{Command, Output};

fn mir(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mir")).args(args).output().expect("run mir")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn solve_reports_ogp_optimal() {
    let o = mir(&["solve", "--instance", "catalog:example-one-discretized"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.starts_with("# mir solve instance=example-one-discretized seed=0 terminal-mode=exact"));
    assert!(out.contains("stochastic-order=holds"));
    assert!(out.contains("status=ok"));
}

#[test]
fn solve_writes_table_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("claim.txt");
    let o = mir(&["solve", "--instance", "catalog:claim", "--out", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let table = fs::read_to_string(&path).unwrap();
    assert!(table.starts_with("# mir solve instance=claim"));
    assert!(table.contains("# dp-solution"));
    assert!(stdout(&o).contains("w-star="));
}

#[test]
fn instance_without_negative_arms() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pos.toml");
    fs::write(
        &path,
        "seed = 9\n\n[[arms]]\nfamily = \"two_point\"\nlow = -1.0\nhigh = 1.0\np_high = 0.7\n\n[[arms]]\nfamily = \"point\"\nvalue = 0.5\n",
    )
    .unwrap();
    let o = mir(&["solve", "--instance", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("seed=9"));
}

#[test]
fn gaussian_instance_needs_sampled_terminal_rewards() {
    let o = mir(&["solve", "--instance", "catalog:example-one"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("mc:"));
    let o = mir(&["solve", "--instance", "catalog:example-one", "--terminal-mode", "mc:2000", "--seed", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("terminal-mode=mc:2000"));
}

#[test]
fn simulate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for path in [&a, &b] {
        let o = mir(&[
            "simulate",
            "--instance",
            "catalog:small-mix",
            "--horizons",
            "10,100,1000",
            "--replications",
            "500",
            "--seed",
            "5",
            "--out",
            path.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text, fs::read_to_string(&b).unwrap());
    assert!(text.starts_with("# mir simulate instance=small-mix mechanism=iregb replications=500 seed=5\n"));
    assert_eq!(text.lines().count(), 5);
}

#[test]
fn simulate_writes_a_trace() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.jsonl");
    let o = mir(&[
        "simulate",
        "--instance",
        "catalog:bic-2",
        "--mechanism",
        "bic_iregb",
        "--horizons",
        "50,300",
        "--replications",
        "100",
        "--trace",
        trace.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let lines: Vec<String> = fs::read_to_string(&trace).unwrap().lines().map(str::to_owned).collect();
    assert_eq!(lines.len(), 300);
    assert!(lines[0].contains("\"t\":1"));
    assert!(lines[0].contains("\"explorer\""));
}

#[test]
fn bic_refuses_inferior_default() {
    let o = mir(&["simulate", "--instance", "catalog:small-mix", "--mechanism", "bic_iregb", "--horizons", "100"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("default superiority"), "{}", stderr(&o));
}

#[test]
fn horizons_must_increase() {
    let o = mir(&["simulate", "--instance", "catalog:small-mix", "--horizons", "100,10"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("strictly increasing"));
}

#[test]
fn parse_errors_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    fs::write(&path, "[[arms]]\nfamily = \"two_point\"\nlow = -1.0\nhigh = 1.0\np_high = 0.5\n\n[[arms]]\nfamily = \"cauchy\"\n")
        .unwrap();
    let o = mir(&["solve", "--instance", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 8"), "{}", stderr(&o));
}

#[test]
fn verify_equivalence_passes() {
    let o = mir(&["verify", "equivalence", "--instances", "10", "--max-k", "6"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).lines().all(|l| l.starts_with("PASS") || l.starts_with('#') || l.is_empty()));
}

#[test]
fn unordered_optimality_failures_are_expected() {
    let o = mir(&["verify", "ogp-optimality", "--generate", "family=unordered", "--instances", "40", "--max-k", "6"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("EXPECTED-FAIL"));
}

#[test]
fn unknown_suite() {
    let o = mir(&["verify", "everything"]);
    assert_eq!(o.status.code(), Some(2));
}
