//! End-to-end tests of the binary: exit codes, JSON-lines output, scenario
//! round-trips and worker-count determinism.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ribound"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn json_lines(text: &str) -> Vec<serde_json::Value> {
    text.lines()
        .filter(|l| l.starts_with('{'))
        .map(|l| serde_json::from_str(l).expect("valid JSON line"))
        .collect()
}

fn tmp(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join("ribound-cli-tests");
    fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn write_scenario(name: &str, body: &str) -> PathBuf {
    let path = tmp(name);
    fs::write(&path, body).unwrap();
    path
}

const SMALL_SCENARIO: &str = r#"
family = "gaussian-shift"
theta0 = 0.0
estimator = "sample-mean"
n_grid = [5, 20]
reps = 2000
seed = 7

[pairing]
kind = "lp"
q = 2.0
"#;

#[test]
fn fisher_prints_unit_information() {
    let out = run(&["fisher", "--family", "gaussian-shift", "--theta", "0", "--p", "2"]);
    assert!(out.status.success(), "{out:?}");
    let text = stdout(&out);
    assert!(text.contains("information"), "{text}");
    let records = json_lines(&text);
    assert_eq!(records.len(), 1);
    assert_eq!(records[0]["value"]["Finite"], 1.0);
}

#[test]
fn bound_matches_expected_value() {
    let out = run(&[
        "bound",
        "--family",
        "gaussian-shift",
        "--theta",
        "0",
        "--q",
        "1.3333333",
    ]);
    assert!(out.status.success(), "{out:?}");
    let records = json_lines(&stdout(&out));
    let bound = records[0]["bound"].as_f64().unwrap();
    assert!((bound - 0.4030).abs() < 1e-3, "bound {bound}");
}

#[test]
fn exit_codes_follow_the_contract() {
    // Usage error: unknown flag.
    let out = run(&["fisher", "--familia", "x"]);
    assert_eq!(out.status.code(), Some(1), "{out:?}");
    // Domain error: p < 1.
    let out = run(&["fisher", "--family", "gaussian-shift", "--theta", "0", "--p", "0.5"]);
    assert_eq!(out.status.code(), Some(2), "{out:?}");
    // Domain error: score-free family.
    let out = run(&[
        "fisher",
        "--family",
        "symmetric-stable(1.5)",
        "--theta",
        "0",
        "--p",
        "2",
    ]);
    assert_eq!(out.status.code(), Some(2), "{out:?}");
    // Domain error: sub-quadratic exponents are rejected at construction.
    let out = run(&["conjugate", "--phi", "power(1.5)"]);
    assert_eq!(out.status.code(), Some(2), "{out:?}");
}

#[test]
fn verify_runs_and_is_deterministic_across_workers() {
    let scn = write_scenario("det.scn", SMALL_SCENARIO);
    let out_a = tmp("det_a.jsonl");
    let out_b = tmp("det_b.jsonl");
    let run_with = |workers: &str, out: &Path| {
        let o = bin()
            .args([
                "verify",
                "--scenario",
                scn.to_str().unwrap(),
                "--workers",
                workers,
                "--out",
                out.to_str().unwrap(),
            ])
            .output()
            .unwrap();
        assert!(o.status.success(), "{o:?}");
    };
    run_with("1", &out_a);
    run_with("4", &out_b);
    let a = fs::read(&out_a).unwrap();
    let b = fs::read(&out_b).unwrap();
    assert_eq!(a, b, "worker count changed verify output");
}

#[test]
fn verify_report_embeds_reproducible_scenario() {
    let scn = write_scenario("round.scn", SMALL_SCENARIO);
    let out_a = tmp("round_a.jsonl");
    let o = bin()
        .args([
            "verify",
            "--scenario",
            scn.to_str().unwrap(),
            "--out",
            out_a.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(o.status.success(), "{o:?}");
    let record: serde_json::Value =
        serde_json::from_str(fs::read_to_string(&out_a).unwrap().lines().next().unwrap())
            .unwrap();
    // Re-serialize the embedded scenario as TOML and run it again.
    let embedded = &record["scenario"];
    let toml_text = toml::to_string(embedded).unwrap();
    let scn2 = write_scenario("round2.scn", &toml_text);
    let out_b = tmp("round_b.jsonl");
    let o = bin()
        .args([
            "verify",
            "--scenario",
            scn2.to_str().unwrap(),
            "--out",
            out_b.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(o.status.success(), "{o:?}");
    assert_eq!(
        fs::read(&out_a).unwrap(),
        fs::read(&out_b).unwrap(),
        "embedded scenario did not reproduce the report"
    );
}

#[test]
fn verify_seed_must_come_from_config_not_wall_clock() {
    // A scenario without a seed key is rejected at parse time.
    let body = SMALL_SCENARIO.replace("seed = 7\n", "");
    let scn = write_scenario("noseed.scn", &body);
    let o = run(&["verify", "--scenario", scn.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1), "{o:?}");
    // Unknown keys are rejected too.
    let body = format!("{SMALL_SCENARIO}\nbogus_key = 1\n");
    let scn = write_scenario("unknown.scn", &body);
    let o = run(&["verify", "--scenario", scn.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1), "{o:?}");
}

#[test]
fn verify_writes_csv_mirror() {
    let scn = write_scenario("csv.scn", SMALL_SCENARIO);
    let csv = tmp("per_n.csv");
    let o = run(&[
        "verify",
        "--scenario",
        scn.to_str().unwrap(),
        "--csv",
        csv.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{o:?}");
    let text = fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("n,lhs,se,margin\n"), "{text}");
    assert_eq!(text.lines().count(), 3, "{text}");
}

#[test]
fn custom_family_flows_through_fisher_and_verify() {
    let def = r#"
name = "tri"
log_density = [[-6.0, -6.0], [0.0, 0.0], [6.0, -6.0]]
"#;
    let fam = tmp("tri.toml");
    fs::write(&fam, def).unwrap();
    // The truncated Laplace carrier has sign score: i_2 = 1 (up to the
    // renormalization of the truncated tail mass).
    let o = run(&[
        "fisher",
        "--family",
        "custom-shift(tri)",
        "--family-file",
        fam.to_str().unwrap(),
        "--theta",
        "0",
        "--p",
        "2",
    ]);
    assert!(o.status.success(), "{o:?}");
    let records = json_lines(&stdout(&o));
    let v = records[0]["value"]["Finite"].as_f64().unwrap();
    assert!((v - 1.0).abs() < 0.01, "i_2 = {v}");

    let scenario = r#"
family = "custom-shift(tri)"
theta0 = 0.0
estimator = "sample-mean"
n_grid = [10]
reps = 2000
seed = 3

[pairing]
kind = "lp"
q = 2.0
"#;
    let scn = write_scenario("tri.scn", scenario);
    let o = run(&[
        "verify",
        "--scenario",
        scn.to_str().unwrap(),
        "--family-file",
        fam.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{o:?}");
}

#[test]
fn natural_psi_of_laplace_is_unit() {
    let o = run(&[
        "natural-psi",
        "--family",
        "laplace-shift",
        "--p-grid",
        "2,4,8",
    ]);
    assert!(o.status.success(), "{o:?}");
    for rec in json_lines(&stdout(&o)) {
        let v = rec["value"].as_f64().unwrap();
        assert!((v - 1.0).abs() < 1e-8, "{rec}");
    }
}

#[test]
fn probe_flags_stable_divergence() {
    let o = run(&[
        "probe",
        "--dist",
        "symmetric-stable(1.5)",
        "--lp",
        "1",
        "--n-grid",
        "8,32,128",
        "--reps",
        "4000",
        "--seed",
        "5",
    ]);
    assert!(o.status.success(), "{o:?}");
    let records = json_lines(&stdout(&o));
    assert_eq!(records[0]["verdict"], "DivergenceDetected");
}

#[test]
fn regress_suite_subset_passes() {
    let o = run(&["regress-suite", "--only", "3,5,6,11"]);
    assert!(o.status.success(), "{o:?}");
    let text = stdout(&o);
    assert_eq!(text.matches("[PASS]").count(), 4, "{text}");
}
