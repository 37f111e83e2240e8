use std::fs;
use std::io::Write;
use std::process::{Command, Output, Stdio};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_semionline"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn run_stdin(args: &[&str], input: &str) -> Output {
    let mut child = bin()
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .take()
        .unwrap()
        .write_all(input.as_bytes())
        .unwrap();
    child.wait_with_output().unwrap()
}

fn stdout_json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn gen_hard_agnostic_emits_instance() {
    let out = run(&[
        "gen",
        "--hard-agnostic",
        "--n",
        "8",
        "--d",
        "1",
        "--seed",
        "7",
    ]);
    let v = stdout_json(&out);
    assert_eq!(v["seed"], 7);
    assert_eq!(v["arrivals"].as_array().unwrap().len(), 8);
    assert_eq!(
        v["adversarial"]
            .as_array()
            .unwrap()
            .iter()
            .filter(|b| b.as_bool().unwrap())
            .count(),
        1
    );
    assert!(v["arrivals"]
        .as_array()
        .unwrap()
        .iter()
        .all(|a| a["identity"].is_null()));
    assert_eq!(v["ground_truth"].as_array().unwrap().len(), 8);
    // Same seed, same bytes.
    assert_eq!(
        out.stdout,
        run(&[
            "gen",
            "--hard-agnostic",
            "--n",
            "8",
            "--d",
            "1",
            "--seed",
            "7"
        ])
        .stdout
    );
}

#[test]
fn unknown_subcommand_exits_one_with_usage() {
    let out = run(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn validation_failures_exit_one() {
    let out = run(&["gen", "--hard-agnostic", "--n", "7", "--d", "1"]);
    assert_eq!(out.status.code(), Some(1));
    let diag: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(diag["error"], "invalid-parameter");

    let out = run_stdin(
        &["decompose"],
        r#"{"offline_count":1,"online_count":1,"adjacency":[[3]]}"#,
    );
    assert_eq!(out.status.code(), Some(1));
    let out = run(&["ski-rental", "--x", "0.5", "--trials", "10"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn decompose_reads_stdin() {
    let out = run_stdin(
        &["decompose"],
        r#"{"offline_count":2,"online_count":1,"adjacency":[[0,1]]}"#,
    );
    let v = stdout_json(&out);
    assert_eq!(v["components"][0]["ratio"], "1/2");
}

#[test]
fn run_integral_and_fractional_on_generated_instance() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("inst.json");
    let out = run(&[
        "gen",
        "--random",
        "--n",
        "12",
        "--d",
        "3",
        "--adversary",
        "targeted",
        "--seed",
        "2",
    ]);
    fs::write(&path, &out.stdout).unwrap();
    let p = path.to_str().unwrap();
    for alg in ["iterative", "structured", "agnostic"] {
        let v = stdout_json(&run(&[
            "run-integral",
            p,
            "--algorithm",
            alg,
            "--seed",
            "5",
        ]));
        assert_eq!(v["nu_G"], 12);
        assert!(v["size"].as_u64().unwrap() <= 12);
    }
    let v = stdout_json(&run(&["run-fractional", p]));
    assert!(v["weight"].as_f64().unwrap() >= v["bound"].as_f64().unwrap() * 12.0 - 1e-6);
    assert_eq!(v["certificate"]["cond1"], true);
    // The agnostic variant needs a perfectly matchable predicted graph.
    let out = run(&["run-fractional", p, "--agnostic"]);
    assert_eq!(out.status.code(), Some(1));

    let out = run(&[
        "gen", "--d-eps", "--n", "12", "--d", "2", "--eps", "0.05", "--seed", "2",
    ]);
    fs::write(&path, &out.stdout).unwrap();
    let v = stdout_json(&run(&["run-fractional", p, "--agnostic"]));
    assert!(v["certificate"].is_null());
    assert!(v["weight"].as_f64().unwrap() > 0.0);
}

#[test]
fn set_system_and_ski_rental() {
    let v = stdout_json(&run_stdin(
        &["set-system", "--method", "exact"],
        r#"{"n":5,"sets":[[0,1],[1,2],[2,3],[3,4]]}"#,
    ));
    assert!(v["value"].as_f64().unwrap() >= 0.8 - 1e-6);
    let v = stdout_json(&run(&["ski-rental", "--x", "0", "--u", "1"]));
    let e = std::f64::consts::E;
    assert!((v["competitive_ratio"].as_f64().unwrap() - e / (e - 1.0)).abs() < 1e-12);
    let v = stdout_json(&run(&[
        "ski-rental",
        "--x",
        "0.3",
        "--u",
        "0.7",
        "--trials",
        "1000",
        "--seed",
        "1",
    ]));
    assert!(v["monte_carlo"]["mean"].is_number());
}

fn write_config(dir: &tempfile::TempDir, name: &str, body: &str) -> String {
    let path = dir.path().join(name);
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn experiment_fractional_suite_passes_assert_bounds() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        &dir,
        "c.json",
        r#"{"generator":{"kind":"random","n":20,"d":8,"adversary":"anti-reserve","arrival":"alternating"},
            "algorithms":["fractional","structured"],"trials":30,"master_seed":3,"instances":10}"#,
    );
    let csv = dir.path().join("out.csv");
    let json = dir.path().join("out.json");
    let out = run(&[
        "experiment",
        "--config",
        &config,
        "--csv",
        csv.to_str().unwrap(),
        "--json",
        json.to_str().unwrap(),
        "--assert-bounds",
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let first = fs::read_to_string(&csv).unwrap();
    assert_eq!(first.lines().count(), 2 + 60);
    let report: Value = serde_json::from_str(&fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(report["records"].as_array().unwrap().len(), 60);

    // Byte-identical CSV on rerun, independent of the thread count.
    let out = run(&["experiment", "--config", &config, "--threads", "2"]);
    assert_eq!(String::from_utf8(out.stdout).unwrap(), first);
}

#[test]
fn agnostic_suites_pass_assert_bounds() {
    let dir = tempfile::tempdir().unwrap();
    for (name, body) in [
        (
            "hard.json",
            r#"{"generator":{"kind":"hard-agnostic","n":20,"d":3},
                "algorithms":["agnostic-integral"],"trials":5,"master_seed":1}"#,
        ),
        (
            "deps.json",
            r#"{"generator":{"kind":"d-eps","n":20,"d":2,"eps":0.05},
                "algorithms":["agnostic-fractional"],"trials":20,"master_seed":2,"instances":4}"#,
        ),
    ] {
        let config = write_config(&dir, name, body);
        let out = run(&["experiment", "--config", &config, "--assert-bounds"]);
        assert_eq!(
            out.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        assert!(String::from_utf8_lossy(&out.stderr).contains("PASS"));
    }
}
