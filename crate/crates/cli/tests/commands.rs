use std::process::{Command, Output};

use serde_json::Value;

fn drpp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_drpp"))
        .args(args)
        .output()
        .unwrap()
}

fn json(args: &[&str]) -> Value {
    let mut full = args.to_vec();
    full.push("--json");
    let out = drpp(&full);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn envelope_has_the_shared_fields() {
    for args in [
        &["threshold", "--B", "1"][..],
        &["plan", "--graph", "star:4"],
        &["rates", "--graph", "path:4", "--p", "0.1"],
        &[
            "simulate", "--graph", "path:3", "--p", "0.1", "--shots", "100",
        ],
    ] {
        let v = json(args);
        assert_eq!(v["command"], args[0]);
        for key in ["config", "results", "version"] {
            assert!(v.get(key).is_some(), "{args:?} lacks {key}");
        }
    }
}

#[test]
fn threshold_scales_with_coupling_and_rejects_bad_input() {
    let one = json(&["threshold", "--B", "1"])["results"]["t_crit"]
        .as_f64()
        .unwrap();
    let two = json(&["threshold", "--B", "2"])["results"]["t_crit"]
        .as_f64()
        .unwrap();
    assert!((two - 2.0 * one).abs() < 1e-12);
    let out = drpp(&["threshold", "--B", "-1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
}

#[test]
fn simulate_reports_success_and_failure() {
    let v = json(&[
        "simulate", "--graph", "path:3", "--p", "0.1", "--shots", "10000", "--seed", "7",
    ]);
    assert_eq!(v["results"]["status"], "ok");
    assert!(v["results"]["fidelity"].as_f64().unwrap() >= 0.99);

    let v = json(&[
        "simulate", "--graph", "path:3", "--p", "0.4", "--shots", "500",
    ]);
    assert_eq!(v["results"]["status"], "pair_distillation_failed");
    assert!(v["results"]["diagnostics"].is_string());
}

#[test]
fn same_seed_same_bytes() {
    let args = [
        "simulate", "--graph", "star:5", "--p", "0.2", "--shots", "3000", "--seed", "3", "--json",
    ];
    assert_eq!(drpp(&args).stdout, drpp(&args).stdout);
    let other = [
        "simulate", "--graph", "star:5", "--p", "0.2", "--shots", "3000", "--seed", "4", "--json",
    ];
    assert_ne!(drpp(&args).stdout, drpp(&other).stdout);
}

#[test]
fn seed_comes_from_the_environment() {
    let args = [
        "simulate", "--graph", "cycle:4", "--p", "0.2", "--shots", "2000", "--json",
    ];
    let with_env = Command::new(env!("CARGO_BIN_EXE_drpp"))
        .args(args)
        .env("DRPP_SEED", "9")
        .output()
        .unwrap();
    let mut explicit = args.to_vec();
    explicit.extend(["--seed", "9"]);
    assert_eq!(with_env.stdout, drpp(&explicit).stdout);
}

#[test]
fn temperature_and_probability_agree() {
    let b = 1.0f64;
    let t = 0.8f64;
    let p = 1.0 / (1.0 + (b / t).exp());
    let a = json(&["rates", "--graph", "path:4", "--T", "0.8", "--B", "1"]);
    let c = json(&["rates", "--graph", "path:4", "--p", &p.to_string()]);
    assert_eq!(a["results"], c["results"]);
    assert_eq!(drpp(&["rates", "--graph", "path:4"]).status.code(), Some(2));
    assert_eq!(
        drpp(&["rates", "--graph", "path:4", "--T", "1"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        drpp(&["rates", "--graph", "path:4", "--p", "0.1", "--B", "1"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn rates_plan_and_optimality_examples() {
    let v = json(&["rates", "--family", "ghz:5", "--p", "0.05"]);
    assert_eq!(v["results"]["n_geo_formula"], 4);
    let v = json(&["plan", "--graph", "path:10"]);
    assert_eq!(v["results"]["n_geo_plan"], 3);
    let v = json(&["check-optimality", "--graph", "cycle:3", "--p", "0.1"]);
    let edges = v["results"]["edges"].as_array().unwrap();
    assert_eq!(edges.len(), 3);
    assert!(edges.iter().all(|e| e["applies"] == false));
    let v = json(&[
        "check-optimality",
        "--graph",
        "cycle:4",
        "--p",
        "0.1",
        "--alice",
        "0,1",
    ]);
    assert_eq!(v["results"]["matches"], true);
    assert_eq!(v["results"]["pair_budget"], 2);
}

#[test]
fn capacity_and_usage_exit_codes() {
    assert_eq!(
        drpp(&["check-optimality", "--graph", "path:9", "--p", "0.1"])
            .status
            .code(),
        Some(3)
    );
    assert_eq!(
        drpp(&["plan", "--graph", "nonsense:3"]).status.code(),
        Some(2)
    );
    assert_eq!(
        drpp(&["simulate", "--graph", "path:3", "--p", "0.1", "--shots", "0"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(drpp(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn edge_list_files_are_accepted() {
    let dir = std::env::temp_dir().join(format!("drpp-cli-test-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("square.txt");
    std::fs::write(&path, "# square\n4\n0 1\n1 2\n2 3\n3 0\n").unwrap();
    let from_file = json(&["plan", "--graph", path.to_str().unwrap()]);
    let named = json(&["plan", "--graph", "cycle:4"]);
    assert_eq!(from_file["results"]["rounds"], named["results"]["rounds"]);
    assert!(from_file["results"]["n_geo_formula"].is_null());
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn verify_oracle_small() {
    let v = json(&["verify-oracle", "--max-n", "3", "--no-six"]);
    assert_eq!(v["results"]["passed"], true);
}
