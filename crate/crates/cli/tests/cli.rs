//! End-to-end tests of the command-line interface: exit codes, output
//! schemas, and the determinism contract of `simulate`.

use std::path::PathBuf;
use std::process::{Command, Output};

use poisson_impulse_cli::config::RunConfig;

fn p0_json() -> serde_json::Value {
    serde_json::json!({
        "version": 1,
        "model": { "type": "gbm", "mu": 0.05, "sigma": 0.2 },
        "problem": {
            "r": 0.15,
            "lambda": 2.0,
            "gamma_d": 4.0,
            "gamma_u": 5.0,
            "payoff": { "type": "power", "delta": 0.3 }
        }
    })
}

struct Workspace {
    _dir: tempfile::TempDir,
    config: PathBuf,
}

fn write_config(value: &serde_json::Value) -> Workspace {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    std::fs::write(&config, serde_json::to_string_pretty(value).unwrap()).unwrap();
    Workspace { _dir: dir, config }
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_poisson-impulse"))
        .args(args)
        .output()
        .unwrap()
}

fn run_with_threads(args: &[&str], threads: usize) -> Output {
    Command::new(env!("CARGO_BIN_EXE_poisson-impulse"))
        .args(args)
        .env("RAYON_NUM_THREADS", threads.to_string())
        .output()
        .unwrap()
}

fn stdout_str(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn solve_reproduces_published_thresholds() {
    let ws = write_config(&p0_json());
    let out = run(&["solve", "--config", ws.config.to_str().unwrap()]);
    assert!(out.status.success(), "{out:?}");
    let json: serde_json::Value = serde_json::from_str(&stdout_str(&out)).unwrap();
    let a = json["a_star"].as_f64().unwrap();
    let b = json["b_star"].as_f64().unwrap();
    assert!((a - 0.309).abs() <= 0.005);
    assert!((b - 0.745).abs() <= 0.005);
    assert!(json["singular"]["a_s"].as_f64().unwrap() < a);
    assert!(json["residuals"]["psi"].as_f64().unwrap().abs() <= 1e-8);
}

#[test]
fn check_passes_on_reference_config() {
    let ws = write_config(&p0_json());
    let out = run(&["check", "--config", ws.config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let json: serde_json::Value = serde_json::from_str(&stdout_str(&out)).unwrap();
    assert_eq!(json["pass"], serde_json::Value::Bool(true));
}

#[test]
fn equal_gammas_exit_two_with_first_item_flagged() {
    let mut cfg = p0_json();
    cfg["problem"]["gamma_u"] = serde_json::json!(4.0);
    let ws = write_config(&cfg);
    let out = run(&["check", "--config", ws.config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let json: serde_json::Value = serde_json::from_str(&stdout_str(&out)).unwrap();
    assert_eq!(json["pass"], serde_json::Value::Bool(false));
    assert_eq!(json["items"][0]["code"], "gamma_order");
    assert_eq!(json["items"][0]["pass"], serde_json::Value::Bool(false));
}

#[test]
fn solve_rejects_unordered_gammas_as_assumption_failure() {
    let mut cfg = p0_json();
    cfg["problem"]["gamma_u"] = serde_json::json!(3.0);
    let ws = write_config(&cfg);
    let out = run(&["solve", "--config", ws.config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1)); // rejected before solving: config invariant
}

#[test]
fn drift_above_rate_exits_two_on_solve() {
    let mut cfg = p0_json();
    cfg["model"]["mu"] = serde_json::json!(0.2);
    let ws = write_config(&cfg);
    let out = run(&["solve", "--config", ws.config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "{out:?}");
}

#[test]
fn malformed_config_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.json");
    std::fs::write(&path, "{ not json").unwrap();
    let out = run(&["solve", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unknown_field_exits_one() {
    let mut cfg = p0_json();
    cfg["problem"]["typo_field"] = serde_json::json!(1.0);
    let ws = write_config(&cfg);
    let out = run(&["solve", "--config", ws.config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unsupported_version_exits_one() {
    let mut cfg = p0_json();
    cfg["version"] = serde_json::json!(2);
    let ws = write_config(&cfg);
    let out = run(&["check", "--config", ws.config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn missing_subcommand_exits_one() {
    let out = run(&[]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn bad_grid_spec_exits_one() {
    let ws = write_config(&p0_json());
    let out = run(&[
        "value",
        "--config",
        ws.config.to_str().unwrap(),
        "--grid",
        "3:1:0.1",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn value_emits_documented_csv_schema() {
    let ws = write_config(&p0_json());
    let out = run(&[
        "value",
        "--config",
        ws.config.to_str().unwrap(),
        "--grid",
        "0.1:1.5:0.1",
    ]);
    assert!(out.status.success());
    let text = stdout_str(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "x,V,V1,V2,region");
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 15);
    for row in &rows {
        let fields: Vec<&str> = row.split(',').collect();
        assert_eq!(fields.len(), 5);
        for v in &fields[..4] {
            v.parse::<f64>().unwrap();
        }
        assert!(matches!(fields[4], "below" | "middle" | "above"));
    }
    // all three regions appear on this grid
    for region in ["below", "middle", "above"] {
        assert!(rows.iter().any(|r| r.ends_with(region)));
    }
}

#[test]
fn sweep_emits_gaps_shrinking_towards_singular() {
    let ws = write_config(&p0_json());
    let out = run(&[
        "sweep",
        "--config",
        ws.config.to_str().unwrap(),
        "--lambdas",
        "2,20,200,2000",
    ]);
    assert!(out.status.success());
    let text = stdout_str(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "lambda,a_star,b_star,a_gap,b_gap");
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 4);
    for w in rows.windows(2) {
        assert!(w[1][3] < w[0][3], "a_gap not decreasing");
        assert!(w[1][4] < w[0][4], "b_gap not decreasing");
    }
}

#[test]
fn simulate_is_bit_identical_across_worker_counts() {
    let mut cfg = p0_json();
    cfg["sim"] = serde_json::json!({
        "x0": 1.0, "dt": 0.05, "n_paths": 96, "seed": 2024, "tail_tol": 1e-4
    });
    let ws = write_config(&cfg);
    let args = ["simulate", "--config", ws.config.to_str().unwrap()];
    let mut outputs = Vec::new();
    for threads in [1usize, 4, 8] {
        let out = run_with_threads(&args, threads);
        assert!(out.status.success(), "{out:?}");
        outputs.push(out.stdout);
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[1], outputs[2]);
    // schema sanity
    let json: serde_json::Value = serde_json::from_slice(&outputs[0]).unwrap();
    for key in [
        "estimate",
        "stderr",
        "components",
        "truncation_bound",
        "config_echo",
    ] {
        assert!(json.get(key).is_some(), "missing {key}");
    }
}

#[test]
fn simulate_without_sim_block_exits_one() {
    let ws = write_config(&p0_json());
    let out = run(&["simulate", "--config", ws.config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn output_block_routes_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("out.json");
    let mut cfg = p0_json();
    cfg["output"] = serde_json::json!({"format": "json", "path": target.to_str().unwrap()});
    let config = dir.path().join("config.json");
    std::fs::write(&config, serde_json::to_string(&cfg).unwrap()).unwrap();
    let out = run(&["solve", "--config", config.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(stdout_str(&out).is_empty());
    let written: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&target).unwrap()).unwrap();
    assert!(written["a_star"].as_f64().is_some());
}

#[test]
fn config_round_trips_through_serialization() {
    let mut cfg = p0_json();
    cfg["numerics"] = serde_json::json!({
        "quad_abs_tol": 1e-10, "quad_rel_tol": 1e-9, "root_tol": 1e-10, "grid_points": 256
    });
    cfg["sim"] = serde_json::json!({
        "x0": 0.5, "horizon": 60.0, "dt": 0.01, "n_paths": 100, "seed": 7, "tail_tol": 1e-4
    });
    cfg["output"] = serde_json::json!({"format": "csv", "path": "somewhere.csv"});
    let parsed = RunConfig::from_json(&serde_json::to_string(&cfg).unwrap()).unwrap();
    let reserialized = serde_json::to_string(&parsed).unwrap();
    let reparsed = RunConfig::from_json(&reserialized).unwrap();
    assert_eq!(parsed, reparsed);
}
