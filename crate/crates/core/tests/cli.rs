use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ratiotrace::ledger::logfile;
use ratiotrace::Snapshot;

const SMALL: &str = r#"{
  "currencies": [
    {"currency_id": 1, "beta1": "0.5", "beta0": "2", "miner_fee_rate": "0.01", "miner_reward": "5", "initial_endowment": "10"},
    {"currency_id": 2, "beta1": "0.25", "beta0": "3", "miner_fee_rate": "0.02", "miner_reward": "4", "initial_endowment": "20"}
  ],
  "turns": 6,
  "transactions_per_user_per_turn": 1,
  "seed": 11
}"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ratiotrace"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn ratiotrace")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn simulate(dir: &Path) -> (PathBuf, PathBuf) {
    let config = dir.join("sim.json");
    fs::write(&config, SMALL).unwrap();
    let log = dir.join("log.jsonl");
    let truth = dir.join("truth.json");
    ok(&[
        "simulate",
        "--config",
        s(&config),
        "--out",
        s(&log),
        "--ground-truth",
        s(&truth),
    ]);
    (log, truth)
}

#[test]
fn simulate_writes_one_record_per_line() {
    let dir = tempfile::tempdir().unwrap();
    let (log, truth) = simulate(dir.path());
    let text = fs::read_to_string(&log).unwrap();
    let records = logfile::read_log(text.as_bytes()).unwrap();
    assert_eq!(records.len(), text.lines().count());
    assert!(text.starts_with(r#"{"turn":0,"currency":1,"src":"MINT","#));
    let users = logfile::ground_truth_from_json(&fs::read_to_string(&truth).unwrap()).unwrap();
    assert!(!users.is_empty());
    assert!(users.iter().all(|u| u.accounts.len() == 2));
}

#[test]
fn pipeline_finds_a_real_user() {
    let dir = tempfile::tempdir().unwrap();
    let (log, truth) = simulate(dir.path());
    let snap_path = dir.path().join("snap.json");
    ok(&[
        "snapshot",
        "--log",
        s(&log),
        "--time",
        "6",
        "--out",
        s(&snap_path),
    ]);
    let snap = Snapshot::from_json(&fs::read_to_string(&snap_path).unwrap()).unwrap();
    assert_eq!(snap.time, 6);

    // Portfolio of a ground-truth user with both balances positive.
    let users = logfile::ground_truth_from_json(&fs::read_to_string(&truth).unwrap()).unwrap();
    let (user, balances) = users
        .iter()
        .find_map(|u| {
            let b: Option<Vec<_>> = u
                .accounts
                .iter()
                .map(|a| snap.db(a.currency).and_then(|db| db.balance_of(a.address)))
                .collect();
            b.map(|b| (u, b))
        })
        .expect("some user kept both balances");
    let holdings: Vec<_> = user
        .accounts
        .iter()
        .map(|a| a.currency)
        .zip(balances)
        .collect();
    let portfolio = ratiotrace::Portfolio::from_holdings(&holdings).unwrap();
    let port_path = dir.path().join("portfolio.json");
    fs::write(&port_path, portfolio.to_json().unwrap()).unwrap();

    let found = ok(&[
        "find",
        "--snapshot",
        s(&snap_path),
        "--portfolio",
        s(&port_path),
        "--threshold",
        "1.9",
        "--top",
        "3",
    ]);
    let report: serde_json::Value = serde_json::from_slice(&found.stdout).unwrap();
    let best = &report["best"];
    assert!(best["score"].as_str().unwrap().parse::<f64>().unwrap() >= 1.9);
    assert!(report["retained"].as_array().unwrap().len() <= 3);
    assert_eq!(
        report["diagnostics"]["pivots"].as_u64().unwrap() as usize,
        snap.dbs[0].len()
    );

    let oracle_path = dir.path().join("oracle.json");
    ok(&[
        "oracle",
        "--snapshot",
        s(&snap_path),
        "--portfolio",
        s(&port_path),
        "--out",
        s(&oracle_path),
    ]);
    let oracle: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&oracle_path).unwrap()).unwrap();
    let of: f64 = oracle["best"]["score"].as_str().unwrap().parse().unwrap();
    let ff: f64 = best["score"].as_str().unwrap().parse().unwrap();
    assert!(of >= ff);
}

#[test]
fn experiment_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    let sim: serde_json::Value = serde_json::from_str(SMALL).unwrap();
    let config = serde_json::json!({
        "sim": sim,
        "m_values": [1, 2],
        "queries_per_m": 10,
        "snapshot_time": 6,
        "threshold": {"normalized": "0.9"},
        "seed": 3
    });
    let config_path = dir.path().join("exp.json");
    fs::write(&config_path, config.to_string()).unwrap();
    let out_dir = dir.path().join("out");
    ok(&[
        "experiment",
        "--config",
        s(&config_path),
        "--out-dir",
        s(&out_dir),
    ]);
    let missing = fs::read_to_string(out_dir.join("missing_rate.csv")).unwrap();
    let mut lines = missing.lines();
    assert_eq!(lines.next(), Some("m,queries,misses,missing_rate"));
    assert!(lines.next().unwrap().starts_with("1,"));
    for f in ["scores_m2.csv", "histogram_m2.csv", "result.json"] {
        assert!(out_dir.join(f).exists(), "{f} missing");
    }
}

#[test]
fn bad_inputs_fail_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let (log, _) = simulate(dir.path());

    let rates = dir.path().join("rates.json");
    fs::write(&rates, r#"{"rates":{"1":"2"}}"#).unwrap();
    let out = run(&[
        "snapshot",
        "--log",
        s(&log),
        "--time",
        "3",
        "--rates",
        s(&rates),
        "--out",
        s(&dir.path().join("x.json")),
    ]);
    assert!(!out.status.success());
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());

    let corrupt = dir.path().join("corrupt.jsonl");
    fs::write(&corrupt, "{\"turn\":0}\n").unwrap();
    let out = run(&[
        "snapshot",
        "--log",
        s(&corrupt),
        "--time",
        "1",
        "--out",
        s(&dir.path().join("y.json")),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 1"));

    let config = dir.path().join("bad.json");
    fs::write(
        &config,
        SMALL
            .replace("\"beta0\": \"2\"", "\"beta0\": \"0\"")
            .replace("\"beta1\": \"0.5\"", "\"beta1\": \"0\""),
    )
    .unwrap();
    let out = run(&[
        "simulate",
        "--config",
        s(&config),
        "--out",
        s(&dir.path().join("z.jsonl")),
    ]);
    assert!(!out.status.success());

    let out = run(&[
        "find",
        "--snapshot",
        "/nonexistent",
        "--portfolio",
        "/nonexistent",
        "--threshold",
        "1",
    ]);
    assert!(!out.status.success());
    let out = run(&[
        "find",
        "--snapshot",
        "a",
        "--portfolio",
        "b",
        "--threshold",
        "not-a-number",
    ]);
    assert!(!out.status.success());
}
