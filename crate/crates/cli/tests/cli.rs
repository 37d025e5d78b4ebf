use std::fs;
use std::process::{Command, Output};

fn pope(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pope"))
        .args(args)
        .env_remove("POPE_CHUNK_SIZE")
        .env_remove("POPE_LATENCY_MS")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn gen_then_run_both_schemes() {
    let dir = tempfile::tempdir().unwrap();
    let ops = dir.path().join("ops.jsonl");
    let o = pope(&[
        "gen",
        "--n",
        "1500",
        "--seed",
        "4",
        "-o",
        ops.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let lines = fs::read_to_string(&ops).unwrap().lines().count();
    assert_eq!(lines, 1500 + 38);

    let reports = dir.path().join("r.jsonl");
    let o = pope(&[
        "run",
        "--ops",
        ops.to_str().unwrap(),
        "--scheme",
        "both",
        "--checkpoints",
        "100,1000",
        "-o",
        reports.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&reports).unwrap();
    let rows: Vec<serde_json::Value> = text
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0]["scheme"], "pope");
    assert_eq!(rows[1]["scheme"], "mope");
    for r in &rows {
        assert_eq!(r["mismatches"], 0);
        assert_eq!(r["complete"], true);
    }
    assert_eq!(rows[1]["incomparable_pairs"], 0);

    let o = pope(&["report", reports.to_str().unwrap(), "--format", "csv"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().count(), 3);
}

#[test]
fn same_seed_same_workload() {
    let a = pope(&[
        "gen",
        "--n",
        "300",
        "--seed",
        "9",
        "--placement",
        "repeated",
    ]);
    let b = pope(&[
        "gen",
        "--n",
        "300",
        "--seed",
        "9",
        "--placement",
        "repeated",
    ]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn ingest_csv_file() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("pay.csv");
    fs::write(
        &csv,
        "id,name,total_salary\n1,a,\"$1,200.50\"\n2,b,300\n3,c,oops\n4,d,7\n",
    )
    .unwrap();
    let o = pope(&[
        "ingest",
        csv.to_str().unwrap(),
        "--max-malformed",
        "0.5",
        "--payload-column",
        "id",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let ops: Vec<serde_json::Value> = stdout(&o)
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    let labels: Vec<u64> = ops.iter().map(|v| v["label"].as_u64().unwrap()).collect();
    assert_eq!(labels, [1201, 300, 7]);
    assert!(String::from_utf8_lossy(&o.stderr).contains("skipped 1"));

    let o = pope(&["ingest", csv.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn config_errors_exit_2() {
    for args in [
        &["run", "--n", "100", "--cap", "1"][..],
        &[
            "run",
            "--n",
            "100",
            "--transport",
            "socket",
            "--latency-ms",
            "3",
        ],
        &["run", "--n", "100", "--transport", "carrier-pigeon"],
        &["gen", "--n", "100", "--placement", "sideways"],
        &["run", "--n", "100", "--format", "xml"],
        &["run", "--bogus-flag"],
    ] {
        assert_eq!(pope(args).status.code(), Some(2), "{args:?}");
    }
    let o = Command::new(env!("CARGO_BIN_EXE_pope"))
        .args(["run", "--n", "100"])
        .env("POPE_CHUNK_SIZE", "0")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn session_failure_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let ops = dir.path().join("ops.jsonl");
    fs::write(
        &ops,
        "{\"op\":\"insert\",\"label\":5,\"payload\":[]}\n{\"op\":\"search\",\"lo\":9,\"hi\":1}\n",
    )
    .unwrap();
    let o = pope(&["run", "--ops", ops.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    let r: serde_json::Value = serde_json::from_str(stdout(&o).lines().next().unwrap()).unwrap();
    assert_eq!(r["complete"], false);
    assert_eq!(r["ops_completed"], 1);
}

#[test]
fn env_sets_chunk_size_and_latency() {
    let o = Command::new(env!("CARGO_BIN_EXE_pope"))
        .args(["run", "--n", "200", "--m", "3"])
        .env("POPE_CHUNK_SIZE", "7")
        .env("POPE_LATENCY_MS", "1")
        .output()
        .unwrap();
    assert!(o.status.success());
    let r: serde_json::Value = serde_json::from_str(stdout(&o).lines().next().unwrap()).unwrap();
    assert_eq!(r["chunk_size"], 7);
    assert_eq!(r["latency_ms"], 1.0);
}
