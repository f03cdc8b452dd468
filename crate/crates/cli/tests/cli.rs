use std::path::Path;
use std::process::{Command, Output};

fn trajseek(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_trajseek"))
        .current_dir(dir)
        .env_remove("TRAJSEEK_WORKERS")
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = trajseek(dir, args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn dataset(dir: &Path) {
    ok(dir, &["gen", "--profile", "uniform", "--trajectories", "60", "--timesteps", "60", "--seed", "1", "--out", "d.csv"]);
    ok(dir, &["gen", "--profile", "uniform", "--trajectories", "60", "--timesteps", "60", "--seed", "2", "--sample", "4", "--out", "q.csv"]);
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

#[test]
fn search_matches_oracle_for_every_planner() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    dataset(dir);
    ok(dir, &["oracle", "--db", "d.csv", "--queries", "q.csv", "--d", "15", "--out", "oracle.csv"]);
    let expected = read(dir, "oracle.csv");
    assert!(expected.lines().count() > 1);
    let runs: [&[&str]; 6] = [
        &["--planner", "periodic", "--batch-size", "120"],
        &["--planner", "setsplit-fixed", "--num-batches", "9"],
        &["--planner", "setsplit-max", "--max", "30"],
        &["--planner", "setsplit-minmax", "--min", "10", "--max", "40"],
        &["--planner", "greedy-min", "--bound", "20"],
        &["--planner", "greedy-max", "--bound", "20"],
    ];
    let mut interactions = Vec::new();
    for (k, extra) in runs.iter().enumerate() {
        let out = format!("r{k}.csv");
        let stats = format!("s{k}.json");
        let mut args = vec!["search", "--db", "d.csv", "--queries", "q.csv", "--d", "15", "--bins", "200", "--sorted"];
        args.extend_from_slice(extra);
        args.extend_from_slice(&["--out", &out, "--stats", &stats]);
        ok(dir, &args);
        assert_eq!(read(dir, &out), expected, "planner {extra:?}");
        let json: serde_json::Value = serde_json::from_str(&read(dir, &stats)).unwrap();
        assert_eq!(json["planner"]["planner"], extra[1]);
        let per_batch = json["per_batch"].as_array().unwrap();
        assert_eq!(per_batch.len() as u64, json["batches"].as_u64().unwrap());
        let tm = json["temporal_misses"].as_u64().unwrap();
        let sm = json["spatial_misses"].as_u64().unwrap();
        let hits = json["hits"].as_u64().unwrap();
        assert_eq!(tm + sm + hits, json["interactions"].as_u64().unwrap());
        interactions.push(json["interactions"].as_u64().unwrap());
    }
    interactions.dedup();
    assert!(interactions.len() > 1, "plans should differ in work");
}

#[test]
fn sorted_output_is_identical_across_workers() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    dataset(dir);
    let mut files = Vec::new();
    for w in ["1", "2", "4"] {
        let out = format!("w{w}.csv");
        ok(
            dir,
            &["--workers", w, "search", "--db", "d.csv", "--queries", "q.csv", "--d", "4", "--batch-size", "17", "--sorted", "--out", &out],
        );
        files.push(std::fs::read(dir.join(out)).unwrap());
    }
    assert!(files.windows(2).all(|w| w[0] == w[1]));

    // The environment variable sets the worker count when no flag is given.
    let out = Command::new(env!("CARGO_BIN_EXE_trajseek"))
        .current_dir(dir)
        .env("TRAJSEEK_WORKERS", "3")
        .args(["search", "--db", "d.csv", "--queries", "q.csv", "--d", "4", "--batch-size", "17", "--stats", "env.json"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let json: serde_json::Value = serde_json::from_str(&read(dir, "env.json")).unwrap();
    assert_eq!(json["workers"], 3);
}

#[test]
fn generation_is_seeded() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    for name in ["a.csv", "b.csv"] {
        ok(dir, &["gen", "--profile", "exp", "--trajectories", "30", "--seed", "9", "--out", name]);
    }
    ok(dir, &["gen", "--profile", "exp", "--trajectories", "30", "--seed", "10", "--out", "c.csv"]);
    assert_eq!(read(dir, "a.csv"), read(dir, "b.csv"));
    assert_ne!(read(dir, "a.csv"), read(dir, "c.csv"));
}

#[test]
fn errors_exit_nonzero() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    dataset(dir);
    let cases: [&[&str]; 5] = [
        &["search", "--db", "missing.csv", "--queries", "q.csv", "--d", "1", "--batch-size", "5"],
        &["search", "--db", "d.csv", "--queries", "q.csv", "--d", "1"],
        &["search", "--db", "d.csv", "--queries", "q.csv", "--d", "-1", "--batch-size", "5"],
        &["search", "--db", "d.csv", "--queries", "q.csv", "--d", "1", "--batch-size", "5", "--bogus"],
        &["frobnicate"],
    ];
    for args in cases {
        let out = trajseek(dir, args);
        assert!(!out.status.success(), "{args:?} should fail");
        assert!(!out.stderr.is_empty());
    }
    std::fs::write(dir.join("bad.csv"), "traj_id,seg_id,x_s,y_s,z_s,t_s,x_e,y_e,z_e,t_e\n1,0,0,0,0,5,1,1,1,2\n").unwrap();
    let out = trajseek(dir, &["index", "--db", "bad.csv", "--bins", "4"]);
    assert!(!out.status.success());
}

#[test]
fn index_reports_stats() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    dataset(dir);
    let out = ok(dir, &["index", "--db", "d.csv", "--bins", "50"]);
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(json["bins"], 50);
    assert_eq!(json["segments"].as_u64().unwrap() as usize, read(dir, "d.csv").lines().count() - 1);
}

#[test]
fn sweep_and_model_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    dataset(dir);
    ok(dir, &["sweep", "--db", "d.csv", "--queries", "q.csv", "--d", "4", "--bins", "200", "--s", "10:50:10", "--reps", "1", "--out", "sweep.csv"]);
    let sweep = read(dir, "sweep.csv");
    let rows: Vec<&str> = sweep.lines().collect();
    assert_eq!(rows.len(), 6);
    assert!(rows[0].starts_with("s,batches,interactions,hits"));
    let hits: Vec<&str> = rows[1..].iter().map(|r| r.split(',').nth(3).unwrap()).collect();
    assert!(hits.windows(2).all(|w| w[0] == w[1]), "hits do not depend on batch size");

    ok(
        dir,
        &["calibrate", "--out", "model.toml", "--d", "4", "--c-min", "5", "--c-max", "400", "--c-points", "4", "--reps", "1", "--cpu-queries", "300"],
    );
    assert!(read(dir, "model.toml").contains("version = 1"));
    ok(dir, &["alpha", "--db", "d.csv", "--queries", "q.csv", "--bins", "200", "--model", "model.toml", "--s", "10,30,50", "--epochs", "5"]);
    let out = ok(dir, &["predict", "--db", "d.csv", "--queries", "q.csv", "--bins", "200", "--model", "model.toml", "--s", "10:50:10"]);
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let best = json["recommended_batch_size"].as_u64().unwrap();
    assert!([10, 20, 30, 40, 50].contains(&best));
    assert_eq!(json["predictions"].as_array().unwrap().len(), 5);
}
