use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const H0: &str = "3 4\n1 2 3\n2 3 4\n1 4\n";

// Two 4-cliques of 2-pin edges joined by one bridge.
const BARBELL: &str = "13 8\n\
1 2\n1 3\n1 4\n2 3\n2 4\n3 4\n\
5 6\n5 7\n5 8\n6 7\n6 8\n7 8\n\
4 5\n";

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kspecpart"))
        .args(args)
        .env_remove("KSPECPART_THREADS")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn file(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn evaluate_reports_cut_and_balance() {
    let dir = TempDir::new().unwrap();
    let hgr = file(&dir, "h0.hgr", H0);
    let sol = file(&dir, "s.sol", "0\n1\n1\n0\n");
    let o = run(&["evaluate", "--hgr", s(&hgr), "--k", "2", "--eps", "0.25", "--sol", s(&sol)]);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    assert!(out.contains("cutsize 2"), "{out}");
    assert!(out.contains("balanced true"));
    assert!(out.contains("blocks 0.5000 0.5000"));
}

#[test]
fn partition_finds_the_bridge() {
    let dir = TempDir::new().unwrap();
    let hgr = file(&dir, "b.hgr", BARBELL);
    let hint = file(&dir, "hint.sol", "0\n1\n0\n1\n0\n1\n0\n1\n");
    let out = dir.path().join("out.sol");
    let o = run(&[
        "partition", "--hgr", s(&hgr), "--k", "2", "--eps", "0",
        "--hint", s(&hint), "--out", s(&out), "--no-timings",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("cutsize 1\n"));
    let labels: Vec<u32> = fs::read_to_string(&out)
        .unwrap()
        .lines()
        .map(|l| l.trim().parse().unwrap())
        .collect();
    assert_eq!(labels.len(), 8);
    assert!(labels[..4].iter().all(|&b| b == labels[0]));
    assert!(labels[4..].iter().all(|&b| b != labels[0]));
}

#[test]
fn partition_report_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let hgr = file(&dir, "b.hgr", BARBELL);
    let mut reports = Vec::new();
    for (i, threads) in ["1", "3"].iter().enumerate() {
        let out = dir.path().join(format!("o{i}.sol"));
        let rep = dir.path().join(format!("r{i}.json"));
        let o = run(&[
            "--threads", threads, "partition", "--hgr", s(&hgr), "--k", "3", "--eps", "0.5",
            "--out", s(&out), "--report", s(&rep), "--no-timings", "--seed", "11",
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        reports.push((fs::read(&out).unwrap(), fs::read(&rep).unwrap()));
    }
    assert_eq!(reports[0], reports[1]);
    let json: serde_json::Value = serde_json::from_slice(&reports[0].1).unwrap();
    assert_eq!(json["input"]["k"], 3);
    assert_eq!(json["final"]["seed"], 11);
    assert_eq!(json["iterations"].as_array().unwrap().len(), 2);
    assert_eq!(json["iterations"][0]["seconds"], 0.0);
}

#[test]
fn overlay_exports_coarse_instance() {
    let dir = TempDir::new().unwrap();
    let hgr = file(&dir, "b.hgr", BARBELL);
    let a = file(&dir, "a.sol", "0\n0\n0\n0\n1\n1\n1\n1\n");
    let b = file(&dir, "b.sol", "0\n0\n0\n1\n0\n1\n1\n1\n");
    let out = dir.path().join("o.sol");
    let prefix = dir.path().join("coarse");
    let o = run(&[
        "overlay", "--hgr", s(&hgr), "--k", "2", "--eps", "0", "--sol", s(&a), "--sol", s(&b),
        "--out", s(&out), "--export-coarse", s(&prefix), "--delta", "2",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("cutsize 1\n"));
    assert!(prefix.with_extension("hgr").exists());
    let lp = fs::read_to_string(prefix.with_extension("lp")).unwrap();
    assert!(lp.contains("Maximize") && lp.contains("Binary"));
}

#[test]
fn hint_and_brute_agree_on_tiny_input() {
    let dir = TempDir::new().unwrap();
    let hgr = file(&dir, "h0.hgr", H0);
    let out = dir.path().join("h.sol");
    let o = run(&["hint", "--hgr", s(&hgr), "--k", "2", "--eps", "0.25", "--out", s(&out)]);
    assert_eq!(code(&o), 0);
    let b = run(&["brute", "--hgr", s(&hgr), "--k", "2", "--eps", "0.25"]);
    assert_eq!(code(&b), 0);
    assert!(stdout(&o).contains("cutsize 2\n"));
    assert!(stdout(&b).contains("cutsize 2\n"));
}

#[test]
fn distill_debug_lists_tree_edges() {
    let dir = TempDir::new().unwrap();
    let hgr = file(&dir, "b.hgr", BARBELL);
    let csv = dir.path().join("emb.csv");
    let o = run(&[
        "distill-debug", "--hgr", s(&hgr), "--k", "2", "--eps", "0.1", "--tree", "2",
        "--embedding-csv", s(&csv),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rows = stdout(&o).lines().filter(|l| !l.starts_with('#')).count();
    assert_eq!(rows, 7);
    assert!(fs::read_to_string(&csv).unwrap().starts_with("vertex,x0"));
    let far = run(&["distill-debug", "--hgr", s(&hgr), "--k", "2", "--eps", "0.1", "--tree", "99"]);
    assert_eq!(code(&far), 1);
}

#[test]
fn bench_writes_csv_and_skips_bad_entries() {
    let dir = TempDir::new().unwrap();
    file(&dir, "h0.hgr", H0);
    let manifest = file(
        &dir,
        "m.txt",
        &format!("h0 h0.hgr - 2 0.25\nbad h0.hgr {} 2 0.25\n", "0".repeat(64)),
    );
    let out = dir.path().join("t.csv");
    let o = run(&[
        "bench", "--manifest", s(&manifest), "--out", s(&out), "--no-timings",
        "--cache-dir", s(&dir.path().join("cache")),
    ]);
    assert_eq!(code(&o), 0);
    let csv = fs::read_to_string(&out).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert!(csv.lines().nth(1).unwrap().starts_with("h0,4,3,2,0.25,"));
    assert!(String::from_utf8_lossy(&o.stderr).contains("skipped bad"));
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let hgr = file(&dir, "h0.hgr", H0);
    let garbage = file(&dir, "g.hgr", "3 4\n1 2 x\n");
    let sol = file(&dir, "s.sol", "0\n1\n");
    let out = dir.path().join("o.sol");

    assert_eq!(code(&run(&["--help"])), 0);
    assert_eq!(code(&run(&["--version"])), 0);
    assert_eq!(code(&run(&["partition"])), 1);
    assert_eq!(code(&run(&["frobnicate"])), 1);
    let k1 = run(&["hint", "--hgr", s(&hgr), "--k", "1", "--eps", "0.1", "--out", s(&out)]);
    assert_eq!(code(&k1), 1);
    let neg = run(&["hint", "--hgr", s(&hgr), "--k", "2", "--eps", "-1", "--out", s(&out)]);
    assert_eq!(code(&neg), 1);

    let missing = run(&["hint", "--hgr", "/nonexistent.hgr", "--k", "2", "--eps", "0.1", "--out", s(&out)]);
    assert_eq!(code(&missing), 2);
    let parse = run(&["hint", "--hgr", s(&garbage), "--k", "2", "--eps", "0.1", "--out", s(&out)]);
    assert_eq!(code(&parse), 2);
    assert!(String::from_utf8_lossy(&parse.stderr).contains("line 2"));
    let short = run(&["evaluate", "--hgr", s(&hgr), "--k", "2", "--eps", "0.1", "--sol", s(&sol)]);
    assert_eq!(code(&short), 2);

    let infeasible = run(&["brute", "--hgr", s(&hgr), "--k", "5", "--eps", "0"]);
    assert_eq!(code(&infeasible), 3);
    let hint = run(&["hint", "--hgr", s(&hgr), "--k", "5", "--eps", "0", "--out", s(&out)]);
    assert_eq!(code(&hint), 3);
}
