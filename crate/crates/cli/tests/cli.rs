use std::path::Path;
use std::process::Command;

use serde_json::Value;

fn percolab(args: &[&str], out: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_percolab"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn mu_is_exact_at_p_one() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "mu",
        "--p",
        "1.0",
        "--d",
        "2",
        "--dir",
        "1,0",
        "--scales",
        "8,16",
        "--replicas",
        "10",
        "--seed",
        "7",
    ];
    let out = percolab(&args, dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let results = read_json(&dir.path().join("results.json"));
    let est = &results["results"]["estimates"][0];
    assert_eq!(est["mu_hat"], 1.0);
    assert_eq!(est["ci_lo"], 1.0);
    assert_eq!(est["ci_hi"], 1.0);
    for s in est["sample"]["scales"].as_array().unwrap() {
        assert!(s["values"].as_array().unwrap().iter().all(|v| v == 1.0));
    }
    let plot = std::fs::read_to_string(dir.path().join("plot.csv")).unwrap();
    assert!(plot.starts_with("series,x,y,ci_lo,ci_hi\n1_0,8,1,1,1\n"));
}

#[test]
fn outputs_are_deterministic_across_thread_counts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let base = [
        "mu",
        "--p",
        "0.7",
        "--dir",
        "1,0;1,1",
        "--scales",
        "8,16",
        "--replicas",
        "30",
        "--seed",
        "11",
    ];
    let one: Vec<&str> = base.iter().copied().chain(["--threads", "1"]).collect();
    let two: Vec<&str> = base.iter().copied().chain(["--threads", "3"]).collect();
    assert!(percolab(&one, a.path()).status.success());
    assert!(percolab(&two, b.path()).status.success());
    assert_eq!(
        std::fs::read(a.path().join("plot.csv")).unwrap(),
        std::fs::read(b.path().join("plot.csv")).unwrap()
    );
    // results.json embeds the spec, whose thread count and output path differ.
    let (mut ra, mut rb) = (
        read_json(&a.path().join("results.json")),
        read_json(&b.path().join("results.json")),
    );
    for r in [&mut ra, &mut rb] {
        r["spec"]["threads"] = Value::Null;
        r["spec"]["output"] = Value::Null;
    }
    assert_eq!(ra, rb);
    let manifest = read_json(&a.path().join("manifest.json"));
    let files = manifest["files"].as_array().unwrap();
    assert_eq!(files.len(), 2);
    for f in files {
        let body = std::fs::read(a.path().join(f["name"].as_str().unwrap())).unwrap();
        assert_eq!(f["bytes"].as_u64().unwrap() as usize, body.len());
        assert_eq!(f["sha256"].as_str().unwrap().len(), 64);
    }
}

#[test]
fn rate_counts_are_consistent() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "rate",
        "--p",
        "0.7",
        "--d",
        "2",
        "--dir",
        "1,0",
        "--eps",
        "0.3",
        "--scales",
        "16,24,32",
        "--replicas",
        "1000",
        "--seed",
        "7",
        "--ball-replicas",
        "20",
        "--ball-scale",
        "32",
    ];
    let out = percolab(&args, dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let results = read_json(&dir.path().join("results.json"));
    for tail in ["upper", "lower"] {
        let r = &results["results"]["rates"][0][tail];
        let counts = r["counts"].as_array().unwrap();
        let totals = r["totals"].as_array().unwrap();
        let invalid = r["invalid"].as_array().unwrap();
        assert_eq!(counts.len(), 3);
        for i in 0..3 {
            let (c, t, u) = (
                counts[i].as_u64().unwrap(),
                totals[i].as_u64().unwrap(),
                invalid[i].as_u64().unwrap(),
            );
            assert!(c <= t);
            assert_eq!(t + u, 1000);
        }
    }
    assert!(dir.path().join("rate_upper_1_0.csv").exists());
    assert!(dir.path().join("manifest.json").exists());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = percolab(&["mu", "--p", "2.0"], dir.path());
    assert_eq!(bad.status.code(), Some(2));
    assert!(!dir.path().join("manifest.json").exists());
    let huge = percolab(
        &[
            "mu",
            "--p",
            "0.7",
            "--scales",
            "100000",
            "--replicas",
            "1",
            "--max-vertices",
            "1000",
        ],
        dir.path(),
    );
    assert_eq!(huge.status.code(), Some(3));
}

#[test]
fn ball_file_feeds_later_commands() {
    let dir = tempfile::tempdir().unwrap();
    let ball_dir = dir.path().join("ball");
    let out = percolab(
        &[
            "ball",
            "--p",
            "1.0",
            "--scales",
            "8",
            "--replicas",
            "2",
            "--ball-directions",
            "3",
        ],
        &ball_dir,
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let ball_path = ball_dir.join("ball.json");
    let shape_dir = dir.path().join("shape");
    let out = percolab(
        &[
            "shape",
            "--p",
            "1.0",
            "--eps",
            "0.2",
            "--times",
            "10,20",
            "--accepted",
            "5",
            "--ball",
            ball_path.to_str().unwrap(),
        ],
        &shape_dir,
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let results = read_json(&shape_dir.join("results.json"));
    assert_eq!(results["results"]["shape"]["exceed"], serde_json::json!([0, 0]));
}
