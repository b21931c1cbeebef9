use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const SCENARIO: &str = "\
link_rate = 4mbit
base_rtt = 10ms
duration = 60s
mark_model = bernoulli
flows = creno
";

fn pi2lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pi2lab"))
        .args(args)
        .env_remove("PI2LAB_DATASET")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_str(&stdout(out)).unwrap()
}

fn approx(v: &Value, expected: f64, tol: f64) {
    let x = v.as_f64().unwrap_or_else(|| panic!("not a number: {v}"));
    assert!((x - expected).abs() <= tol, "{x} vs {expected}");
}

#[test]
fn analyze_examples() {
    let text = stdout(&pi2lab(&["analyze", "lambda0", "--cc", "reno"]));
    assert!(text.contains("0.556"), "{text}");

    let v = json(&pi2lab(&["analyze", "switchover", "--rate", "100mbit", "--json"]));
    approx(&v["switchover_rtt_s"], 0.033, 0.0005);

    let v = json(&pi2lab(&["analyze", "transition", "--cc", "creno", "--rate", "100mbit", "--json"]));
    approx(&v["region"]["rtt_floor"], 0.0017, 0.00005);
    approx(&v["region"]["rtt_center"], 0.0043, 0.00005);

    let v = json(&pi2lab(&["analyze", "recovery", "--cc", "reno", "--rate", "1000pps", "--rtt", "100ms", "--kind", "avg", "--json"]));
    approx(&v["results"][0]["coefficient"], 243.0 / 392.0, 1e-12);
}

#[test]
fn switchover_curve_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let curve = dir.path().join("curve.csv");
    let out = dir.path().join("switch.json");
    stdout(&pi2lab(&[
        "analyze", "switchover", "--rate", "10mbit",
        "--curve-out", curve.to_str().unwrap(),
        "--curve-points", "11",
        "--out", out.to_str().unwrap(),
    ]));
    let body = std::fs::read_to_string(&curve).unwrap();
    assert_eq!(body.lines().count(), 12);
    assert!(body.starts_with("rate_pps,rtt_ms\n"));
    for f in [&curve, &out] {
        assert!(manifest_for(f).exists(), "missing manifest for {}", f.display());
    }
}

fn manifest_for(p: &Path) -> std::path::PathBuf {
    pi2lab::manifest::RunManifest::path_for(p)
}

#[test]
fn target_examples() {
    let full = json(&pi2lab(&["target"]));
    approx(&full["target_ms"], 19.0, 0.5);
    assert_eq!(full["r_typ_provenance"]["source"], "dataset");
    assert_eq!(full["r_typ_provenance"]["exclusions"][0], "China");

    let staged = json(&pi2lab(&["target", "--staged-rounding"]));
    assert_eq!(staged["target_ms"].as_f64(), Some(19.0));

    let f15 = json(&pi2lab(&["target", "--staged-rounding", "--f", "1.5"]));
    assert_eq!(f15["target_ms"].as_f64(), Some(14.25));

    let all = json(&pi2lab(&["target", "--staged-rounding", "--no-exclude"]));
    assert_eq!(all["r_typ_ms"].as_f64(), Some(34.0));

    let explicit = json(&pi2lab(&["target", "--rtyp", "25ms", "--weights", "cubic=1"]));
    assert_eq!(explicit["r_typ_provenance"]["source"], "explicit");
    approx(&explicit["target_s"], 0.85 * 0.3 / 0.7 * 2.0 * 0.025, 1e-12);
}

#[test]
fn target_reads_dataset_from_env() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tiny.csv");
    std::fs::write(
        &path,
        "country,population,pct_online,users,fixed_mbps,cdn_latency_ms\nA,100,0.5,50,10,40\nB,100,0.5,50,10,20\n",
    )
    .unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_pi2lab"))
        .args(["target", "--no-exclude"])
        .env("PI2LAB_DATASET", &path)
        .output()
        .unwrap();
    let v = json(&out);
    approx(&v["r_typ_ms"], 30.0, 1e-9);
}

#[test]
fn dataset_outputs() {
    let dir = tempfile::tempdir().unwrap();
    stdout(&pi2lab(&["dataset", "--out", dir.path().to_str().unwrap()]));
    for f in ["summary.json", "scatter.csv", "curve.csv", "manifest.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let summary: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    approx(&summary["all"]["weighted_rtt_ms"], 34.0, 0.5);
    approx(&summary["selected"]["weighted_bw_mbps"], 82.47, 0.005);
    let share = summary["share_above_world_users"].as_f64().unwrap();
    assert!((0.05..=0.09).contains(&share), "{share}");
    let scatter = std::fs::read_to_string(dir.path().join("scatter.csv")).unwrap();
    assert!(scatter.starts_with("country,users,fixed_mbps,rtt_loaded_ms,above_curve\n"));
    assert_eq!(scatter.lines().count(), 44);
}

#[test]
fn sim_writes_deterministic_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let scn = dir.path().join("s.scn");
    std::fs::write(&scn, SCENARIO).unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let text = stdout(&pi2lab(&["sim", scn.to_str().unwrap(), "--seed", "7", "--out", out.to_str().unwrap()]));
        assert!(text.contains("lambda_hat"), "{text}");
        out
    };
    let a = run("a");
    let b = run("b");
    for f in ["trace.csv", "cycles.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let manifest: Value =
        serde_json::from_str(&std::fs::read_to_string(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 7);
    assert_eq!(manifest["subcommand"], "sim");
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 2);
}

#[test]
fn sim_capacity_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let scn = dir.path().join("s.scn");
    std::fs::write(&scn, SCENARIO.replace("bernoulli", "deterministic_hazard")).unwrap();
    let out = dir.path().join("sweep");
    let text = stdout(&pi2lab(&[
        "sim", scn.to_str().unwrap(), "--sweep-capacity", "1,2,4", "--out", out.to_str().unwrap(),
    ]));
    assert!(text.contains("drift"), "{text}");
    let report: Value = serde_json::from_str(&std::fs::read_to_string(out.join("sweep.json")).unwrap()).unwrap();
    assert_eq!(report["points"].as_array().unwrap().len(), 3);
    assert!(report["q_max_drift"].as_f64().unwrap() < 0.15);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let scn = dir.path().join("s.scn");
    std::fs::write(&scn, SCENARIO).unwrap();
    let path = scn.to_str().unwrap();

    assert_eq!(pi2lab(&["target", "--f", "0.5"]).status.code(), Some(2));
    assert_eq!(pi2lab(&["analyze", "lambda0", "--cc", "vegas"]).status.code(), Some(2));
    assert_eq!(pi2lab(&["sim", path, "--set", "base_rtt=10"]).status.code(), Some(2));
    assert_eq!(pi2lab(&["sim", path, "--set", "nonsense=1"]).status.code(), Some(2));
    assert_eq!(pi2lab(&["target", "--weights", "creno=0.5"]).status.code(), Some(2));
    // Runtime failures: too few cycles, runaway queue, missing file.
    assert_eq!(pi2lab(&["sim", path, "--set", "duration=1s"]).status.code(), Some(3));
    let runaway = pi2lab(&["sim", path, "--set", "flow.0.initial_window=1000000"]);
    assert_eq!(runaway.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&runaway.stderr).contains("blow-up"));
    assert_eq!(pi2lab(&["sim", "/nonexistent.scn"]).status.code(), Some(3));
}

#[test]
fn help_documents_units_and_defaults() {
    let text = stdout(&pi2lab(&["analyze", "transition", "--help"]));
    assert!(text.contains("default: 16ms"), "{text}");
    let text = stdout(&pi2lab(&["target", "--help"]));
    assert!(text.contains("default: 2"), "{text}");
}
