use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_gist");

fn gist(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env_remove("GIST_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn hash_line(o: &Output) -> String {
    stdout(o)
        .lines()
        .find(|l| l.starts_with("sha256 "))
        .expect("hash printed")
        .to_string()
}

fn gen(dir: &Path, family: &str, n: &str, seed: &str) -> PathBuf {
    let o = gist(&[
        "gen",
        "--family",
        family,
        "--n",
        n,
        "--seed",
        seed,
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    dir.join(format!("{family}-{n}-{seed}.json"))
}

/// Data lines of a CSV written by the tool (metadata lines skipped).
fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn column(rows: &[Vec<String>], name: &str) -> Vec<String> {
    let idx = rows[0]
        .iter()
        .position(|h| h == name)
        .expect("column exists");
    rows[1..].iter().map(|r| r[idx].clone()).collect()
}

#[test]
fn gen_is_deterministic_and_prints_hash() {
    let dir = tempfile::tempdir().unwrap();
    let args = |out: &str| {
        gist(&[
            "gen",
            "--family",
            "tree-cycle",
            "--n",
            "30",
            "--seed",
            "7",
            "--out",
            out,
        ])
    };
    let a = args(dir.path().join("a").to_str().unwrap());
    let b = args(dir.path().join("b").to_str().unwrap());
    assert!(a.status.success());
    assert_eq!(hash_line(&a), hash_line(&b));
    assert_eq!(hash_line(&a).len(), "sha256 ".len() + 64);
    let text = fs::read_to_string(dir.path().join("a/tree-cycle-30-7.json")).unwrap();
    assert!(text.starts_with(r#"{"metadata":"#));
    assert!(text.contains(r#""seed":7"#));
}

#[test]
fn bad_arguments_are_usage_errors() {
    let o = gist(&["gen", "--family", "bogus", "--n", "5"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bogus"));
    let o = gist(&["evaluate", "--dataset", "x.json", "--mode", "sometimes"]);
    assert_eq!(o.status.code(), Some(2));
    let o = gist(&["evaluate", "--dataset", "x.json", "--laplacian", "signless"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_dataset_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = gist(&[
        "verify",
        "--dataset",
        dir.path().join("absent.json").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn out_dir_defaults_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("from-env");
    let o = Command::new(BIN)
        .args(["gen", "--family", "color-count", "--n", "12", "--seed", "1"])
        .env("GIST_OUT_DIR", &target)
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(target.join("color-count-12-1.json").exists());
}

#[test]
fn verify_writes_report_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen(dir.path(), "tree-cycle", "30", "2");
    let out = dir.path().join("verify");
    let o = gist(&[
        "verify",
        "--dataset",
        data.to_str().unwrap(),
        "--alpha",
        "0.5",
        "--seed",
        "4",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("verify.json")).unwrap()).unwrap();
    assert_eq!(json["provable_ok"], true);
    assert_eq!(json["metadata"]["seed"], 4);
    assert_eq!(json["metadata"]["config"]["alpha"], 0.5);
    assert_eq!(json["report"]["pairs"].as_array().unwrap().len(), 30);
    let csv = fs::read_to_string(out.join("verify.csv")).unwrap();
    assert!(csv.starts_with("# tool: gist"));
}

#[test]
fn evaluate_writes_fold_files_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen(dir.path(), "ba-shapes", "100", "3");
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = gist(&[
            "evaluate",
            "--dataset",
            data.to_str().unwrap(),
            "--seed",
            "5",
            "--epochs",
            "2",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        out
    };
    let (a, b) = (run("a"), run("b"));
    for fold in 0..5 {
        let name = format!("fold_{fold}.csv");
        let bytes = fs::read(a.join(&name)).unwrap();
        assert_eq!(bytes, fs::read(b.join(&name)).unwrap(), "{name} differs");
        assert!(!bytes.contains(&b'\r'));
        let text = String::from_utf8(bytes).unwrap();
        assert!(text.contains("# seed: 5\n"));
        assert!(text.contains(&format!("# fold: {fold}\n")));
        let rows = csv_rows(&a.join(&name));
        let explainers = column(&rows, "explainer");
        assert!(explainers.iter().any(|e| e == "GIST"));
        assert!(explainers.iter().any(|e| e == "iRand"));
    }
    assert!(!a.join("fold_5.csv").exists());
    let agg: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(a.join("aggregate.json")).unwrap()).unwrap();
    let gist_cols: Vec<&String> = agg["explainers"]["GIST"]
        .as_object()
        .unwrap()
        .keys()
        .collect();
    for col in [
        "GED",
        "Oracle Calls",
        "Validity",
        "Sparsity",
        "Fidelity",
        "Runtime (ms)",
    ] {
        assert!(gist_cols.iter().any(|c| *c == col), "missing {col}");
    }
    assert_eq!(agg["metadata"]["config"]["gist"]["epochs"], 2);
    let cfs: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(a.join("counterfactuals.json")).unwrap()).unwrap();
    assert_eq!(cfs["counterfactuals"].as_array().unwrap().len(), 100);
}

#[test]
fn sweep_has_one_row_per_alpha() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen(dir.path(), "tree-cycle", "100", "1");
    let out = dir.path().join("sweep");
    let o = gist(&[
        "sweep-alpha",
        "--dataset",
        data.to_str().unwrap(),
        "--alphas",
        "0.2,0.6,1",
        "--epochs",
        "2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("spearman(alpha, GED(G,G*))"));
    let rows = csv_rows(&out.join("sweep_alpha.csv"));
    let alphas: Vec<f64> = column(&rows, "alpha")
        .iter()
        .map(|a| a.parse().unwrap())
        .collect();
    assert_eq!(alphas, vec![0.2, 0.6, 1.0]);
}

#[test]
fn spectra_reports_requested_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen(dir.path(), "tree-cycle", "100", "1");
    let out = dir.path().join("spectra");
    let o = gist(&[
        "spectra",
        "--dataset",
        data.to_str().unwrap(),
        "--alpha",
        "0.7",
        "--k-pairs",
        "3",
        "--epochs",
        "2",
        "--laplacian",
        "combinatorial",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&out.join("spectra.csv"));
    let mut pairs = column(&rows, "pair");
    pairs.dedup();
    assert_eq!(pairs, vec!["0", "1", "2"]);
    let num = |name: &str| -> Vec<f64> {
        column(&rows, name)
            .iter()
            .map(|v| v.parse().unwrap())
            .collect()
    };
    let (input, overshoot, optimal) = (num("input"), num("overshoot"), num("optimal"));
    for i in 0..optimal.len() {
        assert_eq!(optimal[i], 0.7 * overshoot[i] + (1.0 - 0.7) * input[i]);
    }
    for (l1, connected) in num("lambda1_result")
        .iter()
        .zip(column(&rows, "result_connected"))
    {
        if connected == "true" {
            assert!(l1.abs() < 1e-8);
        }
    }
}
