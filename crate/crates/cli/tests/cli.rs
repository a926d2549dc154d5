// SPDX-License-Identifier: MIT OR Apache-2.0

use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

use mvtv::{tv1d_direct, verify_kkt, DualCertificate, KktOptions, Signal};
use serde_json::Value;

fn mvtv_cmd(args: &[&str], stdin: &str) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_mvtv"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .expect("spawn mvtv");
    // the process may exit before reading its input
    let _ = child.stdin.take().unwrap().write_all(stdin.as_bytes());
    child.wait_with_output().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn read_csv(path: &Path) -> Vec<Vec<f64>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

fn jsonl(out: &Output) -> Vec<Value> {
    String::from_utf8(out.stdout.clone())
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

fn generate(dir: &Path, m: usize, n: usize, seed: u64, snr: f64) -> std::path::PathBuf {
    let path = dir.join(format!("y_{m}_{n}_{seed}.csv"));
    let out = mvtv_cmd(
        &[
            "generate",
            "-m",
            &m.to_string(),
            "-n",
            &n.to_string(),
            "--seed",
            &seed.to_string(),
            "--snr",
            &snr.to_string(),
            "--output",
            path.to_str().unwrap(),
        ],
        "",
    );
    assert!(out.status.success(), "{}", stderr(&out));
    path
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(mvtv_cmd(&["--help"], "").status.code(), Some(0));
    assert_eq!(mvtv_cmd(&["--version"], "").status.code(), Some(0));
    assert_eq!(mvtv_cmd(&["denoise", "--help"], "").status.code(), Some(0));
}

#[test]
fn invalid_flags_exit_one() {
    for args in [
        &["denoise", "--lambda", "1", "--bogus"][..],
        &["denoise"],
        &["denoise", "--lambda", "0"],
        &["denoise", "--lambda", "-2"],
        &["denoise", "--lambda", "1", "--q", "cube"],
        &[
            "denoise", "--lambda", "1", "--mode", "stream", "--sigma", "offline",
        ],
        &["denoise", "--lambda", "1", "--provisional"],
        &["exact", "--lambda", "nan"],
        &["frobnicate"],
    ] {
        let out = mvtv_cmd(args, "1.0\n2.0\n");
        assert_eq!(out.status.code(), Some(1), "{args:?}: {}", stderr(&out));
    }
}

#[test]
fn dyadic_on_univariate_data_is_a_flag_error() {
    let out = mvtv_cmd(
        &["denoise", "--lambda", "1", "--q", "dyadic:R=3"],
        "1\n2\n3\n",
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("M = 2"), "{}", stderr(&out));
}

#[test]
fn malformed_row_reports_line_number() {
    let input = "1.0,2.0\n1.5,2.5\n3.0\n4.0,1.0\n";
    for mode in ["batch", "stream"] {
        let out = mvtv_cmd(&["denoise", "--lambda", "1", "--mode", mode], input);
        assert_eq!(out.status.code(), Some(2), "{mode}");
        assert!(stderr(&out).contains("line 3"), "{mode}: {}", stderr(&out));
    }
    let out = mvtv_cmd(&["exact", "--lambda", "1"], "1.0\nabc\n");
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line 2"), "{}", stderr(&out));
}

#[test]
fn empty_input_reports_no_samples() {
    for args in [
        &["denoise", "--lambda", "1"][..],
        &["denoise", "--lambda", "1", "--mode", "stream"],
        &["exact", "--lambda", "1"],
    ] {
        let out = mvtv_cmd(args, "");
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(
            stderr(&out).contains("no samples"),
            "{args:?}: {}",
            stderr(&out)
        );
    }
}

#[test]
fn univariate_denoise_matches_direct_solution() {
    let dir = tempfile::tempdir().unwrap();
    let y_path = generate(dir.path(), 1, 300, 11, 4.0);
    let x_path = dir.path().join("x.csv");
    let out = mvtv_cmd(
        &[
            "denoise",
            "--lambda",
            "1",
            "--q",
            "single",
            "--input",
            y_path.to_str().unwrap(),
            "--reconstruction",
            x_path.to_str().unwrap(),
        ],
        "",
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let y: Vec<f64> = read_csv(&y_path).into_iter().map(|r| r[0]).collect();
    let x: Vec<f64> = read_csv(&x_path).into_iter().map(|r| r[0]).collect();
    let oracle = tv1d_direct(&y, 1.0).unwrap();
    let err = x
        .iter()
        .zip(&oracle)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(err <= 1e-6, "max error {err}");
}

#[test]
fn stream_and_batch_emit_identical_segments() {
    let dir = tempfile::tempdir().unwrap();
    let y_path = generate(dir.path(), 2, 250, 4, 3.0);
    let text = std::fs::read_to_string(&y_path).unwrap();
    let batch = mvtv_cmd(
        &["denoise", "--lambda", "8", "--q", "random:n=30,seed=2"],
        &text,
    );
    let stream = mvtv_cmd(
        &[
            "denoise",
            "--lambda",
            "8",
            "--q",
            "random:n=30,seed=2",
            "--mode",
            "stream",
        ],
        &text,
    );
    assert!(batch.status.success() && stream.status.success());
    let (a, b) = (jsonl(&batch), jsonl(&stream));
    assert!(a.len() > 1);
    assert_eq!(a, b);
}

#[test]
fn provisional_records_follow_every_sample() {
    let input = "0,0\n0.1,0.2\n5,5\n5.2,4.9\n5.1,5.0\n";
    let out = mvtv_cmd(
        &[
            "denoise",
            "--lambda",
            "0.5",
            "--q",
            "dyadic:R=2",
            "--mode",
            "stream",
            "--provisional",
        ],
        input,
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let records = jsonl(&out);
    let ks: Vec<u64> = records
        .iter()
        .filter_map(|r| r.get("k"))
        .map(|k| k.as_u64().unwrap())
        .collect();
    assert_eq!(ks, vec![0, 1, 2, 3, 4]);
    let first = records.iter().find(|r| r.get("k").is_some()).unwrap();
    let level: Vec<f64> = serde_json::from_value(first["provisional"].clone()).unwrap();
    assert!(level.iter().all(|v| v.abs() < 1e-12));
    let ends: Vec<u64> = records
        .iter()
        .filter_map(|r| r.get("end"))
        .map(|e| e.as_u64().unwrap())
        .collect();
    assert_eq!(*ends.last().unwrap(), 4);
}

#[test]
fn dyadic_bivariate_example() {
    let dir = tempfile::tempdir().unwrap();
    let y_path = generate(dir.path(), 2, 180, 1, 10.0);
    let x_path = dir.path().join("x.csv");
    let out = mvtv_cmd(
        &[
            "denoise",
            "--lambda",
            "20",
            "--q",
            "dyadic:R=7",
            "--input",
            y_path.to_str().unwrap(),
            "--reconstruction",
            x_path.to_str().unwrap(),
        ],
        "",
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let segments = jsonl(&out);
    let mut next = 0;
    for s in &segments {
        assert_eq!(s["start"].as_u64().unwrap(), next);
        next = s["end"].as_u64().unwrap() + 1;
        let zeta: Vec<f64> = serde_json::from_value(s["zeta"].clone()).unwrap();
        assert!(((zeta[0].hypot(zeta[1])) - 20.0).abs() < 1e-9);
        assert!(s["q"].as_u64().unwrap() < 127);
    }
    assert_eq!(next, 180);
    let x = read_csv(&x_path);
    assert_eq!(x.len(), 180);
    assert!(x
        .iter()
        .all(|r| r.len() == 2 && r.iter().all(|v| v.is_finite())));
}

#[test]
fn exact_output_satisfies_optimality() {
    let dir = tempfile::tempdir().unwrap();
    let y_path = generate(dir.path(), 2, 120, 9, 5.0);
    let x_path = dir.path().join("x.csv");
    let out = mvtv_cmd(
        &[
            "exact",
            "--lambda",
            "6",
            "--input",
            y_path.to_str().unwrap(),
            "--output",
            x_path.to_str().unwrap(),
        ],
        "",
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let y = Signal::from_samples(&read_csv(&y_path)).unwrap();
    let x = Signal::from_samples(&read_csv(&x_path)).unwrap();
    let cert = DualCertificate::from_primal(&x, &y).unwrap();
    let report = verify_kkt(&x, &y, 6.0, &cert, KktOptions::with_tol(1e-6)).unwrap();
    assert!(report.pass, "{report:?}");
}

#[test]
fn bench_minimal_config_has_one_cell_per_curve() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bench.json");
    std::fs::write(
        &cfg,
        r#"{"m":2,"n":60,"snr_db":10,"realizations":1,"seed":5,"lambdas":[3],
            "q_sizes":[4],"online_q_sizes":[4],"windows":[10]}"#,
    )
    .unwrap();
    let out = mvtv_cmd(&["bench", "--config", cfg.to_str().unwrap()], "");
    assert!(out.status.success(), "{}", stderr(&out));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["mse"].as_array().unwrap().len(), 1);
    assert_eq!(report["mse"][0]["values"].as_array().unwrap().len(), 1);
    assert_eq!(report["online"].as_array().unwrap().len(), 2);
}

#[test]
fn bench_invalid_config_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        (
            r#"{"m":2,"n":60,"snr_db":10,"realizations":1,"seed":5,"lambdas":[3,"x"]}"#,
            "lambdas[1]",
        ),
        (
            r#"{"m":2,"n":60,"snr_db":10,"realizations":1,"seed":5,"lambdas":[3,-1]}"#,
            "lambdas[1]",
        ),
        (
            r#"{"m":2,"n":60,"snr_db":10,"realizations":0,"seed":5,"lambdas":[3]}"#,
            "realizations",
        ),
        (
            r#"{"m":2,"n":60,"snr_db":10,"realizations":1,"seed":5,"lambdas":[3],"extra":1}"#,
            "extra",
        ),
    ];
    for (i, (text, path)) in cases.iter().enumerate() {
        let cfg = dir.path().join(format!("c{i}.json"));
        std::fs::write(&cfg, text).unwrap();
        let out = mvtv_cmd(&["bench", "--config", cfg.to_str().unwrap()], "");
        assert_eq!(out.status.code(), Some(1), "{text}");
        assert!(stderr(&out).contains(path), "{text}: {}", stderr(&out));
    }
}
