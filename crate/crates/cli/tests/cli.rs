use std::path::Path;
use std::process::{Command, Output};

fn qcollide(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qcollide")).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

/// Data rows of a CSV with `#` comments, as `(header, rows)`.
fn table(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    (header, lines.map(|l| l.split(',').map(String::from).collect()).collect())
}

fn column(text: &str, name: &str) -> Vec<f64> {
    let (header, rows) = table(text);
    let i = header.iter().position(|h| h == name).unwrap();
    rows.iter().map(|r| r[i].parse().unwrap()).collect()
}

#[test]
fn resonance_row_for_depth_eight() {
    let out = qcollide(&["resonances", "--v0", "8.0"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("# units: lengths in w"));
    assert!((column(&text, "p_res")[0] - 0.87).abs() <= 0.01);
    assert!((column(&text, "fwhm")[0] - 0.43).abs() <= 0.02);
    assert!((column(&text, "sigma_max")[0] / 53.81 - 1.0).abs() < 0.01);
}

#[test]
fn saturate_without_interaction() {
    let out = qcollide(&["saturate", "--v0", "0", "--a", "4,4,6", "--orders", "16,32,8"]);
    assert_eq!(out.status.code(), Some(0));
    let k = column(&stdout(&out), "K")[0];
    assert!((k - 1.0).abs() < 0.02, "{k}");
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[potential]\ndepht = 3.0\n").unwrap();
    assert_eq!(qcollide(&["--config", bad.to_str().unwrap(), "cross-section"]).status.code(), Some(2));
    assert_eq!(qcollide(&["saturate", "--orders", "8,8"]).status.code(), Some(2));
    assert_eq!(qcollide(&["cross-section", "--p-min", "2", "--p-max", "1"]).status.code(), Some(2));
    // a box far too small for the packets loses norm
    let norm = qcollide(&["saturate", "--a", "4,4,6", "--orders", "12,24,8", "--box-scale", "0.3"]);
    assert_eq!(norm.status.code(), Some(3), "{}", String::from_utf8_lossy(&norm.stderr));
    assert_eq!(qcollide(&["resonances", "--depths", "8.0", "--p-lo", "2", "--p-hi", "3"]).status.code(), Some(4));
    assert_eq!(qcollide(&["fit", "--input", bad.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn identical_runs_are_byte_identical() {
    let args = ["--threads", "2", "saturate", "--a", "4,4,6", "--q0", "2", "--orders", "12,24,8"];
    let a = qcollide(&args);
    let b = qcollide(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn config_file_is_echoed_and_hashed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "[potential]\ndepth = 7.6\n\n[packet]\na = [4.0, 4.0, 6.0]\n").unwrap();
    let out = qcollide(&["--config", cfg.to_str().unwrap(), "--format", "json", "cross-section", "--points", "5"]);
    assert!(out.status.success());
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["config"]["potential"]["depth"], 7.6);
    assert_eq!(doc["config"]["packet"]["a"][2], 6.0);
    assert_eq!(doc["config_hash"].as_str().unwrap().len(), 16);
    assert_eq!(doc["records"].as_array().unwrap().len(), 5);
    // the same physics from flags hashes identically
    let flags = qcollide(&["--v0", "7.6", "--a", "4,4,6", "--format", "json", "cross-section", "--points", "5"]);
    let doc2: serde_json::Value = serde_json::from_slice(&flags.stdout).unwrap();
    assert_eq!(doc["config_hash"], doc2["config_hash"]);
}

fn rows_in(path: &Path) -> usize {
    table(&std::fs::read_to_string(path).unwrap()).1.len()
}

#[test]
fn sweep_writes_schema_resumes_and_fits() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("sweep.csv");
    let base = ["--a", "4,4,6", "--q0", "2", "--orders", "16,32,8", "-o", csv.to_str().unwrap(), "sweep", "--method", "asymptotic"];
    let run = |values: &str| {
        let mut args = base.to_vec();
        args.extend(["--values", values]);
        qcollide(&args)
    };
    assert!(run("0.6,0.9").status.success());
    assert_eq!(rows_in(&csv), 2);
    assert!(run("0.6,0.8,0.9,1.0").status.success());
    assert_eq!(rows_in(&csv), 4);
    let text = std::fs::read_to_string(&csv).unwrap();
    let (header, _) = table(&text);
    assert_eq!(header.join(","), "variable,value,p0,V0,ax,ay,az,q0,t_over_m,K,P,norm,F,sigma,quad_hash");
    assert!(text.starts_with("# qcollide"));
    let fit = qcollide(&["fit", "--input", csv.to_str().unwrap(), "--format", "json"]);
    assert!(fit.status.success(), "{}", String::from_utf8_lossy(&fit.stderr));
    let doc: serde_json::Value = serde_json::from_slice(&fit.stdout).unwrap();
    let rec = &doc["records"][0];
    let (slope, intercept) = (rec["slope"].as_f64().unwrap(), rec["intercept"].as_f64().unwrap());
    assert!((rec["beta"].as_f64().unwrap() + intercept / slope).abs() < 1e-12);
}

#[test]
fn phase_shift_columns() {
    let out = qcollide(&["--l-max", "2", "phase-shifts", "--points", "4"]);
    let (header, rows) = table(&stdout(&out));
    assert_eq!(header, ["p", "delta_0", "delta_1", "delta_2"]);
    assert_eq!(rows.len(), 4);
}
