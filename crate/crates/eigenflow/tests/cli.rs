//! End-to-end tests of the `eigenflow` binary: artifact layout, exit
//! codes, output determinism, and the documented flag syntax.

use std::path::Path;
use std::process::{Command, Output};

use eigenflow::trace::EigenTrace;

fn eigenflow() -> Command {
    Command::new(env!("CARGO_BIN_EXE_eigenflow"))
}

fn run_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("config.json");
    std::fs::write(&path, body).unwrap();
    path
}

const SMALL_RUN: &str = r#"{
    "shape": {"kind": "icosphere", "radius": 1.0, "subdivisions": 2},
    "forcing": {"kind": "zero"},
    "flow": {"t_end": 0.04, "snapshot_every": 2},
    "output": {"dir": "OUTDIR", "dump_meshes": true}
}"#;

fn stdout_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn run_writes_all_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("artifacts");
    let config = run_config(
        dir.path(),
        &SMALL_RUN.replace("OUTDIR", out_dir.to_str().unwrap()),
    );
    let out = eigenflow().args(["run", "--config"]).arg(&config).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout_of(&out).contains("flow stopped by t_end"));

    for name in ["trace.csv", "manifest.csv", "config_echo.json"] {
        assert!(out_dir.join(name).exists(), "missing {name}");
    }
    // snapshot OFF files follow the step-numbered naming scheme
    assert!(out_dir.join("snap_00000000.off").exists());
    let trace = EigenTrace::read_csv(&out_dir.join("trace.csv")).unwrap();
    assert!(trace.records.len() >= 3);
    assert!(!trace.meta.config_hash.is_empty());

    // a second identical run reproduces the trace byte for byte
    let out_dir2 = dir.path().join("artifacts2");
    let out = eigenflow()
        .args(["run", "--config"])
        .arg(&config)
        .env("EIGENFLOW_OUT", &out_dir2)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(
        std::fs::read(out_dir.join("trace.csv")).unwrap(),
        std::fs::read(out_dir2.join("trace.csv")).unwrap()
    );
}

#[test]
fn run_rejects_bad_configs() {
    let dir = tempfile::tempdir().unwrap();
    // unknown key
    let config = run_config(
        dir.path(),
        r#"{"shape": {"kind": "icosphere", "radius": 1.0, "subdivisions": 1},
            "forcing": {"kind": "zero"},
            "flow": {"t_end": 0.01, "snapshotevery": 2}}"#,
    );
    let out = eigenflow().args(["run", "--config"]).arg(&config).output().unwrap();
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));

    // structurally invalid mesh file
    let mesh_path = dir.path().join("open.off");
    std::fs::write(
        &mesh_path,
        "OFF\n4 4 0\n0 0 0\n1 0 0\n0 1 0\n0 0 1\n3 0 1 2\n3 0 1 3\n3 1 2 3\n3 0 1 2\n",
    )
    .unwrap();
    let config = run_config(
        dir.path(),
        &format!(
            r#"{{"shape": {{"kind": "file", "path": "{}"}},
                "forcing": {{"kind": "zero"}},
                "flow": {{"t_end": 0.01}}}}"#,
            mesh_path.display()
        ),
    );
    let out = eigenflow().args(["run", "--config"]).arg(&config).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("structural"));
}

#[test]
fn verify_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("artifacts");
    let config = run_config(
        dir.path(),
        &SMALL_RUN.replace("OUTDIR", out_dir.to_str().unwrap()),
    );
    assert!(eigenflow().args(["run", "--config"]).arg(&config).status().unwrap().success());
    let trace_path = out_dir.join("trace.csv");

    // default checks pass on an honest trace
    let out = eigenflow().args(["verify", "--trace"]).arg(&trace_path).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let reports: serde_json::Value = serde_json::from_str(&stdout_of(&out)).unwrap();
    assert!(reports.as_array().unwrap().iter().any(|r| r["check"] == "bound"));

    // monotone check through the flag syntax (shrinking sphere: nondecreasing)
    let out = eigenflow()
        .args(["verify", "--trace"])
        .arg(&trace_path)
        .args(["--monotone-dir", "nondecreasing"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let reports: serde_json::Value = serde_json::from_str(&stdout_of(&out)).unwrap();
    assert!(reports
        .as_array()
        .unwrap()
        .iter()
        .any(|r| r["check"].as_str().unwrap().starts_with("monotone_lambda1")));

    // tampering with a lambda1 value mid-run must fail the bound check
    let mut tampered = EigenTrace::read_csv(&trace_path).unwrap();
    let mid = tampered.records.len() / 2;
    tampered.records[mid].lambda1 *= 0.5;
    let tampered_path = dir.path().join("tampered.csv");
    tampered.write_csv(&tampered_path).unwrap();
    let out = eigenflow().args(["verify", "--trace"]).arg(&tampered_path).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let reports: serde_json::Value = serde_json::from_str(&stdout_of(&out)).unwrap();
    let bound = reports
        .as_array()
        .unwrap()
        .iter()
        .find(|r| r["check"] == "bound")
        .unwrap();
    assert_eq!(bound["pass"], serde_json::Value::Bool(false));

    // a missing column is an input error
    let broken = std::fs::read_to_string(&trace_path)
        .unwrap()
        .replace("pinch_dev", "pinchdev");
    let broken_path = dir.path().join("broken.csv");
    std::fs::write(&broken_path, broken).unwrap();
    let out = eigenflow().args(["verify", "--trace"]).arg(&broken_path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn spectrum_subcommand_reads_meshes() {
    let dir = tempfile::tempdir().unwrap();
    let mesh_path = dir.path().join("sphere.off");
    let mesh = eigenflow::mesh::make_icosphere(2.0, 3).unwrap();
    eigenflow::mesh::save_mesh(&mesh, &mesh_path).unwrap();

    let dump = dir.path().join("eig");
    let out = eigenflow()
        .args(["spectrum", "--mesh"])
        .arg(&mesh_path)
        .args(["--p", "2", "--dump-dir"])
        .arg(&dump)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout_of(&out);
    // radius-2 sphere: lambda1 = n/r^2 = 0.5
    let lambda: f64 = text
        .lines()
        .find(|l| l.starts_with("lambda1 = "))
        .and_then(|l| l.split(' ').nth(2))
        .and_then(|v| v.parse().ok())
        .unwrap();
    assert!((lambda - 0.5).abs() <= 0.01 * 0.5, "lambda1 = {lambda}");
    assert!(text.contains("lambda1p_2 = "));
    let dumped = std::fs::read_to_string(dump.join("u_lambda1.csv")).unwrap();
    assert!(dumped.starts_with("vertex_index,u_value"));
    assert_eq!(dumped.lines().count(), mesh.vertex_count() + 1);

    let out = eigenflow()
        .args(["spectrum", "--mesh"])
        .arg(dir.path().join("missing.off"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sphere_subcommand_emits_csv() {
    let out = eigenflow()
        .args([
            "sphere",
            "--n",
            "2",
            "--r0",
            "1.0",
            "--forcing",
            "inv_linear",
            "--samples",
            "11",
            "--t-end",
            "1.0",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let stdout = stdout_of(&out);
    let stderr = String::from_utf8_lossy(&out.stderr);
    let mut lines = stdout.lines();
    assert_eq!(
        lines.next().unwrap(),
        "t,r,lambda1,envelope,rho,sigma_paper,sigma_ode,cond_dec,cond_inc,kappa,K"
    );
    assert_eq!(stdout.lines().count(), 12); // header + samples
    // T_max = r0²/(2n − r0²) = 1/3 goes to stderr when CSV is on stdout
    assert!(stderr.contains("T_max: 3.33"), "stderr: {stderr}");
    // samples stay strictly inside the extinction time
    let last = stdout.lines().last().unwrap();
    let t: f64 = last.split(',').next().unwrap().parse().unwrap();
    assert!(t < 1.0 / 3.0);

    // table forcing via a CSV file, output to a file
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("kappa.csv");
    std::fs::write(&table, "# t,kappa\n0.0,0.25\n1.0,0.25\n").unwrap();
    let csv_out = dir.path().join("sphere.csv");
    let out = eigenflow()
        .args(["sphere", "--forcing"])
        .arg(format!("table:{}", table.display()))
        .args(["--samples", "5", "--t-end", "0.2", "--out"])
        .arg(&csv_out)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(stdout_of(&out).contains("T_max:"));
    assert!(csv_out.exists());

    // unknown forcing syntax is an input error
    let out = eigenflow().args(["sphere", "--forcing", "quadratic"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}
