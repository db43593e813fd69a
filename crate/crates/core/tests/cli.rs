use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn nematic(args: &[&str], root: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nematic"))
        .args(args)
        .env("NEMATIC_OUTPUT_ROOT", root)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn column(csv: &str, name: &str) -> Vec<String> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let k = header.iter().position(|h| *h == name).unwrap();
    lines.map(|l| l.split(',').nth(k).unwrap().to_string()).collect()
}

#[test]
fn equilibrium_simulation_converges_in_two_sweeps() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("eq.toml");
    fs::write(&cfg, "[initial]\nkind = \"equilibrium\"\n\n[output]\nsnapshot_times = [0.05]\n").unwrap();
    let out = nematic(&["simulate", "--config", cfg.to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    let dir = tmp.path().join("simulate");
    let report = fs::read_to_string(dir.join("report.csv")).unwrap();
    let psi = column(&report, "psi_sup");
    assert_eq!(psi.len(), 2);
    assert!(psi[1].parse::<f64>().unwrap() < 1e-10);
    for f in ["manifest.json", "timing.csv", "energy.csv", "norms.csv", "snapshots/d_000050.txt"] {
        assert!(dir.join(f).exists(), "missing {f}");
    }
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["experiment"], "simulate");
    assert!(manifest["config"].as_str().unwrap().contains("[model]"));
}

#[test]
fn mms_reports_orders_inside_their_windows() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("orders");
    let out = nematic(&["mms", "--out", out_dir.to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(0));
    let csv = fs::read_to_string(out_dir.join("mms.csv")).unwrap();
    let status = column(&csv, "status");
    assert_eq!(status.iter().filter(|s| *s == "pass").count(), 12);
    assert!(!status.iter().any(|s| s == "fail"));
}

#[test]
fn invalid_delta_exits_with_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = nematic(&["simulate", "--override", "model.delta=-0.1"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("model.delta"));
    // no solve and no run directory before validation succeeds
    assert!(!tmp.path().join("simulate").exists());

    let cfg = tmp.path().join("bad.toml");
    fs::write(&cfg, "[grid]\nnodes = 33\nbogus = 1\n").unwrap();
    let out = nematic(&["simulate", "--config", cfg.to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}

#[test]
fn non_convergence_leaves_manifest_and_failure_record() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("short");
    let out = nematic(
        &[
            "simulate",
            "--out",
            dir.to_str().unwrap(),
            "--override",
            "initial.kind=scaled-bumps",
            "--override",
            "initial.theta=0.05",
            "--override",
            "picard.max_sweeps=2",
        ],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(4));
    assert!(dir.join("manifest.json").exists());
    let rec: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("failure.json")).unwrap()).unwrap();
    assert_eq!(rec["kind"], "not-converged");
    assert_eq!(rec["exit_code"], 4);
    assert_eq!(rec["detail"]["sweeps"], 2);
}

#[test]
fn unwritable_output_is_an_io_error() {
    let tmp = tempfile::tempdir().unwrap();
    let blocker = tmp.path().join("file");
    fs::write(&blocker, "").unwrap();
    let out = nematic(&["compat-roundtrip", "--out", blocker.join("sub").to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(5));
}

#[test]
fn repeated_runs_write_identical_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let args = |d: &str| {
        vec![
            "picard-report".to_string(),
            "--out".into(),
            tmp.path().join(d).to_str().unwrap().into(),
            "--override".into(),
            "initial.kind=manufactured".into(),
            "--override".into(),
            "initial.case=smooth-1d".into(),
            "--override".into(),
            "grid.nodes=65".into(),
        ]
    };
    for d in ["a", "b"] {
        let a = args(d);
        let a: Vec<&str> = a.iter().map(String::as_str).collect();
        assert_eq!(nematic(&a, tmp.path()).status.code(), Some(0));
    }
    for f in ["report.csv", "residual.csv"] {
        assert_eq!(
            fs::read(tmp.path().join("a").join(f)).unwrap(),
            fs::read(tmp.path().join("b").join(f)).unwrap(),
            "{f} differs"
        );
    }
}
