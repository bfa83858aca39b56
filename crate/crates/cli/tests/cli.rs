use std::fs;
use std::process::{Command, Output};

fn nudging(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nudging"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn small_override(dir: &std::path::Path) -> std::path::PathBuf {
    let path = dir.join("small.toml");
    fs::write(
        &path,
        "grid_n = 16\ndt = 0.01\nt_final = 0.05\n\n[truth]\nkind = \"dns\"\ngrid_n_fine = 16\n",
    )
    .unwrap();
    path
}

#[test]
fn help_exits_zero() {
    let out = nudging(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("twin-decay"));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let out = nudging(&["saturate", "--frobnicate"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn bad_config_value_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = nudging(&["twin-decay", "--dt", "-1", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn missing_config_file_exits_three() {
    let out = nudging(&["longtime", "--config", "/definitely/not/here.toml"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn twin_decay_writes_records_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_override(dir.path());
    let out_dir = dir.path().join("run");
    let out = nudging(&[
        "twin-decay",
        "--config",
        cfg.to_str().unwrap(),
        "--observer-k",
        "4",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    let csv = fs::read_to_string(out_dir.join("records.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "step,t,chi,err_l2,rel_err,proj_err,rel_proj_err,grad_v_sq,repeats"
    );
    assert_eq!(lines.count(), 5);

    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["config"]["grid_n"], 16);
    assert_eq!(report["summary"]["steps"], 5);
    assert!(report["conditions"]["h"]["ok"].is_boolean());
}

#[test]
fn repeated_runs_write_identical_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_override(dir.path());
    let mut bytes = Vec::new();
    for name in ["a", "b"] {
        let out_dir = dir.path().join(name);
        let out = nudging(&[
            "saturate",
            "--config",
            cfg.to_str().unwrap(),
            "--controller",
            "algo1",
            "--out",
            out_dir.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        bytes.push(fs::read(out_dir.join("records.csv")).unwrap());
    }
    assert_eq!(bytes[0], bytes[1]);
}

#[test]
fn converge_writes_rate_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "grid_n = 16\nt_final = 0.25\ndt_list = [0.125, 0.0625]\n").unwrap();
    let out_dir = dir.path().join("conv");
    let out = nudging(&[
        "converge",
        "--config",
        cfg.to_str().unwrap(),
        "--observer-k",
        "3",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(out_dir.join("convergence.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "dt,final_err,rate,chi_max");
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn conditions_prints_json() {
    let out = nudging(&["conditions", "--preset", "twin-decay", "--velocity", "1", "--kf", "6.283185307179586"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["inputs"]["nu"], 0.01);
    assert!(v["recommendations"].as_array().unwrap().len() == 2);
}

#[test]
fn conditions_rejects_unknown_preset() {
    let out = nudging(&["conditions", "--preset", "nope"]);
    assert_eq!(out.status.code(), Some(1));
}
