//! End-to-end checks of the `chanpred` binary: subcommands, flags, file
//! outputs and thread-count-independent determinism.

use std::fs;
use std::path::Path;
use std::process::Command;

const CONFIG: &str = r#"
[system]
N_v = 2
N_h = 4
P_t = 1
l_v = 0.0780709526
l_h = 0.0780709526
f_u = 1.92e9
f_d = 2.11e9
f_delta = 120e3
N_f = 16
T_srs = 5e-4
N_d = 10
c = 299792458.0

[clusters]
cluster_count = 3
rays_per_cluster = 4
angle_spread_deg = 1.5
delay_spread_s = 300e-9

[scenario]
speed_kmh = 120.0
n_l = 8
l_order = 2
n_s = 12
drops = 6
seed = 5
t_s = 0
t_e = 7
"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_chanpred"))
}

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let path = dir.join("scenario.toml");
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn run_writes_report_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), CONFIG);
    let out = tmp.path().join("out");
    let status = bin()
        .args(["run", "--config"])
        .arg(&cfg)
        .args(["--seed", "11", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());

    let csv = fs::read_to_string(out.join("report.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "scenario_id,drop,speed_kmh,td_ms,sample_snr_db,pilot_snr_db,n_s,l_order,nmse_db,nmse_stale_db,se,se_stale,bound_check"
    );
    assert_eq!(lines.count(), 6);

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 11, "seed flag must override the file");
    assert_eq!(manifest["scenarios"][0]["spec"]["system"]["N_f"], 16);
    assert!(manifest["scenarios"][0]["wall_clock_s"].as_f64().unwrap() >= 0.0);
}

#[test]
fn report_is_identical_across_thread_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), CONFIG);
    let mut outputs = Vec::new();
    for threads in ["1", "4"] {
        let out = tmp.path().join(format!("out{threads}"));
        let status = bin()
            .args(["run", "--config"])
            .arg(&cfg)
            .args(["--threads", threads, "--out"])
            .arg(&out)
            .status()
            .unwrap();
        assert!(status.success());
        outputs.push(fs::read(out.join("report.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1], "thread count changed the report");
}

#[test]
fn sweep_expands_grid() {
    let tmp = tempfile::tempdir().unwrap();
    let swept = format!("{CONFIG}\n[sweep]\nspeed_kmh = [60.0, 350.0]\nn_d = [5, 20]\n");
    let cfg = write_config(tmp.path(), &swept);
    let out = tmp.path().join("out");
    let status = bin()
        .args(["sweep", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let csv = fs::read_to_string(out.join("report.csv")).unwrap();
    // 4 sweep points x 6 drops + header
    assert_eq!(csv.lines().count(), 25);
    for id in ["v60-nd5", "v60-nd20", "v350-nd5", "v350-nd20"] {
        assert!(csv.contains(id), "missing sweep point {id}");
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["scenarios"].as_array().unwrap().len(), 4);
}

#[test]
fn unknown_config_key_is_an_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &format!("{CONFIG}\nbogus = 1\n"));
    let out = bin()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(tmp.path().join("out"))
        .output()
        .unwrap();
    assert!(!out.status.success());
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(
        msg.contains("bogus"),
        "error should name the unknown key: {msg}"
    );
}

#[test]
fn selftest_exits_zero_and_prints_checks() {
    let out = bin().arg("selftest").output().unwrap();
    assert!(out.status.success(), "selftest failed");
    let text = String::from_utf8_lossy(&out.stdout);
    for name in [
        "transform-isometry",
        "pencil-recovery",
        "prediction-error-sandwich",
        "report-determinism",
        "overhead-structure",
    ] {
        assert!(text.contains(name), "selftest output missing {name}");
    }
    assert!(text.contains("all checks passed"));
}
