use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_snspd");

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("snspd-cli-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("run.cfg");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn samples() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

// a short wire keeps the engine runs fast
const SHORT_WIRE: &str = "wire_length = 20um\nn_cells = 2000\n";

#[test]
fn help_documents_config_keys() {
    let out = run(&["--help"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for key in ["L_k", "C_p", "R_p", "alpha", "photon_times", "chain", "reference", "rc_R_L"] {
        assert!(text.contains(&format!("  {key} ")), "{key} missing from help");
    }
}

#[test]
fn unknown_keys_are_listed() {
    let dir = scratch("unknown");
    let cfg = write_config(&dir, "L_k = 490nH\nLk = 1nH\ncolour = red\n");
    let out = run(&["simulate", "--config", &cfg, "--out-dir", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("Lk") && err.contains("colour"), "{err}");
}

#[test]
fn missing_files_name_the_path() {
    let dir = scratch("missing");
    let out = run(&["simulate", "--config", "/nonexistent/run.cfg", "--out-dir", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().contains("/nonexistent/run.cfg"));

    let cfg = write_config(&dir, "reference = nowhere.s2p\n");
    let out = run(&["validate-model", "--config", &cfg, "--out-dir", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().contains("nowhere.s2p"));
}

#[test]
fn bad_values_are_config_errors() {
    let dir = scratch("bad");
    let cfg = write_config(&dir, "L_k = 490nF\n");
    let out = run(&["simulate", "--config", &cfg, "--out-dir", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let cfg = write_config(&dir, "C_p = -1pF\n");
    let out = run(&["simulate", "--config", &cfg, "--out-dir", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn clickless_statistics_is_a_numerical_failure() {
    let dir = scratch("noclicks");
    let cfg = write_config(&dir, "mu = 0\ndark_prob = 0\nstats_gates = 1000\n");
    let out = run(&["stats", "--config", &cfg, "--out-dir", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn simulate_without_events_stays_superconducting() {
    let dir = scratch("quiet");
    let cfg = write_config(&dir, &format!("{SHORT_WIRE}frequency = 200MHz\nn_gates = 3\n"));
    let out = run(&["simulate", "--config", &cfg, "--out-dir", dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let trace = fs::read_to_string(dir.join("trace.csv")).unwrap();
    let mut lines = trace.lines();
    assert_eq!(lines.next(), Some("t_s,i_L_A,v_c_V,R_hs_ohm,T_max_K"));
    for line in lines {
        let r_hs: f64 = line.split(',').nth(3).unwrap().parse().unwrap();
        assert_eq!(r_hs, 0.0);
    }
    let gates = fs::read_to_string(dir.join("gates.csv")).unwrap();
    assert!(gates.lines().skip(1).all(|l| l.split(',').nth(2) == Some("0")));
    assert!(dir.join("manifest.json").exists());
}

#[test]
fn fig4c_columns() {
    let dir = scratch("fig4c");
    let cfg = write_config(&dir, &format!("{SHORT_WIRE}f_start = 100MHz\nf_stop = 150MHz\nf_step = 50MHz\n"));
    let out = run(&["fig4c", "--config", &cfg, "--out-dir", dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(dir.join("fig4c.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "freq_MHz,gate1_peak,gate2_peak,gate3_peak");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("1.00000000e2,"));
}

#[test]
fn sample_rf_configs_run() {
    let dir = scratch("rf");
    let out = run(&[
        "validate-model",
        "--config",
        samples().join("validate.cfg").to_str().unwrap(),
        "--out-dir",
        dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = fs::read_to_string(dir.join("s11_summary.csv")).unwrap();
    let rms: f64 = summary.lines().nth(1).unwrap().split(',').nth(2).unwrap().parse().unwrap();
    assert!(rms < 1e-6, "{rms}");

    let out = run(&[
        "calibrate",
        "--config",
        samples().join("calibrate.cfg").to_str().unwrap(),
        "--out-dir",
        dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let g = fs::read_to_string(dir.join("transconductance.csv")).unwrap();
    assert_eq!(g.lines().count(), 302);
}

#[test]
fn replay_reproduces_outputs() {
    let dir = scratch("replay");
    let cfg = write_config(&dir, "mu = 0.2\nqe_max = 0.3\ndark_prob = 1e-3\nstats_gates = 20000\nseed = 5\n");
    let out_dir = dir.join("out");
    let out = run(&["stats", "--config", &cfg, "--out-dir", out_dir.to_str().unwrap()]);
    assert!(out.status.success());
    let manifest = out_dir.join("manifest.json");
    let first = fs::read_to_string(&manifest).unwrap();
    assert!(first.contains("\"subcommand\": \"stats\"") && first.contains("gamma.csv"));

    let again = dir.join("again");
    let out = run(&["replay", manifest.to_str().unwrap(), "--out-dir", again.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["gamma.csv", "histogram.csv", "report.csv"] {
        assert_eq!(fs::read(out_dir.join(f)).unwrap(), fs::read(again.join(f)).unwrap(), "{f}");
    }

    // a tampered checksum no longer matches the rerun
    let text = fs::read_to_string(&manifest).unwrap();
    let idx = text.find("\"sha256\": \"").unwrap() + 11;
    let mut tampered = text.clone();
    tampered.replace_range(idx..idx + 1, if &text[idx..idx + 1] == "0" { "1" } else { "0" });
    fs::write(&manifest, tampered).unwrap();
    let out = run(&["replay", manifest.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}
