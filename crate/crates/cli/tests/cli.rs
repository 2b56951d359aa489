use std::fs;
use std::process::Command;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_topodeflate"));
    c.env_remove("TOPODEFLATE_OUT");
    c
}

#[test]
fn lists_presets() {
    let out = bin().arg("presets").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["double-pipe-desk", "double-pipe-paper", "bipolar-desk", "bipolar-paper", "rastrigin-demo"] {
        assert!(text.lines().any(|l| l == name), "{name} missing");
    }
}

#[test]
fn show_preset_is_a_loadable_config() {
    let out = bin().args(["show-preset", "double-pipe-desk"]).output().unwrap();
    assert!(out.status.success());
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("dp.toml");
    fs::write(&path, &out.stdout).unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("gamma = 0.7"));
    // a config file is accepted by `run`; zero rounds is rejected before any solve
    let status = bin()
        .args(["run", "--config"])
        .arg(&path)
        .args(["--max-rounds", "0", "--out"])
        .arg(dir.path().join("o"))
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&status.stderr).contains("round"));
}

#[test]
fn rastrigin_preset_runs() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin().args(["run", "--preset", "rastrigin-demo", "--out"]).arg(dir.path()).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8(out.stdout).unwrap().trim(), dir.path().display().to_string());
    let mut reader = csv::Reader::from_path(dir.path().join("toy_minimizers.csv")).unwrap();
    assert!(reader.records().count() >= 5);
    assert!(dir.path().join("effective_config.txt").exists());
}

#[test]
fn output_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("from-env");
    let out = bin()
        .args(["run", "--preset", "rastrigin-demo", "--max-rounds", "2"])
        .env("TOPODEFLATE_OUT", &target)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(target.join("toy_minimizers.csv").exists());
}

#[test]
fn unknown_preset_fails() {
    let out = bin().args(["run", "--preset", "nope"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown preset"));
}

#[test]
fn needs_config_or_preset() {
    let out = bin().arg("run").output().unwrap();
    assert!(!out.status.success());
}

#[test]
fn small_double_pipe_run() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("dp.toml");
    fs::write(
        &config,
        r#"
[problem]
kind = "double-pipe"

[mesh]
resolution = 0.09

[solver]
max_iters = 5

[deflation]
gamma = 0.7
delta = 1e6
rounds = 3
"#,
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = bin()
        .args(["run", "--config"])
        .arg(&config)
        .args(["--max-rounds", "1", "--out"])
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest = fs::read_to_string(out_dir.join("manifest.csv")).unwrap();
    assert_eq!(manifest.lines().count(), 2);
    let vtk = fs::read_to_string(out_dir.join("minimizer_1.vtk")).unwrap();
    for field in ["SCALARS psi ", "SCALARS chi ", "VECTORS u ", "SCALARS p "] {
        assert!(vtk.contains(field), "{field} missing");
    }
    assert!(out_dir.join("round_0.csv").exists());
    assert!(!out_dir.join("round_1.csv").exists());
}
