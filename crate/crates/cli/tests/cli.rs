use std::path::Path;
use std::process::{Command, Output};

fn rydsim(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rydsim"))
        .args(["--out", out.to_str().unwrap()])
        .args(args)
        .env_remove("RYDSIM_CONSTANTS")
        .output()
        .unwrap()
}

#[test]
fn empty_config_runs_levels() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("empty.toml");
    std::fs::write(&cfg, "").unwrap();
    let o = rydsim(dir.path(), &["--config", cfg.to_str().unwrap(), "levels"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("43d5/2") && text.contains("-8.33"), "{text}");
    assert!(dir.path().join("levels.csv").exists());
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = rydsim(dir.path(), &["--set", "pulse.rabi_mhzz=0.5", "rabi"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("rabi_mhzz") && err.contains("rabi_mhz") && err.contains("temperature_mk"), "{err}");
}

#[test]
fn missing_constants_file_shows_schema() {
    let dir = tempfile::tempdir().unwrap();
    let o = rydsim(dir.path(), &["--set", "constants.path=\"/nonexistent/atom.toml\"", "levels"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("quantum_defect") && err.contains("rydberg_constant_hz"), "{err}");
}

#[test]
fn constants_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_rydsim"))
        .args(["--out", dir.path().to_str().unwrap(), "levels"])
        .env("RYDSIM_CONSTANTS", "/nonexistent/atom.toml")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn degenerate_fit_exits_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("flat.csv");
    let rows: String = (0..40).map(|k| format!("{},1,0.01\n", k as f64 * 0.2)).collect();
    std::fs::write(&trace, format!("# flat\nt_us,P_ground_mean,P_ground_stderr\n{rows}")).unwrap();
    let o = rydsim(dir.path(), &["--set", &format!("fit.input=\"{}\"", trace.display()), "fit"]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn echoed_config_reproduces_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let o = rydsim(&a, &["--seed", "5", "--set", "mc.trials=100", "--set", "ensemble.mean_atoms=2.5", "ensemble"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let echo = a.join("ensemble.config.toml");
    let o = rydsim(&b, &["--config", echo.to_str().unwrap(), "ensemble"]);
    assert!(o.status.success());
    for f in ["ensemble.csv", "ensemble.config.toml"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let text = std::fs::read_to_string(a.join("ensemble.csv")).unwrap();
    assert!(text.starts_with("# command: ensemble\n# config_sha256: "));
    assert!(text.contains("# seed: 5\n") && text.contains("t_us,signal,stderr,n_trials\n"));
}

#[test]
fn reproduce_fig5_has_36_modes() {
    let dir = tempfile::tempdir().unwrap();
    let o = rydsim(dir.path(), &["reproduce", "fig5"]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(dir.path().join("vdw_spectrum.csv")).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
    assert_eq!(rows.len(), 36);
    let ms: Vec<i32> = rows.iter().map(|r| r.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert!(ms.iter().all(|m| (-5..=5).contains(m)));
}

#[test]
fn seed_changes_monte_carlo_output() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(rydsim(&a, &["--seed", "1", "--set", "histogram.trials=500", "histogram"]).status.success());
    assert!(rydsim(&b, &["--seed", "2", "--set", "histogram.trials=500", "histogram"]).status.success());
    assert_ne!(std::fs::read(a.join("histogram.csv")).unwrap(), std::fs::read(b.join("histogram.csv")).unwrap());
}
