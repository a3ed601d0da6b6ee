//! End-to-end checks of the binary: determinism contracts, gate exit codes
//! and configuration validation.

use std::path::Path;
use std::process::Command;

fn perron() -> Command {
    Command::new(env!("CARGO_BIN_EXE_perron"))
}

fn write_config(dir: &Path, nonlinearity: &str, eps: f64) -> std::path::PathBuf {
    let text = format!(
        r#"schema = 1

[model]
kind = "spectral"
eigenvalues = [0.8, 0.0, -3.0]
k = 1.0
alpha = 0.8
beta = 3.0
gamma = 0.1

[nonlinearity]
kind = "{nonlinearity}"
eps = {eps}

[noise]
t_min = -62.0
t_max = 41.0
dt = 0.02
seed = 1
seeds = 2

[rates]
eta_cu = -1.0
zeta = -2.2
eta_cs = 0.75
chi = -0.5
sigma = 0.05
nu = 0.05
k = 1

[lp]
corrected_shift = true
t_horizon_cu = 30.0
t_horizon_cs = 40.0
tol = 1e-10

[manifold]
min = -0.3
max = 0.3
points = 3

[foliation]
anchor = [0.0, 0.2, -0.1]
"#
    );
    let path = dir.join("run.toml");
    std::fs::write(&path, text).unwrap();
    path
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    std::fs::read(dir.join(name)).unwrap()
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "bilinear-saturated", 5e-3);
    for sub in ["sample-noise", "solve-manifold"] {
        for run in ["a", "b"] {
            let status = perron()
                .args([
                    "--config",
                    cfg.to_str().unwrap(),
                    "--out",
                    tmp.path().join(run).to_str().unwrap(),
                    sub,
                ])
                .status()
                .unwrap();
            assert!(status.success(), "{sub} run {run} failed");
        }
    }
    for file in ["noise_1.csv", "noise_2.csv", "manifold.csv", "manifold-manifest.json"] {
        assert_eq!(
            read(&tmp.path().join("a"), file),
            read(&tmp.path().join("b"), file),
            "{file} differs between identical reruns"
        );
    }
}

#[test]
fn seed_override_changes_the_noise() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "zero", 0.0);
    for (dir, seed) in [("s1", "1"), ("s7", "7")] {
        let status = perron()
            .args([
                "--config",
                cfg.to_str().unwrap(),
                "--out",
                tmp.path().join(dir).to_str().unwrap(),
                "--seed",
                seed,
                "sample-noise",
            ])
            .status()
            .unwrap();
        assert!(status.success());
    }
    assert_ne!(
        read(&tmp.path().join("s1"), "noise_1.csv"),
        read(&tmp.path().join("s7"), "noise_7.csv"),
    );
}

#[test]
fn zero_nonlinearity_gives_a_flat_graph() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "zero", 0.0);
    let out = tmp.path().join("out");
    let status = perron()
        .args([
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "solve-manifold",
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(out.join("manifold.csv")).unwrap();
    for line in text.lines().skip(1) {
        let cols: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
        // columns 2.. are the graph values
        assert!(cols[2..].iter().all(|&v| v == 0.0), "nonzero h in {line}");
    }
}

#[test]
fn gap_gate_controls_the_exit_code() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "bilinear-saturated", 5e-3);
    let ok = perron()
        .args([
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            tmp.path().join("g").to_str().unwrap(),
            "check-gaps",
        ])
        .status()
        .unwrap();
    assert!(ok.success());
    // a hopeless Lipschitz constant must flip the exit code
    let cfg_bad = write_config(tmp.path(), "bilinear-saturated", 40.0);
    let bad = perron()
        .args([
            "--config",
            cfg_bad.to_str().unwrap(),
            "--out",
            tmp.path().join("gb").to_str().unwrap(),
            "check-gaps",
        ])
        .status()
        .unwrap();
    assert!(!bad.success());
}

#[test]
fn config_errors_name_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("bad.toml");
    let good = std::fs::read_to_string(write_config(tmp.path(), "zero", 0.0)).unwrap();
    std::fs::write(&path, good.replace("dt = 0.02", "dt = -0.02")).unwrap();
    let output = perron()
        .args([
            "--config",
            path.to_str().unwrap(),
            "--out",
            tmp.path().join("o").to_str().unwrap(),
            "sample-noise",
        ])
        .output()
        .unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("noise.dt"), "unhelpful error: {stderr}");
}

#[test]
fn plot_renders_manifold_sections() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "bilinear-saturated", 5e-3);
    let out = tmp.path().join("p");
    let status = perron()
        .args([
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "solve-manifold",
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let status = perron()
        .args(["plot", out.join("manifold.csv").to_str().unwrap()])
        .status()
        .unwrap();
    assert!(status.success());
    let svg = std::fs::read_to_string(out.join("manifold.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
}
