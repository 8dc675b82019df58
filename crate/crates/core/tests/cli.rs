//! End-to-end checks of the command-line interface and its exit-code
//! contract: 0 success, 1 operational error, 2 verdict/threshold failure,
//! 3 solver non-convergence.

use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_levylab"))
}

fn write_config(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

const SMALL_STUDY: &str = r#"
[kernel]
family = "pareto"
d = 1
alpha = 1.0
r0 = 0.5

[coefficient]
family = "separable-trig"
amplitude = 0.5

[grid]
side = 8.0
rho = 4

[study]
m = 1.0
eps = ["1/2", "1/4"]
cg_tol = 1e-8
acceptance_threshold = 0.2

[study.rhs]
kind = "gaussian-bump"
width = 0.5

[validation]
m2_r_max = 1e4
m2_radii = 4
m3_radii = 5
envelope_radii = 60
osc_refine = 64

[probe]
delta = 0.5
x_halfwidth = 0.5
z_max = 1.0
"#;

const VIOLATOR: &str = r#"
[kernel]
family = "oscillation-violator"
d = 1
alpha = 0.5
r0 = 1.0

[coefficient]
family = "constant"
value = 1.0

[grid]
side = 8.0
rho = 4

[study]
eps = ["1/2"]

[study.rhs]
kind = "gaussian-bump"
width = 0.5

[validation]
m2_r_max = 1e4
m2_radii = 4
m3_radii = 5
envelope_radii = 60
osc_refine = 64
"#;

#[test]
fn validate_kernel_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let ok_cfg = write_config(dir.path(), "ok.toml", SMALL_STUDY);
    let out = dir.path().join("out_ok");
    let status = bin()
        .args(["validate-kernel", "--config"])
        .arg(&ok_cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    assert!(out.join("kernel_report.json").exists());

    let bad_cfg = write_config(dir.path(), "bad.toml", VIOLATOR);
    let out2 = dir.path().join("out_bad");
    let output = bin()
        .args(["validate-kernel", "--config"])
        .arg(&bad_cfg)
        .arg("--out")
        .arg(&out2)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(
        stdout.contains("oscillation-decay"),
        "stdout should name the failed verdict: {stdout}"
    );
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out2.join("kernel_report.json")).unwrap())
            .unwrap();
    assert_eq!(report["oscillation_decay"]["pass"], false);

    // Missing config file: operational error.
    let status = bin()
        .args(["validate-kernel", "--config", "/nonexistent/cfg.toml"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));
}

#[test]
fn solve_eps_commensurability_and_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "cfg.toml", SMALL_STUDY);
    let out = dir.path().join("out");

    // Valid dyadic eps.
    let status = bin()
        .args(["solve-eps", "--eps", "1/4", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    assert!(out.join("u_eps_1_4.bin").exists());
    assert!(out.join("u_eps_1_4.json").exists());
    let sidecar: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("u_eps_1_4.json")).unwrap())
            .unwrap();
    assert!(sidecar["c1_ratio"].as_f64().unwrap() <= 1.0 + 1e-6);
    assert_eq!(sidecar["config"]["kernel"]["family"], "pareto");

    // eps = 0.3: T/eps is not an integer -> operational rejection.
    let output = bin()
        .args(["solve-eps", "--eps", "0.3", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));

    // eps = 1/3 passes T/eps = 24 but no power-of-two grid resolves it.
    let output = bin()
        .args(["solve-eps", "--eps", "1/3", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
    let msg = String::from_utf8_lossy(&output.stderr);
    assert!(msg.contains("power of two"), "stderr: {msg}");
}

#[test]
fn solve_eps_nonconvergence_is_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let strict = SMALL_STUDY.replace("cg_tol = 1e-8", "cg_tol = 1e-13\ncg_max_iter = 2");
    let cfg = write_config(dir.path(), "cfg.toml", &strict);
    let status = bin()
        .args(["solve-eps", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("out"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(3));
}

#[test]
fn study_writes_all_artifacts_and_respects_threshold() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "cfg.toml", SMALL_STUDY);
    let out = dir.path().join("out");
    let status = bin()
        .args(["study", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    for name in ["report.json", "report.csv", "report.svg"] {
        assert!(out.join(name).exists(), "{name} missing");
    }
    let csv = std::fs::read_to_string(out.join("report.csv")).unwrap();
    assert!(csv.starts_with("eps,N,error,iterations,c1_ratio,c2_ratio,energy\n"));
    assert_eq!(csv.lines().count(), 3);

    // Impossible threshold: the report is still written, exit 2.
    let impossible = SMALL_STUDY.replace("acceptance_threshold = 0.2", "acceptance_threshold = 1e-9");
    let cfg2 = write_config(dir.path(), "cfg2.toml", &impossible);
    let out2 = dir.path().join("out2");
    let status = bin()
        .args(["study", "--config"])
        .arg(&cfg2)
        .arg("--out")
        .arg(&out2)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
    assert!(out2.join("report.json").exists());
}

#[test]
fn study_rejects_violating_kernel_with_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "cfg.toml", VIOLATOR);
    let out = dir.path().join("out");
    let status = bin()
        .args(["study", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
    assert!(out.join("kernel_report.json").exists());
}

#[test]
fn probe_weak_requires_the_probe_section() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "cfg.toml", SMALL_STUDY);
    let out = dir.path().join("out");
    let status = bin()
        .args(["probe-weak", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("weak_probe.json")).unwrap())
            .unwrap();
    assert_eq!(doc["rows"].as_array().unwrap().len(), 2);

    // Without [probe]: operational error.
    let no_probe = SMALL_STUDY.replace("[probe]\ndelta = 0.5\nx_halfwidth = 0.5\nz_max = 1.0\n", "");
    let cfg2 = write_config(dir.path(), "cfg2.toml", &no_probe);
    let status = bin()
        .args(["probe-weak", "--config"])
        .arg(&cfg2)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));
}

#[test]
fn outputs_are_bit_stable_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "cfg.toml", SMALL_STUDY);
    let (out1, out2) = (dir.path().join("r1"), dir.path().join("r2"));
    for out in [&out1, &out2] {
        let status = bin()
            .args(["study", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(out)
            .arg("--seed")
            .arg("7")
            .status()
            .unwrap();
        assert_eq!(status.code(), Some(0));
    }
    let strip = |p: &Path| {
        let mut v: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap();
        v.as_object_mut().unwrap().remove("timing");
        serde_json::to_string_pretty(&v).unwrap()
    };
    assert_eq!(
        strip(&out1.join("report.json")),
        strip(&out2.join("report.json"))
    );
    assert_eq!(
        std::fs::read(out1.join("report.csv")).unwrap(),
        std::fs::read(out2.join("report.csv")).unwrap()
    );
}

#[test]
fn env_var_overrides_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "cfg.toml", SMALL_STUDY);
    let out = dir.path().join("from_env");
    let status = bin()
        .args(["validate-kernel", "--config"])
        .arg(&cfg)
        .env("LEVYLAB_OUT", &out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    assert!(out.join("kernel_report.json").exists());
}
