//! End-to-end tests of the command-line surface: subcommand behavior, exit
//! codes, artifact layout, and run-to-run determinism.

use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_eigopt")
}

fn write(path: &Path, content: &str) {
    std::fs::write(path, content).unwrap();
}

fn diag_mtx(dir: &Path) -> PathBuf {
    let p = dir.join("diag.mtx");
    write(
        &p,
        "%%MatrixMarket matrix coordinate real general\n3 3 3\n1 1 -1.0\n2 2 -2.0\n3 3 -3.0\n",
    );
    p
}

/// Small sparse Hurwitz matrix with a handful of couplings.
fn hurwitz_mtx(dir: &Path) -> PathBuf {
    let p = dir.join("hurwitz.mtx");
    write(
        &p,
        "%%MatrixMarket matrix coordinate real general\n\
         4 4 8\n\
         1 1 -1.0\n2 2 -1.5\n3 3 -2.0\n4 4 -2.5\n\
         1 2 0.4\n2 3 -0.3\n3 4 0.2\n4 1 0.1\n",
    );
    p
}

#[test]
fn psa_eps_zero_returns_spectral_abscissa_immediately() {
    let dir = tempfile::tempdir().unwrap();
    let mtx = diag_mtx(dir.path());
    let out = dir.path().join("out");
    let status = Command::new(bin())
        .args([
            "psa",
            "--matrix",
            mtx.to_str().unwrap(),
            "--eps",
            "0",
            "--structure",
            "full",
            "--real",
            "--out-dir",
            out.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["result_value"].as_f64().unwrap(), -1.0);
    assert_eq!(summary["n_eig"].as_u64().unwrap(), 1);
}

#[test]
fn psa_fixed_eps_normal_matrix_analytic_value() {
    let dir = tempfile::tempdir().unwrap();
    let mtx = diag_mtx(dir.path());
    let out = dir.path().join("out");
    let status = Command::new(bin())
        .args([
            "psa",
            "--matrix",
            mtx.to_str().unwrap(),
            "--eps",
            "0.5",
            "--structure",
            "full",
            "--complex",
            "--out-dir",
            out.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert!((summary["result_value"].as_f64().unwrap() + 0.5).abs() < 1e-8);
    // Fixed-eps artifact set: no outer trace.
    assert!(out.join("inner_trace.csv").exists());
    assert!(out.join("e_star.mtx").exists());
    assert!(out.join("factors.json").exists());
    assert!(!out.join("outer_trace.csv").exists());
}

#[test]
fn dist2inst_produces_outer_trace_and_converges() {
    let dir = tempfile::tempdir().unwrap();
    let mtx = hurwitz_mtx(dir.path());
    let out = dir.path().join("out");
    let status = Command::new(bin())
        .args([
            "dist2inst",
            "--matrix",
            mtx.to_str().unwrap(),
            "--real",
            "--out-dir",
            out.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    assert!(out.join("outer_trace.csv").exists());
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    let eps_star = summary["eps_star"].as_f64().unwrap();
    assert!(eps_star > 0.0);
    // The perturbed rightmost eigenvalue sits on the imaginary axis.
    assert!(summary["lambda_re"].as_f64().unwrap().abs() < 1e-6);
}

#[test]
fn unknown_flag_and_missing_file_exit_one() {
    let status = Command::new(bin())
        .args(["psa", "--no-such-flag"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));
    let status = Command::new(bin())
        .args(["psa", "--matrix", "/nonexistent/a.mtx", "--eps", "1"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));
}

#[test]
fn project_check_passes_on_valid_structures() {
    let dir = tempfile::tempdir().unwrap();
    let mtx = hurwitz_mtx(dir.path());
    for structure in ["sparsity-of-input", "toeplitz", "hankel", "full"] {
        let status = Command::new(bin())
            .args([
                "project-check",
                "--matrix",
                mtx.to_str().unwrap(),
                "--structure",
                structure,
                "--real",
                "--seed",
                "7",
                "--samples",
                "20",
            ])
            .status()
            .unwrap();
        assert_eq!(status.code(), Some(0), "structure {structure}");
    }
    // Hamiltonian needs even size: 4x4 works.
    let status = Command::new(bin())
        .args([
            "project-check",
            "--matrix",
            mtx.to_str().unwrap(),
            "--structure",
            "hamiltonian",
            "--seed",
            "7",
        ])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
}

#[test]
fn trace_plot_data_emits_accepted_rows() {
    let dir = tempfile::tempdir().unwrap();
    let mtx = diag_mtx(dir.path());
    let out = dir.path().join("out");
    Command::new(bin())
        .args([
            "psa",
            "--matrix",
            mtx.to_str().unwrap(),
            "--eps",
            "0.3",
            "--structure",
            "toeplitz",
            "--real",
            "--out-dir",
            out.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    let trace = out.join("inner_trace.csv");
    let plot = out.join("plot.csv");
    let status = Command::new(bin())
        .args([
            "trace-plot-data",
            trace.to_str().unwrap(),
            "--out",
            plot.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let text = std::fs::read_to_string(&plot).unwrap();
    let mut lines = text.trim().lines();
    assert_eq!(lines.next().unwrap(), "k,t,f");
    // Monotone decay in the plotted f column.
    let fs: Vec<f64> = lines
        .map(|l| l.split(',').nth(2).unwrap().parse().unwrap())
        .collect();
    assert!(fs.len() >= 2);
    for w in fs.windows(2) {
        assert!(w[1] <= w[0] + 1e-12);
    }
}

#[test]
fn identical_invocations_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let mtx = hurwitz_mtx(dir.path());
    let run = |out: &Path| {
        let status = Command::new(bin())
            .args([
                "psa",
                "--matrix",
                mtx.to_str().unwrap(),
                "--eps",
                "0.4",
                "--structure",
                "sparsity-of-input",
                "--real",
                "--out-dir",
                out.to_str().unwrap(),
            ])
            .status()
            .unwrap();
        assert_eq!(status.code(), Some(0));
    };
    let out1 = dir.path().join("o1");
    let out2 = dir.path().join("o2");
    run(&out1);
    run(&out2);
    for f in ["summary.json", "inner_trace.csv", "e_star.mtx", "factors.json"] {
        let a = std::fs::read(out1.join(f)).unwrap();
        let b = std::fs::read(out2.join(f)).unwrap();
        assert_eq!(a, b, "artifact {f} differs between identical runs");
    }
}

#[test]
fn warm_start_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let mtx = hurwitz_mtx(dir.path());
    let out1 = dir.path().join("cold");
    Command::new(bin())
        .args([
            "psa",
            "--matrix",
            mtx.to_str().unwrap(),
            "--eps",
            "0.4",
            "--real",
            "--out-dir",
            out1.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    let out2 = dir.path().join("warm");
    let status = Command::new(bin())
        .args([
            "psa",
            "--matrix",
            mtx.to_str().unwrap(),
            "--eps",
            "0.4",
            "--real",
            "--warm-start",
            out1.join("factors.json").to_str().unwrap(),
            "--out-dir",
            out2.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let s1: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out1.join("summary.json")).unwrap()).unwrap();
    let s2: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out2.join("summary.json")).unwrap()).unwrap();
    let f1 = s1["f_star"].as_f64().unwrap();
    let f2 = s2["f_star"].as_f64().unwrap();
    assert!((f1 - f2).abs() <= 1e-9 * (1.0 + f1.abs()));
    assert!(s2["n_eig"].as_u64().unwrap() <= s1["n_eig"].as_u64().unwrap());
}
