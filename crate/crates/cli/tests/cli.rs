//! CLI behavior: file round-trips, preset contents, header provenance, and
//! exit codes.

use std::path::{Path, PathBuf};
use std::process::Command;

use scrooge::io::{parse_matrix_json, read_matrix, write_matrix, MeasureKind, SampleBatch};
use scrooge::{DensityOperator, HermitianOperator, StateVector};

fn tempdir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("scrooge-cli-{tag}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn scrooge(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_scrooge"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn assert_exit(args: &[&str], code: i32) {
    let out = scrooge(args);
    assert_eq!(
        out.status.code(),
        Some(code),
        "args {args:?}: stderr = {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn density_preset_maximally_mixed() {
    let dir = tempdir("mm");
    let out = dir.join("rho.json");
    assert_exit(
        &["density", "--preset", "maximally-mixed", "--dim", "4", "--out", p(&out), "--quiet"],
        0,
    );
    let m = read_matrix(&out).unwrap();
    for i in 0..4 {
        for j in 0..4 {
            let expected = if i == j { 0.25 } else { 0.0 };
            assert_eq!(m[[i, j]], num_complex::Complex64::new(expected, 0.0));
        }
    }
    let _ = std::fs::remove_dir_all(dir);
}

#[test]
fn density_thermal_two_level() {
    let dir = tempdir("thermal");
    let h_file = dir.join("h.json");
    let h = HermitianOperator::from_diagonal(&[0.0, 2.0f64.ln()]);
    write_matrix(&h_file, h.entries()).unwrap();
    let out = dir.join("rho.json");
    assert_exit(
        &["density", "--hamiltonian", p(&h_file), "--beta", "1", "--out", p(&out), "--quiet"],
        0,
    );
    let rho = DensityOperator::from_matrix(
        &HermitianOperator::validate(read_matrix(&out).unwrap(), 1e-9).unwrap(),
    )
    .unwrap();
    assert!((rho.eigenvalues()[0] - 2.0 / 3.0).abs() < 1e-12);
    assert!((rho.eigenvalues()[1] - 1.0 / 3.0).abs() < 1e-12);
    let _ = std::fs::remove_dir_all(dir);
}

#[test]
fn density_file_round_trip_is_byte_identical() {
    let dir = tempdir("roundtrip");
    let first = dir.join("a.json");
    let second = dir.join("b.json");
    assert_exit(
        &["density", "--preset", "thermal-qho", "--beta", "0.7", "--dim", "5", "--out", p(&first), "--quiet"],
        0,
    );
    // read -> validate -> rewrite must reproduce the numeric fields exactly.
    assert_exit(&["density", "--input", p(&first), "--out", p(&second), "--quiet"], 0);
    assert_eq!(std::fs::read(&first).unwrap(), std::fs::read(&second).unwrap());
    let _ = std::fs::remove_dir_all(dir);
}

#[test]
fn thermal_qho_epsilon_chooses_dimension() {
    let dir = tempdir("qho-eps");
    let out = dir.join("rho.json");
    // beta = 1: certified tails are e^{-N}, so 1e-8 forces N = 19.
    assert_exit(
        &["density", "--preset", "thermal-qho", "--beta", "1", "--epsilon", "1e-8", "--out", p(&out), "--quiet"],
        0,
    );
    let m = read_matrix(&out).unwrap();
    assert_eq!(m.nrows(), 19);
    let _ = std::fs::remove_dir_all(dir);
}

#[test]
fn sample_g_on_pure_state_stays_on_ray() {
    let dir = tempdir("pure-ray");
    let rho_file = dir.join("rho.json");
    assert_exit(
        &["density", "--preset", "pure", "--dim", "3", "--out", p(&rho_file), "--quiet"],
        0,
    );
    let batch_file = dir.join("batch.csv");
    assert_exit(
        &[
            "sample", "--rho", p(&rho_file), "--measure", "g", "--n", "200", "--seed", "9",
            "--out", p(&batch_file), "--quiet",
        ],
        0,
    );
    let batch = SampleBatch::load(&batch_file).unwrap();
    assert_eq!(batch.measure, MeasureKind::Gaussian);
    let phi = StateVector::basis(3, 0);
    for psi in &batch.samples {
        let overlap = phi.inner(psi);
        let residual: f64 = psi
            .components()
            .iter()
            .zip(phi.components().iter())
            .map(|(a, &b)| (a - overlap * b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert!(residual < 1e-12);
    }
    let _ = std::fs::remove_dir_all(dir);
}

#[test]
fn reweight_batch_header_and_mean_weight() {
    let dir = tempdir("reweight");
    let rho_file = dir.join("rho.json");
    assert_exit(
        &["density", "--preset", "maximally-mixed", "--dim", "3", "--out", p(&rho_file), "--quiet"],
        0,
    );
    let batch_file = dir.join("batch.csv");
    assert_exit(
        &[
            "sample", "--rho", p(&rho_file), "--measure", "gap-reweight", "--n", "20000",
            "--seed", "11", "--out", p(&batch_file), "--quiet",
        ],
        0,
    );
    let header = std::fs::read_to_string(&batch_file)
        .unwrap()
        .lines()
        .next()
        .unwrap()
        .to_string();
    assert!(header.contains("\"GA-weighted\""), "header: {header}");
    let batch = SampleBatch::load(&batch_file).unwrap();
    let weights = batch.weights.as_ref().unwrap();
    let mean: f64 = weights.iter().sum::<f64>() / weights.len() as f64;
    assert!((mean - 1.0).abs() < 0.03, "mean weight {mean}");
    let _ = std::fs::remove_dir_all(dir);
}

#[test]
fn estimate_basis_batch_matches_maximally_mixed() {
    let dir = tempdir("estimate");
    let rho_file = dir.join("rho.json");
    assert_exit(
        &["density", "--preset", "maximally-mixed", "--dim", "3", "--out", p(&rho_file), "--quiet"],
        0,
    );
    // A hand-built batch of the three basis vectors averages to I/3 exactly.
    let batch_file = dir.join("batch.csv");
    let batch = SampleBatch::from_states(
        MeasureKind::Gap,
        0,
        None,
        (0..3).map(|i| StateVector::basis(3, i)).collect(),
    );
    batch.save(&batch_file).unwrap();

    let report_file = dir.join("report.json");
    assert_exit(
        &[
            "estimate", "--batch", p(&batch_file), "--ref", p(&rho_file), "--out",
            p(&report_file), "--quiet",
        ],
        0,
    );
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report_file).unwrap()).unwrap();
    assert_eq!(report["n"].as_u64(), Some(3));
    assert!(report["ref_distance"].as_f64().unwrap() < 1e-10);
    let rho_hat = parse_matrix_json(&report["rho_hat"].to_string()).unwrap();
    assert_eq!(rho_hat[[0, 0]], num_complex::Complex64::new(1.0 / 3.0, 0.0));
    let _ = std::fs::remove_dir_all(dir);
}

#[test]
fn charfn_report_within_bound() {
    let dir = tempdir("charfn");
    let rho_file = dir.join("rho.json");
    assert_exit(
        &["density", "--preset", "thermal-qho", "--beta", "1", "--dim", "3", "--out", p(&rho_file), "--quiet"],
        0,
    );
    let out = dir.join("charfn.json");
    assert_exit(
        &[
            "charfn", "--rho", p(&rho_file), "--n", "20000", "--seed", "5", "--panel-size",
            "8", "--out", p(&out), "--quiet",
        ],
        0,
    );
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(report["panel"].as_array().unwrap().len(), 8);
    assert!(report["within_bound"].as_bool().unwrap());
    let _ = std::fs::remove_dir_all(dir);
}

#[test]
fn verify_counterexample_suite_passes() {
    assert_exit(&["verify", "--suite", "counterexample", "--seed", "1", "--quiet"], 0);
}

#[test]
fn usage_errors_exit_2() {
    assert_exit(&["sample", "--bogus-flag"], 2);
    assert_exit(&["density"], 2); // missing required --out
    let dir = tempdir("usage");
    let out = dir.join("x.json");
    // Invalid measure name is a usage error too.
    assert_exit(
        &["sample", "--rho", "nope.json", "--measure", "nonsense", "--out", p(&out)],
        2,
    );
    let _ = std::fs::remove_dir_all(dir);
}

#[test]
fn runtime_errors_exit_3() {
    let dir = tempdir("runtime");
    let out = dir.join("out.json");
    // Missing input file.
    assert_exit(
        &["sample", "--rho", p(&dir.join("missing.json")), "--measure", "g", "--out", p(&out)],
        3,
    );
    // Asymmetric matrix offered as a Hamiltonian.
    let bad = dir.join("bad.json");
    std::fs::write(
        &bad,
        "{\"dim\": 2, \"entries\": [[0.0, 0.0], [1.0, 0.0], [0.0, 0.0], [0.0, 0.0]]}",
    )
    .unwrap();
    assert_exit(
        &["density", "--hamiltonian", p(&bad), "--beta", "1", "--out", p(&out)],
        3,
    );
    // A non-density matrix (trace 2) offered as rho.
    let not_rho = dir.join("not_rho.json");
    std::fs::write(
        &not_rho,
        "{\"dim\": 2, \"entries\": [[1.0, 0.0], [0.0, 0.0], [0.0, 0.0], [1.0, 0.0]]}",
    )
    .unwrap();
    assert_exit(&["density", "--input", p(&not_rho), "--out", p(&out)], 3);
    let _ = std::fs::remove_dir_all(dir);
}

#[test]
fn missing_source_is_usage_error() {
    let dir = tempdir("nosource");
    let out = dir.join("out.json");
    // density with --out but no source: rejected before any computation.
    let result = scrooge(&["density", "--out", p(&out)]);
    assert_eq!(result.status.code(), Some(3));
    assert!(!out.exists());
    let _ = std::fs::remove_dir_all(dir);
}
