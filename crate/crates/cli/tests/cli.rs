//! End-to-end tests of the `modalsense` binary: every subcommand is driven
//! through a real process, and outputs are checked by reloading the files
//! it writes.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use modalsense::datasets::io::{load_matrix, save_matrix, SnapshotFormat};
use nalgebra::DMatrix;

/// Exact-equality tolerance for values that survive a CSV round trip
/// unchanged (the format uses shortest round-trip floats).
const EXACT: f64 = 0.0;
/// Tolerance for identities that hold only up to factorization roundoff.
const NUMERIC_TOL: f64 = 1e-8;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_modalsense"))
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    bin()
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary should spawn")
}

/// Runs a command that must succeed; returns its stdout.
fn run_ok(dir: &Path, args: &[&str]) -> String {
    let out = run_in(dir, args);
    assert!(
        out.status.success(),
        "command {:?} failed\nstdout: {}\nstderr: {}",
        args,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).expect("stdout should be UTF-8")
}

/// Runs a command that must fail; returns (exit code, stderr).
fn run_fail(dir: &Path, args: &[&str]) -> (i32, String) {
    let out = run_in(dir, args);
    assert!(
        !out.status.success(),
        "command {:?} unexpectedly succeeded",
        args
    );
    (
        out.status.code().expect("process should exit, not signal"),
        String::from_utf8(out.stderr).expect("stderr should be UTF-8"),
    )
}

fn temp_dir(label: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("modalsense_cli_{label}_{}", std::process::id()));
    if dir.exists() {
        std::fs::remove_dir_all(&dir).unwrap();
    }
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn load_csv(dir: &Path, name: &str) -> DMatrix<f64> {
    load_matrix(dir.join(name), SnapshotFormat::Csv)
        .unwrap_or_else(|e| panic!("loading {name}: {e}"))
        .0
}

/// Grabs the f64 printed after `<key> = ` on the command's stdout.
fn parse_stdout_value(stdout: &str, key: &str) -> f64 {
    let prefix = format!("{key} = ");
    stdout
        .lines()
        .find_map(|l| l.strip_prefix(&prefix))
        .unwrap_or_else(|| panic!("stdout lacks '{prefix}':\n{stdout}"))
        .trim()
        .parse()
        .expect("value should parse as f64")
}

#[test]
fn generate_defaults_write_full_benchmark_dims() {
    let dir = temp_dir("gen_default");
    run_ok(&dir, &["generate", "--out", "snaps.csv"]);
    let m = load_csv(&dir, "snaps.csv");
    assert_eq!((m.nrows(), m.ncols()), (40, 1000));
    assert!(dir.join("snaps.csv.manifest.json").exists());
}

#[test]
fn generate_respects_grid_and_sample_flags() {
    let dir = temp_dir("gen_flags");
    run_ok(
        &dir,
        &[
            "generate", "--grid", "8", "--samples", "4", "--terms", "6", "--out", "small.csv",
        ],
    );
    let m = load_csv(&dir, "small.csv");
    assert_eq!((m.nrows(), m.ncols()), (8, 4));
}

#[test]
fn generate_is_byte_identical_for_equal_seeds() {
    let dir = temp_dir("gen_repro");
    let args = [
        "generate", "--grid", "10", "--samples", "20", "--seed", "7", "--format", "binary",
    ];
    run_ok(&dir, &[&args[..], &["--out", "a.bin"]].concat());
    run_ok(&dir, &[&args[..], &["--out", "b.bin"]].concat());
    let a = std::fs::read(dir.join("a.bin")).unwrap();
    let b = std::fs::read(dir.join("b.bin")).unwrap();
    assert!(!a.is_empty());
    assert_eq!(a, b);
}

#[test]
fn cpqr_on_identity_columns_picks_their_rows() {
    let dir = temp_dir("cpqr_identity");
    // A basis whose j-th column is the j-th standard basis vector: the only
    // rows carrying any information are 0, 1, 2, so pivoting must take them.
    let phi = DMatrix::from_fn(8, 3, |r, c| if r == c { 1.0 } else { 0.0 });
    save_matrix(&phi, dir.join("basis.csv"), SnapshotFormat::Csv, Some("basis")).unwrap();
    run_ok(
        &dir,
        &["place", "--basis", "basis.csv", "--method", "cpqr", "--k", "3", "--out", "sel.csv"],
    );
    let sel = load_csv(&dir, "sel.csv");
    let mut idx: Vec<usize> = sel.iter().map(|&v| v as usize).collect();
    idx.sort_unstable();
    assert_eq!(idx, vec![0, 1, 2]);
}

#[test]
fn greedy_placement_stays_within_the_submodular_guarantee() {
    let dir = temp_dir("greedy_vs_brute");
    run_ok(
        &dir,
        &["generate", "--grid", "20", "--samples", "200", "--out", "snaps.csv"],
    );
    run_ok(
        &dir,
        &[
            "pod", "--input", "snaps.csv", "--modes", "10", "--train-fraction", "0.75",
            "--out-basis", "basis.csv", "--out-mean", "mean.csv", "--out-prior", "prior.csv",
        ],
    );
    let common = [
        "place", "--basis", "basis.csv", "--prior", "prior.csv", "--sigma", "0.1", "--k", "4",
    ];
    let greedy_out = run_ok(&dir, &[&common[..], &["--method", "greedy_d", "--out", "g.csv"]].concat());
    let brute_out = run_ok(&dir, &[&common[..], &["--method", "brute_d", "--out", "b.csv"]].concat());
    let greedy_gain = parse_stdout_value(&greedy_out, "info_gain");
    let brute_gain = parse_stdout_value(&brute_out, "info_gain");
    assert!(brute_gain > 0.0);
    assert!(greedy_gain <= brute_gain + NUMERIC_TOL);
    // 1 − 1/e lower bound for greedy maximization of the information gain.
    assert!(
        greedy_gain >= (1.0 - (-1.0f64).exp()) * brute_gain - NUMERIC_TOL,
        "greedy {greedy_gain} vs brute {brute_gain}"
    );
}

#[test]
fn map_estimate_returns_the_mean_on_meanlike_measurements() {
    let dir = temp_dir("map_mean");
    run_ok(
        &dir,
        &["generate", "--grid", "12", "--terms", "6", "--samples", "50", "--out", "snaps.csv"],
    );
    run_ok(
        &dir,
        &[
            "pod", "--input", "snaps.csv", "--modes", "4", "--train-fraction", "0.8",
            "--out-basis", "basis.csv", "--out-mean", "mean.csv", "--out-prior", "prior.csv",
        ],
    );
    run_ok(
        &dir,
        &["place", "--basis", "basis.csv", "--method", "cpqr", "--k", "4", "--out", "sel.csv"],
    );

    // Data whose every column is exactly the training mean: measurements
    // equal the mean's samples, the centered signal is zero, and the
    // posterior mean must come back as exactly the mean itself.
    let mean_text = std::fs::read_to_string(dir.join("mean.csv")).unwrap();
    let mean_line = mean_text.lines().nth(1).expect("mean body line");
    let data_text = format!("# rows=12 cols=3\n{mean_line}\n{mean_line}\n{mean_line}\n");
    std::fs::write(dir.join("meanlike.csv"), data_text).unwrap();

    run_ok(
        &dir,
        &[
            "reconstruct", "--method", "map", "--basis", "basis.csv", "--mean", "mean.csv",
            "--selection", "sel.csv", "--data", "meanlike.csv", "--prior", "prior.csv",
            "--sigma", "0.1", "--out-estimates", "est.csv", "--out-errors", "err.csv",
        ],
    );

    let est = load_csv(&dir, "est.csv");
    let mean = load_csv(&dir, "mean.csv");
    assert_eq!(est.ncols(), 3);
    for j in 0..3 {
        for r in 0..12 {
            let dev = (est[(r, j)] - mean[(r, 0)]).abs();
            assert!(dev <= EXACT, "estimate deviates from the mean at ({r},{j}) by {dev}");
        }
    }
    let err_text = std::fs::read_to_string(dir.join("err.csv")).unwrap();
    let rows: Vec<&str> = err_text.lines().collect();
    assert_eq!(rows[0], "sample,rel_error");
    assert_eq!(rows.len(), 4);
    for row in &rows[1..] {
        let rel: f64 = row.split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(rel, 0.0);
    }
}

#[test]
fn square_interpolation_matches_data_at_the_sensors() {
    let dir = temp_dir("deim_interp");
    run_ok(
        &dir,
        &["generate", "--grid", "12", "--terms", "6", "--samples", "50", "--out", "snaps.csv"],
    );
    run_ok(
        &dir,
        &[
            "pod", "--input", "snaps.csv", "--modes", "4", "--train-fraction", "0.8",
            "--out-basis", "basis.csv", "--out-mean", "mean.csv", "--out-prior", "prior.csv",
        ],
    );
    run_ok(
        &dir,
        &["place", "--basis", "basis.csv", "--method", "cpqr", "--k", "4", "--out", "sel.csv"],
    );
    run_ok(
        &dir,
        &[
            "reconstruct", "--method", "deim", "--basis", "basis.csv", "--mean", "mean.csv",
            "--selection", "sel.csv", "--data", "snaps.csv", "--out-estimates", "est.csv",
        ],
    );
    let est = load_csv(&dir, "est.csv");
    let data = load_csv(&dir, "snaps.csv");
    let sel = load_csv(&dir, "sel.csv");
    assert_eq!(est.shape(), data.shape());
    // With k = n the estimator interpolates: estimates agree with the data
    // at every selected row.
    for &s in sel.iter() {
        let r = s as usize;
        for j in 0..data.ncols() {
            let dev = (est[(r, j)] - data[(r, j)]).abs();
            assert!(
                dev <= NUMERIC_TOL,
                "row {r}, sample {j}: interpolation misses by {dev}"
            );
        }
    }
}

#[test]
fn risk_on_a_hand_checked_map_matches_closed_forms() {
    let dir = temp_dir("risk_toy");
    // A = [1 0], prior = I2, sigma = 1. By hand: pseudoinverse risk
    // = tr[(I-P)I] + ||A^+||_F^2 = 1 + 1 = 2; posterior covariance
    // = diag(1/2, 1) so its risk is 3/2; premium 1/2, all of it from the
    // noise term; A has a one-dimensional null space. The prior-side bound
    // is the top-nullity eigensum of the shrinkage I - diag(1/2, 1), i.e.
    // 1/2, and the noise-side bound is sigma^2 * ||A^+||_F^2 = 1.
    std::fs::write(dir.join("a.csv"), "# rows=1 cols=2\n1\n0\n").unwrap();
    std::fs::write(dir.join("prior.csv"), "# rows=2 cols=2 kind=prior\n1,0\n0,1\n").unwrap();
    run_ok(
        &dir,
        &[
            "risk", "--explicit-a", "a.csv", "--prior", "prior.csv", "--sigma", "1",
            "--out", "report.csv",
        ],
    );
    let text = std::fs::read_to_string(dir.join("report.csv")).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    assert_eq!(
        header,
        "risk_ls,risk_map,delta_prior,delta_noise,zeta_prior,zeta_noise,premium,nullity"
    );
    let vals: Vec<f64> = lines
        .next()
        .unwrap()
        .split(',')
        .map(|v| v.parse().unwrap())
        .collect();
    let (risk_ls, risk_map, dp, dn, zp, zn, premium, nullity) = (
        vals[0], vals[1], vals[2], vals[3], vals[4], vals[5], vals[6], vals[7],
    );
    assert!((risk_ls - 2.0).abs() <= 1e-12);
    assert!((risk_map - 1.5).abs() <= 1e-12);
    assert!((premium - 0.5).abs() <= 1e-12);
    assert!(dp.abs() <= 1e-12);
    assert!((dn - 0.5).abs() <= 1e-12);
    assert!((zp - 0.5).abs() <= 1e-12);
    assert!((zn - 1.0).abs() <= 1e-12);
    assert_eq!(nullity, 1.0);

    // Full-rank companion: A = I2 has an empty null space, so the prior
    // term vanishes and the whole premium (2 - 1 = 1) is noise-borne.
    std::fs::write(dir.join("a_full.csv"), "# rows=2 cols=2\n1,0\n0,1\n").unwrap();
    run_ok(
        &dir,
        &[
            "risk", "--explicit-a", "a_full.csv", "--prior", "prior.csv", "--sigma", "1",
            "--out", "report_full.csv",
        ],
    );
    let text = std::fs::read_to_string(dir.join("report_full.csv")).unwrap();
    let vals: Vec<f64> = text
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .map(|v| v.parse().unwrap())
        .collect();
    assert_eq!(vals[7], 0.0, "nullity of an identity map");
    assert!(vals[2].abs() <= 1e-12, "delta_prior must vanish at nullity 0");
    assert!((vals[6] - 1.0).abs() <= 1e-12, "premium");
}

#[test]
fn exhaustive_search_over_budget_exits_with_resource_code() {
    let dir = temp_dir("budget_guard");
    run_ok(
        &dir,
        &["generate", "--grid", "20", "--samples", "100", "--out", "snaps.csv"],
    );
    run_ok(
        &dir,
        &[
            "pod", "--input", "snaps.csv", "--modes", "10",
            "--out-basis", "basis.csv", "--out-mean", "mean.csv", "--out-prior", "prior.csv",
        ],
    );
    // C(20, 10) = 184756 subsets, far over a budget of 100.
    let (code, stderr) = run_fail(
        &dir,
        &[
            "place", "--basis", "basis.csv", "--method", "brute_d", "--k", "10",
            "--prior", "prior.csv", "--sigma", "0.1", "--budget", "100", "--out", "sel.csv",
        ],
    );
    assert_eq!(code, 3, "stderr: {stderr}");
    assert!(stderr.contains("error[budget]"), "stderr: {stderr}");
    assert!(!dir.join("sel.csv").exists());
}

#[test]
fn flags_override_config_file_values_in_the_manifest() {
    let dir = temp_dir("precedence");
    std::fs::write(
        dir.join("run.conf"),
        "[dataset]\ngrid = 12\nterms = 6\nsamples = 60\n\n[experiment]\nmethods = qdeim\nmodes = 3\nsensors = 3\nseeds = 0\n\n[noise]\nsigma = 0.1\n",
    )
    .unwrap();
    run_ok(
        &dir,
        &[
            "experiment", "--config", "run.conf", "--sigma", "0.05", "--out-dir", "out",
        ],
    );
    let manifest: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.join("out/error_sweep_manifest.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(manifest["config"]["noise.sigma"], "0.05");
    assert_eq!(manifest["config"]["dataset.grid"], "12");
    assert_eq!(manifest["command"], "experiment");

    let table = std::fs::read_to_string(dir.join("out/error_sweep.csv")).unwrap();
    let sigma_col = table
        .lines()
        .next()
        .unwrap()
        .split(',')
        .position(|c| c == "sigma")
        .unwrap();
    for line in table.lines().skip(1) {
        assert_eq!(line.split(',').nth(sigma_col).unwrap(), "0.05");
    }
}

#[test]
fn unknown_method_exits_with_usage_code() {
    let dir = temp_dir("usage_guard");
    let phi = DMatrix::from_fn(6, 2, |r, c| if r == c { 1.0 } else { 0.0 });
    save_matrix(&phi, dir.join("basis.csv"), SnapshotFormat::Csv, Some("basis")).unwrap();
    let (code, stderr) = run_fail(
        &dir,
        &["place", "--basis", "basis.csv", "--method", "warp", "--k", "2", "--out", "s.csv"],
    );
    assert_eq!(code, 2, "stderr: {stderr}");
    assert!(stderr.contains("error[usage]"), "stderr: {stderr}");
    // The complaint must name the bad method, not the missing prior flags.
    assert!(stderr.contains("unknown placement method 'warp'"), "stderr: {stderr}");
}

#[test]
fn dice_shorthand_writes_the_grid_and_chart() {
    let dir = temp_dir("dice_short");
    std::fs::write(
        dir.join("tiny.conf"),
        "[dataset]\ngrid = 14\nterms = 6\nsamples = 80\n",
    )
    .unwrap();
    run_ok(
        &dir,
        &[
            "dice", "--config", "tiny.conf", "--k", "3", "--modes", "3..5",
            "--sigmas", "1e-4,1e-1", "--out-dir", "out", "--svg",
        ],
    );
    let text = std::fs::read_to_string(dir.join("out/dice.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), "n,k,sigma,dice");
    // 3 mode counts x 2 noise levels.
    assert_eq!(text.lines().count(), 1 + 6);
    for line in text.lines().skip(1) {
        let dice: f64 = line.split(',').nth(3).unwrap().parse().unwrap();
        assert!((0.0..=1.0).contains(&dice));
    }
    let svg = std::fs::read_to_string(dir.join("out/dice.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 2);
    assert!(dir.join("out/dice_manifest.json").exists());
}

#[test]
fn risk_sweep_kind_reports_every_mode_count() {
    let dir = temp_dir("risk_sweep_cli");
    std::fs::write(
        dir.join("tiny.conf"),
        "[dataset]\ngrid = 14\nterms = 6\nsamples = 80\n\n[risk_sweep]\nk = 3\nmodes = 1..6\nseed = 0\n",
    )
    .unwrap();
    run_ok(
        &dir,
        &["experiment", "--config", "tiny.conf", "--kind", "risk_sweep", "--out-dir", "out"],
    );
    let text = std::fs::read_to_string(dir.join("out/risk_sweep.csv")).unwrap();
    assert_eq!(text.lines().count(), 1 + 6);
    let header: Vec<&str> = text.lines().next().unwrap().split(',').collect();
    let n_idx = header.iter().position(|c| *c == "n").unwrap();
    let premium_idx = header.iter().position(|c| *c == "premium").unwrap();
    for (i, line) in text.lines().skip(1).enumerate() {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells[n_idx], (i + 1).to_string());
        let premium: f64 = cells[premium_idx].parse().unwrap();
        assert!(premium >= -1e-10, "row {i}: premium {premium}");
    }
}
