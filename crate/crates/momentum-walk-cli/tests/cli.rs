//! Behavioral tests of the `mwalk` binary: flag handling, config files,
//! output shapes, and exit codes.

use std::path::PathBuf;
use std::process::{Command, Output};

struct TempDir(PathBuf);

impl TempDir {
    fn new(tag: &str) -> Self {
        let path = std::env::temp_dir().join(format!("mwalk-cli-{}-{tag}", std::process::id()));
        let _ = std::fs::remove_dir_all(&path);
        std::fs::create_dir_all(&path).unwrap();
        TempDir(path)
    }

    fn path(&self) -> String {
        self.0.display().to_string()
    }

    fn file(&self, name: &str) -> PathBuf {
        self.0.join(name)
    }

    fn read(&self, name: &str) -> String {
        std::fs::read_to_string(self.file(name)).unwrap()
    }
}

impl Drop for TempDir {
    fn drop(&mut self) {
        let _ = std::fs::remove_dir_all(&self.0);
    }
}

fn mwalk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mwalk"))
        .args(args)
        .output()
        .unwrap()
}

fn assert_code(output: &Output, expected: i32, context: &str) {
    assert_eq!(
        output.status.code(),
        Some(expected),
        "{context}: stdout: {} stderr: {}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
}

#[test]
fn help_and_version_exit_zero() {
    assert_code(&mwalk(&["--help"]), 0, "--help");
    assert_code(&mwalk(&["--version"]), 0, "--version");
    assert_code(&mwalk(&["run", "--help"]), 0, "run --help");
}

#[test]
fn usage_errors_exit_one() {
    assert_code(&mwalk(&["frobnicate"]), 1, "unknown subcommand");
    assert_code(&mwalk(&["run", "--bogus"]), 1, "unknown flag");
    let out = mwalk(&["run", "--k", "9.5"]);
    assert_code(&out, 1, "out-of-range kick");
    assert!(String::from_utf8_lossy(&out.stderr).contains("kick strength"));
    assert_code(&mwalk(&["script", "/nonexistent/x.qws"]), 1, "missing script");
    assert_code(&mwalk(&["script"]), 1, "script without source");
}

#[test]
fn numerical_guards_exit_two() {
    let dir = TempDir::new("guards");
    // Asymmetric kicks cannot be echoed with composed pulses.
    let out = mwalk(&[
        "reverse",
        "--k1",
        "-1.7",
        "--k2",
        "1.0",
        "--steps",
        "3",
        "--out-dir",
        &dir.path(),
    ]);
    assert_code(&out, 2, "composed reversal with asymmetric kicks");
    assert!(String::from_utf8_lossy(&out.stderr).contains("adjoint"));
    // A deliberately tiny grid trips the norm/leakage guard.
    let out = mwalk(&[
        "run",
        "--grid",
        "6",
        "--steps",
        "15",
        "--out-dir",
        &dir.path(),
    ]);
    assert_code(&out, 2, "undersized grid");
}

#[test]
fn selftest_passes_and_reports() {
    let out = mwalk(&["selftest"]);
    assert_code(&out, 0, "selftest");
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(stdout.matches(": PASS").count(), 3, "{stdout}");
}

#[test]
fn classical_reference_example() {
    let dir = TempDir::new("classical");
    let out = mwalk(&["classical", "--steps", "2", "--out-dir", &dir.path()]);
    assert_code(&out, 0, "classical");
    assert_eq!(dir.read("classical.csv"), "n,P\n-2,0.25\n0,0.5\n2,0.25\n");
}

#[test]
fn config_file_with_flag_overrides() {
    let dir = TempDir::new("config");
    std::fs::write(
        dir.file("walk.cfg"),
        "# trial configuration\nsteps = 3\nseed = 5\nnoise = 0.1\n",
    )
    .unwrap();
    let out = mwalk(&[
        "run",
        "--config",
        &dir.file("walk.cfg").display().to_string(),
        "--steps",
        "4",
        "--out-dir",
        &dir.path(),
    ]);
    assert_code(&out, 0, "run with config + override");
    // The flag wins over the file; the file's other keys hold.
    let manifest = dir.read("walk.manifest");
    assert!(manifest.contains("\nsteps = 4\n"), "{manifest}");
    assert!(manifest.contains("\nseed = 5\n"), "{manifest}");
    assert!(manifest.contains("\nnoise = 0.1\n"), "{manifest}");
    // Rows 0..4 plus the header.
    assert_eq!(dir.read("walk_stats.csv").lines().count(), 6);
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = TempDir::new("badkey");
    std::fs::write(dir.file("walk.cfg"), "stps = 3\n").unwrap();
    let out = mwalk(&[
        "run",
        "--config",
        &dir.file("walk.cfg").display().to_string(),
        "--out-dir",
        &dir.path(),
    ]);
    assert_code(&out, 1, "unknown config key");
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("stps"), "{stderr}");
    assert!(stderr.contains(":1"), "line number missing: {stderr}");
}

#[test]
fn walk_csv_shape_and_distribution_sanity() {
    let dir = TempDir::new("shape");
    let out = mwalk(&[
        "run",
        "--steps",
        "2",
        "--seed",
        "1",
        "--out-dir",
        &dir.path(),
    ]);
    assert_code(&out, 0, "short run");
    let csv = dir.read("walk.csv");
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("step,n,P,P_sigma1,P_sigma2"));
    // Probabilities in each step sum to 1.
    let mut sums = std::collections::BTreeMap::<usize, f64>::new();
    for line in lines {
        let mut cols = line.split(',');
        let step: usize = cols.next().unwrap().parse().unwrap();
        let _n: i64 = cols.next().unwrap().parse().unwrap();
        let p: f64 = cols.next().unwrap().parse().unwrap();
        *sums.entry(step).or_default() += p;
    }
    assert_eq!(sums.len(), 3);
    for (step, sum) in sums {
        assert!((sum - 1.0).abs() < 1e-9, "step {step} mass {sum}");
    }
}

#[test]
fn scan_phase_covers_the_circle_once() {
    let dir = TempDir::new("scan");
    let out = mwalk(&[
        "scan-phase",
        "--points",
        "8",
        "--at-steps",
        "2",
        "--out-dir",
        &dir.path(),
    ]);
    assert_code(&out, 0, "scan-phase");
    let csv = dir.read("scan.csv");
    let phis: Vec<f64> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(phis.len(), 8);
    assert_eq!(phis[0], 0.0);
    let spacing = std::f64::consts::PI / 4.0;
    for (i, phi) in phis.iter().enumerate() {
        assert!((phi - i as f64 * spacing).abs() < 1e-12);
    }
}

#[test]
fn noise_sweep_rows_per_level() {
    let dir = TempDir::new("sweep");
    let out = mwalk(&[
        "noise-sweep",
        "--levels",
        "0,0.3",
        "--steps",
        "2",
        "--out-dir",
        &dir.path(),
    ]);
    assert_code(&out, 0, "noise-sweep");
    let csv = dir.read("noise_sweep.csv");
    // Header + 2 levels x 3 rows.
    assert_eq!(csv.lines().count(), 7, "{csv}");
    assert!(csv.lines().nth(1).unwrap().starts_with("0,0,"));
    assert!(csv.lines().nth(4).unwrap().starts_with("0.3,0,"));
}

#[test]
fn reverse_returns_to_start_in_both_modes() {
    for mode in ["composed", "adjoint"] {
        let dir = TempDir::new(&format!("reverse-{mode}"));
        let out = mwalk(&[
            "reverse",
            "--steps",
            "4",
            "--mode",
            mode,
            "--out-dir",
            &dir.path(),
        ]);
        assert_code(&out, 0, "reverse");
        let stats = dir.read("reverse_stats.csv");
        let first = stats.lines().nth(1).unwrap();
        let last = stats.lines().last().unwrap();
        let energy = |row: &str| -> f64 { row.split(',').nth(2).unwrap().parse().unwrap() };
        assert!(
            (energy(first) - energy(last)).abs() < 1e-9,
            "{mode}: {first} vs {last}"
        );
    }
}

#[test]
fn bias_walks_away_from_center() {
    let dir = TempDir::new("bias");
    let out = mwalk(&[
        "bias",
        "--rho",
        "0.7",
        "--steps",
        "15",
        "--out-dir",
        &dir.path(),
    ]);
    assert_code(&out, 0, "bias");
    let stats = dir.read("bias_stats.csv");
    let last = stats.lines().last().unwrap();
    let mean: f64 = last.split(',').nth(1).unwrap().parse().unwrap();
    assert!((mean - 0.5).abs() > 2.0, "final mean {mean}");
}

#[test]
fn out_dir_is_created_recursively() {
    let dir = TempDir::new("nested");
    let nested = dir.file("a/b/c").display().to_string();
    let out = mwalk(&["classical", "--steps", "2", "--out-dir", &nested]);
    assert_code(&out, 0, "nested out-dir");
    assert!(dir.file("a/b/c/classical.csv").exists());
}

#[test]
fn trajectories_flag_runs_an_ensemble() {
    let dir = TempDir::new("ensemble");
    let out = mwalk(&[
        "run",
        "--steps",
        "3",
        "--trajectories",
        "16",
        "--beta-fwhm",
        "0.025",
        "--out-dir",
        &dir.path(),
    ]);
    assert_code(&out, 0, "ensemble run");
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("16 trajectories"), "{stdout}");
    let manifest = dir.read("walk.manifest");
    assert!(manifest.contains("\nbeta_samples = 16\n"), "{manifest}");
}
