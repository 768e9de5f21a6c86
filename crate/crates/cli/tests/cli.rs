use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn tsc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tsc")).args(args).output().expect("run tsc")
}

fn ok(args: &[&str]) -> Output {
    let out = tsc(args);
    assert!(out.status.success(), "{args:?}\n{}", String::from_utf8_lossy(&out.stderr));
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read(p: PathBuf) -> String {
    fs::read_to_string(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

fn linear_config(dir: &Path, ridge: f64) -> PathBuf {
    let p = dir.join(format!("linear_{ridge}.toml"));
    fs::write(&p, format!("[estimator.regressor]\nkind = \"linear\"\nridge = {ridge:?}\n")).unwrap();
    p
}

/// Treated unit copies donor B before treatment.
const DONOR_PANEL: &str = "unit,z_1,t1,t2,t3,t4,t5
T,1,3,1,4,1,5
A,0,0,2,0,2,9
B,1,3,1,4,1,5
C,5,8,8,1,0,2
D,2,1,1,1,1,1
";

fn column_sums(csv: &str) -> Vec<f64> {
    let mut sums = Vec::new();
    for line in csv.lines().skip(1) {
        let vals: Vec<f64> = line.split(',').skip(1).map(|v| v.parse().unwrap()).collect();
        sums.resize(vals.len(), 0.0);
        for (s, v) in sums.iter_mut().zip(vals) {
            *s += v;
        }
    }
    sums
}

#[test]
fn simulate_writes_files_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        ok(&["simulate", "--dgp", "linear", "--seed", "1", "--out", s(out)]);
    }
    for f in ["panel.csv", "truth.csv", "meta.toml"] {
        assert_eq!(read(a.join(f)), read(b.join(f)), "{f}");
    }
    let panel = read(a.join("panel.csv"));
    assert_eq!(panel.lines().count(), 1 + 5);
    assert_eq!(read(a.join("truth.csv")).lines().count(), 1 + 50);
    assert!(read(a.join("meta.toml")).contains("t0 = 40"));
}

#[test]
fn unknown_generator_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = tsc(&["simulate", "--dgp", "cubic", "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("--dgp") && err.contains("cubic"), "{err}");
}

#[test]
fn unknown_config_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[estimator]\nkidn = \"tsc\"\n").unwrap();
    let out = tsc(&["--config", s(&cfg), "fit", "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("kidn"));
}

#[test]
fn missing_panel_is_an_io_error_naming_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.csv");
    let out = tsc(&["fit", "--panel", s(&missing), "--t0", "3", "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(5));
    assert!(String::from_utf8_lossy(&out.stderr).contains(s(&missing)));
}

#[test]
fn non_binary_panel_declared_binary_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let panel = dir.path().join("p.csv");
    fs::write(&panel, DONOR_PANEL).unwrap();
    let out = tsc(&["fit", "--panel", s(&panel), "--t0", "t4", "--binary", "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn fit_all_estimators_on_simulated_panel() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = linear_config(dir.path(), 1.0);
    let out = dir.path().join("fit");
    ok(&["--config", s(&cfg), "fit", "--dgp", "linear", "--seed", "2", "--out", s(&out)]);
    for name in ["sc", "plugin", "asc", "tsc"] {
        let csv = read(out.join(format!("result_{name}.csv")));
        assert_eq!(csv.lines().count(), 1 + 10, "{name}");
    }
    let tsc = read(out.join("result_tsc.csv"));
    let header: Vec<&str> = tsc.lines().next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == "root_found").unwrap();
    for line in tsc.lines().skip(1) {
        let v = line.split(',').nth(col).unwrap();
        assert!(v == "true" || v == "false");
    }
    assert!(out.join("summary.txt").exists());
    assert!(out.join("trajectory.svg").exists());
    assert!(!out.join("weights_plugin.csv").exists());
    for sums in column_sums(&read(out.join("weights_tsc.csv"))) {
        assert!((sums - 1.0).abs() < 1e-10);
    }
}

#[test]
fn fit_on_turnout_shaped_csv() {
    let fixture = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/turnout_mini.csv");
    let dir = tempfile::tempdir().unwrap();
    let cfg = linear_config(dir.path(), 1.0);
    let o = ok(&[
        "--config", s(&cfg), "fit", "--panel", s(&fixture), "--estimator", "tsc", "--treated", "NH", "--t0", "1996",
        "--out", s(dir.path()),
    ]);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("treated = NH") && stdout.contains("first treated period = 1996"), "{stdout}");
    let res = read(dir.path().join("result_tsc.csv"));
    let times: Vec<&str> = res.lines().skip(1).map(|l| l.split(',').nth(2).unwrap()).collect();
    assert_eq!(times, ["1996", "1998"]);
    let weights = read(dir.path().join("weights_tsc.csv"));
    assert!(!weights.contains("\nNH,"));
}

#[test]
fn weights_columns_sum_to_one_and_zero_residuals_match() {
    let dir = tempfile::tempdir().unwrap();
    let panel = dir.path().join("p.csv");
    fs::write(&panel, DONOR_PANEL).unwrap();
    // Four controls and ridge 0: the regression interpolates and targeting is a no-op.
    let cfg = linear_config(dir.path(), 0.0);
    let out = dir.path().join("w");
    ok(&["--config", s(&cfg), "weights", "--panel", s(&panel), "--t0", "t4", "--out", s(&out)]);
    let csv = read(out.join("weights.csv"));
    assert!(csv.starts_with("control_id,initial_weight,targeted_weight"));
    for line in csv.lines().skip(1) {
        let v: Vec<&str> = line.split(',').collect();
        assert_eq!(v[1], v[2]);
    }
    for sum in column_sums(&csv) {
        assert!((sum - 1.0).abs() < 1e-10);
    }
    assert!(read(out.join("diagnostics.csv")).contains(",true,false,"));
    assert!(out.join("weights.svg").exists());
}

#[test]
fn weights_clamped_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let panel = dir.path().join("p.csv");
    fs::write(&panel, DONOR_PANEL).unwrap();
    // A heavy ridge leaves donor B with a residual no tilt can cancel.
    let cfg = linear_config(dir.path(), 1000.0);
    let out = dir.path().join("w");
    ok(&["--config", s(&cfg), "--no-svg", "weights", "--panel", s(&panel), "--t0", "t4", "--out", s(&out)]);
    let diag = read(out.join("diagnostics.csv"));
    let row: Vec<&str> = diag.lines().nth(1).unwrap().split(',').collect();
    assert_eq!((row[3], row[4]), ("false", "true"));
    let csv = read(out.join("weights.csv"));
    assert!(csv.lines().skip(1).any(|l| {
        let v: Vec<&str> = l.split(',').collect();
        v[1] != v[2]
    }));
    for sum in column_sums(&csv) {
        assert!((sum - 1.0).abs() < 1e-10);
    }
}

fn small_benchmark(dir: &Path, workers: &str, svg: bool) -> PathBuf {
    let cfg = linear_config(dir, 1.0);
    let out = dir.join(format!("bench_{workers}_{svg}"));
    let svg_flag = if svg { "--svg" } else { "--no-svg" };
    ok(&[
        "--config", s(&cfg), "--workers", workers, svg_flag, "benchmark", "--seeds", "2", "--horizons", "1,3",
        "--outcome", "binary", "--out", s(&out),
    ]);
    out
}

#[test]
fn benchmark_is_independent_of_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let one = small_benchmark(dir.path(), "1", true);
    let four = small_benchmark(dir.path(), "4", true);
    let mut names: Vec<String> =
        fs::read_dir(&one).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    names.sort();
    assert!(names.contains(&"rmse_table.csv".to_string()));
    assert!(names.contains(&"manifest.toml".to_string()));
    for n in &names {
        assert_eq!(fs::read(one.join(n)).unwrap(), fs::read(four.join(n)).unwrap(), "{n}");
    }
    // Four generators, two horizons, four estimators.
    assert_eq!(read(one.join("rmse_table.csv")).lines().count(), 1 + 4 * 2 * 4);
}

#[test]
fn no_svg_writes_only_csv_and_text() {
    let dir = tempfile::tempdir().unwrap();
    let out = small_benchmark(dir.path(), "2", false);
    for e in fs::read_dir(&out).unwrap() {
        let name = e.unwrap().file_name().into_string().unwrap();
        assert!(!name.ends_with(".svg"), "{name}");
    }
}
