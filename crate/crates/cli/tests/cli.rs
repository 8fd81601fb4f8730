use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn fcdg(cwd: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fcdg"))
        .args(args)
        .current_dir(cwd)
        .env("FCDG_CACHE_DIR", Path::new(env!("CARGO_TARGET_TMPDIR")).join("fcdg-cache"))
        .output()
        .expect("binary runs")
}

fn config(name: &str) -> String {
    configs().join(name).to_string_lossy().into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

const SMALL_1D: &str = r#"
basis = { kind = "legendre", q = 5 }
n_el = 6
t_final = 0.5
initial = { kind = "sine", k = 2.0 }
"#;

#[test]
fn converge_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = fcdg(dir.path(), &["converge", "--config", &config("transport1d_deg9.cfg")]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = std::fs::read_to_string(dir.path().join("transport1d_deg9_converge.csv")).unwrap();
    let lines: Vec<&str> = report.lines().collect();
    assert_eq!(lines[0], "n_el,h,l2_error,plateau");
    assert_eq!(lines.len(), 9);
    let fit = std::fs::read_to_string(dir.path().join("transport1d_deg9_converge_fit.csv")).unwrap();
    assert!(fit.starts_with("rate,saturation,fit_rows\n"));
}

#[test]
fn missing_config_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = fcdg(dir.path(), &["converge", "--config", "does-not-exist.cfg"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_subcommand_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(fcdg(dir.path(), &["frobnicate"]).status.code(), Some(2));
    assert_eq!(fcdg(dir.path(), &["transport1d"]).status.code(), Some(2));
}

#[test]
fn malformed_config_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.cfg", "basis = { kind = \"legendre\", q = 5 }\nn_el = \"six\"\n");
    let out = fcdg(dir.path(), &["transport1d", "--config", &bad]);
    assert_eq!(out.status.code(), Some(2));
    let forced = std::fs::read_to_string(configs().join("forced_cavity.cfg"))
        .unwrap()
        .replace("integrator = \"rk4\"", "integrator = \"taylor\"");
    let forced = write(dir.path(), "forced.cfg", &forced);
    assert_eq!(fcdg(dir.path(), &["maxwell2d", "--config", &forced]).status.code(), Some(2));
}

#[test]
fn runtime_failure_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let big = write(dir.path(), "big.cfg", "basis = { kind = \"legendre\", q = 20 }\nn_el = 400\n");
    let out = fcdg(dir.path(), &["spectrum", "--config", &big]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
}

#[test]
fn spectrum_has_one_row_per_unknown() {
    let dir = tempfile::tempdir().unwrap();
    let out = fcdg(dir.path(), &["spectrum", "--config", &config("fc_n40.cfg")]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("fc_n40_spectrum.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("re_lambda,im_lambda"));
    assert_eq!(csv.lines().count() - 1, 40 * 30);
}

#[test]
fn identical_configs_give_identical_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.cfg", SMALL_1D);
    for out in ["a.csv", "b.csv"] {
        assert!(fcdg(dir.path(), &["transport1d", "--config", &cfg, "--out", out]).status.success());
    }
    let a = std::fs::read(dir.path().join("a.csv")).unwrap();
    let b = std::fs::read(dir.path().join("b.csv")).unwrap();
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("t,l2_error\n0.0000000000000000e0,"));
}

#[test]
fn longtime_zero_time_is_single_row() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = std::fs::read_to_string(configs().join("longtime_sine.cfg"))
        .unwrap()
        .replace("t_final = 100.0", "t_final = 0.0");
    let cfg = write(dir.path(), "zero.cfg", &cfg);
    let out = fcdg(dir.path(), &["longtime", "--config", &cfg]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("zero_longtime.csv")).unwrap();
    assert_eq!(csv, "t,l2_error\n0.0000000000000000e0,0.0000000000000000e0\n");
}

#[test]
fn maxwell_writes_energy_and_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let out = fcdg(dir.path(), &["maxwell2d", "--config", &config("maxwell_standing_mode.cfg"), "--out", "mode.csv"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let energy = std::fs::read_to_string(dir.path().join("mode.csv")).unwrap();
    assert_eq!(energy.lines().next(), Some("t,energy"));
    let snap = std::fs::read_to_string(dir.path().join("mode_t0.csv")).unwrap();
    assert_eq!(snap.lines().next(), Some("x,y,hz,ex,ey"));
    assert_eq!(snap.lines().count() - 1, 20 * 20 * 36);
}

#[test]
fn assemble_and_dump_basis() {
    let dir = tempfile::tempdir().unwrap();
    let out = fcdg(dir.path(), &["assemble", "--config", &config("basis_fc_n20.cfg"), "--out", "ops.fcdg"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let bytes = std::fs::read(dir.path().join("ops.fcdg")).unwrap();
    assert_eq!(&bytes[..4], b"FCDG");

    let out = fcdg(dir.path(), &["basis-dump", "--config", &config("basis_fc_n20.cfg")]);
    assert!(out.status.success());
    let csv = std::fs::read_to_string(dir.path().join("basis_fc_n20_basis-dump.csv")).unwrap();
    assert_eq!(csv.lines().count(), 402);
    assert_eq!(csv.lines().next().unwrap().split(',').count(), 21);
}

#[test]
fn dispersion_rows_follow_samples() {
    let dir = tempfile::tempdir().unwrap();
    let out = fcdg(dir.path(), &["dispersion", "--config", &config("dispersion_legendre_q10.cfg")]);
    assert!(out.status.success());
    let csv = std::fs::read_to_string(dir.path().join("dispersion_legendre_q10_dispersion.csv")).unwrap();
    assert_eq!(csv.lines().count(), 402);
}
