use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(format!("{name}.toml"))
}

fn hjrate(args: &[&str], cfg: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hjrate"))
        .args(args)
        .arg("--config")
        .arg(cfg)
        .arg("--output")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn body(text: &str) -> Vec<&str> {
    text.lines().filter(|l| !l.starts_with('#')).collect()
}

fn status_of<'a>(cert: &'a str, check: &str) -> &'a str {
    body(cert)
        .into_iter()
        .find(|l| l.starts_with(&format!("{check},")))
        .and_then(|l| l.rsplit(',').next())
        .unwrap_or_else(|| panic!("no {check} row in\n{cert}"))
}

fn patched(dir: &TempDir, name: &str, from: &str, to: &str) -> PathBuf {
    let text = fs::read_to_string(config(name)).unwrap();
    assert!(text.contains(from));
    let path = dir.path().join(format!("{name}-patched.toml"));
    fs::write(&path, text.replace(from, to)).unwrap();
    path
}

#[test]
fn constant_data_first_order_field_is_exact() {
    let dir = TempDir::new().unwrap();
    let o = hjrate(&["solve", "--first-order"], &config("constant_p3"), dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let field = fs::read_to_string(dir.path().join("u_first_order.txt")).unwrap();
    assert!(field.starts_with("# hjrate field\n# [domain]\n"));
    let rows = body(&field);
    assert!(!rows.is_empty());
    for row in rows {
        let cols: Vec<&str> = row.split_whitespace().collect();
        assert_eq!(cols.len(), 2);
        assert_eq!(cols[1], "1.0000000000000000e0");
    }
}

#[test]
fn zero_data_viscous_certificate_passes_constant_bound() {
    let dir = TempDir::new().unwrap();
    let o = hjrate(&["solve", "--epsilon", "1e-2"], &config("zero_data"), dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let cert = fs::read_to_string(dir.path().join("u_eps.cert.csv")).unwrap();
    assert!(cert.starts_with("# hjrate certificate\n"));
    for check in ["viscous_residual", "gradient_bound", "lower_bound", "constant_data_lower", "constant_data_upper"] {
        assert_eq!(status_of(&cert, check), "PASS", "{check}");
    }
}

#[test]
fn quadratic_exponent_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let cfg = patched(&dir, "distance_p3", "p = 3.0", "p = 2.0");
    let o = hjrate(&["solve", "--first-order"], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.starts_with("hjrate-error code=2 kind=config "), "{err}");
    assert!(err.contains("superquadratic"), "{err}");
}

#[test]
fn unknown_keys_are_rejected() {
    let dir = TempDir::new().unwrap();
    let cfg = patched(&dir, "distance_p3", "h_max", "h_mx");
    let o = hjrate(&["sweep"], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("h_mx"));
}

#[test]
fn bundled_sweeps_pass() {
    for name in ["distance_p3", "bump_p3"] {
        let dir = TempDir::new().unwrap();
        let o = hjrate(&["sweep"], &config(name), dir.path());
        assert!(o.status.success(), "{name}: {}{}", stdout(&o), stderr(&o));
        let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
        assert!(csv.contains("verdict,UPPER,pass,"), "{name}");
        assert!(csv.contains("verdict,SLOPE,pass,"), "{name}");
        for file in ["sweep.csv", "sweep.dat", "sweep.gp"] {
            let text = fs::read_to_string(dir.path().join(file)).unwrap();
            assert!(text.starts_with("# hjrate sweep\n# [domain]\n"), "{file}");
            assert!(text.contains(&format!("# directory = {:?}", dir.path().display().to_string())), "{file}");
        }
    }
    let dir = TempDir::new().unwrap();
    let o = hjrate(&["sweep"], &config("bump_p3"), dir.path());
    assert!(stdout(&o).contains("IMPROVED     pass"));
}

#[test]
fn interior_peak_is_routed_away_from_upper_estimates() {
    let dir = TempDir::new().unwrap();
    let o = hjrate(&["sweep"], &config("interior_peak"), dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    for name in ["UPPER", "IMPROVED", "SLOPE"] {
        assert!(csv.contains(&format!("verdict,{name},not-applicable,")), "{name}");
    }
}

#[test]
fn outputs_are_byte_identical_across_runs_and_worker_counts() {
    let dir = TempDir::new().unwrap();
    let cfg = config("cap_p3");
    let mut seen = Vec::new();
    for workers in ["1", "3"] {
        let o = hjrate(&["sweep", "--workers", workers], &cfg, dir.path());
        assert!(o.status.success(), "{}", stderr(&o));
        seen.push(fs::read(dir.path().join("sweep.csv")).unwrap());
        assert!(hjrate(&["solve", "--epsilon", "0.01", "--workers", workers], &cfg, dir.path()).status.success());
        seen.push(fs::read(dir.path().join("u_eps.txt")).unwrap());
    }
    assert_eq!(seen[0], seen[2]);
    assert_eq!(seen[1], seen[3]);
    let o = hjrate(&["sweep", "--workers", "0"], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn check_reproduces_and_detects_tampering() {
    let dir = TempDir::new().unwrap();
    let cfg = config("bump_p3");
    assert!(hjrate(&["solve", "--first-order"], &cfg, dir.path()).status.success());
    assert!(hjrate(&["solve", "--epsilon", "0.01"], &cfg, dir.path()).status.success());

    let o = hjrate(&["check"], &cfg, dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert_eq!(out.matches("matches stored certificate").count(), 2, "{out}");
    let cert = fs::read(dir.path().join("u_first_order.cert.csv")).unwrap();
    assert!(hjrate(&["check"], &cfg, dir.path()).status.success());
    assert_eq!(fs::read(dir.path().join("u_first_order.cert.csv")).unwrap(), cert);

    let r = hjrate(&["report"], &cfg, dir.path());
    assert!(r.status.success(), "{}", stderr(&r));
    assert!(stdout(&r).contains("semiconcavity            PASS"));

    // a stale config: different grid step
    let stale = patched(&dir, "bump_p3", "h_max = 0.015625", "h_max = 0.03125");
    let o = hjrate(&["check"], &stale, dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("grid mismatch"), "{}", stderr(&o));

    // one value edited in the middle of the field
    let path = dir.path().join("u_first_order.txt");
    let text = fs::read_to_string(&path).unwrap();
    let target = body(&text)[30].to_string();
    let mut cols: Vec<String> = target.split_whitespace().map(String::from).collect();
    let v: f64 = cols[1].parse().unwrap();
    cols[1] = format!("{:.16e}", v + 0.05);
    fs::write(&path, text.replacen(&target, &cols.join(" "), 1)).unwrap();
    let o = hjrate(&["check"], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(4));
    let out = stdout(&o);
    assert!(out.contains("differs from stored certificate"));
    assert!(out.contains("interior_residual        FAIL"), "{out}");
}

#[test]
fn check_without_fields_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let o = hjrate(&["check"], &config("distance_p3"), dir.path());
    assert_eq!(o.status.code(), Some(2));
    let o = hjrate(&["report"], &config("distance_p3"), dir.path());
    assert_eq!(o.status.code(), Some(2));
    let o = hjrate(&["solve", "--first-order"], &dir.path().join("missing.toml"), dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn two_dimensional_solve() {
    let dir = TempDir::new().unwrap();
    let o = hjrate(&["solve", "--epsilon", "0.05"], &config("disk_bump"), dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let field = fs::read_to_string(dir.path().join("u_eps.txt")).unwrap();
    assert!(field.contains("# columns = x y value"));
    assert_eq!(body(&field)[0].split_whitespace().count(), 3);
}
