use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_iontrap-duffing");

const REFERENCE_Z: &str = r#"
seed = 3

[axes.x]
f0_hz = 425.0e3

[axes.y]
f0_hz = 925.0e3

[axes.z]
f0_hz = 191.7e3
alpha3 = ALPHA

[model]
k = 7.5e4
mu = 177.1

[response]
lo_hz = -1500.0
hi_hz = 1500.0
step_hz = 10.0

[protocol]
lo_hz = 191.2e3
hi_hz = 192.2e3
step_hz = 100.0
settle_s = 0.02
measure_s = 0.005
direction = "both"

[synth]
lo_hz = -3000.0
hi_hz = 1500.0
step_hz = 10.0
noise = 0.02
direction = "both"
"#;

fn reference_z(alpha: &str) -> String {
    REFERENCE_Z.replace("ALPHA", alpha)
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("run.toml");
    fs::write(&p, text).unwrap();
    p
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().unwrap()
}

fn run_cmd(cmd: &str, config: &Path, out: &Path) -> Output {
    run(&[
        cmd,
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ])
}

fn data_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn basis_table_has_every_entry() {
    let o = run(&["basis"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(
        text.lines()
            .filter(|l| l.starts_with("| ") && !l.starts_with("| j"))
            .count(),
        25
    );
}

#[test]
fn response_is_byte_identical_across_runs() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), &reference_z("0.1959e18"));
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        for cmd in ["response", "synth"] {
            assert_eq!(run_cmd(cmd, &cfg, out).status.code(), Some(0));
        }
    }
    for name in ["response.csv", "measurement.csv"] {
        assert_eq!(
            fs::read(a.join(name)).unwrap(),
            fs::read(b.join(name)).unwrap(),
            "{name}"
        );
    }
    let text = fs::read_to_string(a.join("response.csv")).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# iontrap-duffing "));
    let digest = lines
        .next()
        .unwrap()
        .strip_prefix("# config-sha256 ")
        .unwrap()
        .to_string();
    assert_eq!(digest.len(), 64);
    assert_eq!(lines.next().unwrap(), "sigma_hz,a_m,branch,stable");
}

#[test]
fn unknown_key_is_a_validation_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        &reference_z("0.1959e18").replace("mu = 177.1", "mu = 177.1\ndamping = 1.0"),
    );
    let o = run_cmd("response", &cfg, dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8(o.stderr).unwrap().contains("damping"));
}

#[test]
fn missing_config_is_an_io_error() {
    let dir = TempDir::new().unwrap();
    let o = run_cmd("response", &dir.path().join("absent.toml"), dir.path());
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn unwritable_output_is_an_io_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), &reference_z("0.1959e18"));
    let blocker = dir.path().join("file");
    fs::write(&blocker, "").unwrap();
    let o = run_cmd("response", &cfg, &blocker.join("sub"));
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn runaway_sweep_is_a_numerical_error() {
    let dir = TempDir::new().unwrap();
    let text = reference_z("-1e24").replace("k = 7.5e4", "k = 1e9");
    let cfg = write_config(dir.path(), &text);
    let o = run_cmd("sweep", &cfg, dir.path());
    assert_eq!(
        o.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
}

#[test]
fn pure_quadrupole_has_no_cubic_term() {
    let dir = TempDir::new().unwrap();
    let text = r#"
[trap]
mass_u = 40.0
rf_hz = 24.0e6
r0_m = 1.0e-3

[multipole]
rf = { "9" = 139.0 }
dc = { "7" = 0.15 }

[model]
k = 7.5e4
mu = 177.1
"#;
    let cfg = write_config(dir.path(), text);
    let o = run_cmd("coeffs", &cfg, dir.path());
    assert_eq!(o.status.code(), Some(0));
    let stdout = String::from_utf8(o.stdout).unwrap();
    let z = stdout.split("axis z:").nth(1).unwrap();
    let alpha3 = z
        .lines()
        .find(|l| l.trim_start().starts_with("alpha3"))
        .unwrap();
    let v: f64 = alpha3.split_whitespace().nth(1).unwrap().parse().unwrap();
    assert_eq!(v, 0.0);
}

#[test]
fn softening_response_peaks_below_resonance() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), &reference_z("-0.1959e18"));
    assert_eq!(run_cmd("response", &cfg, dir.path()).status.code(), Some(0));
    let rows = data_rows(&dir.path().join("response.csv"));
    let (sigma, _) = rows
        .iter()
        .map(|r| (r[0].parse::<f64>().unwrap(), r[1].parse::<f64>().unwrap()))
        .fold((0.0, 0.0), |b, x| if x.1 > b.1 { x } else { b });
    assert!(sigma < 0.0, "{sigma}");
}

#[test]
fn linear_sweep_agrees_between_directions() {
    let dir = TempDir::new().unwrap();
    // 1/mu is 5.6 ms; settle long enough that the start-up transient has decayed
    let cfg = write_config(
        dir.path(),
        &reference_z("0.0").replace("settle_s = 0.02", "settle_s = 0.04"),
    );
    let o = run_cmd("sweep", &cfg, dir.path());
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let read = |name: &str| {
        let mut rows: Vec<(f64, f64, f64)> = data_rows(&dir.path().join(name))
            .iter()
            .map(|r| {
                (
                    r[0].parse().unwrap(),
                    r[2].parse().unwrap(),
                    r[3].parse().unwrap(),
                )
            })
            .collect();
        rows.sort_by(|a, b| a.0.total_cmp(&b.0));
        rows
    };
    let (up, down) = (read("sweep_positive.csv"), read("sweep_negative.csv"));
    assert_eq!(up.len(), 11);
    for (u, d) in up.iter().zip(&down) {
        assert_eq!(u.0, d.0);
        assert!(
            (u.1 / d.1 - 1.0).abs() < 0.01,
            "{} Hz: {} vs {}",
            u.0,
            u.1,
            d.1
        );
        assert!(u.2 < 1e-9 && d.2 < 1e-9);
    }
}

#[test]
fn synthetic_data_fits_back() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), &reference_z("0.1959e18"));
    assert_eq!(run_cmd("synth", &cfg, dir.path()).status.code(), Some(0));
    let data = dir.path().join("measurement.csv");
    let o = run(&[
        "fit",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--data",
        data.to_str().unwrap(),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let kv = fs::read_to_string(dir.path().join("fit.kv")).unwrap();
    let get = |key: &str| -> f64 {
        kv.lines()
            .filter(|l| !l.starts_with('#'))
            .find_map(|l| l.strip_prefix(key).and_then(|r| r.trim().strip_prefix('=')))
            .unwrap_or_else(|| panic!("{key} missing in\n{kv}"))
            .trim()
            .parse()
            .unwrap()
    };
    assert!((get("mu") / 177.1 - 1.0).abs() < 0.15);
    assert!((get("k") / 7.5e4 - 1.0).abs() < 0.15);
    assert!((get("alpha_total") / 0.1959e18 - 1.0).abs() < 0.15);
}

#[test]
fn fit_without_rows_is_a_validation_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), &reference_z("0.1959e18"));
    let data = dir.path().join("empty.csv");
    fs::write(&data, "freq_hz,amplitude_m,axis,direction\n").unwrap();
    let o = run(&[
        "fit",
        "-c",
        cfg.to_str().unwrap(),
        "-o",
        dir.path().to_str().unwrap(),
        "-d",
        data.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
}
