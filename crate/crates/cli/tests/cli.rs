use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use ringfringe::calibration::{exact_fringe, synthetic_power_scan, BrightnessParams, FringeSample};
use ringfringe::coincidence::{fringe_visibility, FringeModel};
use ringfringe::device;
use ringfringe_cli::table::fmt;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ringfringe"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn ok(args: &[&str]) -> Value {
    let out = run(args);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn csv_rows(p: &Path) -> Vec<Vec<f64>> {
    let text = std::fs::read_to_string(p).unwrap();
    text.lines().skip(1).map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect()
}

fn write_fringe(path: &Path, data: &[FringeSample]) {
    let mut s = String::from("phi_rad,counts,integration_s\n");
    for d in data {
        s += &format!("{},{},{}\n", fmt(d.phi_rad), fmt(d.counts), fmt(d.integration_s));
    }
    std::fs::write(path, s).unwrap();
}

fn ideal_file(dir: &Path, edit: impl Fn(String) -> String) -> PathBuf {
    let text = std::fs::read_to_string(configs().join("ideal.toml")).unwrap();
    let p = dir.join("exp.toml");
    std::fs::write(&p, edit(text)).unwrap();
    p
}

#[test]
fn ideal_config_visibilities() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("f.csv");
    let cfg = configs().join("ideal.toml");
    let v = ok(&["fringe", "--config", path_str(&cfg), "--out", path_str(&out)]);
    let ind = v["indistinguishable"]["visibility"].as_f64().unwrap();
    let dist = v["distinguishable"]["visibility"].as_f64().unwrap();
    assert!((ind - 1.0).abs() < 1e-9 && (dist - 1.0 / 3.0).abs() < 1e-9, "{ind} {dist}");

    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("phi_rad,p4f_indistinguishable,p4f_distinguishable\n"));
    let rows = csv_rows(&out);
    assert_eq!(rows.len(), 101);
    for r in rows {
        assert!((r[1] - 0.5 * (1.0 + (2.0 * r[0]).cos())).abs() < 1e-12);
    }
}

#[test]
fn device_config_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("f.csv");
    let cfg = configs().join("device.toml");
    let v = ok(&["fringe", "--config", path_str(&cfg), "--out", path_str(&out)]);
    let want = fringe_visibility(&device::headline_config::<f64>().unwrap()).unwrap().visibility;
    assert_eq!(v["indistinguishable"]["visibility"].as_f64().unwrap(), want);
    // The built-in description is the same device.
    let builtin = ok(&["fringe", "--out", path_str(&dir.path().join("g.csv"))]);
    assert_eq!(builtin, v);
}

#[test]
fn device_config_visibility_in_reported_band() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("device.toml");
    let v = ok(&["fringe", "--config", path_str(&cfg), "--out", path_str(&dir.path().join("f.csv"))]);
    let ind = v["indistinguishable"]["visibility"].as_f64().unwrap();
    assert!((0.69..=0.75).contains(&ind), "visibility {ind}");
}

#[test]
fn empty_grid_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("f.csv");
    let r = run(&["fringe", "--grid", "0", "--out", path_str(&out)]);
    assert_eq!(r.status.code(), Some(2));
    let cfg = ideal_file(dir.path(), |t| t.replace("phi_points = 101", "phi_points = 0"));
    let r = run(&["fringe", "--config", path_str(&cfg), "--out", path_str(&out)]);
    assert_eq!(r.status.code(), Some(2));
    let err = String::from_utf8_lossy(&r.stderr);
    assert!(err.contains("line 19") && err.contains("phi_points"), "{err}");
}

#[test]
fn config_errors_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("f.csv");
    let cfg = ideal_file(dir.path(), |t| t.replace("theta_rad =", "theta_deg = 45.0\ntheta_rad ="));
    let r = run(&["fringe", "--config", path_str(&cfg), "--out", path_str(&out)]);
    assert_eq!(r.status.code(), Some(2));
    let err = String::from_utf8_lossy(&r.stderr);
    assert!(err.contains("theta_deg") && err.contains("line 10"), "{err}");

    let cfg = ideal_file(dir.path(), |t| t.replace("eta_idler2 = 1.0", "eta_idler2 = 1.5"));
    let r = run(&["fringe", "--config", path_str(&cfg), "--out", path_str(&out)]);
    assert_eq!(r.status.code(), Some(2));
    let err = String::from_utf8_lossy(&r.stderr);
    assert!(err.contains("line 14") && err.contains("eta_idler2"), "{err}");
}

#[test]
fn bad_subcommand_and_missing_file() {
    assert_eq!(run(&["interfere"]).status.code(), Some(2));
    assert_eq!(run(&["fit", "fringe", "--input", "/nonexistent.csv"]).status.code(), Some(2));
}

#[test]
fn numerical_failure_exit_code() {
    let r = run(&["jsa", "--filter-ghz", "0.001"]);
    assert_eq!(r.status.code(), Some(3));
}

#[test]
fn visibility_sweep_is_monotone() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.csv");
    let cfg = configs().join("device.toml");
    ok(&["visibility-sweep", "--config", path_str(&cfg), "--out", path_str(&out)]);
    assert!(std::fs::read_to_string(&out).unwrap().starts_with("nbar,visibility\n"));
    let rows = csv_rows(&out);
    assert_eq!(rows.len(), 20);
    assert!((rows[0][0] - 0.001).abs() < 1e-15 && (rows[19][0] - 0.2).abs() < 1e-15);
    assert!(rows.windows(2).all(|w| w[1][1] <= w[0][1]));
}

#[test]
fn visibility_sweep_headline_point_in_reported_band() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.csv");
    let cfg = configs().join("device.toml");
    ok(&["visibility-sweep", "--config", path_str(&cfg), "--out", path_str(&out), "--grid", "1", "--nbar-min", "0.11", "--nbar-max", "0.11"]);
    let v = csv_rows(&out)[0][1];
    assert!((0.69..=0.75).contains(&v), "visibility {v} at nbar 0.110");
}

#[test]
fn visibility_sweep_pure_low_gain() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(configs().join("device.toml")).unwrap().replace("purity = 0.92", "purity = 1.0");
    let cfg = dir.path().join("pure.toml");
    std::fs::write(&cfg, text).unwrap();
    let out = dir.path().join("s.csv");
    ok(&["visibility-sweep", "--config", path_str(&cfg), "--out", path_str(&out), "--grid", "1", "--nbar-min", "0.001", "--nbar-max", "0.001"]);
    let v = csv_rows(&out)[0][1];
    assert!(v > 0.99, "{v}");
}

#[test]
fn jsa_reports() {
    let v = ok(&["jsa"]);
    let p = v["purity"].as_f64().unwrap();
    assert!((p - 0.92).abs() <= 0.02, "{p}");

    let narrow = ok(&["jsa", "--pump-fwhm-pm", "20"])["purity"].as_f64().unwrap();
    assert!(narrow < p, "{narrow} vs {p}");

    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("rank1.csv");
    let rows: Vec<String> = (0..8)
        .map(|i| (0..8).map(|j| format!("{}", (1.0 + i as f64) * (2.0 - 0.1 * j as f64))).collect::<Vec<_>>().join(","))
        .collect();
    std::fs::write(&m, rows.join("\n") + "\n").unwrap();
    let v = ok(&["jsa", "--input", path_str(&m)]);
    assert!((v["purity"].as_f64().unwrap() - 1.0).abs() < 1e-12);

    let mat = dir.path().join("mag.csv");
    ok(&["jsa", "--grid", "128", "--half-span", "5", "--matrix", path_str(&mat)]);
    let text = std::fs::read_to_string(&mat).unwrap();
    assert_eq!(text.lines().count(), 128);
    assert!(text.lines().all(|l| l.split(',').count() == 128));
}

#[test]
fn malformed_csv_names_column() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.csv");
    std::fs::write(&p, "phi_rad,counts,integration_s\n0.0,12,1\n0.5,abc,1\n").unwrap();
    let r = run(&["fit", "fringe", "--input", path_str(&p)]);
    assert_eq!(r.status.code(), Some(2));
    let err = String::from_utf8_lossy(&r.stderr);
    assert!(err.contains("`counts`") && err.contains("line 3"), "{err}");

    std::fs::write(&p, "p_in_mw,c_s,cc,tau_s\n0.1,1,1,1e-9\n").unwrap();
    let r = run(&["fit", "brightness", "--input", path_str(&p)]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("`c_i`"));
}

#[test]
fn noiseless_fringe_fit() {
    let model = FringeModel::from_config(&device::headline_config().unwrap()).unwrap();
    let phis: Vec<f64> = (0..25).map(|k| 2.0 * PI * k as f64 / 24.0).collect();
    let data = exact_fringe(&model, 242.7964, -0.2383 * PI, &phis, 1.0);
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("fringe.csv");
    write_fringe(&p, &data);
    let v = ok(&["fit", "fringe", "--input", path_str(&p), "--bootstrap", "0"]);
    let c = v["fit"]["c_max"].as_f64().unwrap();
    let off = v["fit"]["phi_off"].as_f64().unwrap();
    assert!((c / 242.7964 - 1.0).abs() < 1e-6, "{c}");
    assert!((off / (-0.2383 * PI) - 1.0).abs() < 1e-6, "{off}");
}

#[test]
fn outputs_are_deterministic() {
    let model = FringeModel::from_config(&device::headline_config().unwrap()).unwrap();
    let phis: Vec<f64> = (0..16).map(|k| 2.0 * PI * k as f64 / 15.0).collect();
    let data = exact_fringe(&model, 200.0, 0.3, &phis, 1.0)
        .into_iter()
        .map(|s| FringeSample { counts: s.counts.round(), ..s })
        .collect::<Vec<_>>();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("fringe.csv");
    write_fringe(&p, &data);
    let args = ["fit", "fringe", "--input", path_str(&p), "--seed", "11", "--bootstrap", "100"];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let other = run(&["fit", "fringe", "--input", path_str(&p), "--seed", "12", "--bootstrap", "100"]);
    assert_ne!(a.stdout, other.stdout);

    let (x, y) = (dir.path().join("x.csv"), dir.path().join("y.csv"));
    let sa = run(&["fringe", "--out", path_str(&x), "--grid", "33"]);
    let sb = run(&["fringe", "--out", path_str(&y), "--grid", "33"]);
    assert_eq!(sa.stdout, sb.stdout);
    assert_eq!(std::fs::read(&x).unwrap(), std::fs::read(&y).unwrap());
}

#[test]
fn synthetic_power_scans_recover_brightness() {
    let dir = tempfile::tempdir().unwrap();
    let powers: Vec<f64> = (1..=10).map(|k| 0.1 * k as f64).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut nbar = Vec::new();
    for src in [device::SOURCE1, device::SOURCE2] {
        let truth = BrightnessParams {
            gamma_eff: src.gamma_eff,
            eta_s: src.eta_s,
            eta_i: src.eta_i,
            beta_s: src.beta_s,
            beta_i: src.beta_i,
            dc_s: device::DARK_COUNTS_PER_S,
            dc_i: device::DARK_COUNTS_PER_S,
        };
        let scan = synthetic_power_scan(&truth, &powers, device::COINCIDENCE_WINDOW_S, 60.0, &mut rng);
        let mut s = String::from("p_in_mw,c_s,c_i,cc,tau_s,integration_s\n");
        for r in &scan {
            s += &[r.p_in_mw, r.c_s, r.c_i, r.cc, r.tau_s, r.integration_s].map(fmt).join(",");
            s.push('\n');
        }
        let p = dir.path().join("scan.csv");
        std::fs::write(&p, s).unwrap();
        let v = ok(&["fit", "brightness", "--input", path_str(&p)]);
        nbar.push(v["nbar"].as_f64().unwrap());
    }
    assert!((nbar[0] / 0.100 - 1.0).abs() <= 0.05, "{nbar:?}");
    assert!((nbar[1] / 0.122 - 1.0).abs() <= 0.05, "{nbar:?}");
}

#[test]
fn compensation_schedule_holds_resonance() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c.csv");
    let cfg = configs().join("crosstalk.toml");
    let v = ok(&["compensate", "--config", path_str(&cfg), "--out", path_str(&out)]);
    assert!((v["max_uncompensated_pm"].as_f64().unwrap() - 43.0).abs() < 1e-9);
    assert!(v["max_residual_pm"].as_f64().unwrap() < 1e-9);
    assert_eq!(v["within_target"], Value::Bool(true));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("mzi_mw,s1_uncompensated_pm,s1_correction_mw,s1_heater_mw,s1_residual_pm,"));
    let rows = csv_rows(&out);
    assert_eq!(rows.len(), 61);
    assert!((rows[30][5] - 21.5).abs() < 1e-9);
}
