//! Acceptance checks for the simulator and calibration pipeline.
//!
//! One line per criterion, explicit pass/fail, exit code 0/1.

use std::f64::consts::{FRAC_PI_4, PI};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ringfringe::calibration::{
    compensation_schedule, exact_fringe, fit_brightness, fit_fringe_with_model, nbar_from_fit,
    synthetic_fringe, synthetic_power_scan, BrightnessParams, CrosstalkModel, FringeFitOptions,
    RingThermal, ShiftCoefficient,
};
use ringfringe::coincidence::{
    analytic_p4f, four_fold_probability, fringe_visibility, visibility_vs_nbar, AnalyticKind,
    ExperimentConfig, FringeModel,
};
use ringfringe::device::{self, SourceChannel};
use ringfringe::fock::{SchmidtSpectrum, TruncationPolicy};
use ringfringe::interferometer::MziModel;
use ringfringe::jsa::{apply_filter, build_jsa, schmidt_purity, GridSpec, JsaGrid};

type Outcome = Result<String, String>;

struct Report {
    failures: usize,
}

impl Report {
    fn run(&mut self, id: u32, name: &str, f: impl FnOnce() -> Outcome) {
        let start = Instant::now();
        let out = f();
        let ms = start.elapsed().as_secs_f64() * 1e3;
        match out {
            Ok(detail) => println!("PASS  {id:>2}  {name}: {detail} ({ms:.0} ms)"),
            Err(detail) => {
                self.failures += 1;
                println!("FAIL  {id:>2}  {name}: {detail} ({ms:.0} ms)");
            }
        }
    }
}

fn require(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn grid(n: usize) -> Vec<f64> {
    (0..n).map(|k| 2.0 * PI * k as f64 / (n - 1) as f64).collect()
}

fn analytic_oracle() -> Outcome {
    let start = Instant::now();
    let phis = grid(100);
    let theta = (0.65_f64).sqrt().acos();
    let cases = [
        (AnalyticKind::IdealInd, FRAC_PI_4, false),
        (AnalyticKind::IdealDist, FRAC_PI_4, true),
        (AnalyticKind::ImperfectInd, theta, false),
        (AnalyticKind::ImperfectDist, theta, true),
    ];
    let mut worst = 0.0_f64;
    for (kind, th, dist) in cases {
        let cfg = ExperimentConfig::single_photons(MziModel::new(th, 0.0), dist);
        for &phi in &phis {
            let p = four_fold_probability(&cfg.with_phi(phi)).map_err(|e| e.to_string())?;
            worst = worst.max((p - analytic_p4f(kind, th, phi)).abs());
        }
    }
    let took = start.elapsed();
    require(
        worst <= 1e-10 && took < Duration::from_secs(1),
        format!("max |engine - closed form| = {worst:.2e} over 4 x 100 phases in {:.3} s", took.as_secs_f64()),
    )
}

fn ideal_visibilities() -> Outcome {
    let v = |dist: bool| -> Result<f64, String> {
        fringe_visibility(&ExperimentConfig::<f64>::single_photons(MziModel::balanced(0.0), dist))
            .map(|s| s.visibility)
            .map_err(|e| e.to_string())
    };
    let (ind, dist) = (v(false)?, v(true)?);
    require(
        (ind - 1.0).abs() <= 1e-9 && (dist - 1.0 / 3.0).abs() <= 1e-9,
        format!("indistinguishable {ind:.12}, distinguishable {dist:.12}"),
    )
}

fn imperfect_coupler() -> Outcome {
    let theta = (0.65_f64).sqrt().acos();
    let cfg = ExperimentConfig::single_photons(MziModel::new(theta, 0.0), false);
    let s = fringe_visibility(&cfg).map_err(|e| e.to_string())?;
    let at_pi = four_fold_probability(&cfg.with_phi(PI)).map_err(|e| e.to_string())?;
    let want = (4.0 * theta).cos().powi(2);
    require(
        (s.max - 1.0).abs() <= 1e-9 && s.min.abs() <= 1e-9 && (at_pi - want).abs() <= 1e-9,
        format!(
            "theta {theta:.5}: max {:.12}, min {:.2e}, P(pi) {at_pi:.10} vs cos^2(4 theta) {want:.10}",
            s.max, s.min
        ),
    )
}

fn headline_visibility() -> Outcome {
    let start = Instant::now();
    let cfg = device::headline_config::<f64>().map_err(|e| e.to_string())?;
    let v = fringe_visibility(&cfg).map_err(|e| e.to_string())?.visibility;
    let took = start.elapsed();
    require(
        (0.69..=0.75).contains(&v) && took < Duration::from_secs(60),
        format!("model visibility {v:.4} (target [0.69, 0.75]) in {:.2} s", took.as_secs_f64()),
    )
}

fn low_gain_limit() -> Outcome {
    let mut cfg = device::headline_config::<f64>().map_err(|e| e.to_string())?;
    let schmidt = SchmidtSpectrum::from_purity(device::PURITY, device::SCHMIDT_MODES).map_err(|e| e.to_string())?;
    cfg = ExperimentConfig::squeezed(schmidt, 1e-3, cfg.mzi, cfg.detectors, cfg.trunc).map_err(|e| e.to_string())?;
    let v = fringe_visibility(&cfg).map_err(|e| e.to_string())?.visibility;
    require((v - 0.92).abs() <= 0.005, format!("visibility {v:.5} at nbar = 1e-3"))
}

fn monotonicity() -> Outcome {
    let det = device::detectors::<f64>().map_err(|e| e.to_string())?;
    let trunc = TruncationPolicy::default();
    let schmidt = SchmidtSpectrum::from_purity(device::PURITY, 2).map_err(|e| e.to_string())?;
    let nbars: Vec<f64> = (0..20).map(|k| 1e-3 + (0.2 - 1e-3) * k as f64 / 19.0).collect();
    let curve = visibility_vs_nbar(&schmidt, device::THETA, &det, &trunc, &nbars).map_err(|e| e.to_string())?;
    let by_nbar = curve.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-12);
    let mut by_purity = true;
    for nbar in [1e-3, 0.05, 0.11, 0.2] {
        let mut last = -1.0;
        for k in 0..=10 {
            let purity = 0.5 + 0.05 * k as f64;
            let s = SchmidtSpectrum::from_purity(purity, 2).map_err(|e| e.to_string())?;
            let v = visibility_vs_nbar(&s, device::THETA, &det, &trunc, &[nbar]).map_err(|e| e.to_string())?[0].1;
            by_purity &= v >= last - 1e-12;
            last = v;
        }
    }
    require(
        by_nbar && by_purity,
        format!(
            "V(nbar) from {:.4} to {:.4} over 20 points non-increasing: {by_nbar}; V non-decreasing in purity: {by_purity}",
            curve[0].1,
            curve[19].1
        ),
    )
}

fn jsa_purity() -> Outcome {
    let (p, s, i) = device::resonances::<f64>().map_err(|e| e.to_string())?;
    let pump = device::pump::<f64>().map_err(|e| e.to_string())?;
    let grid = build_jsa(&pump, &p, &s, &i, &GridSpec::default()).map_err(|e| e.to_string())?;
    let filtered = apply_filter(&grid, device::DWDM_WIDTH_GHZ).map_err(|e| e.to_string())?;
    let d = schmidt_purity(&filtered).map_err(|e| e.to_string())?;

    let n = 32;
    let vec = |k: usize| -> Vec<Complex<f64>> {
        (0..n).map(|j| Complex::from_polar(1.0 / (n as f64).sqrt(), 2.0 * PI * (j * k) as f64 / n as f64)).collect()
    };
    let (u1, u2, v1, v2) = (vec(1), vec(3), vec(2), vec(5));
    let a = DMatrix::from_fn(n, n, |r, c| u1[r] * v1[c] * 0.8_f64.sqrt() + u2[r] * v2[c] * 0.2_f64.sqrt());
    let rank2 = JsaGrid::from_matrix((0..n).map(|k| k as f64).collect(), a).map_err(|e| e.to_string())?;
    let r2 = schmidt_purity(&rank2).map_err(|e| e.to_string())?.purity;

    let two = d.captured(2);
    require(
        (d.purity - 0.92).abs() <= 0.02 && (r2 - 0.68).abs() <= 1e-10 && two >= 0.99,
        format!("device purity {:.4}, two-mode weight {two:.4}, rank-2 purity {r2:.12}", d.purity),
    )
}

fn table_params(src: &SourceChannel) -> BrightnessParams {
    BrightnessParams {
        gamma_eff: src.gamma_eff,
        eta_s: src.eta_s,
        eta_i: src.eta_i,
        beta_s: src.beta_s,
        beta_i: src.beta_i,
        dc_s: device::DARK_COUNTS_PER_S,
        dc_i: device::DARK_COUNTS_PER_S,
    }
}

fn brightness_fit() -> Outcome {
    let powers: Vec<f64> = (1..=10).map(|k| 0.1 * k as f64).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(20180101);
    let mut nbar = Vec::new();
    for src in [device::SOURCE1, device::SOURCE2] {
        let data = synthetic_power_scan(&table_params(&src), &powers, device::COINCIDENCE_WINDOW_S, 60.0, &mut rng);
        let fit = fit_brightness(&data, None).map_err(|e| e.to_string())?;
        nbar.push(nbar_from_fit(&fit.params, 1.0, device::REP_RATE_HZ).map_err(|e| e.to_string())?);
    }
    let geo = (nbar[0] * nbar[1]).sqrt();
    let ok = (nbar[0] / 0.100 - 1.0).abs() <= 0.05
        && (nbar[1] / 0.122 - 1.0).abs() <= 0.05
        && (geo / 0.110 - 1.0).abs() <= 0.05;
    require(ok, format!("nbar1 {:.4}, nbar2 {:.4}, geometric mean {geo:.4}", nbar[0], nbar[1]))
}

fn fringe_fit() -> Outcome {
    let c_max = 242.7964;
    let phi_off = -0.2383 * PI;
    let cfg = device::headline_config::<f64>().map_err(|e| e.to_string())?;
    let model = FringeModel::from_config(&cfg).map_err(|e| e.to_string())?;
    let phis = grid(25);
    let clean = exact_fringe(&model, c_max, phi_off, &phis, 1.0);
    let opts = FringeFitOptions { bootstrap: 0, ..Default::default() };
    let fit = fit_fringe_with_model(&clean, &model, &opts).map_err(|e| e.to_string())?;
    let err_c = (fit.c_max / c_max - 1.0).abs();
    let err_phi = (fit.phi_off / phi_off - 1.0).abs();

    let truth = model.visibility().map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(424242);
    let trials = 100;
    let mut covered = 0;
    for t in 0..trials {
        let data = synthetic_fringe(&model, c_max, phi_off, &phis, 1.0, &mut rng);
        let opts = FringeFitOptions { bootstrap: 200, seed: t, ..Default::default() };
        let f = fit_fringe_with_model(&data, &model, &opts).map_err(|e| e.to_string())?;
        if f.visibility_ci95.0 <= truth && truth <= f.visibility_ci95.1 {
            covered += 1;
        }
    }
    let coverage = covered as f64 / trials as f64;
    require(
        err_c <= 1e-6 && err_phi <= 1e-6 && coverage >= 0.9,
        format!(
            "C_max rel err {err_c:.1e}, phi_off rel err {err_phi:.1e}; 95% intervals cover V = {truth:.4} in {covered}/{trials} trials"
        ),
    )
}

fn compensation() -> Outcome {
    let k = ShiftCoefficient::fit(&[(device::CROSSTALK_HEATER_MW, device::CROSSTALK_SHIFT_PM)], false)
        .map_err(|e| e.to_string())?;
    let at_30 = k.shift(30.0);
    let model = CrosstalkModel {
        rings: vec![RingThermal {
            name: "S2".into(),
            quiescent_nm: device::PUMP_NM,
            quiescent_heater_mw: 20.0,
            mzi: k,
            rings: vec![ShiftCoefficient::linear(10.0)],
        }],
    };
    let powers: Vec<f64> = (0..=120).map(|i| 0.5 * i as f64).collect();
    let s = compensation_schedule(&model, &powers).map_err(|e| e.to_string())?;
    require(
        (at_30 - 21.5).abs() <= 1e-9 && s.max_residual_pm <= 1e-9 && !s.saturated,
        format!(
            "shift at 30 mW {at_30:.6} pm; max compensated drift {:.1e} pm over 0-60 mW (target {} pm)",
            s.max_residual_pm,
            device::DRIFT_TARGET_PM
        ),
    )
}

fn main() -> ExitCode {
    let mut r = Report { failures: 0 };
    r.run(1, "analytic-vs-engine oracle", analytic_oracle);
    r.run(2, "ideal visibilities", ideal_visibilities);
    r.run(3, "imperfect-coupler extrema", imperfect_coupler);
    r.run(4, "headline visibility", headline_visibility);
    r.run(5, "zero-gain purity limit", low_gain_limit);
    r.run(6, "monotonicity", monotonicity);
    r.run(7, "JSA purity", jsa_purity);
    r.run(8, "brightness fit", brightness_fit);
    r.run(9, "fringe fit", fringe_fit);
    r.run(10, "thermal compensation", compensation);
    println!("{} of 10 criteria passed", 10 - r.failures);
    if r.failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
