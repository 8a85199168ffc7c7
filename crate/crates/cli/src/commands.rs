use std::f64::consts::TAU;
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex;
use serde::Serialize;

use ringfringe::calibration::{
    compensation_schedule, fit_brightness, fit_fringe_with_model, nbar_from_fit, BrightnessFit, EtaPriors,
    FringeFit, FringeFitOptions, FringeSample, PowerScanSample,
};
use ringfringe::coincidence::{fringe_sweep, fringe_visibility, ExperimentConfig, FringeModel, FringeSummary};
use ringfringe::device;
use ringfringe::jsa::{apply_filter, build_jsa, schmidt_purity, GridSpec, JsaGrid, PumpPulse};

use crate::config::{read_toml, CrosstalkFile, EmissionKind, ExperimentFile, Located};
use crate::error::{CliError, CliResult};
use crate::table::{fmt, write_bytes, write_csv, Table};
use crate::{
    CompensateArgs, Command, FitBrightnessArgs, FitCommand, FitFringeArgs, FringeArgs, JsaArgs, ModelArgs,
    SweepArgs,
};

pub fn dispatch(cmd: &Command) -> CliResult<()> {
    match cmd {
        Command::Fringe(a) => fringe(a),
        Command::VisibilitySweep(a) => visibility_sweep(a),
        Command::Jsa(a) => jsa(a),
        Command::Fit(FitCommand::Brightness(a)) => fit_brightness_cmd(a),
        Command::Fit(FitCommand::Fringe(a)) => fit_fringe_cmd(a),
        Command::Compensate(a) => compensate(a),
    }
}

fn load(args: &ModelArgs) -> CliResult<Located<ExperimentFile>> {
    let mut file = match &args.config {
        Some(path) => read_toml(path)?,
        None => Located::builtin(),
    };
    if let Some(n) = args.trunc {
        file.value.truncation.max_pairs = n;
    }
    Ok(file)
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

fn emit(path: Option<&Path>, text: &str) -> CliResult<()> {
    match path {
        Some(p) => write_bytes(p, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

#[derive(Serialize)]
struct CurveReport {
    visibility: f64,
    max: f64,
    min: f64,
    phi_max_rad: f64,
    phi_min_rad: f64,
}

impl From<FringeSummary<f64>> for CurveReport {
    fn from(s: FringeSummary<f64>) -> Self {
        Self { visibility: s.visibility, max: s.max, min: s.min, phi_max_rad: s.phi_max, phi_min_rad: s.phi_min }
    }
}

#[derive(Serialize)]
struct FringeReport {
    phi_points: usize,
    indistinguishable: CurveReport,
    distinguishable: CurveReport,
}

fn fringe(a: &FringeArgs) -> CliResult<()> {
    let file = load(&a.model)?;
    let n = a.grid.unwrap_or(file.value.sweep.phi_points);
    if a.grid == Some(0) {
        return Err(CliError::Usage("--grid must be positive".into()));
    }
    if n == 0 {
        return Err(file.error("sweep", "phi_points", "phase grid is empty"));
    }
    let cfg = file.experiment()?;
    let phis = linspace(0.0, TAU, n);
    let ind = fringe_sweep(&cfg, &phis)?;
    let dist_cfg = cfg.with_distinguishable(true);
    let dist = fringe_sweep(&dist_cfg, &phis)?;
    let rows: Vec<Vec<f64>> = ind
        .samples()
        .iter()
        .zip(dist.samples())
        .map(|(&(phi, p), &(_, q))| vec![phi, p, q])
        .collect();
    let header = ["phi_rad", "p4f_indistinguishable", "p4f_distinguishable"].map(String::from);
    write_csv(&a.out, &header, &rows)?;
    let report = FringeReport {
        phi_points: n,
        indistinguishable: fringe_visibility(&cfg)?.into(),
        distinguishable: fringe_visibility(&dist_cfg)?.into(),
    };
    emit(a.summary.as_deref(), &to_json(&report))
}

#[derive(Serialize)]
struct SweepReport {
    points: usize,
    nbar_min: f64,
    nbar_max: f64,
    visibility_at_min: f64,
    visibility_at_max: f64,
}

fn visibility_sweep(a: &SweepArgs) -> CliResult<()> {
    let file = load(&a.model)?;
    let f = &file.value;
    let n = a.grid.unwrap_or(f.sweep.nbar_points);
    if a.grid == Some(0) {
        return Err(CliError::Usage("--grid must be positive".into()));
    }
    if n == 0 {
        return Err(file.error("sweep", "nbar_points", "brightness grid is empty"));
    }
    let lo = a.nbar_min.unwrap_or(f.sweep.nbar_min);
    let hi = a.nbar_max.unwrap_or(f.sweep.nbar_max);
    if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
        return Err(CliError::Usage(format!("brightness range [{lo}, {hi}] must satisfy 0 < min <= max")));
    }
    for (name, s) in [("source1", &f.source1), ("source2", &f.source2)] {
        if s.emission != EmissionKind::Squeezed {
            return Err(file.error(name, "emission", "a brightness sweep needs squeezed sources"));
        }
    }
    let base = file.experiment()?;
    let mut rows = Vec::with_capacity(n);
    for nbar in linspace(lo, hi, n) {
        let cfg = ExperimentConfig {
            s1: file.source("source1", &f.source1, Some(nbar))?,
            s2: file.source("source2", &f.source2, Some(nbar))?,
            ..base.clone()
        };
        rows.push(vec![nbar, fringe_visibility(&cfg)?.visibility]);
    }
    write_csv(&a.out, &["nbar".into(), "visibility".into()], &rows)?;
    let report = SweepReport {
        points: n,
        nbar_min: lo,
        nbar_max: hi,
        visibility_at_min: rows[0][1],
        visibility_at_max: rows[n - 1][1],
    };
    emit(None, &to_json(&report))
}

#[derive(Serialize)]
struct JsaReport {
    points: usize,
    purity: f64,
    schmidt_number: f64,
    two_mode_weight: f64,
    leading_weights: Vec<f64>,
    filter_ghz: Option<f64>,
}

fn read_matrix(path: &Path) -> CliResult<JsaGrid<f64>> {
    let origin = path.display().to_string();
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(file);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Parse(format!("{origin}: line {}: {e}", i + 1)))?;
        let row = rec
            .iter()
            .enumerate()
            .map(|(j, v)| {
                v.parse::<f64>().map_err(|_| {
                    CliError::Parse(format!("{origin}: line {}: column {}: cannot parse `{v}` as a number", i + 1, j + 1))
                })
            })
            .collect::<CliResult<Vec<f64>>>()?;
        rows.push(row);
    }
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(CliError::Parse(format!("{origin}: amplitude matrix must be square and non-empty")));
    }
    let amp = DMatrix::from_fn(n, n, |i, j| Complex::new(rows[i][j], 0.0));
    Ok(JsaGrid::from_matrix((0..n).map(|k| k as f64).collect(), amp)?)
}

fn jsa(a: &JsaArgs) -> CliResult<()> {
    if a.grid < 2 {
        return Err(CliError::Usage("--grid must be at least 2".into()));
    }
    if !(a.filter_ghz >= 0.0) {
        return Err(CliError::Usage("--filter-ghz must be non-negative".into()));
    }
    let grid = match &a.input {
        Some(path) => read_matrix(path)?,
        None => {
            let (p, s, i) = device::resonances::<f64>()?;
            let pump = PumpPulse::new(device::PUMP_NM, a.pump_fwhm_pm)?;
            let spec = GridSpec { points: a.grid, half_span_linewidths: a.half_span };
            let g = build_jsa(&pump, &p, &s, &i, &spec)?;
            if a.filter_ghz > 0.0 {
                apply_filter(&g, a.filter_ghz)?
            } else {
                g
            }
        }
    };
    let d = schmidt_purity(&grid)?;
    if let Some(path) = &a.matrix {
        let mag = grid.magnitude();
        let mut text = String::new();
        for i in 0..mag.nrows() {
            let row: Vec<String> = (0..mag.ncols()).map(|j| fmt(mag[(i, j)])).collect();
            text.push_str(&row.join(","));
            text.push('\n');
        }
        write_bytes(path, text.as_bytes())?;
    }
    let report = JsaReport {
        points: grid.axis().len(),
        purity: d.purity,
        schmidt_number: 1.0 / d.purity,
        two_mode_weight: d.captured(2),
        leading_weights: d.weights.iter().take(10).copied().collect(),
        filter_ghz: grid.filter_ghz(),
    };
    emit(a.out.as_deref(), &to_json(&report))
}

#[derive(Serialize)]
struct BrightnessReport {
    samples: usize,
    fit: BrightnessFit,
    power_mw: f64,
    rep_rate_hz: f64,
    nbar: f64,
}

pub fn read_power_scan(path: &Path, default_integration_s: f64) -> CliResult<Vec<PowerScanSample>> {
    let t = Table::read(path)?;
    t.expect(&["p_in_mw", "c_s", "c_i", "cc", "tau_s"], &["integration_s"])?;
    let col = |n: &str| t.column(n);
    let (p, cs, ci, cc, tau) = (col("p_in_mw")?, col("c_s")?, col("c_i")?, col("cc")?, col("tau_s")?);
    let integ = if t.has("integration_s") { col("integration_s")? } else { vec![default_integration_s; t.len()] };
    let samples: Vec<PowerScanSample> = (0..t.len())
        .map(|k| PowerScanSample {
            p_in_mw: p[k],
            c_s: cs[k],
            c_i: ci[k],
            cc: cc[k],
            tau_s: tau[k],
            integration_s: integ[k],
        })
        .collect();
    for (k, s) in samples.iter().enumerate() {
        s.validate().map_err(|e| CliError::Parse(format!("{}: line {}: {e}", path.display(), k + 2)))?;
    }
    Ok(samples)
}

fn fit_brightness_cmd(a: &FitBrightnessArgs) -> CliResult<()> {
    let samples = read_power_scan(&a.input, a.integration_s)?;
    let priors = match (a.eta_s, a.eta_i) {
        (Some(eta_s), Some(eta_i)) => Some(EtaPriors { eta_s, eta_i }),
        _ => None,
    };
    let fit = fit_brightness(&samples, priors)?;
    let nbar = nbar_from_fit(&fit.params, a.power_mw, a.rep_rate_hz)?;
    let report = BrightnessReport { samples: samples.len(), fit, power_mw: a.power_mw, rep_rate_hz: a.rep_rate_hz, nbar };
    emit(a.out.as_deref(), &to_json(&report))
}

#[derive(Serialize)]
struct FringeFitReport {
    samples: usize,
    seed: u64,
    model_visibility: f64,
    fit: FringeFit,
}

pub fn read_fringe(path: &Path) -> CliResult<Vec<FringeSample>> {
    let t = Table::read(path)?;
    t.expect(&["phi_rad", "counts", "integration_s"], &[])?;
    let (phi, c, ti) = (t.column("phi_rad")?, t.column("counts")?, t.column("integration_s")?);
    Ok((0..t.len()).map(|k| FringeSample { phi_rad: phi[k], counts: c[k], integration_s: ti[k] }).collect())
}

fn fit_fringe_cmd(a: &FitFringeArgs) -> CliResult<()> {
    let data = read_fringe(&a.input)?;
    let cfg = load(&a.model)?.experiment()?;
    let model = FringeModel::from_config(&cfg)?;
    let opts = FringeFitOptions { restarts: a.restarts, bootstrap: a.bootstrap, seed: a.seed };
    let fit = fit_fringe_with_model(&data, &model, &opts)?;
    let report = FringeFitReport { samples: data.len(), seed: a.seed, model_visibility: model.visibility()?, fit };
    emit(a.out.as_deref(), &to_json(&report))
}

#[derive(Serialize)]
struct CompensationReport {
    steps: usize,
    max_uncompensated_pm: f64,
    max_residual_pm: f64,
    drift_target_pm: f64,
    within_target: bool,
    saturated: bool,
}

fn compensate(a: &CompensateArgs) -> CliResult<()> {
    let file: Located<CrosstalkFile> = read_toml(&a.config)?;
    let model = file.model()?;
    let powers = file.powers()?;
    let s = compensation_schedule(&model, &powers)?;
    let mut header = vec!["mzi_mw".to_string()];
    for r in &model.rings {
        for col in ["uncompensated_pm", "correction_mw", "heater_mw", "residual_pm"] {
            header.push(format!("{}_{col}", r.name));
        }
    }
    header.push("saturated".into());
    let rows: Vec<Vec<f64>> = s
        .steps
        .iter()
        .map(|st| {
            let mut row = vec![st.mzi_mw];
            for k in 0..model.rings.len() {
                row.extend([st.uncompensated_pm[k], st.corrections_mw[k], st.heater_mw[k], st.residual_pm[k]]);
            }
            row.push(if st.saturated { 1.0 } else { 0.0 });
            row
        })
        .collect();
    write_csv(&a.out, &header, &rows)?;
    let target = file.value.schedule.drift_target_pm;
    let report = CompensationReport {
        steps: s.steps.len(),
        max_uncompensated_pm: s
            .steps
            .iter()
            .flat_map(|st| st.uncompensated_pm.iter())
            .fold(0.0_f64, |m, v| m.max(v.abs())),
        max_residual_pm: s.max_residual_pm,
        drift_target_pm: target,
        within_target: s.max_residual_pm <= target,
        saturated: s.saturated,
    };
    emit(a.summary.as_deref(), &to_json(&report))
}
