//! Fitting measured four-fold counts against the model fringe.
//!
//! Counts are modelled as `C_max · g(φ + φ_off) · t/t_ref` where `g` is the
//! model fringe normalized to unit peak, `t` the integration time of the
//! sample and `t_ref` the longest integration time in the data set.
//!
//! The two fit parameters fix the visibility of the fitted curve to that of
//! the model, so the reported visibility comes from a separate affine fit
//! `a + b·g(φ + φ_off)` on the fitted phase axis. Its interval is a
//! percentile bootstrap over Poisson replicates of that affine curve.

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::lsq::levenberg_marquardt;
use crate::coincidence::{ExperimentConfig, FringeModel};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FringeSample {
    pub phi_rad: f64,
    pub counts: f64,
    pub integration_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FringeFitOptions {
    /// Random starting phases tried in addition to the best grid point.
    pub restarts: usize,
    pub bootstrap: usize,
    pub seed: u64,
}

impl Default for FringeFitOptions {
    fn default() -> Self {
        Self { restarts: 5, bootstrap: 400, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FringeFit {
    pub c_max: f64,
    pub phi_off: f64,
    pub residual_norm: f64,
    pub chi2: f64,
    pub dof: usize,
    pub reduced_chi2: f64,
    /// Reduced χ² far above what Poisson noise allows.
    pub residual_flag: bool,
    pub visibility: f64,
    pub visibility_ci95: (f64, f64),
    #[serde(skip)]
    pub bootstrap_visibilities: Vec<f64>,
}

/// Wraps a phase into `(-π, π]`.
pub fn wrap_phase(phi: f64) -> f64 {
    let w = (phi + PI).rem_euclid(2.0 * PI) - PI;
    if w <= -PI {
        w + 2.0 * PI
    } else {
        w
    }
}

/// Model counts at applied phase `phi` for a reference-length integration.
pub fn fringe_counts(model: &FringeModel<f64>, c_max: f64, phi_off: f64, phi: f64) -> f64 {
    c_max * model.normalized(phi + phi_off)
}

struct Prepared<'a> {
    model: &'a FringeModel<f64>,
    phi: Vec<f64>,
    y: Vec<f64>,
    /// Integration time relative to the longest one.
    scale: Vec<f64>,
    weight: Vec<f64>,
}

impl Prepared<'_> {
    fn residuals(&self, x: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
        let n = self.phi.len();
        let (c, off) = (x[0], x[1]);
        let mut r = DVector::zeros(n);
        let mut j = DMatrix::zeros(n, 2);
        for k in 0..n {
            let arg = self.phi[k] + off;
            let g = self.model.normalized(arg);
            let dg = self.model.normalized_derivative(arg);
            let w = self.weight[k] * self.scale[k];
            r[k] = (c * g * self.scale[k] - self.y[k]) * self.weight[k];
            j[(k, 0)] = g * w;
            j[(k, 1)] = c * dg * w;
        }
        (r, j)
    }

    /// Best amplitude and χ² at fixed phase offset.
    fn profile(&self, off: f64) -> (f64, f64) {
        let (mut num, mut den) = (0.0, 0.0);
        let basis: Vec<f64> =
            (0..self.phi.len()).map(|k| self.model.normalized(self.phi[k] + off) * self.scale[k]).collect();
        for k in 0..basis.len() {
            let w2 = self.weight[k] * self.weight[k];
            num += w2 * self.y[k] * basis[k];
            den += w2 * basis[k] * basis[k];
        }
        let c = if den > 0.0 { (num / den).max(1e-12) } else { 1.0 };
        let chi2 = (0..basis.len())
            .map(|k| ((c * basis[k] - self.y[k]) * self.weight[k]).powi(2))
            .sum();
        (c, chi2)
    }

    /// Affine fit `y = t/t_ref · (a + b g)` on the fitted phase axis.
    fn affine_visibility(&self, off: f64, g_min: f64) -> f64 {
        let mut m = Matrix2::zeros();
        let mut v = Vector2::zeros();
        for k in 0..self.phi.len() {
            let g = self.model.normalized(self.phi[k] + off);
            let row = Vector2::new(self.scale[k], g * self.scale[k]);
            let w2 = self.weight[k] * self.weight[k];
            m += row * row.transpose() * w2;
            v += row * (self.y[k] * w2);
        }
        let Some(sol) = m.try_inverse().map(|inv| inv * v) else {
            return 0.0;
        };
        let (a, b) = (sol[0], sol[1]);
        let top = a + b;
        let bottom = a + b * g_min;
        let (hi, lo) = (top.max(bottom), top.min(bottom).max(0.0));
        if !(hi > 0.0) || b <= 0.0 {
            return 0.0;
        }
        ((hi - lo) / (hi + lo)).clamp(0.0, 1.0)
    }
}

fn prepare<'a>(data: &[FringeSample], model: &'a FringeModel<f64>) -> Result<Prepared<'a>> {
    if data.len() < 8 {
        return Err(Error::Domain(format!("need at least 8 phase samples, got {}", data.len())));
    }
    for s in data {
        if !s.phi_rad.is_finite() || !(s.counts >= 0.0) || !(s.integration_s > 0.0) {
            return Err(Error::Domain(
                "fringe samples need finite phase, non-negative counts and positive integration time".into(),
            ));
        }
    }
    let lo = data.iter().map(|s| s.phi_rad).fold(f64::INFINITY, f64::min);
    let hi = data.iter().map(|s| s.phi_rad).fold(f64::NEG_INFINITY, f64::max);
    // A uniform grid over one period without its closing point still counts.
    let needed = 2.0 * PI * (1.0 - 1.0 / data.len() as f64) - 1e-9;
    if hi - lo < needed {
        return Err(Error::Domain(format!("phase samples span {:.4} rad, less than a period", hi - lo)));
    }
    let t_ref = data.iter().map(|s| s.integration_s).fold(0.0, f64::max);
    Ok(Prepared {
        model,
        phi: data.iter().map(|s| s.phi_rad).collect(),
        y: data.iter().map(|s| s.counts).collect(),
        scale: data.iter().map(|s| s.integration_s / t_ref).collect(),
        weight: data.iter().map(|s| 1.0 / s.counts.max(1.0).sqrt()).collect(),
    })
}

/// Least-squares phase and amplitude, without the visibility analysis.
fn fit_core(p: &Prepared<'_>, starts: &[f64]) -> Result<(f64, f64, f64)> {
    let mut best: Option<(f64, f64, f64)> = None;
    let mut worst_residual = 0.0_f64;
    for &off in starts {
        let (c0, _) = p.profile(off);
        let out = levenberg_marquardt(
            |x: &[f64]| p.residuals(x),
            &[c0, off],
            &[1e-12, f64::NEG_INFINITY],
            &[f64::INFINITY, f64::INFINITY],
            300,
        );
        worst_residual = worst_residual.max(out.chi2.sqrt());
        if !out.converged {
            continue;
        }
        if best.is_none_or(|b| out.chi2 < b.2) {
            best = Some((out.x[0], wrap_phase(out.x[1]), out.chi2));
        }
    }
    best.ok_or(Error::FitFailure { restarts: starts.len(), residual: worst_residual })
}

pub fn fit_fringe(
    data: &[FringeSample],
    cfg: &ExperimentConfig<f64>,
    opts: &FringeFitOptions,
) -> Result<FringeFit> {
    let model = FringeModel::from_config(cfg)?;
    fit_fringe_with_model(data, &model, opts)
}

/// As [`fit_fringe`] with a prepared model, for repeated fits against the
/// same configuration.
pub fn fit_fringe_with_model(
    data: &[FringeSample],
    model: &FringeModel<f64>,
    opts: &FringeFitOptions,
) -> Result<FringeFit> {
    let p = prepare(data, model)?;
    let grid = 90;
    let coarse = (0..grid)
        .map(|k| -PI + 2.0 * PI * (k + 1) as f64 / grid as f64)
        .map(|off| (off, p.profile(off).1))
        .fold((0.0, f64::INFINITY), |b, s| if s.1 < b.1 { s } else { b });
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut starts = vec![coarse.0];
    starts.extend((0..opts.restarts).map(|_| rng.random_range(-PI..PI)));
    let (c_max, phi_off, chi2) = fit_core(&p, &starts)?;

    let g_min = (model.min().1 / model.max().1).max(0.0);
    let visibility = p.affine_visibility(phi_off, g_min);
    let boot = bootstrap(&p, phi_off, g_min, c_max, opts);
    let ci = if boot.is_empty() {
        (visibility, visibility)
    } else {
        (percentile(&boot, 0.025), percentile(&boot, 0.975))
    };
    let dof = data.len() - 2;
    let reduced = chi2 / dof as f64;
    Ok(FringeFit {
        c_max,
        phi_off,
        residual_norm: chi2.sqrt(),
        chi2,
        dof,
        reduced_chi2: reduced,
        residual_flag: reduced > 1.0 + 5.0 * (2.0 / dof as f64).sqrt(),
        visibility,
        visibility_ci95: ci,
        bootstrap_visibilities: boot,
    })
}

fn bootstrap(p: &Prepared<'_>, phi_off: f64, g_min: f64, c_max: f64, opts: &FringeFitOptions) -> Vec<f64> {
    // Affine curve that generated the point estimate.
    let mut m = Matrix2::zeros();
    let mut v = Vector2::zeros();
    for k in 0..p.phi.len() {
        let g = p.model.normalized(p.phi[k] + phi_off);
        let row = Vector2::new(p.scale[k], g * p.scale[k]);
        let w2 = p.weight[k] * p.weight[k];
        m += row * row.transpose() * w2;
        v += row * (p.y[k] * w2);
    }
    let (a, b) = m.try_inverse().map(|inv| inv * v).map(|s| (s[0], s[1])).unwrap_or((0.0, c_max));
    let means: Vec<f64> = (0..p.phi.len())
        .map(|k| ((a + b * p.model.normalized(p.phi[k] + phi_off)) * p.scale[k]).max(0.0))
        .collect();
    let mut out: Vec<f64> = (0..opts.bootstrap)
        .into_par_iter()
        .filter_map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x9e37_79b9_7f4a_7c15_u64.wrapping_mul(r as u64 + 1));
            let y: Vec<f64> = means
                .iter()
                .map(|&mu| if mu > 0.0 { Poisson::new(mu).map(|d| d.sample(&mut rng)).unwrap_or(mu) } else { 0.0 })
                .collect();
            let rep = Prepared {
                model: p.model,
                phi: p.phi.clone(),
                weight: y.iter().map(|c| 1.0 / c.max(1.0).sqrt()).collect(),
                y,
                scale: p.scale.clone(),
            };
            let (_, off, _) = fit_core(&rep, &[phi_off]).ok()?;
            Some(rep.affine_visibility(off, g_min))
        })
        .collect();
    out.sort_by(f64::total_cmp);
    out
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Exact model counts on `phis`, all with the same integration time.
pub fn exact_fringe(
    model: &FringeModel<f64>,
    c_max: f64,
    phi_off: f64,
    phis: &[f64],
    integration_s: f64,
) -> Vec<FringeSample> {
    phis.iter()
        .map(|&phi| FringeSample { phi_rad: phi, counts: fringe_counts(model, c_max, phi_off, phi), integration_s })
        .collect()
}

pub fn synthetic_fringe<R: Rng + ?Sized>(
    model: &FringeModel<f64>,
    c_max: f64,
    phi_off: f64,
    phis: &[f64],
    integration_s: f64,
    rng: &mut R,
) -> Vec<FringeSample> {
    exact_fringe(model, c_max, phi_off, phis, integration_s)
        .into_iter()
        .map(|mut s| {
            if s.counts > 0.0 {
                s.counts = Poisson::new(s.counts).map(|d| d.sample(rng)).unwrap_or(s.counts);
            }
            s
        })
        .collect()
}
