//! Pair-generation efficiency from singles and coincidence power scans.
//!
//! For input power `P` (mW):
//!
//! ```text
//! C_s = η_s γ P² + β_s P + DC_s
//! C_i = η_i γ P² + β_i P + DC_i
//! CC  = η_s η_i γ P² + C_s C_i τ
//! ```
//!
//! with `γ` in pairs/s/mW². The three quadratic coefficients determine
//! `γ`, `η_s` and `η_i` separately, so the efficiencies can either be fitted
//! or fixed from an independent loss measurement.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use super::lsq::{covariance, levenberg_marquardt};
use crate::error::{Error, Result};

const Z68: f64 = 0.994_457_883_209_753;
const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerScanSample {
    pub p_in_mw: f64,
    /// Singles and coincidence rates, counts/s.
    pub c_s: f64,
    pub c_i: f64,
    pub cc: f64,
    pub tau_s: f64,
    /// Acquisition time behind each rate, used for the Poisson weights.
    pub integration_s: f64,
}

impl PowerScanSample {
    pub fn validate(&self) -> Result<()> {
        let rates = [self.p_in_mw, self.c_s, self.c_i, self.cc];
        if rates.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::Domain("power and rates must be finite and non-negative".into()));
        }
        if !(self.tau_s > 0.0) || !(self.integration_s > 0.0) {
            return Err(Error::Domain("coincidence window and integration time must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BrightnessParams {
    /// pairs/s/mW²
    pub gamma_eff: f64,
    pub eta_s: f64,
    pub eta_i: f64,
    /// counts/s/mW
    pub beta_s: f64,
    pub beta_i: f64,
    /// counts/s
    pub dc_s: f64,
    pub dc_i: f64,
}

impl BrightnessParams {
    pub const NAMES: [&'static str; 7] =
        ["gamma_eff", "eta_s", "eta_i", "beta_s", "beta_i", "dc_s", "dc_i"];

    #[cfg(test)]
    fn to_vec(self) -> [f64; 7] {
        [self.gamma_eff, self.eta_s, self.eta_i, self.beta_s, self.beta_i, self.dc_s, self.dc_i]
    }

    fn from_slice(v: &[f64]) -> Self {
        Self {
            gamma_eff: v[0],
            eta_s: v[1],
            eta_i: v[2],
            beta_s: v[3],
            beta_i: v[4],
            dc_s: v[5],
            dc_i: v[6],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelCounts {
    pub c_s: f64,
    pub c_i: f64,
    pub cc: f64,
    pub acc: f64,
}

pub fn model_counts(params: &BrightnessParams, p_in_mw: f64, tau_s: f64) -> ModelCounts {
    let p = p_in_mw;
    let pairs = params.gamma_eff * p * p;
    let c_s = params.eta_s * pairs + params.beta_s * p + params.dc_s;
    let c_i = params.eta_i * pairs + params.beta_i * p + params.dc_i;
    let acc = c_s * c_i * tau_s;
    ModelCounts { c_s, c_i, cc: params.eta_s * params.eta_i * pairs + acc, acc }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterInterval {
    pub name: String,
    pub value: f64,
    pub stderr: f64,
    pub ci68: (f64, f64),
    pub ci95: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrightnessFit {
    pub params: BrightnessParams,
    pub intervals: Vec<ParameterInterval>,
    pub chi2: f64,
    pub dof: usize,
    pub reduced_chi2: f64,
}

impl BrightnessFit {
    pub fn interval(&self, name: &str) -> Option<&ParameterInterval> {
        self.intervals.iter().find(|p| p.name == name)
    }
}

/// Known channel efficiencies, which pins `η_s` and `η_i` during the fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EtaPriors {
    pub eta_s: f64,
    pub eta_i: f64,
}

fn sigma(rate: f64, t: f64) -> f64 {
    (rate.max(1.0 / t) / t).sqrt()
}

/// Poisson-weighted least-squares fit of all three count channels.
pub fn fit_brightness(samples: &[PowerScanSample], eta_priors: Option<EtaPriors>) -> Result<BrightnessFit> {
    for s in samples {
        s.validate()?;
    }
    let mut powers: Vec<f64> = samples.iter().map(|s| s.p_in_mw).collect();
    powers.sort_by(f64::total_cmp);
    powers.dedup();
    if powers.len() < 4 {
        return Err(Error::Unidentifiable(format!(
            "need at least 4 distinct input powers, got {}",
            powers.len()
        )));
    }

    let x0 = initial_guess(samples, eta_priors)?;
    let mut free = [true; 7];
    if eta_priors.is_some() {
        free[1] = false;
        free[2] = false;
    }
    let lower: Vec<f64> = (0..7).map(|k| if free[k] { 0.0 } else { x0[k] }).collect();
    let upper: Vec<f64> = (0..7)
        .map(|k| match k {
            1 | 2 if free[k] => 1.0,
            _ if free[k] => f64::INFINITY,
            _ => x0[k],
        })
        .collect();

    let weights: Vec<[f64; 3]> = samples
        .iter()
        .map(|s| {
            let t = s.integration_s;
            [1.0 / sigma(s.c_s, t), 1.0 / sigma(s.c_i, t), 1.0 / sigma(s.cc, t)]
        })
        .collect();
    let eval = |x: &[f64]| residuals(samples, &weights, x, &free);
    let out = levenberg_marquardt(eval, &x0, &lower, &upper, 500);
    if !out.converged {
        return Err(Error::FitFailure { restarts: 0, residual: out.chi2.sqrt() });
    }
    let cov = covariance(&out.jacobian, &free)?;
    let n_free = free.iter().filter(|&&f| f).count();
    let dof = (3 * samples.len()).saturating_sub(n_free);
    let params = BrightnessParams::from_slice(&out.x);
    let intervals = BrightnessParams::NAMES
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let v = out.x[k];
            let se = cov[(k, k)].max(0.0).sqrt();
            ParameterInterval {
                name: (*name).to_string(),
                value: v,
                stderr: se,
                ci68: (v - Z68 * se, v + Z68 * se),
                ci95: (v - Z95 * se, v + Z95 * se),
            }
        })
        .collect();
    Ok(BrightnessFit {
        params,
        intervals,
        chi2: out.chi2,
        dof,
        reduced_chi2: if dof > 0 { out.chi2 / dof as f64 } else { f64::NAN },
    })
}

fn residuals(
    samples: &[PowerScanSample],
    weights: &[[f64; 3]],
    x: &[f64],
    free: &[bool; 7],
) -> (DVector<f64>, DMatrix<f64>) {
    let m = samples.len();
    let mut r = DVector::zeros(3 * m);
    let mut j = DMatrix::zeros(3 * m, 7);
    let p = BrightnessParams::from_slice(x);
    for (row, (s, w)) in samples.iter().zip(weights).enumerate() {
        let pw = s.p_in_mw;
        let q = pw * pw;
        let tau = s.tau_s;
        let m_ = model_counts(&p, pw, tau);
        // d(C_s), d(C_i) with respect to each parameter.
        let ds = [p.eta_s * q, p.gamma_eff * q, 0.0, pw, 0.0, 1.0, 0.0];
        let di = [p.eta_i * q, 0.0, p.gamma_eff * q, 0.0, pw, 0.0, 1.0];
        let dpair = [
            p.eta_s * p.eta_i * q,
            p.eta_i * p.gamma_eff * q,
            p.eta_s * p.gamma_eff * q,
            0.0,
            0.0,
            0.0,
            0.0,
        ];
        r[3 * row] = (m_.c_s - s.c_s) * w[0];
        r[3 * row + 1] = (m_.c_i - s.c_i) * w[1];
        r[3 * row + 2] = (m_.cc - s.cc) * w[2];
        for k in 0..7 {
            if !free[k] {
                continue;
            }
            j[(3 * row, k)] = ds[k] * w[0];
            j[(3 * row + 1, k)] = di[k] * w[1];
            let dacc = tau * (ds[k] * m_.c_i + m_.c_s * di[k]);
            j[(3 * row + 2, k)] = (dpair[k] + dacc) * w[2];
        }
    }
    (r, j)
}

/// Weighted quadratic fits per channel give the starting point.
fn initial_guess(samples: &[PowerScanSample], eta_priors: Option<EtaPriors>) -> Result<[f64; 7]> {
    let quad = |y: &dyn Fn(&PowerScanSample) -> f64, cols: &[usize]| -> Result<Vec<f64>> {
        let m = samples.len();
        let x = DMatrix::from_fn(m, cols.len(), |i, k| {
            let w = 1.0 / sigma(y(&samples[i]), samples[i].integration_s);
            samples[i].p_in_mw.powi(cols[k] as i32) * w
        });
        let b = DVector::from_fn(m, |i, _| {
            y(&samples[i]) / sigma(y(&samples[i]), samples[i].integration_s)
        });
        let svd = x.svd(true, true);
        svd.solve(&b, 1e-14)
            .map(|v| v.iter().copied().collect())
            .map_err(|e| Error::Unidentifiable(e.into()))
    };
    let s = quad(&|s| s.c_s, &[0, 1, 2])?;
    let i = quad(&|s| s.c_i, &[0, 1, 2])?;
    let net_cc = |s: &PowerScanSample| (s.cc - s.c_s * s.c_i * s.tau_s).max(0.0);
    let k = quad(&net_cc, &[2])?[0];
    let (qs, qi) = (s[2].max(f64::MIN_POSITIVE), i[2].max(f64::MIN_POSITIVE));
    let (gamma, eta_s, eta_i) = match eta_priors {
        Some(pr) => (0.5 * (qs / pr.eta_s + qi / pr.eta_i), pr.eta_s, pr.eta_i),
        None if k > 0.0 => (qs * qi / k, (k / qi).min(1.0), (k / qs).min(1.0)),
        None => return Err(Error::Unidentifiable("no coincidences above accidentals".into())),
    };
    Ok([gamma, eta_s, eta_i, s[1].max(0.0), i[1].max(0.0), s[0].max(0.0), i[0].max(0.0)])
}

/// Mean pairs per pulse at input power `p_in_mw` and pulse rate `rep_rate_hz`.
pub fn nbar_from_fit(params: &BrightnessParams, p_in_mw: f64, rep_rate_hz: f64) -> Result<f64> {
    if !(rep_rate_hz > 0.0) {
        return Err(Error::Domain("repetition rate must be positive".into()));
    }
    Ok(params.gamma_eff * p_in_mw * p_in_mw / rep_rate_hz)
}

/// Poisson-sampled power scan from known parameters. Rates are counts per
/// second over `integration_s`.
pub fn synthetic_power_scan<R: Rng + ?Sized>(
    params: &BrightnessParams,
    powers_mw: &[f64],
    tau_s: f64,
    integration_s: f64,
    rng: &mut R,
) -> Vec<PowerScanSample> {
    let mut draw = |rate: f64| -> f64 {
        let mean = rate * integration_s;
        if mean <= 0.0 {
            return 0.0;
        }
        Poisson::new(mean).map(|d| d.sample(rng)).unwrap_or(mean) / integration_s
    };
    powers_mw
        .iter()
        .map(|&p| {
            let m = model_counts(params, p, tau_s);
            PowerScanSample {
                p_in_mw: p,
                c_s: draw(m.c_s),
                c_i: draw(m.c_i),
                cc: draw(m.cc),
                tau_s,
                integration_s,
            }
        })
        .collect()
}

/// Noise-free scan at the model rates.
pub fn exact_power_scan(
    params: &BrightnessParams,
    powers_mw: &[f64],
    tau_s: f64,
    integration_s: f64,
) -> Vec<PowerScanSample> {
    powers_mw
        .iter()
        .map(|&p| {
            let m = model_counts(params, p, tau_s);
            PowerScanSample { p_in_mw: p, c_s: m.c_s, c_i: m.c_i, cc: m.cc, tau_s, integration_s }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::{self, SourceChannel};
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn table(src: &SourceChannel) -> BrightnessParams {
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

    fn powers() -> Vec<f64> {
        (1..=10).map(|k| 0.1 * k as f64).collect()
    }

    #[test]
    fn model_examples() {
        let dark = BrightnessParams {
            gamma_eff: 0.0,
            eta_s: 0.0,
            eta_i: 0.0,
            beta_s: 0.0,
            beta_i: 0.0,
            dc_s: 120.0,
            dc_i: 80.0,
        };
        for p in [0.0, 0.5, 3.0] {
            let m = model_counts(&dark, p, 1e-9);
            assert_eq!((m.c_s, m.c_i), (120.0, 80.0));
        }
        // ACC = C_s C_i τ with C_s = 1e5, C_i = 5e4, τ = 1 ns.
        let flat = BrightnessParams { dc_s: 1e5, dc_i: 5e4, ..dark };
        assert_relative_eq!(model_counts(&flat, 1.0, 1e-9).acc, 5.0, epsilon = 1e-12);

        let p = table(&device::SOURCE1);
        let quad = model_counts(&p, 1.0, 0.0).cc;
        assert_relative_eq!(quad, 0.0080 * 0.0135 * 5.013e6, max_relative = 1e-14);
    }

    #[test]
    fn nbar_examples() {
        let p = table(&device::SOURCE1);
        assert_eq!(nbar_from_fit(&BrightnessParams { gamma_eff: 0.0, ..p }, 3.0, 50e6).unwrap(), 0.0);
        let n1 = nbar_from_fit(&p, 1.0, device::REP_RATE_HZ).unwrap();
        let n2 = nbar_from_fit(&table(&device::SOURCE2), 1.0, device::REP_RATE_HZ).unwrap();
        assert!((n1 - 0.100).abs() < 5e-4);
        assert!((n2 - 0.122).abs() < 1e-3);
        assert!(((n1 * n2).sqrt() - 0.110).abs() < 1e-3);
        assert_relative_eq!(nbar_from_fit(&p, 2.0, 50e6).unwrap(), 4.0 * n1, max_relative = 1e-14);
        assert!(nbar_from_fit(&p, 1.0, 0.0).is_err());
    }

    #[test]
    fn noiseless_recovery() {
        let truth = table(&device::SOURCE2);
        let data = exact_power_scan(&truth, &powers(), 1e-9, 60.0);
        let fit = fit_brightness(&data, None).unwrap();
        let got = fit.params.to_vec();
        for (k, want) in truth.to_vec().iter().enumerate() {
            assert_relative_eq!(got[k], *want, max_relative = 1e-8);
        }
    }

    #[test]
    fn poisson_recovery_with_and_without_noise_terms() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for beta in [true, false] {
            let mut truth = table(&device::SOURCE1);
            if !beta {
                truth.beta_s = 0.0;
                truth.beta_i = 0.0;
            }
            let mut sum = 0.0;
            let trials = 20;
            for _ in 0..trials {
                let data = synthetic_power_scan(&truth, &powers(), 1e-9, 60.0, &mut rng);
                let fit = fit_brightness(&data, None).unwrap();
                sum += fit.params.gamma_eff;
                let n = nbar_from_fit(&fit.params, 1.0, device::REP_RATE_HZ).unwrap();
                assert!((n / 0.1 - 1.0).abs() < 0.05);
            }
            let mean = sum / trials as f64;
            assert!((mean / truth.gamma_eff - 1.0).abs() < 0.01, "bias {}", mean / truth.gamma_eff);
        }
    }

    #[test]
    fn priors_pin_efficiencies() {
        let truth = table(&device::SOURCE1);
        let data = exact_power_scan(&truth, &powers(), 1e-9, 60.0);
        let pr = EtaPriors { eta_s: truth.eta_s, eta_i: truth.eta_i };
        let fit = fit_brightness(&data, Some(pr)).unwrap();
        assert_eq!(fit.params.eta_s, truth.eta_s);
        assert_eq!(fit.interval("eta_i").unwrap().stderr, 0.0);
        assert_relative_eq!(fit.params.gamma_eff, truth.gamma_eff, max_relative = 1e-8);
        assert_eq!(fit.dof, 30 - 5);
    }

    #[test]
    fn too_few_powers() {
        let truth = table(&device::SOURCE1);
        let data = exact_power_scan(&truth, &[1.0, 1.0, 0.5, 0.5, 0.2], 1e-9, 60.0);
        assert!(matches!(fit_brightness(&data, None), Err(Error::Unidentifiable(_))));
        let single = exact_power_scan(&truth, &[1.0; 6], 1e-9, 60.0);
        assert!(matches!(fit_brightness(&single, None), Err(Error::Unidentifiable(_))));
    }
}
