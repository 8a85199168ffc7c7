//! Joint spectral amplitude of a ring-resonator pair source and its Schmidt
//! decomposition.
//!
//! Frequencies are GHz detunings from each resonance centre. A resonance
//! contributes the field-enhancement factor `1 / (1 - 2iδ/Γ)` with `Γ` the
//! intensity FWHM, so `|L|²` is a unit-peak Lorentzian.

use nalgebra::DMatrix;
use num_complex::Complex;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fock::SchmidtSpectrum;
use crate::scalar::{norm_sqr, Real};

const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Converts a wavelength width (pm) at `center_nm` to a frequency width (GHz).
pub fn pm_to_ghz<T: Real>(width_pm: T, center_nm: T) -> T {
    T::lit(SPEED_OF_LIGHT * 1e-3) * width_pm / (center_nm * center_nm)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RingResonance<T> {
    pub center_nm: T,
    pub linewidth_pm: T,
}

impl<T: Real> RingResonance<T> {
    pub fn new(center_nm: T, linewidth_pm: T) -> Result<Self> {
        if !(center_nm > T::zero()) || !(linewidth_pm > T::zero()) {
            return Err(Error::Domain("resonance wavelength and linewidth must be positive".into()));
        }
        Ok(Self { center_nm, linewidth_pm })
    }

    pub fn linewidth_ghz(&self) -> T {
        pm_to_ghz(self.linewidth_pm, self.center_nm)
    }

    /// Field enhancement at detuning `delta` (GHz).
    pub fn field(&self, delta: T) -> Complex<T> {
        lorentz(delta, self.linewidth_ghz())
    }
}

fn lorentz<T: Real>(delta: T, fwhm: T) -> Complex<T> {
    Complex::new(T::one(), -T::lit(2.0) * delta / fwhm).inv()
}

/// Transform-limited hyperbolic-secant pump pulse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PumpPulse<T> {
    pub center_nm: T,
    pub fwhm_pm: T,
}

impl<T: Real> PumpPulse<T> {
    pub fn new(center_nm: T, fwhm_pm: T) -> Result<Self> {
        if !(center_nm > T::zero()) || !(fwhm_pm > T::zero()) {
            return Err(Error::Domain("pump wavelength and bandwidth must be positive".into()));
        }
        Ok(Self { center_nm, fwhm_pm })
    }

    pub fn fwhm_ghz(&self) -> T {
        pm_to_ghz(self.fwhm_pm, self.center_nm)
    }

    /// Width `w` of the field profile `sech(δ/w)`, whose intensity FWHM is
    /// [`Self::fwhm_ghz`].
    pub fn field_width(&self) -> T {
        self.fwhm_ghz() / (T::lit(2.0) * T::lit(2.0).sqrt().acosh())
    }

    pub fn field(&self, delta: T) -> T {
        sech(delta / self.field_width())
    }
}

fn sech<T: Real>(x: T) -> T {
    let ax = x.abs();
    if ax > T::lit(80.0) {
        return T::zero();
    }
    T::one() / ax.cosh()
}

/// Sampling of the signal/idler detuning plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec<T> {
    pub points: usize,
    /// Half-span of each axis in units of the wider signal/idler linewidth.
    pub half_span_linewidths: T,
}

impl<T: Real> Default for GridSpec<T> {
    fn default() -> Self {
        Self { points: 512, half_span_linewidths: T::lit(20.0) }
    }
}

/// Sampled joint spectral amplitude. Rows index the signal detuning,
/// columns the idler detuning; both share `axis`.
#[derive(Debug, Clone, PartialEq)]
pub struct JsaGrid<T: Real> {
    axis: Vec<T>,
    amplitude: DMatrix<Complex<T>>,
    filter_ghz: Option<T>,
}

impl<T: Real> JsaGrid<T> {
    /// Wraps an amplitude matrix on a uniform axis and normalizes it.
    pub fn from_matrix(axis: Vec<T>, amplitude: DMatrix<Complex<T>>) -> Result<Self> {
        if amplitude.nrows() != axis.len() || amplitude.ncols() != axis.len() {
            return Err(Error::Domain(format!(
                "amplitude is {}x{} but the axis has {} points",
                amplitude.nrows(),
                amplitude.ncols(),
                axis.len()
            )));
        }
        let mut grid = Self { axis, amplitude, filter_ghz: None };
        grid.normalize()?;
        Ok(grid)
    }

    fn normalize(&mut self) -> Result<()> {
        let norm = self.amplitude.iter().fold(T::zero(), |a, &z| a + norm_sqr(z)).sqrt();
        if !(norm > T::zero()) || !norm.is_finite() {
            return Err(Error::EmptyJsa("amplitude matrix has no support".into()));
        }
        let inv = T::one() / norm;
        self.amplitude.iter_mut().for_each(|z| *z = z.scale(inv));
        Ok(())
    }

    pub fn axis(&self) -> &[T] {
        &self.axis
    }

    pub fn amplitude(&self) -> &DMatrix<Complex<T>> {
        &self.amplitude
    }

    pub fn filter_ghz(&self) -> Option<T> {
        self.filter_ghz
    }

    pub fn magnitude(&self) -> DMatrix<T> {
        self.amplitude.map(|z| norm_sqr(z).sqrt())
    }

    pub fn transpose(&self) -> Self {
        Self {
            axis: self.axis.clone(),
            amplitude: self.amplitude.transpose(),
            filter_ghz: self.filter_ghz,
        }
    }
}

/// Samples `L_s(ω_s) L_i(ω_i) ∫ α(ω) α(ω_s+ω_i-ω) L_p(ω) L_p(ω_s+ω_i-ω) dω`.
///
/// The pump overlap depends only on `ω_s + ω_i`, so it is computed once per
/// distinct sum on the uniform grid and shared along anti-diagonals.
pub fn build_jsa<T: Real>(
    pump: &PumpPulse<T>,
    pump_res: &RingResonance<T>,
    signal_res: &RingResonance<T>,
    idler_res: &RingResonance<T>,
    spec: &GridSpec<T>,
) -> Result<JsaGrid<T>> {
    let gs = signal_res.linewidth_ghz();
    let gi = idler_res.linewidth_ghz();
    let gp = pump_res.linewidth_ghz();
    let n = spec.points;
    if n < 2 {
        return Err(Error::Resolution("grid needs at least two points per axis".into()));
    }
    if !(spec.half_span_linewidths >= T::lit(5.0)) {
        return Err(Error::Resolution("grid must span at least ten linewidths".into()));
    }
    let half = spec.half_span_linewidths * gs.max(gi);
    let step = T::lit(2.0) * half / T::from_count(n - 1);
    if step > gs.min(gi) / T::lit(8.0) {
        return Err(Error::Resolution(format!(
            "grid step {step} GHz leaves fewer than 8 points per linewidth"
        )));
    }
    let axis: Vec<T> = (0..n).map(|i| -half + step * T::from_count(i)).collect();

    // The sech envelope is negligible beyond 40 field widths; for broad
    // pumps the two resonance factors confine the integrand instead.
    let w = pump.field_width();
    let q_half = (T::lit(40.0) * w).min(T::lit(40.0) * gp + T::lit(2.0) * half);
    let q_step_max = w.min(gp) / T::lit(8.0);
    let m = ((T::lit(2.0) * q_half / q_step_max).ceil().to_f64_lossy() as usize + 1).max(1024);
    let q_step = T::lit(2.0) * q_half / T::from_count(m - 1);
    let quad: Vec<(T, Complex<T>)> = (0..m)
        .map(|k| {
            let q = -q_half + q_step * T::from_count(k);
            (q, pump_res.field(q).scale(pump.field(q)))
        })
        .collect();

    let overlap: Vec<Complex<T>> = (0..2 * n - 1)
        .into_par_iter()
        .map(|k| {
            let d = -T::lit(2.0) * half + step * T::from_count(k);
            let mut acc = Complex::new(T::zero(), T::zero());
            for &(q, fq) in &quad {
                let r = d - q;
                let a = pump.field(r);
                if a > T::zero() {
                    acc += fq * pump_res.field(r).scale(a);
                }
            }
            acc.scale(q_step)
        })
        .collect();

    let ls: Vec<Complex<T>> = axis.iter().map(|&x| signal_res.field(x)).collect();
    let li: Vec<Complex<T>> = axis.iter().map(|&x| idler_res.field(x)).collect();
    let amplitude = DMatrix::from_fn(n, n, |i, j| ls[i] * li[j] * overlap[i + j]);
    JsaGrid::from_matrix(axis, amplitude)
}

/// Zeros amplitude outside a rectangular window of full width `width_ghz`
/// centred on each channel, then renormalizes.
pub fn apply_filter<T: Real>(grid: &JsaGrid<T>, width_ghz: T) -> Result<JsaGrid<T>> {
    if !(width_ghz > T::zero()) {
        return Err(Error::Domain("filter width must be positive".into()));
    }
    let edge = width_ghz / T::lit(2.0);
    let inside: Vec<bool> = grid.axis.iter().map(|x| x.abs() <= edge).collect();
    let mut amplitude = grid.amplitude.clone();
    let zero = Complex::new(T::zero(), T::zero());
    for j in 0..amplitude.ncols() {
        for i in 0..amplitude.nrows() {
            if !(inside[i] && inside[j]) {
                amplitude[(i, j)] = zero;
            }
        }
    }
    let mut out = JsaGrid {
        axis: grid.axis.clone(),
        amplitude,
        filter_ghz: Some(grid.filter_ghz.map_or(width_ghz, |w| w.min(width_ghz))),
    };
    out.normalize().map_err(|_| Error::EmptyJsa(format!("a {width_ghz} GHz window excludes all support")))?;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchmidtDecomposition<T> {
    pub purity: T,
    /// Normalized Schmidt weights, largest first.
    pub weights: Vec<T>,
}

impl<T: Real> SchmidtDecomposition<T> {
    /// Weight captured by the leading `k` modes.
    pub fn captured(&self, k: usize) -> T {
        self.weights.iter().take(k).fold(T::zero(), |a, &b| a + b)
    }

    /// Source spectrum with `modes` retained modes and the same purity.
    pub fn spectrum(&self, modes: usize) -> Result<SchmidtSpectrum<T>> {
        SchmidtSpectrum::effective(&self.weights, modes)
    }
}

pub fn schmidt_purity<T: Real>(grid: &JsaGrid<T>) -> Result<SchmidtDecomposition<T>> {
    let sv = grid.amplitude.clone().singular_values();
    let mut weights: Vec<T> = sv.iter().map(|&s| s * s).collect();
    let total = weights.iter().fold(T::zero(), |a, &b| a + b);
    if !(total > T::zero()) {
        return Err(Error::EmptyJsa("amplitude matrix is zero".into()));
    }
    weights.iter_mut().for_each(|w| *w /= total);
    weights.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let purity = weights.iter().fold(T::zero(), |a, &b| a + b * b);
    Ok(SchmidtDecomposition { purity, weights })
}
