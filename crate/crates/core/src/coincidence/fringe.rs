use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fock::{SchmidtSpectrum, TruncationPolicy};
use crate::interferometer::{fringe_extrema_phase, MziModel};
use crate::scalar::Real;

use super::engine::FourFoldEngine;
use super::{Detectors, ExperimentConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FringeLabel {
    Indistinguishable,
    Distinguishable,
}

/// Four-fold probability (or counts) sampled against MZI phase.
#[derive(Debug, Clone, PartialEq)]
pub struct FringeCurve<T> {
    samples: Vec<(T, T)>,
    label: FringeLabel,
}

impl<T: Real> FringeCurve<T> {
    pub fn new(samples: Vec<(T, T)>, label: FringeLabel) -> Result<Self> {
        check_grid(&samples.iter().map(|s| s.0).collect::<Vec<_>>())?;
        if samples.iter().any(|s| !(s.1 >= T::zero())) {
            return Err(Error::Domain("fringe values must be non-negative".into()));
        }
        Ok(Self { samples, label })
    }

    pub fn samples(&self) -> &[(T, T)] {
        &self.samples
    }

    pub fn label(&self) -> FringeLabel {
        self.label
    }

    pub fn phis(&self) -> impl Iterator<Item = T> + '_ {
        self.samples.iter().map(|s| s.0)
    }

    pub fn values(&self) -> impl Iterator<Item = T> + '_ {
        self.samples.iter().map(|s| s.1)
    }

    /// `(phi, value)` of the largest sample.
    pub fn max(&self) -> (T, T) {
        self.samples.iter().copied().fold(self.samples[0], |b, s| if s.1 > b.1 { s } else { b })
    }

    pub fn min(&self) -> (T, T) {
        self.samples.iter().copied().fold(self.samples[0], |b, s| if s.1 < b.1 { s } else { b })
    }

    /// Visibility of the sampled extrema.
    pub fn visibility(&self) -> Result<T> {
        visibility(self.max().1, self.min().1)
    }
}

fn check_grid<T: Real>(phis: &[T]) -> Result<()> {
    if phis.is_empty() {
        return Err(Error::Domain("phase grid is empty".into()));
    }
    if phis.iter().any(|p| !p.is_finite()) {
        return Err(Error::Domain("phase grid contains non-finite values".into()));
    }
    if phis.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Domain("phase grid must be strictly increasing".into()));
    }
    Ok(())
}

/// `(max - min) / (max + min)`.
pub fn visibility<T: Real>(max: T, min: T) -> Result<T> {
    if max == T::zero() && min == T::zero() {
        return Err(Error::UndefinedVisibility);
    }
    if !(min >= T::zero()) || !(max >= min) {
        return Err(Error::Domain(format!("need max >= min >= 0, got max={max}, min={min}")));
    }
    Ok((max - min) / (max + min))
}

/// Evaluates the four-fold probability on every grid phase. Grid points are
/// independent; results keep the grid order.
pub fn fringe_sweep<T: Real>(cfg: &ExperimentConfig<T>, phis: &[T]) -> Result<FringeCurve<T>> {
    check_grid(phis)?;
    let engine = FourFoldEngine::new(cfg)?;
    let samples: Vec<(T, T)> = phis.par_iter().map(|&phi| (phi, engine.evaluate(phi))).collect();
    let label =
        if cfg.distinguishable { FringeLabel::Distinguishable } else { FringeLabel::Indistinguishable };
    Ok(FringeCurve { samples, label })
}

/// Extrema and visibility of a model fringe over a full period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FringeSummary<T> {
    pub visibility: T,
    pub max: T,
    pub min: T,
    pub phi_max: T,
    pub phi_min: T,
}

/// Phases worth checking for fringe extrema: a uniform grid over `[0, 2π)`
/// plus the exact positions where the MZI is the identity, fully crossed, or
/// effectively balanced. The fringe depends on phase only through the
/// effective splitting ratio, so its extrema lie at these special points or
/// close to the grid.
fn candidate_phases<T: Real>(theta: T, grid: usize) -> Vec<T> {
    let two_pi = T::two_pi();
    let mut phis: Vec<T> =
        (0..grid).map(|i| two_pi * T::from_count(i) / T::from_count(grid)).collect();
    phis.push(T::PI());
    if let Ok(star) = fringe_extrema_phase(theta) {
        phis.push(star);
        phis.push(two_pi - star);
    }
    phis
}

/// Visibility of the model fringe for `cfg` (the phase in `cfg.mzi` is ignored).
pub fn fringe_visibility<T: Real>(cfg: &ExperimentConfig<T>) -> Result<FringeSummary<T>> {
    let engine = FourFoldEngine::new(cfg)?;
    let values: Vec<(T, T)> = candidate_phases(cfg.mzi.theta, 64)
        .into_par_iter()
        .map(|phi| (phi, engine.evaluate(phi)))
        .collect();
    let hi = values.iter().copied().fold(values[0], |b, s| if s.1 > b.1 { s } else { b });
    let lo = values.iter().copied().fold(values[0], |b, s| if s.1 < b.1 { s } else { b });
    Ok(FringeSummary {
        visibility: visibility(hi.1, lo.1)?,
        max: hi.1,
        min: lo.1,
        phi_max: hi.0,
        phi_min: lo.0,
    })
}

/// Model visibility against brightness for two identical sources.
pub fn visibility_vs_nbar<T: Real>(
    schmidt: &SchmidtSpectrum<T>,
    theta: T,
    detectors: &Detectors<T>,
    trunc: &TruncationPolicy,
    nbars: &[T],
) -> Result<Vec<(T, T)>> {
    let ceiling = T::lit(0.3);
    if nbars.iter().any(|&n| !(n >= T::zero() && n <= ceiling)) {
        return Err(Error::Domain("brightness grid must lie within [0, 0.3]".into()));
    }
    nbars
        .par_iter()
        .map(|&nbar| {
            let cfg = ExperimentConfig::squeezed(
                schmidt.clone(),
                nbar,
                MziModel::new(theta, T::zero()),
                *detectors,
                *trunc,
            )?;
            Ok((nbar, fringe_visibility(&cfg)?.visibility))
        })
        .collect()
}

/// Exact Fourier representation of a model fringe.
///
/// Every photon picks up the arm phase at most once, so the four-fold
/// probability is a trigonometric polynomial in `φ` whose degree is bounded
/// by the largest photon number in the enumeration. Sampling it at more
/// than twice that many points pins it down exactly, which makes repeated
/// evaluation during fitting cheap.
#[derive(Debug, Clone)]
pub struct FringeModel<T> {
    cos: Vec<T>,
    sin: Vec<T>,
    offset: T,
    max: (T, T),
    min: (T, T),
}

impl<T: Real> FringeModel<T> {
    pub fn from_config(cfg: &ExperimentConfig<T>) -> Result<Self> {
        let engine = FourFoldEngine::new(cfg)?;
        let degree = engine.max_total().max(1);
        let points = 2 * degree + 3;
        let two_pi = T::two_pi();
        let step = two_pi / T::from_count(points);
        let samples: Vec<T> =
            (0..points).into_par_iter().map(|j| engine.evaluate(step * T::from_count(j))).collect();
        let scale = T::lit(2.0) / T::from_count(points);
        let mut cos = Vec::with_capacity(degree);
        let mut sin = Vec::with_capacity(degree);
        for k in 1..=degree {
            let (mut a, mut b) = (T::zero(), T::zero());
            for (j, &f) in samples.iter().enumerate() {
                let arg = step * T::from_count(j * k % points);
                a += f * arg.cos();
                b += f * arg.sin();
            }
            cos.push(a * scale);
            sin.push(b * scale);
        }
        let offset = samples.iter().fold(T::zero(), |a, &b| a + b) / T::from_count(points);
        let mut model = Self { cos, sin, offset, max: (T::zero(), T::zero()), min: (T::zero(), T::zero()) };
        let (max, min) = model.locate_extrema(cfg.mzi.theta);
        model.max = max;
        model.min = min;
        Ok(model)
    }

    pub fn eval(&self, phi: T) -> T {
        let mut acc = self.offset;
        for (k, (&a, &b)) in self.cos.iter().zip(&self.sin).enumerate() {
            let arg = phi * T::from_count(k + 1);
            acc += a * arg.cos() + b * arg.sin();
        }
        acc
    }

    pub fn derivative(&self, phi: T) -> T {
        let mut acc = T::zero();
        for (k, (&a, &b)) in self.cos.iter().zip(&self.sin).enumerate() {
            let kk = T::from_count(k + 1);
            let arg = phi * kk;
            acc += kk * (b * arg.cos() - a * arg.sin());
        }
        acc
    }

    fn second_derivative(&self, phi: T) -> T {
        let mut acc = T::zero();
        for (k, (&a, &b)) in self.cos.iter().zip(&self.sin).enumerate() {
            let kk = T::from_count(k + 1);
            let arg = phi * kk;
            acc -= kk * kk * (a * arg.cos() + b * arg.sin());
        }
        acc
    }

    /// Normalized fringe `P(φ) / max P`.
    pub fn normalized(&self, phi: T) -> T {
        self.eval(phi) / self.max.1
    }

    pub fn normalized_derivative(&self, phi: T) -> T {
        self.derivative(phi) / self.max.1
    }

    /// `(phi, value)` of the global maximum.
    pub fn max(&self) -> (T, T) {
        self.max
    }

    pub fn min(&self) -> (T, T) {
        self.min
    }

    pub fn visibility(&self) -> Result<T> {
        visibility(self.max.1, self.min.1.max(T::zero()))
    }

    pub fn degree(&self) -> usize {
        self.cos.len()
    }

    fn locate_extrema(&self, theta: T) -> ((T, T), (T, T)) {
        let phis = candidate_phases(theta, 720);
        let mut hi = (phis[0], self.eval(phis[0]));
        let mut lo = hi;
        for &phi in &phis {
            let v = self.eval(phi);
            if v > hi.1 {
                hi = (phi, v);
            }
            if v < lo.1 {
                lo = (phi, v);
            }
        }
        (self.polish(hi), self.polish(lo))
    }

    /// A few Newton steps on `P'(φ) = 0`, kept only if they improve.
    fn polish(&self, start: (T, T)) -> (T, T) {
        let maximize = self.second_derivative(start.0) < T::zero();
        let mut best = start;
        let mut phi = start.0;
        for _ in 0..20 {
            let h = self.second_derivative(phi);
            if h == T::zero() {
                break;
            }
            phi -= self.derivative(phi) / h;
            let v = self.eval(phi);
            let better = if maximize { v > best.1 } else { v < best.1 };
            if better {
                best = (phi, v);
            } else {
                break;
            }
        }
        let two_pi = T::two_pi();
        let mut wrapped = best.0 % two_pi;
        if wrapped < T::zero() {
            wrapped += two_pi;
        }
        (wrapped, best.1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coincidence::{analytic_p4f, four_fold_probability, AnalyticKind, DetectorModel};
    use approx::assert_relative_eq;
    use std::f64::consts::{FRAC_PI_4, PI};

    #[test]
    fn visibility_examples() {
        assert_eq!(visibility(1.0_f64, 0.0).unwrap(), 1.0);
        assert_relative_eq!(visibility(1.0_f64, 0.5).unwrap(), 1.0 / 3.0);
        assert_eq!(visibility(0.7_f64, 0.7).unwrap(), 0.0);
        assert!(matches!(visibility(0.0_f64, 0.0), Err(Error::UndefinedVisibility)));
        assert!(visibility(0.3_f64, 0.5).is_err());
    }

    #[test]
    fn sweep_matches_ideal_formula() {
        let cfg = ExperimentConfig::single_photons(MziModel::balanced(0.0_f64), false);
        let grid: Vec<f64> = (0..9).map(|i| i as f64 * 2.0 * PI / 9.0).collect();
        let curve = fringe_sweep(&cfg, &grid).unwrap();
        assert_eq!(curve.label(), FringeLabel::Indistinguishable);
        for (phi, p) in curve.samples() {
            assert_relative_eq!(*p, analytic_p4f(AnalyticKind::IdealInd, 0.0, *phi), epsilon = 1e-10);
        }
    }

    #[test]
    fn sweep_rejects_bad_grids() {
        let cfg = ExperimentConfig::single_photons(MziModel::balanced(0.0_f64), false);
        assert!(fringe_sweep(&cfg, &[]).is_err());
        assert!(fringe_sweep(&cfg, &[0.0, 0.5, 0.5]).is_err());
        assert!(fringe_sweep(&cfg, &[1.0, 0.5]).is_err());
    }

    #[test]
    fn low_gain_pure_visibility() {
        let cfg = ExperimentConfig::squeezed(
            SchmidtSpectrum::single_mode(),
            1e-3,
            MziModel::new(FRAC_PI_4, 0.0),
            Detectors::uniform(DetectorModel::new(0.02).unwrap()),
            TruncationPolicy::default(),
        )
        .unwrap();
        let v = fringe_visibility(&cfg).unwrap().visibility;
        assert!(v > 0.99, "v = {v}");
    }

    #[test]
    fn fourier_model_is_exact() {
        let cfg = ExperimentConfig::squeezed(
            SchmidtSpectrum::from_purity(0.92, 2).unwrap(),
            0.11,
            MziModel::new(0.6301, 0.0),
            Detectors::uniform(DetectorModel::new(0.05).unwrap()),
            TruncationPolicy::default(),
        )
        .unwrap();
        let model = FringeModel::from_config(&cfg).unwrap();
        assert_eq!(model.degree(), 10);
        for k in 0..37 {
            let phi = -3.0 + k as f64 * 0.271;
            let direct = four_fold_probability(&cfg.with_phi(phi)).unwrap();
            assert_relative_eq!(model.eval(phi), direct, max_relative = 1e-10);
            let h = 1e-5;
            let fd = (model.eval(phi + h) - model.eval(phi - h)) / (2.0 * h);
            assert_relative_eq!(model.derivative(phi), fd, epsilon = 1e-9);
        }
        let summary = fringe_visibility(&cfg).unwrap();
        assert_relative_eq!(model.visibility().unwrap(), summary.visibility, epsilon = 1e-9);
    }

    #[test]
    fn brightness_grid_bounds() {
        let r = visibility_vs_nbar(
            &SchmidtSpectrum::<f64>::single_mode(),
            FRAC_PI_4,
            &Detectors::perfect(),
            &TruncationPolicy::default(),
            &[0.1, 0.4],
        );
        assert!(r.is_err());
    }
}
