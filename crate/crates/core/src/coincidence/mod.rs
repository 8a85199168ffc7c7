//! Four-fold coincidence probabilities: two heralding idler clicks plus a
//! click on each interferometer output.

mod analytic;
mod engine;
mod fringe;
mod herald;
mod scattering;

pub use analytic::{analytic_p4f, AnalyticKind};
pub use engine::{four_fold_probability, FourFoldEngine};
pub use fringe::{
    fringe_sweep, fringe_visibility, visibility, visibility_vs_nbar, FringeCurve, FringeLabel,
    FringeModel, FringeSummary,
};
pub use herald::{herald_distribution, HeraldedMixture};
pub use scattering::{output_distribution, ScatteringTable};

use crate::error::{Error, Result};
use crate::fock::{SchmidtSpectrum, SourceModel, TruncationPolicy};
use crate::interferometer::MziModel;
use crate::scalar::Real;

/// Click/no-click detector with lumped efficiency `eta` and no dark counts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorModel<T> {
    eta: T,
}

impl<T: Real> DetectorModel<T> {
    pub fn new(eta: T) -> Result<Self> {
        if !(eta >= T::zero() && eta <= T::one()) {
            return Err(Error::Domain(format!("detector efficiency {eta} outside [0, 1]")));
        }
        Ok(Self { eta })
    }

    pub fn perfect() -> Self {
        Self { eta: T::one() }
    }

    pub fn eta(&self) -> T {
        self.eta
    }

    pub fn click(&self, n: u32) -> T {
        click_probability(n, self)
    }
}

/// `1 - (1 - η)^n`: at least one of `n` photons is registered.
pub fn click_probability<T: Real>(n: u32, det: &DetectorModel<T>) -> T {
    if n == 0 {
        return T::zero();
    }
    T::one() - (T::one() - det.eta).powi(n as i32)
}

/// The four detectors: two heralds and the two interferometer outputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detectors<T> {
    pub idler1: DetectorModel<T>,
    pub idler2: DetectorModel<T>,
    pub signal_c: DetectorModel<T>,
    pub signal_d: DetectorModel<T>,
}

impl<T: Real> Detectors<T> {
    pub fn perfect() -> Self {
        Self::uniform(DetectorModel::perfect())
    }

    pub fn uniform(det: DetectorModel<T>) -> Self {
        Self { idler1: det, idler2: det, signal_c: det, signal_d: det }
    }
}

/// Everything the four-fold engine needs.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig<T> {
    pub s1: SourceModel<T>,
    pub s2: SourceModel<T>,
    pub mzi: MziModel<T>,
    pub detectors: Detectors<T>,
    pub trunc: TruncationPolicy,
    /// Photons from the two sources never overlap (e.g. different time bins).
    pub distinguishable: bool,
}

impl<T: Real> ExperimentConfig<T> {
    /// One pure photon from each source, perfect detectors.
    pub fn single_photons(mzi: MziModel<T>, distinguishable: bool) -> Self {
        let s = SourceModel::single_pair(SchmidtSpectrum::single_mode());
        Self {
            s1: s.clone(),
            s2: s,
            mzi,
            detectors: Detectors::perfect(),
            trunc: TruncationPolicy::default(),
            distinguishable,
        }
    }

    /// Two identical squeezed sources.
    pub fn squeezed(
        schmidt: SchmidtSpectrum<T>,
        nbar: T,
        mzi: MziModel<T>,
        detectors: Detectors<T>,
        trunc: TruncationPolicy,
    ) -> Result<Self> {
        let s = SourceModel::squeezed(schmidt, nbar)?;
        Ok(Self { s1: s.clone(), s2: s, mzi, detectors, trunc, distinguishable: false })
    }

    pub fn with_phi(&self, phi: T) -> Self {
        Self { mzi: self.mzi.with_phi(phi), ..self.clone() }
    }

    pub fn with_distinguishable(&self, distinguishable: bool) -> Self {
        Self { distinguishable, ..self.clone() }
    }
}
