//! Parameters of the fabricated twin-ring device and its measurement setup.
//!
//! Dark-count rate and coincidence window are not given per channel; the
//! values here are representative of the detector system used.

use crate::coincidence::{DetectorModel, Detectors, ExperimentConfig};
use crate::error::Result;
use crate::fock::{SchmidtSpectrum, TruncationPolicy};
use crate::interferometer::MziModel;
use crate::jsa::{PumpPulse, RingResonance};
use crate::scalar::Real;

/// Coupler angle of the 35:65 directional couplers used in the fringe fits.
pub const THETA: f64 = 0.6301;
/// Heralded-photon purity from the JSA simulation.
pub const PURITY: f64 = 0.92;
pub const SCHMIDT_MODES: usize = 2;
/// Geometric-mean brightness of the two sources at 1 mW.
pub const NBAR: f64 = 0.110;
pub const MAX_PAIRS: usize = 10;

pub const REP_RATE_HZ: f64 = 50e6;
pub const COINCIDENCE_WINDOW_S: f64 = 1e-9;
pub const DARK_COUNTS_PER_S: f64 = 150.0;

/// Per-source channel parameters from the brightness calibration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceChannel {
    pub eta_s: f64,
    pub eta_i: f64,
    /// pairs/s/mW²
    pub gamma_eff: f64,
    /// counts/s/mW
    pub beta_s: f64,
    pub beta_i: f64,
    /// Brightness at 1 mW.
    pub nbar_1mw: f64,
}

pub const SOURCE1: SourceChannel = SourceChannel {
    eta_s: 0.0080,
    eta_i: 0.0135,
    gamma_eff: 5.013e6,
    beta_s: 12.9979e3,
    beta_i: 49.9532e3,
    nbar_1mw: 0.100,
};

pub const SOURCE2: SourceChannel = SourceChannel {
    eta_s: 0.0111,
    eta_i: 0.0287,
    gamma_eff: 6.130e6,
    beta_s: 32.2330e3,
    beta_i: 37.3080e3,
    nbar_1mw: 0.122,
};

pub const PUMP_NM: f64 = 1546.12;
pub const SIGNAL_NM: f64 = 1552.52;
pub const IDLER_NM: f64 = 1539.77;
/// Pump resonance linewidth; signal and idler take the two measured values.
pub const PUMP_LINEWIDTH_PM: f64 = 32.0;
pub const SIGNAL_LINEWIDTH_PM: f64 = 33.0;
pub const IDLER_LINEWIDTH_PM: f64 = 31.0;
pub const PUMP_FWHM_PM: f64 = 200.0;
pub const DWDM_WIDTH_GHZ: f64 = 200.0;

/// Source-2 resonance shift caused by the MZI heater at full range.
pub const CROSSTALK_SHIFT_PM: f64 = 43.0;
pub const CROSSTALK_HEATER_MW: f64 = 60.0;
pub const DRIFT_TARGET_PM: f64 = 1.0;

/// Herald detectors see the idler channels; the MZI outputs see the signals.
pub fn detectors<T: Real>() -> Result<Detectors<T>> {
    Ok(Detectors {
        idler1: DetectorModel::new(T::lit(SOURCE1.eta_i))?,
        idler2: DetectorModel::new(T::lit(SOURCE2.eta_i))?,
        signal_c: DetectorModel::new(T::lit(SOURCE1.eta_s))?,
        signal_d: DetectorModel::new(T::lit(SOURCE2.eta_s))?,
    })
}

/// Both sources at the device purity and brightness, coupler angle
/// [`THETA`], ten-pair joint truncation.
pub fn headline_config<T: Real>() -> Result<ExperimentConfig<T>> {
    ExperimentConfig::squeezed(
        SchmidtSpectrum::from_purity(T::lit(PURITY), SCHMIDT_MODES)?,
        T::lit(NBAR),
        MziModel::new(T::lit(THETA), T::zero()),
        detectors()?,
        TruncationPolicy::joint(MAX_PAIRS)?,
    )
}

pub fn pump<T: Real>() -> Result<PumpPulse<T>> {
    PumpPulse::new(T::lit(PUMP_NM), T::lit(PUMP_FWHM_PM))
}

/// `(pump, signal, idler)` resonances of one source ring.
pub fn resonances<T: Real>() -> Result<(RingResonance<T>, RingResonance<T>, RingResonance<T>)> {
    Ok((
        RingResonance::new(T::lit(PUMP_NM), T::lit(PUMP_LINEWIDTH_PM))?,
        RingResonance::new(T::lit(SIGNAL_NM), T::lit(SIGNAL_LINEWIDTH_PM))?,
        RingResonance::new(T::lit(IDLER_NM), T::lit(IDLER_LINEWIDTH_PM))?,
    ))
}
