//! Analysis-side numerics: brightness from power scans, fringe fitting and
//! heater crosstalk compensation. These work in `f64` throughout.

mod brightness;
mod crosstalk;
mod fringe_fit;
pub mod lsq;

pub use brightness::{
    exact_power_scan, fit_brightness, model_counts, nbar_from_fit, synthetic_power_scan,
    BrightnessFit, BrightnessParams, EtaPriors, ModelCounts, ParameterInterval, PowerScanSample,
};
pub use crosstalk::{
    compensation_schedule, CompensationSchedule, CompensationStep, CrosstalkModel, RingThermal,
    ShiftCoefficient,
};
pub use fringe_fit::{
    exact_fringe, fit_fringe, fit_fringe_with_model, fringe_counts, synthetic_fringe, wrap_phase,
    FringeFit, FringeFitOptions, FringeSample,
};
