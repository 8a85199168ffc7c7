//! Simulation and calibration toolkit for four-fold heralded two-photon
//! interference between twin micro-ring photon-pair sources.
//!
//! The numerical core is generic over the scalar type (`f32` or `f64`);
//! the aliases below fix it to `f64` (or `f32` with a `32` suffix).

pub mod calibration;
pub mod coincidence;
pub mod device;
pub mod error;
pub mod fock;
pub mod interferometer;
pub mod jsa;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Spectrum = fock::SchmidtSpectrum<f64>;
pub type Spectrum32 = fock::SchmidtSpectrum<f32>;
pub type Source = fock::SourceModel<f64>;
pub type Source32 = fock::SourceModel<f32>;
pub type Mzi = interferometer::MziModel<f64>;
pub type Mzi32 = interferometer::MziModel<f32>;
pub type Detector = coincidence::DetectorModel<f64>;
pub type Detector32 = coincidence::DetectorModel<f32>;
pub type Experiment = coincidence::ExperimentConfig<f64>;
pub type Experiment32 = coincidence::ExperimentConfig<f32>;
pub type Jsa = jsa::JsaGrid<f64>;
pub type Jsa32 = jsa::JsaGrid<f32>;
