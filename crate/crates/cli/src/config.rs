//! TOML experiment and crosstalk files.
//!
//! Units live in the key names. Unknown keys are rejected, and errors carry
//! the line they refer to.

use std::path::Path;

use serde::{Deserialize, Serialize};

use ringfringe::calibration::{CrosstalkModel, RingThermal, ShiftCoefficient};
use ringfringe::coincidence::{DetectorModel, Detectors, ExperimentConfig};
use ringfringe::fock::{SchmidtSpectrum, SourceModel, TruncationPolicy, TruncationScope};
use ringfringe::interferometer::MziModel;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmissionKind {
    #[default]
    Squeezed,
    /// Exactly one pair per pulse; useful as the ideal reference.
    SinglePair,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSection {
    #[serde(default)]
    pub emission: EmissionKind,
    /// Mean pairs per pulse. Required for squeezed sources.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nbar: Option<f64>,
    #[serde(default = "one")]
    pub purity: f64,
    #[serde(default = "one_mode")]
    pub schmidt_modes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MziSection {
    /// Directional-coupler angle; π/4 is a balanced coupler.
    pub theta_rad: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorSection {
    pub eta_idler1: f64,
    pub eta_idler2: f64,
    pub eta_signal_c: f64,
    pub eta_signal_d: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScopeKind {
    Joint,
    PerSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruncationSection {
    pub max_pairs: usize,
    pub scope: ScopeKind,
}

impl Default for TruncationSection {
    fn default() -> Self {
        Self { max_pairs: 10, scope: ScopeKind::Joint }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// Phase samples over one period, endpoints included.
    pub phi_points: usize,
    pub nbar_min: f64,
    pub nbar_max: f64,
    pub nbar_points: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self { phi_points: 101, nbar_min: 0.001, nbar_max: 0.2, nbar_points: 20 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentFile {
    pub source1: SourceSection,
    pub source2: SourceSection,
    pub mzi: MziSection,
    pub detectors: DetectorSection,
    #[serde(default)]
    pub truncation: TruncationSection,
    #[serde(default)]
    pub sweep: SweepSection,
}

fn one() -> f64 {
    1.0
}

fn one_mode() -> usize {
    1
}

/// Source text kept next to the parsed value so later checks can point at a line.
#[derive(Debug, Clone)]
pub struct Located<T> {
    pub value: T,
    text: String,
    origin: String,
}

impl<T> Located<T> {
    /// Error for `key` in `[section]`, tagged with its line when present.
    pub fn error(&self, section: &str, key: &str, msg: impl std::fmt::Display) -> CliError {
        match find_key(&self.text, section, key) {
            Some(line) => CliError::Parse(format!("{}: line {line}: [{section}] {key}: {msg}", self.origin)),
            None => CliError::Parse(format!("{}: [{section}] {key}: {msg}", self.origin)),
        }
    }
}

/// 1-based line of `key` inside `[section]` (or the header when the key is absent).
fn find_key(text: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    let mut header = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.split(']').next()) {
            current = name.trim_matches(|c| c == '[' || c == ' ').to_string();
            if current == section {
                header = Some(i + 1);
            }
            continue;
        }
        if current == section {
            if let Some(rest) = line.strip_prefix(key) {
                if rest.trim_start().starts_with('=') {
                    return Some(i + 1);
                }
            }
        }
    }
    header
}

pub fn parse_toml<T: for<'de> Deserialize<'de>>(text: &str, origin: &str) -> CliResult<Located<T>> {
    let value = toml::from_str(text).map_err(|e| CliError::Parse(format!("{origin}: {e}")))?;
    Ok(Located { value, text: text.to_string(), origin: origin.to_string() })
}

pub fn read_toml<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<Located<T>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_toml(&text, &path.display().to_string())
}

impl ExperimentFile {
    /// The measured device: both sources at the headline brightness.
    pub fn device() -> Self {
        use ringfringe::device as d;
        let source = SourceSection {
            emission: EmissionKind::Squeezed,
            nbar: Some(d::NBAR),
            purity: d::PURITY,
            schmidt_modes: d::SCHMIDT_MODES,
        };
        Self {
            source1: source.clone(),
            source2: source,
            mzi: MziSection { theta_rad: d::THETA },
            detectors: DetectorSection {
                eta_idler1: d::SOURCE1.eta_i,
                eta_idler2: d::SOURCE2.eta_i,
                eta_signal_c: d::SOURCE1.eta_s,
                eta_signal_d: d::SOURCE2.eta_s,
            },
            truncation: TruncationSection { max_pairs: d::MAX_PAIRS, scope: ScopeKind::Joint },
            sweep: SweepSection::default(),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("experiment file serializes")
    }
}

impl Located<ExperimentFile> {
    pub fn builtin() -> Self {
        let value = ExperimentFile::device();
        Located { text: value.to_toml(), value, origin: "built-in device".into() }
    }

    /// Build the simulation config. Physical validation failures are
    /// reported against the offending key.
    pub fn experiment(&self) -> CliResult<ExperimentConfig<f64>> {
        let f = &self.value;
        let s1 = self.source("source1", &f.source1, None)?;
        let s2 = self.source("source2", &f.source2, None)?;
        let det = |key: &str, eta: f64| {
            DetectorModel::new(eta).map_err(|e| self.error("detectors", key, e))
        };
        let detectors = Detectors {
            idler1: det("eta_idler1", f.detectors.eta_idler1)?,
            idler2: det("eta_idler2", f.detectors.eta_idler2)?,
            signal_c: det("eta_signal_c", f.detectors.eta_signal_c)?,
            signal_d: det("eta_signal_d", f.detectors.eta_signal_d)?,
        };
        let theta = f.mzi.theta_rad;
        if !theta.is_finite() {
            return Err(self.error("mzi", "theta_rad", "must be finite"));
        }
        let trunc = self.truncation()?;
        Ok(ExperimentConfig {
            s1,
            s2,
            mzi: MziModel::new(theta, 0.0),
            detectors,
            trunc,
            distinguishable: false,
        })
    }

    pub fn truncation(&self) -> CliResult<TruncationPolicy> {
        let t = &self.value.truncation;
        let scope = match t.scope {
            ScopeKind::Joint => TruncationScope::Joint,
            ScopeKind::PerSource => TruncationScope::PerSource,
        };
        TruncationPolicy::new(t.max_pairs, scope).map_err(|e| self.error("truncation", "max_pairs", e))
    }

    /// Source model, optionally with the brightness replaced.
    pub fn source(&self, name: &str, s: &SourceSection, nbar: Option<f64>) -> CliResult<SourceModel<f64>> {
        let schmidt = SchmidtSpectrum::from_purity(s.purity, s.schmidt_modes)
            .map_err(|e| self.error(name, "purity", e))?;
        match s.emission {
            EmissionKind::SinglePair => Ok(SourceModel::single_pair(schmidt)),
            EmissionKind::Squeezed => {
                let nbar = nbar
                    .or(s.nbar)
                    .ok_or_else(|| self.error(name, "nbar", "required for squeezed emission"))?;
                SourceModel::squeezed(schmidt, nbar).map_err(|e| self.error(name, "nbar", e))
            }
        }
    }
}

/// Heater layout for the compensation command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrosstalkFile {
    pub schedule: ScheduleSection,
    pub ring: Vec<RingSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSection {
    pub mzi_max_mw: f64,
    pub mzi_step_mw: f64,
    #[serde(default = "drift_target")]
    pub drift_target_pm: f64,
}

fn drift_target() -> f64 {
    ringfringe::device::DRIFT_TARGET_PM
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RingSection {
    pub name: String,
    pub quiescent_nm: f64,
    pub quiescent_heater_mw: f64,
    pub mzi_pm_per_mw: f64,
    #[serde(default)]
    pub mzi_pm_per_mw2: f64,
    /// Response to each ring heater, in file order.
    pub heater_pm_per_mw: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub heater_pm_per_mw2: Vec<f64>,
}

impl Located<CrosstalkFile> {
    pub fn model(&self) -> CliResult<CrosstalkModel> {
        let n = self.value.ring.len();
        let mut rings = Vec::with_capacity(n);
        for r in &self.value.ring {
            let q = &r.heater_pm_per_mw2;
            if !q.is_empty() && q.len() != r.heater_pm_per_mw.len() {
                return Err(self.error("ring", "heater_pm_per_mw2", format!("ring {}: length mismatch", r.name)));
            }
            rings.push(RingThermal {
                name: r.name.clone(),
                quiescent_nm: r.quiescent_nm,
                quiescent_heater_mw: r.quiescent_heater_mw,
                mzi: ShiftCoefficient { linear: r.mzi_pm_per_mw, quadratic: r.mzi_pm_per_mw2 },
                rings: r
                    .heater_pm_per_mw
                    .iter()
                    .enumerate()
                    .map(|(i, &k)| ShiftCoefficient { linear: k, quadratic: q.get(i).copied().unwrap_or(0.0) })
                    .collect(),
            });
        }
        let model = CrosstalkModel { rings };
        model.validate().map_err(|e| self.error("ring", "heater_pm_per_mw", e))?;
        Ok(model)
    }

    pub fn powers(&self) -> CliResult<Vec<f64>> {
        let s = &self.value.schedule;
        if !(s.mzi_step_mw > 0.0) {
            return Err(self.error("schedule", "mzi_step_mw", "must be positive"));
        }
        if !(s.mzi_max_mw >= 0.0) || !s.mzi_max_mw.is_finite() {
            return Err(self.error("schedule", "mzi_max_mw", "must be finite and non-negative"));
        }
        let steps = (s.mzi_max_mw / s.mzi_step_mw + 1e-9).floor() as usize;
        Ok((0..=steps).map(|i| i as f64 * s.mzi_step_mw).collect())
    }
}
