//! Thermal crosstalk between on-chip heaters and ring resonances.
//!
//! Every (ring, heater) pair gets a shift polynomial `k₁ΔP + k₂ΔP²` in the
//! heater power change `ΔP` (mW) from its quiescent setting, with shifts in
//! pm. Shifts from different heaters add. Compensation holds each ring at its
//! quiescent resonance by lowering its own heater as the MZI heater warms up.

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ShiftCoefficient {
    /// pm/mW
    pub linear: f64,
    /// pm/mW²
    #[serde(default)]
    pub quadratic: f64,
}

impl ShiftCoefficient {
    pub fn linear(pm_per_mw: f64) -> Self {
        Self { linear: pm_per_mw, quadratic: 0.0 }
    }

    pub fn shift(&self, delta_mw: f64) -> f64 {
        delta_mw * (self.linear + self.quadratic * delta_mw)
    }

    pub fn slope(&self, delta_mw: f64) -> f64 {
        self.linear + 2.0 * self.quadratic * delta_mw
    }

    /// Least-squares fit through the origin to `(ΔP mW, shift pm)` points.
    pub fn fit(scan: &[(f64, f64)], quadratic: bool) -> Result<Self> {
        let needed = if quadratic { 2 } else { 1 };
        let mut distinct: Vec<f64> = scan.iter().map(|s| s.0).filter(|&p| p != 0.0).collect();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup();
        if distinct.len() < needed {
            return Err(Error::Unidentifiable(format!(
                "crosstalk fit needs {needed} distinct non-zero heater powers"
            )));
        }
        if !quadratic {
            let num: f64 = scan.iter().map(|(p, s)| p * s).sum();
            let den: f64 = scan.iter().map(|(p, _)| p * p).sum();
            return Ok(Self::linear(num / den));
        }
        let mut m = Matrix2::zeros();
        let mut v = Vector2::zeros();
        for &(p, s) in scan {
            let row = Vector2::new(p, p * p);
            m += row * row.transpose();
            v += row * s;
        }
        let sol = m
            .try_inverse()
            .ok_or_else(|| Error::Unidentifiable("singular crosstalk design".into()))?
            * v;
        Ok(Self { linear: sol[0], quadratic: sol[1] })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RingThermal {
    pub name: String,
    pub quiescent_nm: f64,
    /// Own-heater power at the quiescent operating point.
    pub quiescent_heater_mw: f64,
    /// Response to the MZI heater.
    pub mzi: ShiftCoefficient,
    /// Response to each ring heater, indexed like the model's rings. The
    /// diagonal entry is the ring's own tuning coefficient.
    pub rings: Vec<ShiftCoefficient>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrosstalkModel {
    pub rings: Vec<RingThermal>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompensationStep {
    pub mzi_mw: f64,
    /// Per-ring shift with no compensation (pm).
    pub uncompensated_pm: Vec<f64>,
    /// Per-ring heater power changes (mW, negative = reduce).
    pub corrections_mw: Vec<f64>,
    pub heater_mw: Vec<f64>,
    /// Predicted shift after compensation (pm).
    pub residual_pm: Vec<f64>,
    /// Some ring would need negative heater power; it is clamped at zero.
    pub saturated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompensationSchedule {
    pub steps: Vec<CompensationStep>,
    pub max_residual_pm: f64,
    pub saturated: bool,
}

impl CrosstalkModel {
    pub fn validate(&self) -> Result<()> {
        let n = self.rings.len();
        for r in &self.rings {
            if r.rings.len() != n {
                return Err(Error::Config(format!(
                    "ring {} has {} heater coefficients, expected {n}",
                    r.name,
                    r.rings.len()
                )));
            }
            if !(r.quiescent_heater_mw >= 0.0) {
                return Err(Error::Config(format!("ring {} has negative heater power", r.name)));
            }
        }
        Ok(())
    }

    /// Shift of every ring for MZI power `mzi_mw` and ring-heater changes.
    pub fn shifts(&self, mzi_mw: f64, corrections: &[f64]) -> Vec<f64> {
        self.rings
            .iter()
            .map(|r| {
                r.mzi.shift(mzi_mw)
                    + r.rings.iter().zip(corrections).map(|(c, &d)| c.shift(d)).sum::<f64>()
            })
            .collect()
    }

    /// Resonance wavelengths (nm) at the given operating point.
    pub fn resonances_nm(&self, mzi_mw: f64, corrections: &[f64]) -> Vec<f64> {
        self.shifts(mzi_mw, corrections)
            .iter()
            .zip(&self.rings)
            .map(|(s, r)| r.quiescent_nm + s * 1e-3)
            .collect()
    }
}

pub fn compensation_schedule(model: &CrosstalkModel, mzi_powers: &[f64]) -> Result<CompensationSchedule> {
    model.validate()?;
    if mzi_powers.iter().any(|p| !(*p >= 0.0)) {
        return Err(Error::Domain("MZI heater powers must be non-negative".into()));
    }
    let steps = mzi_powers.iter().map(|&p| compensate(model, p)).collect::<Result<Vec<_>>>()?;
    let max_residual_pm =
        steps.iter().flat_map(|s| s.residual_pm.iter()).fold(0.0_f64, |a, r| a.max(r.abs()));
    let saturated = steps.iter().any(|s| s.saturated);
    Ok(CompensationSchedule { steps, max_residual_pm, saturated })
}

/// Newton iteration on the ring-heater changes with rings whose heater
/// would go negative pinned at zero power.
fn compensate(model: &CrosstalkModel, mzi_mw: f64) -> Result<CompensationStep> {
    let n = model.rings.len();
    let floor: Vec<f64> = model.rings.iter().map(|r| -r.quiescent_heater_mw).collect();
    let mut delta = vec![0.0; n];
    let mut pinned = vec![false; n];
    for _ in 0..=n {
        let free: Vec<usize> = (0..n).filter(|&i| !pinned[i]).collect();
        for _ in 0..50 {
            let shift = model.shifts(mzi_mw, &delta);
            if free.is_empty() {
                break;
            }
            let jac = DMatrix::from_fn(n, free.len(), |i, k| model.rings[i].rings[free[k]].slope(delta[free[k]]));
            let rhs = DVector::from_iterator(n, shift.iter().map(|s| -s));
            let step = jac
                .svd(true, true)
                .solve(&rhs, 1e-12)
                .map_err(|e| Error::Degenerate(format!("compensation system: {e}")))?;
            let mut size = 0.0_f64;
            for (k, &i) in free.iter().enumerate() {
                delta[i] += step[k];
                size = size.max(step[k].abs());
            }
            if size <= 1e-13 * (1.0 + mzi_mw) {
                break;
            }
        }
        let mut changed = false;
        for i in 0..n {
            if !pinned[i] && delta[i] < floor[i] {
                pinned[i] = true;
                delta[i] = floor[i];
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let uncompensated_pm = model.shifts(mzi_mw, &vec![0.0; n]);
    let residual_pm = model.shifts(mzi_mw, &delta);
    let heater_mw = model.rings.iter().zip(&delta).map(|(r, d)| r.quiescent_heater_mw + d).collect();
    Ok(CompensationStep {
        mzi_mw,
        uncompensated_pm,
        corrections_mw: delta,
        heater_mw,
        residual_pm,
        saturated: pinned.iter().any(|&p| p),
    })
}
