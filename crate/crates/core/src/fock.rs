//! Twin-beam pair sources in the photon-number basis.
//!
//! Each source emits into `K` Schmidt modes. In mode `k` the pair number is
//! geometrically distributed, `p(n) = (1 - x_k) x_k^n`, and the signal and
//! idler photon numbers are identical. Two sources are combined by
//! enumerating every occupation assignment up to a truncation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Normalized Schmidt weights `λ_k`, sorted descending.
#[derive(Debug, Clone, PartialEq)]
pub struct SchmidtSpectrum<T> {
    lambdas: Vec<T>,
}

impl<T: Real> SchmidtSpectrum<T> {
    /// Validates an explicit set of Schmidt weights. Weights must be
    /// non-negative and sum to one; they are stored sorted descending.
    pub fn new(mut lambdas: Vec<T>) -> Result<Self> {
        if lambdas.is_empty() {
            return Err(Error::Domain("Schmidt spectrum needs at least one mode".into()));
        }
        if lambdas.iter().any(|&l| !(l >= T::zero()) || !l.is_finite()) {
            return Err(Error::Domain("Schmidt weights must be finite and non-negative".into()));
        }
        let sum = lambdas.iter().fold(T::zero(), |a, &b| a + b);
        if (sum - T::one()).abs() > T::exact_tol() {
            return Err(Error::Domain(format!("Schmidt weights sum to {sum}, expected 1")));
        }
        lambdas.sort_by(|a, b| b.partial_cmp(a).expect("finite weights"));
        Ok(Self { lambdas })
    }

    /// Renormalizes arbitrary non-negative weights before validating them.
    pub fn from_weights(weights: &[T]) -> Result<Self> {
        let sum = weights.iter().fold(T::zero(), |a, &b| a + b);
        if !(sum > T::zero()) {
            return Err(Error::Domain("Schmidt weights sum to zero".into()));
        }
        Self::new(weights.iter().map(|&w| w / sum).collect())
    }

    pub fn single_mode() -> Self {
        Self { lambdas: vec![T::one()] }
    }

    /// Two-or-more-mode spectrum with the requested purity: one dominant mode
    /// and `K - 1` equal minor modes.
    pub fn from_purity(purity: T, modes: usize) -> Result<Self> {
        schmidt_from_purity(purity, modes)
    }

    /// `K`-mode spectrum that preserves the purity of a longer weight list.
    ///
    /// This is the bridge from a decomposed joint spectral amplitude to the
    /// photon-number engine: the retained modes reproduce `Σ μ_k²` exactly.
    pub fn effective(mu: &[T], modes: usize) -> Result<Self> {
        let total = mu.iter().fold(T::zero(), |a, &b| a + b);
        if !(total > T::zero()) {
            return Err(Error::Domain("empty Schmidt weight list".into()));
        }
        let purity = mu.iter().fold(T::zero(), |a, &m| a + (m / total) * (m / total));
        let floor = T::one() / T::from_count(modes.max(1));
        schmidt_from_purity(if purity < floor { floor } else { purity }, modes)
    }

    /// Keeps the `modes` leading weights and renormalizes them.
    pub fn truncated(mu: &[T], modes: usize) -> Result<Self> {
        let mut sorted = mu.to_vec();
        sorted.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
        sorted.truncate(modes.max(1));
        Self::from_weights(&sorted)
    }

    pub fn lambdas(&self) -> &[T] {
        &self.lambdas
    }

    pub fn modes(&self) -> usize {
        self.lambdas.len()
    }

    pub fn purity(&self) -> T {
        self.lambdas.iter().fold(T::zero(), |a, &l| a + l * l)
    }
}

/// How a source populates its Schmidt modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Emission {
    /// Multi-mode twin-beam squeezed vacuum with geometric pair statistics.
    Squeezed,
    /// Exactly one pair per pulse, in Schmidt mode `k` with probability `λ_k`.
    SinglePair,
}

/// A photon-pair source.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceModel<T> {
    schmidt: SchmidtSpectrum<T>,
    nbar: T,
    xk: Vec<T>,
    emission: Emission,
}

impl<T: Real> SourceModel<T> {
    /// Squeezed source with `nbar` mean pairs per pulse, split across the
    /// Schmidt modes in proportion to `λ_k`.
    pub fn squeezed(schmidt: SchmidtSpectrum<T>, nbar: T) -> Result<Self> {
        let xk = squeezing_from_nbar(nbar, &schmidt)?;
        Ok(Self { schmidt, nbar, xk, emission: Emission::Squeezed })
    }

    /// Deterministic single-pair source, the ideal-source limit.
    pub fn single_pair(schmidt: SchmidtSpectrum<T>) -> Self {
        let k = schmidt.modes();
        Self { schmidt, nbar: T::one(), xk: vec![T::zero(); k], emission: Emission::SinglePair }
    }

    pub fn schmidt(&self) -> &SchmidtSpectrum<T> {
        &self.schmidt
    }

    pub fn nbar(&self) -> T {
        self.nbar
    }

    /// Per-mode squeezing strengths. All zero for a single-pair source.
    pub fn xk(&self) -> &[T] {
        &self.xk
    }

    pub fn emission(&self) -> Emission {
        self.emission
    }

    pub fn modes(&self) -> usize {
        self.schmidt.modes()
    }

    /// Largest pair number that can carry weight in mode `k`, given a cap.
    fn mode_cap(&self, k: usize, cap: usize) -> usize {
        match self.emission {
            Emission::Squeezed if self.xk[k] > T::zero() => cap,
            Emission::Squeezed => 0,
            Emission::SinglePair if self.schmidt.lambdas[k] > T::zero() => cap.min(1),
            Emission::SinglePair => 0,
        }
    }

    /// Probability of the per-mode pair numbers `counts` (length `K`).
    pub fn occupation_weight(&self, counts: &[u32]) -> T {
        debug_assert_eq!(counts.len(), self.modes());
        match self.emission {
            Emission::Squeezed => counts
                .iter()
                .zip(&self.xk)
                .fold(T::one(), |w, (&n, &x)| w * (T::one() - x) * x.powi(n as i32)),
            Emission::SinglePair => {
                let total: u32 = counts.iter().sum();
                if total != 1 {
                    return T::zero();
                }
                let k = counts.iter().position(|&n| n == 1).expect("one occupied mode");
                self.schmidt.lambdas[k]
            }
        }
    }

    /// Distribution of the total pair number `Σ_k n_k`, up to `n_max`.
    pub fn total_pair_pmf(&self, n_max: usize) -> Vec<T> {
        match self.emission {
            Emission::Squeezed => {
                let mut dist = vec![T::zero(); n_max + 1];
                dist[0] = T::one();
                for &x in &self.xk {
                    let pmf = geometric_pmf(x, n_max);
                    dist = convolve_truncated(&dist, &pmf, n_max);
                }
                dist
            }
            Emission::SinglePair => {
                let mut dist = vec![T::zero(); n_max + 1];
                if n_max >= 1 {
                    dist[1] = T::one();
                }
                dist
            }
        }
    }
}

/// Whether the pair cap applies to the sum over both sources or to each one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruncationScope {
    #[default]
    Joint,
    PerSource,
}

/// Photon-pair truncation of the Fock-space enumeration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TruncationPolicy {
    max_total_pairs: usize,
    scope: TruncationScope,
}

impl TruncationPolicy {
    pub fn joint(max_total_pairs: usize) -> Result<Self> {
        Self::new(max_total_pairs, TruncationScope::Joint)
    }

    pub fn per_source(max_pairs: usize) -> Result<Self> {
        Self::new(max_pairs, TruncationScope::PerSource)
    }

    pub fn new(max_total_pairs: usize, scope: TruncationScope) -> Result<Self> {
        if max_total_pairs < 1 {
            return Err(Error::Domain("truncation must admit at least one pair".into()));
        }
        Ok(Self { max_total_pairs, scope })
    }

    pub fn max_total_pairs(&self) -> usize {
        self.max_total_pairs
    }

    pub fn scope(&self) -> TruncationScope {
        self.scope
    }

    /// Upper bound on the number of photons that can reach either output
    /// of the interferometer.
    pub fn max_signal_photons(&self) -> usize {
        match self.scope {
            TruncationScope::Joint => self.max_total_pairs,
            TruncationScope::PerSource => 2 * self.max_total_pairs,
        }
    }
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        Self { max_total_pairs: 10, scope: TruncationScope::Joint }
    }
}

/// Which of the two sources a slot belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SourceLabel {
    S1,
    S2,
}

impl SourceLabel {
    fn index(self) -> usize {
        match self {
            SourceLabel::S1 => 0,
            SourceLabel::S2 => 1,
        }
    }
}

/// Pair numbers over the `(source, Schmidt mode)` slots, with probability.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupationState<T> {
    occupations: Vec<u32>,
    modes: usize,
    weight: T,
}

impl<T: Real> OccupationState<T> {
    pub fn weight(&self) -> T {
        self.weight
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn count(&self, source: SourceLabel, mode: usize) -> u32 {
        self.occupations[source.index() * self.modes + mode]
    }

    /// Per-mode pair numbers of one source.
    pub fn source_counts(&self, source: SourceLabel) -> &[u32] {
        let start = source.index() * self.modes;
        &self.occupations[start..start + self.modes]
    }

    pub fn source_pairs(&self, source: SourceLabel) -> u32 {
        self.source_counts(source).iter().sum()
    }

    pub fn total_pairs(&self) -> u32 {
        self.occupations.iter().sum()
    }
}

/// `[(1 - x) x^n for n in 0..=n_max]`.
pub fn pair_number_pmf<T: Real>(x: T, n_max: usize) -> Result<Vec<T>> {
    if !(x >= T::zero() && x < T::one()) {
        return Err(Error::Domain(format!("squeezing strength {x} outside [0, 1)")));
    }
    Ok(geometric_pmf(x, n_max))
}

fn geometric_pmf<T: Real>(x: T, n_max: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(n_max + 1);
    let mut term = T::one() - x;
    for _ in 0..=n_max {
        out.push(term);
        term *= x;
    }
    out
}

fn convolve_truncated<T: Real>(a: &[T], b: &[T], n_max: usize) -> Vec<T> {
    let mut out = vec![T::zero(); n_max + 1];
    for (i, &ai) in a.iter().enumerate().take(n_max + 1) {
        for (j, &bj) in b.iter().enumerate().take(n_max + 1 - i) {
            out[i + j] += ai * bj;
        }
    }
    out
}

/// Per-mode squeezing strengths for `nbar` mean pairs per pulse.
///
/// Mode `k` receives `λ_k · nbar` mean pairs, so `x_k = m_k / (1 + m_k)`.
pub fn squeezing_from_nbar<T: Real>(nbar: T, schmidt: &SchmidtSpectrum<T>) -> Result<Vec<T>> {
    if !(nbar >= T::zero()) || !nbar.is_finite() {
        return Err(Error::Domain(format!("mean pair number {nbar} must be finite and >= 0")));
    }
    Ok(schmidt
        .lambdas()
        .iter()
        .map(|&l| {
            let m = l * nbar;
            m / (T::one() + m)
        })
        .collect())
}

/// Schmidt spectrum with the given purity: `λ_1` dominant and the remaining
/// `K - 1` weights equal. For `K = 2`, `λ_1 = (1 + √(2P - 1)) / 2`.
pub fn schmidt_from_purity<T: Real>(purity: T, modes: usize) -> Result<SchmidtSpectrum<T>> {
    let infeasible = || Error::InfeasiblePurity { purity: purity.to_f64_lossy(), modes };
    if modes == 0 {
        return Err(infeasible());
    }
    let k = T::from_count(modes);
    let tol = T::exact_tol();
    if !purity.is_finite() || purity > T::one() + tol || purity < T::one() / k - tol {
        return Err(infeasible());
    }
    if modes == 1 {
        return Ok(SchmidtSpectrum::single_mode());
    }
    let km1 = k - T::one();
    let disc = (km1 * (k * purity - T::one())).max(T::zero());
    let lead = ((T::one() + disc.sqrt()) / k).min(T::one());
    let rest = (T::one() - lead) / km1;
    let mut lambdas = vec![rest; modes];
    lambdas[0] = lead;
    Ok(SchmidtSpectrum { lambdas })
}

/// All occupation assignments of two sources admitted by `trunc`, with
/// their product-distribution weights. Zero-weight assignments are skipped.
pub fn enumerate_joint_states<T: Real>(
    s1: &SourceModel<T>,
    s2: &SourceModel<T>,
    trunc: &TruncationPolicy,
) -> Result<Vec<OccupationState<T>>> {
    let modes = s1.modes();
    if s2.modes() != modes {
        return Err(Error::Config(format!(
            "sources carry different Schmidt mode counts ({modes} vs {})",
            s2.modes()
        )));
    }
    let cap = trunc.max_total_pairs();
    let caps: Vec<usize> = (0..modes)
        .map(|k| s1.mode_cap(k, cap))
        .chain((0..modes).map(|k| s2.mode_cap(k, cap)))
        .collect();

    let mut states = Vec::new();
    let mut current = vec![0u32; 2 * modes];
    let mut visit = |occ: &[u32]| {
        let w = s1.occupation_weight(&occ[..modes]) * s2.occupation_weight(&occ[modes..]);
        if w > T::zero() {
            states.push(OccupationState { occupations: occ.to_vec(), modes, weight: w });
        }
    };
    enumerate_slots(&mut current, 0, &caps, modes, trunc, &mut visit);
    Ok(states)
}

fn enumerate_slots(
    current: &mut [u32],
    slot: usize,
    caps: &[usize],
    modes: usize,
    trunc: &TruncationPolicy,
    visit: &mut impl FnMut(&[u32]),
) {
    if slot == current.len() {
        visit(current);
        return;
    }
    let used: u32 = match trunc.scope() {
        TruncationScope::Joint => current[..slot].iter().sum(),
        TruncationScope::PerSource => {
            let start = (slot / modes) * modes;
            current[start..slot].iter().sum()
        }
    };
    let room = trunc.max_total_pairs() - used as usize;
    for n in 0..=room.min(caps[slot]) {
        current[slot] = n as u32;
        enumerate_slots(current, slot + 1, caps, modes, trunc, visit);
    }
    current[slot] = 0;
}

/// Occupations of a single source with at most `max_pairs` pairs in total.
pub fn enumerate_source_states<T: Real>(
    source: &SourceModel<T>,
    max_pairs: usize,
) -> Vec<(Vec<u32>, T)> {
    let modes = source.modes();
    let caps: Vec<usize> = (0..modes).map(|k| source.mode_cap(k, max_pairs)).collect();
    let trunc = TruncationPolicy { max_total_pairs: max_pairs, scope: TruncationScope::Joint };
    let mut out = Vec::new();
    let mut current = vec![0u32; modes];
    let mut visit = |occ: &[u32]| {
        let w = source.occupation_weight(occ);
        if w > T::zero() {
            out.push((occ.to_vec(), w));
        }
    };
    enumerate_slots(&mut current, 0, &caps, modes, &trunc, &mut visit);
    out
}

/// Probability mass discarded by the truncation, computed from the
/// distribution of the total pair number.
pub fn truncation_tail<T: Real>(
    s1: &SourceModel<T>,
    s2: &SourceModel<T>,
    trunc: &TruncationPolicy,
) -> T {
    let n = trunc.max_total_pairs();
    let kept = match trunc.scope() {
        TruncationScope::Joint => {
            let joint = convolve_truncated(&s1.total_pair_pmf(n), &s2.total_pair_pmf(n), n);
            joint.iter().fold(T::zero(), |a, &b| a + b)
        }
        TruncationScope::PerSource => {
            let k1 = s1.total_pair_pmf(n).iter().fold(T::zero(), |a, &b| a + b);
            let k2 = s2.total_pair_pmf(n).iter().fold(T::zero(), |a, &b| a + b);
            k1 * k2
        }
    };
    (T::one() - kept).max(T::zero())
}
