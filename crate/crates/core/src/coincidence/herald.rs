use crate::error::{Error, Result};
use crate::fock::{enumerate_source_states, SourceModel, TruncationPolicy};
use crate::scalar::Real;

use super::{click_probability, DetectorModel};

/// Signal-photon state of one source conditioned on an idler click.
///
/// The state is diagonal in the per-mode photon-number basis, so it is a
/// list of occupation vectors (one count per Schmidt mode) with
/// probabilities summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct HeraldedMixture<T> {
    pub states: Vec<(Vec<u32>, T)>,
    /// Unconditional probability that the herald fires (within truncation).
    pub herald_probability: T,
}

impl<T: Real> HeraldedMixture<T> {
    pub fn total_weight(&self) -> T {
        self.states.iter().fold(T::zero(), |a, (_, w)| a + *w)
    }

    /// Probability of `n` signal photons summed over modes.
    pub fn photon_number_probability(&self, n: u32) -> T {
        self.states
            .iter()
            .filter(|(occ, _)| occ.iter().sum::<u32>() == n)
            .fold(T::zero(), |a, (_, w)| a + *w)
    }
}

/// Heralded signal mixture: weights `∝ p(n_1..n_K) · P_click(Σ n_k)`,
/// restricted to at least one pair and renormalized.
pub fn herald_distribution<T: Real>(
    source: &SourceModel<T>,
    det: &DetectorModel<T>,
    trunc: &TruncationPolicy,
) -> Result<HeraldedMixture<T>> {
    let mut states: Vec<(Vec<u32>, T)> = enumerate_source_states(source, trunc.max_total_pairs())
        .into_iter()
        .filter_map(|(occ, w)| {
            let n: u32 = occ.iter().sum();
            let h = w * click_probability(n, det);
            (n >= 1 && h > T::zero()).then_some((occ, h))
        })
        .collect();
    let norm = states.iter().fold(T::zero(), |a, (_, w)| a + *w);
    if !(norm > T::zero()) {
        return Err(Error::HeraldImpossible(
            "no pair can be emitted and detected (zero brightness or zero efficiency)".into(),
        ));
    }
    for (_, w) in &mut states {
        *w /= norm;
    }
    Ok(HeraldedMixture { states, herald_probability: norm })
}
