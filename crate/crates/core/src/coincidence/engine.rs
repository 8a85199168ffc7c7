use crate::error::{Error, Result};
use crate::fock::{enumerate_joint_states, SourceLabel};
use crate::interferometer::mzi_unitary;
use crate::scalar::Real;

use super::scattering::ScatteringTable;
use super::{click_probability, Detectors, ExperimentConfig};

/// A joint source state reduced to what the interferometer sees.
#[derive(Debug, Clone)]
struct HeraldedTerm<T> {
    /// Pair-generation weight times both idler click probabilities.
    weight: T,
    /// `(photons into a, photons into b)` for each independent spectral slot.
    slots: Vec<(usize, usize)>,
    photons: usize,
}

/// Four-fold engine with the source enumeration done once, so that only
/// the interferometer phase varies between evaluations.
#[derive(Debug, Clone)]
pub struct FourFoldEngine<T> {
    terms: Vec<HeraldedTerm<T>>,
    herald_norm: T,
    theta: T,
    detectors: Detectors<T>,
    max_photons: usize,
}

impl<T: Real> FourFoldEngine<T> {
    pub fn new(cfg: &ExperimentConfig<T>) -> Result<Self> {
        let states = enumerate_joint_states(&cfg.s1, &cfg.s2, &cfg.trunc)?;
        let det = &cfg.detectors;
        let mut terms = Vec::with_capacity(states.len());
        let mut herald_norm = T::zero();
        let mut max_photons = 0;
        for st in &states {
            let n1 = st.source_pairs(SourceLabel::S1);
            let n2 = st.source_pairs(SourceLabel::S2);
            let weight =
                st.weight() * click_probability(n1, &det.idler1) * click_probability(n2, &det.idler2);
            if !(weight > T::zero()) {
                continue;
            }
            herald_norm += weight;
            let a = st.source_counts(SourceLabel::S1);
            let b = st.source_counts(SourceLabel::S2);
            let slots: Vec<(usize, usize)> = if cfg.distinguishable {
                a.iter()
                    .map(|&n| (n as usize, 0))
                    .chain(b.iter().map(|&m| (0, m as usize)))
                    .filter(|&(n, m)| n + m > 0)
                    .collect()
            } else {
                a.iter()
                    .zip(b)
                    .map(|(&n, &m)| (n as usize, m as usize))
                    .filter(|&(n, m)| n + m > 0)
                    .collect()
            };
            let photons = (n1 + n2) as usize;
            max_photons = max_photons.max(slots.iter().map(|&(n, m)| n + m).max().unwrap_or(0));
            terms.push(HeraldedTerm { weight, slots, photons });
        }
        if terms.is_empty() {
            return Err(Error::Degenerate(
                "truncation and detector settings admit no heralding event".into(),
            ));
        }
        Ok(Self { terms, herald_norm, theta: cfg.mzi.theta, detectors: cfg.detectors, max_photons })
    }

    /// Probability of a four-fold event given both heralds, at MZI phase `phi`.
    pub fn evaluate(&self, phi: T) -> T {
        let u = mzi_unitary(&crate::interferometer::MziModel::new(self.theta, phi));
        let table = ScatteringTable::new(&u, self.max_photons);
        let (dc, dd) = (&self.detectors.signal_c, &self.detectors.signal_d);
        let click_c: Vec<T> =
            (0..=self.max_total()).map(|n| click_probability(n as u32, dc)).collect();
        let click_d: Vec<T> =
            (0..=self.max_total()).map(|n| click_probability(n as u32, dd)).collect();

        let mut acc = T::zero();
        let mut dist: Vec<T> = Vec::new();
        let mut next: Vec<T> = Vec::new();
        for term in &self.terms {
            dist.clear();
            dist.push(T::one());
            for &(n, m) in &term.slots {
                let slot = table.get(n, m);
                next.clear();
                next.resize(dist.len() + slot.len() - 1, T::zero());
                for (i, &p) in dist.iter().enumerate() {
                    for (j, &q) in slot.iter().enumerate() {
                        next[i + j] += p * q;
                    }
                }
                std::mem::swap(&mut dist, &mut next);
            }
            let total = term.photons;
            let signal = dist
                .iter()
                .enumerate()
                .fold(T::zero(), |s, (nc, &p)| s + p * click_c[nc] * click_d[total - nc]);
            acc += term.weight * signal;
        }
        acc / self.herald_norm
    }

    /// Joint probability that both heralds fire, within the truncation.
    pub fn herald_probability(&self) -> T {
        self.herald_norm
    }

    /// Largest photon number reaching the interferometer outputs.
    pub fn max_total(&self) -> usize {
        self.terms.iter().map(|t| t.photons).max().unwrap_or(0)
    }

    pub fn theta(&self) -> T {
        self.theta
    }
}

/// Probability of clicks on both idler detectors and both interferometer
/// outputs, conditioned on the two heralds, at `cfg.mzi.phi`.
///
/// Each joint pair-number state is weighted by its probability and by both
/// herald click probabilities. Photons sharing a spectral slot interfere
/// bosonically; independent slots combine by convolving their output-count
/// distributions. In the indistinguishable case mode `k` of source 2 shares
/// a slot with mode `k` of source 1; otherwise every (source, mode) pair is
/// its own slot.
pub fn four_fold_probability<T: Real>(cfg: &ExperimentConfig<T>) -> Result<T> {
    Ok(FourFoldEngine::new(cfg)?.evaluate(cfg.mzi.phi))
}
