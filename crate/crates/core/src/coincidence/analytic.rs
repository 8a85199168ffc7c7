use crate::scalar::Real;

/// Closed-form single-photon fringes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnalyticKind {
    /// Balanced couplers, indistinguishable photons: `½[1 + cos 2φ]`.
    IdealInd,
    /// Balanced couplers, distinguishable photons: `½ + ¼[1 + cos 2φ]`.
    IdealDist,
    /// Couplers at angle θ, indistinguishable: `[2 sin²(φ/2) sin²(2θ) - 1]²`.
    ImperfectInd,
    /// Couplers at angle θ, distinguishable: `R² + (1 - R)²`.
    ImperfectDist,
}

/// Four-fold probability for one pure photon per input port and perfect
/// detectors. `theta` is ignored by the ideal kinds.
pub fn analytic_p4f<T: Real>(kind: AnalyticKind, theta: T, phi: T) -> T {
    let one = T::one();
    let two = T::lit(2.0);
    let reflect = || (phi / two).sin().powi(2) * (two * theta).sin().powi(2);
    match kind {
        AnalyticKind::IdealInd => (one + (two * phi).cos()) / two,
        AnalyticKind::IdealDist => one / two + (one + (two * phi).cos()) / T::lit(4.0),
        AnalyticKind::ImperfectInd => (two * reflect() - one).powi(2),
        AnalyticKind::ImperfectDist => {
            let r = reflect();
            r * r + (one - r) * (one - r)
        }
    }
}
