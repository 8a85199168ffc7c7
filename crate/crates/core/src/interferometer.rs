//! Two-port Mach–Zehnder interferometer built from two identical directional
//! couplers and a phase shifter on the upper arm.

use nalgebra::Matrix2;
use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::{cis, norm_sqr, Real};

pub type Transfer<T> = Matrix2<Complex<T>>;

/// Coupler angle `theta` and internal phase `phi`, both in radians. Each
/// coupler routes a fraction `sin²θ` of the light into the cross port.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MziModel<T> {
    pub theta: T,
    pub phi: T,
}

impl<T: Real> MziModel<T> {
    pub fn new(theta: T, phi: T) -> Self {
        Self { theta, phi }
    }

    /// Balanced 50:50 couplers.
    pub fn balanced(phi: T) -> Self {
        Self { theta: T::FRAC_PI_4(), phi }
    }

    pub fn with_phi(self, phi: T) -> Self {
        Self { phi, ..self }
    }

    pub fn unitary(&self) -> Transfer<T> {
        mzi_unitary(self)
    }

    pub fn effective(&self) -> EffectiveSplitter<T> {
        effective_rt(self)
    }
}

/// Coupler angle for a coupler sending `fraction` of the power to the cross
/// port, e.g. `0.35` for a 35:65 device.
pub fn coupler_angle<T: Real>(fraction: T) -> Result<T> {
    if !(fraction >= T::zero() && fraction <= T::one()) {
        return Err(Error::Domain(format!("splitting fraction {fraction} outside [0, 1]")));
    }
    Ok(fraction.sqrt().asin())
}

/// The MZI viewed as a single variable beam splitter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveSplitter<T> {
    pub r: T,
    pub t: T,
    /// Effective splitter angle `η`, with `R = sin²(η/2)`.
    pub eta_eff: T,
    /// Input/output phase `Φ` of the decomposition, principal branch.
    pub big_phi: T,
}

fn coupler<T: Real>(theta: T) -> Transfer<T> {
    let (s, c) = (theta.sin(), theta.cos());
    let re = |v: T| Complex::new(v, T::zero());
    Matrix2::new(re(s), re(c), re(c), re(-s))
}

/// `C(θ) · diag(e^{iφ}, 1) · C(θ)` with `C(θ) = [[sin θ, cos θ], [cos θ, -sin θ]]`.
///
/// Entry `(i, j)` is the amplitude for a photon entering port `i` (a, b) to
/// leave through port `j` (c, d). The matrix is symmetric, so the row and
/// column conventions agree.
pub fn mzi_unitary<T: Real>(model: &MziModel<T>) -> Transfer<T> {
    let c = coupler(model.theta);
    let one = Complex::new(T::one(), T::zero());
    let zero = Complex::new(T::zero(), T::zero());
    let phase = Matrix2::new(cis(model.phi), zero, zero, one);
    c * phase * c
}

fn decomposition_phase<T: Real>(theta: T, phi: T) -> T {
    let (s2, c2) = (theta.sin().powi(2), theta.cos().powi(2));
    let e = cis(phi);
    let num = e * s2 + c2;
    let den = e * c2 + s2;
    if norm_sqr(den) < T::default_epsilon() {
        return T::zero();
    }
    let ratio = num / den;
    ratio.im.atan2(ratio.re) / T::lit(2.0)
}

/// Effective reflection `R = sin²(φ/2) sin²(2θ)` and transmission `T = 1 - R`.
pub fn effective_rt<T: Real>(model: &MziModel<T>) -> EffectiveSplitter<T> {
    let half = model.phi / T::lit(2.0);
    let s2t = (T::lit(2.0) * model.theta).sin();
    let amp = (half.sin() * s2t).clamp(-T::one(), T::one());
    let r = amp * amp;
    EffectiveSplitter {
        r,
        t: T::one() - r,
        eta_eff: T::lit(2.0) * amp.asin(),
        big_phi: decomposition_phase(model.theta, model.phi),
    }
}

/// The same transformation written as phase shifts around a variable beam
/// splitter of angle `η`. Agrees with [`mzi_unitary`] up to a global phase.
pub fn variable_beamsplitter<T: Real>(model: &MziModel<T>) -> Transfer<T> {
    let eff = effective_rt(model);
    let two = T::lit(2.0);
    let i = Complex::new(T::zero(), T::one());
    let zero = Complex::new(T::zero(), T::zero());
    let half_phi = eff.big_phi / two;
    let (ch, sh) = ((eff.eta_eff / two).cos(), (eff.eta_eff / two).sin());
    let outer = Matrix2::new(cis(half_phi), zero, zero, cis(-half_phi));
    let splitter = Matrix2::new(
        -i * ch,
        Complex::new(-sh, T::zero()),
        Complex::new(sh, T::zero()),
        i * ch,
    );
    let inner = Matrix2::new(i * cis(half_phi), zero, zero, -i * cis(-half_phi));
    (outer * splitter * inner) * cis(model.phi / two)
}

/// Phase in `[0, π]` at which the indistinguishable two-photon coincidence
/// `[2 sin²(φ/2) sin²(2θ) - 1]²` is smallest.
///
/// Found by bisection on the bracketed root of `2 sin²(φ/2) sin²(2θ) - 1`;
/// when the couplers are too unbalanced for the MZI ever to reach 50:50, the
/// minimum sits at `φ = π`.
pub fn fringe_extrema_phase<T: Real>(theta: T) -> Result<T> {
    let s = (T::lit(2.0) * theta).sin();
    let s2 = s * s;
    if s2 < T::exact_tol() {
        return Err(Error::Degenerate(
            "sin(2θ) = 0: the interferometer is the identity for every phase".into(),
        ));
    }
    let g = |phi: T| T::lit(2.0) * (phi / T::lit(2.0)).sin().powi(2) * s2 - T::one();
    let (mut lo, mut hi) = (T::zero(), T::PI());
    if g(hi) <= T::zero() {
        return Ok(hi);
    }
    for _ in 0..200 {
        let mid = (lo + hi) / T::lit(2.0);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) < T::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo + hi) / T::lit(2.0))
}
