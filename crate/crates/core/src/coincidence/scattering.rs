use num_complex::Complex;

use crate::interferometer::Transfer;
use crate::scalar::{norm_sqr, Real};

/// Distribution of the number of photons leaving through output `c` when
/// `n` photons enter port `a` and `m` enter port `b` in a single spectral
/// mode. Index `p` holds `P(n_c = p)`; the rest leave through `d`.
///
/// Expands `(U₁₁c† + U₁₂d†)ⁿ (U₂₁c† + U₂₂d†)ᵐ |vac⟩ / √(n! m!)`.
pub fn output_distribution<T: Real>(u: &Transfer<T>, n: usize, m: usize) -> Vec<T> {
    let total = n + m;
    let binom = pascal::<T>(total);
    let fact = factorials::<T>(total);
    let pow = |z: Complex<T>| powers(z, total);
    let (ac, ad, bc, bd) = (pow(u[(0, 0)]), pow(u[(0, 1)]), pow(u[(1, 0)]), pow(u[(1, 1)]));
    let zero = Complex::new(T::zero(), T::zero());

    (0..=total)
        .map(|p| {
            let lo = p.saturating_sub(m);
            let hi = p.min(n);
            let mut amp = zero;
            for j in lo..=hi {
                let l = p - j;
                let coeff = binom[n][j] * binom[m][l];
                amp += ac[j] * ad[n - j] * bc[l] * bd[m - l] * coeff;
            }
            norm_sqr(amp) * fact[p] * fact[total - p] / (fact[n] * fact[m])
        })
        .collect()
}

fn powers<T: Real>(z: Complex<T>, max: usize) -> Vec<Complex<T>> {
    let mut out = Vec::with_capacity(max + 1);
    let mut acc = Complex::new(T::one(), T::zero());
    for _ in 0..=max {
        out.push(acc);
        acc *= z;
    }
    out
}

fn pascal<T: Real>(max: usize) -> Vec<Vec<T>> {
    let mut rows: Vec<Vec<T>> = Vec::with_capacity(max + 1);
    for n in 0..=max {
        let mut row = vec![T::one(); n + 1];
        for k in 1..n {
            row[k] = rows[n - 1][k - 1] + rows[n - 1][k];
        }
        rows.push(row);
    }
    rows
}

fn factorials<T: Real>(max: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(max + 1);
    let mut acc = T::one();
    out.push(acc);
    for k in 1..=max {
        acc *= T::from_count(k);
        out.push(acc);
    }
    out
}

/// [`output_distribution`] for every `(n, m)` with `n + m <= max_photons`.
#[derive(Debug, Clone)]
pub struct ScatteringTable<T> {
    max_photons: usize,
    table: Vec<Vec<T>>,
}

impl<T: Real> ScatteringTable<T> {
    pub fn new(u: &Transfer<T>, max_photons: usize) -> Self {
        let width = max_photons + 1;
        let mut table = vec![Vec::new(); width * width];
        for n in 0..=max_photons {
            for m in 0..=(max_photons - n) {
                table[n * width + m] = output_distribution(u, n, m);
            }
        }
        Self { max_photons, table }
    }

    pub fn max_photons(&self) -> usize {
        self.max_photons
    }

    pub fn get(&self, n: usize, m: usize) -> &[T] {
        assert!(n + m <= self.max_photons, "({n}, {m}) exceeds table size {}", self.max_photons);
        &self.table[n * (self.max_photons + 1) + m]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interferometer::{mzi_unitary, MziModel};
    use approx::assert_relative_eq;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn hong_ou_mandel_dip() {
        let u = mzi_unitary(&MziModel::balanced(FRAC_PI_2));
        let d = output_distribution(&u, 1, 1);
        assert_relative_eq!(d[1], 0.0, epsilon = 1e-15);
        assert_relative_eq!(d[0], 0.5, epsilon = 1e-15);
        assert_relative_eq!(d[2], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn single_input_is_binomial() {
        let u = mzi_unitary(&MziModel::new(0.6301_f64, 1.2));
        let r = u[(0, 0)].norm_sqr();
        let d = output_distribution(&u, 4, 0);
        let binom = [1.0, 4.0, 6.0, 4.0, 1.0];
        for p in 0..=4 {
            let expect = binom[p] * r.powi(p as i32) * (1.0 - r).powi(4 - p as i32);
            assert_relative_eq!(d[p], expect, epsilon = 1e-14);
        }
    }

    #[test]
    fn two_two_at_balance() {
        // |2,2> on a 50:50 splitter: P(n_c = 2) = 1/4, P(0) = P(4) = 3/8.
        let u = mzi_unitary(&MziModel::balanced(FRAC_PI_2));
        let d = output_distribution(&u, 2, 2);
        assert_relative_eq!(d[0], 0.375, epsilon = 1e-14);
        assert_relative_eq!(d[1], 0.0, epsilon = 1e-14);
        assert_relative_eq!(d[2], 0.25, epsilon = 1e-14);
        assert_relative_eq!(d[3], 0.0, epsilon = 1e-14);
        assert_relative_eq!(d[4], 0.375, epsilon = 1e-14);
    }

    #[test]
    fn table_rows_are_normalized() {
        for (theta, phi) in [(0.6301, 0.4), (0.2, 2.9), (1.1, -1.3)] {
            let table = ScatteringTable::new(&mzi_unitary(&MziModel::new(theta, phi)), 20);
            for n in 0..=20 {
                for m in 0..=(20 - n) {
                    let s: f64 = table.get(n, m).iter().sum();
                    assert!((s - 1.0).abs() < 1e-12, "({n},{m}) sums to {s}");
                }
            }
        }
    }
}
