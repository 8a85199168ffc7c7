//! Box-constrained Levenberg–Marquardt for small dense problems.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct LmOutcome {
    pub x: Vec<f64>,
    pub residuals: DVector<f64>,
    pub chi2: f64,
    pub jacobian: DMatrix<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl LmOutcome {
    /// Covariance `(JᵀJ)⁻¹` restricted to the free parameters; rows and
    /// columns of parameters pinned at a bound are zero.
    pub fn covariance(&self, free: &[bool]) -> Result<DMatrix<f64>> {
        covariance(&self.jacobian, free)
    }
}

pub fn covariance(jacobian: &DMatrix<f64>, free: &[bool]) -> Result<DMatrix<f64>> {
    let idx: Vec<usize> = (0..free.len()).filter(|&i| free[i]).collect();
    let n = free.len();
    let mut out = DMatrix::zeros(n, n);
    if idx.is_empty() {
        return Ok(out);
    }
    let j = jacobian.select_columns(&idx);
    let (js, scale) = scale_columns(&j);
    let a = js.transpose() * &js;
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 1e-13 * smax) {
        return Err(Error::Unidentifiable(
            "normal matrix is rank deficient; parameters are not separately determined".into(),
        ));
    }
    let inv = svd.pseudo_inverse(0.0).map_err(|e| Error::Unidentifiable(e.into()))?;
    for (a_i, &p) in idx.iter().enumerate() {
        for (b_i, &q) in idx.iter().enumerate() {
            out[(p, q)] = inv[(a_i, b_i)] * scale[a_i] * scale[b_i];
        }
    }
    Ok(out)
}

fn scale_columns(j: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>) {
    let scale: Vec<f64> = j
        .column_iter()
        .map(|c| {
            let n = c.norm();
            if n > 0.0 {
                1.0 / n
            } else {
                1.0
            }
        })
        .collect();
    let mut js = j.clone();
    for (k, mut c) in js.column_iter_mut().enumerate() {
        c *= scale[k];
    }
    (js, scale)
}

/// Minimizes `Σ r_i(x)²` within `[lower, upper]`.
///
/// `eval` returns the residual vector and its Jacobian. Steps are solved in
/// column-normalized coordinates and then projected back into the box.
pub fn levenberg_marquardt<F>(
    eval: F,
    x0: &[f64],
    lower: &[f64],
    upper: &[f64],
    max_iter: usize,
) -> LmOutcome
where
    F: Fn(&[f64]) -> (DVector<f64>, DMatrix<f64>),
{
    let n = x0.len();
    let clamp = |x: &mut [f64]| {
        for i in 0..n {
            x[i] = x[i].clamp(lower[i], upper[i]);
        }
    };
    let mut x = x0.to_vec();
    clamp(&mut x);
    let (mut r, mut j) = eval(&x);
    let mut chi2 = r.norm_squared();
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < max_iter {
        iterations += 1;
        let (js, scale) = scale_columns(&j);
        let a = js.transpose() * &js;
        let g = js.transpose() * &r;
        // Parameters on a bound whose descent direction points outside stay put.
        let active: Vec<bool> = (0..n)
            .map(|k| (x[k] <= lower[k] && g[k] > 0.0) || (x[k] >= upper[k] && g[k] < 0.0))
            .collect();
        let idx: Vec<usize> = (0..n).filter(|&k| !active[k]).collect();
        let projected = idx.iter().fold(0.0_f64, |m, &k| m.max(g[k].abs()));
        if idx.is_empty() || projected <= 1e-15 * (1.0 + chi2) {
            converged = true;
            break;
        }
        let a = a.select_rows(&idx).select_columns(&idx);
        let g_free = DVector::from_iterator(idx.len(), idx.iter().map(|&k| g[k]));
        let mut accepted = false;
        while lambda < 1e16 {
            let mut damped = a.clone();
            for k in 0..idx.len() {
                damped[(k, k)] += lambda * (1.0 + a[(k, k)]);
            }
            let Some(chol) = damped.cholesky() else {
                lambda *= 10.0;
                continue;
            };
            let reduced = chol.solve(&(-&g_free));
            let mut step = DVector::zeros(n);
            for (k, &i) in idx.iter().enumerate() {
                step[i] = reduced[k];
            }
            let mut trial: Vec<f64> = (0..n).map(|k| x[k] + step[k] * scale[k]).collect();
            clamp(&mut trial);
            let (tr, tj) = eval(&trial);
            let tchi2 = tr.norm_squared();
            if tchi2.is_finite() && tchi2 <= chi2 {
                let moved = (0..n)
                    .map(|k| ((trial[k] - x[k]) / scale[k]).abs())
                    .fold(0.0, f64::max);
                let gain = chi2 - tchi2;
                x = trial;
                r = tr;
                j = tj;
                chi2 = tchi2;
                lambda = (lambda / 3.0).max(1e-12);
                accepted = true;
                if gain <= 1e-16 * chi2 || moved <= 1e-12 * (1.0 + chi2.sqrt()) {
                    converged = true;
                }
                break;
            }
            lambda *= 4.0;
        }
        if !accepted {
            // No descent direction left at any damping: a stationary point.
            converged = true;
            break;
        }
        if converged {
            break;
        }
    }
    LmOutcome { x, residuals: r, chi2, jacobian: j, iterations, converged }
}
