//! Small dense Levenberg–Marquardt solver shared by the fitting routines.

use nalgebra::{DMatrix, DVector};

pub(crate) struct LmOutcome {
    pub params: Vec<f64>,
    pub rss: f64,
    /// `(JᵀJ)⁻¹` at the solution; multiply by the residual variance for
    /// parameter covariances.
    pub jtj_inverse: Option<DMatrix<f64>>,
    pub converged: bool,
}

/// Minimizes `Σ r_i(p)²`.
///
/// `model` fills the residual vector and the row-major Jacobian
/// (`jac[i * n_params + j] = ∂r_i/∂p_j`) for the given parameters.
pub(crate) fn levenberg_marquardt<F>(
    n_residuals: usize,
    p0: &[f64],
    max_iter: usize,
    mut model: F,
) -> LmOutcome
where
    F: FnMut(&[f64], &mut [f64], &mut [f64]),
{
    let np = p0.len();
    let mut p = p0.to_vec();
    let mut r = vec![0.0; n_residuals];
    let mut jac = vec![0.0; n_residuals * np];
    model(&p, &mut r, &mut jac);
    let mut rss: f64 = r.iter().map(|x| x * x).sum();
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut trial_r = vec![0.0; n_residuals];
    let mut trial_jac = vec![0.0; n_residuals * np];

    for _ in 0..max_iter {
        let j = DMatrix::from_row_slice(n_residuals, np, &jac);
        let jtj = j.transpose() * &j;
        let grad = j.transpose() * DVector::from_column_slice(&r);
        let mut improved = false;
        for _ in 0..30 {
            let mut a = jtj.clone();
            for k in 0..np {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-300);
            }
            let Some(step) = a.cholesky().map(|c| c.solve(&(-&grad))) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = p.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            model(&trial, &mut trial_r, &mut trial_jac);
            let trial_rss: f64 = trial_r.iter().map(|x| x * x).sum();
            if trial_rss.is_finite() && trial_rss <= rss {
                let small_step = step
                    .iter()
                    .zip(&p)
                    .all(|(s, v)| s.abs() <= 1e-10 * (v.abs() + 1e-10));
                let small_gain = rss - trial_rss <= 1e-10 * rss.max(1e-300);
                p = trial;
                std::mem::swap(&mut r, &mut trial_r);
                std::mem::swap(&mut jac, &mut trial_jac);
                rss = trial_rss;
                lambda = (lambda / 3.0).max(1e-15);
                improved = true;
                if small_step || small_gain {
                    converged = true;
                }
                break;
            }
            lambda *= 5.0;
        }
        if !improved {
            // No downhill step exists at any damping: we sit at a minimum.
            converged = true;
        }
        if converged {
            break;
        }
    }

    let j = DMatrix::from_row_slice(n_residuals, np, &jac);
    let jtj_inverse = (j.transpose() * &j).try_inverse();
    LmOutcome { params: p, rss, jtj_inverse, converged }
}

/// Weighted linear least squares `min Σ w_i (y_i - Σ_j X_ij β_j)²`.
///
/// Returns the coefficients and `(XᵀWX)⁻¹`.
pub(crate) fn weighted_linear_lsq(
    rows: &[Vec<f64>],
    y: &[f64],
    weights: &[f64],
) -> Option<(Vec<f64>, DMatrix<f64>)> {
    let n = rows.len();
    let p = rows.first()?.len();
    let mut xtwx = DMatrix::<f64>::zeros(p, p);
    let mut xtwy = DVector::<f64>::zeros(p);
    for i in 0..n {
        for a in 0..p {
            xtwy[a] += weights[i] * rows[i][a] * y[i];
            for b in 0..p {
                xtwx[(a, b)] += weights[i] * rows[i][a] * rows[i][b];
            }
        }
    }
    let inv = xtwx.try_inverse()?;
    let beta = &inv * xtwy;
    Some((beta.iter().copied().collect(), inv))
}
