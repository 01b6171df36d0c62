use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::weighted_linear_lsq;

/// Samples taken after a readout rotation `alpha`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaSet {
    pub alpha: f64,
    pub values: Vec<f64>,
}

/// `V(α) = a - c cos(2(α - α0))` with `c ≥ 0`, so `α0` is the direction of
/// the minimum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EllipseFit {
    pub a: f64,
    pub c: f64,
    /// In `[0, π)`.
    pub alpha0: f64,
    pub v_min: f64,
    pub v_max: f64,
    pub a_err: f64,
    pub c_err: f64,
    pub alpha0_err: f64,
    pub v_min_err: f64,
    /// `(α, sample variance)` per set.
    pub points: Vec<(f64, f64)>,
}

impl EllipseFit {
    pub fn eval(&self, alpha: f64) -> f64 {
        self.a - self.c * (2.0 * (alpha - self.alpha0)).cos()
    }

    /// Fitted curve on `n` evenly spaced angles over `[0, π)`.
    pub fn curve(&self, n: usize) -> Vec<(f64, f64)> {
        (0..n).map(|i| PI * i as f64 / n as f64).map(|a| (a, self.eval(a))).collect()
    }
}

/// Fits the variance-ellipse section to per-angle sample variances, weighted
/// by the Gaussian sampling variance `2V²/(n-1)`.
pub fn variance_vs_alpha(sets: &[AlphaSet]) -> Result<EllipseFit> {
    let mut points = Vec::with_capacity(sets.len());
    let mut weights = Vec::with_capacity(sets.len());
    for s in sets {
        let n = s.values.len();
        if n < 2 {
            return Err(Error::InvalidArgument(format!("angle {} has {n} samples", s.alpha)));
        }
        let mean = s.values.iter().sum::<f64>() / n as f64;
        let var = s.values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        points.push((s.alpha, var));
        weights.push(var.max(f64::MIN_POSITIVE).powi(-2) * (n - 1) as f64 / 2.0);
    }
    fit_section(points, &weights)
}

/// Same fit from exact or externally estimated variances and weights.
pub fn fit_section(points: Vec<(f64, f64)>, weights: &[f64]) -> Result<EllipseFit> {
    let mut distinct: Vec<f64> = points.iter().map(|p| p.0.rem_euclid(PI)).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    if distinct.len() < 5 {
        return Err(Error::InvalidArgument(format!("need at least 5 distinct angles, got {}", distinct.len())));
    }
    let rows: Vec<Vec<f64>> = points.iter().map(|&(al, _)| vec![1.0, (2.0 * al).cos(), (2.0 * al).sin()]).collect();
    let y: Vec<f64> = points.iter().map(|p| p.1).collect();
    let (beta, cov) = weighted_linear_lsq(&rows, &y, weights).ok_or_else(|| Error::FitFailure {
        reason: "ellipse normal equations are singular".into(),
        residual_norm: f64::NAN,
    })?;
    let (a, p, q) = (beta[0], beta[1], beta[2]);
    let c = p.hypot(q);
    let alpha0 = (0.5 * (-q).atan2(-p)).rem_euclid(PI);
    // Delta method on c = |(p, q)| and α0 = atan2(-q, -p)/2.
    let (dc, da) = if c > 0.0 {
        ([0.0, p / c, q / c], [0.0, 0.5 * q / (c * c), -0.5 * p / (c * c)])
    } else {
        ([0.0; 3], [0.0; 3])
    };
    let quad = |g: &[f64; 3], h: &[f64; 3]| -> f64 {
        (0..3).map(|i| (0..3).map(|j| g[i] * cov[(i, j)] * h[j]).sum::<f64>()).sum()
    };
    let dmin = [1.0, -dc[1], -dc[2]];
    Ok(EllipseFit {
        a,
        c,
        alpha0,
        v_min: a - c,
        v_max: a + c,
        a_err: cov[(0, 0)].max(0.0).sqrt(),
        c_err: quad(&dc, &dc).max(0.0).sqrt(),
        alpha0_err: if c > 0.0 { quad(&da, &da).max(0.0).sqrt() } else { PI / 2.0 },
        v_min_err: quad(&dmin, &dmin).max(0.0).sqrt(),
        points,
    })
}
