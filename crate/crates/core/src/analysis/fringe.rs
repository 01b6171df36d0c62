use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::levenberg_marquardt;

/// Fit of `y0 + A sin(φ - φ0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FringeFit {
    pub y0: f64,
    /// Non-negative amplitude; a sign flip is absorbed into `phi0`.
    pub amplitude: f64,
    /// Phase offset in `[0, 2π)`.
    pub phi0: f64,
    /// Standard errors of `(y0, amplitude, phi0)`.
    pub std_errors: [f64; 3],
    pub residual_rms: f64,
    pub n_points: usize,
}

impl FringeFit {
    pub fn eval(&self, phi: f64) -> f64 {
        self.y0 + self.amplitude * (phi - self.phi0).sin()
    }
}

/// Largest arc (rad) covered by the sample phases on the circle.
fn phase_span(phases: &[f64]) -> f64 {
    let mut wrapped: Vec<f64> = phases.iter().map(|p| p.rem_euclid(TAU)).collect();
    wrapped.sort_by(f64::total_cmp);
    wrapped.dedup();
    if wrapped.len() < 2 {
        return 0.0;
    }
    let mut largest_gap = TAU - wrapped[wrapped.len() - 1] + wrapped[0];
    for w in wrapped.windows(2) {
        largest_gap = largest_gap.max(w[1] - w[0]);
    }
    TAU - largest_gap
}

/// Least-squares sinusoid fit with a DFT initial guess.
pub fn fit_fringe(phases: &[f64], values: &[f64]) -> Result<FringeFit> {
    let n = phases.len();
    if n != values.len() {
        return Err(Error::InvalidArgument("phases and values differ in length".into()));
    }
    if n < 5 {
        return Err(Error::FitFailure { reason: format!("need at least 5 points, got {n}"), residual_norm: f64::NAN });
    }
    if phases.iter().chain(values).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite fringe data".into()));
    }
    let span = phase_span(phases);
    if span < PI - 1e-12 {
        return Err(Error::FitFailure {
            reason: format!("phases span {span:.3} rad, need at least π"),
            residual_norm: f64::NAN,
        });
    }

    let nf = n as f64;
    let y0 = values.iter().sum::<f64>() / nf;
    let (mut s, mut c) = (0.0, 0.0);
    for (p, y) in phases.iter().zip(values) {
        s += (y - y0) * p.sin();
        c += (y - y0) * p.cos();
    }
    let (s, c) = (2.0 * s / nf, 2.0 * c / nf);
    let p0 = [y0, s.hypot(c), (-c).atan2(s)];

    let out = levenberg_marquardt(n, &p0, 200, |p, r, j| {
        for i in 0..n {
            let (sn, cs) = (phases[i] - p[2]).sin_cos();
            r[i] = p[0] + p[1] * sn - values[i];
            j[3 * i] = 1.0;
            j[3 * i + 1] = sn;
            j[3 * i + 2] = -p[1] * cs;
        }
    });
    let residual_norm = out.rss.sqrt();
    if !out.converged || out.params.iter().any(|v| !v.is_finite()) {
        return Err(Error::FitFailure { reason: "fringe fit did not converge".into(), residual_norm });
    }
    let (mut amp, mut phi0) = (out.params[1], out.params[2]);
    if amp < 0.0 {
        amp = -amp;
        phi0 += PI;
    }
    let s2 = if n > 3 { out.rss / (n - 3) as f64 } else { 0.0 };
    let std_errors = match &out.jtj_inverse {
        Some(inv) => [0, 1, 2].map(|k| (inv[(k, k)] * s2).max(0.0).sqrt()),
        None => [f64::INFINITY; 3],
    };
    if !(amp > std_errors[1]) {
        return Err(Error::FitFailure {
            reason: format!("amplitude {amp:.3e} not resolved (standard error {:.3e})", std_errors[1]),
            residual_norm,
        });
    }
    Ok(FringeFit {
        y0: out.params[0],
        amplitude: amp,
        phi0: crate::spin::wrap_angle(phi0),
        std_errors,
        residual_rms: (out.rss / n as f64).sqrt(),
        n_points: n,
    })
}
