//! Mirror-vibration phase noise of a three-pulse Mach–Zehnder interferometer
//! in the zero-duration-pulse limit.

use std::f64::consts::{PI, TAU};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cavity::PhysicsParams;
use crate::error::{Error, Result};

/// Relative tolerance of the phase-noise quadrature.
pub const QUADRATURE_RTOL: f64 = 1e-4;

/// Acceleration PSD `S_a(ω)` in (m/s²)²/(rad/s), log-log interpolated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsdTable {
    omega: Vec<f64>,
    s_a: Vec<f64>,
}

impl PsdTable {
    pub fn new(omega: Vec<f64>, s_a: Vec<f64>) -> Result<Self> {
        if omega.len() < 2 || omega.len() != s_a.len() {
            return Err(Error::InvalidArgument("PSD table needs ≥2 rows of matching length".into()));
        }
        if omega.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::InvalidArgument("PSD frequencies must be positive".into()));
        }
        if omega.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument("PSD frequencies must be strictly increasing".into()));
        }
        if s_a.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(Error::InvalidArgument("PSD values must be non-negative".into()));
        }
        Ok(Self { omega, s_a })
    }

    /// Parses two whitespace-separated columns: frequency (Hz) and PSD
    /// ((m/s²)²/Hz). Blank lines and `#` comments are skipped.
    pub fn parse_hz(text: &str) -> Result<Self> {
        let mut omega = Vec::new();
        let mut s_a = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split_whitespace().collect();
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| Error::Config(format!("PSD line {}: cannot parse {s:?}", lineno + 1)))
            };
            if cols.len() != 2 {
                return Err(Error::Config(format!("PSD line {}: expected 2 columns", lineno + 1)));
            }
            omega.push(TAU * parse(cols[0])?);
            s_a.push(parse(cols[1])? / TAU);
        }
        Self::new(omega, s_a).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::parse_hz(&std::fs::read_to_string(path)?)
    }

    /// Constant PSD `s0` between `omega_lo` and `omega_hi`.
    pub fn white(s0: f64, omega_lo: f64, omega_hi: f64) -> Result<Self> {
        Self::new(vec![omega_lo, omega_hi], vec![s0, s0])
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    pub fn values(&self) -> &[f64] {
        &self.s_a
    }

    pub fn range(&self) -> (f64, f64) {
        (self.omega[0], *self.omega.last().unwrap())
    }

    /// Interpolated `S_a(ω)`; `None` outside the table.
    pub fn value(&self, omega: f64) -> Option<f64> {
        let (lo, hi) = self.range();
        if !(omega >= lo && omega <= hi) {
            return None;
        }
        let i = match self.omega.binary_search_by(|w| w.total_cmp(&omega)) {
            Ok(i) => return Some(self.s_a[i]),
            Err(i) => i - 1,
        };
        let (w0, w1) = (self.omega[i], self.omega[i + 1]);
        let (s0, s1) = (self.s_a[i], self.s_a[i + 1]);
        if s0 > 0.0 && s1 > 0.0 {
            let t = (omega / w0).ln() / (w1 / w0).ln();
            Some((s0.ln() + t * (s1 / s0).ln()).exp())
        } else {
            Some(s0 + (s1 - s0) * (omega - w0) / (w1 - w0))
        }
    }

    /// Inserts the log-midpoint of every interval (same interpolant).
    pub fn refined(&self) -> Self {
        let mut omega = Vec::with_capacity(2 * self.omega.len());
        for w in self.omega.windows(2) {
            omega.push(w[0]);
            omega.push((w[0] * w[1]).sqrt());
        }
        omega.push(*self.omega.last().unwrap());
        let s_a = omega.iter().map(|&w| self.value(w).unwrap()).collect();
        Self { omega, s_a }
    }
}

/// `|T(ω)|² = 64 k² sin⁴(ωT/2)/ω⁴`, written as `4k²T⁴ sinc⁴(ωT/2)` so the
/// `ω → 0` limit `4k²T⁴` is exact.
pub fn transfer_function(omega: f64, t_evol: f64, params: &PhysicsParams) -> f64 {
    let k = params.wavenumber();
    let x = 0.5 * omega * t_evol;
    let sinc = if x.abs() < 1e-4 { 1.0 - x * x / 6.0 } else { x.sin() / x };
    4.0 * k * k * t_evol.powi(4) * sinc.powi(4)
}

/// Closed form `φ² = (8π/3) k² S0 T³` for white acceleration noise.
pub fn white_noise_phase_variance(s0: f64, t_evol: f64, params: &PhysicsParams) -> f64 {
    let k = params.wavenumber();
    8.0 * PI / 3.0 * k * k * s0 * t_evol.powi(3)
}

/// Integrated vibration phase noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseNoise {
    pub phi_rms: f64,
    pub phi_sq: f64,
    /// Whether the PSD was extended beyond the table.
    pub extrapolated: bool,
}

/// `φ² = ∫ |T(ω)|² S_a(ω) dω`.
///
/// The table must cover `[2π·0.1/T, 2π·100/T]` unless `extrapolate` is set,
/// in which case `S_a` is held at its end values: flat down to `ω = 0`, and
/// above the table the tail uses the mean of `sin⁴`, `8k²S/ω_max³`.
pub fn integrate_phase_noise(
    psd: &PsdTable,
    t_evol: f64,
    params: &PhysicsParams,
    extrapolate: bool,
) -> Result<PhaseNoise> {
    if !(t_evol > 0.0 && t_evol.is_finite()) {
        return Err(Error::InvalidArgument(format!("t_evol must be positive, got {t_evol}")));
    }
    let need = (TAU * 0.1 / t_evol, TAU * 100.0 / t_evol);
    let (lo, hi) = psd.range();
    let covered = lo <= need.0 && hi >= need.1;
    if !covered && !extrapolate {
        return Err(Error::Coverage { have_lo: lo, have_hi: hi, need_lo: need.0, need_hi: need.1 });
    }

    let integrand = |w: f64| transfer_function(w, t_evol, params) * psd.value(w).unwrap_or(0.0);
    let mut total = integrate_segments(&integrand, psd.omega(), t_evol);

    let mut extrapolated = false;
    if extrapolate {
        let s_lo = psd.values()[0];
        if s_lo > 0.0 {
            let flat = |w: f64| transfer_function(w, t_evol, params) * s_lo;
            total += integrate_segments(&flat, &[0.0, lo], t_evol);
            extrapolated = true;
        }
        let s_hi = *psd.values().last().unwrap();
        if s_hi > 0.0 {
            let k = params.wavenumber();
            total += 8.0 * k * k * s_hi / hi.powi(3);
            extrapolated = true;
        }
    }
    Ok(PhaseNoise { phi_rms: total.sqrt(), phi_sq: total, extrapolated })
}

/// Integrates piecewise between the knots and the zeros `2πn/T` of `|T|²`.
fn integrate_segments<F: Fn(f64) -> f64>(f: &F, knots: &[f64], t_evol: f64) -> f64 {
    let (lo, hi) = (knots[0], *knots.last().unwrap());
    let mut points: Vec<f64> = knots.to_vec();
    let period = TAU / t_evol;
    let mut n = (lo / period).floor() as i64 + 1;
    while (n as f64) * period < hi {
        points.push(n as f64 * period);
        n += 1;
    }
    points.sort_by(f64::total_cmp);
    points.dedup();
    points
        .windows(2)
        .map(|w| {
            let simpson = (w[1] - w[0]) / 6.0 * (f(w[0]) + 4.0 * f(0.5 * (w[0] + w[1])) + f(w[1]));
            let target = (0.1 * QUADRATURE_RTOL * simpson.abs()).max(1e-300);
            quadrature::integrate(f, w[0], w[1], target).integral
        })
        .sum()
}

/// `10 log10((1/N)/φ²)`: positive when the vibration phase noise sits
/// below the atom shot-noise limit of `n_atoms`.
pub fn db_below_sql(phi_rms: f64, n_atoms: f64) -> f64 {
    10.0 * ((1.0 / n_atoms) / (phi_rms * phi_rms)).log10()
}

/// White PSD level that places the phase noise `db` below the SQL of `n_atoms`.
pub fn white_psd_for_db(db: f64, n_atoms: f64, t_evol: f64, params: &PhysicsParams) -> f64 {
    let phi_sq = 10f64.powf(-db / 10.0) / n_atoms;
    phi_sq / white_noise_phase_variance(1.0, t_evol, params)
}
