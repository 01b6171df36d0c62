//! Collective pseudospin states on the symmetric Dicke manifold.
//!
//! A state of `N` two-level atoms is stored as `N + 1` complex amplitudes
//! `c_m`, `m = -J..=J`, `J = N/2`. Index `k` of the amplitude vector holds
//! `m = k - J`; projections are carried as [`HalfInteger`] (twice `m`) so
//! odd atom numbers need no floating-point keys.

mod moments;
mod rotation;

use std::f64::consts::{PI, TAU};

use num_complex::Complex64 as C64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use moments::SpinMoments;
pub use rotation::{rotate, rotate_in_place, rotation_matrix_so3};

/// Tolerance on `sum |c_m|^2 = 1` maintained by every operation.
pub const NORM_TOLERANCE: f64 = 1e-12;

/// An integer or half-integer spin projection, stored as `2m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct HalfInteger(pub i64);

impl HalfInteger {
    pub fn from_twice(twice: i64) -> Self {
        Self(twice)
    }

    pub fn twice(self) -> i64 {
        self.0
    }

    pub fn value(self) -> f64 {
        self.0 as f64 / 2.0
    }
}

/// Axis for rotations and spin projections.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpinProjectionAxis {
    X,
    Y,
    Z,
    /// Axis in the x-y plane at the given azimuth (rad), `cos φ x + sin φ y`.
    Equatorial(f64),
}

impl SpinProjectionAxis {
    /// Equatorial axis with the azimuth wrapped to `[0, 2π)`.
    pub fn equatorial(azimuth: f64) -> Self {
        SpinProjectionAxis::Equatorial(wrap_angle(azimuth))
    }

    /// Azimuth of an equatorial axis, `None` for `Z`.
    pub fn azimuth(&self) -> Option<f64> {
        match *self {
            SpinProjectionAxis::X => Some(0.0),
            SpinProjectionAxis::Y => Some(PI / 2.0),
            SpinProjectionAxis::Z => None,
            SpinProjectionAxis::Equatorial(phi) => Some(wrap_angle(phi)),
        }
    }

    pub fn unit_vector(&self) -> [f64; 3] {
        match self.azimuth() {
            Some(phi) => [phi.cos(), phi.sin(), 0.0],
            None => [0.0, 0.0, 1.0],
        }
    }
}

/// Wraps an angle to `[0, 2π)`.
pub fn wrap_angle(angle: f64) -> f64 {
    let w = angle.rem_euclid(TAU);
    if w >= TAU { 0.0 } else { w }
}

/// Unit vector at angle `alpha` from `+z` towards `+y`: `cos α z + sin α y`.
///
/// Measuring `Jz` after a rotation by `alpha` about `x` samples the
/// projection of the original state onto this axis.
pub fn yz_axis(alpha: f64) -> [f64; 3] {
    [0.0, alpha.sin(), alpha.cos()]
}

/// Pure collective state of `n_atoms` pseudospins in the symmetric subspace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollectiveSpinState {
    n_atoms: u32,
    amplitudes: Vec<C64>,
}

impl CollectiveSpinState {
    /// Builds a state from raw amplitudes ordered `m = -J..=J`, normalizing them.
    pub fn from_amplitudes(n_atoms: u32, amplitudes: Vec<C64>) -> Result<Self> {
        if n_atoms == 0 {
            return Err(Error::InvalidArgument("n_atoms must be at least 1".into()));
        }
        if amplitudes.len() != n_atoms as usize + 1 {
            return Err(Error::InvalidArgument(format!(
                "expected {} amplitudes for {} atoms, got {}",
                n_atoms + 1,
                n_atoms,
                amplitudes.len()
            )));
        }
        if amplitudes.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::InvalidArgument("non-finite amplitude".into()));
        }
        let mut state = Self { n_atoms, amplitudes };
        if state.norm_sqr() == 0.0 {
            return Err(Error::InvalidArgument("zero vector".into()));
        }
        state.renormalize();
        Ok(state)
    }

    /// Dicke state `|J, m⟩` with `m = twice_m / 2`.
    pub fn dicke(n_atoms: u32, m: HalfInteger) -> Result<Self> {
        if n_atoms == 0 {
            return Err(Error::InvalidArgument("n_atoms must be at least 1".into()));
        }
        let n = n_atoms as i64;
        let k = (m.twice() + n) / 2;
        if (m.twice() + n) % 2 != 0 || !(0..=n).contains(&k) {
            return Err(Error::InvalidArgument(format!(
                "m = {} is not a projection of J = {}",
                m.value(),
                n as f64 / 2.0
            )));
        }
        let mut amplitudes = vec![C64::new(0.0, 0.0); n_atoms as usize + 1];
        amplitudes[k as usize] = C64::new(1.0, 0.0);
        Ok(Self { n_atoms, amplitudes })
    }

    pub fn n_atoms(&self) -> u32 {
        self.n_atoms
    }

    /// Total spin `J = N/2`.
    pub fn total_spin(&self) -> f64 {
        self.n_atoms as f64 / 2.0
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub(crate) fn amplitudes_mut(&mut self) -> &mut [C64] {
        &mut self.amplitudes
    }

    /// Projection `m` held at amplitude index `k`.
    pub fn m_at(&self, k: usize) -> f64 {
        k as f64 - self.total_spin()
    }

    pub fn projection_at(&self, k: usize) -> HalfInteger {
        HalfInteger(2 * k as i64 - self.n_atoms as i64)
    }

    /// `|c_m|^2` ordered `m = -J..=J`.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|c| c.norm_sqr()).collect()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|c| c.norm_sqr()).sum()
    }

    pub(crate) fn renormalize(&mut self) {
        let norm = self.norm_sqr().sqrt();
        for c in &mut self.amplitudes {
            *c /= norm;
        }
    }

    /// `⟨self|other⟩`.
    pub fn overlap(&self, other: &Self) -> C64 {
        assert_eq!(self.n_atoms, other.n_atoms, "overlap between different atom numbers");
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// First and second moments of the collective spin.
    pub fn moments(&self) -> SpinMoments {
        SpinMoments::of(self)
    }
}

/// Coherent spin state pointing at `(polar, azimuth)` on the Bloch sphere.
///
/// Amplitudes are `sqrt(C(N, J+m)) cos^{J+m}(θ/2) sin^{J-m}(θ/2) e^{-imφ}`,
/// i.e. `e^{-iφJz} e^{-iθJy} |J, J⟩`. Evaluated in log space so large `N`
/// does not overflow the binomial coefficients.
pub fn new_css(n_atoms: u32, polar: f64, azimuth: f64) -> Result<CollectiveSpinState> {
    if n_atoms == 0 {
        return Err(Error::InvalidArgument("n_atoms must be at least 1".into()));
    }
    if !polar.is_finite() || !azimuth.is_finite() {
        return Err(Error::InvalidArgument("non-finite angle".into()));
    }
    let n = n_atoms as usize;
    let ln_fact = ln_factorials(n);
    let (c, s) = ((polar / 2.0).cos(), (polar / 2.0).sin());
    let (ln_c, ln_s) = (c.abs().ln(), s.abs().ln());
    let j = n as f64 / 2.0;
    let amplitudes = (0..=n)
        .map(|k| {
            let (up, down) = (k, n - k);
            let mut ln_mag = 0.5 * (ln_fact[n] - ln_fact[k] - ln_fact[n - k]);
            if up > 0 {
                ln_mag += up as f64 * ln_c;
            }
            if down > 0 {
                ln_mag += down as f64 * ln_s;
            }
            let mut mag = ln_mag.exp();
            if (c < 0.0 && up % 2 == 1) ^ (s < 0.0 && down % 2 == 1) {
                mag = -mag;
            }
            let m = k as f64 - j;
            C64::from_polar(mag, -m * azimuth)
        })
        .collect();
    let mut state = CollectiveSpinState { n_atoms, amplitudes };
    state.renormalize();
    Ok(state)
}

pub(crate) fn ln_factorials(n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for i in 1..=n {
        acc += (i as f64).ln();
        out.push(acc);
    }
    out
}

/// Exact mean and variance of the spin projection along `axis`.
pub fn expect(state: &CollectiveSpinState, axis: SpinProjectionAxis) -> (f64, f64) {
    let moments = state.moments();
    let n = axis.unit_vector();
    (moments.mean_along(n), moments.variance_along(n))
}

/// Draws a projective `Jz` outcome with probability `|c_m|^2`.
///
/// The state is left untouched; callers decide whether to collapse it.
pub fn sample_jz<R: Rng + ?Sized>(state: &CollectiveSpinState, rng: &mut R) -> HalfInteger {
    let u: f64 = rng.random::<f64>() * state.norm_sqr();
    let mut acc = 0.0;
    let mut last_nonzero = 0;
    for (k, c) in state.amplitudes.iter().enumerate() {
        let p = c.norm_sqr();
        if p > 0.0 {
            last_nonzero = k;
        }
        acc += p;
        if u < acc {
            return state.projection_at(k);
        }
    }
    state.projection_at(last_nonzero)
}

/// Repeated `Jz` sampling from one state via a cumulative table.
#[derive(Debug, Clone)]
pub struct JzSampler {
    cdf: Vec<f64>,
    j: f64,
}

impl JzSampler {
    pub fn new(state: &CollectiveSpinState) -> Self {
        let mut acc = 0.0;
        let cdf = state
            .amplitudes
            .iter()
            .map(|c| {
                acc += c.norm_sqr();
                acc
            })
            .collect();
        Self { cdf, j: state.total_spin() }
    }

    /// Draws `m` (as a float).
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let total = *self.cdf.last().unwrap_or(&0.0);
        let u = rng.random::<f64>() * total;
        let k = self.cdf.partition_point(|&c| c <= u).min(self.cdf.len() - 1);
        k as f64 - self.j
    }
}

/// Husimi quasi-probability `Q(θ, φ) = |⟨θ, φ|ψ⟩|^2` on a polar × azimuth grid.
///
/// Rows follow `polar_grid`, columns `azimuth_grid`. With the measure
/// `(N + 1)/(4π) dΩ` the distribution integrates to one.
pub fn husimi_q(
    state: &CollectiveSpinState,
    polar_grid: &[f64],
    azimuth_grid: &[f64],
) -> Result<Vec<Vec<f64>>> {
    if polar_grid.is_empty() || azimuth_grid.is_empty() {
        return Err(Error::InvalidArgument("Husimi grids must be non-empty".into()));
    }
    polar_grid
        .iter()
        .map(|&theta| {
            // Phases of the coherent state factor out of the polar profile.
            let profile = new_css(state.n_atoms, theta, 0.0)?;
            Ok(azimuth_grid
                .iter()
                .map(|&phi| {
                    let amp: C64 = profile
                        .amplitudes
                        .iter()
                        .zip(&state.amplitudes)
                        .enumerate()
                        .map(|(k, (a, b))| {
                            let m = state.m_at(k);
                            a.conj() * C64::from_polar(1.0, m * phi) * b
                        })
                        .sum();
                    amp.norm_sqr().min(1.0)
                })
                .collect())
        })
        .collect()
}
