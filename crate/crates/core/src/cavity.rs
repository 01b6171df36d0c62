//! Dispersive cavity model: effective coupling from cloud geometry,
//! per-atom cavity shifts with excited-state hyperfine branching, and swept
//! homodyne probing of the dressed cavity resonance.

use std::f64::consts::TAU;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reduced Planck constant (J s).
pub const HBAR: f64 = 1.054_571_817e-34;
/// Mass of a Rb-87 atom (kg).
pub const RB87_MASS: f64 = 1.443_160_648e-25;

/// Distance from a dispersive pole below which the shifts are rejected (rad/s).
pub const POLE_MARGIN: f64 = TAU * 1.0e6;

/// Branching ratios of the probed excited-state manifold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchingRatios {
    pub b3: f64,
    pub b2: f64,
    pub b1: f64,
    pub b2_down: f64,
    pub b1_down: f64,
}

impl Default for BranchingRatios {
    fn default() -> Self {
        Self { b3: 6.0 / 15.0, b2: 3.0 / 12.0, b1: 1.0 / 60.0, b2_down: 3.0 / 12.0, b1_down: 5.0 / 12.0 }
    }
}

/// Cavity, atomic and environmental constants. Angular rates in rad/s,
/// lengths in m.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysicsParams {
    /// Maximum single-atom vacuum Rabi half-splitting.
    pub g0: f64,
    /// Cavity power decay rate.
    pub kappa: f64,
    pub fsr: f64,
    pub waist_w0: f64,
    pub length_l: f64,
    pub rayleigh_zr: f64,
    /// Probe/cavity detuning from the `F=2 -> F'=3` transition.
    pub delta_c: f64,
    /// Ground-state hyperfine splitting.
    pub omega_hf: f64,
    /// Excited-state splittings `F'=3 -> F'=2` and `F'=3 -> F'=1`.
    pub delta2: f64,
    pub delta1: f64,
    pub branching: BranchingRatios,
    /// Excited-state linewidth.
    pub gamma: f64,
    pub wavelength: f64,
    pub atom_mass: f64,
    /// Component of gravity along the cavity axis (m/s²).
    pub gravity: f64,
    /// Cavity input coupling efficiency `η_c`.
    pub coupling_efficiency: f64,
}

impl Default for PhysicsParams {
    fn default() -> Self {
        Self {
            g0: TAU * 0.4853e6,
            kappa: TAU * 56.0e3,
            fsr: TAU * 6.7879e9,
            waist_w0: 72e-6,
            length_l: 2.2e-2,
            rayleigh_zr: 2.1e-2,
            delta_c: TAU * 175.0e6,
            omega_hf: TAU * 6.834_682_611e9,
            delta2: TAU * 266.7e6,
            delta1: TAU * 423.6e6,
            branching: BranchingRatios::default(),
            gamma: TAU * 6.065e6,
            wavelength: 780.241e-9,
            atom_mass: RB87_MASS,
            gravity: 9.796,
            coupling_efficiency: 0.9,
        }
    }
}

impl PhysicsParams {
    pub fn validate(&self) -> Result<()> {
        let rates = [
            ("g0", self.g0),
            ("kappa", self.kappa),
            ("fsr", self.fsr),
            ("waist_w0", self.waist_w0),
            ("length_l", self.length_l),
            ("rayleigh_zr", self.rayleigh_zr),
            ("omega_hf", self.omega_hf),
            ("delta2", self.delta2),
            ("delta1", self.delta1),
            ("gamma", self.gamma),
            ("wavelength", self.wavelength),
            ("atom_mass", self.atom_mass),
        ];
        for (name, v) in rates {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("physics.{name} must be positive, got {v}")));
            }
        }
        if !self.delta_c.is_finite() || !self.gravity.is_finite() {
            return Err(Error::Config("physics.delta_c and physics.gravity must be finite".into()));
        }
        let b = &self.branching;
        for (name, v) in [("b3", b.b3), ("b2", b.b2), ("b1", b.b1), ("b2_down", b.b2_down), ("b1_down", b.b1_down)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::Config(format!("physics.branching.{name} must lie in (0, 1), got {v}")));
            }
        }
        if !(self.coupling_efficiency > 0.0 && self.coupling_efficiency <= 1.0) {
            return Err(Error::Config(format!(
                "physics.coupling_efficiency must lie in (0, 1], got {}",
                self.coupling_efficiency
            )));
        }
        Ok(())
    }

    /// Optical wavenumber `k = 2π/λ` (rad/m).
    pub fn wavenumber(&self) -> f64 {
        TAU / self.wavelength
    }

    /// Single-photon recoil frequency `ω_r = ħk²/2m` (rad/s).
    pub fn recoil_frequency(&self) -> f64 {
        let k = self.wavenumber();
        HBAR * k * k / (2.0 * self.atom_mass)
    }
}

/// Position and size of the atomic cloud relative to the cavity mode (m).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleGeometry {
    pub z0: f64,
    pub sigma_z: f64,
    pub r_rms: f64,
}

impl Default for EnsembleGeometry {
    fn default() -> Self {
        Self { z0: 1.0e-3, sigma_z: 0.5e-3, r_rms: 4.7e-6 }
    }
}

/// Effective coupling and the geometric correction it was derived with.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coupling {
    /// Effective single-atom coupling `g` (rad/s).
    pub g: f64,
    pub f_cor: f64,
}

/// `f_cor = (z0² + σz²)/(2 Zr²) + r_rms²/w0²`.
pub fn correction_factor(params: &PhysicsParams, geometry: &EnsembleGeometry) -> Result<f64> {
    let EnsembleGeometry { z0, sigma_z, r_rms } = *geometry;
    if [z0, sigma_z, r_rms].iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::Config(format!("geometry must be non-negative, got {geometry:?}")));
    }
    if r_rms >= params.waist_w0 {
        return Err(Error::Geometry { r_rms, waist: params.waist_w0 });
    }
    let zr = params.rayleigh_zr;
    Ok((z0 * z0 + sigma_z * sigma_z) / (2.0 * zr * zr) + (r_rms / params.waist_w0).powi(2))
}

/// Ensemble-averaged coupling `g = (g0/√2)(1 - f_cor)`.
pub fn effective_coupling(params: &PhysicsParams, geometry: &EnsembleGeometry) -> Result<Coupling> {
    let f_cor = correction_factor(params, geometry)?;
    Ok(Coupling { g: params.g0 / 2f64.sqrt() * (1.0 - f_cor), f_cor })
}

/// Cavity frequency shifts per atom (rad/s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DispersiveShifts {
    /// Shift per atom in `|↑⟩` seen by the QND probe.
    pub chi0: f64,
    /// Shift per atom in `|↓⟩`.
    pub chi_down: f64,
    /// Shift per atom in the cycling state `|F=2, m_F=2⟩`.
    pub chi2: f64,
    /// `(χ↓/2)/χ2`.
    pub epsilon: f64,
}

/// Evaluates the dispersive shifts for coupling `g` at `params.delta_c`.
pub fn dispersive_shifts(params: &PhysicsParams, g: f64) -> Result<DispersiveShifts> {
    let dc = params.delta_c;
    let up_poles = [0.0, -params.delta2, -params.delta1];
    let down_poles = [params.omega_hf - params.delta2, params.omega_hf - params.delta1];
    for pole in up_poles.iter().chain(&down_poles) {
        if (dc - pole).abs() < POLE_MARGIN {
            return Err(Error::Singularity { detuning: dc, pole: *pole, margin: POLE_MARGIN });
        }
    }
    let b = &params.branching;
    let g2 = g * g;
    let chi0 = g2 * (b.b3 / dc + b.b2 / (dc + params.delta2) + b.b1 / (dc + params.delta1));
    let chi_down = g2
        * (b.b2_down / (dc + params.delta2 - params.omega_hf)
            + b.b1_down / (dc + params.delta1 - params.omega_hf));
    let chi2 = g2 / dc;
    Ok(DispersiveShifts { chi0, chi_down, chi2, epsilon: 0.5 * chi_down / chi2 })
}

/// Single-atom cooperativity `C = 4g²/(κΓ)`.
pub fn cooperativity(params: &PhysicsParams, g: f64) -> f64 {
    4.0 * g * g / (params.kappa * params.gamma)
}

/// Collective cooperativity `N C`.
pub fn collective_cooperativity(params: &PhysicsParams, g: f64, n_atoms: f64) -> f64 {
    n_atoms * cooperativity(params, g)
}

/// Probe-frequency sweep through the dressed cavity resonance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    /// Detuning at the sweep midpoint, relative to the empty cavity (rad/s).
    pub center: f64,
    /// Sweep rate (rad/s per s).
    pub rate: f64,
    /// Sweep duration (s).
    pub duration: f64,
    pub samples: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { center: 0.0, rate: TAU * 1.5e9, duration: 150e-6, samples: 150 }
    }
}

/// One swept homodyne record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTrace {
    /// Probe detuning from the empty cavity at each sample (rad/s).
    pub detuning_grid: Vec<f64>,
    /// Reflected Q quadrature normalized to the incident field.
    pub q_quadrature: Vec<f64>,
    pub sweep_rate: f64,
    pub photons_incident: f64,
    /// Noise standard deviation per sample.
    pub noise_sigma: f64,
    pub kappa: f64,
    pub coupling_efficiency: f64,
}

/// Single-sided cavity reflection `r(Δ) = 1 - η κ/(iΔ + κ/2)`, returned as (Re, Im).
pub fn reflection(delta: f64, kappa: f64, eta: f64) -> (f64, f64) {
    let denom = delta * delta + 0.25 * kappa * kappa;
    (1.0 - eta * kappa * 0.5 * kappa / denom, eta * kappa * delta / denom)
}

/// Synthesizes the reflected Q quadrature for a resonance shifted by `shift`.
pub fn synth_sweep<R: Rng + ?Sized>(
    shift: f64,
    params: &PhysicsParams,
    sweep: &SweepConfig,
    photons: f64,
    efficiency: f64,
    rng: &mut R,
) -> Result<SweepTrace> {
    if !(photons > 0.0 && photons.is_finite()) {
        return Err(Error::InvalidArgument(format!("photon number must be positive, got {photons}")));
    }
    if !(efficiency > 0.0 && efficiency <= 1.0) {
        return Err(Error::InvalidArgument(format!("quantum efficiency must lie in (0, 1], got {efficiency}")));
    }
    if sweep.samples < 2 || !(sweep.rate > 0.0) || !(sweep.duration > 0.0) {
        return Err(Error::InvalidArgument("sweep needs positive rate, duration and ≥2 samples".into()));
    }
    let span = sweep.rate * sweep.duration;
    let step = span / (sweep.samples - 1) as f64;
    if params.kappa / step < 8.0 {
        return Err(Error::InvalidArgument(format!(
            "sweep grid too coarse: {:.1} samples per linewidth, need 8",
            params.kappa / step
        )));
    }
    let per_sample = photons / sweep.samples as f64;
    let sigma = (1.0 / (4.0 * efficiency * per_sample)).sqrt();
    let start = sweep.center - 0.5 * span;
    let detuning_grid: Vec<f64> = (0..sweep.samples).map(|i| start + step * i as f64).collect();
    let q_quadrature = detuning_grid
        .iter()
        .map(|&d| {
            let (_, q) = reflection(d - shift, params.kappa, params.coupling_efficiency);
            let z: f64 = StandardNormal.sample(rng);
            q + sigma * z
        })
        .collect();
    Ok(SweepTrace {
        detuning_grid,
        q_quadrature,
        sweep_rate: sweep.rate,
        photons_incident: photons,
        noise_sigma: sigma,
        kappa: params.kappa,
        coupling_efficiency: params.coupling_efficiency,
    })
}

/// Fitted lineshape amplitudes below this many standard errors are rejected.
pub const MIN_AMPLITUDE_SIGNIFICANCE: f64 = 2.0;

/// Fitted resonance position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepFit {
    /// Resonance shift relative to the empty cavity (rad/s).
    pub shift: f64,
    pub std_error: f64,
    pub amplitude: f64,
    pub offset: f64,
    pub residual_rms: f64,
}

/// Dispersive profile `κx/(x² + κ²/4)` and its derivative in `x`.
fn dispersive_profile(x: f64, kappa: f64) -> (f64, f64) {
    let d = x * x + 0.25 * kappa * kappa;
    (kappa * x / d, kappa * (0.25 * kappa * kappa - x * x) / (d * d))
}

/// Least-squares fit of the dispersive lineshape with free center, amplitude
/// and offset.
pub fn fit_sweep(trace: &SweepTrace) -> Result<SweepFit> {
    let x = &trace.detuning_grid;
    let y = &trace.q_quadrature;
    let n = x.len();
    if n < 4 || y.len() != n {
        return Err(Error::InvalidArgument("sweep trace needs ≥4 matching samples".into()));
    }
    let kappa = trace.kappa;

    // Profile the center over the grid; amplitude and offset are linear.
    let linear_fit = |center: f64| {
        let (mut s1, mut sf, mut sff, mut sy, mut sfy) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (xi, yi) in x.iter().zip(y) {
            let (f, _) = dispersive_profile(xi - center, kappa);
            s1 += 1.0;
            sf += f;
            sff += f * f;
            sy += yi;
            sfy += f * yi;
        }
        let det = s1 * sff - sf * sf;
        let a = (s1 * sfy - sf * sy) / det;
        let b = (sy - a * sf) / s1;
        let rss: f64 = x
            .iter()
            .zip(y)
            .map(|(xi, yi)| {
                let r = yi - b - a * dispersive_profile(xi - center, kappa).0;
                r * r
            })
            .sum();
        (a, b, rss)
    };
    let mut best = (0usize, f64::INFINITY, 0.0, 0.0);
    for (i, &c) in x.iter().enumerate() {
        let (a, b, rss) = linear_fit(c);
        if a > 0.0 && rss < best.1 {
            best = (i, rss, a, b);
        }
    }
    let edge = (0.5 * kappa / (x[1] - x[0]).abs()).ceil() as usize;
    if !best.1.is_finite() || best.0 < edge || best.0 + edge >= n {
        return Err(Error::FitFailure {
            reason: "resonance lies outside the sweep window".into(),
            residual_norm: best.1.sqrt(),
        });
    }

    // Golden-section refinement of the profiled residual between neighbours.
    let (mut lo, mut hi) = (x[best.0 - 1], x[best.0 + 1]);
    let tol = 1e-9 * kappa;
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut c1 = hi - ratio * (hi - lo);
    let mut c2 = lo + ratio * (hi - lo);
    let mut f1 = linear_fit(c1).2;
    let mut f2 = linear_fit(c2).2;
    let mut iterations = 0;
    while (hi - lo).abs() > tol {
        iterations += 1;
        if iterations > 200 {
            return Err(Error::FitFailure {
                reason: "center refinement did not converge".into(),
                residual_norm: f1.min(f2).sqrt(),
            });
        }
        if f1 < f2 {
            hi = c2;
            c2 = c1;
            f2 = f1;
            c1 = hi - ratio * (hi - lo);
            f1 = linear_fit(c1).2;
        } else {
            lo = c1;
            c1 = c2;
            f1 = f2;
            c2 = lo + ratio * (hi - lo);
            f2 = linear_fit(c2).2;
        }
    }
    let center = 0.5 * (lo + hi);
    let (amplitude, offset, rss) = linear_fit(center);
    if !(amplitude > 0.0) || !rss.is_finite() {
        return Err(Error::FitFailure { reason: "no dispersive feature found".into(), residual_norm: rss.sqrt() });
    }

    // Standard errors from the Jacobian of the full three-parameter model.
    let mut jtj = nalgebra::Matrix3::<f64>::zeros();
    for xi in x {
        let (f, df) = dispersive_profile(xi - center, kappa);
        let row = nalgebra::Vector3::new(-amplitude * df, f, 1.0);
        jtj += row * row.transpose();
    }
    let s2 = rss / (n - 3) as f64;
    let Some(cov) = jtj.try_inverse().map(|inv| inv * s2) else {
        return Err(Error::FitFailure { reason: "singular lineshape Jacobian".into(), residual_norm: rss.sqrt() });
    };
    if amplitude < MIN_AMPLITUDE_SIGNIFICANCE * cov[(1, 1)].max(0.0).sqrt() {
        return Err(Error::FitFailure {
            reason: "no significant resonance in the sweep window".into(),
            residual_norm: rss.sqrt(),
        });
    }
    let std_error = cov[(0, 0)].max(0.0).sqrt();
    Ok(SweepFit { shift: center, std_error, amplitude, offset, residual_rms: (rss / n as f64).sqrt() })
}

/// Converts a rate in rad/s to Hz.
pub fn to_hz(omega: f64) -> f64 {
    omega / TAU
}

/// Converts a frequency in Hz to rad/s.
pub fn from_hz(f: f64) -> f64 {
    f * TAU
}
