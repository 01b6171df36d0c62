//! Entangling channels and decoherence bookkeeping.
//!
//! One-axis twisting is a diagonal phase `exp(-iμ m²)`. The QND probe is a
//! Gaussian Kraus operator in the Dicke basis. Processes that leave the
//! symmetric manifold (free-space scattering, pulse loss, technical
//! dephasing) are carried in a [`ContrastLedger`] next to the pure state.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::{Binomial, Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spin::{rotate, rotation_matrix_so3, sample_jz, yz_axis, CollectiveSpinState, SpinProjectionAxis};

/// Scalar record of what the pure state does not describe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastLedger {
    /// Product of all coherence-shortening factors.
    pub coherent_fraction: f64,
    /// Atoms removed from the pseudospin.
    pub lost_atoms: u64,
    /// Extra `Jz` variance added at readout.
    pub added_jz_diffusion: f64,
    /// Pure-state mean spin minus the physical mean spin. Transported by
    /// every rotation so shortening applied mid-sequence lands on the
    /// right components at readout.
    pub mean_deficit: [f64; 3],
    /// Set when a scattering probability exceeded one and was clipped.
    pub clipped: bool,
}

impl Default for ContrastLedger {
    fn default() -> Self {
        Self { coherent_fraction: 1.0, lost_atoms: 0, added_jz_diffusion: 0.0, mean_deficit: [0.0; 3], clipped: false }
    }
}

impl ContrastLedger {
    /// Transports the deficit through the rotation `exp(-i angle n·J)`.
    pub fn rotate(&mut self, axis: [f64; 3], angle: f64) {
        let r = rotation_matrix_so3(axis, angle);
        let d = self.mean_deficit;
        self.mean_deficit = [0, 1, 2].map(|i| (0..3).map(|j| r[i][j] * d[j]).sum());
    }

    /// Scales the physical mean by `factor` on the selected components.
    pub fn shorten(&mut self, factor: f64, pure_mean: [f64; 3], components: [bool; 3]) {
        self.coherent_fraction *= factor;
        for i in 0..3 {
            if components[i] {
                let physical = pure_mean[i] - self.mean_deficit[i];
                self.mean_deficit[i] = pure_mean[i] - factor * physical;
            }
        }
    }

    /// Atoms still in the pseudospin out of `n_atoms`.
    pub fn remaining(&self, n_atoms: u32) -> u64 {
        (n_atoms as u64).saturating_sub(self.lost_atoms)
    }

    fn check(&self) {
        debug_assert!((0.0..=1.0).contains(&self.coherent_fraction));
        debug_assert!(self.added_jz_diffusion >= 0.0);
    }
}

/// Noise and calibration knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    /// Net detection efficiency `q` of the probe.
    pub quantum_efficiency: f64,
    /// `A_meas` in `σ² = A_meas/(q M)` (Jz units).
    pub imprecision_coeff: f64,
    /// Free-space scattering probability per incident photon per atom.
    pub scatter_coeff: f64,
    /// Fraction of scattering events that remove the atom from the pseudospin.
    pub raman_decorrelation_fraction: f64,
    /// Final-readout noise, dB below the projection noise `N/4`.
    pub readout_floor_db: f64,
    pub pulse_loss_prob: f64,
    /// Collective phase noise, rad rms per ms of evolution time.
    pub dephasing_coeff: f64,
    /// Fractional shot-to-shot atom-number fluctuation.
    pub atom_number_cv: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            quantum_efficiency: 0.1,
            imprecision_coeff: 7200.0,
            scatter_coeff: 1.42e-4,
            raman_decorrelation_fraction: 0.5,
            readout_floor_db: 15.0,
            pulse_loss_prob: 0.002,
            dephasing_coeff: 0.0,
            atom_number_cv: 0.02,
        }
    }
}

impl NoiseConfig {
    /// All knobs off; ideal efficiency.
    pub fn noiseless() -> Self {
        Self {
            quantum_efficiency: 1.0,
            imprecision_coeff: 0.0,
            scatter_coeff: 0.0,
            raman_decorrelation_fraction: 0.0,
            readout_floor_db: f64::INFINITY,
            pulse_loss_prob: 0.0,
            dephasing_coeff: 0.0,
            atom_number_cv: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: f64| Err(Error::Config(format!("noise.{what} out of range: {v}")));
        if !(self.quantum_efficiency > 0.0 && self.quantum_efficiency <= 1.0) {
            return bad("quantum_efficiency", self.quantum_efficiency);
        }
        if !(self.imprecision_coeff >= 0.0 && self.imprecision_coeff.is_finite()) {
            return bad("imprecision_coeff", self.imprecision_coeff);
        }
        if !(self.scatter_coeff >= 0.0 && self.scatter_coeff <= 1.0) {
            return bad("scatter_coeff", self.scatter_coeff);
        }
        if !(0.0..=1.0).contains(&self.raman_decorrelation_fraction) {
            return bad("raman_decorrelation_fraction", self.raman_decorrelation_fraction);
        }
        if self.readout_floor_db.is_nan() {
            return bad("readout_floor_db", self.readout_floor_db);
        }
        if !(0.0..1.0).contains(&self.pulse_loss_prob) {
            return bad("pulse_loss_prob", self.pulse_loss_prob);
        }
        if !(self.dephasing_coeff >= 0.0 && self.dephasing_coeff.is_finite()) {
            return bad("dephasing_coeff", self.dephasing_coeff);
        }
        if !(0.0..0.5).contains(&self.atom_number_cv) {
            return bad("atom_number_cv", self.atom_number_cv);
        }
        Ok(())
    }

    /// Readout-floor variance as a fraction of the projection noise.
    pub fn readout_floor_fraction(&self) -> f64 {
        10f64.powf(-self.readout_floor_db / 10.0)
    }
}

/// One-axis-twisting settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TwistSpec {
    /// Total twist `μ = ∫χ dt` over both echo arms (rad).
    pub mu: f64,
    /// Twisting rate (rad/s); sets the interaction time `μ/χ`.
    pub chi_oat: f64,
    pub echo: bool,
}

impl Default for TwistSpec {
    fn default() -> Self {
        Self { mu: 0.0, chi_oat: 2.0 * PI * 10.0, echo: true }
    }
}

impl TwistSpec {
    pub fn validate(&self) -> Result<()> {
        if !self.mu.is_finite() || !(self.chi_oat > 0.0 && self.chi_oat.is_finite()) {
            return Err(Error::Config(format!("twist needs finite mu and chi_oat > 0, got {self:?}")));
        }
        Ok(())
    }

    /// Interaction time `μ/χ` (s).
    pub fn duration(&self) -> f64 {
        self.mu.abs() / self.chi_oat
    }
}

/// `c_m -> e^{-iμm²} c_m`.
fn twist_phase(state: &mut CollectiveSpinState, mu: f64) {
    if mu == 0.0 {
        return;
    }
    let j = state.total_spin();
    for (k, c) in state.amplitudes_mut().iter_mut().enumerate() {
        let m = k as f64 - j;
        *c *= C64::from_polar(1.0, -mu * m * m);
    }
}

/// Azimuth of the mean spin in the x–y plane (0 if the mean has no
/// transverse component).
pub fn bloch_azimuth(state: &CollectiveSpinState) -> f64 {
    let m = state.moments().mean;
    if m[0] == 0.0 && m[1] == 0.0 { 0.0 } else { m[1].atan2(m[0]) }
}

/// Applies one-axis twisting.
///
/// With `echo`, the twist is split around a π pulse about the Bloch-vector
/// axis. Since `m²` is invariant under the flip the result equals the π
/// pulse applied after the full twist.
pub fn twist(state: &CollectiveSpinState, spec: &TwistSpec) -> Result<CollectiveSpinState> {
    spec.validate()?;
    let mut out = state.clone();
    if spec.echo {
        let axis = SpinProjectionAxis::equatorial(bloch_azimuth(state));
        twist_phase(&mut out, spec.mu / 2.0);
        out = rotate(&out, PI, axis)?;
        twist_phase(&mut out, spec.mu / 2.0);
    } else {
        twist_phase(&mut out, spec.mu);
    }
    Ok(out)
}

/// Result of [`optimal_twist_analysis`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwistOptimum {
    /// Minimum variance in the y–z plane normalized to `N/4`.
    pub v_min: f64,
    /// Angle of the minimum from `+z` towards `+y` (rad).
    pub alpha0: f64,
    /// Maximum normalized variance (anti-squeezed quadrature).
    pub v_max: f64,
}

/// Squeezing of a CSS along `+x` after a twist `μ` (no echo).
pub fn optimal_twist_analysis(n_atoms: u32, mu: f64) -> Result<TwistOptimum> {
    if n_atoms < 2 {
        return Err(Error::InvalidArgument("twist analysis needs at least 2 atoms".into()));
    }
    let css = crate::spin::new_css(n_atoms, PI / 2.0, 0.0)?;
    let state = twist(&css, &TwistSpec { mu, echo: false, ..Default::default() })?;
    let (v_min, v_max, alpha0) = state.moments().yz_principal();
    let sql = n_atoms as f64 / 4.0;
    Ok(TwistOptimum { v_min: v_min / sql, alpha0, v_max: v_max / sql })
}

/// Variance along `cos α z + sin α y`, normalized to `N/4`.
pub fn variance_at_alpha(state: &CollectiveSpinState, alpha: f64) -> f64 {
    state.moments().variance_along(yz_axis(alpha)) / (state.n_atoms() as f64 / 4.0)
}

/// Weak `Jz` measurement with Gaussian imprecision `sigma` (Jz units).
///
/// Samples `x ~ Σ_m |c_m|² N(m, σ²)` and conditions with the Kraus operator
/// `exp(-(m - x)²/(4σ²))`.
pub fn qnd_measure<R: Rng + ?Sized>(
    state: &CollectiveSpinState,
    sigma: f64,
    rng: &mut R,
) -> Result<(f64, CollectiveSpinState)> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidArgument(format!("QND imprecision must be positive, got {sigma}")));
    }
    let m = sample_jz(state, rng).value();
    let z: f64 = StandardNormal.sample(rng);
    let x = m + sigma * z;
    let mut out = state.clone();
    let j = out.total_spin();
    let inv = 1.0 / (4.0 * sigma * sigma);
    // Relative to the sampled level so the largest factor stays near one.
    for (k, c) in out.amplitudes_mut().iter_mut().enumerate() {
        let mk = k as f64 - j;
        *c *= (-((mk - x).powi(2) - (m - x).powi(2)) * inv).exp();
    }
    out.renormalize();
    Ok((x, out))
}

/// Measurement imprecision `σ = sqrt(A_meas/(q M))` for `m_photons` incident photons.
pub fn imprecision_from_photons(m_photons: f64, noise: &NoiseConfig) -> Result<f64> {
    if !(m_photons > 0.0) {
        return Err(Error::InvalidArgument(format!("photon number must be positive, got {m_photons}")));
    }
    Ok((noise.imprecision_coeff / (noise.quantum_efficiency * m_photons)).sqrt())
}

/// Books free-space scattering of `m_photons` probe photons.
///
/// Each remaining atom scatters with `p = β M`. The transverse coherence
/// shrinks by `1 - p`; a binomial draw with probability
/// `p · raman_decorrelation_fraction` removes atoms from the pseudospin, and
/// the expected number of such atoms adds `p N f_R / 4` of `Jz` diffusion.
/// The state vector is not touched.
pub fn apply_scattering<R: Rng + ?Sized>(
    state: &CollectiveSpinState,
    ledger: &ContrastLedger,
    m_photons: f64,
    noise: &NoiseConfig,
    rng: &mut R,
) -> Result<ContrastLedger> {
    let mut out = ledger.clone();
    if m_photons == 0.0 || noise.scatter_coeff == 0.0 {
        return Ok(out);
    }
    if !(m_photons > 0.0) {
        return Err(Error::InvalidArgument(format!("photon number must be non-negative, got {m_photons}")));
    }
    let mut p = noise.scatter_coeff * m_photons;
    if p > 1.0 {
        p = 1.0;
        out.clipped = true;
    }
    let remaining = ledger.remaining(state.n_atoms());
    let p_lost = p * noise.raman_decorrelation_fraction;
    if p_lost > 0.0 && remaining > 0 {
        let lost = Binomial::new(remaining, p_lost).map_err(|e| Error::InvalidArgument(e.to_string()))?.sample(rng);
        out.lost_atoms += lost;
    }
    out.added_jz_diffusion += p * remaining as f64 * noise.raman_decorrelation_fraction / 4.0;
    out.shorten(1.0 - p, state.moments().mean, [true, true, false]);
    out.check();
    Ok(out)
}

/// Books an imperfect light pulse: each remaining atom is lost with
/// `pulse_loss_prob`, shrinking the mean spin and adding the partition
/// noise of the removed atoms.
pub fn apply_pulse_loss<R: Rng + ?Sized>(
    state: &CollectiveSpinState,
    ledger: &ContrastLedger,
    noise: &NoiseConfig,
    rng: &mut R,
) -> Result<ContrastLedger> {
    let mut out = ledger.clone();
    let remaining = ledger.remaining(state.n_atoms());
    if noise.pulse_loss_prob == 0.0 || remaining == 0 {
        return Ok(out);
    }
    let lost = Binomial::new(remaining, noise.pulse_loss_prob)
        .map_err(|e| Error::InvalidArgument(e.to_string()))?
        .sample(rng);
    out.lost_atoms += lost;
    out.added_jz_diffusion += lost as f64 / 4.0;
    let factor = 1.0 - lost as f64 / remaining as f64;
    out.shorten(factor, state.moments().mean, [true, true, true]);
    out.check();
    Ok(out)
}

/// Collective phase noise angle for an evolution of `t_evol` seconds.
pub fn dephasing_angle<R: Rng + ?Sized>(t_evol: f64, noise: &NoiseConfig, rng: &mut R) -> f64 {
    let sd = noise.dephasing_coeff * t_evol * 1e3;
    if sd == 0.0 {
        return 0.0;
    }
    Normal::new(0.0, sd).map(|d| d.sample(rng)).unwrap_or(0.0)
}

/// Free evolution: rotation about `z` by the signal phase plus random
/// collective dephasing. Returns the state and the total angle applied.
pub fn free_evolve<R: Rng + ?Sized>(
    state: &CollectiveSpinState,
    t_evol: f64,
    signal_phase: f64,
    noise: &NoiseConfig,
    rng: &mut R,
) -> Result<(CollectiveSpinState, f64)> {
    if !(t_evol >= 0.0) || !signal_phase.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "free evolution needs t_evol ≥ 0 and a finite phase, got {t_evol}, {signal_phase}"
        )));
    }
    let angle = signal_phase + dephasing_angle(t_evol, noise, rng);
    Ok((rotate(state, angle, SpinProjectionAxis::Z)?, angle))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin::{expect, new_css};
    use nalgebra::DMatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn rng(seed: u64) -> ChaCha20Rng {
        ChaCha20Rng::seed_from_u64(seed)
    }

    /// Dense Jx, Jy, Jz built from the ladder operator.
    fn dense_j(n: u32) -> [DMatrix<C64>; 3] {
        let dim = n as usize + 1;
        let j = n as f64 / 2.0;
        let mut jp = DMatrix::<C64>::zeros(dim, dim);
        let mut jz = DMatrix::<C64>::zeros(dim, dim);
        for k in 0..dim {
            let m = k as f64 - j;
            jz[(k, k)] = C64::new(m, 0.0);
            if k + 1 < dim {
                jp[(k + 1, k)] = C64::new((j * (j + 1.0) - m * (m + 1.0)).sqrt(), 0.0);
            }
        }
        let jm = jp.adjoint();
        let jx = (&jp + &jm) * C64::new(0.5, 0.0);
        let jy = (&jp - &jm) * C64::new(0.0, -0.5);
        [jx, jy, jz]
    }

    fn dense_expect(psi: &nalgebra::DVector<C64>, op: &DMatrix<C64>) -> f64 {
        (psi.adjoint() * op * psi)[(0, 0)].re
    }

    #[test]
    fn zero_twist_is_identity() {
        let s = new_css(30, 1.0, 0.2).unwrap();
        let t = twist(&s, &TwistSpec { mu: 0.0, echo: false, ..Default::default() }).unwrap();
        assert_eq!(s, t);
    }

    #[test]
    fn single_atom_twist_is_global_phase() {
        let s = new_css(1, 0.7, 0.4).unwrap();
        let t = twist(&s, &TwistSpec { mu: 0.9, echo: false, ..Default::default() }).unwrap();
        assert!((s.overlap(&t).norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn twisted_variance_matches_dense_oracle() {
        let n = 20;
        let [_, jy, jz] = dense_j(n);
        for i in 1..=10 {
            let mu = 0.05 * i as f64;
            let opt = optimal_twist_analysis(n, mu).unwrap();
            // Dense: twist a CSS(+x) vector, then scan the y–z covariance.
            let css = new_css(n, PI / 2.0, 0.0).unwrap();
            let psi = nalgebra::DVector::from_iterator(
                css.dim(),
                css.amplitudes().iter().enumerate().map(|(k, c)| {
                    let m = k as f64 - n as f64 / 2.0;
                    c * C64::from_polar(1.0, -mu * m * m)
                }),
            );
            let yy = dense_expect(&psi, &(&jy * &jy)) - dense_expect(&psi, &jy).powi(2);
            let zz = dense_expect(&psi, &(&jz * &jz)) - dense_expect(&psi, &jz).powi(2);
            let yz = 0.5 * dense_expect(&psi, &(&jy * &jz + &jz * &jy))
                - dense_expect(&psi, &jy) * dense_expect(&psi, &jz);
            let vmin = 0.5 * (yy + zz) - (0.25 * (yy - zz).powi(2) + yz * yz).sqrt();
            assert!((opt.v_min - vmin / (n as f64 / 4.0)).abs() < 1e-9, "mu={mu}");
            let direct = variance_at_alpha(
                &twist(&css, &TwistSpec { mu, echo: false, ..Default::default() }).unwrap(),
                opt.alpha0,
            );
            assert!((direct - opt.v_min).abs() < 1e-9);
        }
    }

    #[test]
    fn echo_equals_flip_after_direct_twist() {
        for n in [7u32, 20, 51] {
            let css = new_css(n, PI / 2.0, 0.0).unwrap();
            let mu = 0.3 / n as f64;
            let echo = twist(&css, &TwistSpec { mu, echo: true, ..Default::default() }).unwrap();
            let direct = twist(&css, &TwistSpec { mu, echo: false, ..Default::default() }).unwrap();
            let flipped = rotate(&direct, PI, SpinProjectionAxis::X).unwrap();
            assert!((echo.overlap(&flipped).norm() - 1.0).abs() < 1e-10);
            let a = echo.moments().yz_principal();
            let b = direct.moments().yz_principal();
            assert!((a.0 - b.0).abs() < 1e-9 && (a.2 - b.2).abs() < 1e-9);
        }
    }

    #[test]
    fn no_twist_means_flat_variance() {
        let o = optimal_twist_analysis(40, 0.0).unwrap();
        assert!((o.v_min - 1.0).abs() < 1e-12 && (o.v_max - 1.0).abs() < 1e-12);
    }

    #[test]
    fn alpha0_shrinks_with_twist() {
        let mut last = f64::INFINITY;
        for i in 1..=20 {
            let o = optimal_twist_analysis(50, 0.005 * i as f64).unwrap();
            assert!(o.alpha0.abs() < last, "step {i}");
            last = o.alpha0.abs();
        }
    }

    #[test]
    fn twist_preserves_populations() {
        let s = new_css(25, 1.3, 0.0).unwrap();
        let t = twist(&s, &TwistSpec { mu: 0.2, echo: false, ..Default::default() }).unwrap();
        for (a, b) in s.probabilities().iter().zip(t.probabilities()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn huge_sigma_leaves_state_alone() {
        // The Kraus tilt changes amplitudes at first order by (m - ⟨m⟩) x/(2σ²).
        let s = new_css(30, PI / 2.0, 0.0).unwrap();
        let mut r = rng(1);
        for scale in [1e6, 1e9] {
            let sigma = scale * 30.0;
            let (x, t) = qnd_measure(&s, sigma, &mut r).unwrap();
            assert!(x.abs() < 5.0 * sigma);
            let bound = 15.0 * (x.abs() + sigma) / (2.0 * sigma * sigma);
            for (a, b) in s.amplitudes().iter().zip(t.amplitudes()) {
                assert!((a - b).norm() < bound.max(1e-12));
            }
            if scale == 1e9 {
                assert!(s.amplitudes().iter().zip(t.amplitudes()).all(|(a, b)| (a - b).norm() < 1e-9));
            }
        }
    }

    #[test]
    fn tiny_sigma_projects() {
        let s = new_css(30, PI / 2.0, 0.0).unwrap();
        let mut r = rng(2);
        let (x, t) = qnd_measure(&s, 1e-3, &mut r).unwrap();
        let p = t.probabilities();
        let k = p.iter().cloned().enumerate().max_by(|a, b| a.1.total_cmp(&b.1)).unwrap().0;
        assert!(p[k] > 1.0 - 1e-12);
        let (x2, _) = qnd_measure(&t, 1e-3, &mut r).unwrap();
        assert!((x.round() - x2.round()).abs() < 1e-9);
    }

    #[test]
    fn posterior_variance_shrinks_as_gaussian_update() {
        let n = 50;
        let s = new_css(n, PI / 2.0, 0.0).unwrap();
        let v0 = n as f64 / 4.0;
        let sigma2: f64 = 5.0;
        let mut r = rng(3);
        let trials = 2000;
        let vals: Vec<f64> =
            (0..trials).map(|_| expect(&qnd_measure(&s, sigma2.sqrt(), &mut r).unwrap().1, SpinProjectionAxis::Z).1).collect();
        let mean = vals.iter().sum::<f64>() / trials as f64;
        let sd = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (trials - 1) as f64).sqrt();
        let want = v0 * sigma2 / (v0 + sigma2);
        assert!((mean - want).abs() < 3.0 * sd / (trials as f64).sqrt() + 1e-3, "{mean} vs {want}");
    }

    /// Asymptotic Kolmogorov survival function.
    fn ks_pvalue(d: f64, n: usize) -> f64 {
        let l = d * (n as f64).sqrt();
        let mut p = 0.0;
        for k in 1..100 {
            let term = 2.0 * (-2.0 * (k * k) as f64 * l * l).exp();
            p += if k % 2 == 1 { term } else { -term };
        }
        p.clamp(0.0, 1.0)
    }

    #[test]
    fn outcome_marginal_is_prior_convolved_with_noise() {
        use statrs::distribution::{ContinuousCDF, Normal as SNormal};
        let n = 30;
        let s = new_css(n, 1.2, 0.0).unwrap();
        let sigma = 1.7;
        let mut r = rng(4);
        let mut xs: Vec<f64> = (0..10_000).map(|_| qnd_measure(&s, sigma, &mut r).unwrap().0).collect();
        xs.sort_by(f64::total_cmp);
        let probs = s.probabilities();
        let std = SNormal::new(0.0, 1.0).unwrap();
        let cdf = |x: f64| -> f64 {
            probs.iter().enumerate().map(|(k, p)| p * std.cdf((x - s.m_at(k)) / sigma)).sum()
        };
        let nx = xs.len() as f64;
        let d = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = cdf(x);
                (f - i as f64 / nx).abs().max(((i + 1) as f64 / nx - f).abs())
            })
            .fold(0.0, f64::max);
        assert!(ks_pvalue(d, xs.len()) > 0.01, "D = {d}");
    }

    #[test]
    fn successive_outcomes_correlate() {
        let s = new_css(100, PI / 2.0, 0.0).unwrap();
        let mut r = rng(5);
        let pairs: Vec<(f64, f64)> = (0..3000)
            .map(|_| {
                let (x1, t) = qnd_measure(&s, 3.0, &mut r).unwrap();
                let (x2, _) = qnd_measure(&t, 3.0, &mut r).unwrap();
                (x1, x2)
            })
            .collect();
        let var = |v: Vec<f64>| {
            let m = v.iter().sum::<f64>() / v.len() as f64;
            v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
        };
        let v1 = var(pairs.iter().map(|p| p.0).collect());
        let v2 = var(pairs.iter().map(|p| p.1).collect());
        let vd = var(pairs.iter().map(|p| p.0 - p.1).collect());
        assert!(vd < v1 + v2);
        assert!(vd < v1);
    }

    #[test]
    fn imprecision_scaling() {
        let noise = NoiseConfig::default();
        let s1 = imprecision_from_photons(600.0, &noise).unwrap();
        let s2 = imprecision_from_photons(1200.0, &noise).unwrap();
        assert!((s2 * s2 / (s1 * s1) - 0.5).abs() < 1e-12);
        let q1 = NoiseConfig { quantum_efficiency: 1.0, ..noise.clone() };
        let r = imprecision_from_photons(600.0, &q1).unwrap().powi(2) / s1.powi(2);
        assert!((r - 0.1).abs() < 1e-12);
        assert!(imprecision_from_photons(0.0, &noise).is_err());
    }

    #[test]
    fn scattering_bookkeeping() {
        let s = new_css(1000, PI / 2.0, 0.0).unwrap();
        let l0 = ContrastLedger::default();
        let noise = NoiseConfig { scatter_coeff: 1e-4, ..Default::default() };
        assert_eq!(apply_scattering(&s, &l0, 0.0, &noise, &mut rng(6)).unwrap(), l0);
        let l = apply_scattering(&s, &l0, 1000.0, &noise, &mut rng(6)).unwrap();
        assert!((l.coherent_fraction - 0.9).abs() < 1e-12);
        assert!((l.mean_deficit[0] - 50.0).abs() < 1e-9);
        assert!(l.lost_atoms > 20 && l.lost_atoms < 80);
        let clipped = apply_scattering(&s, &l0, 2e4, &noise, &mut rng(6)).unwrap();
        assert!(clipped.clipped && clipped.coherent_fraction == 0.0);
    }

    #[test]
    fn ledger_deficit_follows_rotations() {
        let mut l = ContrastLedger { mean_deficit: [1.0, 0.0, 0.0], ..Default::default() };
        l.rotate([0.0, 0.0, 1.0], PI / 2.0);
        assert!((l.mean_deficit[1] - 1.0).abs() < 1e-15 && l.mean_deficit[0].abs() < 1e-15);
    }

    #[test]
    fn evolve_fringe_geometry() {
        let n = 100;
        let s = new_css(n, PI / 2.0, 0.0).unwrap();
        let noise = NoiseConfig::noiseless();
        let (same, _) = free_evolve(&s, 0.0, 0.0, &noise, &mut rng(7)).unwrap();
        assert_eq!(same, s);
        for phi in [0.02, 0.5, -1.1] {
            let (t, angle) = free_evolve(&s, 1e-3, phi, &noise, &mut rng(7)).unwrap();
            assert_eq!(angle, phi);
            let out = rotate(&t, PI / 2.0, SpinProjectionAxis::X).unwrap();
            let (jz, _) = expect(&out, SpinProjectionAxis::Z);
            assert!((jz - 50.0 * phi.sin()).abs() < 1e-9);
        }
    }

    #[test]
    fn dephasing_spread_grows_linearly() {
        let noise = NoiseConfig { dephasing_coeff: 0.03, ..NoiseConfig::noiseless() };
        let mut r = rng(8);
        let draws: Vec<f64> = (0..20_000).map(|_| dephasing_angle(2e-3, &noise, &mut r)).collect();
        let sd = (draws.iter().map(|x| x * x).sum::<f64>() / draws.len() as f64).sqrt();
        assert!((sd / 0.06 - 1.0).abs() < 0.03);
    }

    #[test]
    fn pulse_loss_shortens_and_diffuses() {
        let s = new_css(1000, PI / 2.0, 0.0).unwrap();
        let noise = NoiseConfig { pulse_loss_prob: 0.01, ..Default::default() };
        let l = apply_pulse_loss(&s, &ContrastLedger::default(), &noise, &mut rng(9)).unwrap();
        assert!(l.lost_atoms > 0);
        assert!((l.added_jz_diffusion - l.lost_atoms as f64 / 4.0).abs() < 1e-12);
        assert!((l.coherent_fraction - (1.0 - l.lost_atoms as f64 / 1000.0)).abs() < 1e-12);
    }

    #[test]
    fn noise_validation() {
        assert!(NoiseConfig::default().validate().is_ok());
        assert!(NoiseConfig::noiseless().validate().is_ok());
        assert!(NoiseConfig { quantum_efficiency: 0.0, ..Default::default() }.validate().is_err());
        assert!(NoiseConfig { pulse_loss_prob: 1.5, ..Default::default() }.validate().is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn channels_preserve_norm(n in 1u32..60, theta in 0.0..PI, mu in -1.0f64..1.0, sigma in 0.05f64..20.0, seed in any::<u64>()) {
                let s = new_css(n, theta, 0.3).unwrap();
                let t = twist(&s, &TwistSpec { mu, echo: true, ..Default::default() }).unwrap();
                prop_assert!((t.norm_sqr() - 1.0).abs() < 1e-10);
                let (_, q) = qnd_measure(&t, sigma, &mut rng(seed)).unwrap();
                prop_assert!((q.norm_sqr() - 1.0).abs() < 1e-10);
            }

            #[test]
            fn expected_posterior_variance_not_larger(n in 2u32..40, sigma in 0.3f64..5.0, seed in any::<u64>()) {
                let s = new_css(n, PI / 2.0, 0.0).unwrap();
                let v0 = expect(&s, SpinProjectionAxis::Z).1;
                let mut r = rng(seed);
                let mean: f64 = (0..200).map(|_| expect(&qnd_measure(&s, sigma, &mut r).unwrap().1, SpinProjectionAxis::Z).1).sum::<f64>() / 200.0;
                prop_assert!(mean <= v0 + 1e-9);
            }
        }
    }
}
