//! Axial momentum bookkeeping for two-photon Raman and Bragg pulses.
//!
//! Momenta are in units of ħk on a uniform grid whose spacing divides 2ħk, so
//! a two-photon kick is an exact index shift. A pulse whose two-photon
//! detuning is `δ` resonantly couples the pair `(p, p + 2)` with
//! `4 ω_r p = δ` (the recoil shift of the pair is absorbed into the
//! detuning origin); pairs are addressed within ±1 ħk of that base.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::cavity::PhysicsParams;
use crate::error::{Error, Result};

/// Survival below which a velocity selection is reported as empty.
pub const MIN_SURVIVAL: f64 = 1e-6;

/// Gravity chirp rate `b = 2 k g∥` (rad/s per s).
pub fn chirp_rate(params: &PhysicsParams) -> f64 {
    2.0 * params.wavenumber() * params.gravity
}

/// Two-photon Doppler detuning `δ(p) = 4 ω_r p` for axial momentum `p` (ħk).
pub fn doppler_detuning(p: f64, params: &PhysicsParams) -> f64 {
    4.0 * params.recoil_frequency() * p
}

/// Reference frame for the interferometer phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frame {
    Lab,
    Falling,
}

/// Mach–Zehnder phase for pulse separation `t_evol` (s): `2kg∥T²` in the lab
/// frame, `(2kg∥ - b)T²` in the frame falling with the chirp `b`.
pub fn accumulated_phase(t_evol: f64, frame: Frame, chirp_b: f64, params: &PhysicsParams) -> Result<f64> {
    if !(t_evol >= 0.0) {
        return Err(Error::InvalidArgument(format!("t_evol must be non-negative, got {t_evol}")));
    }
    let rate = match frame {
        Frame::Lab => chirp_rate(params),
        Frame::Falling => chirp_rate(params) - chirp_b,
    };
    Ok(rate * t_evol * t_evol)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PulseKind {
    /// ±2ħk kick with a hyperfine flip.
    Raman,
    /// ±2ħk kick, internal state preserved.
    Bragg,
}

/// A two-photon light pulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RamanPulse {
    /// Two-photon Rabi frequency Ω (rad/s).
    pub rabi: f64,
    /// Duration (s).
    pub duration: f64,
    /// Two-photon detuning δ in the falling frame (rad/s).
    pub two_photon_detuning: f64,
    pub kind: PulseKind,
    pub axis_azimuth: f64,
}

impl RamanPulse {
    /// Pulse of area `area` (rad) at Rabi frequency `rabi`.
    pub fn with_area(rabi: f64, area: f64, two_photon_detuning: f64, kind: PulseKind) -> Self {
        Self { rabi, duration: area / rabi, two_photon_detuning, kind, axis_azimuth: 0.0 }
    }

    pub fn pi(rabi: f64, two_photon_detuning: f64, kind: PulseKind) -> Self {
        Self::with_area(rabi, PI, two_photon_detuning, kind)
    }

    fn validate(&self) -> Result<()> {
        if !(self.rabi > 0.0 && self.rabi.is_finite()) || !(self.duration >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "pulse needs Ω > 0 and duration ≥ 0, got Ω={} duration={}",
                self.rabi, self.duration
            )));
        }
        Ok(())
    }
}

/// Rabi lineshape `Ω²/(Ω²+δ²) sin²(√(Ω²+δ²) t/2)`.
pub fn transfer_probability(pulse: &RamanPulse, delta_eff: f64) -> f64 {
    let w2 = pulse.rabi * pulse.rabi + delta_eff * delta_eff;
    if w2 == 0.0 {
        return 0.0;
    }
    let s = (w2.sqrt() * pulse.duration / 2.0).sin();
    (pulse.rabi * pulse.rabi / w2 * s * s).clamp(0.0, 1.0)
}

/// Hyperfine label of a momentum class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Hyperfine {
    Up,
    Down,
}

/// Population over axial momentum, resolved by hyperfine state, plus a bucket
/// for atoms lost from the interferometer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentumDistribution {
    bins_per_hbark: u32,
    /// Grid index of the first bin; bin `i` sits at `(start + i)/bins_per_hbark`.
    start: i64,
    down: Vec<f64>,
    up: Vec<f64>,
    lost: f64,
}

impl MomentumDistribution {
    fn empty(bins_per_hbark: u32, lo: f64, hi: f64) -> Result<Self> {
        if bins_per_hbark < 100 {
            return Err(Error::InvalidArgument("momentum resolution must be ≤ 0.01 ħk".into()));
        }
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidArgument(format!("bad momentum range [{lo}, {hi}]")));
        }
        let b = bins_per_hbark as f64;
        let start = (lo * b).floor() as i64;
        let end = (hi * b).ceil() as i64;
        let len = (end - start + 1) as usize;
        Ok(Self { bins_per_hbark, start, down: vec![0.0; len], up: vec![0.0; len], lost: 0.0 })
    }

    /// Gaussian in `|↓⟩` with the given center and FWHM (ħk), total weight 1,
    /// sampled over ±6σ.
    pub fn gaussian(center: f64, fwhm: f64, bins_per_hbark: u32) -> Result<Self> {
        if !(fwhm > 0.0) {
            return Err(Error::InvalidArgument(format!("FWHM must be positive, got {fwhm}")));
        }
        let sigma = fwhm / (8.0 * 2f64.ln()).sqrt();
        let mut d = Self::empty(bins_per_hbark, center - 6.0 * sigma, center + 6.0 * sigma)?;
        for i in 0..d.down.len() {
            let p = d.momentum(i);
            d.down[i] = (-0.5 * ((p - center) / sigma).powi(2)).exp();
        }
        let total: f64 = d.down.iter().sum();
        d.down.iter_mut().for_each(|w| *w /= total);
        Ok(d)
    }

    /// Discrete classes `(momentum ħk, weight, label)` rounded onto the grid.
    pub fn from_classes(classes: &[(f64, f64, Hyperfine)], bins_per_hbark: u32) -> Result<Self> {
        if classes.is_empty() {
            return Err(Error::InvalidArgument("no momentum classes".into()));
        }
        let lo = classes.iter().map(|c| c.0).fold(f64::INFINITY, f64::min);
        let hi = classes.iter().map(|c| c.0).fold(f64::NEG_INFINITY, f64::max);
        let mut d = Self::empty(bins_per_hbark, lo - 1.0, hi + 1.0)?;
        for &(p, w, label) in classes {
            if !(w >= 0.0) {
                return Err(Error::InvalidArgument(format!("negative class weight {w}")));
            }
            let i = d.index_of(p);
            match label {
                Hyperfine::Down => d.down[i] += w,
                Hyperfine::Up => d.up[i] += w,
            }
        }
        if d.total() > 1.0 + 1e-12 {
            return Err(Error::InvalidArgument("class weights exceed 1".into()));
        }
        Ok(d)
    }

    fn index_of(&self, p: f64) -> usize {
        ((p * self.bins_per_hbark as f64).round() as i64 - self.start) as usize
    }

    pub fn len(&self) -> usize {
        self.down.len()
    }

    pub fn is_empty(&self) -> bool {
        self.down.is_empty()
    }

    pub fn step(&self) -> f64 {
        1.0 / self.bins_per_hbark as f64
    }

    pub fn momentum(&self, i: usize) -> f64 {
        (self.start + i as i64) as f64 / self.bins_per_hbark as f64
    }

    pub fn grid(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.momentum(i)).collect()
    }

    /// Total weight per bin.
    pub fn weights(&self) -> Vec<f64> {
        self.down.iter().zip(&self.up).map(|(a, b)| a + b).collect()
    }

    pub fn weights_of(&self, label: Hyperfine) -> &[f64] {
        match label {
            Hyperfine::Down => &self.down,
            Hyperfine::Up => &self.up,
        }
    }

    /// Weight still in the interferometer.
    pub fn total(&self) -> f64 {
        self.down.iter().sum::<f64>() + self.up.iter().sum::<f64>()
    }

    pub fn lost(&self) -> f64 {
        self.lost
    }

    pub fn mean(&self) -> f64 {
        let w = self.weights();
        let total: f64 = w.iter().sum();
        w.iter().enumerate().map(|(i, x)| x * self.momentum(i)).sum::<f64>() / total
    }

    /// RMS spread about the mean (ħk).
    pub fn rms(&self) -> f64 {
        let w = self.weights();
        let total: f64 = w.iter().sum();
        let mean = self.mean();
        (w.iter().enumerate().map(|(i, x)| x * (self.momentum(i) - mean).powi(2)).sum::<f64>() / total).sqrt()
    }

    /// Weight within ±`half_width` ħk of `p`.
    pub fn weight_near(&self, p: f64, half_width: f64) -> f64 {
        self.weights()
            .iter()
            .enumerate()
            .filter(|(i, _)| (self.momentum(*i) - p).abs() <= half_width)
            .map(|(_, w)| w)
            .sum()
    }

    /// Grows the grid so it covers `[lo, hi]`.
    fn ensure_range(&mut self, lo: f64, hi: f64) {
        let b = self.bins_per_hbark as f64;
        let want_start = (lo * b).floor() as i64;
        if want_start < self.start {
            let pad = (self.start - want_start) as usize;
            self.down.splice(0..0, std::iter::repeat_n(0.0, pad));
            self.up.splice(0..0, std::iter::repeat_n(0.0, pad));
            self.start = want_start;
        }
        let want_end = (hi * b).ceil() as i64;
        let end = self.start + self.len() as i64 - 1;
        if want_end > end {
            let pad = (want_end - end) as usize;
            self.down.extend(std::iter::repeat_n(0.0, pad));
            self.up.extend(std::iter::repeat_n(0.0, pad));
        }
    }

    /// Writes `momentum_hbark,weight` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["momentum_hbark", "weight"])?;
        for (i, weight) in self.weights().iter().enumerate() {
            w.write_record([format!("{}", self.momentum(i)), format!("{weight:e}")])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Velocity selection by `passes` π pulses at Rabi frequency `rabi` centered
/// on detuning `center`; untransferred atoms are discarded after each pass.
///
/// Returns the renormalized selected distribution and the kept fraction.
pub fn velocity_select(
    dist: &MomentumDistribution,
    rabi: f64,
    center: f64,
    passes: u32,
    params: &PhysicsParams,
) -> Result<(MomentumDistribution, f64)> {
    if passes == 0 {
        return Err(Error::InvalidArgument("velocity selection needs at least one pass".into()));
    }
    let pulse = RamanPulse::pi(rabi, center, PulseKind::Raman);
    pulse.validate()?;
    let before = dist.total();
    let mut out = dist.clone();
    for i in 0..out.len() {
        let p = transfer_probability(&pulse, doppler_detuning(out.momentum(i), params) - center);
        let keep = p.powi(passes as i32);
        out.down[i] *= keep;
        out.up[i] *= keep;
    }
    let kept = out.total();
    let survival = if before > 0.0 { kept / before } else { 0.0 };
    if survival < MIN_SURVIVAL {
        return Err(Error::EmptySelection { survival });
    }
    out.down.iter_mut().chain(out.up.iter_mut()).for_each(|w| *w /= kept);
    out.lost = 0.0;
    Ok((out, survival))
}

/// Velocimetry scan: transferred population after a π pulse at each detuning.
pub fn velocity_spectrum(
    dist: &MomentumDistribution,
    rabi: f64,
    detuning_grid: &[f64],
    params: &PhysicsParams,
) -> Result<Vec<f64>> {
    if detuning_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument("detuning grid must be strictly increasing".into()));
    }
    let pulse = RamanPulse::pi(rabi, 0.0, PulseKind::Raman);
    pulse.validate()?;
    let weights = dist.weights();
    let classes: Vec<(f64, f64)> = weights
        .iter()
        .enumerate()
        .filter(|(_, w)| **w > 0.0)
        .map(|(i, w)| (doppler_detuning(dist.momentum(i), params), *w))
        .collect();
    Ok(detuning_grid
        .iter()
        .map(|&d| classes.iter().map(|(dp, w)| w * transfer_probability(&pulse, d - dp)).sum())
        .collect())
}

/// Writes `detuning_hz,population` rows.
pub fn write_spectrum_csv<W: Write>(detuning_grid: &[f64], spectrum: &[f64], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["detuning_hz", "population"])?;
    for (d, s) in detuning_grid.iter().zip(spectrum) {
        w.write_record([format!("{}", d / (2.0 * PI)), format!("{s:e}")])?;
    }
    w.flush()?;
    Ok(())
}

/// Applies one two-photon pulse, exchanging weight between the addressed
/// pairs `(p, p + 2)`, after removing `loss_prob` of the population.
pub fn apply_momentum_pulse(
    dist: &MomentumDistribution,
    pulse: &RamanPulse,
    loss_prob: f64,
    params: &PhysicsParams,
) -> Result<MomentumDistribution> {
    pulse.validate()?;
    if !(0.0..=1.0).contains(&loss_prob) {
        return Err(Error::InvalidArgument(format!("loss probability {loss_prob} outside [0, 1]")));
    }
    let mut out = dist.clone();
    let per_hbark = doppler_detuning(1.0, params);
    let base = pulse.two_photon_detuning / per_hbark;
    out.ensure_range(base - 1.0, base + 3.0);

    let lost_now = loss_prob * out.total();
    out.down.iter_mut().chain(out.up.iter_mut()).for_each(|w| *w *= 1.0 - loss_prob);
    out.lost += lost_now;

    let kick = 2 * out.bins_per_hbark as usize;
    for i in 0..out.len() {
        let p = out.momentum(i);
        if !(p >= base - 1.0 && p < base + 1.0) || i + kick >= out.len() {
            continue;
        }
        let prob = transfer_probability(pulse, doppler_detuning(p, params) - pulse.two_photon_detuning);
        if prob == 0.0 {
            continue;
        }
        let j = i + kick;
        match pulse.kind {
            PulseKind::Bragg => {
                for w in [&mut out.down, &mut out.up] {
                    let (lo, hi) = (w[i], w[j]);
                    w[i] = (1.0 - prob) * lo + prob * hi;
                    w[j] = prob * lo + (1.0 - prob) * hi;
                }
            }
            PulseKind::Raman => {
                let (lo, hi) = (out.down[i], out.up[j]);
                out.down[i] = (1.0 - prob) * lo + prob * hi;
                out.up[j] = prob * lo + (1.0 - prob) * hi;
            }
        }
    }
    Ok(out)
}

/// Mean single-pulse transfer efficiency `⟨Ω²/(Ω²+δ(p)²)⟩` over a
/// distribution centered on resonance; the interferometer contrast factor
/// contributed by each pulse.
pub fn pulse_contrast(dist: &MomentumDistribution, rabi: f64, params: &PhysicsParams) -> f64 {
    let w = dist.weights();
    let total: f64 = w.iter().sum();
    if total == 0.0 {
        return 0.0;
    }
    let mean = dist.mean();
    let r2 = rabi * rabi;
    w.iter()
        .enumerate()
        .map(|(i, x)| {
            let d = doppler_detuning(dist.momentum(i) - mean, params);
            x * r2 / (r2 + d * d)
        })
        .sum::<f64>()
        / total
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    fn params() -> PhysicsParams {
        PhysicsParams::default()
    }

    #[test]
    fn chirp_rate_matches_gravity() {
        let b = chirp_rate(&params());
        assert!((b / TAU / 1e6 / 25.11 - 1.0).abs() < 1e-3);
        let p0 = PhysicsParams { gravity: 0.0, ..params() };
        assert_eq!(chirp_rate(&p0), 0.0);
        let p2 = PhysicsParams { gravity: 2.0 * 9.796, ..params() };
        assert!((chirp_rate(&p2) / b - 2.0).abs() < 1e-14);
    }

    #[test]
    fn doppler_per_hbark() {
        let p = params();
        assert_eq!(doppler_detuning(0.0, &p), 0.0);
        // ω_r = ħk²/2m with k = 2π/780.241 nm
        let k = TAU / 780.241e-9;
        let wr = 1.054_571_817e-34 * k * k / (2.0 * 1.443_160_648e-25);
        assert!((doppler_detuning(1.0, &p) - 4.0 * wr).abs() < 1e-9);
        assert!((doppler_detuning(1.0, &p) / TAU / 15.08e3 - 1.0).abs() < 1e-3);
        assert_eq!(doppler_detuning(-2.5, &p), -doppler_detuning(2.5, &p));
    }

    #[test]
    fn lab_phase_at_4ms() {
        let p = params();
        let phi = accumulated_phase(4e-3, Frame::Lab, 0.0, &p).unwrap();
        assert!((2400.0..2650.0).contains(&phi));
        let f = accumulated_phase(4e-3, Frame::Falling, chirp_rate(&p), &p).unwrap();
        assert_eq!(f, 0.0);
        let a = accumulated_phase(1e-3, Frame::Lab, 0.0, &p).unwrap();
        let b = accumulated_phase(2e-3, Frame::Lab, 0.0, &p).unwrap();
        assert!((b / a - 4.0).abs() < 1e-12);
        assert!(accumulated_phase(-1.0, Frame::Lab, 0.0, &p).is_err());
    }

    #[test]
    fn rabi_lineshape() {
        let om = TAU * 10e3;
        let pulse = RamanPulse::pi(om, 0.0, PulseKind::Raman);
        assert!((transfer_probability(&pulse, 0.0) - 1.0).abs() < 1e-15);
        let want = (PI * 2f64.sqrt() / 2.0).sin().powi(2) / 2.0;
        assert!((transfer_probability(&pulse, om) - want).abs() < 1e-15);
        assert!((want - 0.3165).abs() < 1e-3);
        for d in [0.3, 1.7, 4.0] {
            assert_eq!(transfer_probability(&pulse, d * om), transfer_probability(&pulse, -d * om));
        }
    }

    /// Second moment of the selected distribution by direct quadrature of
    /// the continuous Gaussian times the lineshape.
    fn quadrature_rms(rabi: f64, passes: i32) -> f64 {
        let p = params();
        let sigma = 5.0 / (8.0 * 2f64.ln()).sqrt();
        let pulse = RamanPulse::pi(rabi, 0.0, PulseKind::Raman);
        let (mut m0, mut m2) = (0.0, 0.0);
        let n = 200_000;
        for i in 0..=n {
            let x = -3.0 + 6.0 * i as f64 / n as f64;
            let w = (-0.5 * (x / sigma).powi(2)).exp()
                * transfer_probability(&pulse, doppler_detuning(x, &p)).powi(passes);
            m0 += w;
            m2 += w * x * x;
        }
        (m2 / m0).sqrt()
    }

    #[test]
    fn two_pass_selection_spread() {
        let p = params();
        let d = MomentumDistribution::gaussian(0.0, 5.0, 1000).unwrap();
        let (sel, survival) = velocity_select(&d, TAU * 1.4e3, 0.0, 2, &p).unwrap();
        let rms = sel.rms();
        assert!((rms - quadrature_rms(TAU * 1.4e3, 2)).abs() < 2e-3 * rms);
        assert!(rms > 0.05 && rms < 0.2, "rms {rms}");
        assert!(survival > 0.0 && survival < 0.05);
    }

    #[test]
    fn selected_spread_scales_with_rabi() {
        let p = params();
        let d = MomentumDistribution::gaussian(0.0, 5.0, 1000).unwrap();
        let rabis = [0.5, 1.0, 1.4, 2.0, 3.0];
        let ratios: Vec<f64> = rabis
            .iter()
            .map(|r| velocity_select(&d, TAU * r * 1e3, 0.0, 2, &p).unwrap().0.rms() / r)
            .collect();
        let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
        for r in &ratios {
            assert!((r / mean - 1.0).abs() < 0.15, "{ratios:?}");
        }
    }

    #[test]
    fn strong_pulse_keeps_everything() {
        let p = params();
        let d = MomentumDistribution::gaussian(0.0, 0.1, 1000).unwrap();
        let (sel, survival) = velocity_select(&d, TAU * 1e9, 0.0, 1, &p).unwrap();
        assert!((survival - 1.0).abs() < 1e-6);
        assert!((sel.rms() - d.rms()).abs() < 1e-6);
        let (again, _) = velocity_select(&sel, TAU * 1e9, 0.0, 1, &p).unwrap();
        assert!((again.rms() - sel.rms()).abs() < 1e-9);
    }

    #[test]
    fn far_selection_is_empty() {
        let p = params();
        let d = MomentumDistribution::from_classes(&[(0.0, 1.0, Hyperfine::Down)], 100).unwrap();
        let far = doppler_detuning(0.5, &p);
        // π pulse of a 10 Hz Rabi frequency misses a class 7.5 kHz away.
        let r = velocity_select(&d, TAU * 1e-1, far, 2, &p);
        assert!(matches!(r, Err(Error::EmptySelection { .. })));
    }

    #[test]
    fn superposition_velocimetry_peaks() {
        let p = params();
        let d = MomentumDistribution::from_classes(
            &[(0.0, 0.5, Hyperfine::Down), (4.0, 0.5, Hyperfine::Down)],
            100,
        )
        .unwrap();
        let grid: Vec<f64> = (0..=3000).map(|i| TAU * (-10e3 + 50.0 * i as f64)).collect();
        let spec = velocity_spectrum(&d, TAU * 2e3, &grid, &p).unwrap();
        let half = grid.iter().position(|&g| g > TAU * 30e3).unwrap();
        let peak = |range: std::ops::Range<usize>| {
            range.clone().max_by(|&a, &b| spec[a].total_cmp(&spec[b])).unwrap()
        };
        let (a, b) = (peak(0..half), peak(half..grid.len()));
        let sep = (grid[b] - grid[a]) / TAU;
        let want = 16.0 * p.recoil_frequency() / TAU;
        assert!((sep / want - 1.0).abs() < 0.02, "{sep} vs {want}");
        assert!((spec[a] - 0.5).abs() < 0.01 && (spec[b] - 0.5).abs() < 0.01);
    }

    #[test]
    fn single_class_spectrum_is_lineshape() {
        let p = params();
        let d = MomentumDistribution::from_classes(&[(0.0, 1.0, Hyperfine::Down)], 100).unwrap();
        let om = TAU * 3e3;
        let grid: Vec<f64> = (0..50).map(|i| TAU * (i as f64 * 200.0 - 5e3)).collect();
        let spec = velocity_spectrum(&d, om, &grid, &p).unwrap();
        let pulse = RamanPulse::pi(om, 0.0, PulseKind::Raman);
        for (g, s) in grid.iter().zip(&spec) {
            assert!((s - transfer_probability(&pulse, *g)).abs() < 1e-15);
        }
    }

    #[test]
    fn bragg_ladder_to_ten_hbark() {
        let p = params();
        let om = TAU * 10e3;
        let mut d = MomentumDistribution::from_classes(&[(0.0, 1.0, Hyperfine::Down)], 100).unwrap();
        d = apply_momentum_pulse(&d, &RamanPulse::with_area(om, PI / 2.0, 0.0, PulseKind::Bragg), 0.0, &p)
            .unwrap();
        for base in [2.0, 4.0, 6.0, 8.0] {
            let pulse = RamanPulse::pi(om, doppler_detuning(base, &p), PulseKind::Bragg);
            d = apply_momentum_pulse(&d, &pulse, 0.0, &p).unwrap();
        }
        assert!((d.weight_near(0.0, 0.01) - 0.5).abs() < 1e-12);
        assert!((d.weight_near(10.0, 0.01) - 0.5).abs() < 1e-12);
        assert_eq!(d.weights_of(Hyperfine::Up).iter().sum::<f64>(), 0.0);
    }

    #[test]
    fn pulse_losses_compound() {
        let p = params();
        let om = TAU * 10e3;
        let mut d = MomentumDistribution::from_classes(&[(0.0, 1.0, Hyperfine::Down)], 100).unwrap();
        for base in [0.0, 2.0, 4.0, 6.0, 8.0] {
            let pulse = RamanPulse::pi(om, doppler_detuning(base, &p), PulseKind::Bragg);
            d = apply_momentum_pulse(&d, &pulse, 0.002, &p).unwrap();
        }
        assert!((d.lost() - (1.0 - 0.998f64.powi(5))).abs() < 1e-12);
        assert!((d.lost() + d.total() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn raman_pulse_flips_spin() {
        let p = params();
        let d = MomentumDistribution::from_classes(&[(0.0, 1.0, Hyperfine::Down)], 100).unwrap();
        let d = apply_momentum_pulse(&d, &RamanPulse::pi(TAU * 10e3, 0.0, PulseKind::Raman), 0.0, &p).unwrap();
        assert!((d.weights_of(Hyperfine::Up)[d.index_of(2.0)] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn csv_columns() {
        let d = MomentumDistribution::from_classes(&[(0.0, 1.0, Hyperfine::Down)], 100).unwrap();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("momentum_hbark,weight\n"));
    }

    #[test]
    fn contrast_factor_near_one_for_narrow_selection() {
        let p = params();
        let d = MomentumDistribution::gaussian(0.0, 5.0, 1000).unwrap();
        let (sel, _) = velocity_select(&d, TAU * 1.4e3, 0.0, 2, &p).unwrap();
        let c = pulse_contrast(&sel, TAU * 10e3, &p);
        assert!(c > 0.98 && c < 1.0, "{c}");
    }
}
