use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::estimators::{bloch_length, theta_from_amplitude, JzMode};
use super::fringe::FringeFit;
use super::records::{ReadoutKind, TrialRecord};
use super::Mode;
use crate::cavity::DispersiveShifts;
use crate::error::{Error, Result};

/// Fewest signal trials accepted by [`wineland`].
pub const MIN_TRIALS: usize = 30;

/// Resampling settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapOptions {
    pub resamples: usize,
    /// Two-sided coverage of the interval.
    pub confidence: f64,
    pub seed: u64,
}

impl Default for BootstrapOptions {
    fn default() -> Self {
        Self { resamples: 2000, confidence: 0.68, seed: 0x5eed }
    }
}

/// A fitted fringe and the readout it was taken with.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fringe {
    pub fit: FringeFit,
    pub kind: ReadoutKind,
}

impl Fringe {
    pub fn bloch_length(&self, shifts: &DispersiveShifts) -> f64 {
        bloch_length(self.fit.amplitude, self.kind, shifts)
    }
}

/// Fringes taken with the entangling step in place.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SqueezedFringes {
    /// Pumped fringe, amplitude `A_f`.
    pub final_readout: FringeFit,
    /// Unpumped fringe after the pre-measurement, amplitude `A_p`. QND only.
    pub pre_measurement: Option<FringeFit>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WinelandResult {
    pub w: f64,
    /// `-10 log10 W`; positive below the standard quantum limit.
    pub w_db: f64,
    pub delta_theta: f64,
    pub delta_theta_sql: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub n_trials: usize,
    pub j_c: f64,
    pub j_s: f64,
    /// `C_i = 2 J_c / N0`.
    pub contrast_initial: f64,
    /// `C_f = 2 J_s / N0`.
    pub contrast_final: f64,
    /// `(ΔJz)² / (N0/4)` without contrast correction.
    pub raw_variance_ratio: f64,
}

fn sample_variance(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

/// Phase estimates of the signal trials for the given analysis mode.
pub fn signal_angles(signal: &[TrialRecord], fringes: &SqueezedFringes, epsilon: f64, mode: Mode) -> Result<Vec<f64>> {
    let a_f = fringes.final_readout.amplitude;
    signal
        .iter()
        .map(|r| {
            let theta_f = theta_from_amplitude(r, a_f, epsilon, JzMode::PumpedFinal)?;
            match mode {
                Mode::Qnd => {
                    let a_p = fringes.pre_measurement.ok_or_else(|| {
                        Error::InvalidArgument("QND analysis needs the pre-measurement fringe".into())
                    })?;
                    Ok(theta_from_amplitude(r, a_p.amplitude, epsilon, JzMode::QndPre)? - theta_f)
                }
                Mode::Oat | Mode::Mz => Ok(theta_f),
            }
        })
        .collect()
}

/// `W = Var(θ) · 2 J_c` with a bias-corrected percentile bootstrap over
/// trials. Resample `b` draws from the stream `(seed, b)`, so the interval
/// does not depend on the thread count.
pub fn wineland_from_angles(thetas: &[f64], j_c: f64, opts: &BootstrapOptions) -> Result<(f64, f64, f64)> {
    let n = thetas.len();
    if n < MIN_TRIALS {
        return Err(Error::InsufficientTrials { needed: MIN_TRIALS, got: n });
    }
    if !(j_c > 0.0) {
        return Err(Error::InvalidArgument(format!("J_c must be positive, got {j_c}")));
    }
    if opts.resamples < 2 || !(opts.confidence > 0.0 && opts.confidence < 1.0) {
        return Err(Error::InvalidArgument("bootstrap needs ≥ 2 resamples and confidence in (0, 1)".into()));
    }
    let w = sample_variance(thetas) * 2.0 * j_c;
    if !(w > 0.0) {
        return Err(Error::FitFailure { reason: "phase estimates have zero spread".into(), residual_norm: 0.0 });
    }
    let mut boot: Vec<f64> = (0..opts.resamples)
        .into_par_iter()
        .map(|b| {
            use rand::Rng;
            let mut rng = crate::rng::stream(opts.seed, b as u64, 0);
            let draw: Vec<f64> = (0..n).map(|_| thetas[rng.random_range(0..n)]).collect();
            sample_variance(&draw) * 2.0 * j_c
        })
        .collect();
    boot.sort_by(f64::total_cmp);

    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let below = boot.iter().filter(|&&v| v < w).count() as f64;
    let frac = ((below + 0.5 * boot.iter().filter(|&&v| v == w).count() as f64) / boot.len() as f64)
        .clamp(0.5 / boot.len() as f64, 1.0 - 0.5 / boot.len() as f64);
    let z0 = std_normal.inverse_cdf(frac);
    let tail = 0.5 * (1.0 - opts.confidence);
    let zl = std_normal.inverse_cdf(tail);
    let quantile = |p: f64| {
        let pos = p * (boot.len() - 1) as f64;
        let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
        boot[lo] + (boot[hi] - boot[lo]) * (pos - lo as f64)
    };
    let lo = quantile(std_normal.cdf(2.0 * z0 + zl));
    let hi = quantile(std_normal.cdf(2.0 * z0 - zl));
    Ok((w, lo.min(w), hi.max(w)))
}

/// Wineland parameter of a set of signal trials.
///
/// `J_s` comes from the pumped fringe amplitude, `J_c` from the reference
/// fringe, and `n_atoms` is the initial atom number `N0`.
pub fn wineland(
    signal: &[TrialRecord],
    squeezed: &SqueezedFringes,
    reference: &Fringe,
    shifts: &DispersiveShifts,
    n_atoms: f64,
    mode: Mode,
    opts: &BootstrapOptions,
) -> Result<WinelandResult> {
    if signal.len() < MIN_TRIALS {
        return Err(Error::InsufficientTrials { needed: MIN_TRIALS, got: signal.len() });
    }
    let thetas = signal_angles(signal, squeezed, shifts.epsilon, mode)?;
    let j_c = reference.bloch_length(shifts);
    let j_s = bloch_length(squeezed.final_readout.amplitude, ReadoutKind::Pumped, shifts);
    let (w, ci_lo, ci_hi) = wineland_from_angles(&thetas, j_c, opts)?;
    let contrast_initial = 2.0 * j_c / n_atoms;
    let contrast_final = 2.0 * j_s / n_atoms;
    let delta_theta_sql = 1.0 / (2.0 * j_c).sqrt();
    Ok(WinelandResult {
        w,
        w_db: -10.0 * w.log10(),
        delta_theta: w.sqrt() * delta_theta_sql,
        delta_theta_sql,
        ci_lo,
        ci_hi,
        n_trials: thetas.len(),
        j_c,
        j_s,
        contrast_initial,
        contrast_final,
        raw_variance_ratio: w * contrast_final * contrast_final / contrast_initial,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;
    use rand_distr::{Distribution, Normal as Gauss};

    fn gaussian(n: usize, sd: f64, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let g = Gauss::new(0.0, sd).unwrap();
        (0..n).map(|_| g.sample(&mut rng)).collect()
    }

    #[test]
    fn planted_half_variance() {
        // Var(Jz) = 0.5 N/4 with J = N/2 gives W = 0.5.
        let n = 1000.0;
        let j = n / 2.0;
        let thetas: Vec<f64> = gaussian(20_000, (0.5 * n / 4.0f64).sqrt(), 1).iter().map(|v| v / j).collect();
        let (w, lo, hi) = wineland_from_angles(&thetas, j, &BootstrapOptions::default()).unwrap();
        assert!((w - 0.5).abs() < 1.5 * (hi - lo), "{w} [{lo}, {hi}]");
    }

    #[test]
    fn interval_brackets_estimate() {
        let thetas = gaussian(50, 0.03, 2);
        let (w, lo, hi) = wineland_from_angles(&thetas, 500.0, &BootstrapOptions::default()).unwrap();
        assert!(lo <= w && w <= hi && w > 0.0);
    }

    #[test]
    fn too_few_trials() {
        let thetas = gaussian(29, 0.03, 3);
        assert!(matches!(
            wineland_from_angles(&thetas, 500.0, &BootstrapOptions::default()),
            Err(Error::InsufficientTrials { needed: 30, got: 29 })
        ));
    }

    #[test]
    fn interval_independent_of_threads() {
        let thetas = gaussian(200, 0.03, 4);
        let opts = BootstrapOptions::default();
        let a = wineland_from_angles(&thetas, 500.0, &opts).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let b = pool.install(|| wineland_from_angles(&thetas, 500.0, &opts).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn interval_coverage_at_sql() {
        // 100 repetitions of 400 trials at exactly the SQL.
        let j: f64 = 250.0;
        let mut covered = 0;
        for rep in 0..100 {
            let thetas: Vec<f64> = gaussian(400, (2.0 * j).sqrt() / 2.0, 100 + rep).iter().map(|v| v / j).collect();
            let (_, lo, hi) = wineland_from_angles(&thetas, j, &BootstrapOptions { resamples: 1000, ..Default::default() }).unwrap();
            if lo <= 1.0 && 1.0 <= hi {
                covered += 1;
            }
        }
        assert!(covered >= 60, "coverage {covered}/100");
    }
}
