use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ellipse::{variance_vs_alpha, AlphaSet, EllipseFit};
use crate::dynamics::bloch_azimuth;
use crate::error::{Error, Result};
use crate::spin::{rotate, CollectiveSpinState, JzSampler, SpinProjectionAxis};

/// Projection histograms of the y–z plane, one row per rotation angle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tomogram {
    pub alphas: Vec<f64>,
    /// `bins + 1` common edges.
    pub bin_edges: Vec<f64>,
    /// `counts[i][b]`: samples at `alphas[i]` in bin `b`.
    pub counts: Vec<Vec<u64>>,
    /// Sample variance of each section.
    pub section_variances: Vec<f64>,
    pub ellipse: Option<EllipseFit>,
}

impl Tomogram {
    /// Largest over smallest section variance, from the fitted ellipse when
    /// available.
    pub fn principal_ratio(&self) -> f64 {
        match &self.ellipse {
            Some(e) if e.v_min > 0.0 => e.v_max / e.v_min,
            _ => {
                let max = self.section_variances.iter().cloned().fold(f64::MIN, f64::max);
                let min = self.section_variances.iter().cloned().fold(f64::MAX, f64::min);
                max / min
            }
        }
    }

    /// Grid angle with the smallest section variance.
    pub fn alpha_of_min_section(&self) -> f64 {
        let (i, _) = self
            .section_variances
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("non-empty grid");
        self.alphas[i]
    }
}

fn check_grid(alphas: &[f64], bins: usize) -> Result<()> {
    if bins == 0 || alphas.len() < 2 {
        return Err(Error::InvalidArgument("tomography needs at least 2 angles and 1 bin".into()));
    }
    let min = alphas.iter().cloned().fold(f64::MAX, f64::min);
    let max = alphas.iter().cloned().fold(f64::MIN, f64::max);
    let step = (max - min) / (alphas.len() - 1) as f64;
    if max - min + step < std::f64::consts::PI - 1e-9 {
        return Err(Error::InvalidArgument(format!("angle grid covers {:.3} rad, need π", max - min + step)));
    }
    Ok(())
}

/// Tomogram from measured projections, one set per angle.
pub fn tomography_from_samples(sets: &[AlphaSet], bins: usize) -> Result<Tomogram> {
    let alphas: Vec<f64> = sets.iter().map(|s| s.alpha).collect();
    check_grid(&alphas, bins)?;
    let reach = sets.iter().flat_map(|s| s.values.iter()).fold(0.0f64, |m, v| m.max(v.abs()));
    let half = if reach > 0.0 { reach * (1.0 + 1e-9) } else { 1.0 };
    let width = 2.0 * half / bins as f64;
    let bin_edges: Vec<f64> = (0..=bins).map(|b| -half + width * b as f64).collect();
    let mut counts = Vec::with_capacity(sets.len());
    let mut section_variances = Vec::with_capacity(sets.len());
    for s in sets {
        let mut row = vec![0u64; bins];
        for v in &s.values {
            row[(((v + half) / width) as usize).min(bins - 1)] += 1;
        }
        counts.push(row);
        let n = s.values.len() as f64;
        let mean = s.values.iter().sum::<f64>() / n;
        section_variances.push(s.values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0));
    }
    let ellipse = variance_vs_alpha(sets).ok();
    Ok(Tomogram { alphas, bin_edges, counts, section_variances, ellipse })
}

/// Samples a state: for each `α` the state is rotated by `α` about its
/// Bloch-vector axis and `Jz` is drawn `samples_per_angle` times, which
/// measures the projection on `cos α z + sin α (ẑ × b)` for Bloch direction
/// `b` on the equator.
pub fn tomography<R: Rng + ?Sized>(
    state: &CollectiveSpinState,
    alphas: &[f64],
    bins: usize,
    samples_per_angle: usize,
    rng: &mut R,
) -> Result<Tomogram> {
    check_grid(alphas, bins)?;
    if samples_per_angle < 2 {
        return Err(Error::InvalidArgument("need at least 2 samples per angle".into()));
    }
    let axis = SpinProjectionAxis::equatorial(bloch_azimuth(state));
    let mut sets = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        let sampler = JzSampler::new(&rotate(state, alpha, axis)?);
        sets.push(AlphaSet { alpha, values: (0..samples_per_angle).map(|_| sampler.sample(rng)).collect() });
    }
    tomography_from_samples(&sets, bins)
}
