//! Estimators: fringe fits, spin projections from cavity shifts, the
//! Wineland parameter, variance ellipses and tomograms.

mod ellipse;
mod estimators;
mod fringe;
mod records;
mod tomography;
mod wineland;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use ellipse::{fit_section, variance_vs_alpha, AlphaSet, EllipseFit};
pub use estimators::{bloch_length, fringe_signal, jz_from_shifts, theta_from_record, JzMode};
pub use fringe::{fit_fringe, FringeFit};
pub use records::{read_jsonl, write_jsonl, ReadoutKind, Role, TrialRecord};
pub use tomography::{tomography, tomography_from_samples, Tomogram};
pub use wineland::{
    signal_angles, wineland, wineland_from_angles, BootstrapOptions, Fringe, SqueezedFringes, WinelandResult,
    MIN_TRIALS,
};

use crate::cavity::DispersiveShifts;
use crate::error::{Error, Result};

/// Which phase estimator the signal trials are analysed with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// `θ_p - θ_f`: final readout referenced to the QND pre-measurement.
    Qnd,
    /// `θ_f` after one-axis twisting.
    Oat,
    /// `θ_f` at the output of the Mach–Zehnder sequence.
    Mz,
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "qnd" => Ok(Mode::Qnd),
            "oat" => Ok(Mode::Oat),
            "mz" => Ok(Mode::Mz),
            _ => Err(Error::InvalidArgument(format!("unknown analysis mode `{s}` (qnd, oat, mz)"))),
        }
    }
}

/// Wineland parameter at one squeezing-axis angle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaPoint {
    pub alpha: Option<f64>,
    pub result: WinelandResult,
}

/// Everything derived from one record file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub mode: Mode,
    pub scenario_id: String,
    pub reference: Fringe,
    pub squeezed: SqueezedFringes,
    /// One entry per distinct signal `alpha`, in ascending order.
    pub points: Vec<AlphaPoint>,
    /// Section fit of `W(α)` when at least five angles were run.
    pub ellipse: Option<EllipseFit>,
}

impl AnalysisReport {
    /// The point with the smallest `W`.
    pub fn best(&self) -> &AlphaPoint {
        self.points.iter().min_by(|a, b| a.result.w.total_cmp(&b.result.w)).expect("at least one point")
    }
}

fn fit_group(records: &[&TrialRecord]) -> Result<FringeFit> {
    let phases: Vec<f64> = records.iter().map(|r| r.readout_azimuth).collect();
    let values = records.iter().map(|r| fringe_signal(r)).collect::<Result<Vec<_>>>()?;
    fit_fringe(&phases, &values)
}

/// Runs the full estimator chain on a record set.
///
/// The reference fringe prefers unpumped readout (`J_c = A_p/(χ0 - χ↓)`)
/// and falls back to pumped. `n_atoms` is `N0`; when `None` the mean
/// `n_atoms_actual` of the signal trials is used.
pub fn analyze(
    records: &[TrialRecord],
    shifts: &DispersiveShifts,
    mode: Mode,
    n_atoms: Option<f64>,
    opts: &BootstrapOptions,
) -> Result<AnalysisReport> {
    // Fixed summation order: results do not depend on how records arrive.
    let mut sorted: Vec<&TrialRecord> = records.iter().collect();
    sorted.sort_by_key(|r| r.trial_id);
    let group = |role: Role, kind: ReadoutKind| -> Vec<&TrialRecord> {
        sorted.iter().copied().filter(|r| r.role == role && r.readout == kind).collect()
    };
    let missing = |what: &str| Error::InvalidArgument(format!("record set has no {what} trials"));

    let ref_unpumped = group(Role::FringeReference, ReadoutKind::Unpumped);
    let reference = if !ref_unpumped.is_empty() {
        Fringe { fit: fit_group(&ref_unpumped)?, kind: ReadoutKind::Unpumped }
    } else {
        let pumped = group(Role::FringeReference, ReadoutKind::Pumped);
        if pumped.is_empty() {
            return Err(missing("reference fringe"));
        }
        Fringe { fit: fit_group(&pumped)?, kind: ReadoutKind::Pumped }
    };

    let sq_pumped = group(Role::FringeSqueezed, ReadoutKind::Pumped);
    if sq_pumped.is_empty() {
        return Err(missing("pumped squeezed fringe"));
    }
    let pre_measurement = match mode {
        Mode::Qnd => {
            let sq_unpumped = group(Role::FringeSqueezed, ReadoutKind::Unpumped);
            if sq_unpumped.is_empty() {
                return Err(missing("unpumped squeezed fringe"));
            }
            Some(fit_group(&sq_unpumped)?)
        }
        _ => None,
    };
    let squeezed = SqueezedFringes { final_readout: fit_group(&sq_pumped)?, pre_measurement };

    let mut by_alpha: BTreeMap<Option<u64>, Vec<TrialRecord>> = BTreeMap::new();
    for r in sorted.iter().filter(|r| r.role == Role::Signal) {
        by_alpha.entry(r.alpha.map(|a| a.to_bits())).or_default().push((*r).clone());
    }
    if by_alpha.is_empty() {
        return Err(missing("signal"));
    }
    let mut points = Vec::with_capacity(by_alpha.len());
    for (key, signal) in &by_alpha {
        let n0 = n_atoms.unwrap_or_else(|| signal.iter().map(|r| r.n_atoms_actual).sum::<f64>() / signal.len() as f64);
        let result = wineland(signal, &squeezed, &reference, shifts, n0, mode, opts)?;
        points.push(AlphaPoint { alpha: key.map(f64::from_bits), result });
    }
    points.sort_by(|a, b| a.alpha.unwrap_or(0.0).total_cmp(&b.alpha.unwrap_or(0.0)));

    let ellipse = if points.len() >= 5 && points.iter().all(|p| p.alpha.is_some()) {
        // Each W carries the relative sampling error sqrt(2/(n-1)).
        let pts: Vec<(f64, f64)> = points.iter().map(|p| (p.alpha.unwrap(), p.result.w)).collect();
        let weights: Vec<f64> =
            points.iter().map(|p| (p.result.n_trials as f64 - 1.0) / (2.0 * p.result.w * p.result.w)).collect();
        Some(fit_section(pts, &weights)?)
    } else {
        None
    };

    Ok(AnalysisReport {
        mode,
        scenario_id: sorted.first().map(|r| r.scenario_id.clone()).unwrap_or_default(),
        reference,
        squeezed,
        points,
        ellipse,
    })
}
