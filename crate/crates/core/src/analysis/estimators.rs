use serde::{Deserialize, Serialize};

use super::fringe::FringeFit;
use super::records::{ReadoutKind, TrialRecord};
use crate::cavity::DispersiveShifts;
use crate::error::{Error, Result};

/// Which pair of cavity shifts a spin projection is reconstructed from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JzMode {
    /// QND pre-measurement pair `ω1p`, `ω2p` with atoms in `|↑⟩`.
    QndPre,
    /// Final pair `ω1f`, `ω2f` with `|↑⟩` pumped to the cycling state.
    PumpedFinal,
}

/// Spin projection from a record's cavity shifts.
///
/// `J_zp = (ω1p - ω2p) / (2(χ0 - χ↓))`;
/// `J_zf = (ω1f - ω2f)/(2χ2) - (ε/χ2) ω2f`.
pub fn jz_from_shifts(record: &TrialRecord, shifts: &DispersiveShifts, mode: JzMode) -> Result<f64> {
    match mode {
        JzMode::QndPre => {
            let (w1, w2) = (record.require("omega_1p")?, record.require("omega_2p")?);
            Ok((w1 - w2) / (2.0 * (shifts.chi0 - shifts.chi_down)))
        }
        JzMode::PumpedFinal => {
            let (w1, w2) = (record.require("omega_1f")?, record.require("omega_2f")?);
            Ok((w1 - w2) / (2.0 * shifts.chi2) - shifts.epsilon / shifts.chi2 * w2)
        }
    }
}

/// Polar angle estimate, free of the absolute shift scale.
///
/// `QndPre`: `θ_p = (ω1p - ω2p)/(2 A_p)` with `A_p` the unpumped fringe
/// amplitude. `PumpedFinal`: `θ_f = (ω1f - ω2f)/A_f - ε(ω1f + ω2f)/A_f +
/// 2ε² ω2f/A_f` with `A_f` the pumped fringe amplitude.
pub fn theta_from_record(record: &TrialRecord, fringe: &FringeFit, epsilon: f64, mode: JzMode) -> Result<f64> {
    theta_from_amplitude(record, fringe.amplitude, epsilon, mode)
}

pub(crate) fn theta_from_amplitude(record: &TrialRecord, amplitude: f64, epsilon: f64, mode: JzMode) -> Result<f64> {
    if !(amplitude > 0.0) {
        return Err(Error::InvalidArgument(format!("fringe amplitude must be positive, got {amplitude}")));
    }
    match mode {
        JzMode::QndPre => {
            let (w1, w2) = (record.require("omega_1p")?, record.require("omega_2p")?);
            Ok((w1 - w2) / (2.0 * amplitude))
        }
        JzMode::PumpedFinal => {
            if record.readout != ReadoutKind::Pumped {
                return Err(Error::InvalidArgument(format!(
                    "trial {} has an unpumped readout; the final-angle estimator needs the pumped pair",
                    record.trial_id
                )));
            }
            let (w1, w2) = (record.require("omega_1f")?, record.require("omega_2f")?);
            Ok((w1 - w2) / amplitude - epsilon * (w1 + w2) / amplitude + 2.0 * epsilon * epsilon * w2 / amplitude)
        }
    }
}

/// Fringe observable of a record: `ω1f - ω2f` for pumped readout, `ω1f` for
/// unpumped readout.
pub fn fringe_signal(record: &TrialRecord) -> Result<f64> {
    match record.readout {
        ReadoutKind::Pumped => Ok(record.require("omega_1f")? - record.require("omega_2f")?),
        ReadoutKind::Unpumped => record.require("omega_1f"),
    }
}

/// Bloch-vector length from a fringe amplitude: `A_p/(χ0 - χ↓)` for the
/// unpumped fringe, `A_f/(2χ2 - χ↓)` for the pumped one.
pub fn bloch_length(amplitude: f64, kind: ReadoutKind, shifts: &DispersiveShifts) -> f64 {
    match kind {
        ReadoutKind::Unpumped => amplitude / (shifts.chi0 - shifts.chi_down),
        ReadoutKind::Pumped => amplitude / (2.0 * shifts.chi2 - shifts.chi_down),
    }
}
