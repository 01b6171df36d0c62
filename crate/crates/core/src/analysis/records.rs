use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::dynamics::ContrastLedger;
use crate::error::{Error, Result};

/// What a trial was run for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    /// Phase-resolution trial.
    Signal,
    /// Fringe scan with the entangling step in place (measures `J_s`).
    FringeSqueezed,
    /// Fringe scan with photons and twist set to zero (measures `J_c`).
    FringeReference,
}

/// Final cavity measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReadoutKind {
    /// Atoms in `|↑⟩` pumped to the cycling state; a pair of shifts
    /// `ω1f`, `ω2f` separated by a π pulse.
    Pumped,
    /// Single shift `ω1f` with the population left in `|↑⟩`.
    Unpumped,
}

/// One simulated experimental shot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialRecord {
    pub trial_id: u64,
    pub seed: u64,
    pub scenario_id: String,
    pub role: Role,
    pub readout: ReadoutKind,
    /// Azimuth of the scanned fringe pulse (rad); 0 for signal trials.
    pub readout_azimuth: f64,
    /// Squeezing-axis rotation used by the sequence, if any (rad).
    pub alpha: Option<f64>,
    pub omega_1p: Option<f64>,
    pub omega_2p: Option<f64>,
    pub omega_1f: Option<f64>,
    pub omega_2f: Option<f64>,
    pub ledger: ContrastLedger,
    /// Atom number entering the cavity shifts of this shot.
    pub n_atoms_actual: f64,
}

impl TrialRecord {
    pub fn require(&self, field: &'static str) -> Result<f64> {
        let v = match field {
            "omega_1p" => self.omega_1p,
            "omega_2p" => self.omega_2p,
            "omega_1f" => self.omega_1f,
            "omega_2f" => self.omega_2f,
            _ => None,
        };
        v.ok_or(Error::MissingOutcome { trial_id: self.trial_id, field })
    }
}

/// Writes one JSON object per line.
pub fn write_jsonl<W: Write>(records: &[TrialRecord], mut out: W) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Reads a JSON-lines record stream, skipping blank lines.
pub fn read_jsonl<R: BufRead>(input: R) -> Result<Vec<TrialRecord>> {
    let mut out = Vec::new();
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}
