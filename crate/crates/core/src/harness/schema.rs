use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{Mode, ReadoutKind};
use crate::cavity::{EnsembleGeometry, PhysicsParams};
use crate::dynamics::NoiseConfig;
use crate::error::{Error, Result};
use crate::kinematics::{Hyperfine, PulseKind};

pub const SCHEMA_VERSION: u32 = 1;

/// Fixed rotation axis of a [`Step::Rotation`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RotationAxis {
    X,
    Y,
    Z,
}

/// How fringe trials obtain their scanned-phase `π/2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FringeMode {
    /// Insert an extra `π/2` with azimuth `φ` just before the readout.
    Insert,
    /// Replace the axis of the rotation flagged `readout_pulse` by azimuth `φ`.
    LastRotation,
}

/// One element of a pulse sequence. Angles in rad, times in s, rates in rad/s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Step {
    /// Doppler-selective π pulses on a thermal cloud; the kept fraction
    /// scales the atom number.
    VelocitySelect {
        rabi: f64,
        #[serde(default = "one")]
        passes: u32,
        #[serde(default)]
        center: f64,
    },
    Rotation {
        angle: f64,
        #[serde(default = "default_axis")]
        axis: RotationAxis,
        /// Adds the scenario's squeezing-axis angle `α` to `angle`.
        #[serde(default)]
        add_alpha: bool,
        /// Marks the pulse whose azimuth fringe trials scan.
        #[serde(default)]
        readout_pulse: bool,
    },
    Twist {
        mu: f64,
        #[serde(default = "default_chi_oat")]
        chi_oat: f64,
        #[serde(default = "yes")]
        echo: bool,
        /// Probe photons scattered while twisting.
        #[serde(default)]
        photons: f64,
    },
    /// Pre-measurement: two windows of `photons` separated by a `π` pulse,
    /// followed by a `π` pulse restoring the orientation.
    Qnd { photons: f64 },
    Evolve {
        t_evol: f64,
        #[serde(default)]
        signal_phase: f64,
    },
    Readout {
        kind: ReadoutKind,
        fringe: FringeMode,
    },
    MomentumPulse {
        pulse_kind: PulseKind,
        rabi: f64,
        area: f64,
        /// Lower momentum of the addressed pair (ħk).
        base_hbark: f64,
    },
    Velocimetry {
        rabi: f64,
        detuning_min: f64,
        detuning_max: f64,
        points: usize,
    },
}

fn one() -> u32 {
    1
}
fn yes() -> bool {
    true
}
fn default_axis() -> RotationAxis {
    RotationAxis::X
}
fn default_chi_oat() -> f64 {
    std::f64::consts::TAU * 10.0
}

impl Step {
    pub fn name(&self) -> &'static str {
        match self {
            Step::VelocitySelect { .. } => "velocity_select",
            Step::Rotation { .. } => "rotation",
            Step::Twist { .. } => "twist",
            Step::Qnd { .. } => "qnd",
            Step::Evolve { .. } => "evolve",
            Step::Readout { .. } => "readout",
            Step::MomentumPulse { .. } => "momentum_pulse",
            Step::Velocimetry { .. } => "velocimetry",
        }
    }

    /// Acts on the collective spin.
    pub fn is_spin(&self) -> bool {
        matches!(self, Step::Rotation { .. } | Step::Twist { .. } | Step::Qnd { .. } | Step::Evolve { .. } | Step::Readout { .. })
    }
}

/// Initial axial momentum distribution for kinematic steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MomentumConfig {
    /// Thermal full width at half maximum (ħk), used when `classes` is empty.
    pub fwhm: f64,
    pub center: f64,
    /// Discrete classes `(p [ħk], weight, hyperfine)`.
    pub classes: Vec<(f64, f64, Hyperfine)>,
    pub bins_per_hbark: u32,
}

impl Default for MomentumConfig {
    fn default() -> Self {
        Self { fwhm: 5.0, center: 0.0, classes: Vec::new(), bins_per_hbark: 100 }
    }
}

/// Fringe scan layout shared by every fringe group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FringeConfig {
    /// Evenly spaced azimuths over one period.
    pub phases: usize,
    pub repeats: usize,
}

impl Default for FringeConfig {
    fn default() -> Self {
        Self { phases: 16, repeats: 10 }
    }
}

/// Free-form labels copied into outputs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Metadata {
    pub description: String,
    /// Probe detuning used for twisting, in units of `κ/2`.
    pub probe_detuning_half_kappa: Option<f64>,
    /// Nominal twisting photon number.
    pub twist_photons: Option<f64>,
}

/// A complete simulation scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    pub name: String,
    pub n_atoms: u32,
    /// Signal trials (per `alpha_scan` entry if given).
    pub n_trials: u32,
    #[serde(default)]
    pub master_seed: u64,
    /// Squeezing-axis angle; optimal for the twist when absent.
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub alpha_scan: Option<Vec<f64>>,
    #[serde(default)]
    pub analysis_mode: Option<Mode>,
    #[serde(default)]
    pub metadata: Metadata,
    #[serde(default)]
    pub fringe: FringeConfig,
    #[serde(default)]
    pub physics: PhysicsParams,
    #[serde(default)]
    pub geometry: EnsembleGeometry,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub momentum: MomentumConfig,
    pub sequence: Vec<Step>,
}

fn finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be finite, got {v}")))
    }
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// First 16 hex digits of the SHA-256 of the canonical serialization.
    /// Field order is fixed by the schema, so key order in the source file
    /// does not matter.
    pub fn scenario_id(&self) -> Result<String> {
        let canonical = self.to_toml()?;
        Ok(hex::encode(&Sha256::digest(canonical.as_bytes())[..8]))
    }

    pub fn has_spin_steps(&self) -> bool {
        self.sequence.iter().any(Step::is_spin)
    }

    /// QND pre-measurement photons (0 without a `qnd` step).
    pub fn qnd_photons(&self) -> f64 {
        self.sequence.iter().map(|s| if let Step::Qnd { photons } = s { *photons } else { 0.0 }).sum()
    }

    /// Total twist over all `twist` steps.
    pub fn total_twist(&self) -> f64 {
        self.sequence.iter().map(|s| if let Step::Twist { mu, .. } = s { *mu } else { 0.0 }).sum()
    }

    /// Estimator implied by the sequence unless set explicitly.
    pub fn mode(&self) -> Mode {
        if let Some(m) = self.analysis_mode {
            return m;
        }
        if self.qnd_photons() > 0.0 {
            Mode::Qnd
        } else if self.sequence.iter().any(|s| matches!(s, Step::Evolve { .. })) {
            Mode::Mz
        } else {
            Mode::Oat
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version {} unsupported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.sequence.is_empty() {
            return Err(Error::Config("sequence must not be empty".into()));
        }
        self.physics.validate()?;
        self.noise.validate()?;
        if let Some(a) = self.alpha {
            finite("alpha", a)?;
        }
        if let Some(scan) = &self.alpha_scan {
            if scan.is_empty() {
                return Err(Error::Config("alpha_scan must not be empty".into()));
            }
            for &a in scan {
                finite("alpha_scan entry", a)?;
            }
        }
        let mut seen_spin = false;
        for (i, step) in self.sequence.iter().enumerate() {
            let at = |what: &str| Error::Config(format!("sequence[{i}] ({}): {what}", step.name()));
            match step {
                Step::VelocitySelect { rabi, passes, center } => {
                    if seen_spin {
                        return Err(at("velocity selection must precede spin steps"));
                    }
                    if !(*rabi > 0.0) || *passes == 0 || !center.is_finite() {
                        return Err(at("needs rabi > 0, passes ≥ 1 and a finite center"));
                    }
                }
                Step::Rotation { angle, .. } => finite(&format!("sequence[{i}].angle"), *angle)?,
                Step::Twist { mu, chi_oat, photons, .. } => {
                    finite(&format!("sequence[{i}].mu"), *mu)?;
                    if !(*chi_oat > 0.0) || !(*photons >= 0.0) {
                        return Err(at("needs chi_oat > 0 and photons ≥ 0"));
                    }
                }
                Step::Qnd { photons } => {
                    if !(*photons >= 0.0 && photons.is_finite()) {
                        return Err(at("photons must be ≥ 0"));
                    }
                }
                Step::Evolve { t_evol, signal_phase } => {
                    if !(*t_evol >= 0.0 && t_evol.is_finite()) {
                        return Err(at("t_evol must be ≥ 0"));
                    }
                    finite(&format!("sequence[{i}].signal_phase"), *signal_phase)?;
                }
                Step::Readout { .. } => {
                    if i + 1 != self.sequence.len() {
                        return Err(at("readout must be the last step"));
                    }
                }
                Step::MomentumPulse { rabi, area, base_hbark, .. } => {
                    if !(*rabi > 0.0) || !area.is_finite() || !base_hbark.is_finite() {
                        return Err(at("needs rabi > 0 and finite area and base"));
                    }
                }
                Step::Velocimetry { rabi, detuning_min, detuning_max, points } => {
                    if !(*rabi > 0.0) || !(detuning_min < detuning_max) || *points < 2 {
                        return Err(at("needs rabi > 0, detuning_min < detuning_max and ≥ 2 points"));
                    }
                }
            }
            seen_spin |= step.is_spin();
        }
        if seen_spin {
            if self.n_atoms < 2 {
                return Err(Error::Config("n_atoms must be at least 2".into()));
            }
            if self.n_trials == 0 {
                return Err(Error::Config("n_trials must be positive".into()));
            }
            let Some(Step::Readout { fringe, .. }) = self.sequence.last() else {
                return Err(Error::Config("a spin sequence must end with a readout".into()));
            };
            if *fringe == FringeMode::LastRotation
                && !self.sequence.iter().any(|s| matches!(s, Step::Rotation { readout_pulse: true, .. }))
            {
                return Err(Error::Config("fringe = last_rotation needs a rotation with readout_pulse = true".into()));
            }
            if self.fringe.phases < 5 || self.fringe.repeats == 0 {
                return Err(Error::Config("fringe needs ≥ 5 phases and ≥ 1 repeat".into()));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
schema_version = 1
name = "t"
n_atoms = 100
n_trials = 50

[[sequence]]
type = "qnd"
photons = 500.0

[[sequence]]
type = "readout"
kind = "pumped"
fringe = "insert"
"#;

    #[test]
    fn parses_minimal() {
        let c = ScenarioConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(c.mode(), Mode::Qnd);
        assert_eq!(c.qnd_photons(), 500.0);
    }

    #[test]
    fn unknown_key_rejected() {
        let text = MINIMAL.replace("n_trials = 50", "n_trials = 50\nbogus = 1");
        assert!(matches!(ScenarioConfig::from_toml(&text), Err(Error::Config(_))));
        let text = MINIMAL.replace("photons = 500.0", "photons = 500.0\nwindows = 3");
        assert!(ScenarioConfig::from_toml(&text).is_err());
    }

    #[test]
    fn empty_sequence_rejected() {
        let text = MINIMAL.split("[[sequence]]").next().unwrap().to_string() + "sequence = []\n";
        assert!(matches!(ScenarioConfig::from_toml(&text), Err(Error::Config(_))));
    }

    #[test]
    fn readout_must_be_last() {
        let text = MINIMAL.to_string() + "\n[[sequence]]\ntype = \"evolve\"\nt_evol = 1e-4\n";
        assert!(ScenarioConfig::from_toml(&text).is_err());
    }

    #[test]
    fn hash_ignores_key_order() {
        let reordered = r#"
n_trials = 50
name = "t"
schema_version = 1
n_atoms = 100

[[sequence]]
photons = 500.0
type = "qnd"

[[sequence]]
fringe = "insert"
type = "readout"
kind = "pumped"
"#;
        let a = ScenarioConfig::from_toml(MINIMAL).unwrap().scenario_id().unwrap();
        let b = ScenarioConfig::from_toml(reordered).unwrap().scenario_id().unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 16);
        let c = ScenarioConfig::from_toml(&MINIMAL.replace("500.0", "501.0")).unwrap().scenario_id().unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn round_trips_through_toml() {
        let c = ScenarioConfig::from_toml(MINIMAL).unwrap();
        let again = ScenarioConfig::from_toml(&c.to_toml().unwrap()).unwrap();
        assert_eq!(c, again);
    }
}
