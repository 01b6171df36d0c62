use std::f64::consts::{FRAC_PI_2, PI, TAU};

use super::schema::{FringeConfig, FringeMode, Metadata, MomentumConfig, RotationAxis, ScenarioConfig, Step, SCHEMA_VERSION};
use crate::analysis::{Mode, ReadoutKind};
use crate::cavity::{EnsembleGeometry, PhysicsParams};
use crate::dynamics::NoiseConfig;
use crate::error::{Error, Result};
use crate::kinematics::{Hyperfine, PulseKind};

/// Noise profile calibrated to the target squeezing levels.
pub fn calibrated_noise() -> NoiseConfig {
    NoiseConfig { imprecision_coeff: 7160.0, raman_decorrelation_fraction: 0.8, ..NoiseConfig::default() }
}

/// Collective dephasing of the calibrated lifetime runs (rad/ms).
pub const CALIBRATED_DEPHASING: f64 = 0.026;

/// Twist strength of the calibrated OAT runs.
pub const OAT_MU: f64 = 1.04e-3;

/// Probe photons during twisting.
pub const OAT_PHOTONS: f64 = 700.0;

/// Probe detuning during twisting, in units of `κ/2`.
pub const OAT_PROBE_DETUNING: f64 = 2.7;

fn base(name: &str, n_atoms: u32, n_trials: u32, description: &str) -> ScenarioConfig {
    ScenarioConfig {
        schema_version: SCHEMA_VERSION,
        name: name.to_string(),
        n_atoms,
        n_trials,
        master_seed: 2021,
        alpha: None,
        alpha_scan: None,
        analysis_mode: None,
        metadata: Metadata { description: description.to_string(), ..Default::default() },
        fringe: FringeConfig::default(),
        physics: PhysicsParams::default(),
        geometry: EnsembleGeometry::default(),
        noise: calibrated_noise(),
        momentum: MomentumConfig::default(),
        sequence: Vec::new(),
    }
}

fn physics_at(delta_c_mhz: f64) -> PhysicsParams {
    PhysicsParams { delta_c: TAU * delta_c_mhz * 1e6, ..Default::default() }
}

/// Scattering per photon scales as `1/δc²` away from the reference detuning.
fn oat_noise() -> NoiseConfig {
    let n = calibrated_noise();
    NoiseConfig { scatter_coeff: n.scatter_coeff * (175.0f64 / 350.0).powi(2), ..n }
}

fn rotation(angle: f64) -> Step {
    Step::Rotation { angle, axis: RotationAxis::X, add_alpha: false, readout_pulse: false }
}

fn oat_twist() -> Step {
    Step::Twist { mu: OAT_MU, chi_oat: TAU * 10.0, echo: true, photons: OAT_PHOTONS }
}

fn pumped(fringe: FringeMode) -> Step {
    Step::Readout { kind: ReadoutKind::Pumped, fringe }
}

fn oat_metadata(description: &str) -> Metadata {
    Metadata {
        description: description.to_string(),
        probe_detuning_half_kappa: Some(OAT_PROBE_DETUNING),
        twist_photons: Some(OAT_PHOTONS),
    }
}

/// Squeezed Mach–Zehnder sequence with each arm lasting `t_arm`.
fn mz_sequence(t_arm: f64, phase_basis: bool) -> Vec<Step> {
    let mut seq = vec![
        oat_twist(),
        Step::Rotation {
            angle: if phase_basis { FRAC_PI_2 } else { 0.0 },
            axis: RotationAxis::X,
            add_alpha: true,
            readout_pulse: false,
        },
        Step::Evolve { t_evol: t_arm, signal_phase: 0.0 },
        rotation(PI),
        Step::Evolve { t_evol: t_arm, signal_phase: 0.0 },
    ];
    if phase_basis {
        seq.push(Step::Rotation { angle: FRAC_PI_2, axis: RotationAxis::X, add_alpha: false, readout_pulse: true });
        seq.push(pumped(FringeMode::LastRotation));
    } else {
        seq.push(pumped(FringeMode::Insert));
    }
    seq
}

fn qnd_vs_photons() -> ScenarioConfig {
    let mut c = base("qnd-vs-photons", 1170, 2000, "QND pre-measurement squeezing versus probe photon number");
    c.analysis_mode = Some(Mode::Qnd);
    c.sequence = vec![Step::Qnd { photons: 600.0 }, pumped(FringeMode::Insert)];
    c
}

fn oat_squeeze() -> ScenarioConfig {
    let mut c = base("oat-squeeze", 730, 2000, "");
    c.metadata = oat_metadata("Cavity-feedback one-axis twisting");
    c.physics = physics_at(350.0);
    c.noise = oat_noise();
    c.analysis_mode = Some(Mode::Oat);
    c.sequence = vec![
        oat_twist(),
        Step::Rotation { angle: 0.0, axis: RotationAxis::X, add_alpha: true, readout_pulse: false },
        pumped(FringeMode::Insert),
    ];
    c
}

fn squeezed_mz() -> ScenarioConfig {
    let mut c = base("squeezed-mz", 660, 1000, "");
    c.metadata = oat_metadata("Squeezed Mach-Zehnder interferometer; variance ellipse versus readout rotation");
    c.physics = physics_at(350.0);
    c.noise = NoiseConfig { dephasing_coeff: CALIBRATED_DEPHASING, ..oat_noise() };
    c.analysis_mode = Some(Mode::Mz);
    c.sequence = mz_sequence(0.112e-3, true);
    let alpha0 = crate::dynamics::optimal_twist_analysis(c.n_atoms, OAT_MU).map(|o| o.alpha0).unwrap_or(0.0);
    c.alpha_scan = Some((0..9).map(|i| alpha0 + PI * (i as f64 - 4.0) / 9.0).collect());
    c
}

fn lifetime_scan(phase_basis: bool) -> ScenarioConfig {
    let (name, what) = if phase_basis {
        ("lifetime-scan", "phase basis")
    } else {
        ("lifetime-population", "population basis")
    };
    let mut c = base(name, 660, 1000, "");
    c.metadata = oat_metadata(&format!("Squeezing lifetime in the {what}; scan sequence.*.t_evol"));
    c.physics = physics_at(350.0);
    c.noise = NoiseConfig { dephasing_coeff: CALIBRATED_DEPHASING, ..oat_noise() };
    c.analysis_mode = Some(Mode::Mz);
    c.sequence = mz_sequence(0.112e-3, phase_basis);
    c
}

fn bragg_ladder() -> ScenarioConfig {
    let mut c = base("bragg-ladder", 1000, 1, "Bragg ladder to a 0/10 ħk superposition with ideal pulses");
    c.noise = NoiseConfig { pulse_loss_prob: 0.0, ..calibrated_noise() };
    c.momentum = MomentumConfig { classes: vec![(0.0, 1.0, Hyperfine::Down)], ..Default::default() };
    let rabi = TAU * 10e3;
    c.sequence = vec![Step::MomentumPulse { pulse_kind: PulseKind::Bragg, rabi, area: FRAC_PI_2, base_hbark: 0.0 }];
    for b in [2.0, 4.0, 6.0, 8.0] {
        c.sequence.push(Step::MomentumPulse { pulse_kind: PulseKind::Bragg, rabi, area: PI, base_hbark: b });
    }
    c
}

fn velocimetry() -> ScenarioConfig {
    let mut c = base("velocimetry", 1000, 1, "Raman velocimetry of a 0/4 ħk superposition");
    c.momentum = MomentumConfig {
        classes: vec![(0.0, 0.5, Hyperfine::Down), (4.0, 0.5, Hyperfine::Down)],
        ..Default::default()
    };
    c.sequence = vec![Step::Velocimetry {
        rabi: TAU * 1.4e3,
        detuning_min: -TAU * 20e3,
        detuning_max: TAU * 80e3,
        points: 2001,
    }];
    c
}

/// Names of the shipped scenarios, in listing order.
pub const PRESET_NAMES: [&str; 7] = [
    "qnd-vs-photons",
    "oat-squeeze",
    "squeezed-mz",
    "lifetime-scan",
    "lifetime-population",
    "bragg-ladder",
    "velocimetry",
];

pub fn preset(name: &str) -> Result<ScenarioConfig> {
    match name {
        "qnd-vs-photons" => Ok(qnd_vs_photons()),
        "oat-squeeze" => Ok(oat_squeeze()),
        "squeezed-mz" => Ok(squeezed_mz()),
        "lifetime-scan" => Ok(lifetime_scan(true)),
        "lifetime-population" => Ok(lifetime_scan(false)),
        "bragg-ladder" => Ok(bragg_ladder()),
        "velocimetry" => Ok(velocimetry()),
        _ => Err(Error::Config(format!("unknown preset `{name}` (known: {})", PRESET_NAMES.join(", ")))),
    }
}

/// Every shipped scenario.
pub fn build_preset_scenarios() -> Vec<(&'static str, ScenarioConfig)> {
    PRESET_NAMES.iter().map(|&n| (n, preset(n).expect("shipped preset"))).collect()
}
