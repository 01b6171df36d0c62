//! Scenario configuration, Monte Carlo execution, persistence and scans.

mod io;
mod presets;
mod run;
mod scan;
mod schema;

pub use io::{file_entry, run_to_dir, OutputFile, RunManifest, RunSummary, MANIFEST_FILE, MOMENTUM_FILE, RECORDS_FILE};
pub use presets::{
    build_preset_scenarios, calibrated_noise, preset, CALIBRATED_DEPHASING, OAT_MU, OAT_PHOTONS, OAT_PROBE_DETUNING,
    PRESET_NAMES,
};
pub use run::{prepare, propagate, run_all, run_range, run_trial, Prepared, Spectrum, TrialPlan};
pub use scan::{parse_values, scan, set_parameter, write_scan_csv, ScanRow};
pub use schema::{
    FringeConfig, FringeMode, Metadata, MomentumConfig, RotationAxis, ScenarioConfig, Step, SCHEMA_VERSION,
};
