use std::fs::{self, File};
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::run::{run_range, Prepared};
use crate::analysis::{write_jsonl, AnalysisReport, Mode};
use crate::cavity::DispersiveShifts;
use crate::error::Result;
use crate::kinematics::write_spectrum_csv;

pub const RECORDS_FILE: &str = "records.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const MOMENTUM_FILE: &str = "momentum.csv";

/// Trials computed in parallel between writes.
const CHUNK: u64 = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

/// Headline numbers of an analysed run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub w: f64,
    pub w_db: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub n_trials: usize,
    pub ellipse_v_min: Option<f64>,
}

impl RunSummary {
    pub fn from_report(report: &AnalysisReport) -> Self {
        let best = &report.best().result;
        Self {
            w: best.w,
            w_db: best.w_db,
            ci_lo: best.ci_lo,
            ci_hi: best.ci_hi,
            n_trials: best.n_trials,
            ellipse_v_min: report.ellipse.as_ref().map(|e| e.v_min),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub scenario_id: String,
    pub name: String,
    pub code_version: String,
    /// The scenario as run, in the config file format.
    pub config_toml: String,
    pub master_seed: u64,
    pub n_atoms_effective: u32,
    pub survival: f64,
    pub shifts: DispersiveShifts,
    pub alpha: f64,
    pub analysis_mode: Mode,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub n_records: u64,
    /// False when the run stopped early; the record file then holds a
    /// valid prefix of the trials.
    pub complete: bool,
    pub error: Option<String>,
    pub files: Vec<OutputFile>,
    pub summary: Option<RunSummary>,
}

impl RunManifest {
    pub fn read(path: &Path) -> Result<Self> {
        Ok(serde_json::from_reader(File::open(path)?)?)
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let mut f = BufWriter::new(File::create(dir.join(MANIFEST_FILE))?);
        serde_json::to_writer_pretty(&mut f, self)?;
        f.write_all(b"\n")?;
        f.flush()?;
        Ok(())
    }
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

pub fn file_entry(dir: &Path, name: &str) -> Result<OutputFile> {
    let mut bytes = Vec::new();
    File::open(dir.join(name))?.read_to_end(&mut bytes)?;
    Ok(OutputFile { path: name.to_string(), sha256: hex::encode(Sha256::digest(&bytes)), bytes: bytes.len() as u64 })
}

/// Runs a prepared scenario into `dir`: record stream, kinematic CSVs and
/// the manifest. Records are written in trial-id order.
pub fn run_to_dir(prep: &Prepared, dir: &Path) -> Result<(RunManifest, PathBuf)> {
    fs::create_dir_all(dir)?;
    let started = unix_now();
    let mut manifest = RunManifest {
        schema_version: prep.config.schema_version,
        scenario_id: prep.scenario_id.clone(),
        name: prep.config.name.clone(),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        config_toml: prep.config.to_toml()?,
        master_seed: prep.config.master_seed,
        n_atoms_effective: prep.n_atoms,
        survival: prep.survival,
        shifts: prep.shifts,
        alpha: prep.alpha,
        analysis_mode: prep.mode,
        started_unix: started,
        finished_unix: started,
        n_records: 0,
        complete: false,
        error: None,
        files: Vec::new(),
        summary: None,
    };

    let mut names = Vec::new();
    if let Some(m) = &prep.momentum {
        m.write_csv(BufWriter::new(File::create(dir.join(MOMENTUM_FILE))?))?;
        names.push(MOMENTUM_FILE.to_string());
    }
    for (i, s) in prep.spectra.iter().enumerate() {
        let name = format!("spectrum_{i}.csv");
        write_spectrum_csv(&s.detuning_grid, &s.population, BufWriter::new(File::create(dir.join(&name))?))?;
        names.push(name);
    }

    let records_path = dir.join(RECORDS_FILE);
    let mut outcome = Ok(());
    if !prep.plans.is_empty() {
        let mut out = BufWriter::new(File::create(&records_path)?);
        let total = prep.n_trials() as u64;
        let mut next = 0;
        while next < total {
            let end = (next + CHUNK).min(total);
            match run_range(prep, next..end) {
                Ok(chunk) => {
                    write_jsonl(&chunk, &mut out)?;
                    manifest.n_records += chunk.len() as u64;
                }
                Err(e) => {
                    outcome = Err(e);
                    break;
                }
            }
            next = end;
        }
        out.flush()?;
        names.push(RECORDS_FILE.to_string());
    }

    for name in &names {
        manifest.files.push(file_entry(dir, name)?);
    }
    manifest.finished_unix = unix_now();
    manifest.complete = outcome.is_ok();
    if let Err(e) = &outcome {
        manifest.error = Some(e.to_string());
    }
    manifest.write(dir)?;
    outcome.map(|_| (manifest, records_path))
}
