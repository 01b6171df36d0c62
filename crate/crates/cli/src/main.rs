use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use squint_core::analysis::{analyze, read_jsonl, AnalysisReport, BootstrapOptions, Mode};
use squint_core::cavity::PhysicsParams;
use squint_core::harness::{
    file_entry, parse_values, prepare, preset, run_to_dir, scan, write_scan_csv, RunManifest, RunSummary,
    ScenarioConfig, MANIFEST_FILE, PRESET_NAMES,
};
use squint_core::vibration::{db_below_sql, integrate_phase_noise, PsdTable};
use squint_core::Error;

const ANALYSIS_FILE: &str = "analysis.json";
const SCAN_FILE: &str = "scan.csv";

#[derive(Parser)]
#[command(name = "squint", version, about = "Squeezed-state atom interferometer simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write records, manifest and analysis.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `master_seed` from the config.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, env = "SQUINT_OUT_DIR", default_value = "squint-out")]
        out: PathBuf,
    },
    /// Run a scenario once per parameter value and tabulate W.
    Scan {
        #[arg(long)]
        config: PathBuf,
        /// Dotted path into the config, e.g. `sequence.0.photons`.
        #[arg(long)]
        param: String,
        /// `a,b,c`, `lin:START:END:N` or `log:START:END:N`.
        #[arg(long, allow_hyphen_values = true)]
        values: String,
        #[arg(long, env = "SQUINT_OUT_DIR", default_value = "squint-out")]
        out: PathBuf,
    },
    /// Analyse a record file. Shifts are read from the manifest next to it.
    Analyze {
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        mode: Option<String>,
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Also write the full report as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Vibration phase noise of a PSD file against the atom SQL.
    Budget {
        /// Two columns: frequency (Hz), acceleration PSD ((m/s²)²/Hz).
        #[arg(long)]
        psd: PathBuf,
        /// Evolution time in ms.
        #[arg(long)]
        tevol: f64,
        #[arg(long)]
        atoms: f64,
        /// Hold the PSD at its end values outside the table.
        #[arg(long)]
        extrapolate: bool,
    },
    /// List or print the built-in scenarios.
    Presets {
        #[command(subcommand)]
        action: PresetAction,
    },
}

#[derive(Subcommand)]
enum PresetAction {
    List,
    Dump { name: String },
}

/// Error tagged with the process exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure { code: if e.is_config() { 2 } else { 3 }, message: e.to_string() }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure { code: 3, message: format!("I/O error: {e}") }
    }
}

fn config_error(message: String) -> Failure {
    Failure { code: 2, message }
}

fn load_config(path: &Path) -> Result<ScenarioConfig, Failure> {
    let text = fs::read_to_string(path).map_err(|e| config_error(format!("cannot read {}: {e}", path.display())))?;
    ScenarioConfig::from_toml(&text).map_err(|e| config_error(e.to_string()))
}

fn print_summary(scenario_id: &str, s: &RunSummary) -> io::Result<()> {
    let mut out = io::stdout().lock();
    writeln!(out, "scenario_id,W,W_db,ci_lo,ci_hi,n_trials")?;
    writeln!(out, "{scenario_id},{},{},{},{},{}", s.w, s.w_db, s.ci_lo, s.ci_hi, s.n_trials)
}

fn write_report(report: &AnalysisReport, path: &Path) -> Result<(), Failure> {
    let mut f = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut f, report).map_err(|e| Failure { code: 3, message: e.to_string() })?;
    f.write_all(b"\n")?;
    f.flush()?;
    Ok(())
}

fn simulate(config: &Path, seed: Option<u64>, out: &Path) -> Result<(), Failure> {
    let mut cfg = load_config(config)?;
    if let Some(seed) = seed {
        cfg.master_seed = seed;
    }
    let prep = prepare(&cfg)?;
    let (mut manifest, records_path) = run_to_dir(&prep, out)?;
    if let Some(err) = &manifest.error {
        return Err(Failure { code: 3, message: format!("run stopped after {} records: {err}", manifest.n_records) });
    }
    if !cfg.has_spin_steps() {
        println!("scenario_id,n_records");
        println!("{},{}", manifest.scenario_id, manifest.n_records);
        return Ok(());
    }
    let records = read_jsonl(BufReader::new(File::open(&records_path)?))?;
    let report = analyze(&records, &prep.shifts, prep.mode, None, &BootstrapOptions::default())?;
    write_report(&report, &out.join(ANALYSIS_FILE))?;
    manifest.files.push(file_entry(out, ANALYSIS_FILE)?);
    let summary = RunSummary::from_report(&report);
    manifest.summary = Some(summary.clone());
    manifest.write(out)?;
    print_summary(&manifest.scenario_id, &summary)?;
    Ok(())
}

fn run_scan(config: &Path, param: &str, values: &str, out: &Path) -> Result<(), Failure> {
    let cfg = load_config(config)?;
    let values = parse_values(values)?;
    let rows = scan(&cfg, param, &values, &BootstrapOptions::default())?;
    fs::create_dir_all(out)?;
    write_scan_csv(&rows, BufWriter::new(File::create(out.join(SCAN_FILE))?))?;
    write_scan_csv(&rows, io::stdout().lock())?;
    Ok(())
}

fn run_analyze(records: &Path, mode: Option<&str>, manifest: Option<&Path>, json: Option<&Path>) -> Result<(), Failure> {
    let manifest_path = match manifest {
        Some(p) => p.to_path_buf(),
        None => records.parent().unwrap_or(Path::new(".")).join(MANIFEST_FILE),
    };
    let manifest = RunManifest::read(&manifest_path)
        .map_err(|e| config_error(format!("cannot read manifest {}: {e}", manifest_path.display())))?;
    let mode = match mode {
        Some(m) => m.parse::<Mode>()?,
        None => manifest.analysis_mode,
    };
    let file = File::open(records).map_err(|e| config_error(format!("cannot read {}: {e}", records.display())))?;
    let records = read_jsonl(BufReader::new(file))?;
    let report = analyze(&records, &manifest.shifts, mode, None, &BootstrapOptions::default())?;
    if let Some(path) = json {
        write_report(&report, path)?;
    }
    print_summary(&report.scenario_id, &RunSummary::from_report(&report))?;
    Ok(())
}

fn budget(psd: &Path, tevol_ms: f64, atoms: f64, extrapolate: bool) -> Result<(), Failure> {
    if !(atoms > 0.0 && atoms.is_finite()) {
        return Err(config_error(format!("--atoms must be positive, got {atoms}")));
    }
    let table = PsdTable::from_file(psd).map_err(|e| match e {
        Error::Io(io) => config_error(format!("cannot read {}: {io}", psd.display())),
        other => other.into(),
    })?;
    let noise = integrate_phase_noise(&table, tevol_ms * 1e-3, &PhysicsParams::default(), extrapolate)?;
    let sql = 1.0 / atoms.sqrt();
    println!("t_evol_ms,n_atoms,phi_rms,phi_sq,sql_rms,db_below_sql,extrapolated");
    println!(
        "{tevol_ms},{atoms},{},{},{sql},{},{}",
        noise.phi_rms,
        noise.phi_sq,
        db_below_sql(noise.phi_rms, atoms),
        noise.extrapolated
    );
    Ok(())
}

fn presets(action: &PresetAction) -> Result<(), Failure> {
    match action {
        PresetAction::List => {
            for name in PRESET_NAMES {
                let cfg = preset(name)?;
                println!("{name}\t{}", cfg.metadata.description);
            }
        }
        PresetAction::Dump { name } => print!("{}", preset(name)?.to_toml()?),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Simulate { config, seed, out } => simulate(config, *seed, out),
        Command::Scan { config, param, values, out } => run_scan(config, param, values, out),
        Command::Analyze { records, mode, manifest, json } => {
            run_analyze(records, mode.as_deref(), manifest.as_deref(), json.as_deref())
        }
        Command::Budget { psd, tevol, atoms, extrapolate } => budget(psd, *tevol, *atoms, *extrapolate),
        Command::Presets { action } => presets(action),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("squint: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
