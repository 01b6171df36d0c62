use std::f64::consts::PI;

use squint_core::analysis::{analyze, read_jsonl, theta_from_record, BootstrapOptions, JzMode, Mode, Role};
use squint_core::dynamics::NoiseConfig;
use squint_core::harness::{
    build_preset_scenarios, file_entry, parse_values, prepare, preset, propagate, run_all, run_to_dir, run_trial,
    scan, set_parameter, FringeConfig, ScenarioConfig, Step, MANIFEST_FILE, RECORDS_FILE,
};
use squint_core::kinematics::doppler_detuning;
use squint_core::Error;

fn small_qnd() -> ScenarioConfig {
    let mut c = preset("qnd-vs-photons").unwrap();
    c.n_atoms = 200;
    c.n_trials = 60;
    c.fringe = FringeConfig { phases: 8, repeats: 4 };
    c
}

#[test]
fn presets_echo_published_settings() {
    let mz = preset("squeezed-mz").unwrap();
    assert_eq!(mz.n_atoms, 660);
    let arms: Vec<f64> = mz.sequence.iter().filter_map(|s| if let Step::Evolve { t_evol, .. } = s { Some(*t_evol) } else { None }).collect();
    assert_eq!(arms, vec![0.112e-3, 0.112e-3]);

    let oat = preset("oat-squeeze").unwrap();
    assert_eq!(oat.n_atoms, 730);
    assert_eq!(oat.metadata.probe_detuning_half_kappa, Some(2.7));
    assert_eq!(oat.metadata.twist_photons, Some(700.0));
    assert!((oat.physics.delta_c - 2.0 * PI * 350e6).abs() < 1.0);

    let qnd = preset("qnd-vs-photons").unwrap();
    assert_eq!(qnd.n_atoms, 1170);
    assert!((qnd.physics.delta_c - 2.0 * PI * 175e6).abs() < 1.0);
    assert_eq!(qnd.qnd_photons(), 600.0);
    assert!(preset("nope").unwrap_err().is_config());
}

#[test]
fn every_preset_prepares() {
    for (name, cfg) in build_preset_scenarios() {
        let prep = prepare(&cfg).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(prep.config.name, name);
    }
}

#[test]
fn bragg_ladder_reaches_ten_hbark() {
    let prep = prepare(&preset("bragg-ladder").unwrap()).unwrap();
    let d = prep.momentum.unwrap();
    assert!((d.weight_near(0.0, 0.05) - 0.5).abs() < 1e-9);
    assert!((d.weight_near(10.0, 0.05) - 0.5).abs() < 1e-9);
    assert!(prep.plans.is_empty());
}

#[test]
fn velocimetry_peaks_are_four_recoils_apart() {
    let cfg = preset("velocimetry").unwrap();
    let prep = prepare(&cfg).unwrap();
    let s = &prep.spectra[0];
    let mid = s.detuning_grid.len() / 2;
    let peak = |range: std::ops::Range<usize>| {
        range.max_by(|&a, &b| s.population[a].total_cmp(&s.population[b])).map(|i| s.detuning_grid[i]).unwrap()
    };
    let split = s.detuning_grid.iter().position(|&d| d > doppler_detuning(2.0, &cfg.physics)).unwrap();
    let (lo, hi) = (peak(0..split), peak(split..s.detuning_grid.len()));
    let want = 4.0 * 4.0 * cfg.physics.recoil_frequency();
    assert!(((hi - lo) / want - 1.0).abs() < 0.02, "{} vs {}", hi - lo, want);
    assert!(mid > 0);
}

#[test]
fn empty_sequence_rejected() {
    let mut c = small_qnd();
    c.sequence.clear();
    assert!(matches!(prepare(&c), Err(Error::Config(_))));
}

#[test]
fn same_seed_same_bytes_any_thread_count() {
    let cfg = small_qnd();
    let prep = prepare(&cfg).unwrap();
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    run_to_dir(&prep, dirs[0].path()).unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
    pool.install(|| run_to_dir(&prep, dirs[1].path())).unwrap();
    let a = std::fs::read(dirs[0].path().join(RECORDS_FILE)).unwrap();
    let b = std::fs::read(dirs[1].path().join(RECORDS_FILE)).unwrap();
    assert!(!a.is_empty());
    assert_eq!(a, b);

    let mut other = cfg.clone();
    other.master_seed += 1;
    let c = run_all(&prepare(&other).unwrap()).unwrap();
    let first = read_jsonl(&a[..]).unwrap();
    assert_ne!(first[0].omega_1p, c[0].omega_1p);
}

#[test]
fn manifest_lists_files_with_checksums() {
    let prep = prepare(&small_qnd()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let (manifest, _) = run_to_dir(&prep, dir.path()).unwrap();
    assert!(manifest.complete);
    assert_eq!(manifest.n_records as usize, prep.n_trials());
    assert!(dir.path().join(MANIFEST_FILE).exists());
    for f in &manifest.files {
        assert_eq!(&file_entry(dir.path(), &f.path).unwrap(), f);
    }
    let again = ScenarioConfig::from_toml(&manifest.config_toml).unwrap();
    assert_eq!(again.scenario_id().unwrap(), manifest.scenario_id);
    let records = read_jsonl(std::io::BufReader::new(std::fs::File::open(dir.path().join(RECORDS_FILE)).unwrap())).unwrap();
    assert!(records.iter().all(|r| r.scenario_id == manifest.scenario_id));
    assert!(records.iter().enumerate().all(|(i, r)| r.trial_id == i as u64));
}

#[test]
fn trial_order_does_not_matter() {
    let prep = prepare(&small_qnd()).unwrap();
    let forward = run_all(&prep).unwrap();
    let mut backward: Vec<_> = (0..prep.n_trials() as u64).rev().map(|id| run_trial(&prep, id).unwrap()).collect();
    backward.reverse();
    assert_eq!(forward, backward);
    let opts = BootstrapOptions { resamples: 200, ..Default::default() };
    let mut shuffled = forward.clone();
    shuffled.reverse();
    let a = analyze(&forward, &prep.shifts, Mode::Qnd, None, &opts).unwrap();
    let b = analyze(&shuffled, &prep.shifts, Mode::Qnd, None, &opts).unwrap();
    assert_eq!(a.points[0].result.w, b.points[0].result.w);
}

fn noise_free_mz(phi: f64, n_trials: u32) -> ScenarioConfig {
    let mut c = preset("squeezed-mz").unwrap();
    c.alpha_scan = None;
    c.n_trials = n_trials;
    c.noise = NoiseConfig::noiseless();
    let mut arm = 0;
    for s in c.sequence.iter_mut() {
        if let Step::Evolve { signal_phase, .. } = s {
            *signal_phase = if arm == 0 { -phi / 2.0 } else { phi / 2.0 };
            arm += 1;
        }
    }
    c
}

#[test]
fn noise_free_interferometer_reads_sine_of_phase() {
    let phi = 0.02;
    let prep = prepare(&noise_free_mz(phi, 1000)).unwrap();
    // Exact geometry: the readout maps the phase onto Jz = J sin φ.
    let (state, ledger) = propagate(&prep, 0).unwrap();
    let m = state.moments();
    let length = m.bloch_length();
    assert!((m.mean[2] / length - phi.sin()).abs() < 1e-9, "{}", m.mean[2] / length);
    assert_eq!(ledger.mean_deficit, [0.0; 3]);

    // Monte Carlo: mean θ_f over 10³ trials within 3 standard errors.
    let records = run_all(&prep).unwrap();
    let report = analyze(&records, &prep.shifts, Mode::Mz, None, &BootstrapOptions { resamples: 200, ..Default::default() }).unwrap();
    let fit = report.squeezed.final_readout;
    let thetas: Vec<f64> = records
        .iter()
        .filter(|r| r.role == Role::Signal)
        .map(|r| theta_from_record(r, &fit, prep.shifts.epsilon, JzMode::PumpedFinal).unwrap())
        .collect();
    let n = thetas.len() as f64;
    let mean = thetas.iter().sum::<f64>() / n;
    let var = thetas.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let se = (var / n + (phi * fit.std_errors[1] / fit.amplitude).powi(2)).sqrt();
    assert!((mean - phi.sin()).abs() < 3.0 * se, "{mean} vs {} (se {se})", phi.sin());
}

#[test]
fn injected_rotation_is_recovered() {
    let phi = 0.01;
    let mut cfg = noise_free_mz(phi, 400);
    cfg.noise = squeezed_noise();
    let prep = prepare(&cfg).unwrap();
    let records = run_all(&prep).unwrap();
    let report = analyze(&records, &prep.shifts, Mode::Mz, None, &BootstrapOptions { resamples: 200, ..Default::default() }).unwrap();
    let fit = report.squeezed.final_readout;
    let thetas: Vec<f64> = records
        .iter()
        .filter(|r| r.role == Role::Signal)
        .map(|r| theta_from_record(r, &fit, prep.shifts.epsilon, JzMode::PumpedFinal).unwrap())
        .collect();
    let n = thetas.len() as f64;
    let mean = thetas.iter().sum::<f64>() / n;
    let sd = (thetas.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    assert!((mean - phi).abs() < 3.0 * (sd / n.sqrt()).hypot(phi * fit.std_errors[1] / fit.amplitude));
}

fn squeezed_noise() -> NoiseConfig {
    preset("squeezed-mz").unwrap().noise
}

#[test]
fn premeasurement_subtracts_projection_noise() {
    let mut cfg = preset("qnd-vs-photons").unwrap();
    cfg.n_atoms = 400;
    cfg.n_trials = 300;
    let prep = prepare(&cfg).unwrap();
    let records = run_all(&prep).unwrap();
    let report = analyze(&records, &prep.shifts, Mode::Qnd, None, &BootstrapOptions { resamples: 200, ..Default::default() }).unwrap();
    let f = report.squeezed;
    let signal: Vec<_> = records.iter().filter(|r| r.role == Role::Signal).collect();
    let var = |x: &[f64]| {
        let m = x.iter().sum::<f64>() / x.len() as f64;
        x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64
    };
    let theta_f: Vec<f64> =
        signal.iter().map(|r| theta_from_record(r, &f.final_readout, prep.shifts.epsilon, JzMode::PumpedFinal).unwrap()).collect();
    let diff: Vec<f64> = signal
        .iter()
        .zip(&theta_f)
        .map(|(r, tf)| theta_from_record(r, &f.pre_measurement.unwrap(), prep.shifts.epsilon, JzMode::QndPre).unwrap() - tf)
        .collect();
    assert!(var(&diff) < var(&theta_f), "{} vs {}", var(&diff), var(&theta_f));
    assert!(report.points[0].result.w < 1.0);
}

#[test]
fn wildcard_path_sets_every_arm() {
    let cfg = set_parameter(&preset("lifetime-scan").unwrap(), "sequence.*.t_evol", 0.5e-3).unwrap();
    let arms: Vec<f64> = cfg.sequence.iter().filter_map(|s| if let Step::Evolve { t_evol, .. } = s { Some(*t_evol) } else { None }).collect();
    assert_eq!(arms, vec![0.5e-3, 0.5e-3]);
    let cfg = set_parameter(&cfg, "noise.dephasing_coeff", 0.1).unwrap();
    assert_eq!(cfg.noise.dephasing_coeff, 0.1);
    let cfg = set_parameter(&cfg, "n_atoms", 100.0).unwrap();
    assert_eq!(cfg.n_atoms, 100);
    assert!(set_parameter(&cfg, "n_atoms", 100.5).unwrap_err().is_config());
    assert!(set_parameter(&cfg, "noise.no_such_knob", 1.0).unwrap_err().is_config());
    assert!(set_parameter(&cfg, "sequence.*.no_such", 1.0).unwrap_err().is_config());
    assert!(set_parameter(&cfg, "name", 1.0).unwrap_err().is_config());
}

#[test]
fn single_value_scan_matches_run() {
    let cfg = small_qnd();
    let opts = BootstrapOptions { resamples: 200, ..Default::default() };
    let rows = scan(&cfg, "sequence.0.photons", &[600.0], &opts).unwrap();
    let prep = prepare(&cfg).unwrap();
    let report = analyze(&run_all(&prep).unwrap(), &prep.shifts, Mode::Qnd, None, &opts).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].scenario_id, prep.scenario_id);
    assert_eq!(rows[0].summary.as_ref().unwrap().w, report.points[0].result.w);
    assert!(scan(&cfg, "sequence.9.photons", &[1.0], &opts).unwrap_err().is_config());
}

#[test]
fn value_lists() {
    assert_eq!(parse_values("1, 2,3.5").unwrap(), vec![1.0, 2.0, 3.5]);
    let v = parse_values("log:50:5000:3").unwrap();
    assert!((v[1] - 500.0).abs() < 1e-9 && (v[2] - 5000.0).abs() < 1e-9);
    assert_eq!(parse_values("lin:0:1:3").unwrap(), vec![0.0, 0.5, 1.0]);
    assert!(parse_values("a,b").is_err());
    assert!(parse_values("log:0:1:3").is_err());
}
