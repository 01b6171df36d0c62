use std::f64::consts::{FRAC_PI_2, PI, TAU};

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;

use super::schema::{FringeMode, RotationAxis, ScenarioConfig, Step};
use crate::analysis::{Mode, ReadoutKind, Role, TrialRecord};
use crate::cavity::{dispersive_shifts, effective_coupling, DispersiveShifts};
use crate::dynamics::{
    apply_pulse_loss, apply_scattering, bloch_azimuth, free_evolve, imprecision_from_photons, optimal_twist_analysis,
    qnd_measure, twist, ContrastLedger, TwistSpec,
};
use crate::error::{Error, Result};
use crate::kinematics::{
    apply_momentum_pulse, doppler_detuning, velocity_select, velocity_spectrum, MomentumDistribution, RamanPulse,
};
use crate::rng::stream;
use crate::spin::{new_css, rotate, sample_jz, CollectiveSpinState, SpinProjectionAxis};

/// Smallest QND imprecision used when `imprecision_coeff = 0` (projective limit).
const PROJECTIVE_SIGMA: f64 = 1e-3;

/// What one trial does.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialPlan {
    pub role: Role,
    pub readout: ReadoutKind,
    pub azimuth: f64,
    pub alpha: f64,
}

/// Velocimetry output.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub detuning_grid: Vec<f64>,
    pub population: Vec<f64>,
}

/// Scenario with everything shared between trials precomputed.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub config: ScenarioConfig,
    pub scenario_id: String,
    /// Atom number after velocity selection.
    pub n_atoms: u32,
    pub survival: f64,
    pub shifts: DispersiveShifts,
    /// Squeezing-axis angle used by fringe trials and single-angle runs.
    pub alpha: f64,
    pub mode: Mode,
    pub momentum: Option<MomentumDistribution>,
    pub spectra: Vec<Spectrum>,
    pub plans: Vec<TrialPlan>,
    uses_alpha: bool,
    initial: Option<CollectiveSpinState>,
}

impl Prepared {
    pub fn n_trials(&self) -> usize {
        self.plans.len()
    }
}

fn initial_momentum(cfg: &ScenarioConfig) -> Result<MomentumDistribution> {
    let m = &cfg.momentum;
    if m.classes.is_empty() {
        MomentumDistribution::gaussian(m.center, m.fwhm, m.bins_per_hbark)
    } else {
        MomentumDistribution::from_classes(&m.classes, m.bins_per_hbark)
    }
}

/// Validates a scenario, runs its kinematic steps and lays out the trials.
pub fn prepare(config: &ScenarioConfig) -> Result<Prepared> {
    config.validate()?;
    let scenario_id = config.scenario_id()?;
    let physics = &config.physics;

    let mut momentum: Option<MomentumDistribution> = None;
    let mut spectra = Vec::new();
    let mut survival = 1.0;
    for step in &config.sequence {
        match step {
            Step::VelocitySelect { rabi, passes, center } => {
                let dist = match momentum.take() {
                    Some(d) => d,
                    None => initial_momentum(config)?,
                };
                let (sel, kept) = velocity_select(&dist, *rabi, *center, *passes, physics)?;
                survival *= kept;
                momentum = Some(sel);
            }
            Step::MomentumPulse { pulse_kind, rabi, area, base_hbark } => {
                let dist = match momentum.take() {
                    Some(d) => d,
                    None => initial_momentum(config)?,
                };
                let pulse = RamanPulse::with_area(*rabi, *area, doppler_detuning(*base_hbark, physics), *pulse_kind);
                momentum = Some(apply_momentum_pulse(&dist, &pulse, config.noise.pulse_loss_prob, physics)?);
            }
            Step::Velocimetry { rabi, detuning_min, detuning_max, points } => {
                let dist = match momentum.take() {
                    Some(d) => d,
                    None => initial_momentum(config)?,
                };
                let grid: Vec<f64> = (0..*points)
                    .map(|i| detuning_min + (detuning_max - detuning_min) * i as f64 / (*points - 1) as f64)
                    .collect();
                let population = velocity_spectrum(&dist, *rabi, &grid, physics)?;
                spectra.push(Spectrum { detuning_grid: grid, population });
                momentum = Some(dist);
            }
            _ => {}
        }
    }

    let coupling = effective_coupling(physics, &config.geometry)?;
    let shifts = dispersive_shifts(physics, coupling.g)?;
    let n_atoms = (config.n_atoms as f64 * survival).round() as u32;
    let spin = config.has_spin_steps();
    if spin && n_atoms < 2 {
        return Err(Error::EmptySelection { survival });
    }

    let mu = config.total_twist();
    let alpha = match config.alpha {
        Some(a) => a,
        None if spin && mu != 0.0 => optimal_twist_analysis(n_atoms, mu)?.alpha0,
        None => 0.0,
    };
    let uses_alpha = config.sequence.iter().any(|s| matches!(s, Step::Rotation { add_alpha: true, .. }));

    let mut plans = Vec::new();
    if spin {
        let Some(Step::Readout { kind, .. }) = config.sequence.last() else { unreachable!("validated") };
        let signal_alphas = config.alpha_scan.clone().unwrap_or_else(|| vec![alpha]);
        for &a in &signal_alphas {
            for _ in 0..config.n_trials {
                plans.push(TrialPlan { role: Role::Signal, readout: *kind, azimuth: 0.0, alpha: a });
            }
        }
        let mut groups = vec![(Role::FringeSqueezed, ReadoutKind::Pumped)];
        if config.qnd_photons() > 0.0 {
            groups.push((Role::FringeSqueezed, ReadoutKind::Unpumped));
        }
        groups.push((Role::FringeReference, ReadoutKind::Unpumped));
        let f = config.fringe;
        for (role, readout) in groups {
            for k in 0..f.phases {
                for _ in 0..f.repeats {
                    plans.push(TrialPlan { role, readout, azimuth: TAU * k as f64 / f.phases as f64, alpha });
                }
            }
        }
    }

    let initial = if spin { Some(new_css(n_atoms, FRAC_PI_2, 0.0)?) } else { None };
    Ok(Prepared {
        config: config.clone(),
        scenario_id,
        n_atoms,
        survival,
        shifts,
        alpha,
        mode: config.mode(),
        momentum,
        spectra,
        plans,
        uses_alpha,
        initial,
    })
}

/// Per-trial mutable state.
struct Shot<'a> {
    prep: &'a Prepared,
    state: CollectiveSpinState,
    ledger: ContrastLedger,
}

impl Shot<'_> {
    /// Folds newly booked diffusion into the `Jz` deficit as a random offset.
    fn diffuse<R: Rng + ?Sized>(&mut self, before: f64, rng: &mut R) {
        let added = self.ledger.added_jz_diffusion - before;
        if added > 0.0 {
            let z: f64 = StandardNormal.sample(rng);
            self.ledger.mean_deficit[2] -= added.sqrt() * z;
        }
    }

    fn pulse_loss<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        let before = self.ledger.added_jz_diffusion;
        self.ledger = apply_pulse_loss(&self.state, &self.ledger, &self.prep.config.noise, rng)?;
        self.diffuse(before, rng);
        Ok(())
    }

    fn scatter<R: Rng + ?Sized>(&mut self, photons: f64, rng: &mut R) -> Result<()> {
        let before = self.ledger.added_jz_diffusion;
        self.ledger = apply_scattering(&self.state, &self.ledger, photons, &self.prep.config.noise, rng)?;
        self.diffuse(before, rng);
        Ok(())
    }

    fn pulse<R: Rng + ?Sized>(&mut self, angle: f64, axis: SpinProjectionAxis, rng: &mut R) -> Result<()> {
        if angle == 0.0 {
            return Ok(());
        }
        self.state = rotate(&self.state, angle, axis)?;
        self.ledger.rotate(axis.unit_vector(), angle);
        self.pulse_loss(rng)
    }

    fn physical_jz(&self, pure: f64) -> f64 {
        pure - self.ledger.mean_deficit[2]
    }

    fn atoms_present(&self, n0: f64) -> f64 {
        (n0 - self.ledger.lost_atoms as f64).max(0.0)
    }

    /// One weak-measurement window; returns the observed `Jz`.
    fn window<R: Rng + ?Sized>(&mut self, photons: f64, rng: &mut R) -> Result<f64> {
        let noise = &self.prep.config.noise;
        let sigma = if noise.imprecision_coeff > 0.0 {
            imprecision_from_photons(photons, noise)?
        } else {
            PROJECTIVE_SIGMA
        };
        let (x, post) = qnd_measure(&self.state, sigma, rng)?;
        self.state = post;
        let observed = self.physical_jz(x);
        self.scatter(photons, rng)?;
        Ok(observed)
    }
}

/// Runs trial `trial_id` of a prepared scenario.
pub fn run_trial(prep: &Prepared, trial_id: u64) -> Result<TrialRecord> {
    execute(prep, trial_id, true).map(|(record, _)| record)
}

/// State and ledger of trial `trial_id` just before the final projective
/// measurement (after any inserted fringe pulse).
pub fn propagate(prep: &Prepared, trial_id: u64) -> Result<(CollectiveSpinState, ContrastLedger)> {
    execute(prep, trial_id, false).map(|(_, (state, ledger))| (state, ledger))
}

fn execute(
    prep: &Prepared,
    trial_id: u64,
    measure: bool,
) -> Result<(TrialRecord, (CollectiveSpinState, ContrastLedger))> {
    let plan = *prep
        .plans
        .get(trial_id as usize)
        .ok_or_else(|| Error::InvalidArgument(format!("trial {trial_id} out of range")))?;
    let cfg = &prep.config;
    let seed = cfg.master_seed;
    let reference = plan.role == Role::FringeReference;
    let fringe = plan.role != Role::Signal;
    let shifts = prep.shifts;

    let mut rng0 = stream(seed, trial_id, 0);
    let n0 = if cfg.noise.atom_number_cv > 0.0 {
        let z: f64 = StandardNormal.sample(&mut rng0);
        prep.n_atoms as f64 * (1.0 + cfg.noise.atom_number_cv * z)
    } else {
        prep.n_atoms as f64
    };

    let mut shot = Shot {
        prep,
        state: prep.initial.clone().ok_or_else(|| Error::InvalidArgument("scenario has no spin sequence".into()))?,
        ledger: ContrastLedger::default(),
    };
    let (mut w1p, mut w2p, mut w1f, mut w2f) = (None, None, None, None);

    for (i, step) in cfg.sequence.iter().enumerate() {
        let mut rng = stream(seed, trial_id, i as u32 + 1);
        match step {
            Step::VelocitySelect { .. } | Step::MomentumPulse { .. } | Step::Velocimetry { .. } => {}
            Step::Rotation { angle, axis, add_alpha, readout_pulse } => {
                let angle = angle + if *add_alpha { plan.alpha } else { 0.0 };
                let axis = match (fringe, *readout_pulse, last_fringe_mode(cfg)) {
                    (true, true, FringeMode::LastRotation) => SpinProjectionAxis::equatorial(plan.azimuth),
                    _ => match axis {
                        RotationAxis::X => SpinProjectionAxis::X,
                        RotationAxis::Y => SpinProjectionAxis::Y,
                        RotationAxis::Z => SpinProjectionAxis::Z,
                    },
                };
                shot.pulse(angle, axis, &mut rng)?;
            }
            Step::Twist { mu, chi_oat, echo, photons } => {
                let spec = TwistSpec { mu: if reference { 0.0 } else { *mu }, chi_oat: *chi_oat, echo: *echo };
                if *echo {
                    let axis = SpinProjectionAxis::equatorial(bloch_azimuth(&shot.state));
                    shot.state = twist(&shot.state, &spec)?;
                    shot.ledger.rotate(axis.unit_vector(), PI);
                    shot.pulse_loss(&mut rng)?;
                } else {
                    shot.state = twist(&shot.state, &spec)?;
                }
                if !reference {
                    shot.scatter(*photons, &mut rng)?;
                }
            }
            Step::Qnd { photons } => {
                let photons = if reference { 0.0 } else { *photons };
                if photons > 0.0 {
                    let x1 = shot.window(photons, &mut rng)?;
                    shot.pulse(PI, SpinProjectionAxis::X, &mut rng)?;
                    let x2 = shot.window(photons, &mut rng)?;
                    shot.pulse(PI, SpinProjectionAxis::X, &mut rng)?;
                    let n = shot.atoms_present(n0);
                    let common = (shifts.chi0 + shifts.chi_down) * n / 2.0;
                    w1p = Some(common + (shifts.chi0 - shifts.chi_down) * x1);
                    w2p = Some(common + (shifts.chi0 - shifts.chi_down) * x2);
                } else {
                    shot.pulse(PI, SpinProjectionAxis::X, &mut rng)?;
                    shot.pulse(PI, SpinProjectionAxis::X, &mut rng)?;
                }
            }
            Step::Evolve { t_evol, signal_phase } => {
                let phase = if fringe { 0.0 } else { *signal_phase };
                let (state, angle) = free_evolve(&shot.state, *t_evol, phase, &cfg.noise, &mut rng)?;
                shot.state = state;
                shot.ledger.rotate([0.0, 0.0, 1.0], angle);
            }
            Step::Readout { fringe: mode, .. } => {
                if fringe && *mode == FringeMode::Insert {
                    shot.pulse(FRAC_PI_2, SpinProjectionAxis::equatorial(plan.azimuth), &mut rng)?;
                }
                if !measure {
                    break;
                }
                let jz = shot.physical_jz(sample_jz(&shot.state, &mut rng).value());
                let n = shot.atoms_present(n0);
                let (n_up, n_down) = (n / 2.0 + jz, n / 2.0 - jz);
                let floor = cfg.noise.readout_floor_fraction();
                let unit = Normal::new(0.0, 1.0).expect("unit normal");
                match plan.readout {
                    ReadoutKind::Pumped => {
                        let sd = shifts.chi2 * (floor * n / 2.0).sqrt();
                        w1f = Some(shifts.chi2 * n_up + shifts.chi_down * n_down + sd * unit.sample(&mut rng));
                        w2f = Some(shifts.chi2 * n_down + sd * unit.sample(&mut rng));
                    }
                    ReadoutKind::Unpumped => {
                        let sd = (shifts.chi0 - shifts.chi_down) * (floor * n / 4.0).sqrt();
                        w1f = Some(shifts.chi0 * n_up + shifts.chi_down * n_down + sd * unit.sample(&mut rng));
                    }
                }
            }
        }
    }

    let record = TrialRecord {
        trial_id,
        seed,
        scenario_id: prep.scenario_id.clone(),
        role: plan.role,
        readout: plan.readout,
        readout_azimuth: plan.azimuth,
        alpha: prep.uses_alpha.then_some(plan.alpha),
        omega_1p: w1p,
        omega_2p: w2p,
        omega_1f: w1f,
        omega_2f: w2f,
        ledger: shot.ledger.clone(),
        n_atoms_actual: n0,
    };
    Ok((record, (shot.state, shot.ledger)))
}

fn last_fringe_mode(cfg: &ScenarioConfig) -> FringeMode {
    match cfg.sequence.last() {
        Some(Step::Readout { fringe, .. }) => *fringe,
        _ => FringeMode::Insert,
    }
}

/// Runs trials `range` in parallel, returned in trial-id order.
pub fn run_range(prep: &Prepared, range: std::ops::Range<u64>) -> Result<Vec<TrialRecord>> {
    range.into_par_iter().map(|id| run_trial(prep, id)).collect()
}

/// Runs every trial of a prepared scenario.
pub fn run_all(prep: &Prepared) -> Result<Vec<TrialRecord>> {
    run_range(prep, 0..prep.n_trials() as u64)
}
