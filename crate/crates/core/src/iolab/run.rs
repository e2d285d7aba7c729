use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fv2d::snapshot::write_snapshot;
use crate::fv2d::{
    boundary_mass, init_cells, second_moment_bound, second_moment_constant, AnalyticDensity, FvSolver, FvState,
    InitialDensity,
};
use crate::measure::{fmt_f64, DiscreteMeasure, DROP_MASS};
use crate::particles::{self, particle_rhs, MergeEvent};
use crate::potentials::Potential;
use crate::scalar::{norm, sub};

use super::config::{InitialSpec, RunConfig, Scheme};
use super::sampling::atomize;

/// Support threshold, relative to `max ρ`, for the diameter diagnostic.
pub const SUPPORT_FRACTION: f64 = 1e-3;

pub const MASS_TOL: f64 = 1e-12;
pub const COM_TOL: f64 = 1e-8;
pub const POSITIVITY_TOL: f64 = 1e-15;
pub const VELOCITY_SLACK: f64 = 1e-12;
pub const ENERGY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    /// `"<="` or `">="`.
    pub relation: String,
    pub threshold: f64,
    pub passed: bool,
}

impl Check {
    pub fn at_most(name: &str, measured: f64, threshold: f64) -> Self {
        Check {
            name: name.into(),
            measured,
            relation: "<=".into(),
            threshold,
            passed: measured <= threshold,
        }
    }

    pub fn at_least(name: &str, measured: f64, threshold: f64) -> Self {
        Check {
            name: name.into(),
            measured,
            relation: ">=".into(),
            threshold,
            passed: measured >= threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotEntry {
    pub t: f64,
    /// Relative to the run directory: an atom CSV for particle runs,
    /// a JSON sidecar for fv2d runs.
    pub file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scheme: Scheme,
    /// `"completed"` or `"aborted"`.
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
    pub t_end: f64,
    pub t_final: f64,
    pub steps: usize,
    pub dt: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub renormalization: Option<f64>,
    pub snapshots: Vec<SnapshotEntry>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub merge_log: Vec<MergeEvent>,
    pub checks: Vec<Check>,
    pub passed: bool,
}

impl RunReport {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Output of [`run`]: the report and where it was written.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub dir: PathBuf,
    pub report: RunReport,
}

fn analytic(spec: &InitialSpec) -> Option<AnalyticDensity> {
    match spec {
        InitialSpec::ThreeBump { cx } => Some(AnalyticDensity::three_bump(*cx)),
        InitialSpec::UniformBox { lo, hi } => Some(AnalyticDensity::UniformBox { lo: *lo, hi: *hi }),
        InitialSpec::CustomGaussians { terms } => Some(AnalyticDensity::GaussianSum(terms.clone())),
        InitialSpec::Atoms { .. } => None,
    }
}

fn load_atoms(spec: &InitialSpec) -> Result<DiscreteMeasure<f64>> {
    match spec {
        InitialSpec::Atoms { path } => DiscreteMeasure::load(path)?.normalized(),
        _ => unreachable!("atom input expected"),
    }
}

/// Initial particle measure for a particle config.
pub fn particle_initial(cfg: &RunConfig) -> Result<DiscreteMeasure<f64>> {
    match analytic(&cfg.initial) {
        Some(d) => atomize(&d, cfg.n_atoms.unwrap_or(0), cfg.seed),
        None => load_atoms(&cfg.initial),
    }
}

/// Initial cell averages for an fv2d config.
pub fn fv_initial(cfg: &RunConfig) -> Result<FvState<f64>> {
    let grid = cfg
        .grid
        .ok_or_else(|| Error::config("grid", "required by the fv2d scheme"))?
        .build::<f64>()?;
    let ini = match analytic(&cfg.initial) {
        Some(d) => InitialDensity::Analytic(d),
        None => InitialDensity::Atoms(load_atoms(&cfg.initial)?),
    };
    init_cells(&ini, &grid)
}

struct Diagnostics {
    wtr: csv::Writer<std::fs::File>,
}

impl Diagnostics {
    fn create(path: &Path, header: &[&str]) -> Result<Self> {
        let mut wtr = csv::Writer::from_path(path)?;
        wtr.write_record(header)?;
        Ok(Diagnostics { wtr })
    }

    fn row(&mut self, values: &[f64]) -> Result<()> {
        self.wtr.write_record(values.iter().map(|v| fmt_f64(*v)))?;
        Ok(())
    }

    fn finish(mut self) -> Result<()> {
        self.wtr.flush().map_err(|e| Error::io("diagnostics.csv", e))
    }
}

/// Validates the config, runs it, and writes `config.json`,
/// `diagnostics.csv`, `report.json` and `snapshots/` into the resolved
/// output directory. Scheme failures produce an aborted report rather
/// than an error.
pub fn run(cfg: &RunConfig) -> Result<RunOutput> {
    run_in(cfg, &cfg.resolved_output_dir())
}

pub fn run_in(cfg: &RunConfig, dir: &Path) -> Result<RunOutput> {
    cfg.validate()?;
    let snaps = dir.join("snapshots");
    std::fs::create_dir_all(&snaps).map_err(|e| Error::io(&snaps, e))?;
    let cfg_path = dir.join("config.json");
    std::fs::write(&cfg_path, cfg.to_json()).map_err(|e| Error::io(&cfg_path, e))?;
    let report = match cfg.scheme {
        Scheme::Fv2d => run_fv(cfg, dir)?,
        Scheme::Particles => run_particles(cfg, dir)?,
    };
    let path = dir.join("report.json");
    std::fs::write(&path, serde_json::to_string_pretty(&report)? + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(RunOutput {
        dir: dir.to_path_buf(),
        report,
    })
}

fn finish_report(mut report: RunReport, outcome: Result<()>) -> Result<RunReport> {
    match outcome {
        Ok(()) => report.status = "completed".into(),
        // configuration and I/O problems are the caller's; scheme failures go in the report
        Err(e @ (Error::Io { .. } | Error::Csv(_) | Error::Json(_) | Error::Config { .. })) => return Err(e),
        Err(e) => {
            report.status = "aborted".into();
            report.error = Some(e.to_string());
        }
    }
    report.passed = report.status == "completed" && report.checks.iter().all(|c| c.passed);
    Ok(report)
}

fn run_fv(cfg: &RunConfig, dir: &Path) -> Result<RunReport> {
    let potential: Potential<f64> = cfg.potential.build()?;
    let mut state = fv_initial(cfg)?;
    let grid = state.grid;
    let buffer_tol = cfg.buffer_tol.unwrap_or(DROP_MASS);
    let solver = FvSolver::new(potential, &grid, cfg.velocity_assembly.unwrap_or_default())
        .with_buffer_tol(Some(buffer_tol));
    let w = potential.w_inf();
    let dt = solver.cfl_dt(cfg.cfl_safety.unwrap_or(1.0), cfg.t_end)?;
    let n_steps = ((cfg.t_end / dt) - 1e-9).ceil().max(1.0) as usize;
    let c = second_moment_constant(w, &grid);

    let mut report = RunReport {
        scheme: Scheme::Fv2d,
        status: String::new(),
        error: None,
        t_end: cfg.t_end,
        t_final: 0.0,
        steps: 0,
        dt,
        renormalization: Some(state.renormalization),
        snapshots: Vec::new(),
        merge_log: Vec::new(),
        checks: Vec::new(),
        passed: false,
    };
    let mut diag = Diagnostics::create(
        &dir.join("diagnostics.csv"),
        &["t", "mass", "com_x", "com_y", "m2", "energy", "min_rho", "max_rho", "support_diameter"],
    )?;

    let d0 = solver.diagnostics(&state)?;
    let (mass0, com0, m2_0) = (d0.mass, d0.com, d0.m2);
    let (max0, diam0) = (d0.max_rho, state.support_diameter(SUPPORT_FRACTION));
    let mut mass_drift: f64 = 0.0;
    let mut com_drift: f64 = 0.0;
    let mut min_rho = d0.min_rho;
    let mut max_vel: f64 = 0.0;
    let mut m2_excess = f64::NEG_INFINITY;
    let mut edge_mass = boundary_mass(&state);

    let snapshot = |s: &FvState<f64>, k: usize, report: &mut RunReport, diag: &mut Diagnostics| -> Result<()> {
        let d = solver.diagnostics(s)?;
        let stem = format!("rho_{k:05}");
        write_snapshot(&dir.join("snapshots"), &stem, s, &d)?;
        report.snapshots.push(SnapshotEntry {
            t: s.time,
            file: format!("snapshots/{stem}.json"),
        });
        diag.row(&[
            s.time,
            d.mass,
            d.com[0],
            d.com[1],
            d.m2,
            d.energy,
            d.min_rho,
            d.max_rho,
            s.support_diameter(SUPPORT_FRACTION),
        ])
    };
    snapshot(&state, 0, &mut report, &mut diag)?;

    let outcome = (|| -> Result<()> {
        for k in 1..=n_steps {
            let h = if k == n_steps { cfg.t_end - state.time } else { dt };
            let r = solver.step(&state, h)?;
            max_vel = max_vel.max(r.max_velocity);
            state = r.state;
            edge_mass = edge_mass.max(boundary_mass(&state));
            if k == n_steps {
                state.time = cfg.t_end;
            }
            let (mass, com, m2) = state.moments();
            mass_drift = mass_drift.max((mass - mass0).abs());
            com_drift = com_drift.max(norm(sub(com, com0)));
            min_rho = state.rho.iter().fold(min_rho, |m, r| m.min(*r));
            m2_excess = m2_excess.max(m2 - second_moment_bound(c, state.time, m2_0));
            report.steps = k;
            report.t_final = state.time;
            if k % cfg.snapshot_every == 0 || k == n_steps {
                snapshot(&state, k, &mut report, &mut diag)?;
            }
        }
        Ok(())
    })();
    diag.finish()?;

    report.checks.extend([
        Check::at_most("mass_drift", mass_drift, MASS_TOL),
        Check::at_most("com_drift", com_drift, cfg.expect.com_drift_max.unwrap_or(COM_TOL)),
        Check::at_least("min_rho", min_rho, -POSITIVITY_TOL),
        Check::at_most("max_velocity", max_vel, w * (1.0 + VELOCITY_SLACK)),
        Check::at_most("second_moment_excess", m2_excess.max(-1.0), 0.0),
        Check::at_most("boundary_mass", edge_mass, buffer_tol),
    ]);
    let d_end = solver.diagnostics(&state)?;
    let e = &cfg.expect;
    if let Some(g) = e.max_rho_growth_min {
        report.checks.push(Check::at_least("max_rho_growth", d_end.max_rho / max0, g));
    }
    if let Some(g) = e.support_shrink_min {
        let diam = state.support_diameter(SUPPORT_FRACTION);
        let shrink = if diam > 0.0 { diam0 / diam } else { f64::INFINITY };
        report.checks.push(Check::at_least("support_shrink", shrink, g));
    }
    finish_report(report, outcome)
}

fn run_particles(cfg: &RunConfig, dir: &Path) -> Result<RunReport> {
    let potential: Potential<f64> = cfg.potential.build()?;
    let ini = particle_initial(cfg)?;
    let dt = cfg.dt.expect("validated");
    let w = potential.w_inf();
    let k_const = particles::second_moment_constant(w);
    let com0 = ini.center_of_mass()?;
    let m2_0 = ini.second_moment();
    let mut prev_energy = ini.interaction_energy(&potential);
    let mut mass_drift: f64 = 0.0;
    let mut com_drift: f64 = 0.0;
    let mut energy_rise = f64::NEG_INFINITY;
    let mut max_vel: f64 = 0.0;
    let mut m2_excess = f64::NEG_INFINITY;
    let mut steps = 0usize;
    let mut t_final = 0.0;

    let result = particles::simulate_with(
        &ini,
        &potential,
        cfg.t_end,
        dt,
        cfg.merge_radius,
        cfg.snapshot_every,
        |sys| {
            let m = sys.state();
            mass_drift = mass_drift.max((m.total_mass() - 1.0).abs());
            com_drift = com_drift.max(norm(sub(m.center_of_mass()?, com0)));
            let e = m.interaction_energy(&potential);
            energy_rise = energy_rise.max(e - prev_energy);
            prev_energy = e;
            m2_excess = m2_excess.max(m.second_moment() - (k_const * sys.time()).exp() * (m2_0 + 1.0) + 1.0);
            max_vel = particle_rhs(sys).iter().fold(max_vel, |a, v| a.max(norm(*v)));
            steps += 1;
            t_final = sys.time();
            Ok(())
        },
    );

    let mut report = RunReport {
        scheme: Scheme::Particles,
        status: String::new(),
        error: None,
        t_end: cfg.t_end,
        t_final,
        steps,
        dt,
        renormalization: None,
        snapshots: Vec::new(),
        merge_log: Vec::new(),
        checks: Vec::new(),
        passed: false,
    };
    let traj = match result {
        Ok(t) => t,
        Err(e) => return finish_report(report, Err(e)),
    };
    report.t_final = traj.last().time;
    report.merge_log = traj.merge_log.clone();
    let index = traj.export(&dir.join("snapshots"), &potential)?;
    let mut diag = Diagnostics::create(
        &dir.join("diagnostics.csv"),
        &["t", "mass", "com_x", "com_y", "m2", "energy", "n_atoms"],
    )?;
    for r in &index {
        diag.row(&[r.t, r.mass, r.com[0], r.com[1], r.m2, r.energy, r.n_atoms as f64])?;
        report.snapshots.push(SnapshotEntry {
            t: r.t,
            file: format!("snapshots/{}", r.file),
        });
    }
    diag.finish()?;

    report.checks.extend([
        Check::at_most("mass_drift", mass_drift, MASS_TOL),
        Check::at_most("com_drift", com_drift, cfg.expect.com_drift_max.unwrap_or(COM_TOL)),
        Check::at_most("energy_increase_per_step", energy_rise.max(0.0), ENERGY_TOL),
        Check::at_most("max_velocity", max_vel, w * (1.0 + VELOCITY_SLACK)),
        Check::at_most("second_moment_excess", m2_excess.max(-1.0), 0.0),
    ]);
    let last = &traj.last().measure;
    let e = &cfg.expect;
    if let Some(tol) = e.single_atom_tol {
        let offset = if last.len() == 1 {
            norm(sub(last.positions()[0], com0))
        } else {
            f64::INFINITY
        };
        report.checks.push(Check::at_most("single_atom_offset", offset, tol));
    }
    if let Some([t, tol]) = e.collapse_time {
        let t_collapse = collapse_time(&traj.merge_log, ini.len(), last.len());
        report.checks.push(Check::at_most("collapse_time_error", (t_collapse - t).abs(), tol));
    }
    finish_report(report, Ok(()))
}

/// Time of the merge that left a single atom, or infinity.
fn collapse_time(log: &[MergeEvent], n0: usize, n_final: usize) -> f64 {
    if n_final != 1 || n0 == 1 {
        return if n0 == 1 { 0.0 } else { f64::INFINITY };
    }
    log.last().map_or(f64::INFINITY, |e| e.time)
}

/// Loads the measure stored in one snapshot entry of a run directory.
pub fn snapshot_measure(run_dir: &Path, scheme: Scheme, entry: &SnapshotEntry) -> Result<DiscreteMeasure<f64>> {
    let path = run_dir.join(&entry.file);
    match scheme {
        Scheme::Particles => DiscreteMeasure::load(&path),
        Scheme::Fv2d => {
            let (_, s) = crate::fv2d::snapshot::read_snapshot::<f64>(&path)?;
            s.to_measure()
        }
    }
}

