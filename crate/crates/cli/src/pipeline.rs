//! The three experiments: Purcell scan, dynamics and field frames.

use crate::config::{ConfigError, Experiment, Resolved, RunConfig};
use crate::events::Log;
use cavityqed::dynamics::{
    check_horizon, evolve_exact, laplace_trajectory, reconstruct_photon_amplitudes, validated_horizon, AmplitudeTrajectory,
    EvolveOptions, Initial, InversionOptions,
};
use cavityqed::field::{field_energy, figure_unit, interaction_energy, snapshots, EnergyQuadrature, GridSpec};
use cavityqed::geometry::CavitySpec;
use cavityqed::kernel::{default_epsilon, pole_window_half_width, purcell_pole_unchecked, KernelMatrix, Taper};
use cavityqed::modes::{BasisRequest, ModeBasis, ModeCache, QuantizeOptions};
use cavityqed::special::purcell_parabolic_semiclassical;
use num_complex::Complex64;
use rayon::prelude::*;
use serde_json::json;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    NotConverged(String),
    #[error("{0}")]
    Internal(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::NotConverged(_) => 3,
            RunError::Internal(_) => 4,
        }
    }
}

impl From<cavityqed::Error> for RunError {
    fn from(e: cavityqed::Error) -> Self {
        use cavityqed::Error as E;
        let msg = e.to_string();
        match e {
            E::HorizonExceeded { .. }
            | E::WindowTooWide { .. }
            | E::ResolutionCap { .. }
            | E::Config(_)
            | E::InvalidParameter(_)
            | E::UnsupportedCavity(_) => RunError::Config(ConfigError::Invalid(msg)),
            E::NotConverged(_)
            | E::NoRootInBracket { .. }
            | E::QuadratureNonConvergence(_)
            | E::NeumannDivergence { .. }
            | E::NonDecayedEdges { .. }
            | E::Aliasing { .. }
            | E::IntegratorFailure { .. }
            | E::StepUnderflow { .. }
            | E::MissedModes { .. }
            | E::TurningPoint(_) => RunError::NotConverged(msg),
            _ => RunError::Internal(msg),
        }
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Internal(format!("i/o: {e}"))
    }
}

pub struct Context {
    pub out: PathBuf,
    pub cache: Option<ModeCache>,
    pub log: Log,
}

impl Context {
    pub fn new(out: impl Into<PathBuf>, cache: Option<PathBuf>, log: Log) -> Self {
        Self { out: out.into(), cache: cache.map(ModeCache::new), log }
    }

    fn write(&self, name: &str, contents: &str) -> Result<PathBuf, RunError> {
        std::fs::create_dir_all(&self.out)?;
        let path = self.out.join(name);
        std::fs::write(&path, contents)?;
        self.log.emit("wrote", json!({ "path": path }));
        Ok(path)
    }

    fn basis(&self, request: &BasisRequest) -> Result<ModeBasis, RunError> {
        let start = Instant::now();
        let (basis, hit) = match &self.cache {
            Some(c) => c.get_or_compute(request)?,
            None => (request.compute()?, false),
        };
        self.log.emit(
            "basis",
            json!({
                "modes": basis.len(),
                "window": basis.frequency_window,
                "cache_hit": hit,
                "seconds": start.elapsed().as_secs_f64(),
            }),
        );
        Ok(basis)
    }
}

/// Runs the experiment named in the configuration and returns the files written.
pub fn run(config: &RunConfig, ctx: &Context) -> Result<Vec<PathBuf>, RunError> {
    let res = config.resolve()?;
    ctx.log.emit("start", json!({ "experiment": experiment_name(&config.experiment), "out": ctx.out }));
    let files = match &config.experiment {
        Experiment::PurcellScan { .. } => run_purcell_scan(config, &res, ctx)?,
        Experiment::Dynamics { .. } => run_dynamics(config, &res, ctx)?,
        Experiment::FieldFrames { .. } => run_field_frames(config, &res, ctx)?,
    };
    ctx.log.emit("done", json!({ "files": files.len() }));
    Ok(files)
}

pub fn experiment_name(e: &Experiment) -> &'static str {
    match e {
        Experiment::PurcellScan { .. } => "purcell",
        Experiment::Dynamics { .. } => "dynamics",
        Experiment::FieldFrames { .. } => "frames",
    }
}

fn quantize_options(config: &RunConfig, profile_resolution: Option<f64>) -> QuantizeOptions {
    QuantizeOptions { channel_cutoff: config.basis.channel_cutoff, profile_resolution, ..Default::default() }
}

/// Same shape as `cavity`, rescaled so that its focal length is `f`.
fn rescaled(cavity: &CavitySpec<f64>, f: f64) -> Result<CavitySpec<f64>, RunError> {
    Ok(match *cavity {
        CavitySpec::Parabolic { focal_length_f, xi_cutoff } => CavitySpec::parabolic(f, xi_cutoff * f / focal_length_f)?,
        CavitySpec::ProlateEllipsoid { interfocal_d, vertex_gap_f } => CavitySpec::prolate(interfocal_d * f / vertex_gap_f, f)?,
    })
}

/// Floats in CSV cells: shortest round-trip representation, so output is reproducible.
fn cell(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else {
        format!("{x:e}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanRow {
    pub u: f64,
    pub ratio_semiclassical: f64,
    pub ratio_exact: f64,
    pub epsilon_used: f64,
    pub converged: bool,
}

fn scan_point(config: &RunConfig, res: &Resolved, ctx: &Context, u: f64, tol: f64) -> Result<ScanRow, RunError> {
    let w0 = res.omega_eg;
    let cavity = rescaled(&res.cavity, u * res.constants.c / w0)?;
    let eps = default_epsilon(&cavity, &res.constants);
    let half = pole_window_half_width(eps, w0);
    let request = BasisRequest {
        cavity,
        constants: res.constants,
        window: (w0 - half, w0 + half),
        provenance: config.basis.provenance,
        options: quantize_options(config, None),
    };
    let basis = ctx.basis(&request)?;
    let atoms = res.atoms_in(&cavity)?;
    let km = KernelMatrix::new(&basis, &atoms[..1], None)?;
    let pole = purcell_pole_unchecked(&km, 0, eps, tol)?;
    let sc = purcell_parabolic_semiclassical(u, 1)?.ratio;
    Ok(ScanRow { u, ratio_semiclassical: sc, ratio_exact: pole.ratio, epsilon_used: eps / w0, converged: pole.converged })
}

pub fn purcell_rows(config: &RunConfig, res: &Resolved, ctx: &Context) -> Result<Vec<ScanRow>, RunError> {
    let Experiment::PurcellScan { u_grid, certificate_tolerance } = &config.experiment else {
        return Err(RunError::Internal("not a Purcell scan".into()));
    };
    let us = u_grid.values();
    let rows: Vec<Result<ScanRow, RunError>> =
        us.par_iter().map(|&u| scan_point(config, res, ctx, u, *certificate_tolerance)).collect();
    let mut out = Vec::with_capacity(rows.len());
    for (u, r) in us.iter().zip(rows) {
        match r {
            Ok(row) => {
                if !row.converged {
                    ctx.log.emit("warning", json!({ "u": u, "message": "broadening certificate failed" }));
                }
                out.push(row);
            }
            Err(RunError::NotConverged(msg)) => {
                ctx.log.emit("warning", json!({ "u": u, "message": msg }));
                out.push(ScanRow { u: *u, ratio_semiclassical: f64::NAN, ratio_exact: f64::NAN, epsilon_used: f64::NAN, converged: false });
            }
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

pub fn scan_csv(rows: &[ScanRow]) -> String {
    let mut s = String::from("u,ratio_semiclassical,ratio_exact,epsilon_used,converged\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            cell(r.u),
            cell(r.ratio_semiclassical),
            cell(r.ratio_exact),
            cell(r.epsilon_used),
            r.converged
        ));
    }
    s
}

fn run_purcell_scan(config: &RunConfig, res: &Resolved, ctx: &Context) -> Result<Vec<PathBuf>, RunError> {
    let rows = purcell_rows(config, res, ctx)?;
    let csv = ctx.write("purcell_scan.csv", &scan_csv(&rows))?;
    let shape = match res.cavity {
        CavitySpec::Parabolic { focal_length_f, xi_cutoff } => json!({ "kind": "parabolic", "xi_cutoff_over_f": xi_cutoff / focal_length_f }),
        CavitySpec::ProlateEllipsoid { interfocal_d, vertex_gap_f } => {
            json!({ "kind": "prolate_ellipsoid", "f_over_d": vertex_gap_f / interfocal_d })
        }
    };
    let meta = json!({
        "columns": {
            "u": "2 pi f / lambda_eg",
            "ratio_semiclassical": "Gamma / Gamma_free, paraboloid bounce series",
            "ratio_exact": "Gamma / Gamma_free, pole formula on the exact modes",
            "epsilon_used": "omega_eg",
            "converged": "eps / 2 eps certificate",
        },
        "free_space_reference": 1.0,
        "cavity_shape": shape,
        "rows": rows.len(),
        "converged_rows": rows.iter().filter(|r| r.converged).count(),
    });
    let side = ctx.write("purcell_scan.json", &serde_json::to_string_pretty(&meta).expect("json"))?;
    Ok(vec![csv, side])
}

/// Mode basis and kernel for the dynamics-type experiments.
pub fn dynamics_kernel(
    config: &RunConfig,
    res: &Resolved,
    ctx: &Context,
    profile_resolution: Option<f64>,
) -> Result<(ModeBasis, KernelMatrix), RunError> {
    let (lo, hi) = config.basis.window_over_omega_eg.ok_or_else(|| ConfigError::Invalid("missing basis window".into()))?;
    let w0 = res.omega_eg;
    let request = BasisRequest {
        cavity: res.cavity,
        constants: res.constants,
        window: (lo * w0, hi * w0),
        provenance: config.basis.provenance,
        options: quantize_options(config, profile_resolution),
    };
    let basis = ctx.basis(&request)?;
    let tp = config.basis.taper.unwrap_or_default();
    let taper = Taper { center: w0, inner: tp.inner_over_gamma * res.gamma_free, outer: tp.outer_over_gamma * res.gamma_free };
    let km = KernelMatrix::new(&basis, &res.atoms, Some(taper))?;
    Ok((basis, km))
}

/// Trajectory table, times in units of `1 / Gamma_free`. Single-atom runs carry `b2 = 0`.
pub fn trajectory_csv(traj: &AmplitudeTrajectory, gamma_free: f64) -> String {
    let mut s = String::from("t,Re_b1,Im_b1,Re_b2,Im_b2,P1,P2,norm\n");
    for n in 0..traj.len() {
        let (b1, b2) = (traj.b1[n], traj.b2[n]);
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            cell(traj.time_grid[n] * gamma_free),
            cell(b1.re),
            cell(b1.im),
            cell(b2.re),
            cell(b2.im),
            cell(traj.p1[n]),
            cell(traj.p2[n]),
            cell(traj.norm_series[n])
        ));
    }
    s
}

/// Largest amplitude difference over both atoms, relative to the largest amplitude.
pub fn engines_agreement(a: &AmplitudeTrajectory, b: &AmplitudeTrajectory) -> f64 {
    let peak = a.b1.iter().chain(&a.b2).map(|z| z.norm()).fold(0.0, f64::max);
    let diff = a.b1.iter().zip(&b.b1).chain(a.b2.iter().zip(&b.b2)).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
    diff / peak
}

/// Laplace engine, widening the contour while its ends have not decayed. Small cavities
/// leave a slowly falling remainder and need a longer contour than large ones.
fn laplace_widening(
    km: &KernelMatrix,
    initial: Initial,
    grid: &[f64],
    ctx: &Context,
) -> Result<(AmplitudeTrajectory, f64), RunError> {
    let mut opts = InversionOptions::default();
    for _ in 0..4 {
        match laplace_trajectory(km, initial, grid, &opts) {
            Err(cavityqed::Error::NonDecayedEdges { .. }) => {
                opts.y_min *= 4.0;
                ctx.log.emit("retry", json!({ "engine": "laplace", "y_min": opts.y_min }));
            }
            r => return Ok(r?),
        }
    }
    Ok(laplace_trajectory(km, initial, grid, &opts)?)
}

pub struct DynamicsOutcome {
    pub exact: AmplitudeTrajectory,
    pub laplace: AmplitudeTrajectory,
    pub report: serde_json::Value,
}

pub fn dynamics(config: &RunConfig, res: &Resolved, ctx: &Context) -> Result<DynamicsOutcome, RunError> {
    let Experiment::Dynamics { t_max_over_tau, samples, initial_atom } = &config.experiment else {
        return Err(RunError::Internal("not a dynamics run".into()));
    };
    let (basis, km) = dynamics_kernel(config, res, ctx, None)?;
    let tau = res.tau();
    let t_max = t_max_over_tau * tau;
    check_horizon(&km, t_max)?;
    let grid: Vec<f64> = (0..*samples).map(|i| t_max * i as f64 / (*samples - 1) as f64).collect();
    let initial = Initial::Atom(*initial_atom);
    let start = Instant::now();
    let exact = evolve_exact(&km, initial, &grid, &EvolveOptions::default())?;
    ctx.log.emit("engine", json!({ "engine": "exact", "seconds": start.elapsed().as_secs_f64() }));
    let start = Instant::now();
    let (mut laplace, change) = laplace_widening(&km, initial, &grid, ctx)?;
    let photons = reconstruct_photon_amplitudes(&laplace, &km)?;
    for (n, f) in photons.iter().enumerate() {
        laplace.norm_series[n] += f.iter().map(|z| z.norm_sqr()).sum::<f64>();
    }
    ctx.log.emit("engine", json!({ "engine": "laplace", "seconds": start.elapsed().as_secs_f64(), "certificate_change": change }));
    let agreement = engines_agreement(&exact, &laplace);
    let p2_max = exact.p2.iter().cloned().fold(0.0, f64::max);
    let onset = exact.time_grid.iter().zip(&exact.p2).find(|(_, p)| p2_max > 0.0 && **p > 1e-4 * p2_max).map(|(t, _)| t / tau);
    let report = json!({
        "tau": tau,
        "gamma_free": res.gamma_free,
        "gamma_free_tau": res.gamma_free * tau,
        "u": res.u(),
        "f_over_d": match res.cavity {
            CavitySpec::ProlateEllipsoid { interfocal_d, vertex_gap_f } => Some(vertex_gap_f / interfocal_d),
            _ => None,
        },
        "modes": basis.len(),
        "validated_horizon": validated_horizon(&km),
        "max_norm_drift": exact.max_norm_drift(),
        "engines_agreement": agreement,
        "inversion_certificate_change": change,
        "p2_max": p2_max,
        "p2_onset_over_tau": onset,
        "units": { "t": "1/gamma_free", "tau": "time unit of the configured unit system", "amplitudes": "lab frame" },
    });
    Ok(DynamicsOutcome { exact, laplace, report })
}

fn run_dynamics(config: &RunConfig, res: &Resolved, ctx: &Context) -> Result<Vec<PathBuf>, RunError> {
    let out = dynamics(config, res, ctx)?;
    let a = ctx.write("trajectory_exact.csv", &trajectory_csv(&out.exact, res.gamma_free))?;
    let b = ctx.write("trajectory_laplace.csv", &trajectory_csv(&out.laplace, res.gamma_free))?;
    let c = ctx.write("dynamics_report.json", &serde_json::to_string_pretty(&out.report).expect("json"))?;
    Ok(vec![a, b, c])
}

pub struct FramesOutcome {
    pub snapshots: Vec<cavityqed::field::FieldSnapshot>,
    pub report: serde_json::Value,
}

pub fn field_frames(config: &RunConfig, res: &Resolved, ctx: &Context) -> Result<FramesOutcome, RunError> {
    let Experiment::FieldFrames { times_over_tau, grid, initial_atom, part, profile_resolution } = &config.experiment else {
        return Err(RunError::Internal("not a frames run".into()));
    };
    let (basis, km) = dynamics_kernel(config, res, ctx, Some(*profile_resolution))?;
    let tau = res.tau();
    let mut times: Vec<f64> = times_over_tau.iter().map(|x| x * tau).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    check_horizon(&km, *times.last().expect("validated non-empty"))?;
    let start = Instant::now();
    let traj = evolve_exact(&km, Initial::Atom(*initial_atom), &times, &EvolveOptions { keep_photons: true, ..Default::default() })?;
    let photons = traj.photon_amplitudes.clone().ok_or_else(|| RunError::Internal("photon amplitudes were not kept".into()))?;
    ctx.log.emit("engine", json!({ "engine": "exact", "seconds": start.elapsed().as_secs_f64() }));
    // Frames in the order requested.
    let index: Vec<usize> = times_over_tau
        .iter()
        .map(|x| times.iter().position(|t| *t == x * tau).expect("time taken from the same list"))
        .collect();
    let frame_times: Vec<f64> = index.iter().map(|&i| times[i]).collect();
    let frames: Vec<Vec<Complex64>> = index.iter().map(|&i| photons[i].clone()).collect();
    let spec = GridSpec::covering(&res.cavity, grid.nx, grid.nz);
    let unit = figure_unit(&res.cavity, &res.constants, res.omega_eg, res.gamma_free);
    let start = Instant::now();
    let snaps = snapshots(&basis, &frame_times, &frames, &spec, *part, unit, Some(tau))?;
    ctx.log.emit("snapshots", json!({ "frames": snaps.len(), "seconds": start.elapsed().as_secs_f64() }));
    let start = Instant::now();
    let energies = field_energy(&basis, &frames, &EnergyQuadrature::default())?;
    ctx.log.emit("field_energy", json!({ "seconds": start.elapsed().as_secs_f64() }));
    let quantum = res.constants.hbar * res.omega_eg;
    let rows: Vec<serde_json::Value> = index
        .iter()
        .zip(&energies)
        .map(|(&i, e)| {
            let atomic = quantum * (traj.p1[i] + traj.p2[i]);
            let binding = interaction_energy(&km, [traj.b1[i], traj.b2[i]], &photons[i]);
            let balance = (e.total() + atomic) / quantum;
            json!({
                "t_over_tau": times[i] / tau,
                "field_energy": e.total() / quantum,
                "field_energy_electric": e.electric / quantum,
                "field_energy_magnetic": e.magnetic / quantum,
                "field_energy_spectral": e.spectral / quantum,
                "atomic_energy": atomic / quantum,
                "interaction_energy": binding / quantum,
                "energy_balance": balance,
                "relative_error": (balance - 1.0).abs(),
                "norm": traj.norm_series[i],
            })
        })
        .collect();
    let report = json!({
        "tau": tau,
        "gamma_free": res.gamma_free,
        "gamma_free_tau": res.gamma_free * tau,
        "unit_scale": unit,
        "part": part,
        "modes": basis.len(),
        "energy_unit": "hbar omega_eg",
        "frames": rows,
    });
    Ok(FramesOutcome { snapshots: snaps, report })
}

fn run_field_frames(config: &RunConfig, res: &Resolved, ctx: &Context) -> Result<Vec<PathBuf>, RunError> {
    let out = field_frames(config, res, ctx)?;
    std::fs::create_dir_all(&ctx.out)?;
    let mut files = Vec::new();
    for (k, s) in out.snapshots.iter().enumerate() {
        let stem = format!("frame_{k:02}");
        s.write(&ctx.out, &stem)?;
        ctx.log.emit("wrote", json!({ "path": ctx.out.join(format!("{stem}.csv")), "t_over_tau": s.t / res.tau() }));
        files.push(ctx.out.join(format!("{stem}.csv")));
        files.push(ctx.out.join(format!("{stem}.json")));
    }
    files.push(ctx.write("frames_report.json", &serde_json::to_string_pretty(&out.report).expect("json"))?);
    Ok(files)
}

/// Cache directory from the command line, else from `CAVITYQED_CACHE`.
pub fn cache_dir(flag: Option<&Path>) -> Option<PathBuf> {
    flag.map(Path::to_path_buf).or_else(|| std::env::var_os(CACHE_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
}

pub const CACHE_ENV: &str = "CAVITYQED_CACHE";
