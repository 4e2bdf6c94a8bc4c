//! Normally ordered energy density of the one-photon field.
//!
//! With `E+ = i sum_i sqrt(hbar w_i / 2 eps0) f_i g_i` and the magnetic partner
//! `c B+ = sum_i sqrt(hbar w_i / 2 eps0) f_i b_i`, the density is
//! `w = eps0 (|E+|^2 + |c B+|^2)` and integrates to `sum_i hbar w_i |f_i|^2`.
//!
//! The mode fields are `g = curl(e_phi rho V W) / sqrt(N)`. In the separated
//! coordinates both components reduce to
//! `E_u = a_u V W + b_u V W'` and `E_v = a_v V W + b_v V' W`
//! with coefficients that stay finite on the axis.

use crate::error::{Error, Result};
use crate::dynamics::AmplitudeTrajectory;
use crate::geometry::{AxialFactor, CavitySpec, PhysicalConstants, SeparableSystem};
use crate::kernel::KernelMatrix;
use crate::modes::ModeBasis;
use crate::quadrature::composite_gauss;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::path::Path;

/// Value written to grid cells outside the mirror.
pub const MASK_SENTINEL: f64 = -1.0;

/// Relative amplitude below which a mode is left out of the field sums.
const ACTIVE_CUTOFF: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldPart {
    #[default]
    Total,
    ElectricOnly,
}

/// Rectangular grid in the `(x, z)` half-plane `y = 0`, sampled at cell centres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub x_extent: (f64, f64),
    pub z_extent: (f64, f64),
    pub nx: usize,
    pub nz: usize,
}

impl GridSpec {
    /// Grid covering the whole mirror cross-section (the paraboloid is cut at `xi_cutoff`).
    pub fn covering(cavity: &CavitySpec<f64>, nx: usize, nz: usize) -> Self {
        let (x_extent, z_extent) = match *cavity {
            CavitySpec::ProlateEllipsoid { .. } => {
                let a = cavity.semi_major_axis().unwrap_or(1.0);
                let b = cavity.semi_minor_axis().unwrap_or(1.0);
                ((-b, b), (-a, a))
            }
            CavitySpec::Parabolic { focal_length_f, xi_cutoff } => {
                let eta0 = 2.0 * focal_length_f;
                let r = (xi_cutoff * eta0).sqrt();
                ((-r, r), (-0.5 * eta0, 0.5 * xi_cutoff))
            }
        };
        Self { x_extent, z_extent, nx, nz }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |e: (f64, f64)| e.0.is_finite() && e.1.is_finite() && e.1 > e.0;
        if self.nx == 0 || self.nz == 0 || !ok(self.x_extent) || !ok(self.z_extent) {
            return Err(Error::InvalidParameter("grid needs positive resolution and increasing finite extents".into()));
        }
        Ok(())
    }

    pub fn x(&self, i: usize) -> f64 {
        let (a, b) = self.x_extent;
        a + (i as f64 + 0.5) * (b - a) / self.nx as f64
    }

    pub fn z(&self, j: usize) -> f64 {
        let (a, b) = self.z_extent;
        a + (j as f64 + 0.5) * (b - a) / self.nz as f64
    }
}

/// Curvilinear field coefficients at one point.
#[derive(Debug, Clone, Copy)]
struct Coeffs {
    au: f64,
    bu: f64,
    av: f64,
    bv: f64,
    rho: f64,
}

fn coeffs(sys: &SeparableSystem<f64>, u: f64, v: f64) -> Coeffs {
    match *sys {
        SeparableSystem::Prolate { c0 } => {
            let su = (u * u - 1.0).max(0.0);
            let sv = (1.0 - v * v).max(0.0);
            let s = (u * u - v * v).max(0.0).sqrt();
            Coeffs {
                au: -2.0 * v * su.sqrt() / s,
                bu: su.sqrt() * sv / s,
                av: -2.0 * u * sv.sqrt() / s,
                bv: -sv.sqrt() * su / s,
                rho: c0 * (su * sv).sqrt(),
            }
        }
        SeparableSystem::Parabolic => {
            let s = (u + v).sqrt();
            let (ru, rv) = (u.max(0.0).sqrt(), v.max(0.0).sqrt());
            Coeffs { au: 2.0 * ru / s, bu: 2.0 * ru * v / s, av: -2.0 * rv / s, bv: -2.0 * rv * u / s, rho: ru * rv }
        }
    }
}

/// Move a point sitting exactly on a focus a hair along the axis, where the limit is regular.
fn off_focus(sys: &SeparableSystem<f64>, u: f64, v: f64) -> (f64, f64) {
    match *sys {
        SeparableSystem::Prolate { .. } if u * u - v * v < 1e-16 => (u + 1e-8, v),
        SeparableSystem::Parabolic if u + v < 1e-16 => (u + 1e-12, v),
        _ => (u, v),
    }
}

/// `sqrt(hbar w_i / 2 eps0) / sqrt(N_i)`, the factor turning `f_i` into a field amplitude.
fn field_weights(basis: &ModeBasis) -> Vec<f64> {
    let k = &basis.constants;
    basis.modes.iter().map(|m| (k.hbar * m.frequency / (2.0 * k.epsilon0) / m.normalization).sqrt()).collect()
}

fn check_frames(basis: &ModeBasis, frames: &[Vec<Complex64>]) -> Result<()> {
    if basis.modes.iter().any(|m| m.profile.is_none()) {
        return Err(Error::InvalidParameter("field evaluation needs tabulated mode profiles".into()));
    }
    for f in frames {
        if f.len() != basis.len() {
            return Err(Error::InvalidParameter(format!(
                "photon amplitude vector has {} entries for {} modes",
                f.len(),
                basis.len()
            )));
        }
    }
    Ok(())
}

/// Indices of modes that carry amplitude in at least one frame.
fn active_modes(frames: &[Vec<Complex64>], weights: &[f64]) -> Vec<usize> {
    let mag = |i: usize| frames.iter().map(|f| f[i].norm() * weights[i]).fold(0.0, f64::max);
    let top = (0..weights.len()).map(mag).fold(0.0, f64::max);
    (0..weights.len()).filter(|&i| top > 0.0 && mag(i) > ACTIVE_CUTOFF * top).collect()
}

/// Per-point mode factors of the active modes, contracted against several frames.
struct Contractor<'a> {
    basis: &'a ModeBasis,
    active: Vec<usize>,
    /// `coef[frame][j]` for active mode `j`.
    coef: Vec<Vec<Complex64>>,
    part: FieldPart,
}

impl<'a> Contractor<'a> {
    fn new(basis: &'a ModeBasis, frames: &[Vec<Complex64>], part: FieldPart) -> Result<Self> {
        check_frames(basis, frames)?;
        let w = field_weights(basis);
        let active = active_modes(frames, &w);
        let coef = frames.iter().map(|f| active.iter().map(|&i| f[i] * w[i]).collect()).collect();
        Ok(Self { basis, active, coef, part })
    }

    /// Energy density in every frame at `(rho, z)`; `false` outside the mirror.
    fn densities(&self, rho: f64, z: f64, out: &mut [f64]) -> bool {
        let cav = &self.basis.cavity;
        if cav.wall_function(rho, z) > 0.0 {
            return false;
        }
        let sys = cav.system();
        let (u, v) = sys.from_cylindrical(rho, z);
        let (u, v) = off_focus(&sys, u, v);
        let c = coeffs(&sys, u, v);
        let nf = self.coef.len();
        let mut s = vec![[Complex64::new(0.0, 0.0); 3]; nf];
        for (j, &i) in self.active.iter().enumerate() {
            let m = &self.basis.modes[i];
            let prof = m.profile.as_ref().expect("checked");
            let (fv, dfv) = prof.xi.value_and_slope(u);
            let (gw, dgw) = prof.eta.value_and_slope(v);
            let e_u = c.au * fv * gw + c.bu * fv * dgw;
            let e_v = c.av * fv * gw + c.bv * dfv * gw;
            let b = m.wavenumber * c.rho * fv * gw;
            for (acc, cf) in s.iter_mut().zip(&self.coef) {
                let a = cf[j];
                acc[0] += a * e_u;
                acc[1] += a * e_v;
                acc[2] += a * b;
            }
        }
        let eps0 = self.basis.constants.epsilon0;
        for (o, acc) in out.iter_mut().zip(&s) {
            let mut w = acc[0].norm_sqr() + acc[1].norm_sqr();
            if self.part == FieldPart::Total {
                w += acc[2].norm_sqr();
            }
            *o = eps0 * w;
        }
        true
    }
}

/// Energy density at a Cartesian point for one set of photon amplitudes `f_i`.
pub fn energy_density_at(point: [f64; 3], photon_amplitudes: &[Complex64], basis: &ModeBasis, part: FieldPart) -> Result<f64> {
    if !basis.cavity.contains(point) {
        return Err(Error::PointOutsideDomain { x: point[0], y: point[1], z: point[2] });
    }
    let ctr = Contractor::new(basis, std::slice::from_ref(&photon_amplitudes.to_vec()), part)?;
    let (rho, z) = crate::geometry::cylindrical(point);
    let mut w = [0.0];
    ctr.densities(rho, z, &mut w);
    Ok(w[0])
}

/// Energy density at time `t`, which must be a sample of the trajectory grid.
/// Photon amplitudes are taken from the trajectory or reconstructed from `b(t)`.
pub fn energy_density_at_time(
    point: [f64; 3],
    t: f64,
    traj: &AmplitudeTrajectory,
    km: &KernelMatrix,
    basis: &ModeBasis,
    part: FieldPart,
) -> Result<f64> {
    let n = grid_index(&traj.time_grid, t)?;
    let f = crate::dynamics::photon_amplitudes(traj, km)?;
    energy_density_at(point, &f[n], basis, part)
}

/// Position of `t` in a time grid, allowing for rounding in the caller's arithmetic.
pub fn grid_index(grid: &[f64], t: f64) -> Result<usize> {
    let scale = grid.last().map_or(1.0, |x| x.abs().max(1.0));
    grid.iter()
        .position(|&x| (x - t).abs() <= 1e-9 * scale)
        .ok_or_else(|| Error::GridMismatch(format!("t = {t} is not a sample of the trajectory")))
}

/// `<H_int> = 2 hbar sum_a sum_i kappa_ai Re(conj(b_a) f_i)`, the atom-field binding energy
/// that the free-field density does not contain.
pub fn interaction_energy(km: &KernelMatrix, b: [Complex64; 2], f: &[Complex64]) -> f64 {
    let mut e = 0.0;
    for (a, row) in km.couplings.iter().enumerate() {
        for (k, fi) in row.iter().zip(f) {
            e += k * (b[a].conj() * fi).re;
        }
    }
    2.0 * km.constants.hbar * e
}

/// Unit of the density maps, `3 pi hbar w_eg Gamma_free / (80 L^2 c)` with `L = d`
/// for the ellipsoid and `L = 2f` for the paraboloid.
pub fn figure_unit(cavity: &CavitySpec<f64>, constants: &PhysicalConstants<f64>, omega_eg: f64, gamma_free: f64) -> f64 {
    let l = match *cavity {
        CavitySpec::ProlateEllipsoid { interfocal_d, .. } => interfocal_d,
        CavitySpec::Parabolic { focal_length_f, .. } => 2.0 * focal_length_f,
    };
    3.0 * PI * constants.hbar * omega_eg * gamma_free / (80.0 * l * l * constants.c)
}

/// Energy density on an axis-plane grid at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSnapshot {
    pub t: f64,
    pub tau: Option<f64>,
    pub grid: GridSpec,
    /// `energy_density[j][i]` at `(grid.x(i), grid.z(j))`, in units of `unit_scale`;
    /// `MASK_SENTINEL` outside the mirror.
    pub energy_density: Vec<Vec<f64>>,
    pub unit_scale: f64,
    /// Focus positions as `(x, z)`.
    pub focal_markers: Vec<[f64; 2]>,
    pub part: FieldPart,
}

/// Snapshots for several frames; mode profiles are evaluated once per grid point.
#[allow(clippy::too_many_arguments)]
pub fn snapshots(
    basis: &ModeBasis,
    times: &[f64],
    frames: &[Vec<Complex64>],
    grid: &GridSpec,
    part: FieldPart,
    unit_scale: f64,
    tau: Option<f64>,
) -> Result<Vec<FieldSnapshot>> {
    grid.validate()?;
    if times.len() != frames.len() {
        return Err(Error::InvalidParameter("one time per frame is required".into()));
    }
    if !(unit_scale > 0.0 && unit_scale.is_finite()) {
        return Err(Error::InvalidParameter("unit scale must be positive".into()));
    }
    let ctr = Contractor::new(basis, frames, part)?;
    let nf = frames.len();
    let rows: Vec<Vec<Vec<f64>>> = (0..grid.nz)
        .into_par_iter()
        .map(|j| {
            let z = grid.z(j);
            let mut row = vec![vec![MASK_SENTINEL; grid.nx]; nf];
            let mut w = vec![0.0; nf];
            for i in 0..grid.nx {
                if ctr.densities(grid.x(i).abs(), z, &mut w) {
                    for (r, wk) in row.iter_mut().zip(&w) {
                        r[i] = wk / unit_scale;
                    }
                }
            }
            row
        })
        .collect();
    let focal_markers = (1..=basis.cavity.focus_count())
        .map(|k| basis.cavity.focus(k).map(|p| [p[0], p[2]]))
        .collect::<Result<Vec<_>>>()?;
    Ok((0..nf)
        .map(|k| FieldSnapshot {
            t: times[k],
            tau,
            grid: *grid,
            energy_density: rows.iter().map(|r| r[k].clone()).collect(),
            unit_scale,
            focal_markers: focal_markers.clone(),
            part,
        })
        .collect())
}

pub fn snapshot(
    basis: &ModeBasis,
    t: f64,
    photon_amplitudes: &[Complex64],
    grid: &GridSpec,
    part: FieldPart,
    unit_scale: f64,
    tau: Option<f64>,
) -> Result<FieldSnapshot> {
    Ok(snapshots(basis, &[t], &[photon_amplitudes.to_vec()], grid, part, unit_scale, tau)?.remove(0))
}

#[derive(Serialize)]
struct Sidecar<'a> {
    t: f64,
    tau: Option<f64>,
    unit_scale: f64,
    extents: Extents,
    resolution: [usize; 2],
    mask_sentinel: f64,
    focal_markers: &'a [[f64; 2]],
    part: FieldPart,
}

#[derive(Serialize)]
struct Extents {
    x: (f64, f64),
    z: (f64, f64),
}

impl FieldSnapshot {
    /// Largest unmasked value.
    pub fn max(&self) -> f64 {
        self.energy_density.iter().flatten().copied().filter(|&v| v != MASK_SENTINEL).fold(0.0, f64::max)
    }

    /// Row-major matrix: a header row `z\x,x_0,...` then one row `z_j,w_0j,...` per `z`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("z\\x");
        for i in 0..self.grid.nx {
            s.push_str(&format!(",{:e}", self.grid.x(i)));
        }
        s.push('\n');
        for (j, row) in self.energy_density.iter().enumerate() {
            s.push_str(&format!("{:e}", self.grid.z(j)));
            for v in row {
                s.push_str(&format!(",{v:e}"));
            }
            s.push('\n');
        }
        s
    }

    pub fn sidecar_json(&self) -> String {
        let sc = Sidecar {
            t: self.t,
            tau: self.tau,
            unit_scale: self.unit_scale,
            extents: Extents { x: self.grid.x_extent, z: self.grid.z_extent },
            resolution: [self.grid.nx, self.grid.nz],
            mask_sentinel: MASK_SENTINEL,
            focal_markers: &self.focal_markers,
            part: self.part,
        };
        serde_json::to_string_pretty(&sc).expect("plain data serialises")
    }

    /// Writes `<stem>.csv` and `<stem>.json` into `dir`.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        std::fs::write(dir.join(format!("{stem}.csv")), self.to_csv())?;
        std::fs::write(dir.join(format!("{stem}.json")), self.sidecar_json())?;
        Ok(())
    }
}

/// Gauss nodes for the volume integral of the density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergyQuadrature {
    /// Gauss points per panel; a panel spans half a wavelength of the fastest active mode.
    pub points_per_panel: usize,
}

impl Default for EnergyQuadrature {
    fn default() -> Self {
        Self { points_per_panel: 4 }
    }
}

/// Field energy in one frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldEnergy {
    pub electric: f64,
    pub magnetic: f64,
    /// `sum_i hbar w_i |f_i|^2`, the same quantity from mode orthonormality.
    pub spectral: f64,
}

impl FieldEnergy {
    pub fn total(&self) -> f64 {
        self.electric + self.magnetic
    }
}

/// Stretched coordinates in which the metric is smooth: `(xi, eta) = (cosh mu, -cos theta)`
/// for the ellipsoid and `(s^2, t^2)` for the paraboloid. Returns nodes as
/// `(u, v, du/dp)` plus weights, with the volume element left to the caller.
struct Axis {
    u: Vec<f64>,
    du: Vec<f64>,
    w: Vec<f64>,
}

fn axis_from(nodes: (Vec<f64>, Vec<f64>), map: impl Fn(f64) -> (f64, f64)) -> Axis {
    let (p, w) = nodes;
    let (u, du) = p.iter().map(|&x| map(x)).unzip();
    Axis { u, du, w }
}

/// Total field energy in each frame by a tensor Gauss rule over the mirror volume.
///
/// The sums over modes are separable: for every `xi` node the factors `c_i V_i` are
/// formed once and dotted against a table of `W_i` over the `eta` nodes. For the
/// ellipsoid the even and odd modes are summed separately on `eta >= 0` and the
/// mirror half follows from parity.
pub fn field_energy(basis: &ModeBasis, frames: &[Vec<Complex64>], quad: &EnergyQuadrature) -> Result<Vec<FieldEnergy>> {
    check_frames(basis, frames)?;
    if quad.points_per_panel < 2 {
        return Err(Error::InvalidParameter("at least two Gauss points per panel are needed".into()));
    }
    let wts = field_weights(basis);
    let active = active_modes(frames, &wts);
    let hbar = basis.constants.hbar;
    let spectral: Vec<f64> = frames
        .iter()
        .map(|f| basis.modes.iter().zip(f).map(|(m, a)| hbar * m.frequency * a.norm_sqr()).sum())
        .collect();
    if active.is_empty() {
        return Ok(spectral.into_iter().map(|s| FieldEnergy { electric: 0.0, magnetic: 0.0, spectral: s }).collect());
    }
    let k_max = active.iter().map(|&i| basis.modes[i].wavenumber).fold(0.0, f64::max);
    let np = quad.points_per_panel;
    let panels = |len: f64| (k_max * len / PI).ceil() as usize + 1;
    let sys = basis.cavity.system();
    let (ua, va, mirror) = match basis.cavity {
        CavitySpec::ProlateEllipsoid { interfocal_d, .. } => {
            let c0 = 0.5 * interfocal_d;
            let xi0 = basis.cavity.xi_boundary();
            let mu0 = xi0.acosh();
            let ua = axis_from(composite_gauss(np, panels(c0 * mu0.sinh()), 0.0, mu0), |m| (m.cosh(), m.sinh()));
            let va = axis_from(composite_gauss(np, panels(0.5 * PI * c0 * xi0), 0.5 * PI, PI), |t| (-t.cos(), t.sin()));
            (ua, va, true)
        }
        CavitySpec::Parabolic { focal_length_f, xi_cutoff } => {
            let eta0 = 2.0 * focal_length_f;
            let h = (xi_cutoff + eta0).sqrt();
            let ua = axis_from(composite_gauss(np, panels(h * xi_cutoff.sqrt()), 0.0, xi_cutoff.sqrt()), |s| (s * s, 2.0 * s));
            let va = axis_from(composite_gauss(np, panels(h * eta0.sqrt()), 0.0, eta0.sqrt()), |t| (t * t, 2.0 * t));
            (ua, va, false)
        }
    };
    // Modes ordered even first so each parity class is a contiguous block.
    let mut order = active.clone();
    if mirror {
        order.sort_by_key(|&i| basis.modes[i].parity < 0.0);
    }
    let n_even = if mirror { order.iter().take_while(|&&i| basis.modes[i].parity >= 0.0).count() } else { order.len() };
    let m = order.len();
    let nq = va.u.len();
    let mut wt = vec![0.0; nq * m];
    let mut dwt = vec![0.0; nq * m];
    for q in 0..nq {
        for (j, &i) in order.iter().enumerate() {
            let prof = basis.modes[i].profile.as_ref().expect("checked");
            let (g, dg) = prof.eta.value_and_slope(va.u[q]);
            wt[q * m + j] = g;
            dwt[q * m + j] = dg;
        }
    }
    let kvec: Vec<f64> = order.iter().map(|&i| basis.modes[i].wavenumber).collect();
    let eps0 = basis.constants.epsilon0;
    let mut out = Vec::with_capacity(frames.len());
    for (f, spec) in frames.iter().zip(spectral) {
        let coef: Vec<Complex64> = order.iter().map(|&i| f[i] * wts[i]).collect();
        let (el, mg) = (0..ua.u.len())
            .into_par_iter()
            .map(|p| {
                let u = ua.u[p];
                let mut rows = [[vec![0.0; m], vec![0.0; m]], [vec![0.0; m], vec![0.0; m]], [vec![0.0; m], vec![0.0; m]]];
                for (j, &i) in order.iter().enumerate() {
                    let prof = basis.modes[i].profile.as_ref().expect("checked");
                    let (fv, dfv) = prof.xi.value_and_slope(u);
                    let a = coef[j];
                    for (r, x) in rows.iter_mut().zip([fv, dfv, kvec[j] * fv]) {
                        r[0][j] = a.re * x;
                        r[1][j] = a.im * x;
                    }
                }
                let mut acc = (0.0, 0.0);
                for q in 0..nq {
                    let w = &wt[q * m..(q + 1) * m];
                    let dw = &dwt[q * m..(q + 1) * m];
                    // [VW, V'W, kVW, VW'] per parity block, real and imaginary.
                    let mut sums = [[[0.0; 2]; 4]; 2];
                    for (blk, range) in [(0, 0..n_even), (1, n_even..m)] {
                        for j in range {
                            for c in 0..2 {
                                sums[blk][0][c] += rows[0][c][j] * w[j];
                                sums[blk][1][c] += rows[1][c][j] * w[j];
                                sums[blk][2][c] += rows[2][c][j] * w[j];
                                sums[blk][3][c] += rows[0][c][j] * dw[j];
                            }
                        }
                    }
                    let sides: &[f64] = if mirror { &[1.0, -1.0] } else { &[1.0] };
                    for &side in sides {
                        let v = side * va.u[q];
                        let comb = |k: usize, c: usize| {
                            // Values flip with odd parity, slopes in eta with even parity.
                            let (e, o) = (sums[0][k][c], sums[1][k][c]);
                            match (side > 0.0, k == 3) {
                                (true, _) => e + o,
                                (false, false) => e - o,
                                (false, true) => o - e,
                            }
                        };
                        let (s0, s1, s2, s3) = (
                            Complex64::new(comb(0, 0), comb(0, 1)),
                            Complex64::new(comb(1, 0), comb(1, 1)),
                            Complex64::new(comb(2, 0), comb(2, 1)),
                            Complex64::new(comb(3, 0), comb(3, 1)),
                        );
                        let (uu, vv) = off_focus(&sys, u, v);
                        let cf = coeffs(&sys, uu, vv);
                        let e2 = (s0 * cf.au + s3 * cf.bu).norm_sqr() + (s0 * cf.av + s1 * cf.bv).norm_sqr();
                        let b2 = cf.rho * cf.rho * s2.norm_sqr();
                        let vol = 2.0 * PI * volume_density(&sys, u, v) * ua.du[p] * va.du[q] * ua.w[p] * va.w[q];
                        acc.0 += eps0 * e2 * vol;
                        acc.1 += eps0 * b2 * vol;
                    }
                }
                acc
            })
            .collect::<Vec<_>>()
            .into_iter()
            .fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
        out.push(FieldEnergy { electric: el, magnetic: mg, spectral: spec });
    }
    Ok(out)
}

/// `rho h_xi h_eta`.
fn volume_density(sys: &SeparableSystem<f64>, u: f64, v: f64) -> f64 {
    match *sys {
        SeparableSystem::Prolate { c0 } => c0 * c0 * c0 * (u * u - v * v),
        SeparableSystem::Parabolic => 0.25 * (u + v),
    }
}
