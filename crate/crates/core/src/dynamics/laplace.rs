//! Laplace-domain solution, photon-path (Neumann) expansion and Bromwich inversion.
//!
//! Everything is evaluated in the frame rotating at `omega_eg`: with `s' = s + i omega_eg`
//! the amplitudes `B = b e^{i omega_eg t}` satisfy `[s' I + A(s' - i omega_eg)] B~ = b(0)`,
//! and all kernel poles sit within the coupling window around `s' = 0`.

use super::{AmplitudeTrajectory, Initial, ZERO};
use crate::error::{Error, Result};
use crate::kernel::KernelMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

type C2 = [Complex64; 2];

/// Uniform samples `s_j = gamma + i (center + (j - n/2) dy)`, `j = 0..n`, of a Bromwich line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContourGrid {
    pub gamma: f64,
    pub center: f64,
    pub dy: f64,
    pub n: usize,
}

impl ContourGrid {
    pub fn point(&self, j: usize) -> Complex64 {
        Complex64::new(self.gamma, self.center + (j as f64 - (self.n / 2) as f64) * self.dy)
    }

    pub fn points(&self) -> Vec<Complex64> {
        (0..self.n).map(|j| self.point(j)).collect()
    }

    /// Spacing of the output times, `2 pi / (n dy)`.
    pub fn dt(&self) -> f64 {
        2.0 * PI / (self.n as f64 * self.dy)
    }
}

/// Relative size of the samples at the window edges tolerated by [`inverse_laplace`].
pub const EDGE_TOL: f64 = 1e-8;
/// Spectral energy fraction tolerated in the outer 5% of the window.
pub const ALIAS_TOL: f64 = 1e-6;

/// Bromwich integral `f(t) = (1/2 pi i) int F(s) e^{st} ds` by the trapezoid rule on the
/// grid, evaluated at `t_m = m dt` (`m < n_out`) with one FFT.
///
/// Fails if the samples have not decayed at the window edges or if too much of their
/// energy lies in the outer 5% of the window.
pub fn inverse_laplace(grid: &ContourGrid, values: &[Complex64], n_out: usize) -> Result<Vec<Complex64>> {
    inverse_laplace_with(grid, values, n_out, EDGE_TOL)
}

pub fn inverse_laplace_with(grid: &ContourGrid, values: &[Complex64], n_out: usize, edge_tol: f64) -> Result<Vec<Complex64>> {
    let n = grid.n;
    if values.len() != n || n < 8 {
        return Err(Error::InvalidParameter("contour values do not match the grid".into()));
    }
    if !(grid.gamma > 0.0 && grid.dy > 0.0) {
        return Err(Error::InvalidParameter("contour needs gamma > 0 and dy > 0".into()));
    }
    if n_out > n {
        return Err(Error::InvalidParameter("more output times than contour samples".into()));
    }
    let peak = values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if peak == 0.0 {
        return Ok(vec![ZERO; n_out]);
    }
    let edge = values[0].norm().max(values[n - 1].norm());
    if edge > edge_tol * peak {
        return Err(Error::NonDecayedEdges { ratio: edge / peak });
    }
    let total: f64 = values.iter().map(|v| v.norm_sqr()).sum();
    let band = (n / 40).max(1);
    let outer: f64 = values[..band].iter().chain(&values[n - band..]).map(|v| v.norm_sqr()).sum();
    if outer > ALIAS_TOL * total {
        return Err(Error::Aliasing { fraction: outer / total });
    }

    let mut buf = values.to_vec();
    FftPlanner::<f64>::new().plan_fft_inverse(n).process(&mut buf);
    let dt = grid.dt();
    let half = (n / 2) as f64;
    Ok((0..n_out)
        .map(|m| {
            let t = m as f64 * dt;
            // e^{i y_j t} = e^{i center t} e^{2 pi i j m / n} e^{-i half dy t}
            let phase = Complex64::from_polar((grid.gamma * t).exp() * grid.dy / (2.0 * PI), (grid.center - half * grid.dy) * t);
            buf[m] * phase
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InversionOptions {
    /// Contour abscissa; default `3 / t_max`.
    pub gamma: Option<f64>,
    /// Smallest half-range of `Im s'` sampled.
    pub y_min: f64,
    /// Repeat with doubled range and density and require this relative agreement.
    pub certify: Option<f64>,
    pub edge_tol: f64,
}

impl Default for InversionOptions {
    fn default() -> Self {
        Self { gamma: None, y_min: 16.0, certify: Some(1e-4), edge_tol: EDGE_TOL }
    }
}

/// Inverse transform of a vector-valued `F(s')` at `t = k dt_out`, `k < n_out`.
///
/// Returns the samples and the relative change under the certification refinement
/// (zero if not certified).
pub fn invert_rotating<F>(f: F, dt_out: f64, n_out: usize, opts: &InversionOptions) -> Result<(Vec<C2>, f64)>
where
    F: Fn(Complex64) -> Result<C2> + Sync,
{
    if !(dt_out > 0.0) || n_out < 2 {
        return Err(Error::InvalidParameter("need dt_out > 0 and at least two output times".into()));
    }
    let t_max = dt_out * (n_out - 1) as f64;
    let gamma = opts.gamma.unwrap_or(3.0 / t_max);
    let run = |refine: usize| -> Result<Vec<C2>> {
        let y_want = opts.y_min.max(PI / dt_out) * refine as f64;
        let sub = (dt_out * y_want / PI).ceil().max(1.0) as usize;
        let dt = dt_out / sub as f64;
        let period = (14.0 / gamma).max(1.1 * t_max) * refine as f64;
        let n = ((period / dt).ceil() as usize).next_power_of_two();
        let grid = ContourGrid { gamma, center: 0.0, dy: 2.0 * PI / (n as f64 * dt), n };
        let vals: Vec<C2> = grid.points().into_par_iter().map(&f).collect::<Result<_>>()?;
        let n_fine = (n_out - 1) * sub + 1;
        let mut comps = [Vec::new(), Vec::new()];
        for (c, comp) in comps.iter_mut().enumerate() {
            let v: Vec<Complex64> = vals.iter().map(|x| x[c]).collect();
            *comp = inverse_laplace_with(&grid, &v, n_fine, opts.edge_tol)?;
        }
        Ok((0..n_out).map(|k| [comps[0][k * sub], comps[1][k * sub]]).collect())
    };
    let base = run(1)?;
    let mut change = 0.0;
    if let Some(tol) = opts.certify {
        let fine = run(2)?;
        let scale = base.iter().flat_map(|x| x.iter()).map(|z| z.norm()).fold(0.0, f64::max).max(1e-300);
        change = base
            .iter()
            .zip(&fine)
            .flat_map(|(a, b)| (0..2).map(move |c| (a[c] - b[c]).norm()))
            .fold(0.0, f64::max)
            / scale;
        if change > tol {
            return Err(Error::NotConverged(format!("inverse Laplace transform changes by {change:.2e} under refinement")));
        }
    }
    Ok((base, change))
}

/// Rotating-frame kernel matrix at `s'`.
fn kernel_rot(km: &KernelMatrix, sp: Complex64) -> Result<[[Complex64; 2]; 2]> {
    km.matrix(sp - Complex64::new(0.0, km.omega_eg()))
}

fn solve2(m: [[Complex64; 2]; 2], b: C2, n: usize, s: Complex64) -> Result<C2> {
    if n == 1 {
        if m[0][0].norm() == 0.0 {
            return Err(Error::SingularMatrix { re: s.re, im: s.im });
        }
        return Ok([b[0] / m[0][0], ZERO]);
    }
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let scale = m.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max);
    if !(det.norm() > 1e-300 && det.norm() > 1e-14 * scale * scale) {
        return Err(Error::SingularMatrix { re: s.re, im: s.im });
    }
    Ok([(m[1][1] * b[0] - m[0][1] * b[1]) / det, (m[0][0] * b[1] - m[1][0] * b[0]) / det])
}

fn solve_rot(km: &KernelMatrix, b0: C2, sp: Complex64) -> Result<C2> {
    let mut m = kernel_rot(km, sp)?;
    for (a, row) in m.iter_mut().enumerate().take(km.atom_count()) {
        row[a] += sp;
    }
    solve2(m, b0, km.atom_count(), sp)
}

/// `b~(s) = [(s + i omega_eg) I + A(s)]^{-1} b(0)` at each sample (`Re s > 0`).
pub fn laplace_solve(km: &KernelMatrix, initial: Initial, s_samples: &[Complex64]) -> Result<Vec<C2>> {
    let b0 = initial.amplitudes(km.atom_count())?;
    let w0 = km.omega_eg();
    s_samples
        .iter()
        .map(|&s| {
            if !(s.re > 0.0) {
                return Err(Error::InvalidParameter("Laplace samples need Re s > 0".into()));
            }
            let mut m = km.matrix(s)?;
            let shift = s + Complex64::new(0.0, w0);
            for (a, row) in m.iter_mut().enumerate().take(km.atom_count()) {
                row[a] += shift;
            }
            solve2(m, b0, km.atom_count(), s)
        })
        .collect()
}

/// One order of the photon-path expansion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhotonPathTerm {
    pub order: usize,
    /// Term at the requested samples (lab-frame `s`).
    pub laplace_value: Vec<C2>,
    /// Time-domain contribution (lab frame), if computed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_contribution: Option<Vec<C2>>,
}

/// `[-T_1(s')]^n b(0) / (s' + Gamma_free/2)^{n+1}` in the rotating frame.
fn neumann_terms_rot(km: &KernelMatrix, b0: C2, sp: Complex64, n_max: usize) -> Result<Vec<C2>> {
    let na = km.atom_count();
    let mut t1 = kernel_rot(km, sp)?;
    for (a, row) in t1.iter_mut().enumerate().take(na) {
        row[a] -= 0.5 * km.gamma_free;
    }
    let denom = sp + 0.5 * km.gamma_free;
    let mut v = [b0[0] / denom, b0[1] / denom];
    let mut out = Vec::with_capacity(n_max + 1);
    out.push(v);
    for _ in 0..n_max {
        let mut w = [ZERO; 2];
        for a in 0..na {
            for b in 0..na {
                w[a] -= t1[a][b] * v[b];
            }
            w[a] /= denom;
        }
        v = w;
        out.push(v);
    }
    Ok(out)
}

/// Growth of the term norms over three consecutive orders signals a diverging series.
fn diverges(terms: &[C2]) -> bool {
    let norms: Vec<f64> = terms.iter().map(|t| t[0].norm() + t[1].norm()).collect();
    norms.windows(4).any(|w| w[1] > w[0] && w[2] > w[1] && w[3] > w[2])
}

/// Neumann terms `n = 0..=n_max` at the given lab-frame samples.
pub fn neumann_expand(km: &KernelMatrix, initial: Initial, s_samples: &[Complex64], n_max: usize) -> Result<Vec<PhotonPathTerm>> {
    let b0 = initial.amplitudes(km.atom_count())?;
    let w0 = Complex64::new(0.0, km.omega_eg());
    let mut per_s = Vec::with_capacity(s_samples.len());
    for (j, &s) in s_samples.iter().enumerate() {
        let t = neumann_terms_rot(km, b0, s + w0, n_max)?;
        if diverges(&t) {
            return Err(Error::NeumannDivergence { index: j });
        }
        per_s.push(t);
    }
    Ok((0..=n_max)
        .map(|n| PhotonPathTerm {
            order: n,
            laplace_value: per_s.iter().map(|t| t[n]).collect(),
            time_contribution: None,
        })
        .collect())
}

fn uniform_step(t_grid: &[f64]) -> Result<f64> {
    if t_grid.len() < 2 || t_grid[0] != 0.0 {
        return Err(Error::InvalidParameter("Laplace inversion needs a uniform grid starting at 0".into()));
    }
    let dt = t_grid[1];
    let uniform = t_grid.iter().enumerate().all(|(k, &t)| (t - k as f64 * dt).abs() <= 1e-9 * dt.max(t));
    if !(dt > 0.0 && uniform) {
        return Err(Error::InvalidParameter("Laplace inversion needs a uniform grid starting at 0".into()));
    }
    Ok(dt)
}

fn to_lab(w0: f64, t: f64, z: C2) -> C2 {
    let ph = Complex64::from_polar(1.0, -w0 * t);
    [z[0] * ph, z[1] * ph]
}

/// Amplitudes by numerical inversion of [`laplace_solve`] on a uniform grid from 0.
///
/// `b(0)/s'` is subtracted before inversion and added back as the constant `b(0)`, so the
/// transformed remainder decays like `|s'|^-3`.
pub fn laplace_trajectory(km: &KernelMatrix, initial: Initial, t_grid: &[f64], opts: &InversionOptions) -> Result<(AmplitudeTrajectory, f64)> {
    let dt = uniform_step(t_grid)?;
    let b0 = initial.amplitudes(km.atom_count())?;
    let f = |sp: Complex64| -> Result<C2> {
        let b = solve_rot(km, b0, sp)?;
        Ok([b[0] - b0[0] / sp, b[1] - b0[1] / sp])
    };
    let (rem, change) = invert_rotating(f, dt, t_grid.len(), opts)?;
    let w0 = km.omega_eg();
    let (b1, b2): (Vec<_>, Vec<_>) = rem
        .iter()
        .zip(t_grid)
        .map(|(r, &t)| {
            let z = to_lab(w0, t, [r[0] + b0[0], r[1] + b0[1]]);
            (z[0], z[1])
        })
        .unzip();
    Ok((AmplitudeTrajectory::from_amplitudes(t_grid.to_vec(), b1, b2, w0, km.exchange_time()), change))
}

/// Time-domain photon-path contributions `n = 0..=n_max` on a uniform grid from 0.
///
/// The leading large-`s'` part `(Gamma/2)^n b(0) / (s' + Gamma/2)^{n+1}` of each term is
/// inverted analytically; only the remainder goes through the contour.
pub fn neumann_time_terms(
    km: &KernelMatrix,
    initial: Initial,
    t_grid: &[f64],
    n_max: usize,
    opts: &InversionOptions,
) -> Result<Vec<PhotonPathTerm>> {
    let dt = uniform_step(t_grid)?;
    let b0 = initial.amplitudes(km.atom_count())?;
    let half = 0.5 * km.gamma_free;
    let w0 = km.omega_eg();
    let mut out = Vec::with_capacity(n_max + 1);
    let mut lead_coeff = 1.0;
    for n in 0..=n_max {
        if n > 0 {
            lead_coeff *= half / n as f64;
        }
        let analytic = |t: f64| lead_coeff * t.powi(n as i32) * (-half * t).exp();
        let rem = if n == 0 {
            vec![[ZERO; 2]; t_grid.len()]
        } else {
            let f = |sp: Complex64| -> Result<C2> {
                let terms = neumann_terms_rot(km, b0, sp, n)?;
                let lead = half.powi(n as i32) / (sp + half).powi(n as i32 + 1);
                Ok([terms[n][0] - b0[0] * lead, terms[n][1] - b0[1] * lead])
            };
            invert_rotating(f, dt, t_grid.len(), opts)?.0
        };
        let time: Vec<C2> = rem
            .iter()
            .zip(t_grid)
            .map(|(r, &t)| {
                let a = analytic(t);
                to_lab(w0, t, [r[0] + b0[0] * a, r[1] + b0[1] * a])
            })
            .collect();
        out.push(PhotonPathTerm { order: n, laplace_value: Vec::new(), time_contribution: Some(time) });
    }
    Ok(out)
}

/// Ordered photon path lengths between the foci of an ellipsoid (in units of length):
/// the direct line `d`, one reflection `d + 2f`, and the bounce sequence in multiples of it.
pub fn path_catalogue(interfocal_d: f64, vertex_gap_f: f64, max_order: usize) -> Vec<f64> {
    let major = interfocal_d + 2.0 * vertex_gap_f;
    let mut v = vec![interfocal_d, 2.0 * vertex_gap_f];
    v.extend((1..=max_order).map(|n| n as f64 * major));
    v.sort_by(|a, b| a.total_cmp(b));
    v.dedup();
    v
}
