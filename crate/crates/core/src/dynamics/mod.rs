//! One-excitation dynamics of one or two atoms coupled to the cavity modes.
//!
//! The state is `sum_a b^a(t) |e_a> |0> + sum_i f_i(t) |g, g> |1_i>` with
//!
//! ```text
//! d b^a/dt = -i omega_eg b^a - i sum_i kappa_{a,i} f_i
//! d f_i/dt = -i omega_i f_i  - i sum_a kappa_{a,i} b^a
//! ```
//!
//! whose Laplace transform, after eliminating `f_i`, is
//! `[(s + i omega_eg) I + A(s)] b~ = b(0)`.

pub mod laplace;

use crate::error::{Error, Result};
use crate::kernel::KernelMatrix;
use crate::ode::Rk4;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use laplace::{laplace_trajectory, path_catalogue, 
    inverse_laplace, invert_rotating, laplace_solve, neumann_expand, neumann_time_terms, ContourGrid, InversionOptions,
    PhotonPathTerm,
};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Which atom carries the excitation at `t = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Initial {
    Atom(usize),
    Amplitudes([Complex64; 2]),
}

impl Initial {
    /// `b(0)` for a system of `n` atoms (1-based atom numbers in `Atom`).
    pub fn amplitudes(&self, n: usize) -> Result<[Complex64; 2]> {
        let b = match *self {
            Initial::Atom(a) if (1..=n).contains(&a) => {
                let mut b = [ZERO; 2];
                b[a - 1] = Complex64::new(1.0, 0.0);
                b
            }
            Initial::Atom(a) => return Err(Error::InvalidParameter(format!("no atom {a} among {n}"))),
            Initial::Amplitudes(b) => {
                if n == 1 && b[1] != ZERO {
                    return Err(Error::InvalidParameter("second amplitude given for a single atom".into()));
                }
                let norm = b[0].norm_sqr() + b[1].norm_sqr();
                if (norm - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidParameter(format!("initial amplitudes have norm {norm}")));
                }
                b
            }
        };
        Ok(b)
    }
}

/// Amplitudes on a time grid (lab frame).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeTrajectory {
    pub time_grid: Vec<f64>,
    pub b1: Vec<Complex64>,
    /// Zero for a single atom.
    pub b2: Vec<Complex64>,
    /// `photon_amplitudes[n][i] = f_i(time_grid[n])`, if kept.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub photon_amplitudes: Option<Vec<Vec<Complex64>>>,
    pub p1: Vec<f64>,
    pub p2: Vec<f64>,
    /// `P1 + P2 + sum_i |f_i|^2`; only meaningful for exact propagation.
    pub norm_series: Vec<f64>,
    /// Focus-to-focus travel time `(d + 2f)/c` for the ellipsoid.
    pub tau: Option<f64>,
    pub omega_eg: f64,
}

impl AmplitudeTrajectory {
    pub fn from_amplitudes(time_grid: Vec<f64>, b1: Vec<Complex64>, b2: Vec<Complex64>, omega_eg: f64, tau: Option<f64>) -> Self {
        let p1: Vec<f64> = b1.iter().map(|b| b.norm_sqr()).collect();
        let p2: Vec<f64> = b2.iter().map(|b| b.norm_sqr()).collect();
        let norm_series = p1.iter().zip(&p2).map(|(a, b)| a + b).collect();
        Self { time_grid, b1, b2, photon_amplitudes: None, p1, p2, norm_series, tau, omega_eg }
    }

    pub fn len(&self) -> usize {
        self.time_grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time_grid.is_empty()
    }

    pub fn max_norm_drift(&self) -> f64 {
        self.norm_series.iter().map(|n| (n - 1.0).abs()).fold(0.0, f64::max)
    }
}

/// `(P1(t), P2(t))`.
pub fn excitation_probabilities(traj: &AmplitudeTrajectory) -> (Vec<f64>, Vec<f64>) {
    let p = |b: &[Complex64]| b.iter().map(|z| z.norm_sqr()).collect();
    (p(&traj.b1), p(&traj.b2))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolveOptions {
    /// Fixed step; default `0.01 / max(|omega_i - omega_eg|, coupling rate)`.
    pub step: Option<f64>,
    pub keep_photons: bool,
    /// Largest tolerated `|norm - 1|` before the run is rejected.
    pub norm_tolerance: f64,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self { step: None, keep_photons: false, norm_tolerance: 1e-5 }
    }
}

fn check_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.is_empty() || t_grid[0] < 0.0 || t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("time grid must be non-negative and strictly increasing".into()));
    }
    Ok(())
}

/// Default RK4 step for a kernel: a hundredth of the fastest rotating-frame rate.
pub fn default_step(km: &KernelMatrix) -> f64 {
    let w0 = km.omega_eg();
    let detuning = km
        .frequencies
        .iter()
        .zip(&km.couplings[0])
        .filter(|(_, &k)| k != 0.0)
        .map(|(w, _)| (w - w0).abs())
        .fold(0.0, f64::max);
    let rate = km.couplings.iter().map(|row| row.iter().map(|k| k * k).sum::<f64>().sqrt()).fold(0.0, f64::max);
    0.01 / detuning.max(rate).max(1e-300)
}

/// Longest trusted horizon of a truncated basis, `2 pi / delta` with `delta` the mean
/// spacing of the coupled modes. Beyond it the discrete spectrum produces
/// recurrences that a continuum would not.
pub fn validated_horizon(km: &KernelMatrix) -> f64 {
    let coupled: Vec<f64> = km
        .frequencies
        .iter()
        .enumerate()
        .filter(|&(i, _)| km.couplings.iter().any(|row| row[i] != 0.0))
        .map(|(_, &w)| w)
        .collect();
    if coupled.len() < 2 {
        return f64::INFINITY;
    }
    let (lo, hi) = coupled.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &w| (a.min(w), b.max(w)));
    2.0 * std::f64::consts::PI * (coupled.len() - 1) as f64 / (hi - lo)
}

/// Errors when `t_max` lies beyond [`validated_horizon`].
pub fn check_horizon(km: &KernelMatrix, t_max: f64) -> Result<()> {
    let validated = validated_horizon(km);
    if t_max > validated {
        return Err(Error::HorizonExceeded { requested: t_max, validated });
    }
    Ok(())
}

/// Direct integration of the truncated Schrodinger equation in the frame rotating at
/// `omega_eg` (classical RK4, fixed step, landing on every grid time).
pub fn evolve_exact(km: &KernelMatrix, initial: Initial, t_grid: &[f64], opts: &EvolveOptions) -> Result<AmplitudeTrajectory> {
    check_grid(t_grid)?;
    let na = km.atom_count();
    let b0 = initial.amplitudes(na)?;
    let nm = km.frequencies.len();
    let w0 = km.omega_eg();
    let det: Vec<f64> = km.frequencies.iter().map(|w| w - w0).collect();
    let h_max = opts.step.unwrap_or_else(|| default_step(km));
    if !(h_max > 0.0) {
        return Err(Error::InvalidParameter("step must be positive".into()));
    }
    // y = [B_1, .., B_na, F_1, .., F_nm]
    let mut y = vec![ZERO; na + nm];
    y[..na].copy_from_slice(&b0[..na]);
    let kap = &km.couplings;
    let mut rhs = |_t: f64, y: &[Complex64], dy: &mut [Complex64]| {
        let (b, f) = y.split_at(na);
        let (db, df) = dy.split_at_mut(na);
        for a in 0..na {
            let mut acc = ZERO;
            for (k, fi) in kap[a].iter().zip(f) {
                acc += fi * *k;
            }
            db[a] = Complex64::new(acc.im, -acc.re);
        }
        for i in 0..nm {
            let mut acc = Complex64::new(det[i] * f[i].re, det[i] * f[i].im);
            for a in 0..na {
                acc += b[a] * kap[a][i];
            }
            df[i] = Complex64::new(acc.im, -acc.re);
        }
    };
    let mut rk = Rk4::new(na + nm);
    let mut t = 0.0;
    let mut out = Recorder::new(t_grid.len(), opts.keep_photons);
    for &tn in t_grid {
        let span = tn - t;
        if span > 0.0 {
            let steps = (span / h_max).ceil().max(1.0) as usize;
            let h = span / steps as f64;
            for j in 0..steps {
                rk.step(&mut rhs, t + j as f64 * h, h, &mut y);
            }
        }
        t = tn;
        let norm: f64 = y.iter().map(|z| z.norm_sqr()).sum();
        if !norm.is_finite() || (norm - 1.0).abs() > opts.norm_tolerance {
            return Err(Error::IntegratorFailure { drift: (norm - 1.0).abs() });
        }
        out.push(tn, w0, &y, na, norm);
    }
    Ok(out.finish(t_grid.to_vec(), w0, km))
}

struct Recorder {
    b1: Vec<Complex64>,
    b2: Vec<Complex64>,
    norm: Vec<f64>,
    photons: Option<Vec<Vec<Complex64>>>,
}

impl Recorder {
    fn new(n: usize, keep: bool) -> Self {
        Self { b1: Vec::with_capacity(n), b2: Vec::with_capacity(n), norm: Vec::with_capacity(n), photons: keep.then(Vec::new) }
    }

    fn push(&mut self, t: f64, w0: f64, y: &[Complex64], na: usize, norm: f64) {
        let ph = Complex64::from_polar(1.0, -w0 * t);
        self.b1.push(y[0] * ph);
        self.b2.push(if na > 1 { y[1] * ph } else { ZERO });
        self.norm.push(norm);
        if let Some(p) = self.photons.as_mut() {
            p.push(y[na..].iter().map(|f| f * ph).collect());
        }
    }

    fn finish(self, time_grid: Vec<f64>, w0: f64, km: &KernelMatrix) -> AmplitudeTrajectory {
        let tau = km.exchange_time();
        let mut tr = AmplitudeTrajectory::from_amplitudes(time_grid, self.b1, self.b2, w0, tau);
        tr.norm_series = self.norm;
        tr.photon_amplitudes = self.photons;
        tr
    }
}

/// Photon amplitudes `f_i(t)` on the trajectory grid.
///
/// Returns the stored amplitudes of an exact run, or reconstructs them from `b^a(t)` by
/// the formal solution `f_i(t) = -i sum_a kappa_{a,i} int_0^t e^{-i omega_i (t-t')} b^a(t') dt'`,
/// integrating the exponential exactly against a piecewise-linear `b` in the rotating frame.
pub fn photon_amplitudes(traj: &AmplitudeTrajectory, km: &KernelMatrix) -> Result<Vec<Vec<Complex64>>> {
    if let Some(p) = &traj.photon_amplitudes {
        return Ok(p.clone());
    }
    reconstruct_photon_amplitudes(traj, km)
}

pub fn reconstruct_photon_amplitudes(traj: &AmplitudeTrajectory, km: &KernelMatrix) -> Result<Vec<Vec<Complex64>>> {
    check_grid(&traj.time_grid)?;
    if traj.time_grid[0] != 0.0 {
        return Err(Error::InvalidParameter("reconstruction needs the grid to start at t = 0".into()));
    }
    let na = km.atom_count();
    let w0 = traj.omega_eg;
    let nm = km.frequencies.len();
    let rot = |n: usize, b: &[Complex64]| b[n] * Complex64::from_polar(1.0, w0 * traj.time_grid[n]);
    let drive = |n: usize, i: usize| {
        let mut d = rot(n, &traj.b1) * km.couplings[0][i];
        if na > 1 {
            d += rot(n, &traj.b2) * km.couplings[1][i];
        }
        d
    };
    let mut f = vec![ZERO; nm];
    let mut out = Vec::with_capacity(traj.len());
    out.push(vec![ZERO; nm]);
    for n in 1..traj.len() {
        let (t0, t1) = (traj.time_grid[n - 1], traj.time_grid[n]);
        let h = t1 - t0;
        for i in 0..nm {
            let d = km.frequencies[i] - w0;
            let (g0, g1) = (drive(n - 1, i), drive(n, i));
            // int_0^h e^{-i d (h - u)} (g0 + (g1 - g0) u / h) du = w0c g0 + w1c g1
            let (w0c, w1c) = linear_exp_weights(d, h);
            let decay = Complex64::from_polar(1.0, -d * h);
            let inc = g0 * w0c + g1 * w1c;
            f[i] = f[i] * decay + Complex64::new(inc.im, -inc.re);
        }
        let ph = Complex64::from_polar(1.0, -w0 * t1);
        out.push(f.iter().map(|z| z * ph).collect());
    }
    Ok(out)
}

/// Weights of `int_0^h e^{-i d (h-u)} phi(u) du` for `phi` linear between its end values.
fn linear_exp_weights(d: f64, h: f64) -> (Complex64, Complex64) {
    let x = d * h;
    if x.abs() < 1e-3 {
        // series in x = d h
        let i = Complex64::i();
        let w0 = h * (0.5 - i * x / 3.0 - x * x / 8.0);
        let w1 = h * (0.5 - i * x / 6.0 - x * x / 24.0);
        return (w0, w1);
    }
    let i = Complex64::i();
    let e = Complex64::from_polar(1.0, -x);
    // I0 = int_0^h e^{-i d v} dv, I1 = int_0^h v e^{-i d v} dv
    let i0 = (Complex64::new(1.0, 0.0) - e) / (i * d);
    let i1 = (Complex64::new(1.0, 0.0) - e * (1.0 + i * x)) / (-(d * d));
    // u = h - v: phi = g1 (h - v)/h + g0 v / h
    let w1 = i0 - i1 / h;
    let w0 = i1 / h;
    (w0, w1)
}
