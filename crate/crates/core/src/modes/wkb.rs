//! Semiclassical (Langer-corrected WKB) quantization and normalization.
//!
//! Each separated equation is brought to `v'' + Q(x) v = 0` in a Langer variable `x`:
//! `x = ln t` for the parabola (`Q = t r - 1/4`), `xi = cosh x` for the prolate radial
//! factor and `eta = cos x` for the prolate angular factor. A wall at `x_w` with
//! `v'/v = -L` quantizes as `int sqrt(Q) = pi/4 + n pi + atan((L - Q'/(4Q)) / sqrt(Q))`.

use super::exact::{log_add, QuantizeOptions, Separation};
use super::separated::PolyOde;
use super::shooting::{expand_upper, illinois};
use super::{ModeBasis, Provenance, QuantumNumbers};
use crate::error::{Error, Result};
use crate::geometry::{CavitySpec, PhysicalConstants};
use crate::quadrature::composite_gauss;
use rayon::prelude::*;
use std::f64::consts::PI;

/// Langer form of one separated factor.
#[derive(Debug, Clone, Copy)]
enum Langer {
    /// `x = ln t`, `y = t^{-1/2} v`.
    Log { ode: PolyOde },
    /// `t = cosh x - 1`, `y = sinh^{-3/2}(x) v`; `q = c^2 cosh^2 - (lambda + 1/4) - 1/sinh^2`.
    Cosh { ode: PolyOde, c2: f64, lam: f64 },
}

impl Langer {
    fn t_of(&self, x: f64) -> f64 {
        match self {
            Langer::Log { .. } => x.exp(),
            Langer::Cosh { .. } => x.cosh() - 1.0,
        }
    }

    fn x_of(&self, t: f64) -> f64 {
        match self {
            Langer::Log { .. } => t.ln(),
            Langer::Cosh { .. } => (1.0 + t).acosh(),
        }
    }

    /// `(Q, dQ/dx)`.
    fn q(&self, x: f64) -> (f64, f64) {
        match *self {
            Langer::Log { ode } => {
                let t = x.exp();
                let r = ode.r_at(t);
                let dr = ode.r[1] + 2.0 * ode.r[2] * t;
                (t * r - 0.25, t * (r + t * dr))
            }
            Langer::Cosh { c2, lam, .. } => {
                let (sh, ch) = (x.sinh(), x.cosh());
                (c2 * ch * ch - (lam + 0.25) - 1.0 / (sh * sh), 2.0 * c2 * ch * sh + 2.0 * ch / (sh * sh * sh))
            }
        }
    }

    /// `v = m(t) y` and `dm/dt`, `dt/dx`.
    fn amplitude_map(&self, t: f64) -> (f64, f64, f64) {
        match self {
            Langer::Log { .. } => (t.sqrt(), 0.5 / t.sqrt(), t),
            Langer::Cosh { .. } => {
                let p = t * (2.0 + t);
                let sh = p.sqrt();
                (p.powf(0.75), 0.75 * p.powf(-0.25) * (2.0 + 2.0 * t), sh)
            }
        }
    }

    /// Logarithmic wall slope `L` in `v'/v = -L`.
    fn wall_slope(&self, x: f64) -> f64 {
        match self {
            Langer::Log { .. } => 0.5,
            Langer::Cosh { .. } => 0.5 / x.tanh(),
        }
    }

    fn ode(&self) -> &PolyOde {
        match self {
            Langer::Log { ode } | Langer::Cosh { ode, .. } => ode,
        }
    }

    fn x_range(&self) -> (f64, f64) {
        let len = self.ode().length;
        match self {
            Langer::Log { .. } => (f64::NEG_INFINITY, len.ln()),
            Langer::Cosh { .. } => (0.0, (1.0 + len).acosh()),
        }
    }

    /// Turning point (single sign change of `Q` from below).
    fn turning_point(&self) -> Option<f64> {
        let (x_lo, x_hi) = self.x_range();
        if self.q(x_hi).0 <= 0.0 {
            return None;
        }
        let mut a = if x_lo.is_finite() { x_lo + 1e-12 } else { x_hi - 1.0 };
        while self.q(a).0 > 0.0 {
            a = if x_lo.is_finite() { 0.5 * (a + x_lo) } else { a - 1.0 };
            if a < -800.0 || (x_lo.is_finite() && a - x_lo < 1e-300) {
                return None;
            }
        }
        let mut b = x_hi;
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if self.q(m).0 > 0.0 {
                b = m;
            } else {
                a = m;
            }
            if (b - a).abs() < 1e-15 * (1.0 + b.abs()) {
                break;
            }
        }
        Some(0.5 * (a + b))
    }

    /// `int_{x_t}^{x} sqrt(Q)` with the endpoint square root removed by `x = x_t + (x - x_t) u^2`.
    fn phase_to(&self, x_t: f64, x: f64) -> f64 {
        let len = x - x_t;
        let (us, ws) = composite_gauss::<f64>(16, 4, 0.0, 1.0);
        us.iter()
            .zip(&ws)
            .map(|(&u, &w)| w * 2.0 * len * u * self.q(x_t + len * u * u).0.max(0.0).sqrt())
            .sum()
    }

    /// Real-valued node index at the wall: integer values are eigenvalues.
    fn wall_index(&self) -> Result<f64> {
        let (_, x_w) = self.x_range();
        let x_t = self
            .turning_point()
            .ok_or_else(|| Error::TurningPoint("no classically allowed region at the wall".into()))?;
        let (q, dq) = self.q(x_w);
        let phi = self.phase_to(x_t, x_w);
        let corr = ((self.wall_slope(x_w) - dq / (4.0 * q)) / q.sqrt()).atan();
        Ok((phi - 0.25 * PI - corr) / PI)
    }

    /// `ln int_0^T p^a y^2 dt`: exact up to half a wavelength past the turning point,
    /// then the phase-averaged Milne amplitude `<v^2> = A^2 / (2 sqrt Q)`.
    fn semiclassical_norms(&self) -> Result<[f64; 2]> {
        let ode = *self.ode();
        let (_, x_w) = self.x_range();
        let Some(x_t) = self.turning_point() else {
            return ode.log_weighted_norms();
        };
        // match point: phase pi past the turning point
        let (mut a, mut b) = (x_t, x_w);
        if self.phase_to(x_t, x_w) <= PI {
            return ode.log_weighted_norms();
        }
        for _ in 0..80 {
            let m = 0.5 * (a + b);
            if self.phase_to(x_t, m) < PI {
                a = m;
            } else {
                b = m;
            }
        }
        let x_m = 0.5 * (a + b);
        let t_m = self.t_of(x_m);
        let head = ode.partial_norms(t_m)?;
        let (m, dm, dtdx) = self.amplitude_map(t_m);
        let v = m * head.y;
        let vx = (dm * head.y + m * head.dy) * dtdx;
        let (q, dq) = self.q(x_m);
        // Liouville-Green phase derivative, including the amplitude slope -Q'/(4Q) v
        let vc = vx + dq / (4.0 * q) * v;
        let a2 = q.sqrt() * v * v + vc * vc / q.sqrt();
        let (ts, ws) = composite_gauss::<f64>(16, 16, t_m, ode.length);
        let mut tail = [0.0f64; 2];
        for (&t, &w) in ts.iter().zip(&ws) {
            let (q, _) = self.q(self.x_of(t));
            let (m, _, _) = self.amplitude_map(t);
            let y2 = a2 / (2.0 * q.max(1e-300).sqrt() * m * m);
            let p = ode.p_at(t);
            tail[0] += w * p * y2;
            tail[1] += w * p * p * y2;
        }
        // the phase average drops sin(2 psi)/4 at the match point: v v_c / (2 Q) in x, weight p^(a-1)
        let pm = ode.p_at(t_m);
        let edge = v * vc / (2.0 * q) * dtdx / (m * m);
        tail[0] += pm * edge;
        tail[1] += pm * pm * edge;
        let s = 2.0 * head.ln_scale;
        Ok([log_add(head.ln_i[0], tail[0].ln() + s), log_add(head.ln_i[1], tail[1].ln() + s)])
    }
}

impl Separation {
    fn radial_langer(&self, k: f64, lam: f64) -> Result<Langer> {
        let o = self.odes(k, lam)?;
        Ok(match self.cavity {
            CavitySpec::Parabolic { .. } => Langer::Log { ode: o.xi },
            CavitySpec::ProlateEllipsoid { interfocal_d, .. } => {
                let c = 0.5 * k * interfocal_d;
                Langer::Cosh { ode: o.xi, c2: c * c, lam }
            }
        })
    }

    /// Semiclassical channel eigenvalue.
    pub(crate) fn wkb_channel_lambda(&self, k: f64, channel: usize) -> Result<f64> {
        match self.cavity {
            CavitySpec::Parabolic { .. } => {
                // eta factor with a wall: wall index = channel
                let g = |lam: f64| -> Result<f64> {
                    let o = self.odes(k, lam)?;
                    let l = Langer::Log { ode: o.eta };
                    match l.wall_index() {
                        Ok(nu) => Ok(nu - channel as f64),
                        Err(_) => Ok(-0.75 - channel as f64 + o.eta.r_at(o.eta.length).min(0.0) * 1e-3),
                    }
                };
                let floor = self.lambda_floor(k);
                let g_lo = g(floor)?;
                if g_lo >= 0.0 {
                    return Err(Error::TurningPoint(format!("channel {channel} has no semiclassical eigenvalue")));
                }
                let (hi, g_hi) = expand_upper(&g, floor, 1.0 + floor.abs(), 80)?;
                let root = illinois(&g, floor, hi, g_lo, g_hi, 1e-12)?;
                if root.residual.abs() > 1e-6 {
                    return Err(Error::TurningPoint(format!("channel {channel}: phase jumps across the wall")));
                }
                Ok(root.x)
            }
            CavitySpec::ProlateEllipsoid { interfocal_d, .. } => {
                let c = 0.5 * k * interfocal_d;
                let target = (channel as f64 + 0.5) * PI;
                let g = |lam: f64| Ok(angular_phase(c * c, lam) - target);
                let lo = 0.75;
                let (hi, g_hi) = expand_upper(g, lo, 4.0 + c * c, 80)?;
                Ok(illinois(g, lo, hi, -target, g_hi, 1e-12)?.x)
            }
        }
    }

    /// Semiclassical longitudinal index at `k` (modes sit at non-negative integers).
    pub(crate) fn wkb_radial_index(&self, k: f64, channel: usize) -> Result<(f64, f64)> {
        let lam = self.wkb_channel_lambda(k, channel)?;
        let l = self.radial_langer(k, lam)?;
        match l.wall_index() {
            Ok(nu) => Ok((nu, lam)),
            Err(_) => Ok((-1.0, lam)),
        }
    }
}

/// `2 int_{theta_1}^{pi/2} sqrt(lambda + 1/4 - c^2 cos^2 - 1/sin^2) d theta`.
fn angular_phase(c2: f64, lam: f64) -> f64 {
    let q = |th: f64| {
        let (s, co) = th.sin_cos();
        lam + 0.25 - c2 * co * co - 1.0 / (s * s)
    };
    if q(0.5 * PI) <= 0.0 {
        return 0.0;
    }
    let (mut a, mut b) = (1e-9, 0.5 * PI);
    if q(a) > 0.0 {
        a = 1e-300;
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if q(m) > 0.0 {
            b = m;
        } else {
            a = m;
        }
    }
    let th1 = 0.5 * (a + b);
    let len = 0.5 * PI - th1;
    let (us, ws) = composite_gauss::<f64>(16, 4, 0.0, 1.0);
    2.0 * us
        .iter()
        .zip(&ws)
        .map(|(&u, &w)| w * 2.0 * len * u * q(th1 + len * u * u).max(0.0).sqrt())
        .sum::<f64>()
}

fn count_between(nu_lo: f64, nu_hi: f64) -> usize {
    // integers n >= 0 with nu_lo < n <= nu_hi
    let first = (nu_lo.floor() + 1.0).max(0.0);
    if nu_hi < first {
        0
    } else {
        (nu_hi.floor() - first) as usize + 1
    }
}

/// Flag a channel whose exact mode count differs from the semiclassical one by more than one.
pub(crate) fn check_channel_count(sep: &Separation, channel: usize, k_window: (f64, f64), exact: usize) -> Result<()> {
    let (Ok((lo, _)), Ok((hi, _))) = (sep.wkb_radial_index(k_window.0, channel), sep.wkb_radial_index(k_window.1, channel))
    else {
        return Ok(());
    };
    let estimate = count_between(lo, hi);
    if estimate.abs_diff(exact) > 1 {
        return Err(Error::MissedModes { channel, exact, estimate });
    }
    Ok(())
}

/// Semiclassical mode basis: eigenvalues from phase integrals, normalization from the
/// phase-averaged amplitude beyond the first half wavelength.
pub fn quantize_wkb(
    cavity: &CavitySpec<f64>,
    constants: &PhysicalConstants<f64>,
    window: (f64, f64),
    opts: &QuantizeOptions,
) -> Result<ModeBasis> {
    cavity.validate()?;
    constants.validate()?;
    let (w_lo, w_hi) = window;
    if !(w_lo > 0.0 && w_hi > w_lo && w_hi.is_finite()) {
        return Err(Error::InvalidParameter(format!("invalid frequency window [{w_lo}, {w_hi}]")));
    }
    let c = constants.c;
    let (k_lo, k_hi) = (w_lo / c, w_hi / c);
    let sep = Separation { cavity: *cavity };
    let batch = rayon::current_num_threads().clamp(1, 16);
    let mut modes = Vec::new();
    let mut max_weight = 0.0f64;
    let mut weak_run = 0;
    let mut channel = 0;
    'outer: while channel < opts.max_channels {
        let ids: Vec<usize> = (channel..(channel + batch).min(opts.max_channels)).collect();
        let results: Vec<Result<Option<(Vec<super::Mode>, f64)>>> =
            ids.par_iter().map(|&j| wkb_channel(&sep, j, (k_lo, k_hi), c, opts)).collect();
        for (j, res) in ids.into_iter().zip(results) {
            channel = j + 1;
            let Some((found, weight)) = res? else {
                continue;
            };
            max_weight = max_weight.max(weight);
            let weak = weight < opts.channel_cutoff * max_weight;
            modes.extend(found);
            if modes.len() > opts.max_modes {
                return Err(Error::WindowTooWide { count: modes.len(), cap: opts.max_modes });
            }
            weak_run = if weak { weak_run + 1 } else { 0 };
            if weak_run >= 2 {
                break 'outer;
            }
        }
    }
    modes.sort_by(|a, b| a.frequency.total_cmp(&b.frequency).then(a.quantum_numbers.cmp(&b.quantum_numbers)));
    Ok(ModeBasis { cavity: *cavity, constants: *constants, modes, frequency_window: window, provenance: Provenance::Wkb })
}

/// Modes of one channel, or `None` when the channel has no semiclassical eigenvalue.
fn wkb_channel(
    sep: &Separation,
    channel: usize,
    k_window: (f64, f64),
    c: f64,
    opts: &QuantizeOptions,
) -> Result<Option<(Vec<super::Mode>, f64)>> {
    let (k_lo, k_hi) = k_window;
    let k_mid = 0.5 * (k_lo + k_hi);
    let lam_mid = match sep.wkb_channel_lambda(k_mid, channel) {
        Ok(l) => l,
        Err(Error::TurningPoint(_)) => return Ok(None),
        Err(e) => return Err(e),
    };
    let weight = 4.0 * (-wkb_ln_normalization(sep, k_mid, lam_mid)?).exp();
    let (nu_lo, _) = sep.wkb_radial_index(k_lo, channel)?;
    let (nu_hi, _) = sep.wkb_radial_index(k_hi, channel)?;
    let count = count_between(nu_lo, nu_hi);
    let mut modes = Vec::with_capacity(count);
    if count == 0 {
        return Ok(Some((modes, weight)));
    }
    let samples = (((nu_hi - nu_lo) * 2.0).ceil() as usize).max(1);
    let ks: Vec<f64> = (0..=samples).map(|i| k_lo + (k_hi - k_lo) * i as f64 / samples as f64).collect();
    let mut nus = Vec::with_capacity(ks.len());
    for &k in &ks {
        nus.push(sep.wkb_radial_index(k, channel)?.0);
    }
    let first = (nu_lo.floor() + 1.0).max(0.0) as usize;
    for n in first..first + count {
        let target = n as f64;
        let i = nus.partition_point(|&v| v < target).clamp(1, nus.len() - 1) - 1;
        let g = |k: f64| sep.wkb_radial_index(k, channel).map(|(v, _)| v - target);
        let root = illinois(g, ks[i], ks[i + 1], nus[i] - target, nus[i + 1] - target, 1e-11)?;
        let k = root.x;
        let lam = sep.wkb_channel_lambda(k, channel)?;
        let ln_n = wkb_ln_normalization(sep, k, lam)?;
        let g1 = 2.0 * (-0.5 * ln_n).exp();
        let parity = sep.parity(channel);
        modes.push(super::Mode {
            frequency: c * k,
            wavenumber: k,
            quantum_numbers: QuantumNumbers { channel, longitudinal: n },
            separation_constant: lam,
            normalization: ln_n.exp(),
            focal_coupling: [g1, if sep.is_prolate() { parity * g1 } else { 0.0 }],
            parity,
            profile: opts.profile_resolution.map(|res| sep.profile(k, lam, channel, res)).transpose()?,
        });
    }
    Ok(Some((modes, weight)))
}

/// `ln N` with the semiclassical rule for the wall-bounded factors.
pub(crate) fn wkb_ln_normalization(sep: &Separation, k: f64, lam: f64) -> Result<f64> {
    let o = sep.odes(k, lam)?;
    let r = sep.radial_langer(k, lam)?.semiclassical_norms()?;
    let a = match sep.cavity {
        CavitySpec::Parabolic { .. } => Langer::Log { ode: o.eta }.semiclassical_norms()?,
        CavitySpec::ProlateEllipsoid { .. } => o.eta.log_weighted_norms()?,
    };
    Ok(sep.ln_norm_prefactor() + 2.0 * k.ln() + log_add(r[1] + a[0], r[0] + a[1]))
}
