//! Exact quantization by nested Prüfer-phase shooting.
//!
//! For a fixed wavenumber the `eta` equation is an eigenproblem in the separation
//! constant; its `j`-th eigenvalue defines channel `j`. Within a channel the `xi` phase
//! at the wall grows monotonically with the wavenumber, so the modes in a window are
//! counted from the phases at its ends and each one is refined in its own bracket.

use super::profile::{FactorTable, ModeProfile};
use super::separated::{separated_odes, EndCondition, PhaseScale, SeparatedOdes};
use super::shooting::{expand_upper, illinois, MISMATCH_TOL};
use super::{Mode, ModeBasis, Provenance, QuantumNumbers};
use crate::error::{Error, Result};
use crate::geometry::{CavitySpec, PhysicalConstants};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuantizeOptions {
    /// Upper bound on the number of modes in the window.
    pub max_modes: usize,
    /// Channels whose focal weight falls below this fraction of the strongest are dropped.
    pub channel_cutoff: f64,
    pub max_channels: usize,
    /// Compare per-channel counts with the semiclassical estimate.
    pub check_completeness: bool,
    /// Tabulate mode factors with this node spacing in local radians of phase (`None`: no profiles).
    pub profile_resolution: Option<f64>,
}

impl Default for QuantizeOptions {
    fn default() -> Self {
        QuantizeOptions {
            max_modes: 50_000,
            channel_cutoff: 1e-10,
            max_channels: 2_000,
            check_completeness: true,
            profile_resolution: None,
        }
    }
}

/// Cavity-specific view of the separated problem.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Separation {
    pub cavity: CavitySpec<f64>,
}

impl Separation {
    pub fn odes(&self, k: f64, lam: f64) -> Result<SeparatedOdes> {
        separated_odes(&self.cavity, k, lam)
    }

    pub fn is_prolate(&self) -> bool {
        matches!(self.cavity, CavitySpec::ProlateEllipsoid { .. })
    }

    /// End condition and half-range node count of the `eta` factor for a channel.
    pub fn angular_end(&self, channel: usize) -> (EndCondition, usize) {
        if self.is_prolate() {
            if channel % 2 == 0 {
                (EndCondition::Even, channel / 2)
            } else {
                (EndCondition::Odd, channel / 2)
            }
        } else {
            (EndCondition::Wall, channel)
        }
    }

    pub fn parity(&self, channel: usize) -> f64 {
        if self.is_prolate() && channel % 2 == 1 {
            -1.0
        } else {
            1.0
        }
    }

    /// Separation constant below every eigenvalue of the `eta` problem.
    pub fn lambda_floor(&self, k: f64) -> f64 {
        match self.cavity {
            CavitySpec::Parabolic { focal_length_f, .. } => -0.5 * k * k * focal_length_f - 1.0,
            CavitySpec::ProlateEllipsoid { .. } => 1.0,
        }
    }

    /// `ln` of the prefactor `C` in `N = C k^2 [I_xi(2) I_eta(1) + I_xi(1) I_eta(2)]`.
    pub fn ln_norm_prefactor(&self) -> f64 {
        match self.cavity {
            CavitySpec::Parabolic { .. } => (0.5 * PI).ln(),
            CavitySpec::ProlateEllipsoid { interfocal_d, .. } => (4.0 * PI).ln() + 5.0 * (0.5 * interfocal_d).ln(),
        }
    }

    fn angular_mismatch(&self, k: f64, lam: f64, channel: usize, scale: &PhaseScale) -> Result<f64> {
        let (end, nodes) = self.angular_end(channel);
        let o = self.odes(k, lam)?;
        Ok(o.eta.end_phase(scale)? - o.eta.target_phase(scale, end, nodes))
    }

    /// Phase scales for one channel, taken from the equations at `(k, lam)`.
    pub fn scales(&self, k: f64, lam: f64) -> Result<ChannelScales> {
        let o = self.odes(k, lam)?;
        Ok(ChannelScales { xi: PhaseScale::from_ode(&o.xi), eta: PhaseScale::from_ode(&o.eta) })
    }

    /// Channel eigenvalue at wavenumber `k`, optionally warm-started near `hint`.
    pub fn channel_lambda(&self, k: f64, channel: usize, hint: Option<f64>, scales: &ChannelScales) -> Result<f64> {
        let g = |lam: f64| self.angular_mismatch(k, lam, channel, &scales.eta);
        let floor = self.lambda_floor(k);
        let (lo, glo, hi, ghi) = match hint {
            Some(h) => {
                let mut step = 1e-3 * (1.0 + h.abs());
                let gh = g(h)?;
                if gh == 0.0 {
                    return Ok(h);
                }
                let mut other;
                let mut g_other;
                loop {
                    other = if gh < 0.0 { h + step } else { (h - step).max(floor) };
                    g_other = g(other)?;
                    if g_other.signum() != gh.signum() || (gh > 0.0 && other <= floor) {
                        break;
                    }
                    step *= 4.0;
                    if step > 1e8 * (1.0 + h.abs()) {
                        return Err(Error::NoRootInBracket { lo: h, hi: h + step });
                    }
                }
                if gh < 0.0 {
                    (h, gh, other, g_other)
                } else {
                    (other, g_other, h, gh)
                }
            }
            None => {
                let glo = g(floor)?;
                let (hi, ghi) = expand_upper(g, floor, 1.0 + floor.abs(), 80)?;
                (floor, glo, hi, ghi)
            }
        };
        Ok(illinois(g, lo, hi, glo, ghi, MISMATCH_TOL)?.x)
    }

    /// Wall phase of the `xi` factor and the channel eigenvalue at `k`.
    pub fn radial_phase(&self, k: f64, channel: usize, hint: Option<f64>, scales: &ChannelScales) -> Result<(f64, f64)> {
        let lam = self.channel_lambda(k, channel, hint, scales)?;
        let o = self.odes(k, lam)?;
        Ok((o.xi.end_phase(&scales.xi)?, lam))
    }

    pub fn radial_target(&self, k: f64, nodes: usize, scales: &ChannelScales) -> Result<f64> {
        Ok(self.odes(k, 0.0)?.xi.target_phase(&scales.xi, EndCondition::Wall, nodes))
    }

    /// Channel eigenvalue at `k` from a cold start.
    pub fn channel_lambda_cold(&self, k: f64, channel: usize) -> Result<f64> {
        let scales = self.scales(k, self.lambda_floor(k))?;
        self.channel_lambda(k, channel, None, &scales)
    }

    /// `ln N` for the separated pair at `(k, lam)`.
    pub fn ln_normalization(&self, k: f64, lam: f64) -> Result<f64> {
        let o = self.odes(k, lam)?;
        let r = o.xi.log_weighted_norms()?;
        let a = o.eta.log_weighted_norms()?;
        Ok(self.ln_norm_prefactor() + 2.0 * k.ln() + log_add(r[1] + a[0], r[0] + a[1]))
    }

    pub fn profile(&self, k: f64, lam: f64, channel: usize, resolution: f64) -> Result<ModeProfile> {
        let o = self.odes(k, lam)?;
        Ok(ModeProfile {
            xi: FactorTable::build(&o.xi, o.xi_map, 1.0, resolution)?,
            eta: FactorTable::build(&o.eta, o.eta_map, self.parity(channel), resolution)?,
        })
    }

    /// Assemble a mode from its eigenvalues.
    pub fn mode(&self, k: f64, lam: f64, qn: QuantumNumbers, c: f64, resolution: Option<f64>) -> Result<Mode> {
        let ln_n = self.ln_normalization(k, lam)?;
        let g = 2.0 * (-0.5 * ln_n).exp();
        let parity = self.parity(qn.channel);
        let second = if self.is_prolate() { parity * g } else { 0.0 };
        Ok(Mode {
            frequency: c * k,
            wavenumber: k,
            quantum_numbers: qn,
            separation_constant: lam,
            normalization: ln_n.exp(),
            focal_coupling: [g, second],
            parity,
            profile: resolution.map(|res| self.profile(k, lam, qn.channel, res)).transpose()?,
        })
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct ChannelScales {
    pub xi: PhaseScale,
    pub eta: PhaseScale,
}

pub(crate) fn log_add(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

struct ChannelResult {
    modes: Vec<Mode>,
    /// Focal weight `4 / N` at the window centre, whether or not modes exist.
    weight: f64,
}

fn solve_channel(
    sep: &Separation,
    channel: usize,
    k_window: (f64, f64),
    c: f64,
    opts: &QuantizeOptions,
) -> Result<ChannelResult> {
    let (k_lo, k_hi) = k_window;
    let k_mid = 0.5 * (k_lo + k_hi);
    let lam_mid = sep.channel_lambda_cold(k_mid, channel)?;
    let weight = 4.0 * (-sep.ln_normalization(k_mid, lam_mid)?).exp();
    let sc = sep.scales(k_mid, lam_mid)?;

    let (th_lo, lam_lo) = sep.radial_phase(k_lo, channel, Some(lam_mid), &sc)?;
    let (th_hi, lam_hi) = sep.radial_phase(k_hi, channel, Some(lam_mid), &sc)?;
    if th_hi < th_lo {
        return Err(Error::NotConverged(format!("channel {channel}: wall phase decreases with frequency")));
    }
    let base = sep.radial_target(k_mid, 0, &sc)?;
    // targets base + n pi with th_lo < target <= th_hi
    let n_first = ((th_lo - base) / PI).floor() + 1.0;
    let n_first = n_first.max(0.0) as usize;
    let n_last = (th_hi - base) / PI;
    if n_last < n_first as f64 {
        return Ok(ChannelResult { modes: Vec::new(), weight });
    }
    let n_last = n_last.floor() as usize;

    let samples = (((th_hi - th_lo) / (0.5 * PI)).ceil() as usize).max(1);
    let mut ks = vec![k_lo];
    let mut ths = vec![th_lo];
    let mut lams = vec![lam_lo];
    let mut hint = lam_lo;
    for i in 1..samples {
        let k = k_lo + (k_hi - k_lo) * i as f64 / samples as f64;
        let (th, lam) = sep.radial_phase(k, channel, Some(hint), &sc)?;
        hint = lam;
        ks.push(k);
        ths.push(th);
        lams.push(lam);
    }
    ks.push(k_hi);
    ths.push(th_hi);
    lams.push(lam_hi);
    if ths.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::NotConverged(format!("channel {channel}: wall phase is not monotone")));
    }

    let mut modes = Vec::with_capacity(n_last + 1 - n_first);
    for n in n_first..=n_last {
        let target = base + n as f64 * PI;
        let i = ths.partition_point(|&t| t < target).clamp(1, ths.len() - 1) - 1;
        let lam_hint = std::cell::Cell::new(lams[i]);
        let mismatch = |k: f64| -> Result<f64> {
            let (th, lam) = sep.radial_phase(k, channel, Some(lam_hint.get()), &sc)?;
            lam_hint.set(lam);
            Ok(th - target)
        };
        let root = illinois(mismatch, ks[i], ks[i + 1], ths[i] - target, ths[i + 1] - target, MISMATCH_TOL)?;
        let k = root.x;
        let lam = sep.channel_lambda(k, channel, Some(lam_hint.get()), &sc)?;
        let qn = QuantumNumbers { channel, longitudinal: n };
        modes.push(sep.mode(k, lam, qn, c, opts.profile_resolution)?);
    }
    Ok(ChannelResult { modes, weight })
}

/// All coupled modes with frequency in `window = [omega_min, omega_max]`.
pub fn quantize_exact(
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
    let k_window = (w_lo / c, w_hi / c);
    let sep = Separation { cavity: *cavity };
    let batch = rayon::current_num_threads().clamp(1, 16);

    let mut modes = Vec::new();
    let mut max_weight = 0.0f64;
    let mut weak_run = 0;
    let mut channel = 0;
    'outer: while channel < opts.max_channels {
        let ids: Vec<usize> = (channel..(channel + batch).min(opts.max_channels)).collect();
        let results: Vec<Result<ChannelResult>> =
            ids.par_iter().map(|&j| solve_channel(&sep, j, k_window, c, opts)).collect();
        for (j, res) in ids.into_iter().zip(results) {
            let res = res?;
            if opts.check_completeness {
                super::wkb::check_channel_count(&sep, j, k_window, res.modes.len())?;
            }
            max_weight = max_weight.max(res.weight);
            let weak = res.weight < opts.channel_cutoff * max_weight;
            modes.extend(res.modes);
            if modes.len() > opts.max_modes {
                return Err(Error::WindowTooWide { count: modes.len(), cap: opts.max_modes });
            }
            weak_run = if weak { weak_run + 1 } else { 0 };
            channel = j + 1;
            if weak_run >= 2 {
                break 'outer;
            }
        }
    }
    modes.sort_by(|a, b| a.frequency.total_cmp(&b.frequency).then(a.quantum_numbers.cmp(&b.quantum_numbers)));
    let basis = ModeBasis {
        cavity: *cavity,
        constants: *constants,
        modes,
        frequency_window: window,
        provenance: Provenance::Exact,
    };
    Ok(basis)
}
