//! The separated radial/angular equations and their regular solutions.
//!
//! Both coordinates reduce to the polynomial-coefficient form
//! `p(t) y'' + 2 p'(t) y' + r(t) y = 0`, i.e. `(p^2 y')' + p r y = 0`, on `[0, length]`
//! with a regular singular point at `t = 0`. The regular solution is normalised to
//! `y(0) = 1`; `p(length)` is the conducting wall, where the boundary condition is
//! `d(p y)/dt = 0`.

use crate::error::{Error, Result};
use crate::geometry::CavitySpec;
use crate::ode::{integrate, integrate_with, Tolerances};
use crate::quadrature::gauss_legendre_on;
use std::f64::consts::PI;

/// `p(t) y'' + 2 p'(t) y' + r(t) y = 0` with quadratic `p` (`p(0) = 0`) and quadratic `r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolyOde {
    pub p: [f64; 3],
    pub r: [f64; 3],
    pub length: f64,
}

/// Condition imposed at `t = length`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum EndCondition {
    /// Conducting wall, `d(p y)/dt = 0`.
    Wall,
    /// Symmetric continuation through `t = length` (`y' = 0`).
    Even,
    /// Antisymmetric continuation (`y = 0`).
    Odd,
}

/// How the ODE variable `t` sits in a cavity coordinate: `t = sign * (x - origin)`,
/// reflected through `t = length` with the given parity when `mirrored`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CoordMap {
    pub origin: f64,
    pub sign: f64,
    pub mirrored: bool,
}

impl CoordMap {
    /// `(t, d t / d x, parity factor)` for coordinate value `x`.
    pub fn to_t(&self, x: f64, length: f64, parity: f64) -> (f64, f64, f64) {
        let t = self.sign * (x - self.origin);
        if self.mirrored && t > length {
            (2.0 * length - t, -self.sign, parity)
        } else {
            (t, self.sign, 1.0)
        }
    }
}

/// Separated equations for one `(omega, separation constant)` pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeparatedOdes {
    /// Equation in the first coordinate (`xi`).
    pub xi: PolyOde,
    /// Equation in the second coordinate (`eta`).
    pub eta: PolyOde,
    pub xi_map: CoordMap,
    pub eta_map: CoordMap,
}

/// Coefficients of the separated equations for the regular factors `V(xi) W(eta)` of the
/// azimuthal potential `rho V W` at wavenumber `k = omega / c`.
///
/// Parabolic: `t y'' + 2 y' + (+-beta + k^2 t / 4) y = 0` in `t = xi` (minus) and `t = eta`
/// (plus). Prolate, with `c = k d / 2`: radial `t = xi - 1`, angular `t = 1 - eta`.
pub fn separated_odes(cavity: &CavitySpec<f64>, k: f64, separation_constant: f64) -> Result<SeparatedOdes> {
    if !(k > 0.0) || !k.is_finite() {
        return Err(Error::InvalidParameter(format!("wavenumber must be positive, got {k}")));
    }
    let lam = separation_constant;
    match *cavity {
        CavitySpec::Parabolic { focal_length_f, xi_cutoff } => {
            let k2 = 0.25 * k * k;
            Ok(SeparatedOdes {
                xi: PolyOde { p: [0.0, 1.0, 0.0], r: [-lam, k2, 0.0], length: xi_cutoff },
                eta: PolyOde { p: [0.0, 1.0, 0.0], r: [lam, k2, 0.0], length: 2.0 * focal_length_f },
                xi_map: CoordMap { origin: 0.0, sign: 1.0, mirrored: false },
                eta_map: CoordMap { origin: 0.0, sign: 1.0, mirrored: false },
            })
        }
        CavitySpec::ProlateEllipsoid { interfocal_d, .. } => {
            let c0 = 0.5 * interfocal_d;
            let c = k * c0;
            let c2 = c * c;
            Ok(SeparatedOdes {
                xi: PolyOde { p: [0.0, 2.0, 1.0], r: [c2 - lam + 2.0, 2.0 * c2, c2], length: cavity.xi_boundary() - 1.0 },
                eta: PolyOde { p: [0.0, 2.0, -1.0], r: [lam - 2.0 - c2, 2.0 * c2, -c2], length: 1.0 },
                xi_map: CoordMap { origin: 1.0, sign: 1.0, mirrored: false },
                eta_map: CoordMap { origin: 1.0, sign: -1.0, mirrored: true },
            })
        }
    }
}

/// Solution and weighted integrals on `[0, t]`; `y, dy` carry the factor `exp(-ln_scale)`.
#[derive(Debug, Clone, Copy)]
pub struct PartialNorms {
    pub ln_i: [f64; 2],
    pub y: f64,
    pub dy: f64,
    pub ln_scale: f64,
}

/// Positive weight `sigma(t) = p^{3/2} (r_ref^2 + delta^2)^{1/4}` of the scaled Prüfer angle.
///
/// It balances `y` against `p^2 y'` where the reference equation oscillates, which keeps
/// the phase velocity nearly uniform. It must not depend on the eigenparameter being
/// searched for the phase to stay monotone in it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseScale {
    pub r: [f64; 3],
    pub delta2: f64,
}

impl PhaseScale {
    /// Unscaled Prüfer angle up to the `p^{3/2}` factor.
    pub const UNIT: PhaseScale = PhaseScale { r: [0.0; 3], delta2: 1.0 };

    pub fn from_ode(ode: &PolyOde) -> Self {
        let l = ode.length;
        let rmax = (0..=16).map(|i| ode.r_at(l * i as f64 / 16.0).abs()).fold(0.0, f64::max);
        let d = 0.05 * rmax + 1e-3 / (l * l);
        PhaseScale { r: ode.r, delta2: d * d }
    }

    #[inline]
    fn s2(&self, t: f64) -> (f64, f64) {
        let r = self.r[0] + t * (self.r[1] + t * self.r[2]);
        let dr = self.r[1] + 2.0 * self.r[2] * t;
        (r * r + self.delta2, 2.0 * r * dr)
    }

    #[inline]
    pub fn sigma(&self, ode: &PolyOde, t: f64) -> f64 {
        let p = ode.p_at(t);
        p * p.sqrt() * self.s2(t).0.powf(0.25)
    }

    /// `(sigma, sigma' / sigma)`.
    #[inline]
    pub fn sigma_and_log_slope(&self, ode: &PolyOde, t: f64) -> (f64, f64) {
        let p = ode.p_at(t);
        let (s2, ds2) = self.s2(t);
        (p * p.sqrt() * s2.powf(0.25), 1.5 * ode.dp_at(t) / p + 0.25 * ds2 / s2)
    }
}

/// Tolerances used for phase shooting.
pub const PHASE_TOL: f64 = 1e-12;
const RESCALE_AT: f64 = 1e120;

impl PolyOde {
    #[inline]
    pub fn p_at(&self, t: f64) -> f64 {
        t * (self.p[1] + t * self.p[2])
    }

    #[inline]
    pub fn dp_at(&self, t: f64) -> f64 {
        self.p[1] + 2.0 * self.p[2] * t
    }

    #[inline]
    pub fn r_at(&self, t: f64) -> f64 {
        self.r[0] + t * (self.r[1] + t * self.r[2])
    }

    /// Power-series coefficients of the regular solution, `a_0 = 1`.
    pub fn series_coefficients(&self, n: usize) -> Vec<f64> {
        let q = [2.0 * self.p[1], 4.0 * self.p[2]];
        let mut a = vec![0.0; n.max(1)];
        a[0] = 1.0;
        for m in 0..n.saturating_sub(1) {
            // coefficient of t^m gives a_{m+1}
            let mf = m as f64;
            let mut s = 0.0;
            // p_2 term: p_2 (m)(m-1) a_m
            s += self.p[2] * mf * (mf - 1.0) * a[m];
            // q_1 term: q_1 m a_m
            s += q[1] * mf * a[m];
            s += self.r[0] * a[m];
            if m >= 1 {
                s += self.r[1] * a[m - 1];
            }
            if m >= 2 {
                s += self.r[2] * a[m - 2];
            }
            a[m + 1] = -s / ((mf + 1.0) * (self.p[1] * mf + q[0]));
        }
        a
    }

    /// Point where the series hands over to the integrator.
    pub fn series_start(&self) -> f64 {
        let scale = self.r.iter().map(|c| c.abs()).sum::<f64>() / self.p[1];
        // y ~ sin(2 sqrt(a t)) / (2 sqrt(a t)) near the origin; stay well before its first zero
        let t0 = 0.25 / (1.0 + scale);
        t0.min(0.5 * self.length)
    }

    /// `(y, y', y'')` from the series at `t` (valid for `t` up to `series_start`).
    pub fn series_eval(&self, t: f64) -> (f64, f64, f64) {
        let a = self.series_coefficients(120);
        let (mut y, mut dy, mut d2y) = (0.0, 0.0, 0.0);
        let mut tp = 1.0;
        let mut big = 1.0f64;
        let mut small = 0;
        for (n, &an) in a.iter().enumerate() {
            let term = an * tp;
            y += term;
            big = big.max(term.abs());
            if n >= 1 {
                dy += n as f64 * an * tp / t.max(f64::MIN_POSITIVE);
            }
            if n >= 2 {
                d2y += (n * (n - 1)) as f64 * an * tp / (t * t).max(f64::MIN_POSITIVE);
            }
            small = if term.abs() < 1e-18 * big { small + 1 } else { 0 };
            if n > 4 && small >= 3 {
                break;
            }
            tp *= t;
        }
        if t == 0.0 {
            return (1.0, a.get(1).copied().unwrap_or(0.0), 2.0 * a.get(2).copied().unwrap_or(0.0));
        }
        (y, dy, d2y)
    }

    /// Scaled Prüfer phase `atan2(sigma y, p^2 y')` of the regular solution at `t = length`,
    /// continuous from `pi/2` at `t = 0`.
    pub fn end_phase(&self, scale: &PhaseScale) -> Result<f64> {
        let t0 = self.series_start();
        let (y, dy, _) = self.series_eval(t0);
        let p0 = self.p_at(t0);
        let th0 = (scale.sigma(self, t0) * y).atan2(p0 * p0 * dy);
        // cap steps at about one radian so the controller cannot skip a full turn
        let mut rate: f64 = 0.0;
        for i in 1..=64 {
            let t = t0 + (self.length - t0) * i as f64 / 64.0;
            let p = self.p_at(t);
            let (sig, dlog) = scale.sigma_and_log_slope(self, t);
            rate = rate.max(sig / (p * p) + (p * self.r_at(t) / sig).abs() + 0.5 * dlog.abs());
        }
        let tol = Tolerances::tight(PHASE_TOL, PHASE_TOL).with_h_max(1.0 / rate.max(1e-300));
        let out = integrate(
            |t, th: &[f64; 1]| {
                let (s, c) = th[0].sin_cos();
                let p = self.p_at(t);
                let (sig, dlog) = scale.sigma_and_log_slope(self, t);
                [dlog * s * c + sig / (p * p) * c * c + p * self.r_at(t) / sig * s * s]
            },
            t0,
            [th0],
            self.length,
            &tol,
        )?;
        Ok(out[0])
    }

    /// Phase the regular solution must reach at `t = length` with `nodes` interior zeros.
    pub fn target_phase(&self, scale: &PhaseScale, end: EndCondition, nodes: usize) -> f64 {
        let base = match end {
            EndCondition::Wall => {
                let t = self.length;
                PI - (scale.sigma(self, t) / (self.p_at(t) * self.dp_at(t))).atan()
            }
            EndCondition::Even => 0.5 * PI,
            EndCondition::Odd => PI,
        };
        base + nodes as f64 * PI
    }

    /// Weighted integrals `ln int_0^L p^a y^2 dt` for `a = 1, 2`.
    pub fn log_weighted_norms(&self) -> Result<[f64; 2]> {
        let part = self.partial_norms(self.length)?;
        Ok([part.ln_i[0], part.ln_i[1]])
    }

    /// Weighted integrals up to `t_end`, together with the solution there.
    pub fn partial_norms(&self, t_end: f64) -> Result<PartialNorms> {
        let t0 = self.series_start().min(t_end);
        let (gx, gw) = gauss_legendre_on::<f64>(12, 0.0, t0);
        let mut head = [0.0; 2];
        for (&x, &w) in gx.iter().zip(&gw) {
            let (y, _, _) = self.series_eval(x);
            let p = self.p_at(x);
            head[0] += w * p * y * y;
            head[1] += w * p * p * y * y;
        }
        let (y, dy, _) = self.series_eval(t0);
        let p0 = self.p_at(t0);
        let mut log_scale = 0.0f64;
        let tol = Tolerances::tight(1e-11, 0.0);
        let end = integrate_with(
            |t, s: &[f64; 4]| {
                let p = self.p_at(t);
                let py2 = p * s[0] * s[0];
                [s[1] / (p * p), -p * self.r_at(t) * s[0], py2, p * py2]
            },
            t0,
            [y, p0 * p0 * dy, head[0], head[1]],
            &[t_end],
            &tol,
            |_, _, _| {},
            |_, s| {
                let m = s[0].abs().max(s[1].abs());
                if m > RESCALE_AT {
                    log_scale += m.ln();
                    let inv = 1.0 / m;
                    s[0] *= inv;
                    s[1] *= inv;
                    s[2] *= inv * inv;
                    s[3] *= inv * inv;
                    true
                } else {
                    false
                }
            },
        )?;
        if !(end[2] > 0.0 && end[3] > 0.0) {
            return Err(Error::QuadratureNonConvergence("weighted norm integral is not positive".into()));
        }
        let p = self.p_at(t_end);
        Ok(PartialNorms {
            ln_i: [end[2].ln() + 2.0 * log_scale, end[3].ln() + 2.0 * log_scale],
            y: end[0],
            dy: end[1] / (p * p),
            ln_scale: log_scale,
        })
    }

    /// Nodes in `t` for tabulating the solution: spacing `resolution / local wavenumber`.
    pub fn table_nodes(&self, resolution: f64) -> Vec<f64> {
        let len = self.length;
        let floor = resolution / (1.0 + self.r.iter().map(|c| c.abs()).sum::<f64>() / self.p[1]);
        let mut nodes = vec![0.0];
        let mut t = 0.0;
        while t < len {
            // r/p diverges at the regular singular end, where the step falls back to `floor`.
            let kappa2 = if t > 0.0 { (self.r_at(t) / self.p_at(t)).abs() } else { f64::INFINITY };
            let h = (resolution / (kappa2 + 1.0 / (len * len)).sqrt()).max(floor).min(0.125 * len);
            t = (t + h).min(len);
            if len - t < 0.25 * h {
                t = len;
            }
            nodes.push(t);
        }
        nodes
    }

    /// Regular solution tabulated at `nodes` as `(y, y', y'')`, with `y(0) = 1` and a common
    /// log scale per node (the table holds `value * exp(-log_scale)`).
    pub fn tabulate(&self, nodes: &[f64]) -> Result<(Vec<[f64; 3]>, Vec<f64>)> {
        let t0 = self.series_start();
        let mut vals = Vec::with_capacity(nodes.len());
        let mut logs = Vec::with_capacity(nodes.len());
        let split = nodes.partition_point(|&t| t <= t0);
        for &t in &nodes[..split] {
            let (y, dy, d2y) = self.series_eval(t);
            vals.push([y, dy, d2y]);
            logs.push(0.0);
        }
        if split == nodes.len() {
            return Ok((vals, logs));
        }
        let (y, dy, _) = self.series_eval(t0);
        let p0 = self.p_at(t0);
        let log_scale = std::cell::Cell::new(0.0f64);
        let tol = Tolerances::tight(1e-12, 0.0);
        let mut out = vec![[0.0; 3]; nodes.len() - split];
        let mut out_logs = vec![0.0; nodes.len() - split];
        integrate_with(
            |t, s: &[f64; 2]| {
                let p = self.p_at(t);
                [s[1] / (p * p), -p * self.r_at(t) * s[0]]
            },
            t0,
            [y, p0 * p0 * dy],
            &nodes[split..],
            &tol,
            |i, t, s| {
                let p = self.p_at(t);
                let dy = s[1] / (p * p);
                let d2y = -(2.0 * self.dp_at(t) * dy + self.r_at(t) * s[0]) / p;
                out[i] = [s[0], dy, d2y];
                out_logs[i] = log_scale.get();
            },
            |_, s| {
                let m = s[0].abs().max(s[1].abs());
                if m > RESCALE_AT {
                    log_scale.set(log_scale.get() + m.ln());
                    s[0] /= m;
                    s[1] /= m;
                    true
                } else {
                    false
                }
            },
        )?;
        vals.extend(out);
        logs.extend(out_logs);
        Ok((vals, logs))
    }

    /// Number of sign changes of the tabulated solution in the open interval.
    pub fn count_nodes(&self, resolution: f64) -> Result<usize> {
        let nodes = self.table_nodes(resolution);
        let (vals, _) = self.tabulate(&nodes)?;
        let n = vals.len();
        Ok(vals[1..n - 1].windows(2).filter(|w| w[0][0] * w[1][0] < 0.0).count()
            + usize::from(n > 2 && vals[n - 2][0] * vals[n - 1][0] < 0.0 && vals[n - 1][0].abs() > 1e-8 * vals[n - 2][0].abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn residual_of_series(ode: &PolyOde, t: f64) -> f64 {
        let (y, dy, d2y) = ode.series_eval(t);
        ode.p_at(t) * d2y + 2.0 * ode.dp_at(t) * dy + ode.r_at(t) * y
    }

    #[test]
    fn series_solves_the_equation() {
        let odes = [
            PolyOde { p: [0.0, 1.0, 0.0], r: [-3.0, 0.25, 0.0], length: 10.0 },
            PolyOde { p: [0.0, 2.0, -1.0], r: [5.0, 8.0, -4.0], length: 1.0 },
            PolyOde { p: [0.0, 2.0, 1.0], r: [1.0, 18.0, 9.0], length: 3.0 },
        ];
        for ode in odes {
            let t0 = ode.series_start();
            for &t in &[0.3 * t0, t0] {
                assert!(residual_of_series(&ode, t).abs() < 1e-10, "{ode:?} {t}");
            }
        }
    }

    #[test]
    fn free_angular_solution_at_zero_c() {
        // c = 0, lambda = n(n+1): W is the derivative of the Legendre polynomial
        let ode = PolyOde { p: [0.0, 2.0, -1.0], r: [6.0 - 2.0, 0.0, 0.0], length: 1.0 };
        // n = 2: P_2'(eta) = 3 eta, normalised to 1 at eta = 1 -> W = eta = 1 - t
        let (y, _, _) = ode.series_eval(0.2);
        assert!((y - 0.8).abs() < 1e-14);
        for scale in [PhaseScale::UNIT, PhaseScale::from_ode(&ode)] {
            let ph = ode.end_phase(&scale).unwrap();
            assert!((ph - ode.target_phase(&scale, EndCondition::Odd, 0)).abs() < 1e-9, "{ph}");
        }
    }

    #[test]
    fn parabolic_roles_swap_with_the_separation_constant() {
        let cav = CavitySpec::parabolic(1.5, 40.0).unwrap();
        let a = separated_odes(&cav, 2.0, 0.7).unwrap();
        let b = separated_odes(&cav, 2.0, -0.7).unwrap();
        assert_eq!(a.xi.p, b.eta.p);
        assert_eq!(a.xi.r, b.eta.r);
    }

    #[test]
    fn prolate_coefficients_stay_finite_when_foci_merge() {
        for d in [1e-3, 1e-6, 1e-9] {
            let cav = CavitySpec::prolate(d, 1.0).unwrap();
            let o = separated_odes(&cav, 3.0, 6.0).unwrap();
            assert!(o.xi.r.iter().chain(&o.eta.r).all(|c| c.is_finite()));
            assert!(o.xi.p_at(0.5).is_finite() && o.eta.p_at(0.5).is_finite());
        }
    }

    #[test]
    fn rejects_non_positive_wavenumber() {
        let cav = CavitySpec::parabolic(1.0, 20.0).unwrap();
        assert!(separated_odes(&cav, 0.0, 1.0).is_err());
    }

    #[test]
    fn tabulated_solution_matches_coulomb_closed_form() {
        // t y'' + 2 y' + (k^2/4) t y = 0 has y = sin(k t / 2) / (k t / 2)
        let k = 3.0;
        let ode = PolyOde { p: [0.0, 1.0, 0.0], r: [0.0, 0.25 * k * k, 0.0], length: 20.0 };
        let nodes = ode.table_nodes(0.3);
        let (v, l) = ode.tabulate(&nodes).unwrap();
        for ((&t, y), ls) in nodes.iter().zip(&v).zip(&l) {
            let x = 0.5 * k * t;
            let exact = if x == 0.0 { 1.0 } else { x.sin() / x };
            assert!((y[0] * ls.exp() - exact).abs() < 1e-9, "{t} {} {exact} {ls}", y[0]);
        }
        let ln = ode.log_weighted_norms().unwrap();
        // int_0^L t sin^2(x)/x^2 dt with x = k t / 2
        let i1 = crate::quadrature::integrate(
            |t: f64| {
                let x = 0.5 * k * t;
                if x == 0.0 { 0.0 } else { t * (x.sin() / x).powi(2) }
            },
            0.0,
            20.0,
            20,
            40,
        );
        assert!((ln[0].exp() / i1 - 1.0).abs() < 1e-9);
    }
}
