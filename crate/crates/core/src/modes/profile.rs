//! Tabulated mode factors and field evaluation.

use super::separated::{CoordMap, PolyOde};
use super::Mode;
use crate::error::{Error, Result};
use crate::geometry::{curl_of_azimuthal_field, AxialFactor, CavitySpec};
use serde::{Deserialize, Serialize};

/// One regular factor `y(t)` on quintic Hermite nodes, with `y(0) = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorTable {
    pub map: CoordMap,
    pub length: f64,
    pub parity: f64,
    pub nodes: Vec<f64>,
    /// `(y, y', y'')` per node.
    pub values: Vec<[f64; 3]>,
}

impl FactorTable {
    /// Tabulate the regular solution of `ode` with node spacing `resolution / local wavenumber`.
    pub fn build(ode: &PolyOde, map: CoordMap, parity: f64, resolution: f64) -> Result<Self> {
        let nodes = ode.table_nodes(resolution);
        let (mut values, logs) = ode.tabulate(&nodes)?;
        for (v, l) in values.iter_mut().zip(&logs) {
            if *l != 0.0 {
                let s = l.exp();
                v.iter_mut().for_each(|x| *x *= s);
            }
        }
        Ok(FactorTable { map, length: ode.length, parity, nodes, values })
    }

    /// `(y, dy/dt)` at `t` in `[0, length]`.
    pub fn eval_t(&self, t: f64) -> (f64, f64) {
        let n = self.nodes.len();
        let t = t.clamp(0.0, self.length);
        let i = match self.nodes.partition_point(|&x| x <= t) {
            0 => 0,
            k if k >= n => n - 2,
            k => k - 1,
        };
        let (t0, t1) = (self.nodes[i], self.nodes[i + 1]);
        let h = t1 - t0;
        let s = (t - t0) / h;
        let (a, b) = (self.values[i], self.values[i + 1]);
        let s2 = s * s;
        let s3 = s2 * s;
        let s4 = s3 * s;
        let s5 = s4 * s;
        let h0 = 1.0 - 10.0 * s3 + 15.0 * s4 - 6.0 * s5;
        let h1 = s - 6.0 * s3 + 8.0 * s4 - 3.0 * s5;
        let h2 = 0.5 * (s2 - 3.0 * s3 + 3.0 * s4 - s5);
        let h3 = 10.0 * s3 - 15.0 * s4 + 6.0 * s5;
        let h4 = -4.0 * s3 + 7.0 * s4 - 3.0 * s5;
        let h5 = 0.5 * (s3 - 2.0 * s4 + s5);
        let d0 = -30.0 * s2 + 60.0 * s3 - 30.0 * s4;
        let d1 = 1.0 - 18.0 * s2 + 32.0 * s3 - 15.0 * s4;
        let d2 = 0.5 * (2.0 * s - 9.0 * s2 + 12.0 * s3 - 5.0 * s4);
        let d3 = 30.0 * s2 - 60.0 * s3 + 30.0 * s4;
        let d4 = -12.0 * s2 + 28.0 * s3 - 15.0 * s4;
        let d5 = 0.5 * (3.0 * s2 - 8.0 * s3 + 5.0 * s4);
        let y = h0 * a[0] + h * h1 * a[1] + h * h * h2 * a[2] + h3 * b[0] + h * h4 * b[1] + h * h * h5 * b[2];
        let dy = (d0 * a[0] + h * d1 * a[1] + h * h * d2 * a[2] + d3 * b[0] + h * d4 * b[1] + h * h * d5 * b[2]) / h;
        (y, dy)
    }
}

impl AxialFactor<f64> for FactorTable {
    fn value_and_slope(&self, x: f64) -> (f64, f64) {
        let (t, dtdx, par) = self.map.to_t(x, self.length, self.parity);
        let (y, dy) = self.eval_t(t);
        (par * y, par * dy * dtdx)
    }

    fn support(&self) -> (f64, f64) {
        let a = self.map.origin;
        let b = self.map.origin + self.map.sign * self.length;
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        if self.map.mirrored {
            let far = self.map.origin + self.map.sign * 2.0 * self.length;
            (lo.min(far), hi.max(far))
        } else {
            (lo, hi)
        }
    }
}

/// Both tabulated factors of a mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeProfile {
    pub xi: FactorTable,
    pub eta: FactorTable,
}

fn profile_of(mode: &Mode) -> Result<&ModeProfile> {
    mode.profile
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("mode carries no tabulated profile".into()))
}

/// Normalised electric mode function `g(r)` at Cartesian points (real standing-wave convention).
pub fn mode_field_at_points(mode: &Mode, cavity: &CavitySpec<f64>, points: &[[f64; 3]]) -> Result<Vec<[f64; 3]>> {
    let prof = profile_of(mode)?;
    for &p in points {
        if !cavity.contains(p) {
            return Err(Error::PointOutsideDomain { x: p[0], y: p[1], z: p[2] });
        }
    }
    let scale = 1.0 / mode.normalization.sqrt();
    let mut e = curl_of_azimuthal_field(&cavity.system(), &prof.xi, &prof.eta, cavity.u_range(), cavity.v_range(), points)?;
    for v in e.iter_mut() {
        v.iter_mut().for_each(|x| *x *= scale);
    }
    Ok(e)
}

/// Normalised electric mode function at one point.
pub fn mode_field_at(mode: &Mode, cavity: &CavitySpec<f64>, point: [f64; 3]) -> Result<[f64; 3]> {
    Ok(mode_field_at_points(mode, cavity, &[point])?[0])
}

/// Azimuthal magnetic profile `k rho V W / sqrt(N)`, the partner of `g` with `curl g = k^2 A`.
pub fn mode_magnetic_at(mode: &Mode, cavity: &CavitySpec<f64>, point: [f64; 3]) -> Result<f64> {
    let prof = profile_of(mode)?;
    if !cavity.contains(point) {
        return Err(Error::PointOutsideDomain { x: point[0], y: point[1], z: point[2] });
    }
    let (rho, z) = crate::geometry::cylindrical(point);
    let (u, v) = cavity.system().from_cylindrical(rho, z);
    let (fu, _) = prof.xi.value_and_slope(u);
    let (gv, _) = prof.eta.value_and_slope(v);
    Ok(mode.wavenumber * rho * fu * gv / mode.normalization.sqrt())
}
