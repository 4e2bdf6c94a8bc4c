//! Cavity parameterization and the two separable coordinate systems.
//!
//! Parabolic coordinates use `z = (xi - eta)/2`, `rho = sqrt(xi * eta)` with the
//! focus at the origin; the paraboloid of focal length `f` is the surface
//! `eta = 2 f` and its vertex sits at `z = -f`. Prolate coordinates use
//! `z = c0 xi eta`, `rho = c0 sqrt((xi^2 - 1)(1 - eta^2))` with `c0 = d/2`, so the
//! foci are `(xi, eta) = (1, +1)` and `(1, -1)`.
//!
//! The parabolic cavity is closed by a second, confocal paraboloid `xi = xi_cutoff`
//! opening towards `-z`; observables are checked for stability under moving it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Minimum ratio `xi_cutoff / f` accepted for the truncated parabola.
pub const MIN_XI_CUTOFF_RATIO: f64 = 10.0;

/// Relative slack used by the inside-the-cavity test.
const BOUNDARY_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalConstants<T> {
    pub c: T,
    pub hbar: T,
    pub epsilon0: T,
}

impl<T: Real> Default for PhysicalConstants<T> {
    fn default() -> Self {
        Self::natural()
    }
}

impl<T: Real> PhysicalConstants<T> {
    pub fn natural() -> Self {
        Self { c: T::one(), hbar: T::one(), epsilon0: T::one() }
    }

    pub fn si() -> Self {
        Self {
            c: T::lit(299_792_458.0),
            hbar: T::lit(1.054_571_817e-34),
            epsilon0: T::lit(8.854_187_812_8e-12),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.c > T::zero() && self.hbar > T::zero() && self.epsilon0 > T::zero() {
            Ok(())
        } else {
            Err(Error::InvalidParameter("physical constants must be strictly positive".into()))
        }
    }

    pub fn mu0(&self) -> T {
        T::one() / (self.epsilon0 * self.c * self.c)
    }
}

/// Geometry of an ideally conducting cavity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CavitySpec<T> {
    Parabolic { focal_length_f: T, xi_cutoff: T },
    ProlateEllipsoid { interfocal_d: T, vertex_gap_f: T },
}

impl<T: Real> CavitySpec<T> {
    pub fn parabolic(focal_length_f: T, xi_cutoff: T) -> Result<Self> {
        let cav = CavitySpec::Parabolic { focal_length_f, xi_cutoff };
        cav.validate()?;
        Ok(cav)
    }

    pub fn prolate(interfocal_d: T, vertex_gap_f: T) -> Result<Self> {
        let cav = CavitySpec::ProlateEllipsoid { interfocal_d, vertex_gap_f };
        cav.validate()?;
        Ok(cav)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            CavitySpec::Parabolic { focal_length_f, xi_cutoff } => {
                if !(focal_length_f > T::zero()) || !focal_length_f.is_finite() {
                    return Err(Error::InvalidParameter("focal length must be positive".into()));
                }
                if !(xi_cutoff > T::lit(MIN_XI_CUTOFF_RATIO) * focal_length_f) || !xi_cutoff.is_finite() {
                    return Err(Error::InvalidParameter(format!(
                        "xi_cutoff must exceed {MIN_XI_CUTOFF_RATIO} focal lengths"
                    )));
                }
            }
            CavitySpec::ProlateEllipsoid { interfocal_d, vertex_gap_f } => {
                if !(interfocal_d > T::zero()) || !(vertex_gap_f > T::zero()) {
                    return Err(Error::InvalidParameter("ellipsoid lengths must be positive".into()));
                }
                if !interfocal_d.is_finite() || !vertex_gap_f.is_finite() {
                    return Err(Error::InvalidParameter("ellipsoid lengths must be finite".into()));
                }
            }
        }
        Ok(())
    }

    pub fn system(&self) -> SeparableSystem<T> {
        match *self {
            CavitySpec::Parabolic { .. } => SeparableSystem::Parabolic,
            CavitySpec::ProlateEllipsoid { interfocal_d, .. } => {
                SeparableSystem::Prolate { c0: interfocal_d / T::lit(2.0) }
            }
        }
    }

    /// Range of the first separated coordinate (`xi`).
    pub fn u_range(&self) -> (T, T) {
        match *self {
            CavitySpec::Parabolic { xi_cutoff, .. } => (T::zero(), xi_cutoff),
            CavitySpec::ProlateEllipsoid { .. } => (T::one(), self.xi_boundary()),
        }
    }

    /// Range of the second separated coordinate (`eta`).
    pub fn v_range(&self) -> (T, T) {
        match *self {
            CavitySpec::Parabolic { .. } => (T::zero(), self.eta_boundary()),
            CavitySpec::ProlateEllipsoid { .. } => (-T::one(), T::one()),
        }
    }

    /// Wall value of `eta` for the parabola (`2 f`); `1` for the ellipsoid.
    pub fn eta_boundary(&self) -> T {
        match *self {
            CavitySpec::Parabolic { focal_length_f, .. } => T::lit(2.0) * focal_length_f,
            CavitySpec::ProlateEllipsoid { .. } => T::one(),
        }
    }

    /// Wall value of `xi`: `xi_cutoff` for the parabola, `a / c0` for the ellipsoid.
    pub fn xi_boundary(&self) -> T {
        match *self {
            CavitySpec::Parabolic { xi_cutoff, .. } => xi_cutoff,
            CavitySpec::ProlateEllipsoid { interfocal_d, vertex_gap_f } => {
                let c0 = interfocal_d / T::lit(2.0);
                (c0 + vertex_gap_f) / c0
            }
        }
    }

    /// Distance between a focus and its nearest vertex.
    pub fn vertex_gap(&self) -> T {
        match *self {
            CavitySpec::Parabolic { focal_length_f, .. } => focal_length_f,
            CavitySpec::ProlateEllipsoid { vertex_gap_f, .. } => vertex_gap_f,
        }
    }

    pub fn semi_major_axis(&self) -> Option<T> {
        match *self {
            CavitySpec::ProlateEllipsoid { interfocal_d, vertex_gap_f } => {
                Some(interfocal_d / T::lit(2.0) + vertex_gap_f)
            }
            _ => None,
        }
    }

    pub fn semi_minor_axis(&self) -> Option<T> {
        match *self {
            CavitySpec::ProlateEllipsoid { interfocal_d, .. } => {
                let a = self.semi_major_axis()?;
                let c0 = interfocal_d / T::lit(2.0);
                Some((a * a - c0 * c0).sqrt())
            }
            _ => None,
        }
    }

    pub fn focus_count(&self) -> usize {
        match self {
            CavitySpec::Parabolic { .. } => 1,
            CavitySpec::ProlateEllipsoid { .. } => 2,
        }
    }

    /// Cartesian position of focus 1 or 2.
    pub fn focus(&self, index: usize) -> Result<[T; 3]> {
        let z = match (*self, index) {
            (CavitySpec::Parabolic { .. }, 1) => T::zero(),
            (CavitySpec::ProlateEllipsoid { interfocal_d, .. }, 1) => interfocal_d / T::lit(2.0),
            (CavitySpec::ProlateEllipsoid { interfocal_d, .. }, 2) => -interfocal_d / T::lit(2.0),
            _ => {
                return Err(Error::InvalidParameter(format!("no focus with index {index} in this cavity")))
            }
        };
        Ok([T::zero(), T::zero(), z])
    }

    /// Focus-to-focus travel time via the vertex, `(d + 2 f)/c`.
    pub fn exchange_time(&self, c: T) -> Option<T> {
        match *self {
            CavitySpec::ProlateEllipsoid { interfocal_d, vertex_gap_f } => {
                Some((interfocal_d + T::lit(2.0) * vertex_gap_f) / c)
            }
            _ => None,
        }
    }

    /// Uniform dilation of every length by `factor`.
    pub fn scaled(&self, factor: T) -> Self {
        match *self {
            CavitySpec::Parabolic { focal_length_f, xi_cutoff } => CavitySpec::Parabolic {
                focal_length_f: focal_length_f * factor,
                xi_cutoff: xi_cutoff * factor,
            },
            CavitySpec::ProlateEllipsoid { interfocal_d, vertex_gap_f } => CavitySpec::ProlateEllipsoid {
                interfocal_d: interfocal_d * factor,
                vertex_gap_f: vertex_gap_f * factor,
            },
        }
    }

    /// Whether the point lies inside the closed cavity (boundary included).
    pub fn contains(&self, point: [T; 3]) -> bool {
        let (rho, z) = cylindrical(point);
        let (u, v) = self.system().from_cylindrical(rho, z);
        let slack = T::one() + T::lit(BOUNDARY_SLACK);
        let (_, u_max) = self.u_range();
        match self {
            CavitySpec::Parabolic { .. } => u <= u_max * slack && v <= self.eta_boundary() * slack,
            CavitySpec::ProlateEllipsoid { .. } => u <= u_max * slack,
        }
    }

    /// Implicit wall function: negative inside, zero on the wall, positive outside.
    pub fn wall_function(&self, rho: T, z: T) -> T {
        let (u, v) = self.system().from_cylindrical(rho, z);
        let (_, u_max) = self.u_range();
        match self {
            CavitySpec::Parabolic { .. } => (u / u_max - T::one()).max(v / self.eta_boundary() - T::one()),
            CavitySpec::ProlateEllipsoid { .. } => u / u_max - T::one(),
        }
    }
}

/// A two-level atom sitting in one of the foci, dipole along `z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomSpec<T> {
    pub focus_index: usize,
    pub position: [T; 3],
    pub transition_frequency: T,
    pub dipole_magnitude: T,
}

impl<T: Real> AtomSpec<T> {
    pub fn at_focus(cavity: &CavitySpec<T>, focus_index: usize, transition_frequency: T, dipole_magnitude: T) -> Result<Self> {
        if !(transition_frequency > T::zero()) {
            return Err(Error::InvalidParameter("transition frequency must be positive".into()));
        }
        if !(dipole_magnitude > T::zero()) {
            return Err(Error::InvalidParameter("dipole magnitude must be positive".into()));
        }
        let position = cavity.focus(focus_index)?;
        Ok(Self { focus_index, position, transition_frequency, dipole_magnitude })
    }

    /// Transition wavelength `2 pi c / omega_eg`.
    pub fn wavelength(&self, constants: &PhysicalConstants<T>) -> T {
        T::TAU() * constants.c / self.transition_frequency
    }
}

/// Curvilinear point `(xi, eta, phi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Curvilinear<T> {
    pub xi: T,
    pub eta: T,
    pub phi: T,
}

/// The coordinate system the field problem separates in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SeparableSystem<T> {
    Parabolic,
    Prolate { c0: T },
}

impl<T: Real> SeparableSystem<T> {
    /// `(rho, z) -> (xi, eta)`.
    pub fn from_cylindrical(&self, rho: T, z: T) -> (T, T) {
        match *self {
            SeparableSystem::Parabolic => {
                let r = rho.hypot(z);
                // eta = r - z cancels on the positive axis; use rho^2 / (r + z) there.
                if z > T::zero() {
                    let xi = r + z;
                    (xi, if xi > T::zero() { rho * rho / xi } else { T::zero() })
                } else {
                    let eta = r - z;
                    (if eta > T::zero() { rho * rho / eta } else { T::zero() }, eta)
                }
            }
            SeparableSystem::Prolate { c0 } => {
                let two_c0 = T::lit(2.0) * c0;
                let r1 = rho.hypot(z - c0);
                let r2 = rho.hypot(z + c0);
                let xi = ((r1 + r2) / two_c0).max(T::one());
                let eta = ((r2 - r1) / two_c0).max(-T::one()).min(T::one());
                (xi, eta)
            }
        }
    }

    /// `(xi, eta) -> (rho, z)`.
    pub fn to_cylindrical(&self, xi: T, eta: T) -> (T, T) {
        match *self {
            SeparableSystem::Parabolic => ((xi * eta).max(T::zero()).sqrt(), (xi - eta) / T::lit(2.0)),
            SeparableSystem::Prolate { c0 } => {
                let a = (xi * xi - T::one()).max(T::zero());
                let b = (T::one() - eta * eta).max(T::zero());
                (c0 * (a * b).sqrt(), c0 * xi * eta)
            }
        }
    }

    /// Metric scale factors `(h_xi, h_eta, h_phi)`.
    pub fn scale_factors(&self, xi: T, eta: T) -> [T; 3] {
        let (rho, _) = self.to_cylindrical(xi, eta);
        match *self {
            SeparableSystem::Parabolic => {
                let s = xi + eta;
                let half = T::lit(0.5);
                [half * (s / xi).sqrt(), half * (s / eta).sqrt(), rho]
            }
            SeparableSystem::Prolate { c0 } => {
                let s = xi * xi - eta * eta;
                [
                    c0 * (s / (xi * xi - T::one())).sqrt(),
                    c0 * (s / (T::one() - eta * eta)).sqrt(),
                    rho,
                ]
            }
        }
    }

    /// Partial derivatives `[[dxi/drho, dxi/dz], [deta/drho, deta/dz]]` off the singular set.
    pub fn jacobian(&self, rho: T, z: T) -> [[T; 2]; 2] {
        match *self {
            SeparableSystem::Parabolic => {
                let r = rho.hypot(z);
                [[rho / r, T::one() + z / r], [rho / r, z / r - T::one()]]
            }
            SeparableSystem::Prolate { c0 } => {
                let two_c0 = T::lit(2.0) * c0;
                let r1 = rho.hypot(z - c0);
                let r2 = rho.hypot(z + c0);
                [
                    [(rho / r1 + rho / r2) / two_c0, ((z - c0) / r1 + (z + c0) / r2) / two_c0],
                    [(rho / r2 - rho / r1) / two_c0, ((z + c0) / r2 - (z - c0) / r1) / two_c0],
                ]
            }
        }
    }

    pub fn to_curvilinear(&self, point: [T; 3]) -> Curvilinear<T> {
        let (rho, z) = cylindrical(point);
        let (xi, eta) = self.from_cylindrical(rho, z);
        Curvilinear { xi, eta, phi: point[1].atan2(point[0]) }
    }

    pub fn to_cartesian(&self, p: Curvilinear<T>) -> [T; 3] {
        let (rho, z) = self.to_cylindrical(p.xi, p.eta);
        [rho * p.phi.cos(), rho * p.phi.sin(), z]
    }
}

#[inline]
pub fn cylindrical<T: Real>(point: [T; 3]) -> (T, T) {
    (point[0].hypot(point[1]), point[2])
}

fn outside<T: Real>(point: [T; 3]) -> Error {
    Error::PointOutsideDomain {
        x: point[0].to_f64_lossy(),
        y: point[1].to_f64_lossy(),
        z: point[2].to_f64_lossy(),
    }
}

/// Cartesian point to parabolic `(xi, eta, phi)` for a parabolic cavity.
pub fn to_parabolic<T: Real>(point: [T; 3], cavity: &CavitySpec<T>) -> Result<Curvilinear<T>> {
    if !matches!(cavity, CavitySpec::Parabolic { .. }) {
        return Err(Error::UnsupportedCavity("parabolic coordinates need a parabolic cavity"));
    }
    if !cavity.contains(point) {
        return Err(outside(point));
    }
    Ok(SeparableSystem::Parabolic.to_curvilinear(point))
}

pub fn from_parabolic<T: Real>(p: Curvilinear<T>) -> [T; 3] {
    SeparableSystem::Parabolic.to_cartesian(p)
}

/// Cartesian point to prolate `(xi, eta, phi)` for an ellipsoidal cavity.
pub fn to_prolate<T: Real>(point: [T; 3], cavity: &CavitySpec<T>) -> Result<Curvilinear<T>> {
    if !matches!(cavity, CavitySpec::ProlateEllipsoid { .. }) {
        return Err(Error::UnsupportedCavity("prolate coordinates need an ellipsoidal cavity"));
    }
    if !cavity.contains(point) {
        return Err(outside(point));
    }
    Ok(cavity.system().to_curvilinear(point))
}

pub fn from_prolate<T: Real>(p: Curvilinear<T>, cavity: &CavitySpec<T>) -> Result<[T; 3]> {
    match cavity {
        CavitySpec::ProlateEllipsoid { .. } => Ok(cavity.system().to_cartesian(p)),
        _ => Err(Error::UnsupportedCavity("prolate coordinates need an ellipsoidal cavity")),
    }
}

/// One separated factor of an azimuthal potential, with its slope in its own coordinate.
pub trait AxialFactor<T> {
    fn value_and_slope(&self, x: T) -> (T, T);
    /// Interval on which the factor is tabulated.
    fn support(&self) -> (T, T);
}

/// Electric field `curl(e_phi * rho * U(xi) * V(eta))` at Cartesian points.
///
/// The potential is passed through its regular factors `U`, `V` (the azimuthal
/// component divided by `rho`), which stay finite on the axis and at the foci.
pub fn curl_of_azimuthal_field<T, A, B>(
    system: &SeparableSystem<T>,
    u_factor: &A,
    v_factor: &B,
    u_range: (T, T),
    v_range: (T, T),
    points: &[[T; 3]],
) -> Result<Vec<[T; 3]>>
where
    T: Real,
    A: AxialFactor<T> + ?Sized,
    B: AxialFactor<T> + ?Sized,
{
    let covers = |support: (T, T), need: (T, T)| {
        let tol = T::lit(1e-12) * (need.1 - need.0).abs().max(T::one());
        support.0 <= need.0 + tol && support.1 >= need.1 - tol
    };
    if !covers(u_factor.support(), u_range) {
        return Err(Error::GridMismatch("xi factor does not cover the cavity".into()));
    }
    if !covers(v_factor.support(), v_range) {
        return Err(Error::GridMismatch("eta factor does not cover the cavity".into()));
    }
    let mut out = Vec::with_capacity(points.len());
    for &p in points {
        let (rho, z) = cylindrical(p);
        let (u, v) = system.from_cylindrical(rho, z);
        let (fu, dfu) = u_factor.value_and_slope(u);
        let (gv, dgv) = v_factor.value_and_slope(v);
        let phi = fu * gv;
        let tiny = T::epsilon() * (T::one() + z.abs());
        if rho <= tiny {
            out.push([T::zero(), T::zero(), T::lit(2.0) * phi]);
            continue;
        }
        let jac = system.jacobian(rho, z);
        let d_u = dfu * gv;
        let d_v = fu * dgv;
        let d_rho = d_u * jac[0][0] + d_v * jac[1][0];
        let d_z = d_u * jac[0][1] + d_v * jac[1][1];
        let e_rho = -rho * d_z;
        let e_z = T::lit(2.0) * phi + rho * d_rho;
        out.push([e_rho * p[0] / rho, e_rho * p[1] / rho, e_z]);
    }
    Ok(out)
}
