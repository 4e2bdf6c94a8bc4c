//! Laplace-domain memory kernels `A^{a,b}(s)`, the subtracted kernel `T_1`, free-space
//! decay and Purcell ratios.
//!
//! With real standing-wave modes the couplings
//! `kappa_{a,i} = sqrt(omega_i / (2 eps0 hbar)) D g_z(x_a)` are real, so
//! `A^{a,b}(s) = sum_i kappa_{a,i} kappa_{b,i} / (s + i omega_i)`.

use crate::error::{Error, Result};
use crate::geometry::{AtomSpec, CavitySpec, PhysicalConstants};
use crate::modes::ModeBasis;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Relative distance `|s + i omega_j| / max(1, omega_j)` below which a kernel sum is refused.
pub const POLE_TOL: f64 = 1e-12;

/// Free-space (Weisskopf-Wigner) rate `omega^3 D^2 / (3 pi eps0 hbar c^3)`.
pub fn gamma_free(atom: &AtomSpec<f64>, constants: &PhysicalConstants<f64>) -> f64 {
    gamma_free_at(atom.transition_frequency, atom.dipole_magnitude, constants)
}

pub fn gamma_free_at(omega: f64, dipole: f64, k: &PhysicalConstants<f64>) -> f64 {
    omega.powi(3) * dipole * dipole / (3.0 * PI * k.epsilon0 * k.hbar * k.c.powi(3))
}

/// Smooth switch-off of the couplings away from the transition frequency.
///
/// Weight 1 for `|omega - center| <= inner`, 0 beyond `outer`, Planck-taper in between.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Taper {
    pub center: f64,
    pub inner: f64,
    pub outer: f64,
}

impl Taper {
    pub fn weight(&self, omega: f64) -> f64 {
        let x = (omega - self.center).abs();
        if x <= self.inner {
            return 1.0;
        }
        if x >= self.outer {
            return 0.0;
        }
        let u = (x - self.inner) / (self.outer - self.inner);
        // Planck taper: 1 / (1 + exp(1/(1-u) - 1/u))
        let z = 1.0 / (1.0 - u) - 1.0 / u;
        if z > 700.0 {
            0.0
        } else {
            1.0 / (1.0 + z.exp())
        }
    }
}

/// Kernel value together with an estimate of the neglected out-of-window modes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelValue {
    pub value: Complex64,
    /// Real-part contribution of the modes outside the window, assuming the
    /// free-space density of states there.
    pub tail_estimate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelMatrix {
    pub frequencies: Vec<f64>,
    /// `couplings[a][i] = kappa_{a,i}`.
    pub couplings: Vec<Vec<f64>>,
    pub atoms: Vec<AtomSpec<f64>>,
    pub constants: PhysicalConstants<f64>,
    pub gamma_free: f64,
    pub window: (f64, f64),
    #[serde(default)]
    pub taper: Option<Taper>,
    /// Cavity the modes belong to, if built from a mode basis.
    #[serde(default)]
    pub cavity: Option<CavitySpec<f64>>,
}

impl KernelMatrix {
    pub fn new(basis: &ModeBasis, atoms: &[AtomSpec<f64>], taper: Option<Taper>) -> Result<Self> {
        let freqs = basis.frequencies();
        let mut couplings = Vec::with_capacity(atoms.len());
        for atom in atoms {
            if let CavitySpec::Parabolic { .. } = basis.cavity {
                if atom.focus_index != 1 {
                    return Err(Error::InvalidParameter("a paraboloid has a single focus".into()));
                }
            }
            let row = basis
                .modes
                .iter()
                .map(|m| {
                    let g = m.z_at_focus(atom)?;
                    Ok(coupling(m.frequency, atom.dipole_magnitude, g, &basis.constants))
                })
                .collect::<Result<Vec<_>>>()?;
            couplings.push(row);
        }
        let mut km = Self::from_couplings(freqs, couplings, atoms, basis.constants, basis.frequency_window, taper)?;
        km.cavity = Some(basis.cavity);
        Ok(km)
    }

    pub fn from_couplings(
        frequencies: Vec<f64>,
        mut couplings: Vec<Vec<f64>>,
        atoms: &[AtomSpec<f64>],
        constants: PhysicalConstants<f64>,
        window: (f64, f64),
        taper: Option<Taper>,
    ) -> Result<Self> {
        if atoms.is_empty() || atoms.len() > 2 {
            return Err(Error::InvalidParameter(format!("need one or two atoms, got {}", atoms.len())));
        }
        if couplings.len() != atoms.len() || couplings.iter().any(|c| c.len() != frequencies.len()) {
            return Err(Error::InvalidParameter("coupling table does not match atoms and modes".into()));
        }
        let w0 = atoms[0].transition_frequency;
        if atoms.iter().any(|a| a.transition_frequency != w0 || a.dipole_magnitude != atoms[0].dipole_magnitude) {
            return Err(Error::InvalidParameter("atoms must be identical".into()));
        }
        if let Some(t) = &taper {
            if !(t.inner >= 0.0 && t.outer > t.inner) {
                return Err(Error::InvalidParameter("taper needs 0 <= inner < outer".into()));
            }
            for row in couplings.iter_mut() {
                for (k, &w) in row.iter_mut().zip(&frequencies) {
                    *k *= t.weight(w);
                }
            }
        }
        Ok(Self {
            gamma_free: gamma_free(&atoms[0], &constants),
            frequencies,
            couplings,
            atoms: atoms.to_vec(),
            constants,
            window,
            taper,
            cavity: None,
        })
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    pub fn omega_eg(&self) -> f64 {
        self.atoms[0].transition_frequency
    }

    /// Focus-to-focus travel time `(d + 2f)/c`, for an ellipsoid.
    pub fn exchange_time(&self) -> Option<f64> {
        self.cavity.and_then(|c| c.exchange_time(self.constants.c))
    }

    fn check_indices(&self, a: usize, b: usize) -> Result<()> {
        if a >= self.atoms.len() || b >= self.atoms.len() {
            return Err(Error::InvalidParameter(format!("atom index out of range ({a}, {b})")));
        }
        Ok(())
    }

    /// Truncated mode sum `A^{a,b}(s)` (0-based atom indices).
    pub fn a(&self, a: usize, b: usize, s: Complex64) -> Result<Complex64> {
        self.check_indices(a, b)?;
        let (ka, kb) = (&self.couplings[a], &self.couplings[b]);
        let mut sum = Complex64::new(0.0, 0.0);
        for ((&w, &x), &y) in self.frequencies.iter().zip(ka).zip(kb) {
            let den = Complex64::new(s.re, s.im + w);
            let dist = den.norm();
            if dist < POLE_TOL * w.abs().max(1.0) {
                return Err(Error::PoleProximity { omega: w, distance: dist });
            }
            sum += x * y / den;
        }
        Ok(sum)
    }

    /// All kernel entries at once, `[[A11, A12], [A21, A22]]` (unused entries zero).
    pub fn matrix(&self, s: Complex64) -> Result<[[Complex64; 2]; 2]> {
        let n = self.atoms.len();
        let mut m = [[Complex64::new(0.0, 0.0); 2]; 2];
        for a in 0..n {
            for b in a..n {
                m[a][b] = self.a(a, b, s)?;
                m[b][a] = m[a][b];
            }
        }
        Ok(m)
    }

    /// `A^{a,b}(s)` with the out-of-window estimate.
    pub fn kernel_a(&self, a: usize, b: usize, s: Complex64) -> Result<KernelValue> {
        let value = self.a(a, b, s)?;
        let tail_estimate = if a == b { self.tail_estimate(s) } else { 0.0 };
        Ok(KernelValue { value, tail_estimate })
    }

    /// `T_1^{a,b}(s) = A^{a,b}(s) - delta_ab Gamma_free / 2`.
    pub fn kernel_t1(&self, a: usize, b: usize, s: Complex64) -> Result<Complex64> {
        let v = self.a(a, b, s)?;
        Ok(if a == b { v - 0.5 * self.gamma_free } else { v })
    }

    /// Lorentzian weight of the spectrum outside the window, with free-space density there:
    /// `(Gamma_free / 2 pi) [pi - atan((hi - w)/g) - atan((w - lo)/g)]` at `s = g - i w`.
    pub fn tail_estimate(&self, s: Complex64) -> f64 {
        let (lo, hi) = self.effective_window();
        let (g, w) = (s.re.max(f64::MIN_POSITIVE), -s.im);
        self.gamma_free / (2.0 * PI) * (PI - ((hi - w) / g).atan() - ((w - lo) / g).atan())
    }

    /// Window actually carried by the couplings (the taper's half-weight points if tapered).
    pub fn effective_window(&self) -> (f64, f64) {
        match self.taper {
            Some(t) => {
                let h = 0.5 * (t.inner + t.outer);
                ((t.center - h).max(self.window.0), (t.center + h).min(self.window.1))
            }
            None => self.window,
        }
    }

    /// `Gamma(eps) = 2 Re A^{a,a}(eps - i omega_eg)` plus the out-of-window estimate.
    pub fn pole_rate(&self, atom: usize, epsilon: f64) -> Result<f64> {
        let s = Complex64::new(epsilon, -self.omega_eg());
        let v = self.kernel_a(atom, atom, s)?;
        Ok(2.0 * (v.value.re + v.tail_estimate))
    }
}

/// `sqrt(omega / (2 eps0 hbar)) D g_z`.
pub fn coupling(omega: f64, dipole: f64, g_z: f64, k: &PhysicalConstants<f64>) -> f64 {
    (omega / (2.0 * k.epsilon0 * k.hbar)).sqrt() * dipole * g_z
}

/// Broadening times transit time used by [`default_epsilon`].
pub const EPSILON_TRANSITS: f64 = 5.0;

/// Broadening used for the pole formula: `5 / T`, with `T` the light travel time around
/// the cavity. A truncated mirror returns every ray to the focus after `T`; summing
/// Lorentzians over that discrete spectrum leaves a relative ripple of about
/// `2 exp(-eps T)`, here near 1%.
pub fn default_epsilon(cavity: &CavitySpec<f64>, constants: &PhysicalConstants<f64>) -> f64 {
    EPSILON_TRANSITS / cavity_transit_time(cavity, constants)
}

/// `(xi_c + 2 f) / c` for the paraboloid, the major axis `(d + 2 f) / c` for the ellipsoid.
pub fn cavity_transit_time(cavity: &CavitySpec<f64>, constants: &PhysicalConstants<f64>) -> f64 {
    match *cavity {
        CavitySpec::Parabolic { focal_length_f, xi_cutoff } => (xi_cutoff + 2.0 * focal_length_f) / constants.c,
        CavitySpec::ProlateEllipsoid { interfocal_d, vertex_gap_f } => (interfocal_d + 2.0 * vertex_gap_f) / constants.c,
    }
}

/// Half-width of the mode window needed for the pole formula at broadening `epsilon`.
pub fn pole_window_half_width(epsilon: f64, omega_eg: f64) -> f64 {
    (25.0 * epsilon).min(0.5 * omega_eg)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PurcellPole {
    pub gamma: f64,
    /// Rate at twice the broadening, for the certificate.
    pub gamma_2eps: f64,
    pub ratio: f64,
    pub epsilon: f64,
    pub converged: bool,
}

/// Pole-approximation rate `2 Re A^{a,a}(eps - i omega_eg)` with the `eps` / `2 eps`
/// certificate. Returns `NotConverged` if the two differ by more than `tolerance`.
pub fn purcell_pole(km: &KernelMatrix, atom: usize, epsilon: f64, tolerance: f64) -> Result<PurcellPole> {
    let r = purcell_pole_unchecked(km, atom, epsilon, tolerance)?;
    if !r.converged {
        return Err(Error::NotConverged(format!(
            "pole rate changes by {:.3e} between eps and 2 eps",
            (r.gamma - r.gamma_2eps).abs() / r.gamma.abs()
        )));
    }
    Ok(r)
}

/// As [`purcell_pole`] but reports a failed certificate in `converged` instead of erroring.
pub fn purcell_pole_unchecked(km: &KernelMatrix, atom: usize, epsilon: f64, tolerance: f64) -> Result<PurcellPole> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidParameter("epsilon must be positive".into()));
    }
    let gamma = km.pole_rate(atom, epsilon)?;
    let gamma_2eps = km.pole_rate(atom, 2.0 * epsilon)?;
    let converged = gamma.is_finite() && (gamma - gamma_2eps).abs() <= tolerance * gamma.abs();
    Ok(PurcellPole { gamma, gamma_2eps, ratio: gamma / km.gamma_free, epsilon, converged })
}

/// Evenly spaced modes with `kappa_j^2 = Gamma_free(omega_j) delta / (2 pi)`: a discretised
/// free-space continuum around `omega_eg`.
pub fn free_space_basis(
    atom: &AtomSpec<f64>,
    constants: &PhysicalConstants<f64>,
    half_width: f64,
    spacing: f64,
) -> Result<KernelMatrix> {
    let w0 = atom.transition_frequency;
    if !(spacing > 0.0 && half_width > spacing && half_width < w0) {
        return Err(Error::InvalidParameter("free-space basis needs 0 < spacing < half_width < omega_eg".into()));
    }
    let n = (half_width / spacing).round() as i64;
    // offset by half a spacing so no mode sits exactly on resonance
    let freqs: Vec<f64> = (-n..n).map(|j| w0 + (j as f64 + 0.5) * spacing).collect();
    let kap: Vec<f64> = freqs
        .iter()
        .map(|&w| (gamma_free_at(w, atom.dipole_magnitude, constants) * spacing / (2.0 * PI)).sqrt())
        .collect();
    let window = (freqs[0] - 0.5 * spacing, freqs[freqs.len() - 1] + 0.5 * spacing);
    KernelMatrix::from_couplings(freqs, vec![kap], std::slice::from_ref(atom), *constants, window, None)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn atom(w: f64, d: f64) -> AtomSpec<f64> {
        AtomSpec { focus_index: 1, position: [0.0; 3], transition_frequency: w, dipole_magnitude: d }
    }

    #[test]
    fn single_mode_kernel_arithmetic() {
        let k = PhysicalConstants::natural();
        // kappa^2 = 0.5 for omega = 1, D = 1, g = 1
        let kap = coupling(1.0, 1.0, 1.0, &k);
        let km = KernelMatrix::from_couplings(vec![1.0], vec![vec![kap]], &[atom(1.0, 1.0)], k, (0.5, 1.5), None).unwrap();
        let a = km.a(0, 0, Complex64::new(1.0, 0.0)).unwrap();
        assert!((a - Complex64::new(0.25, -0.25)).norm() < 1e-15);
    }

    #[test]
    fn pole_is_refused() {
        let k = PhysicalConstants::natural();
        let km = KernelMatrix::from_couplings(vec![1.0], vec![vec![0.3]], &[atom(1.0, 1.0)], k, (0.5, 1.5), None).unwrap();
        assert!(matches!(km.a(0, 0, Complex64::new(0.0, -1.0)), Err(Error::PoleProximity { .. })));
    }

    #[test]
    fn taper_is_smooth_and_bounded() {
        let t = Taper { center: 1.0, inner: 0.1, outer: 0.2 };
        assert_eq!(t.weight(1.05), 1.0);
        assert_eq!(t.weight(1.3), 0.0);
        assert!((t.weight(1.15) - 0.5).abs() < 1e-12);
        let mut last = 1.0;
        for i in 0..=100 {
            let w = t.weight(1.1 + 0.1 * i as f64 / 100.0);
            assert!(w <= last + 1e-15 && (0.0..=1.0).contains(&w));
            last = w;
        }
    }

    #[test]
    fn single_resonant_mode_rate_diverges_like_one_over_eps() {
        let k = PhysicalConstants::natural();
        let km = KernelMatrix::from_couplings(vec![1.0], vec![vec![0.2]], &[atom(1.0, 1.0)], k, (0.5, 1.5), None).unwrap();
        for eps in [1e-2, 1e-3] {
            let g = 2.0 * km.a(0, 0, Complex64::new(eps, -1.0)).unwrap().re;
            assert!((g - 2.0 * 0.04 / eps).abs() < 1e-9 * g);
        }
    }
}
