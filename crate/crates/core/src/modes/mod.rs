//! Cavity field modes that couple to axial dipoles in the foci.
//!
//! Every such mode is `g = curl(e_phi rho V(xi) W(eta)) / sqrt(N)` with the regular
//! factors normalised to `V = W = 1` at focus 1, so `g_z(focus 1) = 2 / sqrt(N)`.

pub mod cache;
pub mod exact;
pub mod profile;
pub mod separated;
pub mod shooting;
pub mod wkb;

use crate::error::{Error, Result};
use crate::geometry::{AtomSpec, CavitySpec, PhysicalConstants};
use serde::{Deserialize, Serialize};

pub use cache::{BasisRequest, ModeCache, CACHE_FORMAT_VERSION};
pub use exact::{quantize_exact, QuantizeOptions};
pub use wkb::quantize_wkb;
pub use profile::{mode_field_at, mode_field_at_points, mode_magnetic_at, FactorTable, ModeProfile};
pub use separated::{separated_odes, CoordMap, EndCondition, PhaseScale, PolyOde, SeparatedOdes};
pub use shooting::{shoot_eigen, PhaseProblem, Root};

/// Channel (transverse) and longitudinal node counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct QuantumNumbers {
    /// Nodes of the `eta` factor (over the full `eta` range for the ellipsoid).
    pub channel: usize,
    /// Interior nodes of the `xi` factor.
    pub longitudinal: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Exact,
    Wkb,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    /// Angular frequency `omega_i`.
    pub frequency: f64,
    /// `omega_i / c`.
    pub wavenumber: f64,
    pub quantum_numbers: QuantumNumbers,
    pub separation_constant: f64,
    /// `N = int |curl(e_phi rho V W)|^2 dV` of the unnormalised mode.
    pub normalization: f64,
    /// `g_z` at focus 1 and focus 2 (zero for the parabola's missing second focus).
    pub focal_coupling: [f64; 2],
    /// `W(-eta) = parity W(eta)` for the ellipsoid; `1` for the parabola.
    pub parity: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<ModeProfile>,
}

impl Mode {
    /// `g_z` at the focus an atom sits in.
    pub fn z_at_focus(&self, atom: &AtomSpec<f64>) -> Result<f64> {
        match atom.focus_index {
            1 => Ok(self.focal_coupling[0]),
            2 => Ok(self.focal_coupling[1]),
            i => Err(Error::InvalidParameter(format!("no focus with index {i}"))),
        }
    }
}

/// `(g_i(x_a))_z` for the atom's focus.
pub fn mode_z_at_focus(mode: &Mode, atom: &AtomSpec<f64>) -> Result<f64> {
    mode.z_at_focus(atom)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeBasis {
    pub cavity: CavitySpec<f64>,
    pub constants: PhysicalConstants<f64>,
    /// Sorted by frequency.
    pub modes: Vec<Mode>,
    /// `[omega_min, omega_max]`.
    pub frequency_window: (f64, f64),
    pub provenance: Provenance,
}

impl ModeBasis {
    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn frequencies(&self) -> Vec<f64> {
        self.modes.iter().map(|m| m.frequency).collect()
    }

    /// Mean spacing of modes (all channels together) near `omega`, from the modes
    /// within `half_width` of it.
    pub fn local_spacing(&self, omega: f64, half_width: f64) -> Option<f64> {
        let n = self.modes.iter().filter(|m| (m.frequency - omega).abs() <= half_width).count();
        (n > 0).then(|| 2.0 * half_width / n as f64)
    }

    /// Check ordering and the per-channel separation of frequencies.
    pub fn check_sorted_distinct(&self, resolution: f64) -> Result<()> {
        if self.modes.windows(2).any(|w| w[0].frequency > w[1].frequency) {
            return Err(Error::InvalidParameter("modes are not sorted by frequency".into()));
        }
        let mut by_channel: std::collections::BTreeMap<usize, Vec<f64>> = Default::default();
        for m in &self.modes {
            by_channel.entry(m.quantum_numbers.channel).or_default().push(m.frequency);
        }
        for (ch, f) in by_channel {
            if f.windows(2).any(|w| (w[1] - w[0]).abs() <= resolution) {
                return Err(Error::InvalidParameter(format!("duplicate frequencies in channel {ch}")));
            }
        }
        Ok(())
    }
}
