//! Run configuration: one JSON document with a schema version, explicit units on every
//! physical quantity, and unknown fields rejected.

use cavityqed::field::FieldPart;
use cavityqed::geometry::{AtomSpec, CavitySpec, PhysicalConstants};
use cavityqed::kernel::gamma_free_at;
use cavityqed::modes::Provenance;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("malformed configuration: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("{0}")]
    Invalid(String),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError::Invalid(msg.into()))
}

/// Unit system. `natural` sets `c = hbar = eps0 = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnitSystem {
    Natural,
    Si,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LengthUnit {
    #[serde(rename = "natural")]
    Natural,
    #[serde(rename = "m")]
    Metre,
    #[serde(rename = "um")]
    Micrometre,
    #[serde(rename = "nm")]
    Nanometre,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FrequencyUnit {
    #[serde(rename = "natural")]
    Natural,
    #[serde(rename = "rad/s")]
    RadPerSecond,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RateUnit {
    #[serde(rename = "natural")]
    Natural,
    #[serde(rename = "1/s")]
    PerSecond,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DipoleUnit {
    #[serde(rename = "natural")]
    Natural,
    #[serde(rename = "C*m")]
    CoulombMetre,
}

/// A number with its unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Quantity<U> {
    pub value: f64,
    pub unit: U,
}

/// Unit tags of one physical dimension.
pub trait Unit: Copy + std::fmt::Debug {
    fn natural(self) -> bool;
    fn si_factor(self) -> f64;
}

impl Unit for LengthUnit {
    fn natural(self) -> bool {
        self == LengthUnit::Natural
    }
    fn si_factor(self) -> f64 {
        match self {
            LengthUnit::Natural | LengthUnit::Metre => 1.0,
            LengthUnit::Micrometre => 1e-6,
            LengthUnit::Nanometre => 1e-9,
        }
    }
}

impl Unit for FrequencyUnit {
    fn natural(self) -> bool {
        self == FrequencyUnit::Natural
    }
    fn si_factor(self) -> f64 {
        1.0
    }
}

impl Unit for RateUnit {
    fn natural(self) -> bool {
        self == RateUnit::Natural
    }
    fn si_factor(self) -> f64 {
        1.0
    }
}

impl Unit for DipoleUnit {
    fn natural(self) -> bool {
        self == DipoleUnit::Natural
    }
    fn si_factor(self) -> f64 {
        1.0
    }
}

impl<U: Unit> Quantity<U> {
    /// Value in the internal units of `system`.
    fn resolve(&self, system: UnitSystem, what: &str) -> Result<f64, ConfigError> {
        let ok = match system {
            UnitSystem::Natural => self.unit.natural(),
            UnitSystem::Si => !self.unit.natural(),
        };
        if !ok {
            return invalid(format!("{what}: unit {:?} does not belong to the {system:?} unit system", self.unit));
        }
        if !self.value.is_finite() {
            return invalid(format!("{what} must be finite"));
        }
        Ok(self.value * self.unit.si_factor())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CavityConfig {
    Parabolic { focal_length_f: Quantity<LengthUnit>, xi_cutoff: Quantity<LengthUnit> },
    ProlateEllipsoid { interfocal_d: Quantity<LengthUnit>, vertex_gap_f: Quantity<LengthUnit> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomConfig {
    /// 1-based focus index.
    pub focus: usize,
}

/// The transition, with the dipole given either directly or through the free-space rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionConfig {
    pub omega_eg: Quantity<FrequencyUnit>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_free: Option<Quantity<RateUnit>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dipole: Option<Quantity<DipoleUnit>>,
}

/// Smooth switch-off of the couplings, in units of the free-space rate around `omega_eg`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaperConfig {
    pub inner_over_gamma: f64,
    pub outer_over_gamma: f64,
}

impl Default for TaperConfig {
    fn default() -> Self {
        Self { inner_over_gamma: 6.0, outer_over_gamma: 12.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisConfig {
    #[serde(default = "default_provenance")]
    pub provenance: Provenance,
    /// Mode window as multiples of `omega_eg`; required for dynamics and frames, derived
    /// from the broadening for Purcell scans.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window_over_omega_eg: Option<(f64, f64)>,
    #[serde(default = "default_channel_cutoff")]
    pub channel_cutoff: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub taper: Option<TaperConfig>,
}

fn default_provenance() -> Provenance {
    Provenance::Exact
}

fn default_channel_cutoff() -> f64 {
    1e-10
}

impl Default for BasisConfig {
    fn default() -> Self {
        Self { provenance: Provenance::Exact, window_over_omega_eg: None, channel_cutoff: 1e-10, taper: None }
    }
}

/// Evenly spaced values including both ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Linspace {
    pub from: f64,
    pub to: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid1 {
    List(Vec<f64>),
    Linspace(Linspace),
}

impl Grid1 {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Grid1::List(v) => v.clone(),
            Grid1::Linspace(l) if l.points == 1 => vec![l.from],
            Grid1::Linspace(l) => {
                (0..l.points).map(|i| l.from + (l.to - l.from) * i as f64 / (l.points - 1) as f64).collect()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameGrid {
    pub nx: usize,
    pub nz: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Experiment {
    /// `u = 2 pi f / lambda_eg`; the cavity is rescaled to each `u` at fixed shape.
    PurcellScan {
        u_grid: Grid1,
        #[serde(default = "default_certificate")]
        certificate_tolerance: f64,
    },
    Dynamics {
        t_max_over_tau: f64,
        samples: usize,
        #[serde(default = "default_atom")]
        initial_atom: usize,
    },
    FieldFrames {
        times_over_tau: Vec<f64>,
        grid: FrameGrid,
        #[serde(default = "default_atom")]
        initial_atom: usize,
        #[serde(default)]
        part: FieldPart,
        #[serde(default = "default_profile_resolution")]
        profile_resolution: f64,
    },
}

fn default_certificate() -> f64 {
    0.05
}

fn default_atom() -> usize {
    1
}

fn default_profile_resolution() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub units: UnitSystem,
    pub cavity: CavityConfig,
    pub atoms: Vec<AtomConfig>,
    pub transition: TransitionConfig,
    #[serde(default)]
    pub basis: BasisConfig,
    pub experiment: Experiment,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

/// A validated configuration in internal units.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub constants: PhysicalConstants<f64>,
    pub cavity: CavitySpec<f64>,
    pub omega_eg: f64,
    pub dipole: f64,
    pub gamma_free: f64,
    pub atoms: Vec<AtomSpec<f64>>,
}

impl Resolved {
    /// Atoms placed at the foci of another cavity of the same kind.
    pub fn atoms_in(&self, cavity: &CavitySpec<f64>) -> cavityqed::Result<Vec<AtomSpec<f64>>> {
        self.atoms.iter().map(|a| AtomSpec::at_focus(cavity, a.focus_index, self.omega_eg, self.dipole)).collect()
    }

    /// Focus-to-focus travel time: `(d + 2f)/c` for the ellipsoid, `2f/c` (focus, vertex,
    /// focus) for the paraboloid.
    pub fn tau(&self) -> f64 {
        match self.cavity {
            CavitySpec::ProlateEllipsoid { interfocal_d, vertex_gap_f } => (interfocal_d + 2.0 * vertex_gap_f) / self.constants.c,
            CavitySpec::Parabolic { focal_length_f, .. } => 2.0 * focal_length_f / self.constants.c,
        }
    }

    /// `u = 2 pi f / lambda_eg` of the configured cavity.
    pub fn u(&self) -> f64 {
        let f = match self.cavity {
            CavitySpec::ProlateEllipsoid { vertex_gap_f, .. } => vertex_gap_f,
            CavitySpec::Parabolic { focal_length_f, .. } => focal_length_f,
        };
        self.omega_eg / self.constants.c * f
    }
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.resolve()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serialises")
    }

    pub fn resolve(&self) -> Result<Resolved, ConfigError> {
        if self.schema_version != SCHEMA_VERSION {
            return invalid(format!("schema_version {} is not supported (expected {SCHEMA_VERSION})", self.schema_version));
        }
        let sys = self.units;
        let constants = match sys {
            UnitSystem::Natural => PhysicalConstants::natural(),
            UnitSystem::Si => PhysicalConstants::si(),
        };
        let cavity = match self.cavity {
            CavityConfig::Parabolic { focal_length_f, xi_cutoff } => {
                CavitySpec::parabolic(focal_length_f.resolve(sys, "focal_length_f")?, xi_cutoff.resolve(sys, "xi_cutoff")?)
            }
            CavityConfig::ProlateEllipsoid { interfocal_d, vertex_gap_f } => {
                CavitySpec::prolate(interfocal_d.resolve(sys, "interfocal_d")?, vertex_gap_f.resolve(sys, "vertex_gap_f")?)
            }
        }
        .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let omega_eg = self.transition.omega_eg.resolve(sys, "omega_eg")?;
        if !(omega_eg > 0.0) {
            return invalid("omega_eg must be positive");
        }
        // Gamma_free is proportional to D^2 at fixed omega.
        let unit_rate = gamma_free_at(omega_eg, 1.0, &constants);
        let dipole = match (self.transition.gamma_free, self.transition.dipole) {
            (Some(g), None) => {
                let g = g.resolve(sys, "gamma_free")?;
                if !(g > 0.0) {
                    return invalid("gamma_free must be positive");
                }
                (g / unit_rate).sqrt()
            }
            (None, Some(d)) => d.resolve(sys, "dipole")?,
            _ => return invalid("give exactly one of transition.gamma_free and transition.dipole"),
        };
        if !(dipole > 0.0) {
            return invalid("dipole must be positive");
        }
        let gamma_free = unit_rate * dipole * dipole;
        let max_atoms = cavity.focus_count();
        if self.atoms.is_empty() || self.atoms.len() > max_atoms {
            return invalid(format!("this cavity holds between 1 and {max_atoms} atoms"));
        }
        let mut seen = Vec::new();
        let mut atoms = Vec::new();
        for a in &self.atoms {
            if seen.contains(&a.focus) {
                return invalid("two atoms share a focus");
            }
            seen.push(a.focus);
            atoms.push(AtomSpec::at_focus(&cavity, a.focus, omega_eg, dipole).map_err(|e| ConfigError::Invalid(e.to_string()))?);
        }
        self.check_basis()?;
        self.check_experiment(atoms.len())?;
        Ok(Resolved { constants, cavity, omega_eg, dipole, gamma_free, atoms })
    }

    fn check_basis(&self) -> Result<(), ConfigError> {
        let b = &self.basis;
        if !(b.channel_cutoff >= 0.0 && b.channel_cutoff < 1.0) {
            return invalid("basis.channel_cutoff must lie in [0, 1)");
        }
        if let Some((lo, hi)) = b.window_over_omega_eg {
            if !(lo > 0.0 && hi > lo && hi.is_finite()) {
                return invalid("basis.window_over_omega_eg must satisfy 0 < lo < hi");
            }
            if !(lo < 1.0 && hi > 1.0) {
                return invalid("basis.window_over_omega_eg must contain the transition");
            }
        }
        if let Some(t) = b.taper {
            if !(t.inner_over_gamma > 0.0 && t.outer_over_gamma > t.inner_over_gamma) {
                return invalid("basis.taper needs 0 < inner_over_gamma < outer_over_gamma");
            }
        }
        Ok(())
    }

    fn check_experiment(&self, n_atoms: usize) -> Result<(), ConfigError> {
        let atom_ok = |a: usize| a >= 1 && a <= n_atoms;
        match &self.experiment {
            Experiment::PurcellScan { u_grid, certificate_tolerance } => {
                let u = u_grid.values();
                if u.is_empty() || u.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
                    return invalid("u_grid needs at least one positive value");
                }
                if !(*certificate_tolerance > 0.0) {
                    return invalid("certificate_tolerance must be positive");
                }
            }
            Experiment::Dynamics { t_max_over_tau, samples, initial_atom } => {
                if !(*t_max_over_tau > 0.0 && t_max_over_tau.is_finite()) || *samples < 2 {
                    return invalid("dynamics needs t_max_over_tau > 0 and at least two samples");
                }
                if !atom_ok(*initial_atom) {
                    return invalid("initial_atom does not name a configured atom");
                }
                if self.basis.window_over_omega_eg.is_none() {
                    return invalid("dynamics needs basis.window_over_omega_eg");
                }
            }
            Experiment::FieldFrames { times_over_tau, grid, initial_atom, profile_resolution, .. } => {
                if times_over_tau.is_empty() || times_over_tau.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
                    return invalid("times_over_tau needs non-negative entries");
                }
                if grid.nx == 0 || grid.nz == 0 || grid.nx * grid.nz > 4_000_000 {
                    return invalid("frame grid must have between 1 and 4e6 cells");
                }
                if !atom_ok(*initial_atom) {
                    return invalid("initial_atom does not name a configured atom");
                }
                if !(*profile_resolution > 0.0 && *profile_resolution <= 1.0) {
                    return invalid("profile_resolution must lie in (0, 1]");
                }
                if self.basis.window_over_omega_eg.is_none() {
                    return invalid("field frames need basis.window_over_omega_eg");
                }
            }
        }
        Ok(())
    }
}
