//! On-disk cache of mode bases.
//!
//! Entries are JSON files named by the SHA-256 of everything the basis depends on.
//! A stored basis is only returned when its format version and key both match.

use super::{quantize_exact, quantize_wkb, ModeBasis, Provenance, QuantizeOptions};
use crate::error::Result;
use crate::geometry::{CavitySpec, PhysicalConstants};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

/// Bumped whenever the stored layout or the solver's output changes meaning.
pub const CACHE_FORMAT_VERSION: u32 = 1;

/// Inputs that determine a basis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasisRequest {
    pub cavity: CavitySpec<f64>,
    pub constants: PhysicalConstants<f64>,
    pub window: (f64, f64),
    pub provenance: Provenance,
    pub options: QuantizeOptions,
}

impl BasisRequest {
    pub fn key(&self) -> String {
        #[derive(Serialize)]
        struct Keyed<'a> {
            format: u32,
            solver: &'static str,
            request: &'a BasisRequest,
        }
        let body = serde_json::to_vec(&Keyed { format: CACHE_FORMAT_VERSION, solver: env!("CARGO_PKG_VERSION"), request: self })
            .expect("plain data serialises");
        hex::encode(Sha256::digest(&body))
    }

    pub fn compute(&self) -> Result<ModeBasis> {
        match self.provenance {
            Provenance::Exact => quantize_exact(&self.cavity, &self.constants, self.window, &self.options),
            Provenance::Wkb => quantize_wkb(&self.cavity, &self.constants, self.window, &self.options),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct Entry {
    format: u32,
    key: String,
    basis: ModeBasis,
}

#[derive(Debug, Clone)]
pub struct ModeCache {
    dir: PathBuf,
}

impl ModeCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, key: &str) -> PathBuf {
        self.dir.join(format!("modes-{key}.json"))
    }

    /// The stored basis for `key`, or `None` if absent, stale or unreadable.
    pub fn load(&self, key: &str) -> Option<ModeBasis> {
        let text = std::fs::read_to_string(self.path_for(key)).ok()?;
        let entry: Entry = serde_json::from_str(&text).ok()?;
        (entry.format == CACHE_FORMAT_VERSION && entry.key == key).then_some(entry.basis)
    }

    /// Writes through a temporary file so readers never see a partial entry.
    pub fn store(&self, key: &str, basis: &ModeBasis) -> Result<()> {
        std::fs::create_dir_all(&self.dir)?;
        let entry = Entry { format: CACHE_FORMAT_VERSION, key: key.to_string(), basis: basis.clone() };
        let path = self.path_for(key);
        let tmp = path.with_extension(format!("tmp{}", std::process::id()));
        std::fs::write(&tmp, serde_json::to_vec(&entry)?)?;
        std::fs::rename(&tmp, &path)?;
        Ok(())
    }

    /// Cached basis if present, otherwise computed and stored. The flag reports a hit.
    pub fn get_or_compute(&self, request: &BasisRequest) -> Result<(ModeBasis, bool)> {
        let key = request.key();
        if let Some(b) = self.load(&key) {
            return Ok((b, true));
        }
        let basis = request.compute()?;
        self.store(&key, &basis)?;
        Ok((basis, false))
    }
}
