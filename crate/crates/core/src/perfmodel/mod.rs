//! Response-time model for periodic batching.
//!
//! Kernel time is composed from calibrated response surfaces weighted by
//! each batch's mix of hits and misses; host time follows a fitted power
//! law in the batch size plus a per-byte result transfer cost.

pub mod alpha;
pub mod cpu;
pub mod fit;
pub mod predict;
pub mod surfaces;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use alpha::{compute_mix, estimate_alpha, AlphaConfig, AlphaEpoch, AlphaProfile, InteractionMix};
pub use cpu::{calibrate_cpu, nearest_cpu_model, CpuCalibration, CpuOverheadModel, RESULT_ITEM_BYTES};
pub use fit::{fit_line, fit_power_law, LineFit, PowerLawFit};
pub use predict::{best_prediction, predict, recommend_batch_size, Prediction};
pub use surfaces::{calibrate_surfaces, BenchSurfaces, GridSpec, SurfaceKind};

pub const MODEL_VERSION: u32 = 1;

/// Everything needed to predict on one machine, persisted as TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerfModel {
    pub version: u32,
    pub workers: usize,
    pub threshold: f64,
    pub surfaces: BenchSurfaces,
    #[serde(default)]
    pub cpu: Vec<CpuOverheadModel>,
    #[serde(default)]
    pub alpha: Vec<AlphaProfile>,
}

impl PerfModel {
    pub fn new(workers: usize, threshold: f64, surfaces: BenchSurfaces) -> Self {
        Self {
            version: MODEL_VERSION,
            workers,
            threshold,
            surfaces,
            cpu: Vec::new(),
            alpha: Vec::new(),
        }
    }

    /// Profile estimated at the batch size nearest to `s`.
    pub fn alpha_for(&self, s: usize) -> Option<&AlphaProfile> {
        self.alpha.iter().min_by_key(|p| (p.batch_size.abs_diff(s), p.batch_size))
    }

    pub fn cpu_for(&self, num_queries: usize) -> Option<&CpuOverheadModel> {
        nearest_cpu_model(&self.cpu, num_queries)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Model(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let m: Self = toml::from_str(text).map_err(|e| Error::Model(e.to_string()))?;
        if m.version != MODEL_VERSION {
            return Err(Error::Model(format!(
                "unsupported model version {} (expected {MODEL_VERSION})",
                m.version
            )));
        }
        m.surfaces.validate()?;
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml()?).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }
}
