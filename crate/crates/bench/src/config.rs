use serde::{Deserialize, Serialize};

use jtscd_core::citests::ParCorrOptions;
use jtscd_core::discovery::{DiscoveryConfig, Variant};
use jtscd_core::metrics::ContextScoring;
use jtscd_core::scm::ModelParams;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CiKind {
    #[default]
    Parcorr,
    /// d-separation in the true graph; sample sizes are ignored.
    Oracle,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelSource {
    /// A fresh random model per (frac_observed, realization).
    #[default]
    Random,
    /// The fixed two-variable preset with one latent context of each kind;
    /// `frac_observed` is ignored.
    SimplifiedPreset,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub t_values: Vec<usize>,
    pub m_values: Vec<usize>,
    pub frac_observed: Vec<f64>,
    pub variants: Vec<Variant>,
    pub n_realizations: usize,
    pub model_source: ModelSource,
    /// `seed` and `frac_observed` are overridden per cell.
    pub model: ModelParams,
    pub discovery: DiscoveryConfig,
    pub ci: CiKind,
    pub parcorr: ParCorrOptions,
    pub burn_in: usize,
    pub context_scoring: ContextScoring,
    pub master_seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            t_values: vec![20, 50, 100, 200],
            m_values: vec![10],
            frac_observed: vec![0.5],
            variants: Variant::ALL.to_vec(),
            n_realizations: 50,
            model_source: ModelSource::Random,
            model: ModelParams { n_system: 5, n_temporal_ctx: 1, n_spatial_ctx: 2, max_lag: 2, ..Default::default() },
            discovery: DiscoveryConfig::default(),
            ci: CiKind::Parcorr,
            parcorr: ParCorrOptions::default(),
            burn_in: 100,
            context_scoring: ContextScoring::ObservedOnly,
            master_seed: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.t_values.is_empty() || self.m_values.is_empty() || self.frac_observed.is_empty() {
            return Err("grid lists must be non-empty".into());
        }
        if self.t_values.contains(&0) || self.m_values.contains(&0) {
            return Err("T and M values must be positive".into());
        }
        if self.frac_observed.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return Err("frac_observed values must lie in [0, 1]".into());
        }
        if self.variants.is_empty() {
            return Err("at least one variant is required".into());
        }
        if self.n_realizations == 0 {
            return Err("n_realizations must be positive".into());
        }
        Ok(())
    }

    /// Grid cells in `(T, M, frac_observed)` order, outermost first.
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for &t in &self.t_values {
            for &m in &self.m_values {
                for &frac in &self.frac_observed {
                    out.push(Cell { t, m, frac });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub t: usize,
    pub m: usize,
    pub frac: f64,
}

/// SplitMix64 finalizer folded over the parts.
pub fn mix(parts: &[u64]) -> u64 {
    let mut h: u64 = 0x9E37_79B9_7F4A_7C15;
    for &p in parts {
        let mut z = h ^ p.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        h = z ^ (z >> 31);
    }
    h
}

impl Cell {
    /// The model depends on the observed fraction and the realization only, so
    /// every (T, M) cell of one realization scores the same model.
    pub fn model_seed(&self, master: u64, r: usize) -> u64 {
        mix(&[master, self.frac.to_bits(), r as u64])
    }

    pub fn data_seed(&self, master: u64, r: usize) -> u64 {
        mix(&[master, self.t as u64, self.m as u64, self.frac.to_bits(), r as u64, 1])
    }
}
