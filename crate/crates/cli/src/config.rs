//! TOML run configuration. Every section is optional; unknown keys are errors.

use std::f64::consts::PI;
use std::path::Path;

use paneitz_core::harness::BubblingSequenceConfig;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("cannot parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("{section}: {message}")]
    Invalid { section: &'static str, message: String },
}

fn invalid(section: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        section,
        message: message.into(),
    }
}

/// Random sampling of `|y| ≤ radius`, `H ∈ [h_min, h_max]`.
macro_rules! sampling_config {
    ($name:ident, $section:literal, $tolerance:expr) => {
        #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
        #[serde(default, deny_unknown_fields)]
        pub struct $name {
            pub samples: usize,
            pub radius: f64,
            pub h_min: f64,
            pub h_max: f64,
            pub tolerance: f64,
        }

        impl Default for $name {
            fn default() -> Self {
                $name {
                    samples: 10_000,
                    radius: 50.0,
                    h_min: 0.5,
                    h_max: 2.0,
                    tolerance: $tolerance,
                }
            }
        }

        impl $name {
            fn validate(&self) -> Result<(), ConfigError> {
                if self.samples == 0 {
                    return Err(invalid($section, "samples must be positive"));
                }
                if !(self.radius > 0.0) {
                    return Err(invalid($section, "radius must be positive"));
                }
                if !(self.h_min > 0.0 && self.h_min <= self.h_max) {
                    return Err(invalid($section, "need 0 < h_min <= h_max"));
                }
                Ok(())
            }
        }
    };
}

sampling_config!(BubbleCheckConfig, "bubble-check", 1e-10);
sampling_config!(KernelCheckConfig, "kernel-check", 1e-8);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MassConfig {
    pub h: f64,
    pub radius: f64,
    /// Allowed `|mass/16π² − 1|`.
    pub tolerance: f64,
}

impl Default for MassConfig {
    fn default() -> Self {
        MassConfig {
            h: 1.0,
            radius: 10.0,
            tolerance: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PohozaevConfig {
    pub radius: f64,
    pub residual_tolerance: f64,
    pub amplitudes: Vec<f64>,
    pub slope_band: f64,
    pub radial_cases: usize,
    pub radial_tolerance: f64,
}

impl Default for PohozaevConfig {
    fn default() -> Self {
        PohozaevConfig {
            radius: 20.0,
            residual_tolerance: 1e-4,
            amplitudes: vec![1e-3, 2e-3, 4e-3, 8e-3, 1.6e-2],
            slope_band: 0.3,
            radial_cases: 100,
            radial_tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GreenConfig {
    pub modes: usize,
    pub side: f64,
    pub coefficient_tolerance: f64,
    pub symmetry_modes: usize,
    pub symmetry_pairs: usize,
    pub symmetry_tolerance: f64,
}

impl Default for GreenConfig {
    fn default() -> Self {
        GreenConfig {
            modes: 64,
            side: 2.0 * PI,
            coefficient_tolerance: 0.02,
            symmetry_modes: 16,
            symmetry_pairs: 100,
            symmetry_tolerance: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RepresentConfig {
    pub fields: usize,
    pub side: f64,
    pub modes: usize,
    pub mode_count: usize,
    pub max_mode: i32,
    pub grid: usize,
    pub tolerance: f64,
}

impl Default for RepresentConfig {
    fn default() -> Self {
        RepresentConfig {
            fields: 10,
            side: 1.7,
            modes: 8,
            mode_count: 10,
            max_mode: 3,
            grid: 8,
            tolerance: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CncConfig {
    pub jets: usize,
    pub refinement_steps: Vec<f64>,
    pub order_band: f64,
    pub q_tolerance: f64,
    /// Relative band on `∫(Q + |W|²/8) dV = 8π²`.
    pub gauss_bonnet_band: f64,
}

impl Default for CncConfig {
    fn default() -> Self {
        CncConfig {
            jets: 50,
            refinement_steps: vec![0.1, 0.05, 0.025],
            order_band: 0.5,
            q_tolerance: 1e-6,
            gauss_bonnet_band: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DistanceConfig {
    pub eps_list: Vec<f64>,
    pub pairs: Vec<[[f64; 4]; 2]>,
    pub stability_band: f64,
    pub exponent_band: f64,
    pub segments: usize,
}

impl Default for DistanceConfig {
    fn default() -> Self {
        DistanceConfig {
            eps_list: vec![0.1, 0.05, 0.025],
            pairs: vec![
                [[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0]],
                [[0.6, 0.8, 0.0, 0.0], [0.0, 0.0, 0.8, -0.6]],
                [[0.5, -0.5, 0.5, 0.5], [-0.2, 0.7, 0.1, 0.4]],
            ],
            stability_band: 0.25,
            exponent_band: 0.3,
            segments: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LongRangeConfig {
    pub eps: f64,
    pub slope_band: f64,
    pub ring_band: f64,
}

impl Default for LongRangeConfig {
    fn default() -> Self {
        LongRangeConfig {
            eps: 1e-4,
            slope_band: 0.01,
            ring_band: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlphaConfig {
    /// Rows with `ε` at or below this are held to `tolerance`.
    pub eps_max: f64,
    pub tolerance: f64,
}

impl Default for AlphaConfig {
    fn default() -> Self {
        AlphaConfig {
            eps_max: 1e-3,
            tolerance: 5e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MainEstConfig {
    pub max_ratio: f64,
}

impl Default for MainEstConfig {
    fn default() -> Self {
        MainEstConfig { max_ratio: 3.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VrateConfig {
    pub side: f64,
    pub modes: usize,
    pub tuned_mode: [i32; 4],
    pub tuned_amplitude: f64,
    pub q: [f64; 4],
    pub bubbles: usize,
    pub eps_list: Vec<f64>,
    pub balance_tolerance: f64,
    pub oracle_tolerance: f64,
    pub rate_band: f64,
}

impl Default for VrateConfig {
    fn default() -> Self {
        VrateConfig {
            side: 2.0 * PI,
            modes: 8,
            tuned_mode: [1, 2, 0, -1],
            tuned_amplitude: 0.3,
            q: [0.4, 0.2, 0.9, 0.1],
            bubbles: 1,
            eps_list: vec![1e-4, 1e-5, 1e-6, 1e-7, 1e-8],
            balance_tolerance: 1e-8,
            oracle_tolerance: 1e-6,
            rate_band: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[derive(Default)]
pub struct Config {
    pub seed: u64,
    pub sequence: BubblingSequenceConfig,
    #[serde(rename = "bubble-check")]
    pub bubble_check: BubbleCheckConfig,
    #[serde(rename = "kernel-check")]
    pub kernel_check: KernelCheckConfig,
    pub mass: MassConfig,
    pub pohozaev: PohozaevConfig,
    #[serde(rename = "green-fit")]
    pub green_fit: GreenConfig,
    pub represent: RepresentConfig,
    pub cnc: CncConfig,
    pub distance: DistanceConfig,
    pub longrange: LongRangeConfig,
    #[serde(rename = "alpha-sweep")]
    pub alpha_sweep: AlphaConfig,
    pub mainest: MainEstConfig,
    pub vrate: VrateConfig,
}


fn strictly_decreasing(list: &[f64]) -> bool {
    !list.is_empty() && list.iter().all(|e| *e > 0.0) && list.windows(2).all(|w| w[1] < w[0])
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Config = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.sequence.validate().map_err(|e| invalid("sequence", e.to_string()))?;
        self.bubble_check.validate()?;
        self.kernel_check.validate()?;
        if !(self.mass.h > 0.0 && self.mass.radius > 0.0) {
            return Err(invalid("mass", "h and radius must be positive"));
        }
        if !(self.pohozaev.radius > 0.0) || self.pohozaev.amplitudes.len() < 2 || self.pohozaev.amplitudes.iter().any(|a| !(*a > 0.0)) {
            return Err(invalid("pohozaev", "need a positive radius and at least two positive amplitudes"));
        }
        if !self.green_fit.modes.is_multiple_of(2) || !self.green_fit.symmetry_modes.is_multiple_of(2) || !(self.green_fit.side > 0.0) {
            return Err(invalid("green-fit", "mode counts must be even and side positive"));
        }
        if self.green_fit.modes <= 32 {
            return Err(invalid("green-fit", "modes must exceed 32 so the fit window [4L/N, L/8] is not empty"));
        }
        if self.represent.fields == 0 || !(self.represent.side > 0.0) {
            return Err(invalid("represent", "need at least one field and a positive side"));
        }
        if self.cnc.jets == 0 || !strictly_decreasing(&self.cnc.refinement_steps) || self.cnc.refinement_steps.len() < 2 {
            return Err(invalid("cnc", "need jets > 0 and at least two decreasing refinement steps"));
        }
        if !strictly_decreasing(&self.distance.eps_list) || self.distance.eps_list.len() < 2 || self.distance.pairs.is_empty() {
            return Err(invalid("distance", "eps_list must be strictly decreasing and positive, with at least one pair"));
        }
        if !(self.longrange.eps > 0.0 && self.longrange.eps < 1.0) {
            return Err(invalid("longrange", "eps must lie in (0, 1)"));
        }
        if !strictly_decreasing(&self.vrate.eps_list) {
            return Err(invalid("vrate", "eps_list must be strictly decreasing and positive"));
        }
        Ok(())
    }
}
