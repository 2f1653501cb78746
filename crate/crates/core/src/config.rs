//! Effective configuration: built-in defaults, overridden by a TOML file,
//! overridden by command-line flags.
//!
//! ```toml
//! [harmony]
//! epsilon = 1e-5
//! literal_eq10 = false
//!
//! [fusion]
//! quant_lo = 0.0
//! quant_hi = 1.0
//! resize = true
//!
//! [losses]
//! bce_clamp = 1e-7
//! pyramid_levels = 5
//!
//! [metrics]
//! region = "whole"        # or "unknown"
//! trimap_radius = 15
//! sad_scale = 1e-3
//! mse_scale = 1e3
//! grad_scale = 1e-1
//! conn_scale = 1e-3
//! grad_sigma = 1.4
//!
//! [trimap]
//! radius = 15
//!
//! [compose]
//! seed = 0
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::compositor::DEFAULT_TRIMAP_RADIUS;
use crate::error::{MatteError, Result};
use crate::fusion::FusionConfig;
use crate::harmony::HarmonyConfig;
use crate::losses::LossConfig;
use crate::metrics::MetricsConfig;

/// Environment variable naming a config file.
pub const CONFIG_ENV: &str = "MATTEKIT_CONFIG";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrimapConfig {
    pub radius: usize,
}

impl Default for TrimapConfig {
    fn default() -> Self {
        TrimapConfig {
            radius: DEFAULT_TRIMAP_RADIUS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ComposeConfig {
    /// Seed for drawing backgrounds for records that do not name one.
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub harmony: HarmonyConfig,
    pub fusion: FusionConfig,
    pub losses: LossConfig,
    pub metrics: MetricsConfig,
    pub trimap: TrimapConfig,
    pub compose: ComposeConfig,
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| MatteError::Config(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| MatteError::io(path, e))?;
        Self::from_toml(&text)
    }

    /// Loads `explicit`, else the file named by `MATTEKIT_CONFIG`, else defaults.
    pub fn resolve(explicit: Option<&Path>) -> Result<Self> {
        if let Some(p) = explicit {
            return Self::load(p);
        }
        match std::env::var_os(CONFIG_ENV) {
            Some(p) if !p.is_empty() => Self::load(Path::new(&p)),
            _ => Ok(Config::default()),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn check(&self) -> Result<()> {
        let bad = |m: &str| Err(MatteError::Config(m.to_string()));
        if !(self.harmony.epsilon >= 0.0) {
            return bad("harmony.epsilon must be >= 0");
        }
        if !(self.fusion.quant_lo < self.fusion.quant_hi) {
            return bad("fusion.quant_lo must be below fusion.quant_hi");
        }
        if !(self.losses.bce_clamp > 0.0 && self.losses.bce_clamp < 0.5) {
            return bad("losses.bce_clamp must be in (0, 0.5)");
        }
        if self.losses.pyramid_levels == 0 {
            return bad("losses.pyramid_levels must be >= 1");
        }
        if !(self.metrics.grad_sigma > 0.0) {
            return bad("metrics.grad_sigma must be > 0");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::RegionMode;

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = Config::default();
        assert_eq!(Config::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn partial_file_overrides_only_named_keys() {
        let cfg = Config::from_toml("[harmony]\nepsilon = 0.001\n[metrics]\nregion = \"unknown\"\n").unwrap();
        assert_eq!(cfg.harmony.epsilon, 0.001);
        assert!(!cfg.harmony.literal_eq10);
        assert_eq!(cfg.metrics.region, RegionMode::Unknown);
        assert_eq!(cfg.metrics.sad_scale, 1e-3);
        assert_eq!(cfg.trimap.radius, 15);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert_eq!(Config::from_toml("[harmony]\nepsilom = 1.0\n").unwrap_err().kind(), "Config");
        assert!(Config::from_toml("[fusion]\nquant_lo = 0.9\nquant_hi = 0.1\n").is_err());
        assert!(Config::from_toml("[losses]\npyramid_levels = 0\n").is_err());
    }
}
