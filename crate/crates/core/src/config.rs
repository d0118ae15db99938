//! Analysis run configuration, loaded from TOML.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::AssociationParams;
use crate::ranking::RankWeights;
use crate::segmentation::DetectorConfig;
use crate::signal::SmoothingConfig;

/// Ranking settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RankingConfig {
    pub weights: RankWeights,
    /// Rows kept per component in reports.
    pub top_k: usize,
}

impl Default for RankingConfig {
    fn default() -> Self {
        Self {
            weights: RankWeights::default(),
            top_k: 5,
        }
    }
}

/// All tunables of an analysis run. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub smoothing: SmoothingConfig,
    pub detector: DetectorConfig,
    pub association: AssociationParams,
    pub ranking: RankingConfig,
    /// Segment labels to analyze separately; empty analyzes every segment
    /// in the record.
    pub segments: Vec<String>,
    /// Keep beats whose RR interval fails the plausibility gate.
    pub include_implausible: bool,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.smoothing;
        if !(s.window_ms.is_finite() && s.window_ms > 0.0) {
            return Err(Error::Config("smoothing.window_ms must be positive".into()));
        }
        if s.poly_order > 8 {
            return Err(Error::Config(
                "smoothing.poly_order must be at most 8".into(),
            ));
        }
        self.detector.validate()?;
        self.association.validate()?;
        self.ranking.weights.validate()?;
        if self.ranking.top_k == 0 {
            return Err(Error::Config("ranking.top_k must be >= 1".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_is_default() {
        assert_eq!(RunConfig::from_toml_str("").unwrap(), RunConfig::default());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::from_toml_str("bogus = 1").is_err());
        assert!(RunConfig::from_toml_str("[association]\ncse_k = 2").is_err());
    }

    #[test]
    fn ranges_checked() {
        assert!(RunConfig::from_toml_str("[association]\ncse_r = -1.0").is_err());
        assert!(RunConfig::from_toml_str("[ranking]\ntop_k = 0").is_err());
        assert!(RunConfig::from_toml_str("[detector]\nthreshold_fraction = 1.5").is_err());
        let c =
            RunConfig::from_toml_str("segments = [\"drug\"]\n[ranking.weights]\ncc = 2.0").unwrap();
        assert_eq!(c.ranking.weights.cc, 2.0);
        assert_eq!(c.segments, vec!["drug".to_string()]);
    }

    #[test]
    fn toml_round_trip() {
        let mut c = RunConfig::default();
        c.association.mi_bins = Some(8);
        assert_eq!(RunConfig::from_toml_str(&c.to_toml()).unwrap(), c);
    }
}
