//! Run configuration, loaded from JSON. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::grid::GridGeometry;
use crate::learn::FitConfig;
use crate::plan::margin::margin_penalty;
use crate::plan::{SamplerConfig, TrainConfig, DEFAULT_ALPHA, DEFAULT_GAMMA};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Overrides the scenario's grid when set.
    pub geometry: Option<GridGeometry>,
    pub fit: FitConfig,
    pub sampler: SamplerConfig,
    pub train: TrainConfig,
    /// Weight of occupancy in composed costs.
    pub alpha: f64,
    /// Weight of each margin violation.
    pub gamma: f64,
    /// Margin penalty by registered name.
    pub penalty: String,
    pub seed: u64,
    /// Worker threads; 0 uses every core.
    pub threads: usize,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            geometry: None,
            fit: FitConfig::default(),
            sampler: SamplerConfig::default(),
            train: TrainConfig::default(),
            alpha: DEFAULT_ALPHA,
            gamma: DEFAULT_GAMMA,
            penalty: "freespace".into(),
            seed: 0,
            threads: 0,
            output_dir: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(g) = &self.geometry {
            g.validate()?;
        }
        self.fit.validate()?;
        self.sampler.validate()?;
        self.train.validate()?;
        if !(self.alpha.is_finite() && self.gamma.is_finite() && self.gamma >= 0.0) {
            return Err(Error::Config(
                "alpha and gamma must be finite, gamma non-negative".into(),
            ));
        }
        margin_penalty(&self.penalty)?;
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(RunConfig::from_json(&text).unwrap(), cfg);
        assert_eq!(RunConfig::from_json("{}").unwrap(), cfg);
    }

    #[test]
    fn rejects_unknown_and_invalid() {
        assert!(RunConfig::from_json(r#"{"alpah": 3}"#).is_err());
        assert!(RunConfig::from_json(r#"{"fit": {"learning_rate": -1}}"#).is_err());
        assert!(RunConfig::from_json(r#"{"penalty": "soft"}"#).is_err());
        assert!(RunConfig::from_json(r#"{"sampler": {"samplers": ["spline"]}}"#).is_err());
        let cfg = RunConfig::from_json(r#"{"alpha": 7, "fit": {"iterations": 5}}"#).unwrap();
        assert_eq!(
            (cfg.alpha, cfg.fit.iterations, cfg.fit.learning_rate),
            (7.0, 5, 0.2)
        );
    }
}
