use std::path::{Path, PathBuf};

use num_traits::Signed;
use serde::{Deserialize, Serialize};

use crate::rational::{self, Rational};
use crate::region::DEFAULT_REGION_CAP;
use crate::{Error, Result};

/// Suite configuration, read from JSON. Only `seed` is required.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrilemmaConfig {
    pub seed: u64,
    /// Region cap for the scaling track.
    pub region_cap: usize,
    /// Tolerance on the proxy gap.
    #[serde(with = "rational::serde_rational")]
    pub delta: Rational,
    #[serde(with = "rational::serde_rational")]
    pub tau: Rational,
    /// Probe grid resolution: probe coordinates are multiples of `1/grid_density`.
    pub grid_density: usize,
    pub depth_sweep: Vec<u32>,
    pub output_dir: PathBuf,
    pub pairs: usize,
    pub probes: usize,
    pub diagonal_instances: usize,
    pub support_sizes: Vec<usize>,
    /// Run the three tracks on separate threads.
    pub parallel: bool,
}

impl Default for TrilemmaConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            region_cap: DEFAULT_REGION_CAP,
            delta: rational::zero(),
            tau: rational::one(),
            grid_density: 64,
            depth_sweep: (1..=10).collect(),
            output_dir: PathBuf::from("trilemma-out"),
            pairs: 100,
            probes: 100,
            diagonal_instances: 50,
            support_sizes: vec![1, 4, 16],
            parallel: false,
        }
    }
}

impl TrilemmaConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("region_cap", self.region_cap),
            ("grid_density", self.grid_density),
            ("pairs", self.pairs),
            ("probes", self.probes),
            ("diagonal_instances", self.diagonal_instances),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::InvalidValue(format!("{name} must be positive")));
        }
        if self.delta.is_negative() || self.delta >= rational::one() {
            return Err(Error::InvalidValue(format!("delta = {} is outside [0, 1)", self.delta)));
        }
        if self.tau.is_negative() || self.tau > rational::one() {
            return Err(Error::InvalidValue(format!("tau = {} is outside [0, 1]", self.tau)));
        }
        if self.depth_sweep.is_empty() || self.depth_sweep[0] == 0 || self.depth_sweep.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidValue(
                "depth_sweep must be a nonempty increasing list of positive depths".into(),
            ));
        }
        if self.depth_sweep.last().is_some_and(|&d| d > 24) {
            return Err(Error::InvalidValue("depths above 24 are not supported".into()));
        }
        if self.support_sizes.is_empty() || self.support_sizes.iter().any(|&s| s == 0 || s > 33) {
            return Err(Error::InvalidValue("support sizes must lie in 1..=33".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_in() {
        let cfg = TrilemmaConfig::from_json(r#"{"seed": 5}"#).unwrap();
        assert_eq!(cfg.seed, 5);
        assert_eq!(cfg.tau, rational::one());
        assert_eq!(cfg.delta, rational::zero());
        assert_eq!(cfg.depth_sweep.len(), 10);
    }

    #[test]
    fn rejects_bad_values() {
        for text in [
            r#"{"depth_sweep": []}"#,
            r#"{"depth_sweep": [3, 2]}"#,
            r#"{"region_cap": 0}"#,
            r#"{"delta": "1"}"#,
            r#"{"tau": "3/2"}"#,
            r#"{"support_sizes": [0]}"#,
            r#"{"unknown": 1}"#,
        ] {
            assert!(TrilemmaConfig::from_json(text).is_err(), "{text}");
        }
    }

    #[test]
    fn round_trips() {
        let cfg = TrilemmaConfig {
            tau: rational::rat(9, 10),
            ..TrilemmaConfig::default()
        };
        let back = TrilemmaConfig::from_json(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }
}
