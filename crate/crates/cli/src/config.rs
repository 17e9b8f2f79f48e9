use std::path::Path;

use indexmap::IndexMap;
use serde::Deserialize;

use jcl_core::calibration::CalibrationSettings;
use jcl_core::game::{GameSpec, QuittingGame, SunspotProfile, SunspotSpec};
use jcl_core::{binarize, BinaryCoinPair, BinaryPartition, ProbabilityVector};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Parse { path: String, source: serde_json::Error },
    #[error("missing `{0}` in config")]
    Missing(&'static str),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Core(#[from] jcl_core::Error),
}

/// A non-binary alphabet and the labels read as alpha.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlphabetSpec {
    pub probs: IndexMap<String, f64>,
    pub partition: Vec<String>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationSpec {
    pub start: Option<f64>,
    pub runs_per_probe: Option<u64>,
    pub max_probes: Option<usize>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub p1_alpha: Option<f64>,
    pub p2_alpha: Option<f64>,
    pub alphabet1: Option<AlphabetSpec>,
    pub alphabet2: Option<AlphabetSpec>,
    pub nu: Option<IndexMap<String, f64>>,
    pub device1: Option<String>,
    pub device2: Option<String>,
    pub adversaries: Option<Vec<String>>,
    #[serde(rename = "C")]
    pub threshold: Option<f64>,
    pub calibration: Option<CalibrationSpec>,
    pub runs: Option<u64>,
    pub seed: Option<u64>,
    pub max_stages: Option<u64>,
    pub window: Option<usize>,
    pub eps: Option<f64>,
    pub game: Option<GameSpec>,
    pub sunspot: Option<SunspotSpec>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::parse(&text).map_err(|e| match e {
            ConfigError::Parse { source, .. } => ConfigError::Parse { path: path.display().to_string(), source },
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|source| ConfigError::Parse { path: "<config>".into(), source })
    }

    fn coin(p: Option<f64>, alphabet: Option<&AlphabetSpec>, device: u8) -> Result<f64, ConfigError> {
        match (p, alphabet) {
            (Some(_), Some(_)) => Err(ConfigError::Invalid(format!(
                "device {device}: give either p{device}_alpha or alphabet{device}, not both"
            ))),
            (Some(p), None) => Ok(p),
            (None, Some(a)) => {
                let probs = ProbabilityVector::from_pairs(a.probs.iter().map(|(k, v)| (k.clone(), *v)))?;
                let partition = BinaryPartition::new(probs.outcomes().clone(), &a.partition)?;
                Ok(binarize(&partition, &probs)?)
            }
            (None, None) => Err(ConfigError::Missing(if device == 1 { "p1_alpha" } else { "p2_alpha" })),
        }
    }

    pub fn coins(&self) -> Result<BinaryCoinPair, ConfigError> {
        let p1 = Self::coin(self.p1_alpha, self.alphabet1.as_ref(), 1)?;
        let p2 = Self::coin(self.p2_alpha, self.alphabet2.as_ref(), 2)?;
        Ok(BinaryCoinPair::new(p1, p2)?)
    }

    pub fn nu(&self) -> Result<ProbabilityVector, ConfigError> {
        let nu = self.nu.as_ref().ok_or(ConfigError::Missing("nu"))?;
        Ok(ProbabilityVector::from_pairs(nu.iter().map(|(k, v)| (k.clone(), *v)))?)
    }

    pub fn calibration_settings(&self) -> CalibrationSettings {
        let mut s = CalibrationSettings::default();
        if let Some(c) = &self.calibration {
            s.start = c.start.or(s.start);
            s.runs_per_probe = c.runs_per_probe.unwrap_or(s.runs_per_probe);
            s.max_probes = c.max_probes.unwrap_or(s.max_probes);
        }
        s
    }

    pub fn game(&self) -> Result<(QuittingGame, SunspotProfile), ConfigError> {
        let spec = self.game.as_ref().ok_or(ConfigError::Missing("game"))?;
        let game = QuittingGame::from_spec(spec)?;
        let sunspot = self.sunspot.as_ref().ok_or(ConfigError::Missing("sunspot"))?;
        let sunspot = SunspotProfile::from_spec(&game, sunspot)?;
        Ok((game, sunspot))
    }
}
