//! Run configuration. Hyperparameter defaults are the reference settings
//! for every neural variant: 200-dim embeddings, hidden size 64,
//! latent size 256, batch size 20, Adam at learning rate 1e-4.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::SynthConfig;
use crate::error::CoreError;
use crate::models::{ModelVariant, TestMode};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyper {
    pub embed: usize,
    pub hidden: usize,
    pub latent: usize,
    /// Width of the two hidden MLP layers (the reference settings fix the
    /// layer count at three and the activation at Tanh but not the width).
    pub mlp_hidden: usize,
    pub batch: usize,
    pub lr: f64,
    pub epochs: usize,
}

impl Default for Hyper {
    fn default() -> Self {
        Hyper {
            embed: 200,
            hidden: 64,
            latent: 256,
            mlp_hidden: 256,
            batch: 20,
            lr: 1e-4,
            epochs: 30,
        }
    }
}

impl Hyper {
    pub fn validate(&self) -> Result<(), CoreError> {
        for (name, v) in [
            ("embed", self.embed),
            ("hidden", self.hidden),
            ("latent", self.latent),
            ("mlp_hidden", self.mlp_hidden),
            ("batch", self.batch),
        ] {
            if v == 0 {
                return Err(CoreError::Config(format!("{name} must be positive")));
            }
        }
        if !(self.lr > 0.0) {
            return Err(CoreError::Config(format!(
                "learning rate must be positive, got {}",
                self.lr
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// JSON-lines corpus path (file mode). Mutually exclusive with
    /// `synth`.
    pub corpus: Option<String>,
    pub hierarchy: Option<String>,
    /// Train fraction of the corpus split (file mode).
    pub split_fraction: f64,
    /// Optional training-side subsample; the test side is never touched.
    pub subset_fraction: Option<f64>,
    pub max_len: usize,
    pub min_freq: usize,
    pub synth: Option<SynthConfig>,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            corpus: None,
            hierarchy: None,
            split_fraction: 0.9,
            subset_fraction: None,
            max_len: 64,
            min_freq: 2,
            synth: None,
        }
    }
}

impl DataConfig {
    pub fn validate(&self) -> Result<(), CoreError> {
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return Err(CoreError::Config(format!(
                "split_fraction must be in (0, 1), got {}",
                self.split_fraction
            )));
        }
        if let Some(f) = self.subset_fraction {
            if !(f > 0.0 && f <= 1.0) {
                return Err(CoreError::Config(format!(
                    "subset_fraction must be in (0, 1], got {f}"
                )));
            }
        }
        if self.max_len == 0 {
            return Err(CoreError::Config("max_len must be positive".to_string()));
        }
        if self.min_freq == 0 {
            return Err(CoreError::Config("min_freq must be at least 1".to_string()));
        }
        if let Some(s) = &self.synth {
            s.validate().map_err(CoreError::Data)?;
        }
        if self.synth.is_some() && self.corpus.is_some() {
            return Err(CoreError::Config(
                "choose either a corpus file or a synth block, not both".to_string(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareConfig {
    pub variants: Vec<ModelVariant>,
    pub n_seeds: usize,
    pub subset_fraction: f64,
}

impl Default for CompareConfig {
    fn default() -> Self {
        CompareConfig {
            variants: vec![ModelVariant::Bilstm, ModelVariant::Cvae, ModelVariant::Hcvae],
            n_seeds: 3,
            subset_fraction: 0.1,
        }
    }
}

impl CompareConfig {
    pub fn validate(&self) -> Result<(), CoreError> {
        if self.variants.len() < 2 {
            return Err(CoreError::Config(
                "compare needs at least two model variants".to_string(),
            ));
        }
        if self.n_seeds == 0 {
            return Err(CoreError::Config("n_seeds must be positive".to_string()));
        }
        if !(self.subset_fraction > 0.0 && self.subset_fraction <= 1.0) {
            return Err(CoreError::Config(format!(
                "compare subset_fraction must be in (0, 1], got {}",
                self.subset_fraction
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelVariant,
    pub hyper: Hyper,
    pub data: DataConfig,
    pub compare: CompareConfig,
    pub seed: u64,
    pub test_mode: TestMode,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: ModelVariant::Hcvae,
            hyper: Hyper::default(),
            data: DataConfig::default(),
            compare: CompareConfig::default(),
            seed: 42,
            test_mode: TestMode::Mean,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CoreError> {
        let text = fs::read_to_string(path)?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| CoreError::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        self.hyper.validate()?;
        self.data.validate()?;
        self.compare.validate()
    }

    /// Full JSON echo embedded into checkpoints and reports.
    pub fn echo(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_reference_settings() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.hyper.embed, 200);
        assert_eq!(cfg.hyper.hidden, 64);
        assert_eq!(cfg.hyper.latent, 256);
        assert_eq!(cfg.hyper.batch, 20);
        assert_eq!(cfg.hyper.lr, 1e-4);
        assert_eq!(cfg.data.split_fraction, 0.9);
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn unknown_fields_rejected() {
        let res: Result<RunConfig, _> = serde_json::from_str(r#"{"modle": "cvae"}"#);
        assert!(res.is_err());
    }

    #[test]
    fn bad_values_rejected() {
        let mut cfg = RunConfig::default();
        cfg.hyper.batch = 0;
        assert!(cfg.validate().is_err());

        let mut cfg = RunConfig::default();
        cfg.data.split_fraction = 1.5;
        assert!(cfg.validate().is_err());
    }
}
