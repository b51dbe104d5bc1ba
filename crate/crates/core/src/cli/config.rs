//! Flat `key = value` configuration text mirroring [`TrainConfig`].
//!
//! Blank lines and lines starting with `#` are ignored. Unknown keys are
//! errors so that typos do not silently fall back to defaults.

use std::str::FromStr;

use crate::error::{Error, Result};
use crate::training::TrainConfig;

/// Environment variable that overrides the configured seed.
pub const SEED_ENV: &str = "SEMEMELM_SEED";

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| Error::Config(format!("{key}: cannot parse {value:?}: {e}")))
}

impl TrainConfig {
    /// Sets one field by its key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "tau" => self.tau = parse(key, v)?,
            "learning_rate" => self.learning_rate = parse(key, v)?,
            "weight_decay" => self.weight_decay = parse(key, v)?,
            "beta1" => self.beta1 = parse(key, v)?,
            "beta2" => self.beta2 = parse(key, v)?,
            "adam_eps" => self.adam_eps = parse(key, v)?,
            "batch_relations" => self.batch_relations = parse(key, v)?,
            "epochs" => self.epochs = parse(key, v)?,
            "seed" => self.seed = parse(key, v)?,
            "use_l1" => self.use_l1 = parse(key, v)?,
            "use_l2" => self.use_l2 = parse(key, v)?,
            "use_l3" => self.use_l3 = parse(key, v)?,
            "encoder_dim" => self.encoder_dim = parse(key, v)?,
            "graph_dim" => self.graph_dim = parse(key, v)?,
            "layers" => self.layers = parse(key, v)?,
            "heads" => self.heads = parse(key, v)?,
            "leaky_slope" => self.leaky_slope = parse(key, v)?,
            "max_len" => self.max_len = parse(key, v)?,
            "hops" => self.hops = parse(key, v)?,
            "sememe_mode" => self.sememe_mode = parse(key, v)?,
            "denominator_includes_positive" => self.denominator_includes_positive = parse(key, v)?,
            "stop_gradient_side" => self.stop_gradient_side = parse(key, v)?,
            "scoring" => self.scoring = parse(key, v)?,
            other => return Err(Error::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines on top of the current values.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse("config", i + 1, "expected key = value"))?;
            self.set(key, value)
                .map_err(|e| Error::parse("config", i + 1, e.to_string()))?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut c = Self::default();
        c.apply_text(text)?;
        c.validate()?;
        Ok(c)
    }

    /// Every key in a fixed order; parses back to an equal config.
    pub fn to_text(&self) -> String {
        let lines = [
            ("tau", self.tau.to_string()),
            ("learning_rate", self.learning_rate.to_string()),
            ("weight_decay", self.weight_decay.to_string()),
            ("beta1", self.beta1.to_string()),
            ("beta2", self.beta2.to_string()),
            ("adam_eps", self.adam_eps.to_string()),
            ("batch_relations", self.batch_relations.to_string()),
            ("epochs", self.epochs.to_string()),
            ("seed", self.seed.to_string()),
            ("use_l1", self.use_l1.to_string()),
            ("use_l2", self.use_l2.to_string()),
            ("use_l3", self.use_l3.to_string()),
            ("encoder_dim", self.encoder_dim.to_string()),
            ("graph_dim", self.graph_dim.to_string()),
            ("layers", self.layers.to_string()),
            ("heads", self.heads.to_string()),
            ("leaky_slope", self.leaky_slope.to_string()),
            ("max_len", self.max_len.to_string()),
            ("hops", self.hops.to_string()),
            ("sememe_mode", self.sememe_mode.to_string()),
            (
                "denominator_includes_positive",
                self.denominator_includes_positive.to_string(),
            ),
            ("stop_gradient_side", self.stop_gradient_side.to_string()),
            ("scoring", self.scoring.to_string()),
        ];
        lines.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

/// Resolves a run configuration: file values, then the seed environment
/// variable, then `key=value` overrides from the command line.
pub fn resolve_config(
    file_text: Option<&str>,
    env_seed: Option<&str>,
    overrides: &[String],
) -> Result<TrainConfig> {
    let mut c = TrainConfig::default();
    if let Some(text) = file_text {
        c.apply_text(text)?;
    }
    if let Some(seed) = env_seed {
        c.seed = parse(SEED_ENV, seed)?;
    }
    for o in overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override {o:?} is not key=value")))?;
        c.set(k, v)?;
    }
    c.validate()?;
    Ok(c)
}
