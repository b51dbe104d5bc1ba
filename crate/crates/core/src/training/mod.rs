//! Losses, relation-similarity data and the optimisation loop.

mod data;
mod losses;
mod optim;
mod trainer;

use serde::{Deserialize, Serialize};

pub use data::{
    load_relation_data, RelationDataset, RelationExamples, RelationRecord, ScoredPair, PAIRS_PER_SIDE,
    TRAIN_FRACTION,
};
pub use losses::{
    combine, contrastive_loss, relation_alignment_loss, total_loss, word_alignment_loss, ContrastiveOutput,
    RelationGroup, WordAlignmentInput,
};
pub use optim::AdamW;
pub use trainer::{batch_loss, train, BatchLosses, EpochMetrics, RelationBatch, TrainReport};

use crate::error::{Error, Result};
use crate::lexicon::SememeMode;
use crate::model::ModelConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LossToggles {
    pub l1: bool,
    pub l2: bool,
    pub l3: bool,
}

impl Default for LossToggles {
    fn default() -> Self {
        Self {
            l1: true,
            l2: true,
            l3: true,
        }
    }
}

/// Which side of the relation alignment receives no gradient.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopGradientSide {
    #[default]
    None,
    Graph,
    Encoder,
}

impl std::str::FromStr for StopGradientSide {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Self::None),
            "graph" => Ok(Self::Graph),
            "encoder" => Ok(Self::Encoder),
            other => Err(Error::Config(format!("unknown stop_gradient_side {other:?}"))),
        }
    }
}

impl std::fmt::Display for StopGradientSide {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::None => "none",
            Self::Graph => "graph",
            Self::Encoder => "encoder",
        })
    }
}

/// Representation used to score analogy candidates.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoringMode {
    /// Encoder mask representation `h_m`.
    #[default]
    Mask,
    /// Projected graph representation `h_g'`; falls back to `h_m` on the
    /// degenerate path.
    Graph,
    /// `[h_m ; h_g']`, with zeros for the graph half on the degenerate path.
    Concat,
}

impl std::str::FromStr for ScoringMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mask" | "hm" => Ok(Self::Mask),
            "graph" | "hg" => Ok(Self::Graph),
            "concat" => Ok(Self::Concat),
            other => Err(Error::Config(format!("unknown scoring mode {other:?}"))),
        }
    }
}

impl std::fmt::Display for ScoringMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Mask => "mask",
            Self::Graph => "graph",
            Self::Concat => "concat",
        })
    }
}

/// Every knob of a training run. The config file uses these field names as keys.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub tau: f64,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub batch_relations: usize,
    pub epochs: usize,
    pub seed: u64,
    pub use_l1: bool,
    pub use_l2: bool,
    pub use_l3: bool,
    pub encoder_dim: usize,
    pub graph_dim: usize,
    pub layers: usize,
    pub heads: usize,
    pub leaky_slope: f64,
    pub max_len: usize,
    pub hops: usize,
    pub sememe_mode: SememeMode,
    pub denominator_includes_positive: bool,
    pub stop_gradient_side: StopGradientSide,
    pub scoring: ScoringMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            tau: 0.5,
            learning_rate: 1e-3,
            weight_decay: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            batch_relations: 4,
            epochs: 10,
            seed: 42,
            use_l1: true,
            use_l2: true,
            use_l3: true,
            encoder_dim: 64,
            graph_dim: 300,
            layers: 2,
            heads: 1,
            leaky_slope: 0.2,
            max_len: 64,
            hops: 0,
            sememe_mode: SememeMode::Intersection,
            denominator_includes_positive: false,
            stop_gradient_side: StopGradientSide::None,
            scoring: ScoringMode::Mask,
        }
    }
}

impl TrainConfig {
    pub fn toggles(&self) -> LossToggles {
        LossToggles {
            l1: self.use_l1,
            l2: self.use_l2,
            l3: self.use_l3,
        }
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            graph_dim: self.graph_dim,
            encoder_dim: self.encoder_dim,
            layers: self.layers,
            heads: self.heads,
            leaky_slope: self.leaky_slope,
            max_len: self.max_len,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("tau", self.tau),
            ("learning_rate", self.learning_rate),
            ("adam_eps", self.adam_eps),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Config("betas must lie in [0, 1)".into()));
        }
        if self.weight_decay < 0.0 {
            return Err(Error::Config("weight_decay must be non-negative".into()));
        }
        let counts = [
            ("batch_relations", self.batch_relations),
            ("encoder_dim", self.encoder_dim),
            ("graph_dim", self.graph_dim),
            ("layers", self.layers),
            ("heads", self.heads),
            ("max_len", self.max_len),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.hops > 1 {
            return Err(Error::Config("hops must be 0 or 1".into()));
        }
        Ok(())
    }
}
