use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorruptSide {
    /// Fair coin per negative.
    #[default]
    Both,
    SourceOnly,
    TargetOnly,
}

impl std::str::FromStr for CorruptSide {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "both" => Ok(CorruptSide::Both),
            "source" | "source_only" => Ok(CorruptSide::SourceOnly),
            "target" | "target_only" => Ok(CorruptSide::TargetOnly),
            other => Err(Error::Config(format!("unknown corrupt side {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub num_negatives: usize,
    /// Fraction of negatives drawn proportionally to degree; the rest uniform.
    pub negative_mix: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub num_partitions: usize,
    pub corrupt_side: CorruptSide,
    /// Concurrent bucket workers; 1 is the deterministic mode.
    pub workers: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 10,
            num_negatives: 10,
            negative_mix: 0.5,
            learning_rate: 0.1,
            batch_size: 64,
            seed: 0,
            num_partitions: 1,
            corrupt_side: CorruptSide::Both,
            workers: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.num_negatives == 0 {
            return bad("num_negatives must be positive");
        }
        if !(0.0..=1.0).contains(&self.negative_mix) {
            return bad("negative_mix must lie in [0, 1]");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if self.num_partitions == 0 {
            return bad("num_partitions must be positive");
        }
        if self.workers == 0 {
            return bad("workers must be positive");
        }
        Ok(())
    }
}
