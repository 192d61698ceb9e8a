use serde::{Deserialize, Serialize};

use crate::Error;

/// Which edges at `t + 1` serve as positives when training on the transition `t → t + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum EdgeScope {
    /// Every edge present at `t + 1`.
    #[default]
    All,
    /// Only edges appearing at `t + 1` for the first time.
    New,
}

impl std::str::FromStr for EdgeScope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "all" => Ok(Self::All),
            "new" => Ok(Self::New),
            other => Err(Error::Config(format!("edge scope must be \"all\" or \"new\", got {other:?}"))),
        }
    }
}

impl std::fmt::Display for EdgeScope {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::All => "all",
            Self::New => "new",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Embedding dimension `d`.
    pub dim: usize,
    /// Aggregation layers `L`.
    pub layers: usize,
    /// Attention lookback `K`.
    pub lookback: usize,
    /// Negative samples per positive edge `R`.
    pub negatives: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Drop the activeness gate (plain mean aggregation).
    pub no_activeness: bool,
    /// Drop attention and extrapolation; predict from the current snapshot only.
    pub no_temporal: bool,
    pub edge_scope: EdgeScope,
    /// Uniformly subsample neighborhoods larger than this.
    pub max_neighbors: Option<usize>,
    /// Adam steps taken on the revealed final-timestamp edges before link evaluation.
    pub fine_tune_steps: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            dim: 100,
            layers: 3,
            lookback: 3,
            negatives: 1,
            batch_size: 50,
            learning_rate: 1e-4,
            epochs: 10,
            seed: 0,
            no_activeness: false,
            no_temporal: false,
            edge_scope: EdgeScope::All,
            max_neighbors: None,
            fine_tune_steps: 20,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), Error> {
        let positive = [
            ("dim", self.dim),
            ("layers", self.layers),
            ("lookback", self.lookback),
            ("negatives", self.negatives),
            ("batch_size", self.batch_size),
            ("epochs", self.epochs),
        ];
        for (name, value) in positive {
            if value == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning_rate must be a positive finite number, got {}",
                self.learning_rate
            )));
        }
        if self.max_neighbors == Some(0) {
            return Err(Error::Config("max_neighbors must be positive when set".into()));
        }
        Ok(())
    }

    /// Short name of the ablation variant.
    pub fn variant(&self) -> &'static str {
        match (self.no_activeness, self.no_temporal) {
            (false, false) => "full",
            (true, false) => "no-activeness",
            (false, true) => "no-temporal",
            (true, true) => "no-activeness-no-temporal",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let cfg = TrainConfig::default();
        cfg.validate().unwrap();
        assert_eq!((cfg.dim, cfg.layers, cfg.lookback, cfg.negatives, cfg.batch_size), (100, 3, 3, 1, 50));
        assert_eq!(cfg.learning_rate, 1e-4);
    }

    #[test]
    fn zero_layers_rejected() {
        let cfg = TrainConfig {
            layers: 0,
            ..TrainConfig::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = TrainConfig {
            learning_rate: 0.0,
            ..TrainConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}
