use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use super::NodeId;

/// Unigram-style noise distribution over nodes, `P(v) ∝ degree(v)^{3/4}`.
#[derive(Debug, Clone)]
pub struct NoiseDistribution {
    weights: Vec<f64>,
    index: WeightedIndex<f64>,
}

impl NoiseDistribution {
    /// `None` when every degree is zero.
    pub fn from_degrees(degrees: &[usize]) -> Option<Self> {
        let weights: Vec<f64> = degrees.iter().map(|&d| (d as f64).powf(0.75)).collect();
        let index = WeightedIndex::new(&weights).ok()?;
        Some(Self { weights, index })
    }

    /// Unnormalized weights `degree^{3/4}`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn probabilities(&self) -> Vec<f64> {
        let total: f64 = self.weights.iter().sum();
        self.weights.iter().map(|w| w / total).collect()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> NodeId {
        NodeId(self.index.sample(rng))
    }
}
