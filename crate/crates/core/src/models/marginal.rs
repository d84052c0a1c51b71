//! Context-blind running-mean reward estimate.

/// Running mean with a pseudo-count prior of 0.5 at weight 1, so a fresh
/// model predicts 0.5 and the estimate always stays inside [0, 1].
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MarginalMean {
    count: u64,
    sum: f64,
}

impl MarginalMean {
    pub fn new() -> Self {
        Self::default()
    }

    /// `(sum + 0.5) / (count + 1)`.
    pub fn predict(&self) -> f64 {
        (self.sum + 0.5) / (self.count as f64 + 1.0)
    }

    pub fn update(&mut self, reward: f64) {
        self.count += 1;
        self.sum += reward;
    }

    pub fn observations(&self) -> u64 {
        self.count
    }
}
