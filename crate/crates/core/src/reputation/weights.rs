//! Familiarity, timeliness and similarity weights for reputation segments.

use serde::{Deserialize, Serialize};

use super::ReputationError;

/// Mixing coefficients and timeliness power-law parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightConfig {
    pub familiarity: f64,
    pub timeliness: f64,
    pub similarity: f64,
    /// Timeliness scale `α1`.
    pub decay_scale: f64,
    /// Timeliness exponent `α2`.
    pub decay_exponent: f64,
}

impl Default for WeightConfig {
    fn default() -> Self {
        Self {
            familiarity: 0.3,
            timeliness: 0.4,
            similarity: 0.3,
            decay_scale: 10.0,
            decay_exponent: 1.5,
        }
    }
}

impl WeightConfig {
    pub fn new(
        gammas: [f64; 3],
        decay_scale: f64,
        decay_exponent: f64,
    ) -> Result<Self, ReputationError> {
        let cfg = Self {
            familiarity: gammas[0],
            timeliness: gammas[1],
            similarity: gammas[2],
            decay_scale,
            decay_exponent,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ReputationError> {
        let g = [self.familiarity, self.timeliness, self.similarity];
        if g.iter().any(|x| !x.is_finite() || *x < 0.0) || (g.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(ReputationError::InvalidWeights(format!(
                "mixing coefficients {g:?} must be nonnegative and sum to 1"
            )));
        }
        // α2 = 0 is accepted: it is the flat-timeliness degenerate case.
        if !(self.decay_scale > 0.0) || !(self.decay_exponent >= 0.0) {
            return Err(ReputationError::InvalidWeights(format!(
                "timeliness parameters ({}, {}) must be positive",
                self.decay_scale, self.decay_exponent
            )));
        }
        Ok(())
    }
}

/// `p_ij` divided by the mean interaction count of `i` over all its peers.
pub fn familiarity_weight(pair_count: f64, peer_counts: &[f64]) -> Result<f64, ReputationError> {
    if peer_counts.is_empty() {
        return Err(ReputationError::NoInteractionHistory);
    }
    let mean = peer_counts.iter().sum::<f64>() / peer_counts.len() as f64;
    if !(mean > 0.0) {
        return Err(ReputationError::NoInteractionHistory);
    }
    Ok(pair_count / mean)
}

/// Power-law timeliness `α1·(t − t_ij)^(−α2)`. Requires `now > opinion_slot`.
pub fn timeliness_weight(now: u64, opinion_slot: u64, cfg: &WeightConfig) -> Result<f64, ReputationError> {
    if now <= opinion_slot {
        return Err(ReputationError::OpinionNotInPast { now, opinion_slot });
    }
    let gap = (now - opinion_slot) as f64;
    Ok(cfg.decay_scale * gap.powf(-cfg.decay_exponent))
}

/// Timeliness with same-slot opinions treated as one slot old.
pub fn timeliness_weight_clamped(now: u64, opinion_slot: u64, cfg: &WeightConfig) -> f64 {
    let gap = now.saturating_sub(opinion_slot).max(1) as f64;
    cfg.decay_scale * gap.powf(-cfg.decay_exponent)
}

pub fn similarity_weight(arrival_i: f64, arrival_j: f64) -> f64 {
    1.0 / (1.0 + (arrival_i - arrival_j).abs())
}

pub fn overall_weight(familiarity: f64, timeliness: f64, similarity: f64, cfg: &WeightConfig) -> f64 {
    cfg.familiarity * familiarity + cfg.timeliness * timeliness + cfg.similarity * similarity
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn familiarity() {
        assert_eq!(familiarity_weight(5.0, &[5.0, 5.0, 5.0]).unwrap(), 1.0);
        assert_eq!(familiarity_weight(10.0, &[2.0, 4.0, 6.0, 8.0, 5.0]).unwrap(), 2.0);
        assert_eq!(familiarity_weight(0.0, &[3.0, 1.0]).unwrap(), 0.0);
        assert!(familiarity_weight(1.0, &[0.0, 0.0]).is_err());
        assert!(familiarity_weight(1.0, &[]).is_err());
    }

    #[test]
    fn timeliness() {
        let cfg = WeightConfig::default();
        assert!((timeliness_weight(14, 10, &cfg).unwrap() - 1.25).abs() < 1e-12);
        assert!((timeliness_weight(11, 10, &cfg).unwrap() - 10.0).abs() < 1e-12);
        let flat = WeightConfig::new([0.3, 0.4, 0.3], 1.0, 0.0).unwrap();
        for gap in 1..20 {
            assert_eq!(timeliness_weight(100, 100 - gap, &flat).unwrap(), 1.0);
        }
        assert!(timeliness_weight(5, 5, &cfg).is_err());
        assert!(timeliness_weight(4, 5, &cfg).is_err());
        assert_eq!(timeliness_weight_clamped(5, 5, &cfg), 10.0);
    }

    #[test]
    fn similarity() {
        assert_eq!(similarity_weight(9.0, 9.0), 1.0);
        assert!((similarity_weight(7.0, 9.0) - 1.0 / 3.0).abs() < 1e-15);
        assert!((similarity_weight(0.0, 9.0) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn overall() {
        let cfg = WeightConfig::default();
        assert!((overall_weight(1.0, 1.0, 1.0, &cfg) - 1.0).abs() < 1e-15);
        assert!((overall_weight(2.0, 1.25, 1.0 / 3.0, &cfg) - 1.2).abs() < 1e-12);
        let only_x = WeightConfig::new([1.0, 0.0, 0.0], 10.0, 1.5).unwrap();
        assert_eq!(overall_weight(7.0, 3.0, 0.2, &only_x), 7.0);
    }

    #[test]
    fn config_validation() {
        assert!(WeightConfig::new([0.3, 0.3, 0.3], 10.0, 1.5).is_err());
        assert!(WeightConfig::new([0.5, 0.6, -0.1], 10.0, 1.5).is_err());
        assert!(WeightConfig::new([0.3, 0.4, 0.3], 0.0, 1.5).is_err());
    }
}
