use serde::{Deserialize, Serialize};

use super::ConsensusError;

/// Agreement count needed to commit in the accept stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AcceptRule {
    /// Strictly more than `n − l` agreeing nodes.
    #[default]
    MoreThanNMinusL,
    /// At least `n − l` agreeing nodes.
    AtLeastNMinusL,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConsensusConfig {
    /// Consensus node count.
    pub n: usize,
    /// Largest number of Byzantine nodes tolerated.
    pub l: usize,
    /// Reputation a node needs to be eligible for the committee.
    pub threshold: f64,
    /// Views in one leader rotation schedule.
    pub schedule_len: usize,
    pub accept_rule: AcceptRule,
}

impl Default for ConsensusConfig {
    fn default() -> Self {
        Self { n: 10, l: 3, threshold: 0.45, schedule_len: 10, accept_rule: AcceptRule::default() }
    }
}

impl ConsensusConfig {
    pub fn new(n: usize, l: usize) -> Result<Self, ConsensusError> {
        let cfg = Self { n, l, schedule_len: n, ..Self::default() };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Largest tolerable `l` for a committee of `n`.
    pub fn max_faults(n: usize) -> usize {
        n.saturating_sub(1) / 3
    }

    /// Committee of `n` with the largest `l` it tolerates.
    pub fn for_committee(n: usize, template: &ConsensusConfig) -> Result<Self, ConsensusError> {
        let cfg = Self { n, l: Self::max_faults(n), schedule_len: n, ..*template };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConsensusError> {
        if self.n < 4 {
            return Err(ConsensusError::InvalidConfig(format!("n = {} but at least 4 nodes are required", self.n)));
        }
        if self.n < 3 * self.l + 1 {
            return Err(ConsensusError::InvalidConfig(format!(
                "n = {} cannot tolerate l = {} (need n ≥ 3l + 1)",
                self.n, self.l
            )));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(ConsensusError::InvalidConfig(format!("threshold {} outside [0, 1]", self.threshold)));
        }
        if self.schedule_len == 0 {
            return Err(ConsensusError::InvalidConfig("schedule length must be positive".into()));
        }
        Ok(())
    }

    /// Matching messages (pre-prepare included) that complete the prepare stage.
    pub fn prepare_quorum(&self) -> usize {
        2 * self.l
    }

    /// Whether `agreeing` nodes (own vote included) are enough to commit.
    pub fn accept_reached(&self, agreeing: usize) -> bool {
        agreeing >= self.accept_quorum()
    }

    /// Smallest agreeing count that commits. The strict rule is capped at
    /// `n`, since with `l = 0` it would otherwise demand more than `n` votes.
    pub fn accept_quorum(&self) -> usize {
        match self.accept_rule {
            AcceptRule::MoreThanNMinusL => (self.n - self.l + 1).min(self.n),
            AcceptRule::AtLeastNMinusL => self.n - self.l,
        }
    }

    /// Upper bound on messages in one view.
    pub fn message_budget(&self) -> usize {
        5 * self.n * self.n
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(ConsensusConfig::new(10, 3).is_ok());
        assert!(ConsensusConfig::new(9, 3).is_err());
        assert!(ConsensusConfig::new(3, 0).is_err());
        assert!(ConsensusConfig::new(4, 1).is_ok());
        assert_eq!(ConsensusConfig::max_faults(30), 9);
    }

    #[test]
    fn quorum_arithmetic() {
        let mut c = ConsensusConfig::new(10, 3).unwrap();
        assert_eq!(c.prepare_quorum(), 6);
        assert!(!c.accept_reached(7) && c.accept_reached(8));
        assert_eq!(c.accept_quorum(), 8);
        c.accept_rule = AcceptRule::AtLeastNMinusL;
        assert!(c.accept_reached(7) && !c.accept_reached(6));
        let solo = ConsensusConfig::new(5, 0).unwrap();
        assert_eq!(solo.accept_quorum(), 5);
    }
}
