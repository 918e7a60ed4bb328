//! Subjective-logic opinions and the operators used by the reputation model.

use serde::{Deserialize, Serialize};

use super::ReputationError;

/// Additive tolerance for the `b + d + u = 1` constraint.
pub const MASS_TOLERANCE: f64 = 1e-9;

/// Prior evidence weight used when mapping outcome counts to an opinion.
pub const EVIDENCE_PRIOR_WEIGHT: f64 = 2.0;

/// A binomial subjective-logic opinion `(belief, disbelief, uncertainty, base_rate)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Opinion {
    belief: f64,
    disbelief: f64,
    uncertainty: f64,
    base_rate: f64,
}

impl Opinion {
    pub fn new(
        belief: f64,
        disbelief: f64,
        uncertainty: f64,
        base_rate: f64,
    ) -> Result<Self, ReputationError> {
        let in_unit = |x: f64| (-MASS_TOLERANCE..=1.0 + MASS_TOLERANCE).contains(&x);
        if !(in_unit(belief) && in_unit(disbelief) && in_unit(uncertainty) && in_unit(base_rate)) {
            return Err(ReputationError::InvalidOpinion {
                belief,
                disbelief,
                uncertainty,
                base_rate,
            });
        }
        if (belief + disbelief + uncertainty - 1.0).abs() > MASS_TOLERANCE {
            return Err(ReputationError::InvalidOpinion {
                belief,
                disbelief,
                uncertainty,
                base_rate,
            });
        }
        let clamp = |x: f64| x.clamp(0.0, 1.0);
        Ok(Self {
            belief: clamp(belief),
            disbelief: clamp(disbelief),
            uncertainty: clamp(uncertainty),
            base_rate: clamp(base_rate),
        })
    }

    /// The opinion carrying no evidence at all.
    pub fn vacuous(base_rate: f64) -> Self {
        Self {
            belief: 0.0,
            disbelief: 0.0,
            uncertainty: 1.0,
            base_rate: base_rate.clamp(0.0, 1.0),
        }
    }

    pub fn belief(&self) -> f64 {
        self.belief
    }

    pub fn disbelief(&self) -> f64 {
        self.disbelief
    }

    pub fn uncertainty(&self) -> f64 {
        self.uncertainty
    }

    pub fn base_rate(&self) -> f64 {
        self.base_rate
    }

    /// Projected probability `b + u·a`, used as the reputation value.
    pub fn reputation_value(&self) -> f64 {
        self.belief + self.uncertainty * self.base_rate
    }

    /// Maps `positive` and `negative` outcome counts to an opinion using
    /// evidence weight [`EVIDENCE_PRIOR_WEIGHT`].
    pub fn from_evidence(positive: f64, negative: f64, base_rate: f64) -> Self {
        let positive = positive.max(0.0);
        let negative = negative.max(0.0);
        let total = positive + negative + EVIDENCE_PRIOR_WEIGHT;
        Self {
            belief: positive / total,
            disbelief: negative / total,
            uncertainty: EVIDENCE_PRIOR_WEIGHT / total,
            base_rate: base_rate.clamp(0.0, 1.0),
        }
    }

    /// Consensus fusion `self ⊕ other`. The fused base rate is `self`'s.
    pub fn fuse(&self, other: &Opinion) -> Result<Opinion, ReputationError> {
        let (u1, u2) = (self.uncertainty, other.uncertainty);
        let denom = u1 + u2 - u1 * u2;
        if denom <= 0.0 {
            return Err(ReputationError::DogmaticFusion);
        }
        let belief = (self.belief * u2 + other.belief * u1) / denom;
        let disbelief = (self.disbelief * u2 + other.disbelief * u1) / denom;
        let uncertainty = (u1 * u2) / denom;
        Ok(renormalized(belief, disbelief, uncertainty, self.base_rate))
    }
}

/// Local opinion from an interaction history summarised as outcome counts.
pub fn local_opinion(positive: u64, negative: u64, base_rate: f64) -> Opinion {
    Opinion::from_evidence(positive as f64, negative as f64, base_rate)
}

pub fn reputation_value(opinion: &Opinion) -> f64 {
    opinion.reputation_value()
}

/// Weighted average of recommender opinions.
///
/// Belief, disbelief, uncertainty and base rate are each averaged with the
/// supplied weights. Zero-weight entries contribute nothing.
pub fn synthesize_recommended(opinions: &[(f64, Opinion)]) -> Result<Opinion, ReputationError> {
    if opinions.is_empty() {
        return Err(ReputationError::NoRecommenders);
    }
    let mut total = 0.0;
    let (mut b, mut d, mut u, mut a) = (0.0, 0.0, 0.0, 0.0);
    for (w, o) in opinions {
        if !w.is_finite() || *w < 0.0 {
            return Err(ReputationError::InvalidWeight(*w));
        }
        total += w;
        b += w * o.belief;
        d += w * o.disbelief;
        u += w * o.uncertainty;
        a += w * o.base_rate;
    }
    if total <= 0.0 {
        return Err(ReputationError::ZeroTotalWeight);
    }
    Ok(renormalized(b / total, d / total, u / total, a / total))
}

pub fn fuse_final(local: &Opinion, synthetic: &Opinion) -> Result<Opinion, ReputationError> {
    local.fuse(synthetic)
}

/// Arithmetic mean of final reputation values from `M` raters.
pub fn average_final_reputation(finals: &[f64]) -> Result<f64, ReputationError> {
    if finals.is_empty() {
        return Err(ReputationError::NoRaters);
    }
    Ok(finals.iter().sum::<f64>() / finals.len() as f64)
}

/// Smoothing factor of the linear reputation baseline.
pub const LINEAR_BASELINE_SMOOTHING: f64 = 0.2;
/// Starting value of the linear reputation baseline.
pub const LINEAR_BASELINE_INITIAL: f64 = 0.5;

/// Exponential moving average of outcome indicators in `[0, 1]`.
pub fn linear_reputation_baseline<I>(indicators: I) -> f64
where
    I: IntoIterator<Item = f64>,
{
    indicators.into_iter().fold(LINEAR_BASELINE_INITIAL, |acc, x| {
        acc + LINEAR_BASELINE_SMOOTHING * (x.clamp(0.0, 1.0) - acc)
    })
}

// Rounding can leave the mass a few ulps away from one; push it back.
fn renormalized(belief: f64, disbelief: f64, uncertainty: f64, base_rate: f64) -> Opinion {
    let (b, d, u) = (belief.max(0.0), disbelief.max(0.0), uncertainty.max(0.0));
    let s = b + d + u;
    Opinion {
        belief: b / s,
        disbelief: d / s,
        uncertainty: u / s,
        base_rate: base_rate.clamp(0.0, 1.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn op(b: f64, d: f64, u: f64) -> Opinion {
        Opinion::new(b, d, u, 0.5).unwrap()
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn evidence_mapping() {
        let o = local_opinion(0, 0, 0.5);
        assert_eq!((o.belief(), o.disbelief(), o.uncertainty()), (0.0, 0.0, 1.0));
        let o = local_opinion(8, 0, 0.5);
        assert!(close(o.belief(), 0.8) && close(o.disbelief(), 0.0) && close(o.uncertainty(), 0.2));
        let o = local_opinion(4, 4, 0.5);
        assert!(close(o.belief(), 0.4) && close(o.disbelief(), 0.4) && close(o.uncertainty(), 0.2));
    }

    #[test]
    fn projected_value() {
        assert!(close(Opinion::new(1.0, 0.0, 0.0, 0.5).unwrap().reputation_value(), 1.0));
        assert!(close(Opinion::vacuous(0.5).reputation_value(), 0.5));
        assert!(close(op(0.5, 0.3, 0.2).reputation_value(), 0.6));
    }

    #[test]
    fn rejects_bad_mass() {
        assert!(Opinion::new(0.5, 0.5, 0.5, 0.5).is_err());
        assert!(Opinion::new(-0.1, 0.6, 0.5, 0.5).is_err());
        assert!(Opinion::new(0.5, 0.3, 0.2, 1.5).is_err());
    }

    #[test]
    fn synthesis() {
        let single = op(0.6, 0.2, 0.2);
        let s = synthesize_recommended(&[(3.0, single)]).unwrap();
        assert!(close(s.belief(), 0.6) && close(s.disbelief(), 0.2) && close(s.uncertainty(), 0.2));

        let s = synthesize_recommended(&[(1.0, op(0.6, 0.2, 0.2)), (1.0, op(0.4, 0.4, 0.2))]).unwrap();
        assert!(close(s.belief(), 0.5) && close(s.disbelief(), 0.3) && close(s.uncertainty(), 0.2));

        let s = synthesize_recommended(&[(2.0, op(0.6, 0.2, 0.2)), (0.0, op(0.0, 1.0, 0.0))]).unwrap();
        assert!(close(s.belief(), 0.6) && close(s.disbelief(), 0.2));

        assert!(matches!(synthesize_recommended(&[]), Err(ReputationError::NoRecommenders)));
        assert!(matches!(
            synthesize_recommended(&[(0.0, single)]),
            Err(ReputationError::ZeroTotalWeight)
        ));
    }

    #[test]
    fn synthesis_averages_base_rates() {
        let a = Opinion::new(0.2, 0.2, 0.6, 0.2).unwrap();
        let b = Opinion::new(0.2, 0.2, 0.6, 0.8).unwrap();
        let s = synthesize_recommended(&[(1.0, a), (3.0, b)]).unwrap();
        assert!(close(s.base_rate(), 0.65));
    }

    #[test]
    fn fusion_values() {
        let fin = fuse_final(&op(0.6, 0.2, 0.2), &op(0.5, 0.3, 0.2)).unwrap();
        assert!((fin.belief() - 0.22 / 0.36).abs() < 1e-12);
        assert!((fin.disbelief() - 0.10 / 0.36).abs() < 1e-12);
        assert!((fin.uncertainty() - 0.04 / 0.36).abs() < 1e-12);

        let local = op(0.6, 0.2, 0.2);
        let vac = Opinion::vacuous(0.5);
        let same = fuse_final(&local, &vac).unwrap();
        assert!(close(same.belief(), 0.6) && close(same.disbelief(), 0.2) && close(same.uncertainty(), 0.2));
        let rev = fuse_final(&vac, &local).unwrap();
        assert!(close(rev.belief(), local.belief()) && close(rev.uncertainty(), local.uncertainty()));
    }

    #[test]
    fn dogmatic_fusion_is_an_error() {
        let a = op(1.0, 0.0, 0.0);
        let b = op(0.0, 1.0, 0.0);
        assert!(matches!(a.fuse(&b), Err(ReputationError::DogmaticFusion)));
    }

    #[test]
    fn averages() {
        assert!(close(average_final_reputation(&[0.5]).unwrap(), 0.5));
        assert!(close(average_final_reputation(&[0.2, 0.4, 0.6]).unwrap(), 0.4));
        assert!(average_final_reputation(&[]).is_err());
    }

    #[test]
    fn linear_baseline() {
        assert!(close(linear_reputation_baseline(std::iter::empty()), 0.5));
        assert!(close(linear_reputation_baseline([1.0]), 0.6));
        let long = linear_reputation_baseline(std::iter::repeat_n(1.0, 500));
        assert!((long - 1.0).abs() < 1e-12);
    }
}
