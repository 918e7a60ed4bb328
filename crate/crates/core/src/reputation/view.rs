//! Multi-weight reputation snapshots computed from an [`InteractionLog`].

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::history::{InteractionLog, SlotCounts};
use super::opinion::{
    average_final_reputation, fuse_final, linear_reputation_baseline, local_opinion, synthesize_recommended, Opinion,
};
use super::weights::{familiarity_weight, overall_weight, similarity_weight, timeliness_weight_clamped, WeightConfig};
use super::ReputationError;
use crate::ids::NodeId;

/// Which reputation scheme produces the averaged values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ReputationScheme {
    /// Multi-weight subjective logic.
    SubjectiveLogic,
    /// Exponential-moving-average baseline.
    Linear,
}

impl ReputationScheme {
    pub fn tag(&self) -> &'static str {
        match self {
            ReputationScheme::SubjectiveLogic => "SL",
            ReputationScheme::Linear => "LR",
        }
    }
}

/// Immutable reputation snapshot at one slot.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ReputationView {
    pub slot: u64,
    /// Local opinions keyed by (rater, target).
    pub local: BTreeMap<(NodeId, NodeId), Opinion>,
    /// Recommended (synthetic) opinion about each target.
    pub synthetic: BTreeMap<NodeId, Opinion>,
    /// Final fused opinions keyed by (rater, target).
    pub fin: BTreeMap<(NodeId, NodeId), Opinion>,
    /// Final reputation values keyed by (rater, target).
    pub values: BTreeMap<(NodeId, NodeId), f64>,
    /// Average final reputation of each target over its raters.
    pub averaged: BTreeMap<NodeId, f64>,
}

/// Evaluator for the multi-weight subjective-logic model.
#[derive(Debug, Clone)]
pub struct ReputationModel {
    pub weights: WeightConfig,
    pub base_rate: f64,
    arrivals: BTreeMap<NodeId, f64>,
}

impl ReputationModel {
    pub fn new(weights: WeightConfig, base_rate: f64) -> Result<Self, ReputationError> {
        weights.validate()?;
        if !(0.0..=1.0).contains(&base_rate) {
            return Err(ReputationError::InvalidBaseRate(base_rate));
        }
        Ok(Self { weights, base_rate, arrivals: BTreeMap::new() })
    }

    /// Registers the parking arrival hour used by the similarity weight.
    pub fn with_arrival(mut self, node: NodeId, arrival_hour: f64) -> Self {
        self.arrivals.insert(node, arrival_hour);
        self
    }

    pub fn set_arrivals(&mut self, arrivals: impl IntoIterator<Item = (NodeId, f64)>) {
        self.arrivals.extend(arrivals);
    }

    fn similarity(&self, a: NodeId, b: NodeId) -> f64 {
        match (self.arrivals.get(&a), self.arrivals.get(&b)) {
            (Some(x), Some(y)) => similarity_weight(*x, *y),
            _ => 1.0,
        }
    }

    fn familiarity(&self, log: &InteractionLog, rater: NodeId, target: NodeId) -> f64 {
        let Some(peers) = log.peer_counts(rater) else { return 0.0 };
        let counts: Vec<f64> = peers.values().map(|&c| c as f64).collect();
        familiarity_weight(log.pair_count(rater, target) as f64, &counts).unwrap_or(0.0)
    }

    /// Weighted per-slot segments of one rater about one target, up to `now`.
    fn segments(
        &self,
        log: &InteractionLog,
        rater: NodeId,
        target: NodeId,
        slots: &BTreeMap<u64, SlotCounts>,
        now: u64,
        out: &mut Vec<(f64, Opinion)>,
    ) {
        let x = self.familiarity(log, rater, target);
        let z = self.similarity(rater, target);
        for (&slot, counts) in slots.range(..=now) {
            if counts.total() == 0 {
                continue;
            }
            let y = timeliness_weight_clamped(now, slot, &self.weights);
            let w = overall_weight(x, y, z, &self.weights);
            out.push((w, local_opinion(counts.positive, counts.negative, self.base_rate)));
        }
    }

    /// Evaluates the model for `targets` (all known targets when `None`).
    pub fn evaluate(
        &self,
        log: &InteractionLog,
        now: u64,
        targets: Option<&[NodeId]>,
    ) -> Result<ReputationView, ReputationError> {
        let targets: Vec<NodeId> = match targets {
            Some(t) => t.to_vec(),
            None => log.targets().collect(),
        };
        let mut view = ReputationView { slot: now, ..Default::default() };
        let mut own = Vec::new();
        let mut all = Vec::new();
        for target in targets {
            let Some(raters) = log.about(target) else {
                view.averaged.insert(target, Opinion::vacuous(self.base_rate).reputation_value());
                continue;
            };
            all.clear();
            let mut locals = Vec::with_capacity(raters.len());
            for (&rater, slots) in raters {
                own.clear();
                self.segments(log, rater, target, slots, now, &mut own);
                if own.is_empty() {
                    continue;
                }
                let local = synthesize_recommended(&own).unwrap_or_else(|_| Opinion::vacuous(self.base_rate));
                locals.push((rater, local));
                all.extend_from_slice(&own);
            }
            let synthetic = if all.is_empty() {
                Opinion::vacuous(self.base_rate)
            } else {
                synthesize_recommended(&all).unwrap_or_else(|_| Opinion::vacuous(self.base_rate))
            };
            view.synthetic.insert(target, synthetic);
            let mut finals = Vec::with_capacity(locals.len());
            for (rater, local) in locals {
                let fin = fuse_final(&local, &synthetic)?;
                let g = fin.reputation_value();
                view.local.insert((rater, target), local);
                view.fin.insert((rater, target), fin);
                view.values.insert((rater, target), g);
                finals.push(g);
            }
            let avg = if finals.is_empty() {
                synthetic.reputation_value()
            } else {
                average_final_reputation(&finals)?
            };
            view.averaged.insert(target, avg);
        }
        Ok(view)
    }
}

/// Averaged linear-baseline reputation of each target at `now`.
///
/// Each rater keeps a moving average over its per-slot positive fractions;
/// the target's value is the mean over raters.
pub fn linear_baseline_view(log: &InteractionLog, now: u64, targets: &[NodeId]) -> BTreeMap<NodeId, f64> {
    let mut out = BTreeMap::new();
    for &target in targets {
        let values: Vec<f64> = log
            .about(target)
            .map(|raters| {
                raters
                    .values()
                    .map(|slots| linear_reputation_baseline(slots.range(..=now).filter_map(|(_, c)| c.positive_fraction())))
                    .collect()
            })
            .unwrap_or_default();
        let v = average_final_reputation(&values).unwrap_or(super::opinion::LINEAR_BASELINE_INITIAL);
        out.insert(target, v);
    }
    out
}

/// Averaged reputation of `targets` under `scheme`.
pub fn averaged_reputation(
    scheme: ReputationScheme,
    model: &ReputationModel,
    log: &InteractionLog,
    now: u64,
    targets: &[NodeId],
) -> Result<BTreeMap<NodeId, f64>, ReputationError> {
    match scheme {
        ReputationScheme::SubjectiveLogic => Ok(model.evaluate(log, now, Some(targets))?.averaged),
        ReputationScheme::Linear => Ok(linear_baseline_view(log, now, targets)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> ReputationModel {
        ReputationModel::new(WeightConfig::default(), 0.5).unwrap()
    }

    #[test]
    fn unknown_target_gets_base_rate() {
        let log = InteractionLog::new();
        let view = model().evaluate(&log, 3, Some(&[NodeId(9)])).unwrap();
        assert_eq!(view.averaged[&NodeId(9)], 0.5);
    }

    #[test]
    fn single_rater_single_slot() {
        let mut log = InteractionLog::new();
        log.record_counts(1, NodeId(1), NodeId(2), 8, 0).unwrap();
        let view = model().evaluate(&log, 1, None).unwrap();
        let local = view.local[&(NodeId(1), NodeId(2))];
        assert!((local.belief() - 0.8).abs() < 1e-12);
        // Local and synthetic coincide; fusion halves the uncertainty mass ratio.
        let fin = view.fin[&(NodeId(1), NodeId(2))];
        assert!((fin.uncertainty() - 0.04 / 0.36).abs() < 1e-12);
        for o in view.fin.values().chain(view.local.values()) {
            assert!((o.belief() + o.disbelief() + o.uncertainty() - 1.0).abs() < 1e-9);
        }
        let g = view.averaged[&NodeId(2)];
        assert!((g - (fin.belief() + fin.uncertainty() * 0.5)).abs() < 1e-12);
    }

    #[test]
    fn recent_segments_dominate() {
        let mut log = InteractionLog::new();
        for slot in 1..=5 {
            log.record_counts(slot, NodeId(1), NodeId(2), 8, 0).unwrap();
        }
        log.record_counts(6, NodeId(1), NodeId(2), 0, 8).unwrap();
        let decaying = model().evaluate(&log, 6, None).unwrap().averaged[&NodeId(2)];
        let flat_cfg = WeightConfig::new([0.3, 0.4, 0.3], 10.0, 0.0).unwrap();
        let flat = ReputationModel::new(flat_cfg, 0.5).unwrap().evaluate(&log, 6, None).unwrap().averaged[&NodeId(2)];
        assert!(decaying < flat - 0.05, "{decaying} vs {flat}");
    }

    #[test]
    fn future_records_are_ignored() {
        let mut log = InteractionLog::new();
        log.record_counts(1, NodeId(1), NodeId(2), 5, 0).unwrap();
        let before = model().evaluate(&log, 1, None).unwrap().averaged[&NodeId(2)];
        log.record_counts(4, NodeId(1), NodeId(2), 0, 9).unwrap();
        let after = model().evaluate(&log, 1, None).unwrap().averaged[&NodeId(2)];
        assert_eq!(before, after);
    }

    #[test]
    fn linear_baseline_is_per_slot() {
        let mut log = InteractionLog::new();
        log.record_counts(1, NodeId(1), NodeId(2), 3, 1).unwrap();
        let v = linear_baseline_view(&log, 1, &[NodeId(2)]);
        assert!((v[&NodeId(2)] - (0.5 + 0.2 * (0.75 - 0.5))).abs() < 1e-12);
        assert_eq!(linear_baseline_view(&log, 1, &[NodeId(7)])[&NodeId(7)], 0.5);
    }
}
