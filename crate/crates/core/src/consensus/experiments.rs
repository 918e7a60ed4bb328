//! Seeded experiments on misbehaviour detection and collusion resistance.

use std::collections::BTreeMap;

use rand::seq::index::sample;
use rayon::prelude::*;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::{AcceptRule, ConsensusConfig};
use super::node::{assign_roles, Behavior, ByzantineStrategy, ConsensusNode, CooperationProfile, Participant};
use super::view::{run_view, BlockProposal, ViewInput, ViewResult};
use super::ConsensusError;
use crate::crypto::Digest;
use crate::ids::NodeId;
use crate::reputation::{averaged_reputation, InteractionLog, ReputationModel, ReputationScheme, WeightConfig};
use crate::rng::{self, streams};

/// Population and behaviour shared by both experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PopulationConfig {
    pub population: usize,
    pub misbehaving: usize,
    /// Cooperation probability of misbehaving nodes up to their onset slot.
    pub cooperation_before: f64,
    /// Cooperation probability of misbehaving nodes after their onset slot.
    pub cooperation_after: f64,
    pub honest_cooperation: f64,
    /// Interactions per ordered pair and slot, drawn uniformly from this range.
    pub interactions_min: u32,
    pub interactions_max: u32,
    pub base_rate: f64,
    pub weights: WeightConfig,
}

impl Default for PopulationConfig {
    fn default() -> Self {
        Self {
            population: 50,
            misbehaving: 10,
            cooperation_before: 0.8,
            cooperation_after: 0.1,
            honest_cooperation: 1.0,
            interactions_min: 5,
            interactions_max: 10,
            base_rate: 0.5,
            weights: WeightConfig::default(),
        }
    }
}

impl PopulationConfig {
    pub fn validate(&self) -> Result<(), ConsensusError> {
        if self.population < 2 {
            return Err(ConsensusError::InvalidExperiment("population needs at least two nodes".into()));
        }
        if self.misbehaving > self.population {
            return Err(ConsensusError::InvalidExperiment(format!(
                "{} misbehaving nodes in a population of {}",
                self.misbehaving, self.population
            )));
        }
        if self.interactions_min == 0 || self.interactions_min > self.interactions_max {
            return Err(ConsensusError::InvalidExperiment(format!(
                "interaction range {}..={} is empty or zero",
                self.interactions_min, self.interactions_max
            )));
        }
        for p in [self.cooperation_before, self.cooperation_after, self.honest_cooperation, self.base_rate] {
            if !(0.0..=1.0).contains(&p) {
                return Err(ConsensusError::InvalidExperiment(format!("probability {p} outside [0, 1]")));
            }
        }
        self.weights.validate().map_err(|e| ConsensusError::InvalidExperiment(e.to_string()))
    }

    fn model(&self, participants: &[Participant]) -> Result<ReputationModel, ConsensusError> {
        let mut model = ReputationModel::new(self.weights, self.base_rate)
            .map_err(|e| ConsensusError::InvalidExperiment(e.to_string()))?;
        model.set_arrivals(participants.iter().map(|p| (p.id, p.arrival_hour)));
        Ok(model)
    }
}

/// A population whose first-drawn `misbehaving` members switch behaviour at
/// their onset slot, which is drawn from `onsets`.
struct Population {
    participants: Vec<Participant>,
    misbehaving: Vec<NodeId>,
}

fn draw_population(cfg: &PopulationConfig, onsets: (u64, u64), seed: u64) -> Result<Population, ConsensusError> {
    let mut r = rng::stream(seed, streams::POPULATION);
    let chosen = sample(&mut r, cfg.population, cfg.misbehaving).into_vec();
    let honest = CooperationProfile::constant(cfg.honest_cooperation)?;
    let mut participants = Vec::with_capacity(cfg.population);
    for i in 0..cfg.population {
        let arrival_hour = r.random_range(0.0..24.0);
        participants.push(Participant { id: NodeId(i as u32), arrival_hour, profile: honest.clone() });
    }
    let mut misbehaving = Vec::with_capacity(chosen.len());
    for i in chosen {
        let onset = r.random_range(onsets.0..=onsets.1);
        let profile = CooperationProfile::switching(cfg.cooperation_before, cfg.cooperation_after, onset)?;
        super::node::inject_behavior(&mut participants[i], profile);
        misbehaving.push(participants[i].id);
    }
    misbehaving.sort();
    Ok(Population { participants, misbehaving })
}

/// Appends one slot of pairwise interactions. Every ordered pair interacts;
/// an interaction is positive when the target behaves correctly.
fn record_slot<R: Rng>(
    log: &mut InteractionLog,
    participants: &[Participant],
    cfg: &PopulationConfig,
    slot: u64,
    r: &mut R,
) -> Result<(), ConsensusError> {
    for rater in participants {
        for target in participants {
            if rater.id == target.id {
                continue;
            }
            let count = r.random_range(cfg.interactions_min..=cfg.interactions_max);
            let positive = (0..count).filter(|_| target.profile.cooperates(slot, r)).count() as u32;
            log.record_counts(slot, rater.id, target.id, positive, count - positive)
                .map_err(|e| ConsensusError::InvalidExperiment(e.to_string()))?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionConfig {
    pub population: PopulationConfig,
    pub threshold: f64,
    pub slots: u64,
    /// Last slot of cooperative-looking behaviour.
    pub onset: u64,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        Self { population: PopulationConfig::default(), threshold: 0.45, slots: 10, onset: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionSeries {
    pub scheme: ReputationScheme,
    /// Detection rate after each slot, starting at slot 1.
    pub rates: Vec<f64>,
    /// First slot from which every misbehaving node stays detected.
    pub full_detection_slot: Option<u64>,
}

/// Averaged reputation of every misbehaving node after each slot.
#[derive(Debug, Clone, PartialEq)]
pub struct ReputationSeries {
    pub scheme: ReputationScheme,
    pub misbehaving: Vec<NodeId>,
    /// One map per slot, starting at slot 1.
    pub slots: Vec<BTreeMap<NodeId, f64>>,
}

impl ReputationSeries {
    /// Fraction of misbehaving nodes below `threshold` after each slot.
    pub fn detection_rates(&self, threshold: f64) -> Vec<f64> {
        self.slots
            .iter()
            .map(|g| {
                if self.misbehaving.is_empty() {
                    0.0
                } else {
                    g.values().filter(|&&v| v < threshold).count() as f64 / self.misbehaving.len() as f64
                }
            })
            .collect()
    }

    pub fn detection(&self, threshold: f64) -> DetectionSeries {
        let rates = self.detection_rates(threshold);
        let full_detection_slot = if self.misbehaving.is_empty() {
            None
        } else {
            let settled = rates.iter().rev().take_while(|&&r| r >= 1.0).count();
            (settled > 0).then(|| (rates.len() - settled) as u64 + 1)
        };
        DetectionSeries { scheme: self.scheme, rates, full_detection_slot }
    }
}

/// Reputation of the misbehaving nodes, slot by slot. The interaction history
/// depends only on `seed`, so both schemes see the same history.
pub fn reputation_series(
    cfg: &DetectionConfig,
    scheme: ReputationScheme,
    seed: u64,
) -> Result<ReputationSeries, ConsensusError> {
    cfg.population.validate()?;
    if cfg.slots == 0 {
        return Err(ConsensusError::InvalidExperiment("at least one slot is required".into()));
    }
    let pop = draw_population(&cfg.population, (cfg.onset, cfg.onset), seed)?;
    let model = cfg.population.model(&pop.participants)?;
    let mut r = rng::stream(seed, streams::INTERACTIONS);
    let mut log = InteractionLog::new();
    let mut slots = Vec::with_capacity(cfg.slots as usize);
    for slot in 1..=cfg.slots {
        record_slot(&mut log, &pop.participants, &cfg.population, slot, &mut r)?;
        let g = if pop.misbehaving.is_empty() {
            BTreeMap::new()
        } else {
            averaged_reputation(scheme, &model, &log, slot, &pop.misbehaving)
                .map_err(|e| ConsensusError::InvalidExperiment(e.to_string()))?
        };
        slots.push(g);
    }
    Ok(ReputationSeries { scheme, misbehaving: pop.misbehaving, slots })
}

/// Fraction of misbehaving nodes whose averaged reputation is below the
/// threshold, per slot.
pub fn detection_experiment(
    cfg: &DetectionConfig,
    scheme: ReputationScheme,
    seed: u64,
) -> Result<DetectionSeries, ConsensusError> {
    Ok(reputation_series(cfg, scheme, seed)?.detection(cfg.threshold))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollusionConfig {
    pub population: PopulationConfig,
    /// Slot at which the committee is selected.
    pub observe_slot: u64,
    pub onset_min: u64,
    pub onset_max: u64,
    pub accept_rule: AcceptRule,
}

impl Default for CollusionConfig {
    fn default() -> Self {
        Self {
            population: PopulationConfig { population: 30, ..PopulationConfig::default() },
            observe_slot: 10,
            onset_min: 5,
            onset_max: 9,
            accept_rule: AcceptRule::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollusionPoint {
    pub threshold: f64,
    pub scheme: ReputationScheme,
    /// Share of seeds whose committee committed the correct verdict.
    pub probability: f64,
    pub mean_committee: f64,
    pub mean_colluders: f64,
}

/// Averaged reputation of every node at the observation slot, under each scheme.
struct CollusionSeed {
    colluders: Vec<NodeId>,
    reputations: BTreeMap<ReputationScheme, BTreeMap<NodeId, f64>>,
}

fn collusion_seed(cfg: &CollusionConfig, seed: u64) -> Result<CollusionSeed, ConsensusError> {
    let pop = draw_population(&cfg.population, (cfg.onset_min, cfg.onset_max), seed)?;
    let model = cfg.population.model(&pop.participants)?;
    let mut r = rng::stream(seed, streams::INTERACTIONS);
    let mut log = InteractionLog::new();
    for slot in 1..=cfg.observe_slot {
        record_slot(&mut log, &pop.participants, &cfg.population, slot, &mut r)?;
    }
    let all: Vec<NodeId> = pop.participants.iter().map(|p| p.id).collect();
    let mut reputations = BTreeMap::new();
    for scheme in [ReputationScheme::SubjectiveLogic, ReputationScheme::Linear] {
        let g = averaged_reputation(scheme, &model, &log, cfg.observe_slot, &all)
            .map_err(|e| ConsensusError::InvalidExperiment(e.to_string()))?;
        reputations.insert(scheme, g);
    }
    Ok(CollusionSeed { colluders: pop.misbehaving, reputations })
}

/// Outcome of one verification round with the committee of every node whose
/// reputation reaches `threshold`. Colluders push the false verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CollusionTrial {
    pub committee: usize,
    pub colluders: usize,
    pub correct: bool,
}

pub fn collusion_trial(
    reputations: &BTreeMap<NodeId, f64>,
    colluders: &[NodeId],
    threshold: f64,
    accept_rule: AcceptRule,
    height: u64,
) -> Result<CollusionTrial, ConsensusError> {
    let eligible: BTreeMap<NodeId, f64> =
        reputations.iter().filter(|(_, g)| **g >= threshold).map(|(k, v)| (*k, *v)).collect();
    let order = super::node::select_consensus_nodes(&eligible, eligible.len())?;
    let in_committee = order.iter().filter(|id| colluders.contains(id)).count();
    if order.len() < 4 {
        return Ok(CollusionTrial { committee: order.len(), colluders: in_committee, correct: false });
    }
    let template = ConsensusConfig { accept_rule, threshold, ..ConsensusConfig::default() };
    let cfg = ConsensusConfig::for_committee(order.len(), &template)?;
    let mut nodes: Vec<ConsensusNode> = order
        .iter()
        .map(|&id| {
            let behavior =
                if colluders.contains(&id) { Behavior::Byzantine(ByzantineStrategy::COLLUDER) } else { Behavior::Honest };
            ConsensusNode::new(id, behavior)
        })
        .collect();
    assign_roles(&mut nodes, 0);
    let proposal = BlockProposal {
        height,
        proposer: order[0],
        transactions: vec![Digest::of(&height.to_be_bytes())],
        valid: true,
    };
    let input = ViewInput::new(0, proposal);
    let out = run_view(&mut nodes, &input, &cfg)?;
    Ok(CollusionTrial {
        committee: order.len(),
        colluders: in_committee,
        correct: out.result == ViewResult::Committed(input.honest_value()),
    })
}

/// Correct-verdict probability per threshold and scheme over `seeds`. Both
/// schemes see the same interaction histories.
pub fn collusion_experiment(
    cfg: &CollusionConfig,
    thresholds: &[f64],
    seeds: &[u64],
) -> Result<Vec<CollusionPoint>, ConsensusError> {
    cfg.population.validate()?;
    if cfg.onset_min > cfg.onset_max {
        return Err(ConsensusError::InvalidExperiment("onset range is empty".into()));
    }
    if seeds.is_empty() {
        return Err(ConsensusError::InvalidExperiment("at least one seed is required".into()));
    }
    let runs: Vec<CollusionSeed> = seeds.par_iter().map(|&s| collusion_seed(cfg, s)).collect::<Result<_, _>>()?;
    let mut out = Vec::new();
    for &threshold in thresholds {
        for scheme in [ReputationScheme::SubjectiveLogic, ReputationScheme::Linear] {
            let (mut correct, mut committee, mut colluders) = (0usize, 0usize, 0usize);
            for (i, run) in runs.iter().enumerate() {
                let t = collusion_trial(&run.reputations[&scheme], &run.colluders, threshold, cfg.accept_rule, i as u64)?;
                correct += usize::from(t.correct);
                committee += t.committee;
                colluders += t.colluders;
            }
            let k = runs.len() as f64;
            out.push(CollusionPoint {
                threshold,
                scheme,
                probability: correct as f64 / k,
                mean_committee: committee as f64 / k,
                mean_colluders: colluders as f64 / k,
            });
        }
    }
    Ok(out)
}
