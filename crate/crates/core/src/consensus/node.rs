use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ConsensusError;
use crate::crypto::Digest;
use crate::ids::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Role {
    Leader,
    Replica,
}

/// Which value a Byzantine node sends in a voting stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VoteChoice {
    /// The honest value.
    Honest,
    /// The adversary's alternative value.
    Alternative,
    Silent,
    /// Honest value to the first half of recipients, alternative to the rest.
    Split,
    /// Honest value with an invalid tag.
    Corrupt,
}

impl VoteChoice {
    pub const ALL: [VoteChoice; 5] =
        [VoteChoice::Honest, VoteChoice::Alternative, VoteChoice::Silent, VoteChoice::Split, VoteChoice::Corrupt];
}

/// What a Byzantine leader sends in the pre-prepare stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LeaderChoice {
    Honest,
    Alternative,
    Silent,
    /// Honest value to the first `k` replicas in rotation order, alternative to the rest.
    Equivocate { first: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ByzantineStrategy {
    pub propose: LeaderChoice,
    pub prepare: VoteChoice,
    pub accept: VoteChoice,
}

impl ByzantineStrategy {
    /// Consistently pushes the alternative value in every stage.
    pub const COLLUDER: ByzantineStrategy = ByzantineStrategy {
        propose: LeaderChoice::Alternative,
        prepare: VoteChoice::Alternative,
        accept: VoteChoice::Alternative,
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Behavior {
    Honest,
    Byzantine(ByzantineStrategy),
    /// Sends nothing.
    Crash,
}

impl Behavior {
    pub fn is_honest(&self) -> bool {
        matches!(self, Behavior::Honest)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsensusNode {
    pub id: NodeId,
    pub role: Role,
    pub behavior: Behavior,
    /// Committed block digests, in height order.
    pub log: Vec<Digest>,
}

impl ConsensusNode {
    pub fn new(id: NodeId, behavior: Behavior) -> Self {
        Self { id, role: Role::Replica, behavior, log: Vec::new() }
    }
}

/// The `n` ids with the highest average reputation, best first; ties go to
/// the lower id. The order is the leader rotation.
pub fn select_consensus_nodes(reputations: &BTreeMap<NodeId, f64>, n: usize) -> Result<Vec<NodeId>, ConsensusError> {
    if reputations.len() < n {
        return Err(ConsensusError::PopulationTooSmall { population: reputations.len(), n });
    }
    let mut ranked: Vec<(NodeId, f64)> = reputations.iter().map(|(k, v)| (*k, *v)).collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(ranked.into_iter().take(n).map(|(id, _)| id).collect())
}

/// Assigns the leader role to `order[view % n]` and replica to the rest.
pub fn assign_roles(nodes: &mut [ConsensusNode], view: u64) {
    let n = nodes.len();
    for (i, node) in nodes.iter_mut().enumerate() {
        node.role = if i == (view as usize) % n { Role::Leader } else { Role::Replica };
    }
}

/// Per-slot probability of carrying out the protocol correctly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CooperationProfile {
    /// `(first slot, probability)` steps in ascending slot order.
    steps: Vec<(u64, f64)>,
}

impl CooperationProfile {
    pub fn constant(p: f64) -> Result<Self, ConsensusError> {
        Self::new(vec![(0, p)])
    }

    /// `before` up to and including `onset`, `after` from the next slot.
    pub fn switching(before: f64, after: f64, onset: u64) -> Result<Self, ConsensusError> {
        Self::new(vec![(0, before), (onset + 1, after)])
    }

    pub fn new(mut steps: Vec<(u64, f64)>) -> Result<Self, ConsensusError> {
        if steps.is_empty() {
            return Err(ConsensusError::InvalidProfile("profile needs at least one step".into()));
        }
        if let Some((_, p)) = steps.iter().find(|(_, p)| !(0.0..=1.0).contains(p)) {
            return Err(ConsensusError::InvalidProfile(format!("probability {p} outside [0, 1]")));
        }
        steps.sort_by_key(|s| s.0);
        Ok(Self { steps })
    }

    pub fn probability(&self, slot: u64) -> f64 {
        self.steps.iter().take_while(|(s, _)| *s <= slot).last().map_or(self.steps[0].1, |s| s.1)
    }

    /// Samples whether one interaction in `slot` is carried out correctly.
    pub fn cooperates<R: Rng + ?Sized>(&self, slot: u64, rng: &mut R) -> bool {
        rng.random::<f64>() < self.probability(slot)
    }
}

/// A population member whose conduct follows a cooperation profile.
#[derive(Debug, Clone, PartialEq)]
pub struct Participant {
    pub id: NodeId,
    pub arrival_hour: f64,
    pub profile: CooperationProfile,
}

/// Replaces the participant's cooperation profile.
pub fn inject_behavior(participant: &mut Participant, profile: CooperationProfile) {
    participant.profile = profile;
}
