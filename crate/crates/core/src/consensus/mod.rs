//! Reputation-gated Byzantine agreement over a deterministic synchronous
//! network, with fault injection and the detection and collusion experiments.

mod config;
mod experiments;
mod message;
mod model_check;
mod node;
mod view;

use thiserror::Error;

pub use config::{AcceptRule, ConsensusConfig};
pub use experiments::{
    collusion_experiment, collusion_trial, detection_experiment, reputation_series, CollusionConfig, CollusionPoint,
    CollusionTrial, DetectionConfig, DetectionSeries, PopulationConfig, ReputationSeries,
};
pub use message::{signing_bytes, KeyRing, MessageKind, NetMessage, SignedVote, Trace, REQUESTER};
pub use model_check::{exhaustive_model_check, ModelCheckReport};
pub use node::{
    assign_roles, inject_behavior, select_consensus_nodes, Behavior, ByzantineStrategy, ConsensusNode,
    CooperationProfile, LeaderChoice, Participant, Role, VoteChoice,
};
pub use view::{
    run_schedule, run_view, AbortReason, Alternative, BlockProposal, ViewInput, ViewOutcome, ViewResult,
};

#[derive(Debug, Error)]
pub enum ConsensusError {
    #[error("invalid consensus configuration: {0}")]
    InvalidConfig(String),
    #[error("population of {population} cannot fill a committee of {n}")]
    PopulationTooSmall { population: usize, n: usize },
    #[error("expected exactly one leader, found {0}")]
    LeaderCount(usize),
    #[error("invalid cooperation profile: {0}")]
    InvalidProfile(String),
    #[error("invalid experiment: {0}")]
    InvalidExperiment(String),
}
