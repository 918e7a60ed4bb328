//! Multi-weight subjective-logic reputation.
//!
//! Raters form one opinion per (target, slot) segment from outcome counts.
//! Segments are weighted by familiarity, timeliness and arrival-time
//! similarity; a rater's own segments give its local opinion and all raters'
//! segments give the recommended opinion. The two are combined with the
//! consensus operator and projected to a value `b + u·a`.

mod history;
mod opinion;
mod view;
mod weights;

use thiserror::Error;

use crate::ids::NodeId;

pub use history::{InteractionLog, InteractionRecord, SlotCounts};
pub use opinion::{
    average_final_reputation, fuse_final, linear_reputation_baseline, local_opinion, reputation_value,
    synthesize_recommended, Opinion, EVIDENCE_PRIOR_WEIGHT, LINEAR_BASELINE_INITIAL, LINEAR_BASELINE_SMOOTHING,
    MASS_TOLERANCE,
};
pub use view::{averaged_reputation, linear_baseline_view, ReputationModel, ReputationScheme, ReputationView};
pub use weights::{
    familiarity_weight, overall_weight, similarity_weight, timeliness_weight, timeliness_weight_clamped, WeightConfig,
};

#[derive(Debug, Error)]
pub enum ReputationError {
    #[error("invalid opinion (b={belief}, d={disbelief}, u={uncertainty}, a={base_rate})")]
    InvalidOpinion {
        belief: f64,
        disbelief: f64,
        uncertainty: f64,
        base_rate: f64,
    },
    #[error("base rate {0} outside [0, 1]")]
    InvalidBaseRate(f64),
    #[error("invalid weight configuration: {0}")]
    InvalidWeights(String),
    #[error("weight {0} must be finite and nonnegative")]
    InvalidWeight(f64),
    #[error("no recommender opinions to synthesize")]
    NoRecommenders,
    #[error("recommender weights sum to zero")]
    ZeroTotalWeight,
    #[error("both opinions are dogmatic (u = 0); consensus fusion is undefined")]
    DogmaticFusion,
    #[error("no raters to average")]
    NoRaters,
    #[error("peer interaction counts are all zero")]
    NoInteractionHistory,
    #[error("opinion slot {opinion_slot} is not before the current slot {now}")]
    OpinionNotInPast { now: u64, opinion_slot: u64 },
    #[error("node {0} cannot rate itself")]
    SelfRating(NodeId),
    #[error("interaction CSV row {row}: {message}")]
    Csv { row: usize, message: String },
}
