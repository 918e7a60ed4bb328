//! Parked-vehicle edge computing on a permissioned blockchain.
//!
//! * [`reputation`]: multi-weight subjective-logic reputation scoring.
//! * [`parking`]: dual-Gamma parking-duration model and PV type profiles.
//! * [`contract`]: screening-contract utilities, solvers and baselines.
//! * [`consensus`]: reputation-gated DBFT simulation with fault injection.
//! * [`ledger`]: accounts, escrow and the resource-sharing contract lifecycle.
//! * [`harness`]: experiment configuration and scenario runners.

pub mod consensus;
pub mod contract;
pub mod crypto;
pub mod harness;
pub mod ids;
pub mod ledger;
pub mod numeric;
pub mod parking;
pub mod reputation;
pub mod rng;

pub use ids::NodeId;
