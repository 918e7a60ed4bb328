//! Experiment configuration, scenario runners and CSV output.
//!
//! Each scenario produces one [`ResultTable`] whose rows depend only on the
//! normalized [`ExperimentConfig`] and its seed.

mod config;
mod scenarios;
mod table;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use thiserror::Error;

pub use config::{validate_config, Diagnostic, ExperimentConfig, PopulationSpec, ReputationSpec, SimulationParams};
pub use scenarios::{detection_runs, run_scenario, solve_compared, ParkingData, SELECTION_TIE};
pub use table::{cell, Provenance, ResultTable};

use crate::consensus::ConsensusError;
use crate::contract::ContractError;
use crate::parking::ParkingError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scenario {
    ArrivalHistogram,
    ReputationDecay,
    DetectionRate,
    Collusion,
    ContractFeasibility,
    UtilityVsHour,
    UtilityVsType,
}

impl Scenario {
    pub const ALL: [Scenario; 7] = [
        Scenario::ArrivalHistogram,
        Scenario::ReputationDecay,
        Scenario::DetectionRate,
        Scenario::Collusion,
        Scenario::ContractFeasibility,
        Scenario::UtilityVsHour,
        Scenario::UtilityVsType,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::ArrivalHistogram => "arrival-histogram",
            Scenario::ReputationDecay => "reputation-decay",
            Scenario::DetectionRate => "detection-rate",
            Scenario::Collusion => "collusion",
            Scenario::ContractFeasibility => "contract-feasibility",
            Scenario::UtilityVsHour => "utility-vs-hour",
            Scenario::UtilityVsType => "utility-vs-type",
        }
    }

    /// CSV column schema.
    ///
    /// * `arrival-histogram`: 24 rows, one per arrival hour.
    /// * `reputation-decay`: mean, min and max reputation of the misbehaving
    ///   nodes per onset, scheme and slot.
    /// * `detection-rate`: mean detection rate and the share of seeds fully
    ///   detected by each slot, per threshold and scheme.
    /// * `collusion`: correct-verdict probability and mean committee
    ///   composition per threshold and scheme.
    /// * `contract-feasibility`: utility of every type for every item of the
    ///   LIA and LA menus; `best_item` marks the type's choice.
    /// * `utility-vs-hour`: 24 rows of expected SR and PV utility per scheme.
    /// * `utility-vs-type`: one row per type with the SR utility from that
    ///   type and the type's own utility, per scheme.
    pub fn columns(self) -> &'static [&'static str] {
        const UTILITY: [&str; 10] = [
            "sr_LC", "sr_LIA", "sr_LA", "sr_SA", "sr_linear", "pv_LC", "pv_LIA", "pv_LA", "pv_SA", "pv_linear",
        ];
        match self {
            Scenario::ArrivalHistogram => &["hour", "arrivals", "share", "mean_duration_hours"],
            Scenario::ReputationDecay => {
                &["onset", "scheme", "slot", "mean_reputation", "min_reputation", "max_reputation"]
            }
            Scenario::DetectionRate => &["threshold", "scheme", "slot", "detection_rate", "fully_detected_share"],
            Scenario::Collusion => &["threshold", "scheme", "correct_probability", "mean_committee", "mean_colluders"],
            Scenario::ContractFeasibility => {
                &["scheme", "type", "item", "f_hz", "reward", "pv_utility", "own_item", "best_item"]
            }
            Scenario::UtilityVsHour => {
                const C: [&str; 12] = [
                    "hour", "types", UTILITY[0], UTILITY[1], UTILITY[2], UTILITY[3], UTILITY[4], UTILITY[5],
                    UTILITY[6], UTILITY[7], UTILITY[8], UTILITY[9],
                ];
                &C
            }
            Scenario::UtilityVsType => {
                const C: [&str; 13] = [
                    "type", "theta", "beta", UTILITY[0], UTILITY[1], UTILITY[2], UTILITY[3], UTILITY[4], UTILITY[5],
                    UTILITY[6], UTILITY[7], UTILITY[8], UTILITY[9],
                ];
                &C
            }
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| HarnessError::UnknownScenario(s.to_string()))
    }
}

fn join(d: &[Diagnostic]) -> String {
    d.iter().map(Diagnostic::to_string).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {}", join(.0))]
    Config(Vec<Diagnostic>),
    #[error("cannot read {}: {source}", path.display())]
    Read { path: PathBuf, source: std::io::Error },
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
    #[error(transparent)]
    Solver(#[from] ContractError),
    #[error(transparent)]
    Parking(#[from] ParkingError),
    #[error(transparent)]
    Consensus(#[from] ConsensusError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("CSV: {0}")]
    Csv(#[from] csv::Error),
}
