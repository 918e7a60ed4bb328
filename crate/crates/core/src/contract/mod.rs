//! Screening contracts between a service requester and parked vehicles.
//!
//! The SR offers a menu of (frequency, reward) items; each PV type picks the
//! item that maximizes its own utility. Solvers cover the complete-information
//! benchmark, a sequential local optimum, a Lagrangian search with ironing,
//! two single-price comparison schemes and an exhaustive grid oracle.

mod baselines;
mod menu;
mod oracle;
mod params;
mod solve;

use thiserror::Error;

pub use baselines::{best_response, linear_price, linear_pricing_baseline, stackelberg_baseline, stackelberg_price};
pub use menu::{
    check_feasibility, preferred_item, sr_expected_utility, ContractMenu, FeasibilityReport, LagrangianState, MenuItem,
    Scheme,
};
pub use oracle::{default_grids, grid_oracle, one_cell_bound, MAX_GRID_POINTS, MAX_ORACLE_TYPES};
pub use params::{energy_cost, pv_utility, sr_term, time_saved, ContractProblem, TaskParams, Valuation};
pub use solve::{
    rewards_for, solve_complete_info, solve_lagrangian_iterative, solve_local_asymmetric, DEFAULT_STEPS, REWARD_CAP,
};

#[derive(Debug, Error)]
pub enum ContractError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("contributed frequency must be positive, got {0}")]
    NonPositiveResource(f64),
    #[error("{scheme} solver: no root bracket for type {}: {detail}", type_index + 1)]
    NoBracket { scheme: Scheme, type_index: usize, detail: String },
    #[error("no feasible candidate with {steps} steps: {detail}")]
    NoFeasibleCandidate { steps: usize, detail: String },
    #[error("grid oracle supports at most {max} types, got {n}")]
    TooManyTypes { n: usize, max: usize },
    #[error("problem file: {0}")]
    Parse(String),
    #[error("I/O: {0}")]
    Io(String),
}

/// Solves `problem` with the given scheme (the grid oracle is not included).
pub fn solve(problem: &ContractProblem, scheme: Scheme) -> Result<ContractMenu, ContractError> {
    match scheme {
        Scheme::CompleteInfo => solve_complete_info(problem),
        Scheme::Lagrangian => solve_lagrangian_iterative(problem, DEFAULT_STEPS),
        Scheme::LocalAsymmetric => solve_local_asymmetric(problem),
        Scheme::Stackelberg => Ok(stackelberg_baseline(problem)),
        Scheme::LinearPricing => Ok(linear_pricing_baseline(problem)),
        Scheme::GridOracle => {
            let (f, pi) = default_grids(problem, MAX_GRID_POINTS)?;
            grid_oracle(problem, &f, &pi)
        }
    }
}
