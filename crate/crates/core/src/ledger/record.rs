use serde::{Deserialize, Serialize};

use super::{Address, Amount};
use crate::contract::ContractMenu;
use crate::crypto::Digest;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ContractState {
    Deployed,
    Signed,
    Executing,
    ResultSubmitted,
    Verified,
    Paid,
    Refunded,
    Confiscated,
}

impl ContractState {
    pub fn is_final(self) -> bool {
        matches!(self, ContractState::Paid | ContractState::Refunded | ContractState::Confiscated)
    }

    /// Whether `self → next` is a legal step.
    pub fn can_move_to(self, next: ContractState) -> bool {
        use ContractState::*;
        matches!(
            (self, next),
            (Deployed, Signed)
                | (Signed, Executing)
                | (Executing, ResultSubmitted)
                | (Executing, Confiscated)
                | (ResultSubmitted, Verified)
                | (ResultSubmitted, Refunded)
                | (Verified, Paid)
        )
    }
}

/// What the requester asks for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RequestSpec {
    pub task_bits: u64,
    pub required_hz: u64,
    pub serving_secs: u64,
}

/// One `(resource, reward)` pair in integer units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContractItem {
    pub f_hz: u64,
    pub reward: Amount,
}

/// Converts a solved menu to integer units, with `units_per_reward` units per
/// unit of reward.
pub fn items_from_menu(menu: &ContractMenu, units_per_reward: f64) -> Vec<ContractItem> {
    menu.items
        .iter()
        .map(|it| ContractItem {
            f_hz: it.f.max(0.0).round() as u64,
            reward: Amount((it.pi.max(0.0) * units_per_reward).round() as u64),
        })
        .collect()
}

/// Consensus verdict on a submitted result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub pass: bool,
    /// The requester was found to act fraudulently; its deposit is forfeited.
    pub requester_fraud: bool,
}

impl Verdict {
    pub const PASS: Verdict = Verdict { pass: true, requester_fraud: false };
    pub const FAIL: Verdict = Verdict { pass: false, requester_fraud: false };
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmartContractRecord {
    pub address: Address,
    pub requester: Address,
    pub server: Option<Address>,
    pub spec: RequestSpec,
    pub menu: Vec<ContractItem>,
    pub chosen: Option<usize>,
    pub requester_deposit: Amount,
    pub server_deposit: Amount,
    /// Funds currently held by the contract address.
    pub escrow: Amount,
    pub result: Option<Digest>,
    pub state: ContractState,
    /// Every state entered, with the ledger sequence number at entry.
    pub history: Vec<(ContractState, u64)>,
}

impl SmartContractRecord {
    pub fn max_reward(&self) -> Amount {
        self.menu.iter().map(|i| i.reward).max().unwrap_or(Amount::ZERO)
    }

    pub fn chosen_item(&self) -> Option<ContractItem> {
        self.chosen.map(|j| self.menu[j])
    }

    pub fn passed_through(&self, state: ContractState) -> bool {
        self.history.iter().any(|(s, _)| *s == state)
    }

    /// Whether every recorded step was legal.
    pub fn history_is_valid(&self) -> bool {
        self.history.first().is_some_and(|(s, _)| *s == ContractState::Deployed)
            && self.history.windows(2).all(|w| w[0].0.can_move_to(w[1].0) && w[0].1 <= w[1].1)
            && self.history.last().is_some_and(|(s, _)| *s == self.state)
    }
}
