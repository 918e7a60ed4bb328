//! Accounts, escrowed smart-contract records and a hash-chained block store.
//!
//! Every mutation is a [`Transaction`] applied in order, so replaying the
//! transactions of a dump rebuilds the same state.

mod block;
mod encode;
mod record;
mod state;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::Digest;

pub use block::{Block, QuorumEvidence};
pub use record::{items_from_menu, ContractItem, ContractState, RequestSpec, SmartContractRecord, Verdict};
pub use state::{Account, Ledger, Transaction, INITIAL_REPUTATION};

/// Integer reward units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Amount(pub u64);

impl Amount {
    pub const ZERO: Amount = Amount(0);

    pub fn checked_add(self, other: Amount) -> Result<Amount, LedgerError> {
        self.0.checked_add(other.0).map(Amount).ok_or(LedgerError::Overflow)
    }

    pub fn checked_sub(self, other: Amount) -> Result<Amount, LedgerError> {
        self.0
            .checked_sub(other.0)
            .map(Amount)
            .ok_or(LedgerError::InsufficientFunds { needed: other, available: self })
    }
}

impl fmt::Display for Amount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Account or contract address.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Address(pub Digest);

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x{}", &self.0.to_hex()[..40])
    }
}

#[derive(Debug, Error)]
pub enum LedgerError {
    #[error("identity {0:?} is already registered")]
    DuplicateIdentity(String),
    #[error("unknown account {0}")]
    UnknownAccount(Address),
    #[error("unknown contract {0}")]
    UnknownContract(Address),
    #[error("insufficient funds: need {needed}, have {available}")]
    InsufficientFunds { needed: Amount, available: Amount },
    #[error("contract menu is empty")]
    EmptyMenu,
    #[error("menu item {index} does not exist (menu has {len})")]
    InvalidItem { index: usize, len: usize },
    #[error("contract {contract} is {found:?}, expected {expected:?}")]
    WrongState { contract: Address, expected: ContractState, found: ContractState },
    #[error("the service requester cannot serve its own contract")]
    SelfDealing,
    #[error("amount overflow")]
    Overflow,
    #[error("quorum evidence has {have} valid votes, {need} required")]
    MissingQuorum { have: usize, need: usize },
    #[error("no pending transactions to seal")]
    NothingToSeal,
    #[error("chain broken at height {height}: {reason}")]
    ChainBroken { height: u64, reason: String },
    #[error("dump line {line}: {message}")]
    Dump { line: usize, message: String },
    #[error(transparent)]
    Consensus(#[from] crate::consensus::ConsensusError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
