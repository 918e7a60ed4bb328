use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::block::{Block, QuorumEvidence};
use super::encode::Encoder;
use super::record::{ContractItem, ContractState, RequestSpec, SmartContractRecord, Verdict};
use super::{Address, Amount, LedgerError};
use crate::consensus::{run_view, BlockProposal, ConsensusConfig, ConsensusNode, KeyRing, MessageKind, Role, ViewInput};
use crate::crypto::{derive_secret, public_handle, Digest};
use crate::ids::NodeId;

/// Reputation of a freshly registered account.
pub const INITIAL_REPUTATION: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Account {
    pub identity: String,
    pub address: Address,
    /// Handle standing in for the public key.
    pub public_key: Digest,
    /// Certificate stub binding the identity to the key.
    pub certificate: Digest,
    pub balance: Amount,
    /// Average final reputation, refreshed from the reputation model.
    pub reputation: f64,
}

/// One ledger mutation. Applying the same sequence to an empty ledger always
/// yields the same state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum Transaction {
    Register { identity: String },
    Mint { account: Address, amount: Amount },
    PostRequest { requester: Address, spec: RequestSpec, menu: Vec<ContractItem>, deposit: Amount },
    Sign { contract: Address, server: Address, item: u64, deposit: Amount },
    Execute { contract: Address, departed: bool },
    Settle { contract: Address, verdict: Verdict },
}

impl Transaction {
    pub fn digest(&self) -> Digest {
        let mut e = Encoder::new("tx");
        match self {
            Transaction::Register { identity } => e.u8(0).str(identity),
            Transaction::Mint { account, amount } => e.u8(1).digest(&account.0).u64(amount.0),
            Transaction::PostRequest { requester, spec, menu, deposit } => {
                e.u8(2).digest(&requester.0).u64(spec.task_bits).u64(spec.required_hz).u64(spec.serving_secs);
                e.u64(menu.len() as u64);
                for it in menu {
                    e.u64(it.f_hz).u64(it.reward.0);
                }
                e.u64(deposit.0)
            }
            Transaction::Sign { contract, server, item, deposit } => {
                e.u8(3).digest(&contract.0).digest(&server.0).u64(*item).u64(deposit.0)
            }
            Transaction::Execute { contract, departed } => e.u8(4).digest(&contract.0).bool(*departed),
            Transaction::Settle { contract, verdict } => {
                e.u8(5).digest(&contract.0).bool(verdict.pass).bool(verdict.requester_fraud)
            }
        };
        e.finish()
    }
}

#[derive(Debug, Clone)]
pub struct Ledger {
    accounts: BTreeMap<Address, Account>,
    identities: BTreeMap<String, Address>,
    contracts: BTreeMap<Address, SmartContractRecord>,
    treasury: Amount,
    minted: Amount,
    sequence: u64,
    contract_count: u64,
    pending: Vec<Transaction>,
    blocks: Vec<Block>,
    quorum: usize,
}

fn credit(balances: &mut BTreeMap<Address, Amount>, who: Address, amount: Amount) -> Result<(), LedgerError> {
    let entry = balances.get_mut(&who).ok_or(LedgerError::UnknownAccount(who))?;
    *entry = entry.checked_add(amount)?;
    Ok(())
}

impl Ledger {
    /// Empty ledger whose blocks need `quorum` accept votes.
    pub fn new(quorum: usize) -> Self {
        Self {
            accounts: BTreeMap::new(),
            identities: BTreeMap::new(),
            contracts: BTreeMap::new(),
            treasury: Amount::ZERO,
            minted: Amount::ZERO,
            sequence: 0,
            contract_count: 0,
            pending: Vec::new(),
            blocks: vec![Block::genesis()],
            quorum: quorum.max(1),
        }
    }

    pub fn for_committee(cfg: &ConsensusConfig) -> Self {
        Self::new(cfg.accept_quorum())
    }

    pub fn account_address(identity: &str) -> Address {
        Address(Encoder::new("account").str(identity).finish())
    }

    pub fn account(&self, address: Address) -> Result<&Account, LedgerError> {
        self.accounts.get(&address).ok_or(LedgerError::UnknownAccount(address))
    }

    pub fn balance(&self, address: Address) -> Result<Amount, LedgerError> {
        Ok(self.account(address)?.balance)
    }

    pub fn accounts(&self) -> impl Iterator<Item = &Account> {
        self.accounts.values()
    }

    pub fn contract(&self, address: Address) -> Result<&SmartContractRecord, LedgerError> {
        self.contracts.get(&address).ok_or(LedgerError::UnknownContract(address))
    }

    pub fn contracts(&self) -> impl Iterator<Item = &SmartContractRecord> {
        self.contracts.values()
    }

    pub fn treasury(&self) -> Amount {
        self.treasury
    }

    pub fn minted(&self) -> Amount {
        self.minted
    }

    /// Balances plus escrows plus forfeited deposits.
    pub fn total_funds(&self) -> u128 {
        let balances: u128 = self.accounts.values().map(|a| a.balance.0 as u128).sum();
        let escrow: u128 = self.contracts.values().map(|c| c.escrow.0 as u128).sum();
        balances + escrow + self.treasury.0 as u128
    }

    pub fn pending(&self) -> &[Transaction] {
        &self.pending
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn set_reputation(&mut self, address: Address, value: f64) -> Result<(), LedgerError> {
        let acc = self.accounts.get_mut(&address).ok_or(LedgerError::UnknownAccount(address))?;
        acc.reputation = value.clamp(0.0, 1.0);
        Ok(())
    }

    pub fn register_account(&mut self, identity: &str) -> Result<Account, LedgerError> {
        let a = self.submit(Transaction::Register { identity: identity.to_string() })?;
        Ok(self.accounts[&a].clone())
    }

    /// Credits new units to an account.
    pub fn mint(&mut self, account: Address, amount: Amount) -> Result<(), LedgerError> {
        self.submit(Transaction::Mint { account, amount }).map(|_| ())
    }

    /// Escrows `deposit` plus the largest reward in `menu` and deploys the contract.
    pub fn post_request(
        &mut self,
        requester: Address,
        spec: RequestSpec,
        menu: Vec<ContractItem>,
        deposit: Amount,
    ) -> Result<SmartContractRecord, LedgerError> {
        let c = self.submit(Transaction::PostRequest { requester, spec, menu, deposit })?;
        Ok(self.contracts[&c].clone())
    }

    pub fn sign_contract(
        &mut self,
        server: Address,
        contract: Address,
        item: usize,
        deposit: Amount,
    ) -> Result<SmartContractRecord, LedgerError> {
        self.submit(Transaction::Sign { contract, server, item: item as u64, deposit })?;
        Ok(self.contracts[&contract].clone())
    }

    pub fn execute_task(&mut self, contract: Address, departed: bool) -> Result<SmartContractRecord, LedgerError> {
        self.submit(Transaction::Execute { contract, departed })?;
        Ok(self.contracts[&contract].clone())
    }

    pub fn verify_and_settle(&mut self, contract: Address, verdict: Verdict) -> Result<SmartContractRecord, LedgerError> {
        self.submit(Transaction::Settle { contract, verdict })?;
        Ok(self.contracts[&contract].clone())
    }

    /// Applies `tx` and queues it for the next block.
    pub fn submit(&mut self, tx: Transaction) -> Result<Address, LedgerError> {
        let touched = self.apply(&tx)?;
        self.pending.push(tx);
        Ok(touched)
    }

    fn record_mut(&mut self, contract: Address, expected: ContractState) -> Result<&mut SmartContractRecord, LedgerError> {
        let rec = self.contracts.get_mut(&contract).ok_or(LedgerError::UnknownContract(contract))?;
        if rec.state != expected {
            return Err(LedgerError::WrongState { contract, expected, found: rec.state });
        }
        Ok(rec)
    }

    /// Validates `tx` against the current state, then applies it. A rejected
    /// transaction leaves the ledger untouched.
    fn apply(&mut self, tx: &Transaction) -> Result<Address, LedgerError> {
        let seq = self.sequence + 1;
        let touched = match tx {
            Transaction::Register { identity } => {
                let address = Self::account_address(identity);
                if self.identities.contains_key(identity) || self.accounts.contains_key(&address) {
                    return Err(LedgerError::DuplicateIdentity(identity.clone()));
                }
                let public_key = public_handle(&derive_secret(identity.as_bytes()));
                let certificate = Encoder::new("certificate").digest(&public_key).str(identity).finish();
                self.accounts.insert(
                    address,
                    Account {
                        identity: identity.clone(),
                        address,
                        public_key,
                        certificate,
                        balance: Amount::ZERO,
                        reputation: INITIAL_REPUTATION,
                    },
                );
                self.identities.insert(identity.clone(), address);
                address
            }
            Transaction::Mint { account, amount } => {
                let balance = self.balance(*account)?.checked_add(*amount)?;
                let minted = self.minted.checked_add(*amount)?;
                self.accounts.get_mut(account).expect("checked above").balance = balance;
                self.minted = minted;
                *account
            }
            Transaction::PostRequest { requester, spec, menu, deposit } => {
                if menu.is_empty() {
                    return Err(LedgerError::EmptyMenu);
                }
                let max_reward = menu.iter().map(|i| i.reward).max().expect("menu is non-empty");
                let need = deposit.checked_add(max_reward)?;
                let left = self.balance(*requester)?.checked_sub(need)?;
                let address = Address(
                    Encoder::new("contract").digest(&requester.0).u64(self.contract_count).finish(),
                );
                self.accounts.get_mut(requester).expect("checked above").balance = left;
                self.contract_count += 1;
                self.contracts.insert(
                    address,
                    SmartContractRecord {
                        address,
                        requester: *requester,
                        server: None,
                        spec: *spec,
                        menu: menu.clone(),
                        chosen: None,
                        requester_deposit: *deposit,
                        server_deposit: Amount::ZERO,
                        escrow: need,
                        result: None,
                        state: ContractState::Deployed,
                        history: vec![(ContractState::Deployed, seq)],
                    },
                );
                address
            }
            Transaction::Sign { contract, server, item, deposit } => {
                let rec = self.contract(*contract)?;
                if rec.state != ContractState::Deployed {
                    return Err(LedgerError::WrongState {
                        contract: *contract,
                        expected: ContractState::Deployed,
                        found: rec.state,
                    });
                }
                if rec.requester == *server {
                    return Err(LedgerError::SelfDealing);
                }
                let index = usize::try_from(*item).unwrap_or(usize::MAX);
                if index >= rec.menu.len() {
                    return Err(LedgerError::InvalidItem { index, len: rec.menu.len() });
                }
                let left = self.balance(*server)?.checked_sub(*deposit)?;
                let escrow = rec.escrow.checked_add(*deposit)?;
                self.accounts.get_mut(server).expect("checked above").balance = left;
                let rec = self.record_mut(*contract, ContractState::Deployed)?;
                rec.server = Some(*server);
                rec.chosen = Some(index);
                rec.server_deposit = *deposit;
                rec.escrow = escrow;
                rec.state = ContractState::Signed;
                rec.history.push((ContractState::Signed, seq));
                *contract
            }
            Transaction::Execute { contract, departed } => {
                let rec = self.record_mut(*contract, ContractState::Signed)?.clone();
                let server = rec.server.expect("signed contracts have a server");
                let mut rec_new = rec.clone();
                rec_new.history.push((ContractState::Executing, seq));
                if *departed {
                    // The server's deposit goes to the requester, who also
                    // recovers its own escrow.
                    let mut balances = self.balances_of(&[rec.requester])?;
                    credit(&mut balances, rec.requester, rec.escrow)?;
                    self.store_balances(balances);
                    rec_new.escrow = Amount::ZERO;
                    rec_new.state = ContractState::Confiscated;
                } else {
                    rec_new.result =
                        Some(Encoder::new("result").digest(&contract.0).digest(&server.0).u64(seq).finish());
                    rec_new.state = ContractState::ResultSubmitted;
                }
                rec_new.history.push((rec_new.state, seq));
                self.contracts.insert(*contract, rec_new);
                *contract
            }
            Transaction::Settle { contract, verdict } => {
                let rec = self.record_mut(*contract, ContractState::ResultSubmitted)?.clone();
                let server = rec.server.expect("settled contracts have a server");
                let item = rec.chosen_item().expect("settled contracts have an item");
                let forfeit = if verdict.requester_fraud { rec.requester_deposit } else { Amount::ZERO };
                let mut balances = self.balances_of(&[rec.requester, server])?;
                let mut rec_new = rec.clone();
                if verdict.pass {
                    credit(&mut balances, server, item.reward.checked_add(rec.server_deposit)?)?;
                    let refund = rec.escrow.checked_sub(item.reward)?.checked_sub(rec.server_deposit)?;
                    credit(&mut balances, rec.requester, refund.checked_sub(forfeit)?)?;
                    rec_new.history.push((ContractState::Verified, seq));
                    rec_new.state = ContractState::Paid;
                } else {
                    // Reward, both deposits and everything else go back to the requester.
                    credit(&mut balances, rec.requester, rec.escrow.checked_sub(forfeit)?)?;
                    rec_new.state = ContractState::Refunded;
                }
                let treasury = self.treasury.checked_add(forfeit)?;
                rec_new.escrow = Amount::ZERO;
                rec_new.history.push((rec_new.state, seq));
                self.store_balances(balances);
                self.treasury = treasury;
                self.contracts.insert(*contract, rec_new);
                *contract
            }
        };
        self.sequence = seq;
        Ok(touched)
    }

    fn balances_of(&self, who: &[Address]) -> Result<BTreeMap<Address, Amount>, LedgerError> {
        who.iter().map(|a| Ok((*a, self.balance(*a)?))).collect()
    }

    fn store_balances(&mut self, balances: BTreeMap<Address, Amount>) {
        for (a, b) in balances {
            self.accounts.get_mut(&a).expect("balances come from existing accounts").balance = b;
        }
    }

    /// Checks conservation and every contract's state history.
    pub fn audit(&self) -> Result<(), String> {
        if self.total_funds() != self.minted.0 as u128 {
            return Err(format!("funds {} differ from minted {}", self.total_funds(), self.minted));
        }
        for c in self.contracts.values() {
            if !c.history_is_valid() {
                return Err(format!("contract {} has history {:?}", c.address, c.history));
            }
            if c.state == ContractState::Paid && !c.passed_through(ContractState::Verified) {
                return Err(format!("contract {} paid without verification", c.address));
            }
            if c.state.is_final() && c.escrow != Amount::ZERO {
                return Err(format!("contract {} holds {} after settling", c.address, c.escrow));
            }
        }
        Ok(())
    }

    /// What the committee votes on to seal the pending transactions.
    pub fn proposal(&self, proposer: NodeId) -> BlockProposal {
        BlockProposal {
            height: self.blocks.last().map_or(0, |b| b.height + 1),
            proposer,
            transactions: self.pending.iter().map(Transaction::digest).collect(),
            valid: true,
        }
    }

    /// Seals every pending transaction into a block backed by `evidence`.
    pub fn append_block(&mut self, proposer: NodeId, evidence: QuorumEvidence) -> Result<&Block, LedgerError> {
        if self.pending.is_empty() {
            return Err(LedgerError::NothingToSeal);
        }
        let prev = self.blocks.last().expect("genesis is always present");
        let mut block = Block {
            height: prev.height + 1,
            previous: prev.digest,
            proposer,
            quorum: self.quorum as u64,
            transactions: self.pending.clone(),
            evidence,
            digest: Digest::ZERO,
        };
        let value = block.proposal().verdict_digest(true);
        let have = block.evidence.valid_signers(&value);
        if have < self.quorum {
            return Err(LedgerError::MissingQuorum { have, need: self.quorum });
        }
        let ring = KeyRing::default();
        let view = block.evidence.view;
        block.evidence.votes.retain(|v| ring.verify(v.signer, MessageKind::Accept, view, &value, &v.tag));
        block.evidence.votes.sort_by_key(|v| v.signer);
        block.evidence.votes.dedup_by_key(|v| v.signer);
        block.digest = block.compute_digest();
        self.pending.clear();
        self.blocks.push(block);
        Ok(self.blocks.last().expect("just pushed"))
    }

    /// Runs one consensus view over the pending transactions with the
    /// committee in `nodes` (leader role already assigned) and seals them on
    /// commit. Returns `None` when the view aborts.
    pub fn commit_with_consensus(
        &mut self,
        nodes: &mut [ConsensusNode],
        view: u64,
        cfg: &ConsensusConfig,
    ) -> Result<Option<&Block>, LedgerError> {
        let leader = nodes
            .iter()
            .find(|n| n.role == Role::Leader)
            .map(|n| n.id)
            .ok_or(LedgerError::Consensus(crate::consensus::ConsensusError::LeaderCount(0)))?;
        let outcome = run_view(nodes, &ViewInput::new(view, self.proposal(leader)), cfg)?;
        match QuorumEvidence::from_outcome(&outcome) {
            Some(evidence) => self.append_block(leader, evidence).map(Some),
            None => Ok(None),
        }
    }

    pub fn verify_chain(&self) -> Result<(), LedgerError> {
        verify_blocks(&self.blocks)
    }

    /// One JSON block per line, genesis first.
    pub fn dump<W: Write>(&self, mut w: W) -> Result<(), LedgerError> {
        for b in &self.blocks {
            let line = serde_json::to_string(b).map_err(|e| LedgerError::Dump { line: 0, message: e.to_string() })?;
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    /// Rebuilds a ledger from a dump. Every line must be in canonical form,
    /// the chain must verify, and replaying the transactions must succeed.
    pub fn restore<R: BufRead>(reader: R, quorum: usize) -> Result<Ledger, LedgerError> {
        let mut blocks = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let bad = |message: String| LedgerError::Dump { line: i + 1, message };
            let block: Block = serde_json::from_str(&line).map_err(|e| bad(e.to_string()))?;
            if serde_json::to_string(&block).map_err(|e| bad(e.to_string()))? != line {
                return Err(bad("record is not in canonical form".into()));
            }
            blocks.push(block);
        }
        verify_blocks(&blocks)?;
        let mut ledger = Ledger::new(quorum);
        for b in &blocks[1..] {
            if (b.quorum as usize) < ledger.quorum {
                return Err(LedgerError::ChainBroken {
                    height: b.height,
                    reason: format!("sealed with quorum {} below {}", b.quorum, ledger.quorum),
                });
            }
            for tx in &b.transactions {
                ledger.apply(tx).map_err(|e| LedgerError::ChainBroken { height: b.height, reason: e.to_string() })?;
            }
        }
        ledger.blocks = blocks;
        Ok(ledger)
    }

    /// CSV `height,digest,tx_count,proposer`.
    pub fn write_explorer_csv<W: Write>(&self, w: W) -> Result<(), LedgerError> {
        let mut out = csv::Writer::from_writer(w);
        let io = |e: csv::Error| LedgerError::Io(std::io::Error::other(e));
        out.write_record(["height", "digest", "tx_count", "proposer"]).map_err(io)?;
        for b in &self.blocks {
            out.write_record([
                b.height.to_string(),
                b.digest.to_hex(),
                b.transactions.len().to_string(),
                b.proposer.to_string(),
            ])
            .map_err(io)?;
        }
        out.flush()?;
        Ok(())
    }
}

fn verify_blocks(blocks: &[Block]) -> Result<(), LedgerError> {
    let Some(first) = blocks.first() else {
        return Err(LedgerError::ChainBroken { height: 0, reason: "no genesis block".into() });
    };
    first.verify(None)?;
    for w in blocks.windows(2) {
        w[1].verify(Some(&w[0]))?;
    }
    Ok(())
}
