use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::encode::Encoder;
use super::state::Transaction;
use super::LedgerError;
use crate::consensus::{BlockProposal, KeyRing, MessageKind, SignedVote, ViewOutcome, ViewResult};
use crate::crypto::Digest;
use crate::ids::NodeId;

/// Accept votes showing that a committee agreed on a block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuorumEvidence {
    pub view: u64,
    pub votes: Vec<SignedVote>,
}

impl QuorumEvidence {
    /// Collects the authentic accept votes for the committed value of `outcome`.
    pub fn from_outcome(outcome: &ViewOutcome) -> Option<Self> {
        let ViewResult::Committed(value) = outcome.result else { return None };
        let ring = KeyRing::default();
        let mut seen = BTreeSet::new();
        let mut votes = Vec::new();
        for m in &outcome.trace.messages {
            if m.kind == MessageKind::Accept
                && m.digest == value
                && ring.verify(m.sender, m.kind, m.view, &m.digest, &m.tag)
                && seen.insert(m.sender)
            {
                votes.push(SignedVote { signer: m.sender, tag: m.tag });
            }
        }
        Some(Self { view: outcome.view, votes })
    }

    /// Evidence signed directly by `signers`, for tests and tooling.
    pub fn signed_by(view: u64, value: &Digest, signers: &[NodeId]) -> Self {
        let ring = KeyRing::default();
        let votes = signers
            .iter()
            .map(|&s| SignedVote { signer: s, tag: ring.sign(s, MessageKind::Accept, view, value) })
            .collect();
        Self { view, votes }
    }

    /// Distinct signers with a valid accept tag on `value`.
    pub fn valid_signers(&self, value: &Digest) -> usize {
        let ring = KeyRing::default();
        self.votes
            .iter()
            .filter(|v| ring.verify(v.signer, MessageKind::Accept, self.view, value, &v.tag))
            .map(|v| v.signer)
            .collect::<BTreeSet<_>>()
            .len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Block {
    pub height: u64,
    pub previous: Digest,
    pub proposer: NodeId,
    /// Votes required when the block was sealed.
    pub quorum: u64,
    pub transactions: Vec<Transaction>,
    pub evidence: QuorumEvidence,
    pub digest: Digest,
}

impl Block {
    pub fn genesis() -> Self {
        let mut b = Block {
            height: 0,
            previous: Digest::ZERO,
            proposer: NodeId(0),
            quorum: 0,
            transactions: Vec::new(),
            evidence: QuorumEvidence { view: 0, votes: Vec::new() },
            digest: Digest::ZERO,
        };
        b.digest = b.compute_digest();
        b
    }

    pub fn transaction_digests(&self) -> Vec<Digest> {
        self.transactions.iter().map(Transaction::digest).collect()
    }

    /// The proposal the committee voted on.
    pub fn proposal(&self) -> BlockProposal {
        BlockProposal {
            height: self.height,
            proposer: self.proposer,
            transactions: self.transaction_digests(),
            valid: true,
        }
    }

    pub fn compute_digest(&self) -> Digest {
        let mut e = Encoder::new("block");
        e.u64(self.height).digest(&self.previous).u64(self.proposer.0 as u64).u64(self.quorum);
        e.u64(self.evidence.view).u64(self.transactions.len() as u64);
        for t in &self.transactions {
            e.digest(&t.digest());
        }
        e.finish()
    }

    /// Checks the digest, the link to `previous` and the quorum votes.
    pub fn verify(&self, previous: Option<&Block>) -> Result<(), LedgerError> {
        let broken = |reason: String| LedgerError::ChainBroken { height: self.height, reason };
        if self.compute_digest() != self.digest {
            return Err(broken("digest does not match contents".into()));
        }
        match previous {
            None => {
                if self.height != 0 || self.previous != Digest::ZERO {
                    return Err(broken("first block is not a genesis block".into()));
                }
            }
            Some(p) => {
                if self.height != p.height + 1 {
                    return Err(broken(format!("height follows {}", p.height)));
                }
                if self.previous != p.digest {
                    return Err(broken("previous digest does not match".into()));
                }
                let have = self.evidence.valid_signers(&self.proposal().verdict_digest(true));
                if self.quorum == 0 || (have as u64) < self.quorum || have != self.evidence.votes.len() {
                    return Err(broken(format!("{have} valid votes for a quorum of {}", self.quorum)));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn genesis_shape() {
        let g = Block::genesis();
        assert_eq!(g.height, 0);
        assert_eq!(g.previous, Digest::ZERO);
        assert!(g.verify(None).is_ok());
    }
}
