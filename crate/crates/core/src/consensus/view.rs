//! One synchronous consensus view: request, pre-prepare, prepare, accept and
//! reply, followed by certificate forwarding so that honest nodes finish with
//! the same outcome.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};

use super::config::ConsensusConfig;
use super::message::{KeyRing, MessageKind, NetMessage, SignedVote, Trace, REQUESTER};
use super::node::{assign_roles, Behavior, ConsensusNode, LeaderChoice, Role, VoteChoice};
use super::ConsensusError;
use crate::crypto::{Digest, Tag};
use crate::ids::NodeId;

/// A batch of transactions proposed for one block height.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockProposal {
    pub height: u64,
    pub proposer: NodeId,
    pub transactions: Vec<Digest>,
    /// Whether the transactions pass verification.
    pub valid: bool,
}

impl BlockProposal {
    pub fn digest(&self) -> Digest {
        let mut h = Sha256::new();
        h.update(self.height.to_be_bytes());
        h.update(self.proposer.0.to_be_bytes());
        h.update((self.transactions.len() as u64).to_be_bytes());
        for t in &self.transactions {
            h.update(t.0);
        }
        Digest(h.finalize().into())
    }

    /// Digest of the pair (block, verification verdict) that nodes vote on.
    pub fn verdict_digest(&self, verdict: bool) -> Digest {
        let mut h = Sha256::new();
        h.update(self.digest().0);
        h.update([u8::from(verdict)]);
        Digest(h.finalize().into())
    }
}

/// The value Byzantine nodes push instead of the honest one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Alternative {
    /// The same block with the opposite verdict. Honest audits reject it.
    FalseVerdict,
    /// A different block that also passes honest audits.
    Conflicting(BlockProposal),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViewInput {
    pub view: u64,
    pub proposal: BlockProposal,
    pub alternative: Alternative,
}

impl ViewInput {
    pub fn new(view: u64, proposal: BlockProposal) -> Self {
        Self { view, proposal, alternative: Alternative::FalseVerdict }
    }

    pub fn honest_value(&self) -> Digest {
        self.proposal.verdict_digest(self.proposal.valid)
    }

    pub fn alternative_value(&self) -> Digest {
        match &self.alternative {
            Alternative::FalseVerdict => self.proposal.verdict_digest(!self.proposal.valid),
            Alternative::Conflicting(b) => b.verdict_digest(b.valid),
        }
    }

    fn audit(&self, value: Digest) -> bool {
        value == self.honest_value()
            || (matches!(self.alternative, Alternative::Conflicting(_)) && value == self.alternative_value())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AbortReason {
    /// No honest replica received a usable pre-prepare.
    NoProposal,
    /// No honest node completed the prepare stage.
    NoPrepareQuorum,
    /// Prepared, but no accept quorum formed.
    NoAcceptQuorum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ViewResult {
    Committed(Digest),
    Aborted(AbortReason),
    /// Honest nodes finished with different outcomes. Never expected.
    Inconsistent,
}

#[derive(Debug, Clone)]
pub struct ViewOutcome {
    pub view: u64,
    pub leader: NodeId,
    pub result: ViewResult,
    /// What each honest node committed, if anything.
    pub honest: BTreeMap<NodeId, Option<Digest>>,
    /// Leader of the next view after an abort.
    pub next_leader: Option<NodeId>,
    pub trace: Trace,
}

impl ViewOutcome {
    pub fn message_count(&self) -> usize {
        self.trace.len()
    }

    /// Distinct digests committed by honest nodes.
    pub fn committed_digests(&self) -> BTreeSet<Digest> {
        self.honest.values().flatten().copied().collect()
    }
}

#[derive(Default, Clone)]
struct Local {
    proposal: Option<Digest>,
    prepared: Option<Digest>,
    accepted: Option<Digest>,
    committed: Option<Digest>,
    certificate_sent: bool,
}

struct Net<'a> {
    ring: KeyRing,
    view: u64,
    slot: u64,
    ids: Vec<NodeId>,
    position: HashMap<NodeId, usize>,
    inbox: Vec<Vec<NetMessage>>,
    outgoing: Vec<NetMessage>,
    trace: &'a mut Trace,
}

impl Net<'_> {
    fn send(&mut self, sender: NodeId, recipient: NodeId, kind: MessageKind, digest: Digest, corrupt: bool) {
        self.send_with(sender, recipient, kind, digest, corrupt, Vec::new());
    }

    fn send_with(
        &mut self,
        sender: NodeId,
        recipient: NodeId,
        kind: MessageKind,
        digest: Digest,
        corrupt: bool,
        certificate: Vec<SignedVote>,
    ) {
        let tag = if corrupt { Tag([0xAA; 32]) } else { self.ring.sign(sender, kind, self.view, &digest) };
        let msg = NetMessage {
            send_slot: self.slot,
            delivery_slot: self.slot + 1,
            sender,
            recipient,
            kind,
            view: self.view,
            digest,
            tag,
            corrupt,
            certificate,
        };
        self.trace.messages.push(msg.clone());
        self.outgoing.push(msg);
    }

    /// Delivers everything sent in the current slot and advances the clock.
    fn step(&mut self) {
        for inbox in &mut self.inbox {
            inbox.clear();
        }
        for msg in self.outgoing.drain(..) {
            if let Some(&p) = self.position.get(&msg.recipient) {
                self.inbox[p].push(msg);
            }
        }
        self.slot += 1;
    }

    fn authentic(&self, m: &NetMessage) -> bool {
        m.view == self.view && self.ring.verify(m.sender, m.kind, m.view, &m.digest, &m.tag)
    }

    /// Distinct authentic senders of `kind` messages carrying `value` in `pos`'s inbox.
    fn senders(&self, pos: usize, kind: MessageKind, value: Digest) -> BTreeSet<NodeId> {
        self.inbox[pos]
            .iter()
            .filter(|m| m.kind == kind && m.digest == value && self.authentic(m))
            .map(|m| m.sender)
            .collect()
    }

    fn others(&self, me: NodeId) -> Vec<NodeId> {
        self.ids.iter().copied().filter(|&i| i != me).collect()
    }

    fn valid_certificate(&self, value: Digest, cert: &[SignedVote], cfg: &ConsensusConfig) -> bool {
        let signers: BTreeSet<NodeId> = cert
            .iter()
            .filter(|v| {
                self.position.contains_key(&v.signer)
                    && self.ring.verify(v.signer, MessageKind::Accept, self.view, &value, &v.tag)
            })
            .map(|v| v.signer)
            .collect();
        cfg.accept_reached(signers.len())
    }
}

fn vote_value(choice: VoteChoice, index: usize, count: usize, x: Digest, y: Digest) -> Option<(Digest, bool)> {
    match choice {
        VoteChoice::Honest => Some((x, false)),
        VoteChoice::Alternative => Some((y, false)),
        VoteChoice::Silent => None,
        VoteChoice::Split => Some((if index < count / 2 { x } else { y }, false)),
        VoteChoice::Corrupt => Some((x, true)),
    }
}

/// Runs one view over `nodes`, whose order is the leader rotation. Exactly
/// one node must hold the leader role.
pub fn run_view(
    nodes: &mut [ConsensusNode],
    input: &ViewInput,
    cfg: &ConsensusConfig,
) -> Result<ViewOutcome, ConsensusError> {
    cfg.validate()?;
    if nodes.len() != cfg.n {
        return Err(ConsensusError::InvalidConfig(format!("{} nodes supplied for n = {}", nodes.len(), cfg.n)));
    }
    let leaders: Vec<usize> = (0..nodes.len()).filter(|&i| nodes[i].role == Role::Leader).collect();
    let [leader_pos] = leaders[..] else {
        return Err(ConsensusError::LeaderCount(leaders.len()));
    };
    let ids: Vec<NodeId> = nodes.iter().map(|n| n.id).collect();
    let position: HashMap<NodeId, usize> = ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();
    if position.len() != ids.len() || position.contains_key(&REQUESTER) {
        return Err(ConsensusError::InvalidConfig("node ids must be distinct".into()));
    }
    let leader = ids[leader_pos];
    let x = input.honest_value();
    let y = input.alternative_value();
    let behaviors: Vec<Behavior> = nodes.iter().map(|n| n.behavior).collect();
    let coalition: Vec<NodeId> =
        (0..ids.len()).filter(|&i| matches!(behaviors[i], Behavior::Byzantine(_))).map(|i| ids[i]).collect();

    let mut trace = Trace::default();
    let mut net = Net {
        ring: KeyRing::for_ids(ids.iter().copied().chain([REQUESTER])),
        view: input.view,
        slot: 0,
        ids: ids.clone(),
        position,
        inbox: vec![Vec::new(); ids.len()],
        outgoing: Vec::new(),
        trace: &mut trace,
    };
    let mut state = vec![Local::default(); ids.len()];

    // Request.
    let request = input.proposal.digest();
    for &id in &ids {
        net.send(REQUESTER, id, MessageKind::Request, request, false);
    }
    net.step();

    // Pre-prepare.
    let replicas: Vec<NodeId> = net.others(leader);
    match behaviors[leader_pos] {
        Behavior::Honest => {
            state[leader_pos].proposal = Some(x);
            for &r in &replicas {
                net.send(leader, r, MessageKind::PrePrepare, x, false);
            }
        }
        Behavior::Byzantine(s) => {
            for (i, &r) in replicas.iter().enumerate() {
                let v = match s.propose {
                    LeaderChoice::Honest => Some(x),
                    LeaderChoice::Alternative => Some(y),
                    LeaderChoice::Silent => None,
                    LeaderChoice::Equivocate { first } => Some(if i < first { x } else { y }),
                };
                if let Some(v) = v {
                    net.send(leader, r, MessageKind::PrePrepare, v, false);
                }
            }
        }
        Behavior::Crash => {}
    }
    net.step();

    // Prepare.
    for pos in 0..ids.len() {
        let me = ids[pos];
        let targets = net.others(me);
        match behaviors[pos] {
            Behavior::Honest if pos != leader_pos => {
                let got = net.inbox[pos]
                    .iter()
                    .find(|m| m.kind == MessageKind::PrePrepare && m.sender == leader && net.authentic(m))
                    .map(|m| m.digest);
                if let Some(v) = got.filter(|v| input.audit(*v)) {
                    state[pos].proposal = Some(v);
                    for &t in &targets {
                        net.send(me, t, MessageKind::Prepare, v, false);
                    }
                }
            }
            Behavior::Byzantine(s) => {
                for (i, &t) in targets.iter().enumerate() {
                    if let Some((v, bad)) = vote_value(s.prepare, i, targets.len(), x, y) {
                        net.send(me, t, MessageKind::Prepare, v, bad);
                    }
                }
            }
            _ => {}
        }
    }
    net.step();

    // Accept.
    for pos in 0..ids.len() {
        let me = ids[pos];
        let targets = net.others(me);
        match behaviors[pos] {
            Behavior::Honest => {
                let Some(v) = state[pos].proposal else { continue };
                let mut matching = net.senders(pos, MessageKind::Prepare, v);
                if pos != leader_pos {
                    // The leader's pre-prepare is its matching message.
                    matching.insert(leader);
                }
                matching.remove(&me);
                if matching.len() >= cfg.prepare_quorum() {
                    state[pos].prepared = Some(v);
                    state[pos].accepted = Some(v);
                    for &t in &targets {
                        net.send(me, t, MessageKind::Accept, v, false);
                    }
                }
            }
            Behavior::Byzantine(s) => {
                for (i, &t) in targets.iter().enumerate() {
                    if let Some((v, bad)) = vote_value(s.accept, i, targets.len(), x, y) {
                        net.send(me, t, MessageKind::Accept, v, bad);
                    }
                }
            }
            Behavior::Crash => {}
        }
    }
    net.step();

    // Commit on an accept quorum, then reply and forward the certificate.
    for pos in 0..ids.len() {
        if !behaviors[pos].is_honest() {
            continue;
        }
        let me = ids[pos];
        for v in [x, y] {
            let mut agreeing = net.senders(pos, MessageKind::Accept, v);
            agreeing.remove(&me);
            let mut votes: Vec<SignedVote> = net.inbox[pos]
                .iter()
                .filter(|m| m.kind == MessageKind::Accept && m.digest == v && agreeing.contains(&m.sender))
                .map(|m| SignedVote { signer: m.sender, tag: m.tag })
                .collect();
            let own = state[pos].accepted == Some(v);
            if own {
                votes.push(SignedVote { signer: me, tag: net.ring.sign(me, MessageKind::Accept, input.view, &v) });
            }
            if cfg.accept_reached(agreeing.len() + usize::from(own)) {
                state[pos].committed = Some(v);
                votes.sort_by_key(|s| s.signer);
                votes.dedup_by_key(|s| s.signer);
                net.send(me, REQUESTER, MessageKind::Reply, v, false);
                for t in net.others(me) {
                    net.send_with(me, t, MessageKind::Commit, v, false, votes.clone());
                }
                state[pos].certificate_sent = true;
                break;
            }
        }
    }
    // The coalition forwards, once, any certificate it can assemble from the
    // accepts it received and those its members signed.
    if let Some(&forwarder) = coalition.first() {
        for v in [x, y] {
            let mut votes: BTreeMap<NodeId, Tag> = BTreeMap::new();
            for &b in &coalition {
                let pos = net.position[&b];
                for m in &net.inbox[pos] {
                    if m.kind == MessageKind::Accept && m.digest == v && net.authentic(m) {
                        votes.insert(m.sender, m.tag);
                    }
                }
                // Only accepts the node actually signed in the accept stage.
                let Behavior::Byzantine(strategy) = behaviors[pos] else { continue };
                let signed = match strategy.accept {
                    VoteChoice::Honest => v == x,
                    VoteChoice::Alternative => v == y,
                    VoteChoice::Split => true,
                    VoteChoice::Silent | VoteChoice::Corrupt => false,
                };
                if signed {
                    votes.insert(b, net.ring.sign(b, MessageKind::Accept, input.view, &v));
                }
            }
            if cfg.accept_reached(votes.len()) {
                let cert: Vec<SignedVote> = votes.into_iter().map(|(signer, tag)| SignedVote { signer, tag }).collect();
                for t in net.others(forwarder) {
                    if behaviors[net.position[&t]].is_honest() {
                        net.send_with(forwarder, t, MessageKind::Commit, v, false, cert.clone());
                    }
                }
            }
        }
    }
    net.step();

    // Two rounds of certificate adoption; the first relays once.
    for relay in [true, false] {
        for pos in 0..ids.len() {
            if !behaviors[pos].is_honest() || state[pos].committed.is_some() {
                continue;
            }
            let me = ids[pos];
            let found = net.inbox[pos]
                .iter()
                .filter(|m| m.kind == MessageKind::Commit && net.authentic(m))
                .find(|m| net.valid_certificate(m.digest, &m.certificate, cfg))
                .map(|m| (m.digest, m.certificate.clone()));
            if let Some((v, cert)) = found {
                state[pos].committed = Some(v);
                net.send(me, REQUESTER, MessageKind::Reply, v, false);
                if relay && !state[pos].certificate_sent {
                    for t in net.others(me) {
                        net.send_with(me, t, MessageKind::Commit, v, false, cert.clone());
                    }
                    state[pos].certificate_sent = true;
                }
            }
        }
        net.step();
    }

    let mut honest = BTreeMap::new();
    for (pos, node) in nodes.iter_mut().enumerate() {
        if behaviors[pos].is_honest() {
            honest.insert(node.id, state[pos].committed);
            if let Some(v) = state[pos].committed {
                node.log.push(v);
            }
        }
    }
    let honest_states: Vec<&Local> = (0..ids.len()).filter(|&p| behaviors[p].is_honest()).map(|p| &state[p]).collect();
    let outcomes: BTreeSet<Option<Digest>> = honest.values().copied().collect();
    let result = match outcomes.len() {
        0 => ViewResult::Aborted(AbortReason::NoProposal),
        1 => match outcomes.into_iter().next().flatten() {
            Some(v) => ViewResult::Committed(v),
            None if honest_states.iter().any(|s| s.prepared.is_some()) => {
                ViewResult::Aborted(AbortReason::NoAcceptQuorum)
            }
            None if honest_states.iter().any(|s| s.proposal.is_some()) => {
                ViewResult::Aborted(AbortReason::NoPrepareQuorum)
            }
            None => ViewResult::Aborted(AbortReason::NoProposal),
        },
        _ => ViewResult::Inconsistent,
    };
    let next_leader = matches!(result, ViewResult::Aborted(_)).then(|| ids[(leader_pos + 1) % ids.len()]);
    Ok(ViewOutcome { view: input.view, leader, result, honest, next_leader, trace })
}

/// Runs `cfg.schedule_len` views with rotating leaders. An aborted proposal
/// is retried under the next leader.
pub fn run_schedule(
    nodes: &mut [ConsensusNode],
    proposals: &[BlockProposal],
    cfg: &ConsensusConfig,
) -> Result<Vec<ViewOutcome>, ConsensusError> {
    let mut out = Vec::new();
    let mut next = 0;
    for view in 0..cfg.schedule_len as u64 {
        let Some(p) = proposals.get(next) else { break };
        assign_roles(nodes, view);
        let leader = nodes[(view as usize) % nodes.len()].id;
        let proposal = BlockProposal { proposer: leader, ..p.clone() };
        let outcome = run_view(nodes, &ViewInput::new(view, proposal), cfg)?;
        if matches!(outcome.result, ViewResult::Committed(_)) {
            next += 1;
        }
        out.push(outcome);
    }
    Ok(out)
}
