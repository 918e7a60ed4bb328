//! Exhaustive enumeration of bounded adversary choices for one view.

use std::thread;

use serde::Serialize;

use super::config::{AcceptRule, ConsensusConfig};
use super::node::{assign_roles, Behavior, ByzantineStrategy, ConsensusNode, LeaderChoice, VoteChoice};
use super::view::{run_view, Alternative, BlockProposal, ViewInput, ViewResult};
use super::ConsensusError;
use crate::crypto::Digest;
use crate::ids::NodeId;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ModelCheckReport {
    pub runs: usize,
    pub committed: usize,
    pub aborted: usize,
    /// Runs where two honest nodes committed different digests.
    pub divergent: usize,
    /// Runs where some honest nodes committed and others did not.
    pub non_uniform: usize,
    pub max_messages: usize,
    /// Whether the all-honest run commits in its single view.
    pub failure_free_commits: bool,
}

impl ModelCheckReport {
    fn merge(&mut self, other: &ModelCheckReport) {
        self.runs += other.runs;
        self.committed += other.committed;
        self.aborted += other.aborted;
        self.divergent += other.divergent;
        self.non_uniform += other.non_uniform;
        self.max_messages = self.max_messages.max(other.max_messages);
    }

    pub fn is_safe(&self) -> bool {
        self.divergent == 0
    }
}

/// One adversary configuration: the leader's behaviour plus one strategy per
/// Byzantine replica (the last replicas in rotation order).
#[derive(Debug, Clone)]
struct Case {
    leader: Behavior,
    replicas: Vec<ByzantineStrategy>,
}

fn blocks() -> (BlockProposal, BlockProposal) {
    let x = BlockProposal { height: 1, proposer: NodeId(0), transactions: vec![Digest::of(b"x")], valid: true };
    let y = BlockProposal { transactions: vec![Digest::of(b"y")], ..x.clone() };
    (x, y)
}

fn run_case(case: &Case, cfg: &ConsensusConfig, report: &mut ModelCheckReport) -> Result<(), ConsensusError> {
    let n = cfg.n;
    let mut nodes: Vec<ConsensusNode> =
        (0..n).map(|i| ConsensusNode::new(NodeId(i as u32), Behavior::Honest)).collect();
    nodes[0].behavior = case.leader;
    for (k, s) in case.replicas.iter().enumerate() {
        nodes[n - 1 - k].behavior = Behavior::Byzantine(*s);
    }
    assign_roles(&mut nodes, 0);
    let (x, y) = blocks();
    let input = ViewInput { view: 0, proposal: x, alternative: Alternative::Conflicting(y) };
    let out = run_view(&mut nodes, &input, cfg)?;
    report.runs += 1;
    report.max_messages = report.max_messages.max(out.message_count());
    if out.committed_digests().len() > 1 {
        report.divergent += 1;
    }
    match out.result {
        ViewResult::Committed(_) => report.committed += 1,
        ViewResult::Aborted(_) => report.aborted += 1,
        ViewResult::Inconsistent => report.non_uniform += 1,
    }
    Ok(())
}

/// Every strategy combination in the bounded adversary space:
/// - honest leader with `l` Byzantine replicas, each choosing any prepare and
///   accept behaviour;
/// - Byzantine leader (silent, either value, or equivocating at every split
///   point) plus `l − 1` Byzantine replicas as above, the leader voting with
///   one behaviour in both stages.
fn cases(cfg: &ConsensusConfig) -> Vec<Case> {
    let votes: Vec<ByzantineStrategy> = VoteChoice::ALL
        .iter()
        .flat_map(|&p| {
            VoteChoice::ALL.iter().map(move |&a| ByzantineStrategy { propose: LeaderChoice::Honest, prepare: p, accept: a })
        })
        .collect();
    let product = |k: usize| -> Vec<Vec<ByzantineStrategy>> {
        let mut acc: Vec<Vec<ByzantineStrategy>> = vec![Vec::new()];
        for _ in 0..k {
            acc = acc
                .into_iter()
                .flat_map(|prefix| {
                    votes.iter().map(move |s| {
                        let mut v = prefix.clone();
                        v.push(*s);
                        v
                    })
                })
                .collect();
        }
        acc
    };
    let mut out: Vec<Case> = product(cfg.l).into_iter().map(|r| Case { leader: Behavior::Honest, replicas: r }).collect();
    if cfg.l == 0 {
        return out;
    }
    let mut proposals = vec![LeaderChoice::Silent, LeaderChoice::Honest, LeaderChoice::Alternative];
    proposals.extend((0..cfg.n).map(|first| LeaderChoice::Equivocate { first }));
    let others = product(cfg.l - 1);
    for propose in proposals {
        for vote in VoteChoice::ALL {
            let leader = Behavior::Byzantine(ByzantineStrategy { propose, prepare: vote, accept: vote });
            for r in &others {
                out.push(Case { leader, replicas: r.clone() });
            }
        }
    }
    out.push(Case { leader: Behavior::Crash, replicas: Vec::new() });
    out
}

/// Runs every case for `n` nodes tolerating `l` faults under `rule`, spread
/// over the available cores. Runs are independent, so the report does not
/// depend on the thread count.
pub fn exhaustive_model_check(n: usize, l: usize, rule: AcceptRule) -> Result<ModelCheckReport, ConsensusError> {
    let cfg = ConsensusConfig { accept_rule: rule, ..ConsensusConfig::new(n, l)? };
    let all = cases(&cfg);
    let workers = thread::available_parallelism().map_or(1, |p| p.get()).min(16);
    let chunk = all.len().div_ceil(workers).max(1);
    let partials: Vec<Result<ModelCheckReport, ConsensusError>> = thread::scope(|s| {
        let handles: Vec<_> = all
            .chunks(chunk)
            .map(|part| {
                s.spawn(move || {
                    let mut r = ModelCheckReport::default();
                    for case in part {
                        run_case(case, &cfg, &mut r)?;
                    }
                    Ok(r)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("model-check worker panicked")).collect()
    });
    let mut report = ModelCheckReport::default();
    for p in partials {
        report.merge(&p?);
    }
    let mut honest = ModelCheckReport::default();
    run_case(&Case { leader: Behavior::Honest, replicas: Vec::new() }, &cfg, &mut honest)?;
    report.failure_free_commits = honest.committed == 1;
    report.merge(&honest);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_committee_is_safe_under_both_rules() {
        for rule in [AcceptRule::MoreThanNMinusL, AcceptRule::AtLeastNMinusL] {
            let r = exhaustive_model_check(4, 1, rule).unwrap();
            assert!(r.is_safe(), "{rule:?}: {r:?}");
            assert_eq!(r.non_uniform, 0);
            assert!(r.failure_free_commits);
            assert!(r.max_messages <= 5 * 16);
            // 25 replica strategies, then 7 leader proposals × 5 votes, plus crash, plus the honest run.
            assert_eq!(r.runs, 25 + 7 * 5 + 1 + 1);
        }
    }
}
