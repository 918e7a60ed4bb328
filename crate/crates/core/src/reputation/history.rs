//! Interaction records and their CSV form (`slot,rater,target,outcome`).

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::ReputationError;
use crate::ids::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InteractionRecord {
    pub slot: u64,
    pub rater: NodeId,
    pub target: NodeId,
    pub positive: bool,
    /// Number of identical interactions this record stands for.
    pub count: u32,
}

/// Positive and negative outcome counts for one (rater, target, slot).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SlotCounts {
    pub positive: u64,
    pub negative: u64,
}

impl SlotCounts {
    pub fn total(&self) -> u64 {
        self.positive + self.negative
    }

    /// Fraction of positive outcomes, `None` when the slot is empty.
    pub fn positive_fraction(&self) -> Option<f64> {
        (self.total() > 0).then(|| self.positive as f64 / self.total() as f64)
    }
}

/// Aggregated interaction history indexed by target, rater and slot.
#[derive(Debug, Clone, Default)]
pub struct InteractionLog {
    by_target: BTreeMap<NodeId, BTreeMap<NodeId, BTreeMap<u64, SlotCounts>>>,
    by_rater: BTreeMap<NodeId, BTreeMap<NodeId, u64>>,
    records: usize,
}

impl InteractionLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, rec: InteractionRecord) -> Result<(), ReputationError> {
        if rec.rater == rec.target {
            return Err(ReputationError::SelfRating(rec.rater));
        }
        let cell = self
            .by_target
            .entry(rec.target)
            .or_default()
            .entry(rec.rater)
            .or_default()
            .entry(rec.slot)
            .or_default();
        if rec.positive {
            cell.positive += rec.count as u64;
        } else {
            cell.negative += rec.count as u64;
        }
        *self.by_rater.entry(rec.rater).or_default().entry(rec.target).or_default() += rec.count as u64;
        self.records += 1;
        Ok(())
    }

    pub fn record_counts(
        &mut self,
        slot: u64,
        rater: NodeId,
        target: NodeId,
        positive: u32,
        negative: u32,
    ) -> Result<(), ReputationError> {
        if positive > 0 {
            self.record(InteractionRecord { slot, rater, target, positive: true, count: positive })?;
        }
        if negative > 0 {
            self.record(InteractionRecord { slot, rater, target, positive: false, count: negative })?;
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.records == 0
    }

    pub fn targets(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.by_target.keys().copied()
    }

    /// Per-rater, per-slot counts about `target`.
    pub fn about(&self, target: NodeId) -> Option<&BTreeMap<NodeId, BTreeMap<u64, SlotCounts>>> {
        self.by_target.get(&target)
    }

    /// Interaction counts `p_im` of `rater` with every peer it has met.
    pub fn peer_counts(&self, rater: NodeId) -> Option<&BTreeMap<NodeId, u64>> {
        self.by_rater.get(&rater)
    }

    pub fn pair_count(&self, rater: NodeId, target: NodeId) -> u64 {
        self.by_rater
            .get(&rater)
            .and_then(|m| m.get(&target))
            .copied()
            .unwrap_or(0)
    }

    /// Expanded records in canonical (target, rater, slot, outcome) order.
    pub fn records(&self) -> Vec<InteractionRecord> {
        let mut out = Vec::new();
        for (&target, raters) in &self.by_target {
            for (&rater, slots) in raters {
                for (&slot, c) in slots {
                    for (positive, n) in [(true, c.positive), (false, c.negative)] {
                        if n > 0 {
                            out.push(InteractionRecord { slot, rater, target, positive, count: n as u32 });
                        }
                    }
                }
            }
        }
        out
    }

    /// Reads one interaction per row; the first row must be the header.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self, ReputationError> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers().map_err(|e| ReputationError::Csv { row: 0, message: e.to_string() })?;
        if headers.iter().collect::<Vec<_>>() != ["slot", "rater", "target", "outcome"] {
            return Err(ReputationError::Csv {
                row: 0,
                message: format!("expected header slot,rater,target,outcome, got {headers:?}"),
            });
        }
        let mut log = Self::new();
        for (idx, row) in rdr.records().enumerate() {
            let row_no = idx + 2;
            let row = row.map_err(|e| ReputationError::Csv { row: row_no, message: e.to_string() })?;
            let bad = |what: &str| ReputationError::Csv { row: row_no, message: format!("bad {what}") };
            let slot: u64 = row.get(0).and_then(|s| s.parse().ok()).ok_or_else(|| bad("slot"))?;
            let rater: u32 = row.get(1).and_then(|s| s.parse().ok()).ok_or_else(|| bad("rater"))?;
            let target: u32 = row.get(2).and_then(|s| s.parse().ok()).ok_or_else(|| bad("target"))?;
            let positive = match row.get(3) {
                Some("1") => true,
                Some("0") => false,
                _ => return Err(bad("outcome (expected 0 or 1)")),
            };
            log.record(InteractionRecord {
                slot,
                rater: NodeId(rater),
                target: NodeId(target),
                positive,
                count: 1,
            })
            .map_err(|e| ReputationError::Csv { row: row_no, message: e.to_string() })?;
        }
        Ok(log)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "slot,rater,target,outcome")?;
        let mut rows: Vec<(u64, u32, u32, u8)> = Vec::new();
        for rec in self.records() {
            for _ in 0..rec.count {
                rows.push((rec.slot, rec.rater.0, rec.target.0, rec.positive as u8));
            }
        }
        rows.sort_unstable();
        for (slot, rater, target, outcome) in rows {
            writeln!(out, "{slot},{rater},{target},{outcome}")?;
        }
        Ok(())
    }
}
