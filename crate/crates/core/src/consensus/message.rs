use std::collections::HashMap;
use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::crypto::{Digest, KeyedHash, SignatureScheme, Tag};
use crate::ids::NodeId;

/// Pseudo-identity of the service requester in traces.
pub const REQUESTER: NodeId = NodeId(u32::MAX);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MessageKind {
    Request,
    PrePrepare,
    Prepare,
    Accept,
    Reply,
    /// Forwarded accept certificate.
    Commit,
}

impl MessageKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MessageKind::Request => "request",
            MessageKind::PrePrepare => "pre-prepare",
            MessageKind::Prepare => "prepare",
            MessageKind::Accept => "accept",
            MessageKind::Reply => "reply",
            MessageKind::Commit => "commit",
        }
    }

    fn code(self) -> u8 {
        self as u8
    }
}

impl fmt::Display for MessageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A signed accept carried inside a certificate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignedVote {
    pub signer: NodeId,
    pub tag: Tag,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetMessage {
    pub send_slot: u64,
    pub delivery_slot: u64,
    pub sender: NodeId,
    pub recipient: NodeId,
    pub kind: MessageKind,
    pub view: u64,
    pub digest: Digest,
    pub tag: Tag,
    /// Set when the sender deliberately attached an invalid tag.
    pub corrupt: bool,
    pub certificate: Vec<SignedVote>,
}

/// Stable byte encoding of the signed part of a message.
pub fn signing_bytes(kind: MessageKind, view: u64, digest: &Digest, sender: NodeId) -> Vec<u8> {
    let mut out = Vec::with_capacity(1 + 8 + 32 + 4);
    out.push(kind.code());
    out.extend_from_slice(&view.to_be_bytes());
    out.extend_from_slice(&digest.0);
    out.extend_from_slice(&sender.0.to_be_bytes());
    out
}

/// Key registry for the simulated identities.
#[derive(Debug, Clone, Default)]
pub struct KeyRing {
    cache: HashMap<NodeId, [u8; 32]>,
}

impl KeyRing {
    /// Registry with the secrets of `ids` precomputed.
    pub fn for_ids(ids: impl IntoIterator<Item = NodeId>) -> Self {
        let cache = ids.into_iter().map(|id| (id, Self::derive(id))).collect();
        Self { cache }
    }

    fn derive(id: NodeId) -> [u8; 32] {
        crate::crypto::derive_secret(&id.0.to_be_bytes())
    }

    pub fn secret(&self, id: NodeId) -> [u8; 32] {
        self.cache.get(&id).copied().unwrap_or_else(|| Self::derive(id))
    }

    pub fn sign(&self, id: NodeId, kind: MessageKind, view: u64, digest: &Digest) -> Tag {
        KeyedHash.sign(&self.secret(id), &signing_bytes(kind, view, digest, id))
    }

    pub fn verify(&self, id: NodeId, kind: MessageKind, view: u64, digest: &Digest, tag: &Tag) -> bool {
        KeyedHash.verify(&self.secret(id), &signing_bytes(kind, view, digest, id), tag)
    }
}

/// Ordered record of every message sent in a run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    pub messages: Vec<NetMessage>,
}

fn party(id: NodeId) -> String {
    if id == REQUESTER {
        "sr".to_string()
    } else {
        id.0.to_string()
    }
}

impl Trace {
    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    pub fn count(&self, kind: MessageKind) -> usize {
        self.messages.iter().filter(|m| m.kind == kind).count()
    }

    /// Lines `slot,sender,recipient,kind,digest,flags`.
    pub fn lines(&self) -> impl Iterator<Item = String> + '_ {
        self.messages.iter().map(|m| {
            let mut flags = Vec::new();
            if m.corrupt {
                flags.push("bad-tag".to_string());
            }
            if !m.certificate.is_empty() {
                flags.push(format!("cert={}", m.certificate.len()));
            }
            let flags = if flags.is_empty() { "-".to_string() } else { flags.join("|") };
            format!(
                "{},{},{},{},{},{}",
                m.send_slot,
                party(m.sender),
                party(m.recipient),
                m.kind,
                m.digest.short(),
                flags
            )
        })
    }

    pub fn write<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "slot,sender,recipient,kind,digest,flags")?;
        for line in self.lines() {
            writeln!(w, "{line}")?;
        }
        Ok(())
    }
}
