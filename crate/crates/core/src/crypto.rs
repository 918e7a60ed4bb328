//! Digests and the signature stub.
//!
//! Real PKI is out of scope. Identities hold a secret key and sign by hashing
//! `key || message`; verification recomputes the tag through the registry.

use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};

/// A 32-byte SHA-256 digest. Serialized as lowercase hex.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Digest(pub [u8; 32]);

impl Digest {
    pub const ZERO: Digest = Digest([0; 32]);

    pub fn of(bytes: &[u8]) -> Self {
        Digest(Sha256::digest(bytes).into())
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    /// First eight hex characters, for traces.
    pub fn short(&self) -> String {
        hex::encode(&self.0[..4])
    }

    pub fn from_hex(s: &str) -> Option<Self> {
        parse_hex32(s).map(Digest)
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest({})", self.short())
    }
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

/// Authentication tag over a message. Serialized as lowercase hex.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Tag(pub [u8; 32]);

fn parse_hex32(s: &str) -> Option<[u8; 32]> {
    // Uppercase would decode too, but then the encoding would not be canonical.
    if s.len() != 64 || s.bytes().any(|b| b.is_ascii_uppercase()) {
        return None;
    }
    hex::decode(s).ok()?.try_into().ok()
}

macro_rules! hex_serde {
    ($t:ident) => {
        impl Serialize for $t {
            fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(&hex::encode(self.0))
            }
        }

        impl<'de> Deserialize<'de> for $t {
            fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                parse_hex32(&s)
                    .map($t)
                    .ok_or_else(|| serde::de::Error::custom(format!("expected 64 lowercase hex digits, got {s:?}")))
            }
        }
    };
}

hex_serde!(Digest);
hex_serde!(Tag);

impl fmt::Debug for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Tag({})", hex::encode(&self.0[..4]))
    }
}

/// Pluggable signing scheme.
pub trait SignatureScheme {
    fn sign(&self, secret: &[u8; 32], message: &[u8]) -> Tag;
    fn verify(&self, secret: &[u8; 32], message: &[u8], tag: &Tag) -> bool {
        self.sign(secret, message) == *tag
    }
}

/// Keyed-hash stand-in for a real signature scheme.
#[derive(Debug, Clone, Copy, Default)]
pub struct KeyedHash;

impl SignatureScheme for KeyedHash {
    fn sign(&self, secret: &[u8; 32], message: &[u8]) -> Tag {
        let mut h = Sha256::new();
        h.update(b"parkingchain-tag");
        h.update(secret);
        h.update(message);
        Tag(h.finalize().into())
    }
}

/// Deterministic secret key for an identity label.
pub fn derive_secret(label: &[u8]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(b"parkingchain-key");
    h.update(label);
    h.finalize().into()
}

/// Public handle derived from a secret (stands in for a public key).
pub fn public_handle(secret: &[u8; 32]) -> Digest {
    let mut h = Sha256::new();
    h.update(b"parkingchain-pub");
    h.update(secret);
    Digest(h.finalize().into())
}
