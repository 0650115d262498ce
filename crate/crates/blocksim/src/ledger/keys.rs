//! Key pairs, signatures and addresses.
//!
//! Two signature schemes sit behind one interface. `Simulated` is a keyed
//! hash with zero security: the verification key *is* the signing key, so
//! anybody holding a public key could forge. It exists because it is fast
//! and dependency-free, it is the default, and every artifact produced
//! under it is flagged `signature_scheme = "simulated"`. `Ed25519` is the
//! real thing for when the flag matters.
//!
//! An address is the SHA-256 digest of a public key's canonical bytes.
//! Canonical public-key bytes are one scheme byte followed by the 32-byte
//! key, so the same raw key under different schemes yields different
//! addresses.

use ed25519_dalek::{Signer, Verifier};
use rand::RngCore;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;

use super::encoding::sha256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SigScheme {
    Simulated,
    Ed25519,
}

impl SigScheme {
    pub fn id_byte(self) -> u8 {
        match self {
            SigScheme::Simulated => 0,
            SigScheme::Ed25519 => 1,
        }
    }

    fn from_id_byte(b: u8) -> Option<Self> {
        match b {
            0 => Some(SigScheme::Simulated),
            1 => Some(SigScheme::Ed25519),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SigScheme::Simulated => "simulated",
            SigScheme::Ed25519 => "ed25519",
        }
    }

    /// Draws 32 seed bytes from `rng` and derives a key pair. Ed25519 keys
    /// are deterministic in the seed, so a seeded rng reproduces the same
    /// wallet universe run after run.
    pub fn generate_keypair<R: RngCore>(self, rng: &mut R) -> KeyPair {
        let mut seed = [0u8; 32];
        rng.fill_bytes(&mut seed);
        self.keypair_from_seed(seed)
    }

    pub fn keypair_from_seed(self, seed: [u8; 32]) -> KeyPair {
        match self {
            SigScheme::Simulated => KeyPair {
                public: PublicKey { scheme: self, bytes: seed },
                secret: SecretKey(seed),
            },
            SigScheme::Ed25519 => {
                let sk = ed25519_dalek::SigningKey::from_bytes(&seed);
                KeyPair {
                    public: PublicKey { scheme: self, bytes: sk.verifying_key().to_bytes() },
                    secret: SecretKey(seed),
                }
            }
        }
    }
}

impl fmt::Display for SigScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PublicKey {
    scheme: SigScheme,
    bytes: [u8; 32],
}

/// Secret bytes. For `Simulated` these equal the public key; for `Ed25519`
/// they are the signing seed.
#[derive(Clone)]
pub struct SecretKey([u8; 32]);

impl fmt::Debug for SecretKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SecretKey(..)")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Signature {
    scheme: SigScheme,
    bytes: Vec<u8>,
}

#[derive(Debug, Clone)]
pub struct KeyPair {
    public: PublicKey,
    secret: SecretKey,
}

const SIM_SIG_TAG: &[u8] = b"blocksim/sig/simulated/v1";

impl KeyPair {
    pub fn public(&self) -> &PublicKey {
        &self.public
    }

    pub fn address(&self) -> Address {
        self.public.address()
    }

    pub fn scheme(&self) -> SigScheme {
        self.public.scheme
    }

    pub fn sign(&self, msg: &[u8]) -> Signature {
        match self.public.scheme {
            SigScheme::Simulated => {
                let mut m = Vec::with_capacity(SIM_SIG_TAG.len() + 32 + msg.len());
                m.extend_from_slice(SIM_SIG_TAG);
                m.extend_from_slice(&self.public.bytes);
                m.extend_from_slice(msg);
                Signature { scheme: SigScheme::Simulated, bytes: sha256(&m).to_vec() }
            }
            SigScheme::Ed25519 => {
                let sk = ed25519_dalek::SigningKey::from_bytes(&self.secret.0);
                Signature {
                    scheme: SigScheme::Ed25519,
                    bytes: sk.sign(msg).to_bytes().to_vec(),
                }
            }
        }
    }
}

impl PublicKey {
    pub fn scheme(&self) -> SigScheme {
        self.scheme
    }

    /// Scheme byte followed by the raw key. This is what gets hashed into
    /// addresses and transaction ids.
    pub fn canonical_bytes(&self) -> [u8; 33] {
        let mut out = [0u8; 33];
        out[0] = self.scheme.id_byte();
        out[1..].copy_from_slice(&self.bytes);
        out
    }

    pub fn from_canonical_bytes(b: &[u8]) -> Option<Self> {
        if b.len() != 33 {
            return None;
        }
        let scheme = SigScheme::from_id_byte(b[0])?;
        let mut bytes = [0u8; 32];
        bytes.copy_from_slice(&b[1..]);
        Some(PublicKey { scheme, bytes })
    }

    pub fn address(&self) -> Address {
        Address(sha256(&self.canonical_bytes()))
    }

    pub fn verify(&self, msg: &[u8], sig: &Signature) -> bool {
        if sig.scheme != self.scheme {
            return false;
        }
        match self.scheme {
            SigScheme::Simulated => {
                let mut m = Vec::with_capacity(SIM_SIG_TAG.len() + 32 + msg.len());
                m.extend_from_slice(SIM_SIG_TAG);
                m.extend_from_slice(&self.bytes);
                m.extend_from_slice(msg);
                sig.bytes.as_slice() == sha256(&m)
            }
            SigScheme::Ed25519 => {
                let Ok(vk) = ed25519_dalek::VerifyingKey::from_bytes(&self.bytes) else {
                    return false;
                };
                let Ok(sig_bytes) = <[u8; 64]>::try_from(sig.bytes.as_slice()) else {
                    return false;
                };
                vk.verify(msg, &ed25519_dalek::Signature::from_bytes(&sig_bytes)).is_ok()
            }
        }
    }
}

impl Signature {
    pub fn scheme(&self) -> SigScheme {
        self.scheme
    }

    /// Scheme byte followed by the signature body (32 bytes simulated,
    /// 64 bytes ed25519).
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(1 + self.bytes.len());
        out.push(self.scheme.id_byte());
        out.extend_from_slice(&self.bytes);
        out
    }

    pub fn from_canonical_bytes(b: &[u8]) -> Option<Self> {
        let (&id, body) = b.split_first()?;
        let scheme = SigScheme::from_id_byte(id)?;
        let want = match scheme {
            SigScheme::Simulated => 32,
            SigScheme::Ed25519 => 64,
        };
        if body.len() != want {
            return None;
        }
        Some(Signature { scheme, bytes: body.to_vec() })
    }

    /// Placeholder carried by inputs that have not been signed yet.
    pub fn unsigned(scheme: SigScheme) -> Self {
        let len = match scheme {
            SigScheme::Simulated => 32,
            SigScheme::Ed25519 => 64,
        };
        Signature { scheme, bytes: vec![0; len] }
    }
}

/// SHA-256 of a public key's canonical bytes. Funds are always paid to an
/// address, never to a raw key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Address(pub [u8; 32]);

impl Address {
    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Option<Self> {
        let v = hex::decode(s).ok()?;
        let arr: [u8; 32] = v.try_into().ok()?;
        Some(Address(arr))
    }

    /// First four bytes as hex, for human-oriented output.
    pub fn short(&self) -> String {
        hex::encode(&self.0[..4])
    }
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl Serialize for Address {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Address {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Address::from_hex(&s).ok_or_else(|| serde::de::Error::custom("bad address hex"))
    }
}

impl Serialize for PublicKey {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(self.canonical_bytes()))
    }
}

impl<'de> Deserialize<'de> for PublicKey {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        let v = hex::decode(&s).map_err(serde::de::Error::custom)?;
        PublicKey::from_canonical_bytes(&v)
            .ok_or_else(|| serde::de::Error::custom("bad public key bytes"))
    }
}

impl Serialize for Signature {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(self.canonical_bytes()))
    }
}

impl<'de> Deserialize<'de> for Signature {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        let v = hex::decode(&s).map_err(serde::de::Error::custom)?;
        Signature::from_canonical_bytes(&v)
            .ok_or_else(|| serde::de::Error::custom("bad signature bytes"))
    }
}
