//! Signature and digest primitives: Ed25519 and SHA-256.
//!
//! Wire encodings follow common DID tooling: keys and signatures travel as
//! multibase base58-btc strings (`z` prefix), digests as lowercase unprefixed
//! hex. These types serialize in exactly those forms.

use ed25519_dalek::Verifier;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest as _, Sha256};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CryptoError {
    #[error("bad key material: {0}")]
    BadKey(String),
    #[error("bad multibase encoding: {0}")]
    BadEncoding(String),
}

/// Ed25519 signing key, held as the 32-byte seed.
#[derive(Clone)]
pub struct SigningKey(ed25519_dalek::SigningKey);

impl SigningKey {
    pub fn from_seed(seed: [u8; 32]) -> Self {
        Self(ed25519_dalek::SigningKey::from_bytes(&seed))
    }

    pub fn from_seed_hex(hex_seed: &str) -> Result<Self, CryptoError> {
        let bytes = hex::decode(hex_seed.trim())
            .map_err(|e| CryptoError::BadKey(format!("seed hex: {e}")))?;
        let seed: [u8; 32] = bytes
            .try_into()
            .map_err(|_| CryptoError::BadKey("seed must be 32 bytes".into()))?;
        Ok(Self::from_seed(seed))
    }

    pub fn seed_hex(&self) -> String {
        hex::encode(self.0.to_bytes())
    }

    pub fn verifying_key(&self) -> VerifyingKey {
        VerifyingKey(self.0.verifying_key())
    }
}

impl std::fmt::Debug for SigningKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("SigningKey(..)")
    }
}

/// Ed25519 public key (32 bytes).
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct VerifyingKey(ed25519_dalek::VerifyingKey);

impl VerifyingKey {
    pub fn from_bytes(bytes: &[u8; 32]) -> Result<Self, CryptoError> {
        ed25519_dalek::VerifyingKey::from_bytes(bytes)
            .map(Self)
            .map_err(|e| CryptoError::BadKey(e.to_string()))
    }

    pub fn to_bytes(&self) -> [u8; 32] {
        self.0.to_bytes()
    }

    pub fn to_multibase(&self) -> String {
        multibase_encode(&self.to_bytes())
    }

    pub fn from_multibase(s: &str) -> Result<Self, CryptoError> {
        let bytes = multibase_decode(s)?;
        let arr: [u8; 32] = bytes
            .try_into()
            .map_err(|_| CryptoError::BadEncoding("key must be 32 bytes".into()))?;
        Self::from_bytes(&arr)
    }
}

impl std::fmt::Debug for VerifyingKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "VerifyingKey({})", self.to_multibase())
    }
}

impl std::fmt::Display for VerifyingKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.to_multibase())
    }
}

/// Detached Ed25519 signature (64 bytes).
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct Signature(ed25519_dalek::Signature);

impl Signature {
    pub fn to_bytes(&self) -> [u8; 64] {
        self.0.to_bytes()
    }

    pub fn from_bytes(bytes: &[u8; 64]) -> Self {
        Self(ed25519_dalek::Signature::from_bytes(bytes))
    }

    pub fn to_multibase(&self) -> String {
        multibase_encode(&self.to_bytes())
    }

    pub fn from_multibase(s: &str) -> Result<Self, CryptoError> {
        let bytes = multibase_decode(s)?;
        let arr: [u8; 64] = bytes
            .try_into()
            .map_err(|_| CryptoError::BadEncoding("signature must be 64 bytes".into()))?;
        Ok(Self::from_bytes(&arr))
    }
}

impl std::fmt::Debug for Signature {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Signature({})", self.to_multibase())
    }
}

/// SHA-256 output (32 bytes), hex-encoded on the wire.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Digest([u8; 32]);

impl Digest {
    pub fn from_bytes(bytes: [u8; 32]) -> Self {
        Self(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Result<Self, CryptoError> {
        let bytes =
            hex::decode(s.trim()).map_err(|e| CryptoError::BadEncoding(format!("hex: {e}")))?;
        let arr: [u8; 32] = bytes
            .try_into()
            .map_err(|_| CryptoError::BadEncoding("digest must be 32 bytes".into()))?;
        Ok(Self(arr))
    }
}

impl std::fmt::Debug for Digest {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Digest({})", self.to_hex())
    }
}

impl std::fmt::Display for Digest {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.to_hex())
    }
}

/// Sign a message. Ed25519 is deterministic: same key and message, same
/// signature.
pub fn sign(key: &SigningKey, msg: &[u8]) -> Signature {
    use ed25519_dalek::Signer;
    Signature(key.0.sign(msg))
}

/// Verify a detached signature. All invalid inputs yield `false`.
pub fn verify(key: &VerifyingKey, msg: &[u8], sig: &Signature) -> bool {
    key.0.verify(msg, &sig.0).is_ok()
}

/// SHA-256 of a byte string.
pub fn digest(msg: &[u8]) -> Digest {
    let mut hasher = Sha256::new();
    hasher.update(msg);
    Digest(hasher.finalize().into())
}

fn multibase_encode(bytes: &[u8]) -> String {
    format!("z{}", bs58::encode(bytes).into_string())
}

fn multibase_decode(s: &str) -> Result<Vec<u8>, CryptoError> {
    let rest = s
        .strip_prefix('z')
        .ok_or_else(|| CryptoError::BadEncoding("expected base58-btc 'z' prefix".into()))?;
    bs58::decode(rest)
        .into_vec()
        .map_err(|e| CryptoError::BadEncoding(e.to_string()))
}

impl Serialize for VerifyingKey {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_multibase())
    }
}

impl<'de> Deserialize<'de> for VerifyingKey {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Self::from_multibase(&s).map_err(serde::de::Error::custom)
    }
}

impl Serialize for Signature {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_multibase())
    }
}

impl<'de> Deserialize<'de> for Signature {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Self::from_multibase(&s).map_err(serde::de::Error::custom)
    }
}

impl Serialize for Digest {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Digest {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Self::from_hex(&s).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // RFC 8032 section 7.1 TEST 1: empty message.
    #[test]
    fn ed25519_rfc8032_test1() {
        let seed: [u8; 32] =
            hex::decode("9d61b19deffd5a60ba844af492ec2cc44449c5697b326919703bac031cae7f60")
                .unwrap()
                .try_into()
                .unwrap();
        let key = SigningKey::from_seed(seed);
        assert_eq!(
            hex::encode(key.verifying_key().to_bytes()),
            "d75a980182b10ab7d54bfed3c964073a0ee172f3daa62325af021a68f707511a"
        );
        let sig = sign(&key, b"");
        assert_eq!(
            hex::encode(sig.to_bytes()),
            "e5564300c360ac729086e2cc806e828a84877f1eb8e5d974d873e06522490155\
             5fb8821590a33bacc61e39701cf9b46bd25bf5f0595bbe24655141438e7a100b"
        );
        assert!(verify(&key.verifying_key(), b"", &sig));
    }

    // RFC 8032 section 7.1 TEST 2: one-byte message 0x72.
    #[test]
    fn ed25519_rfc8032_test2() {
        let seed: [u8; 32] =
            hex::decode("4ccd089b28ff96da9db6c346ec114e0f5b8a319f35aba624da8cf6ed4fb8a6fb")
                .unwrap()
                .try_into()
                .unwrap();
        let key = SigningKey::from_seed(seed);
        let sig = sign(&key, &[0x72]);
        assert_eq!(
            hex::encode(sig.to_bytes()),
            "92a009a9f0d4cab8720e820b5f642540a2b27b5416503f8fb3762223ebdb69da\
             085ac1e43e15996e458f3613d0f11d8c387b2eaeb4302aeeb00d291612bb0c00"
        );
    }

    #[test]
    fn signing_is_deterministic() {
        let key = SigningKey::from_seed([7u8; 32]);
        assert_eq!(
            sign(&key, b"payload").to_bytes(),
            sign(&key, b"payload").to_bytes()
        );
    }

    #[test]
    fn sha256_standard_vectors() {
        assert_eq!(
            digest(b"").to_hex(),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
        assert_eq!(
            digest(b"abc").to_hex(),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
        assert_ne!(digest(b"a"), digest(b"b"));
    }

    #[test]
    fn multibase_round_trip() {
        let key = SigningKey::from_seed([3u8; 32]).verifying_key();
        let encoded = key.to_multibase();
        assert!(encoded.starts_with('z'));
        assert_eq!(VerifyingKey::from_multibase(&encoded).unwrap(), key);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        // Genuine (key, msg, sig) triples verify; any single mutation of the
        // message, the signature, or the key breaks verification.
        #[test]
        fn signature_soundness(
            seed in any::<[u8; 32]>(),
            other_seed in any::<[u8; 32]>(),
            msg in prop::collection::vec(any::<u8>(), 1..64),
            msg_bit in 0usize..8,
            sig_byte in 0usize..64,
        ) {
            let key = SigningKey::from_seed(seed);
            let sig = sign(&key, &msg);
            prop_assert!(verify(&key.verifying_key(), &msg, &sig));

            let mut mutated_msg = msg.clone();
            let idx = msg_bit % mutated_msg.len();
            mutated_msg[idx] ^= 1 << (msg_bit % 8);
            prop_assert!(!verify(&key.verifying_key(), &mutated_msg, &sig));

            let mut sig_bytes = sig.to_bytes();
            sig_bytes[sig_byte] ^= 0x01;
            let mutated_sig = Signature::from_bytes(&sig_bytes);
            prop_assert!(!verify(&key.verifying_key(), &msg, &mutated_sig));

            if other_seed != seed {
                let other = SigningKey::from_seed(other_seed);
                prop_assert!(!verify(&other.verifying_key(), &msg, &sig));
            }
        }
    }
}
