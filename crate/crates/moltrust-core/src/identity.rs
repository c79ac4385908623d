//! Decentralized identifiers and DID documents.
//!
//! A DID is created from an Ed25519 public key and resolves to a
//! [`DidDocument`] listing the identity's verification keys. Rotated keys are
//! never deleted — they stay in the document marked revoked, so historical
//! signatures remain attributable while control checks only ever accept
//! currently-active keys.

use chrono::{DateTime, Utc};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::json;
use thiserror::Error;

use crate::canonical::to_canonical_json;
use crate::crypto::{digest, sign, verify, Signature, SigningKey, VerifyingKey};

/// Native DID method operated by the reference registry.
pub const NATIVE_METHOD: &str = "moltrust";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum IdentityError {
    #[error("malformed DID: {0}")]
    MalformedDid(String),
    #[error("rotation not authorized by an active key")]
    UnauthorizedRotation,
    #[error("key {0} not found in document")]
    UnknownKey(String),
    #[error("key id {0} already present in document")]
    DuplicateKeyId(String),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ResolveError {
    #[error("DID not found: {0}")]
    NotFound(String),
}

/// A decentralized identifier: `did:<method>:<method-specific-id>`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Did {
    method: String,
    method_specific_id: String,
}

impl Did {
    pub fn new(method: &str, method_specific_id: &str) -> Result<Self, IdentityError> {
        if method.is_empty() || method_specific_id.is_empty() {
            return Err(IdentityError::MalformedDid(
                "method and id must be non-empty".into(),
            ));
        }
        let url_safe = |s: &str| {
            s.chars()
                .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
        };
        if !url_safe(method) || !url_safe(method_specific_id) {
            return Err(IdentityError::MalformedDid(format!(
                "did:{method}:{method_specific_id}"
            )));
        }
        Ok(Self {
            method: method.to_string(),
            method_specific_id: method_specific_id.to_string(),
        })
    }

    pub fn parse(s: &str) -> Result<Self, IdentityError> {
        let rest = s
            .strip_prefix("did:")
            .ok_or_else(|| IdentityError::MalformedDid(s.to_string()))?;
        let (method, id) = rest
            .split_once(':')
            .ok_or_else(|| IdentityError::MalformedDid(s.to_string()))?;
        Self::new(method, id)
    }

    pub fn method(&self) -> &str {
        &self.method
    }

    pub fn method_specific_id(&self) -> &str {
        &self.method_specific_id
    }
}

impl std::fmt::Display for Did {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "did:{}:{}", self.method, self.method_specific_id)
    }
}

impl std::fmt::Debug for Did {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{self}")
    }
}

impl std::str::FromStr for Did {
    type Err = IdentityError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s)
    }
}

impl Serialize for Did {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Did {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Self::parse(&s).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KeyStatus {
    Active,
    Revoked,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct VerificationMethod {
    pub key_id: String,
    pub public_key_multibase: VerifyingKey,
    pub status: KeyStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub revoked_at: Option<DateTime<Utc>>,
}

/// The public record for a DID. Serializes in the `.well-known/did.json`
/// shape served by the registry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DidDocument {
    pub id: Did,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub controller: Option<Did>,
    pub verification_methods: Vec<VerificationMethod>,
    pub created: DateTime<Utc>,
    pub updated: DateTime<Utc>,
}

impl DidDocument {
    pub fn active_methods(&self) -> impl Iterator<Item = &VerificationMethod> {
        self.verification_methods
            .iter()
            .filter(|m| m.status == KeyStatus::Active)
    }

    pub fn method_by_id(&self, key_id: &str) -> Option<&VerificationMethod> {
        self.verification_methods
            .iter()
            .find(|m| m.key_id == key_id)
    }

    /// Active verification key matching `key_id`, if any.
    pub fn active_key(&self, key_id: &str) -> Option<&VerifyingKey> {
        self.method_by_id(key_id)
            .filter(|m| m.status == KeyStatus::Active)
            .map(|m| &m.public_key_multibase)
    }
}

/// A signed authorization to replace one verification key with another.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct KeyRotationRecord {
    pub did: Did,
    pub old_key_id: String,
    pub new_key_id: String,
    pub timestamp: DateTime<Utc>,
    pub authorizing_signature: Signature,
}

impl KeyRotationRecord {
    /// Canonical payload the old key signs to authorize the rotation.
    pub fn signing_payload(
        did: &Did,
        old_key_id: &str,
        new_key_id: &str,
        new_key: &VerifyingKey,
        timestamp: DateTime<Utc>,
    ) -> Vec<u8> {
        to_canonical_json(&json!({
            "did": did.to_string(),
            "newKey": new_key.to_multibase(),
            "newKeyId": new_key_id,
            "oldKeyId": old_key_id,
            "timestamp": timestamp,
        }))
        .expect("rotation payload is plain JSON")
    }

    pub fn create(
        old_key: &SigningKey,
        did: &Did,
        old_key_id: &str,
        new_key_id: &str,
        new_key: &VerifyingKey,
        timestamp: DateTime<Utc>,
    ) -> Self {
        let payload = Self::signing_payload(did, old_key_id, new_key_id, new_key, timestamp);
        Self {
            did: did.clone(),
            old_key_id: old_key_id.to_string(),
            new_key_id: new_key_id.to_string(),
            timestamp,
            authorizing_signature: sign(old_key, &payload),
        }
    }
}

/// Derive a DID and its initial document from a public key.
///
/// The method-specific id is base58-btc over the first 24 bytes of
/// SHA-256(public key): deterministic, collision-resistant, and key-derived,
/// so the same key always yields the same DID.
pub fn create_did(key: &VerifyingKey, method: &str, now: DateTime<Utc>) -> (Did, DidDocument) {
    let key_digest = digest(&key.to_bytes());
    let id = bs58::encode(&key_digest.as_bytes()[..24]).into_string();
    let did = Did::new(method, &id).expect("derived id is base58");
    let document = DidDocument {
        id: did.clone(),
        controller: None,
        verification_methods: vec![VerificationMethod {
            key_id: "key-0".to_string(),
            public_key_multibase: *key,
            status: KeyStatus::Active,
            revoked_at: None,
        }],
        created: now,
        updated: now,
    };
    (did, document)
}

/// Apply a key rotation: the old key is retained and marked revoked, the new
/// key becomes active. Fails unless the record is signed by a currently
/// active key of the document.
pub fn rotate_key(
    doc: &DidDocument,
    new_key: &VerifyingKey,
    record: &KeyRotationRecord,
) -> Result<DidDocument, IdentityError> {
    let old = doc
        .method_by_id(&record.old_key_id)
        .ok_or_else(|| IdentityError::UnknownKey(record.old_key_id.clone()))?;
    if old.status != KeyStatus::Active {
        return Err(IdentityError::UnauthorizedRotation);
    }
    let payload = KeyRotationRecord::signing_payload(
        &record.did,
        &record.old_key_id,
        &record.new_key_id,
        new_key,
        record.timestamp,
    );
    if record.did != doc.id
        || !verify(
            &old.public_key_multibase,
            &payload,
            &record.authorizing_signature,
        )
    {
        return Err(IdentityError::UnauthorizedRotation);
    }
    if doc.method_by_id(&record.new_key_id).is_some() {
        return Err(IdentityError::DuplicateKeyId(record.new_key_id.clone()));
    }

    let mut updated = doc.clone();
    for method in &mut updated.verification_methods {
        if method.key_id == record.old_key_id {
            method.status = KeyStatus::Revoked;
            method.revoked_at = Some(record.timestamp);
        }
    }
    updated.verification_methods.push(VerificationMethod {
        key_id: record.new_key_id.clone(),
        public_key_multibase: *new_key,
        status: KeyStatus::Active,
        revoked_at: None,
    });
    updated.updated = record.timestamp;
    Ok(updated)
}

/// Proof of control: the challenge signature must verify under an *active*
/// key of the document. Revoked keys never pass.
pub fn verify_control(did: &Did, challenge: &[u8], sig: &Signature, doc: &DidDocument) -> bool {
    if doc.id != *did {
        return false;
    }
    doc.active_methods()
        .any(|m| verify(&m.public_key_multibase, challenge, sig))
}

/// Resolution against some identity store. Verifiers consume exactly what
/// `resolve` returns, so the store is the trust root for key lookups.
pub trait DidResolver {
    fn resolve(&self, did: &Did) -> Result<DidDocument, ResolveError>;
}

/// Map-backed resolver for tests and the registry's in-process store.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InMemoryResolver {
    documents: std::collections::BTreeMap<String, DidDocument>,
}

impl InMemoryResolver {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, doc: DidDocument) {
        self.documents.insert(doc.id.to_string(), doc);
    }

    pub fn contains(&self, did: &Did) -> bool {
        self.documents.contains_key(&did.to_string())
    }

    pub fn get(&self, did: &Did) -> Option<&DidDocument> {
        self.documents.get(&did.to_string())
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &DidDocument)> {
        self.documents.iter()
    }
}

impl DidResolver for InMemoryResolver {
    fn resolve(&self, did: &Did) -> Result<DidDocument, ResolveError> {
        self.documents
            .get(&did.to_string())
            .cloned()
            .ok_or_else(|| ResolveError::NotFound(did.to_string()))
    }
}
