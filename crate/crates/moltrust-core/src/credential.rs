//! Verifiable credentials: issuance, verification, revocation.
//!
//! Two rules shape everything here. Expiry is mandatory and strict — no
//! open-ended credentials, no grace period, UTC comparison. Revocation
//! checking is fail-closed — if the revocation status cannot be obtained the
//! credential is denied, never accepted.
//!
//! Verification runs a fixed check order (issuer → signature → expiry →
//! revocation) so the reported status is deterministic for a given input.

use std::collections::BTreeMap;

use base64::Engine as _;
use chrono::{DateTime, Utc};
use flate2::write::GzEncoder;
use flate2::Compression;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;
use uuid::Uuid;

use crate::canonical::to_canonical_json;
use crate::crypto::{sign, verify, Signature, SigningKey};
use crate::identity::{Did, DidDocument, DidResolver};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CredentialError {
    #[error("ttl must be greater than zero")]
    ZeroTtl,
    #[error("signing key is not an active key of the issuer document")]
    KeyNotActive,
    #[error("revoking key does not belong to the credential issuer")]
    NotIssuer,
    #[error("credential already revoked")]
    AlreadyRevoked,
    #[error("unknown credential: {0}")]
    UnknownCredential(Uuid),
    #[error("claims must be a JSON object")]
    ClaimsNotObject,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CredentialProof {
    pub verification_key_id: String,
    pub signature: Signature,
}

/// A signed, tamper-evident attestation with mandatory expiry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct VerifiableCredential {
    pub id: Uuid,
    #[serde(rename = "type")]
    pub credential_type: String,
    pub issuer: Did,
    pub subject: Did,
    pub claims: Value,
    pub issued_at: DateTime<Utc>,
    pub expires_at: DateTime<Utc>,
    pub revocation_endpoint: String,
    pub proof: CredentialProof,
}

impl VerifiableCredential {
    /// Canonical bytes of the credential with the proof removed — the exact
    /// message the issuer signs.
    pub fn signing_payload(&self) -> Vec<u8> {
        let mut value = serde_json::to_value(self).expect("credential serializes");
        value
            .as_object_mut()
            .expect("credential is an object")
            .remove("proof");
        crate::canonical::canonicalize(&value).expect("credential canonicalizes")
    }
}

/// Signed notice that a credential has been revoked.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RevocationEvent {
    pub credential_id: Uuid,
    pub issuer: Did,
    pub revoked_at: DateTime<Utc>,
    pub reason: String,
    pub signature: Signature,
}

impl RevocationEvent {
    pub fn signing_payload(
        credential_id: &Uuid,
        issuer: &Did,
        revoked_at: DateTime<Utc>,
        reason: &str,
    ) -> Vec<u8> {
        to_canonical_json(&serde_json::json!({
            "credentialId": credential_id,
            "issuer": issuer.to_string(),
            "reason": reason,
            "revokedAt": revoked_at,
        }))
        .expect("revocation payload is plain JSON")
    }

    pub fn verify_signature(&self, issuer_doc: &DidDocument) -> bool {
        let payload = Self::signing_payload(
            &self.credential_id,
            &self.issuer,
            self.revoked_at,
            &self.reason,
        );
        issuer_doc
            .active_methods()
            .any(|m| verify(&m.public_key_multibase, &payload, &self.signature))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VerificationStatus {
    Valid,
    Expired,
    Revoked,
    BadSignature,
    RevocationUnreachable,
    IssuerUnknown,
}

impl VerificationStatus {
    /// Everything except `Valid` is a denial, including an unreachable
    /// revocation endpoint.
    pub fn is_denial(&self) -> bool {
        !matches!(self, VerificationStatus::Valid)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct VerificationResult {
    pub status: VerificationStatus,
    pub checked_at: DateTime<Utc>,
}

/// What a revocation checker reports for a credential id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RevocationStatusView {
    NotRevoked,
    Revoked { at: DateTime<Utc>, reason: String },
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RevocationCheckError {
    #[error("revocation endpoint unreachable: {0}")]
    Unreachable(String),
}

/// Source of revocation status. An `Err` means the status could not be
/// obtained and the credential must be denied.
pub trait RevocationChecker {
    fn status(&self, credential_id: &Uuid) -> Result<RevocationStatusView, RevocationCheckError>;
}

/// Checker double that simulates an unreachable endpoint.
pub struct UnreachableChecker;

impl RevocationChecker for UnreachableChecker {
    fn status(&self, _: &Uuid) -> Result<RevocationStatusView, RevocationCheckError> {
        Err(RevocationCheckError::Unreachable("injected fault".into()))
    }
}

/// Issue a credential valid for `ttl_seconds` from `now`.
#[allow(clippy::too_many_arguments)]
pub fn issue_credential(
    issuer_key: &SigningKey,
    issuer_doc: &DidDocument,
    subject: &Did,
    credential_type: &str,
    claims: Value,
    ttl_seconds: u64,
    revocation_endpoint: &str,
    now: DateTime<Utc>,
) -> Result<VerifiableCredential, CredentialError> {
    issue_credential_with_id(
        Uuid::new_v4(),
        issuer_key,
        issuer_doc,
        subject,
        credential_type,
        claims,
        ttl_seconds,
        revocation_endpoint,
        now,
    )
}

/// As [`issue_credential`] with a caller-supplied id, for deterministic
/// fixtures and replay.
#[allow(clippy::too_many_arguments)]
pub fn issue_credential_with_id(
    id: Uuid,
    issuer_key: &SigningKey,
    issuer_doc: &DidDocument,
    subject: &Did,
    credential_type: &str,
    claims: Value,
    ttl_seconds: u64,
    revocation_endpoint: &str,
    now: DateTime<Utc>,
) -> Result<VerifiableCredential, CredentialError> {
    if ttl_seconds == 0 {
        return Err(CredentialError::ZeroTtl);
    }
    if !claims.is_object() {
        return Err(CredentialError::ClaimsNotObject);
    }
    let issuer_vk = issuer_key.verifying_key();
    let key_id = issuer_doc
        .active_methods()
        .find(|m| m.public_key_multibase == issuer_vk)
        .map(|m| m.key_id.clone())
        .ok_or(CredentialError::KeyNotActive)?;

    let mut vc = VerifiableCredential {
        id,
        credential_type: credential_type.to_string(),
        issuer: issuer_doc.id.clone(),
        subject: subject.clone(),
        claims,
        issued_at: now,
        expires_at: now + chrono::Duration::seconds(ttl_seconds as i64),
        revocation_endpoint: revocation_endpoint.to_string(),
        proof: CredentialProof {
            verification_key_id: key_id,
            // placeholder, replaced below once the payload is fixed
            signature: Signature::from_bytes(&[0u8; 64]),
        },
    };
    let payload = vc.signing_payload();
    vc.proof.signature = sign(issuer_key, &payload);
    Ok(vc)
}

/// Verify a credential at time `now`.
///
/// Checks run in a fixed order and the first failure is the reported status:
/// issuer resolvable, proof verifies under an *active* issuer key, not
/// expired (`now < expiresAt`, no grace period), not revoked. A revocation
/// checker fault yields `RevocationUnreachable`, which is a denial.
pub fn verify_credential(
    vc: &VerifiableCredential,
    resolver: &dyn DidResolver,
    revocation: &dyn RevocationChecker,
    now: DateTime<Utc>,
) -> VerificationResult {
    let status = verification_status(vc, resolver, revocation, now);
    VerificationResult {
        status,
        checked_at: now,
    }
}

fn verification_status(
    vc: &VerifiableCredential,
    resolver: &dyn DidResolver,
    revocation: &dyn RevocationChecker,
    now: DateTime<Utc>,
) -> VerificationStatus {
    let issuer_doc = match resolver.resolve(&vc.issuer) {
        Ok(doc) => doc,
        Err(_) => return VerificationStatus::IssuerUnknown,
    };
    let Some(key) = issuer_doc.active_key(&vc.proof.verification_key_id) else {
        return VerificationStatus::BadSignature;
    };
    if !verify(key, &vc.signing_payload(), &vc.proof.signature) {
        return VerificationStatus::BadSignature;
    }
    if now >= vc.expires_at {
        return VerificationStatus::Expired;
    }
    match revocation.status(&vc.id) {
        Ok(RevocationStatusView::NotRevoked) => VerificationStatus::Valid,
        Ok(RevocationStatusView::Revoked { .. }) => VerificationStatus::Revoked,
        Err(_) => VerificationStatus::RevocationUnreachable,
    }
}

/// Current status of a credential the store knows about.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "status")]
pub enum CredentialStatus {
    Active,
    Revoked {
        #[serde(rename = "revokedAt")]
        at: DateTime<Utc>,
        reason: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct IssuedMeta {
    issuer: Did,
    /// Position in the issuer's status bitstring.
    status_index: u64,
}

/// Issuance and revocation bookkeeping for credentials this party tracks.
///
/// Doubles as the [`RevocationChecker`] backing the registry's own
/// verifications: the store is authoritative and reachable, so absence of a
/// revocation record means "not revoked".
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CredentialStore {
    issued: BTreeMap<Uuid, IssuedMeta>,
    revocations: BTreeMap<Uuid, RevocationEvent>,
    issuer_counts: BTreeMap<String, u64>,
}

impl CredentialStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Track an issued credential, assigning it the next bitstring index for
    /// its issuer.
    pub fn record_issued(&mut self, vc: &VerifiableCredential) {
        let issuer_key = vc.issuer.to_string();
        let index = self.issuer_counts.entry(issuer_key).or_insert(0);
        self.issued.entry(vc.id).or_insert_with(|| IssuedMeta {
            issuer: vc.issuer.clone(),
            status_index: *index,
        });
        *index += 1;
    }

    pub fn contains(&self, id: &Uuid) -> bool {
        self.issued.contains_key(id)
    }

    pub fn issuer_of(&self, id: &Uuid) -> Option<&Did> {
        self.issued.get(id).map(|m| &m.issuer)
    }

    pub fn apply_revocation(&mut self, event: RevocationEvent) -> Result<(), CredentialError> {
        let meta = self
            .issued
            .get(&event.credential_id)
            .ok_or(CredentialError::UnknownCredential(event.credential_id))?;
        if meta.issuer != event.issuer {
            return Err(CredentialError::NotIssuer);
        }
        if self.revocations.contains_key(&event.credential_id) {
            return Err(CredentialError::AlreadyRevoked);
        }
        self.revocations.insert(event.credential_id, event);
        Ok(())
    }

    pub fn check_status(&self, id: &Uuid) -> Result<CredentialStatus, CredentialError> {
        if !self.issued.contains_key(id) {
            return Err(CredentialError::UnknownCredential(*id));
        }
        Ok(match self.revocations.get(id) {
            Some(event) => CredentialStatus::Revoked {
                at: event.revoked_at,
                reason: event.reason.clone(),
            },
            None => CredentialStatus::Active,
        })
    }

    pub fn revocation_event(&self, id: &Uuid) -> Option<&RevocationEvent> {
        self.revocations.get(id)
    }

    /// Compact status list for one issuer: one bit per issued credential in
    /// issuance order, 1 = revoked, GZIP-compressed and base64url-encoded.
    pub fn status_bitstring(&self, issuer: &Did) -> StatusListExport {
        let count = self
            .issuer_counts
            .get(&issuer.to_string())
            .copied()
            .unwrap_or(0);
        let mut bits = vec![0u8; count.div_ceil(8) as usize];
        for (id, meta) in &self.issued {
            if &meta.issuer == issuer && self.revocations.contains_key(id) {
                bits[(meta.status_index / 8) as usize] |= 1 << (meta.status_index % 8);
            }
        }
        let mut encoder = GzEncoder::new(Vec::new(), Compression::default());
        std::io::Write::write_all(&mut encoder, &bits).expect("gzip to memory");
        let compressed = encoder.finish().expect("gzip to memory");
        StatusListExport {
            issuer: issuer.clone(),
            credential_count: count,
            encoded_list: base64::engine::general_purpose::URL_SAFE_NO_PAD.encode(compressed),
        }
    }
}

impl RevocationChecker for CredentialStore {
    fn status(&self, credential_id: &Uuid) -> Result<RevocationStatusView, RevocationCheckError> {
        Ok(match self.revocations.get(credential_id) {
            Some(event) => RevocationStatusView::Revoked {
                at: event.revoked_at,
                reason: event.reason.clone(),
            },
            None => RevocationStatusView::NotRevoked,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StatusListExport {
    pub issuer: Did,
    pub credential_count: u64,
    pub encoded_list: String,
}

/// Revoke a credential tracked by `store`. The caller must present an active
/// key of the credential's issuer.
pub fn revoke_credential(
    issuer_key: &SigningKey,
    issuer_doc: &DidDocument,
    store: &mut CredentialStore,
    credential_id: Uuid,
    reason: &str,
    now: DateTime<Utc>,
) -> Result<RevocationEvent, CredentialError> {
    let recorded_issuer = store
        .issuer_of(&credential_id)
        .ok_or(CredentialError::UnknownCredential(credential_id))?;
    let issuer_vk = issuer_key.verifying_key();
    let key_is_active = issuer_doc
        .active_methods()
        .any(|m| m.public_key_multibase == issuer_vk);
    if recorded_issuer != &issuer_doc.id || !key_is_active {
        return Err(CredentialError::NotIssuer);
    }
    let payload = RevocationEvent::signing_payload(&credential_id, &issuer_doc.id, now, reason);
    let event = RevocationEvent {
        credential_id,
        issuer: issuer_doc.id.clone(),
        revoked_at: now,
        reason: reason.to_string(),
        signature: sign(issuer_key, &payload),
    };
    store.apply_revocation(event.clone())?;
    Ok(event)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::identity::{create_did, InMemoryResolver, NATIVE_METHOD};
    use proptest::prelude::*;
    use serde_json::json;

    fn now() -> DateTime<Utc> {
        "2026-03-01T00:00:00Z".parse().unwrap()
    }

    struct Issuer {
        key: SigningKey,
        doc: DidDocument,
        resolver: InMemoryResolver,
        subject: Did,
    }

    fn setup() -> Issuer {
        let key = SigningKey::from_seed([40u8; 32]);
        let (_, doc) = create_did(&key.verifying_key(), NATIVE_METHOD, now());
        let subject_key = SigningKey::from_seed([41u8; 32]);
        let (subject, subject_doc) = create_did(&subject_key.verifying_key(), NATIVE_METHOD, now());
        let mut resolver = InMemoryResolver::new();
        resolver.insert(doc.clone());
        resolver.insert(subject_doc);
        Issuer {
            key,
            doc,
            resolver,
            subject,
        }
    }

    fn issue(ctx: &Issuer, ttl: u64) -> VerifiableCredential {
        issue_credential(
            &ctx.key,
            &ctx.doc,
            &ctx.subject,
            "CoreIdentity",
            json!({"tier": 1}),
            ttl,
            "https://registry.example/credentials/revoke",
            now(),
        )
        .unwrap()
    }

    #[test]
    fn ttl_sets_expiry() {
        let ctx = setup();
        let vc = issue(&ctx, 3600);
        assert_eq!((vc.expires_at - vc.issued_at).num_seconds(), 3600);
    }

    #[test]
    fn zero_ttl_rejected() {
        let ctx = setup();
        let err = issue_credential(
            &ctx.key,
            &ctx.doc,
            &ctx.subject,
            "CoreIdentity",
            json!({}),
            0,
            "https://registry.example/revoke",
            now(),
        )
        .unwrap_err();
        assert_eq!(err, CredentialError::ZeroTtl);
    }

    #[test]
    fn issued_credential_verifies_valid() {
        let ctx = setup();
        let vc = issue(&ctx, 3600);
        let store = CredentialStore::new();
        let result = verify_credential(&vc, &ctx.resolver, &store, now());
        assert_eq!(result.status, VerificationStatus::Valid);
    }

    #[test]
    fn expiry_has_no_grace_period() {
        let ctx = setup();
        let vc = issue(&ctx, 3600);
        let store = CredentialStore::new();
        let at_expiry = vc.expires_at;
        assert_eq!(
            verify_credential(&vc, &ctx.resolver, &store, at_expiry).status,
            VerificationStatus::Expired
        );
        let just_before = at_expiry - chrono::Duration::seconds(1);
        assert_eq!(
            verify_credential(&vc, &ctx.resolver, &store, just_before).status,
            VerificationStatus::Valid
        );
    }

    #[test]
    fn unreachable_revocation_is_denial() {
        let ctx = setup();
        let vc = issue(&ctx, 3600);
        let result = verify_credential(&vc, &ctx.resolver, &UnreachableChecker, now());
        assert_eq!(result.status, VerificationStatus::RevocationUnreachable);
        assert!(result.status.is_denial());
    }

    #[test]
    fn unknown_issuer_detected_first() {
        let ctx = setup();
        let vc = issue(&ctx, 3600);
        let empty = InMemoryResolver::new();
        let result = verify_credential(&vc, &empty, &CredentialStore::new(), now());
        assert_eq!(result.status, VerificationStatus::IssuerUnknown);
    }

    #[test]
    fn revoke_then_verify_reports_revoked() {
        let ctx = setup();
        let vc = issue(&ctx, 3600);
        let mut store = CredentialStore::new();
        store.record_issued(&vc);
        assert_eq!(
            store.check_status(&vc.id).unwrap(),
            CredentialStatus::Active
        );

        let event =
            revoke_credential(&ctx.key, &ctx.doc, &mut store, vc.id, "compromised", now()).unwrap();
        assert!(event.verify_signature(&ctx.doc));
        assert_eq!(
            verify_credential(&vc, &ctx.resolver, &store, now()).status,
            VerificationStatus::Revoked
        );
        assert!(matches!(
            store.check_status(&vc.id).unwrap(),
            CredentialStatus::Revoked { .. }
        ));
    }

    #[test]
    fn revoke_by_non_issuer_rejected() {
        let ctx = setup();
        let vc = issue(&ctx, 3600);
        let mut store = CredentialStore::new();
        store.record_issued(&vc);
        let stranger = SigningKey::from_seed([42u8; 32]);
        let (_, stranger_doc) = create_did(&stranger.verifying_key(), NATIVE_METHOD, now());
        let err =
            revoke_credential(&stranger, &stranger_doc, &mut store, vc.id, "x", now()).unwrap_err();
        assert_eq!(err, CredentialError::NotIssuer);
    }

    #[test]
    fn double_revoke_rejected() {
        let ctx = setup();
        let vc = issue(&ctx, 3600);
        let mut store = CredentialStore::new();
        store.record_issued(&vc);
        revoke_credential(&ctx.key, &ctx.doc, &mut store, vc.id, "first", now()).unwrap();
        let err =
            revoke_credential(&ctx.key, &ctx.doc, &mut store, vc.id, "second", now()).unwrap_err();
        assert_eq!(err, CredentialError::AlreadyRevoked);
    }

    #[test]
    fn unknown_credential_status() {
        let store = CredentialStore::new();
        let id = Uuid::new_v4();
        assert_eq!(
            store.check_status(&id).unwrap_err(),
            CredentialError::UnknownCredential(id)
        );
    }

    #[test]
    fn revocation_is_permanent() {
        let ctx = setup();
        let vc = issue(&ctx, 1_000_000);
        let mut store = CredentialStore::new();
        store.record_issued(&vc);
        revoke_credential(&ctx.key, &ctx.doc, &mut store, vc.id, "gone", now()).unwrap();
        for offset in [0i64, 60, 3600, 86_400] {
            let t = now() + chrono::Duration::seconds(offset);
            assert_ne!(
                verify_credential(&vc, &ctx.resolver, &store, t).status,
                VerificationStatus::Valid
            );
        }
    }

    #[test]
    fn bitstring_marks_revoked_indices() {
        let ctx = setup();
        let mut store = CredentialStore::new();
        let vcs: Vec<_> = (0..10).map(|_| issue(&ctx, 3600)).collect();
        for vc in &vcs {
            store.record_issued(vc);
        }
        revoke_credential(&ctx.key, &ctx.doc, &mut store, vcs[3].id, "x", now()).unwrap();
        revoke_credential(&ctx.key, &ctx.doc, &mut store, vcs[8].id, "x", now()).unwrap();

        let export = store.status_bitstring(&ctx.doc.id);
        assert_eq!(export.credential_count, 10);
        let compressed = base64::engine::general_purpose::URL_SAFE_NO_PAD
            .decode(&export.encoded_list)
            .unwrap();
        let mut decoder = flate2::read::GzDecoder::new(compressed.as_slice());
        let mut bits = Vec::new();
        std::io::Read::read_to_end(&mut decoder, &mut bits).unwrap();
        assert_eq!(bits.len(), 2);
        assert_eq!(bits[0], 1 << 3);
        assert_eq!(bits[1], 1 << 0); // index 8
    }

    // Tamper evidence: mutating any field invalidates the proof.
    proptest! {
        #[test]
        fn tampering_breaks_proof(field in 0usize..6, flip in any::<u8>()) {
            let ctx = setup();
            let mut vc = issue(&ctx, 3600);
            let store = CredentialStore::new();
            let extra = (flip as u64).wrapping_add(1);
            match field {
                0 => vc.credential_type.push('x'),
                1 => vc.subject = ctx.doc.id.clone(),
                2 => vc.claims = json!({"tier": extra, "injected": true}),
                3 => vc.issued_at += chrono::Duration::seconds(extra as i64),
                4 => vc.expires_at += chrono::Duration::seconds(extra as i64),
                _ => vc.revocation_endpoint.push('x'),
            }
            let result = verify_credential(&vc, &ctx.resolver, &store, now());
            prop_assert_eq!(result.status, VerificationStatus::BadSignature);
        }
    }
}
