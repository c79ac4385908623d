//! Registry state and the event sourcing that makes it durable.
//!
//! Every mutation is expressed as a [`RegistryEvent`], appended to the log
//! *before* it is applied and acknowledged. Events carry all nondeterminism
//! (ids, timestamps), so replaying the log reproduces the state bit for bit
//! under canonical serialization.

use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use uuid::Uuid;

use moltrust_core::credential::{CredentialStore, RevocationEvent, VerifiableCredential};
use moltrust_core::crypto::Digest;
use moltrust_core::identity::{Did, DidDocument, InMemoryResolver};
use moltrust_core::ipr::{AnchorReceipt, InteractionProofRecord, MerkleBatch};
use moltrust_core::trust::{
    AgentRecord, Endorsement, ExternalScoreImport, TrustGraph, Vertical, ViolationRecord,
};

#[derive(Debug, Error)]
pub enum ApplyError {
    #[error("event inconsistent with state: {0}")]
    Inconsistent(String),
}

/// One durable mutation. Everything a handler decides (ids, clock reads,
/// verification outcomes) is resolved before the event is built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "camelCase")]
pub enum RegistryEvent {
    AgentRegistered {
        record: AgentRecord,
        document: DidDocument,
    },
    AgentReregistered {
        old_agent: Did,
        record: AgentRecord,
        document: DidDocument,
    },
    KeyRotated {
        document: DidDocument,
    },
    EndorsementAdded {
        endorsement: Endorsement,
    },
    CredentialRegistered {
        credential: VerifiableCredential,
    },
    CredentialRevoked {
        event: RevocationEvent,
    },
    IprSubmitted {
        record: InteractionProofRecord,
    },
    IprCompleted {
        record: InteractionProofRecord,
    },
    BatchAnchored {
        batch: MerkleBatch,
        receipt: AnchorReceipt,
    },
    RegistrationAnchored {
        registration_digest: Digest,
        receipt: AnchorReceipt,
    },
    ViolationRecorded {
        record: ViolationRecord,
        /// Present for kernel-monitor events; deduplicates redeliveries.
        #[serde(skip_serializing_if = "Option::is_none")]
        dedup_key: Option<String>,
    },
    ExternalScoreImported {
        agent: Did,
        import: ExternalScoreImport,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AnchoredBatch {
    pub batch: MerkleBatch,
    pub receipt: AnchorReceipt,
}

/// The registry's full materialized state. All maps are ordered so canonical
/// serialization is deterministic.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RegistryState {
    pub identities: InMemoryResolver,
    pub graph: TrustGraph,
    pub credentials: CredentialStore,
    /// Initiator-signed records awaiting countersignature.
    pub pending_iprs: BTreeMap<Uuid, InteractionProofRecord>,
    /// Completed records not yet included in a batch.
    pub unbatched_iprs: BTreeMap<Uuid, InteractionProofRecord>,
    pub batches: Vec<AnchoredBatch>,
    /// Registration digests queued for anchoring.
    pub pending_registration_digests: Vec<Digest>,
    pub registration_receipts: Vec<AnchorReceipt>,
    /// Idempotency keys of ingested kernel events.
    pub ingested_kernel_keys: std::collections::BTreeSet<String>,
    pub applied_events: u64,
}

/// Digest of an agent registration, the unit queued for anchoring.
pub fn registration_digest(record: &AgentRecord) -> Digest {
    let bytes =
        moltrust_core::canonical::to_canonical_json(record).expect("agent record canonicalizes");
    moltrust_core::crypto::digest(&bytes)
}

impl RegistryState {
    pub fn apply(&mut self, event: &RegistryEvent) -> Result<(), ApplyError> {
        match event {
            RegistryEvent::AgentRegistered { record, document } => {
                self.graph
                    .register_agent(record.clone())
                    .map_err(|e| ApplyError::Inconsistent(e.to_string()))?;
                self.identities.insert(document.clone());
                self.pending_registration_digests
                    .push(registration_digest(record));
            }
            RegistryEvent::AgentReregistered {
                old_agent: _,
                record,
                document,
            } => {
                self.graph
                    .register_agent(record.clone())
                    .map_err(|e| ApplyError::Inconsistent(e.to_string()))?;
                self.identities.insert(document.clone());
                self.pending_registration_digests
                    .push(registration_digest(record));
            }
            RegistryEvent::KeyRotated { document } => {
                self.identities.insert(document.clone());
            }
            RegistryEvent::EndorsementAdded { endorsement } => {
                self.graph
                    .add_endorsement(endorsement.clone())
                    .map_err(|e| ApplyError::Inconsistent(e.to_string()))?;
                self.graph
                    .touch_activity(&endorsement.endorser, endorsement.timestamp);
            }
            RegistryEvent::CredentialRegistered { credential } => {
                self.credentials.record_issued(credential);
                // A held credential-type vertical counts toward the
                // subject's cross-vertical diversity.
                if let Some(vertical) = Vertical::parse(&credential.credential_type) {
                    self.graph.add_vertical(&credential.subject, vertical);
                }
                self.graph
                    .touch_activity(&credential.subject, credential.issued_at);
            }
            RegistryEvent::CredentialRevoked { event } => {
                self.credentials
                    .apply_revocation(event.clone())
                    .map_err(|e| ApplyError::Inconsistent(e.to_string()))?;
            }
            RegistryEvent::IprSubmitted { record } => {
                self.pending_iprs.insert(record.id, record.clone());
            }
            RegistryEvent::IprCompleted { record } => {
                self.pending_iprs.remove(&record.id);
                self.unbatched_iprs.insert(record.id, record.clone());
                for party in [&record.initiator, &record.responder] {
                    if self.graph.agent(party).is_some() {
                        let _ = self.graph.add_verified_ipr(party);
                        self.graph.touch_activity(party, record.timestamp);
                    }
                }
            }
            RegistryEvent::BatchAnchored { batch, receipt } => {
                for leaf in &batch.leaves {
                    self.unbatched_iprs.remove(&leaf.ipr_id);
                }
                self.batches.push(AnchoredBatch {
                    batch: batch.clone(),
                    receipt: receipt.clone(),
                });
            }
            RegistryEvent::RegistrationAnchored {
                registration_digest,
                receipt,
            } => {
                self.pending_registration_digests
                    .retain(|d| d != registration_digest);
                self.registration_receipts.push(receipt.clone());
            }
            RegistryEvent::ViolationRecorded { record, dedup_key } => {
                if let Some(key) = dedup_key {
                    self.ingested_kernel_keys.insert(key.clone());
                }
                self.graph
                    .record_violation(
                        &record.principal,
                        &record.agent,
                        record.kind,
                        record.severity,
                        &record.detail,
                        record.timestamp,
                        record.id,
                    )
                    .map_err(|e| ApplyError::Inconsistent(e.to_string()))?;
            }
            RegistryEvent::ExternalScoreImported { agent, import } => {
                self.graph
                    .add_external_import(agent, *import)
                    .map_err(|e| ApplyError::Inconsistent(e.to_string()))?;
            }
        }
        self.applied_events += 1;
        Ok(())
    }

    /// Canonical byte form of the whole state; the unit of replay
    /// comparison.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        moltrust_core::canonical::to_canonical_json(self).expect("state canonicalizes")
    }

    pub fn state_digest(&self) -> Digest {
        moltrust_core::crypto::digest(&self.canonical_bytes())
    }
}

/// Timestamps that bound batching decisions: the latest completion time seen.
pub fn latest_completion(state: &RegistryState) -> Option<DateTime<Utc>> {
    state.unbatched_iprs.values().map(|r| r.timestamp).max()
}
