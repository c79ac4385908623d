//! Cross-protocol mappings and the conformance vector harness.
//!
//! Three independent surfaces live here:
//!
//! - the qntm ConstraintEvaluation mapping (five facets: scope, spend, time,
//!   reputation, reversibility) and the APS grade quantization of trust
//!   scores;
//! - ingestion types for kernel-monitor violation events (newline-delimited
//!   JSON in the Falco output shape, agent DID carried in a container label);
//! - the five behavior vectors TV-001..TV-005 exercising delegation,
//!   deny-precedence, and attenuation, plus a SHA-256 drift check over the
//!   generated conformance document.

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;
use uuid::Uuid;

use crate::aae::{
    attenuation_check, evaluate, verify_delegation_chain, ActionRequest, AttenuationError,
    AuthorizationEnvelope, ChainError, Decision, DecisionKind, DenyReason, EnvelopeBuilder,
    EvaluateError, Money,
};
use crate::canonical::to_canonical_json;
use crate::crypto::{digest, Digest, SigningKey};
use crate::identity::{create_did, Did, DidResolver, InMemoryResolver, NATIVE_METHOD};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum InteropError {
    #[error("score {0} outside [0, 100]")]
    OutOfRange(String),
    #[error("malformed kernel event: {0}")]
    MalformedEvent(String),
}

// --- qntm Authority Constraints mapping ---

/// Names of the five qntm ConstraintEvaluation facets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QntmFacet {
    Scope,
    Spend,
    Time,
    Reputation,
    Reversibility,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct QntmConstraintEvaluation {
    /// From `mandate.allowedActions`.
    pub scope: Vec<String>,
    /// From `constraints.financial.autonomousThreshold`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spend: Option<Money>,
    /// From `constraints.time.ttlSeconds`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub time: Option<u64>,
    /// From `constraints.counterpartyMinScore`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reputation: Option<f64>,
    /// From `mandate.delegation.allowed`: a non-delegable envelope is a
    /// non-reversible commitment, so `reversible = delegation.allowed`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reversible: Option<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QntmMapping {
    pub evaluation: QntmConstraintEvaluation,
    /// Facets whose source field is absent from the envelope.
    pub missing: Vec<QntmFacet>,
}

/// Map an envelope onto the five qntm facets. Facets without a source field
/// are omitted and reported in `missing`.
pub fn map_to_qntm(env: &AuthorizationEnvelope) -> QntmMapping {
    let mut missing = Vec::new();

    let spend = match &env.constraints.financial {
        Some(fin) => match fin.autonomous_threshold {
            Some(value) => Some(Money {
                value,
                currency: fin.currency.clone(),
            }),
            None => {
                missing.push(QntmFacet::Spend);
                None
            }
        },
        None => {
            missing.push(QntmFacet::Spend);
            None
        }
    };

    let reputation = env.constraints.counterparty_min_score;
    if reputation.is_none() {
        missing.push(QntmFacet::Reputation);
    }

    QntmMapping {
        evaluation: QntmConstraintEvaluation {
            scope: env.mandate.allowed_actions.clone(),
            spend,
            time: Some(env.constraints.time.ttl_seconds),
            reputation,
            reversible: Some(env.mandate.delegation.allowed),
        },
        missing,
    }
}

// --- APS provider attestation mapping ---

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ApsGrade {
    pub grade: u8,
    pub source_score: f64,
}

/// Quantize a trust score into APS grades: 0 below 25, 1 in [25, 50),
/// 2 in [50, 75), 3 at 75 and above.
pub fn aps_grade(score: f64) -> Result<ApsGrade, InteropError> {
    if !(0.0..=100.0).contains(&score) {
        return Err(InteropError::OutOfRange(score.to_string()));
    }
    let grade = if score < 25.0 {
        0
    } else if score < 50.0 {
        1
    } else if score < 75.0 {
        2
    } else {
        3
    };
    Ok(ApsGrade {
        grade,
        source_score: score,
    })
}

// --- kernel-monitor event ingestion ---

/// Container label carrying the agent DID in kernel monitor events.
pub const KERNEL_EVENT_DID_LABEL: &str = "container.labels.moltrust_did";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct KernelViolationEvent {
    pub rule_name: String,
    pub agent_did: Did,
    pub syscall_class: String,
    pub resource: String,
    pub observed_at: DateTime<Utc>,
    pub raw_payload: Value,
}

impl KernelViolationEvent {
    /// Idempotency key: SHA-256 over rule, agent DID, and observation time.
    /// Duplicate deliveries of the same event map to the same key.
    pub fn dedup_key(&self) -> Digest {
        let bytes = format!(
            "{}\n{}\n{}",
            self.rule_name,
            self.agent_did,
            self.observed_at.to_rfc3339()
        );
        digest(bytes.as_bytes())
    }
}

/// Parse one kernel-monitor event from its JSON wire form:
/// `{"rule": ..., "time": ..., "output_fields": {...}}` with the agent DID in
/// the `container.labels.moltrust_did` output field.
pub fn parse_kernel_event(raw: &Value) -> Result<KernelViolationEvent, InteropError> {
    let object = raw
        .as_object()
        .ok_or_else(|| InteropError::MalformedEvent("event is not an object".into()))?;
    let rule_name = object
        .get("rule")
        .and_then(Value::as_str)
        .ok_or_else(|| InteropError::MalformedEvent("missing rule".into()))?
        .to_string();
    let observed_at = object
        .get("time")
        .and_then(Value::as_str)
        .and_then(|s| s.parse::<DateTime<Utc>>().ok())
        .ok_or_else(|| InteropError::MalformedEvent("missing or unparseable time".into()))?;
    let fields = object
        .get("output_fields")
        .and_then(Value::as_object)
        .ok_or_else(|| InteropError::MalformedEvent("missing output_fields".into()))?;
    let agent_did = fields
        .get(KERNEL_EVENT_DID_LABEL)
        .and_then(Value::as_str)
        .and_then(|s| Did::parse(s).ok())
        .ok_or_else(|| {
            InteropError::MalformedEvent(format!("missing or invalid {KERNEL_EVENT_DID_LABEL}"))
        })?;
    let syscall_class = fields
        .get("syscall.type")
        .or_else(|| fields.get("evt.type"))
        .and_then(Value::as_str)
        .unwrap_or("unknown")
        .to_string();
    let resource = fields
        .get("fd.name")
        .and_then(Value::as_str)
        .unwrap_or("")
        .to_string();
    Ok(KernelViolationEvent {
        rule_name,
        agent_did,
        syscall_class,
        resource,
        observed_at,
        raw_payload: raw.clone(),
    })
}

/// Parse a newline-delimited batch, one event per line.
pub fn parse_kernel_event_stream(body: &str) -> Vec<Result<KernelViolationEvent, InteropError>> {
    body.lines()
        .map(str::trim)
        .filter(|line| !line.is_empty())
        .map(|line| {
            let value: Value = serde_json::from_str(line)
                .map_err(|e| InteropError::MalformedEvent(e.to_string()))?;
            parse_kernel_event(&value)
        })
        .collect()
}

// --- conformance vectors ---

/// The behaviors a conformance run exercises, injectable so mutation tests
/// can verify that a buggy evaluator fails the right vector.
pub trait ConformanceBehavior {
    fn evaluate(
        &self,
        env: &AuthorizationEnvelope,
        req: &ActionRequest,
        now: DateTime<Utc>,
    ) -> Result<Decision, EvaluateError>;

    fn check_attenuation(
        &self,
        parent: &AuthorizationEnvelope,
        child: &AuthorizationEnvelope,
    ) -> Result<(), AttenuationError>;

    fn verify_chain(
        &self,
        chain: &[AuthorizationEnvelope],
        resolver: &dyn DidResolver,
        now: DateTime<Utc>,
    ) -> Result<(), ChainError>;
}

/// The real implementation under test.
pub struct DefaultBehavior;

impl ConformanceBehavior for DefaultBehavior {
    fn evaluate(
        &self,
        env: &AuthorizationEnvelope,
        req: &ActionRequest,
        now: DateTime<Utc>,
    ) -> Result<Decision, EvaluateError> {
        evaluate(env, req, now)
    }

    fn check_attenuation(
        &self,
        parent: &AuthorizationEnvelope,
        child: &AuthorizationEnvelope,
    ) -> Result<(), AttenuationError> {
        attenuation_check(parent, child)
    }

    fn verify_chain(
        &self,
        chain: &[AuthorizationEnvelope],
        resolver: &dyn DidResolver,
        now: DateTime<Utc>,
    ) -> Result<(), ChainError> {
        verify_delegation_chain(chain, resolver, now)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct VectorOutcome {
    pub id: String,
    pub description: String,
    pub passed: bool,
    pub evidence: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ConformanceReport {
    pub outcomes: Vec<VectorOutcome>,
}

impl ConformanceReport {
    pub fn all_passed(&self) -> bool {
        self.outcomes.iter().all(|o| o.passed)
    }
}

/// Deterministic fixture set behind TV-001..TV-005: fixed seeds, fixed ids,
/// fixed timestamps, so the generated conformance document is reproducible
/// byte for byte.
pub struct ConformanceSuite {
    pub resolver: InMemoryResolver,
    pub now: DateTime<Utc>,
    pub holder: Did,
    /// Depth-3 attenuation chain; prefixes serve as the depth-1/depth-2
    /// vectors.
    pub chain: Vec<AuthorizationEnvelope>,
    /// Envelope whose allow and deny sets overlap on the probe action.
    pub overlap_envelope: AuthorizationEnvelope,
    /// Child that widens its parent's scope.
    pub widening_child: AuthorizationEnvelope,
    pub probe_action: String,
    pub narrowed_action: String,
}

fn fixed_uuid(tag: u128) -> Uuid {
    Uuid::from_u128(0x4d6f_6c54_7275_7374_0000_0000_0000_0000 | tag)
}

impl Default for ConformanceSuite {
    fn default() -> Self {
        Self::new()
    }
}

impl ConformanceSuite {
    pub fn new() -> Self {
        let now: DateTime<Utc> = "2026-04-01T00:00:00Z".parse().unwrap();
        let issuer_key = SigningKey::from_seed([0xA1; 32]);
        let (issuer, issuer_doc) = create_did(&issuer_key.verifying_key(), NATIVE_METHOD, now);
        let holder_key = SigningKey::from_seed([0xA2; 32]);
        let (holder, holder_doc) = create_did(&holder_key.verifying_key(), NATIVE_METHOD, now);
        let mut resolver = InMemoryResolver::new();
        resolver.insert(issuer_doc);
        resolver.insert(holder_doc);

        let issued = now - Duration::hours(1);
        let expires = now + Duration::days(7);

        let root = EnvelopeBuilder::new(issuer.clone(), holder.clone(), issued, expires)
            .id(fixed_uuid(1))
            .allow("https://api.shop/**")
            .deny("https://api.shop/admin/**")
            .delegation(true, 8)
            .build_signed(&issuer_key);
        let depth2 = EnvelopeBuilder::new(issuer.clone(), holder.clone(), issued, expires)
            .id(fixed_uuid(2))
            .parent(root.id)
            .allow("https://api.shop/orders/**")
            .deny("https://api.shop/admin/**")
            .delegation(true, 7)
            .build_signed(&issuer_key);
        let depth3 = EnvelopeBuilder::new(issuer.clone(), holder.clone(), issued, expires)
            .id(fixed_uuid(3))
            .parent(depth2.id)
            .allow("https://api.shop/orders/*")
            .deny("https://api.shop/admin/**")
            .delegation(true, 6)
            .build_signed(&issuer_key);

        let overlap_envelope =
            EnvelopeBuilder::new(issuer.clone(), holder.clone(), issued, expires)
                .id(fixed_uuid(4))
                .allow("https://api.shop/**")
                .deny("https://api.shop/orders/**")
                .build_signed(&issuer_key);

        let widening_child = EnvelopeBuilder::new(issuer, holder.clone(), issued, expires)
            .id(fixed_uuid(5))
            .parent(root.id)
            .allow("https://api.shop/orders/**")
            .allow("https://api.other/**") // exceeds the root's scope
            .deny("https://api.shop/admin/**")
            .delegation(true, 7)
            .build_signed(&issuer_key);

        Self {
            resolver,
            now,
            holder,
            chain: vec![root, depth2, depth3],
            overlap_envelope,
            widening_child,
            probe_action: "https://api.shop/orders/42".to_string(),
            narrowed_action: "https://api.shop/orders/42".to_string(),
        }
    }

    fn request(&self, action: &str) -> ActionRequest {
        ActionRequest {
            actor: self.holder.clone(),
            action: action.to_string(),
            resource: None,
            amount: None,
            tool: None,
            counterparty_score: None,
            jurisdiction: None,
            timestamp: self.now,
        }
    }

    /// Canonical JSON document describing the vectors and their expected
    /// outcomes; the artifact the drift checksum covers.
    pub fn document(&self) -> String {
        let doc = serde_json::json!({
            "suite": "moltrust-conformance",
            "version": "1.0",
            "vectors": [
                {
                    "id": "TV-001",
                    "description": "top-level agent delegation: a single valid root envelope verifies and allows its scoped action",
                    "chain": [self.chain[0].clone()],
                    "request": self.request(&self.probe_action),
                    "expect": {"chain": "accepted", "decision": "allow"},
                },
                {
                    "id": "TV-002",
                    "description": "sub-agent delegation at depth 2 verifies end to end",
                    "chain": [self.chain[0].clone(), self.chain[1].clone()],
                    "request": self.request(&self.narrowed_action),
                    "expect": {"chain": "accepted", "decision": "allow"},
                },
                {
                    "id": "TV-003",
                    "description": "sub-agent delegation at depth 3 verifies end to end",
                    "chain": self.chain.clone(),
                    "request": self.request(&self.narrowed_action),
                    "expect": {"chain": "accepted", "decision": "allow"},
                },
                {
                    "id": "TV-004",
                    "description": "deny-precedence: an action matching both allowedActions and deniedActions must be denied",
                    "chain": [self.overlap_envelope.clone()],
                    "request": self.request(&self.probe_action),
                    "expect": {"decision": "deny", "reason": "explicitDeny"},
                },
                {
                    "id": "TV-005",
                    "description": "attenuation enforcement: a sub-agent scope exceeding parent scope must be rejected",
                    "chain": [self.chain[0].clone(), self.widening_child.clone()],
                    "expect": {"attenuation": "scopeExceedsParent", "chain": "rejected"},
                },
            ],
        });
        let bytes = to_canonical_json(&doc).expect("conformance document canonicalizes");
        String::from_utf8(bytes).expect("canonical JSON is UTF-8")
    }
}

/// Run TV-001..TV-005 against the default behavior.
pub fn run_conformance_vectors() -> ConformanceReport {
    run_conformance_vectors_with(&DefaultBehavior)
}

/// Run the five vectors against an injected behavior.
pub fn run_conformance_vectors_with(behavior: &dyn ConformanceBehavior) -> ConformanceReport {
    let suite = ConformanceSuite::new();
    let mut outcomes = Vec::with_capacity(5);

    for depth in 1..=3usize {
        let chain = &suite.chain[..depth];
        let chain_ok = behavior.verify_chain(chain, &suite.resolver, suite.now);
        let action = if depth == 1 {
            &suite.probe_action
        } else {
            &suite.narrowed_action
        };
        let decision = behavior.evaluate(&chain[depth - 1], &suite.request(action), suite.now);
        let passed =
            chain_ok.is_ok() && matches!(&decision, Ok(d) if d.kind == DecisionKind::Allow);
        outcomes.push(VectorOutcome {
            id: format!("TV-00{depth}"),
            description: match depth {
                1 => "top-level agent delegation".to_string(),
                d => format!("sub-agent delegation at depth {d}"),
            },
            passed,
            evidence: format!("chain: {chain_ok:?}; decision: {decision:?}"),
        });
    }

    let tv4 = behavior.evaluate(
        &suite.overlap_envelope,
        &suite.request(&suite.probe_action),
        suite.now,
    );
    let tv4_passed = matches!(
        &tv4,
        Ok(d) if d.kind == (DecisionKind::Deny { reason: DenyReason::ExplicitDeny })
    );
    outcomes.push(VectorOutcome {
        id: "TV-004".to_string(),
        description: "deny-precedence over allow".to_string(),
        passed: tv4_passed,
        evidence: format!("decision: {tv4:?}"),
    });

    let attenuation = behavior.check_attenuation(&suite.chain[0], &suite.widening_child);
    let chain_result = behavior.verify_chain(
        &[suite.chain[0].clone(), suite.widening_child.clone()],
        &suite.resolver,
        suite.now,
    );
    let tv5_passed = matches!(attenuation, Err(AttenuationError::ScopeExceedsParent(_)))
        && chain_result.is_err();
    outcomes.push(VectorOutcome {
        id: "TV-005".to_string(),
        description: "scope-widening delegation rejected".to_string(),
        passed: tv5_passed,
        evidence: format!("attenuation: {attenuation:?}; chain: {chain_result:?}"),
    });

    ConformanceReport { outcomes }
}

/// SHA-256 of a conformance document.
pub fn conformance_checksum(document: &[u8]) -> Digest {
    digest(document)
}

/// No drift when the current document still hashes to the expected digest.
pub fn verify_drift(expected: &Digest, current: &[u8]) -> bool {
    conformance_checksum(current) == *expected
}

// --- score gate ---

/// The decision a verifier-side score gate takes for a counterparty score.
/// Withheld scores never pass: fail closed.
pub fn require_score(min_score: f64, score: Option<f64>) -> bool {
    score.map(|s| s >= min_score).unwrap_or(false)
}
