//! The Agent Authorization Envelope: a signed, machine-evaluable
//! authorization object.
//!
//! An envelope carries three blocks. **MANDATE** says what the holder may do:
//! a purpose category, URI patterns of allowed and denied actions, resource
//! attribute patterns, and delegation settings. **CONSTRAINTS** says under
//! which conditions: time windows, financial thresholds, jurisdictions, a
//! counterparty score gate, and tool obligations. **VALIDITY** says when and
//! for whom: issuer, exclusive holder binding, mandatory expiry, revocation
//! endpoint.
//!
//! Four rules bind every conformant evaluator:
//!
//! 1. **default-deny** — an action matching no allowed pattern is denied;
//! 2. **deny-precedence** — an explicit denial overrides any allow;
//! 3. **attenuation-only delegation** — a delegated envelope must be a strict
//!    subset of its parent ([`attenuation_check`]);
//! 4. **mandatory expiry** — no envelope may be open-ended.

mod attenuation;
mod pattern;

pub use attenuation::{attenuation_check, verify_delegation_chain, AttenuationError, ChainError};
pub use pattern::{match_uri_pattern, pattern_covers, PatternError};

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Datelike, Timelike, Utc};
use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use uuid::Uuid;

use crate::crypto::{sign, verify, Signature, SigningKey};
use crate::identity::{Did, DidResolver};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Purpose {
    Commerce,
    DataRead,
    DataWrite,
    Communication,
    Delegation,
    Administration,
}

/// Delegation settings. Depth is bounded at 8 by validation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DelegationPolicy {
    pub allowed: bool,
    pub max_depth: u8,
}

pub const MAX_DELEGATION_DEPTH: u8 = 8;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Mandate {
    pub purpose: Purpose,
    /// URI patterns of permitted actions. Empty means nothing is permitted.
    pub allowed_actions: Vec<String>,
    /// URI patterns of denied actions; these override any allow.
    pub denied_actions: Vec<String>,
    /// Resource attribute patterns, `key=valueGlob`.
    pub resources: Vec<String>,
    pub delegation: DelegationPolicy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weekday {
    Mon,
    Tue,
    Wed,
    Thu,
    Fri,
    Sat,
    Sun,
}

impl From<chrono::Weekday> for Weekday {
    fn from(d: chrono::Weekday) -> Self {
        match d {
            chrono::Weekday::Mon => Weekday::Mon,
            chrono::Weekday::Tue => Weekday::Tue,
            chrono::Weekday::Wed => Weekday::Wed,
            chrono::Weekday::Thu => Weekday::Thu,
            chrono::Weekday::Fri => Weekday::Fri,
            chrono::Weekday::Sat => Weekday::Sat,
            chrono::Weekday::Sun => Weekday::Sun,
        }
    }
}

/// Half-open local-time window `[start, end)` in whole hours. A window with
/// `start > end` wraps midnight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HourWindow {
    pub start: u8,
    pub end: u8,
}

impl HourWindow {
    fn contains(&self, hour: u8) -> bool {
        if self.start <= self.end {
            hour >= self.start && hour < self.end
        } else {
            hour >= self.start || hour < self.end
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TimeConstraints {
    pub ttl_seconds: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub session_seconds: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub allowed_days: Option<BTreeSet<Weekday>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub allowed_hours: Option<HourWindow>,
    /// IANA zone name in which day/hour windows are evaluated.
    pub timezone: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FinancialConstraints {
    /// Below this amount no additional check is required.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub autonomous_threshold: Option<Decimal>,
    /// At or above this amount, additional verification is required.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step_up_threshold: Option<Decimal>,
    /// At or above this amount, human sign-off is required.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub approval_threshold: Option<Decimal>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_tx_per_hour: Option<u32>,
    /// ISO 4217 code all thresholds are denominated in.
    pub currency: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Obligations {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tool_allowlist: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub require_human_approval_above: Option<Decimal>,
}

/// Operational boundaries. Absent optional facets are unconstrained; only
/// MANDATE actions follow default-deny.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Constraints {
    pub time: TimeConstraints,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub financial: Option<FinancialConstraints>,
    /// ISO 3166-1 alpha-2 codes.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jurisdictions: Option<BTreeSet<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counterparty_min_score: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub obligations: Option<Obligations>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Validity {
    pub issuer: Did,
    pub verification_key_id: String,
    /// The DID this envelope is bound to; no other agent may use it.
    pub holder: Did,
    pub issued_at: DateTime<Utc>,
    /// Mandatory; `None` only ever appears in envelopes that fail validation.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expires_at: Option<DateTime<Utc>>,
    pub revocation_endpoint: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub on_chain_anchor: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EnvelopeProof {
    pub signature: Signature,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AuthorizationEnvelope {
    pub id: Uuid,
    pub mandate: Mandate,
    pub constraints: Constraints,
    pub validity: Validity,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub parent_ref: Option<Uuid>,
    pub proof: EnvelopeProof,
}

impl AuthorizationEnvelope {
    /// Canonical bytes of the envelope with the proof removed — the message
    /// the issuer signs.
    pub fn signing_payload(&self) -> Vec<u8> {
        let mut value = serde_json::to_value(self).expect("envelope serializes");
        value
            .as_object_mut()
            .expect("envelope is an object")
            .remove("proof");
        crate::canonical::canonicalize(&value).expect("envelope canonicalizes")
    }

    pub fn verify_proof(&self, resolver: &dyn DidResolver) -> bool {
        let Ok(doc) = resolver.resolve(&self.validity.issuer) else {
            return false;
        };
        let Some(key) = doc.active_key(&self.validity.verification_key_id) else {
            return false;
        };
        verify(key, &self.signing_payload(), &self.proof.signature)
    }
}

/// The evaluation context for one requested action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ActionRequest {
    pub actor: Did,
    pub action: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub resource: Option<BTreeMap<String, String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub amount: Option<Money>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tool: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counterparty_score: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jurisdiction: Option<String>,
    pub timestamp: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Money {
    pub value: Decimal,
    pub currency: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum DenyReason {
    HolderMismatch,
    Expired,
    OutsideWindow,
    ExplicitDeny,
    NotPermitted,
    ResourceDenied,
    JurisdictionDenied,
    CounterpartyScore,
    ToolNotAllowed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", tag = "kind")]
pub enum DecisionKind {
    Allow,
    Deny { reason: DenyReason },
    StepUp,
    RequireHumanApproval,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Decision {
    #[serde(flatten)]
    pub kind: DecisionKind,
    pub matched_rule: String,
}

impl Decision {
    fn new(kind: DecisionKind, rule: impl Into<String>) -> Self {
        Self {
            kind,
            matched_rule: rule.into(),
        }
    }

    fn deny(reason: DenyReason, rule: impl Into<String>) -> Self {
        Self::new(DecisionKind::Deny { reason }, rule)
    }

    pub fn is_allow(&self) -> bool {
        matches!(self.kind, DecisionKind::Allow)
    }

    pub fn is_deny(&self) -> bool {
        matches!(self.kind, DecisionKind::Deny { .. })
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EvaluateError {
    #[error("request currency {got} does not match envelope currency {expected}")]
    CurrencyMismatch { expected: String, got: String },
}

/// Structural problems found by [`validate_envelope`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", tag = "violation", content = "detail")]
pub enum EnvelopeViolation {
    MissingExpiry,
    ExpiredValidity,
    WindowInverted,
    ThresholdOrder,
    DepthExceeded,
    UnknownIssuer,
    BadProof,
    MalformedPattern(String),
    UnknownTimezone(String),
}

/// Check an envelope's structural rules. An empty list means valid.
pub fn validate_envelope(
    env: &AuthorizationEnvelope,
    resolver: &dyn DidResolver,
    now: DateTime<Utc>,
) -> Vec<EnvelopeViolation> {
    let mut violations = Vec::new();

    match env.validity.expires_at {
        None => violations.push(EnvelopeViolation::MissingExpiry),
        Some(expires) => {
            if expires <= env.validity.issued_at {
                violations.push(EnvelopeViolation::WindowInverted);
            }
            if now >= expires {
                violations.push(EnvelopeViolation::ExpiredValidity);
            }
        }
    }

    if let Some(fin) = &env.constraints.financial {
        let ordered = [
            (&fin.autonomous_threshold, &fin.step_up_threshold),
            (&fin.step_up_threshold, &fin.approval_threshold),
            (&fin.autonomous_threshold, &fin.approval_threshold),
        ]
        .iter()
        .all(|(lo, hi)| match (lo, hi) {
            (Some(lo), Some(hi)) => lo <= hi,
            _ => true,
        });
        let non_negative = [
            &fin.autonomous_threshold,
            &fin.step_up_threshold,
            &fin.approval_threshold,
        ]
        .iter()
        .all(|t| t.is_none_or(|v| v >= Decimal::ZERO));
        if !ordered || !non_negative {
            violations.push(EnvelopeViolation::ThresholdOrder);
        }
    }

    if env.mandate.delegation.max_depth > MAX_DELEGATION_DEPTH {
        violations.push(EnvelopeViolation::DepthExceeded);
    }

    for pat in env
        .mandate
        .allowed_actions
        .iter()
        .chain(&env.mandate.denied_actions)
    {
        if pattern::match_uri_pattern(pat, "scheme://probe").is_err() {
            violations.push(EnvelopeViolation::MalformedPattern(pat.clone()));
        }
    }

    if env
        .constraints
        .time
        .timezone
        .parse::<chrono_tz::Tz>()
        .is_err()
    {
        violations.push(EnvelopeViolation::UnknownTimezone(
            env.constraints.time.timezone.clone(),
        ));
    }

    match resolver.resolve(&env.validity.issuer) {
        Err(_) => violations.push(EnvelopeViolation::UnknownIssuer),
        Ok(_) => {
            if !env.verify_proof(resolver) {
                violations.push(EnvelopeViolation::BadProof);
            }
        }
    }

    violations
}

/// Evaluate one request against an envelope at time `now`.
///
/// Gates run in a fixed order; the first failing gate determines the denial.
/// Holder binding, validity window, local-time window, deny-precedence,
/// default-deny, resource patterns, jurisdiction, counterparty score, tool
/// allowlist, and finally the financial ladder. Threshold comparisons use
/// `>=` so an amount equal to a threshold takes the stricter branch.
///
/// Facts absent from the request conservatively fail a present constraint
/// (an unknown jurisdiction or counterparty score cannot satisfy a gate),
/// with one spec'd exception: the tool allowlist only applies when the
/// request names a tool.
pub fn evaluate(
    env: &AuthorizationEnvelope,
    req: &ActionRequest,
    now: DateTime<Utc>,
) -> Result<Decision, EvaluateError> {
    // (1) Holder binding is exclusive.
    if req.actor != env.validity.holder {
        return Ok(Decision::deny(DenyReason::HolderMismatch, "holder-binding"));
    }

    // (2) Validity window, strict on both ends: issuedAt <= now < expiresAt.
    let within_window = match env.validity.expires_at {
        Some(expires) => env.validity.issued_at <= now && now < expires,
        None => false, // mandatory expiry: an open-ended envelope never passes
    };
    if !within_window {
        return Ok(Decision::deny(DenyReason::Expired, "validity-window"));
    }

    // (3) Day/hour windows in the envelope's declared zone, applied to the
    // request's UTC timestamp.
    let time = &env.constraints.time;
    if time.allowed_days.is_some() || time.allowed_hours.is_some() {
        let Ok(tz) = time.timezone.parse::<chrono_tz::Tz>() else {
            return Ok(Decision::deny(DenyReason::OutsideWindow, "timezone"));
        };
        let local = req.timestamp.with_timezone(&tz);
        if let Some(days) = &time.allowed_days {
            if !days.contains(&Weekday::from(local.weekday())) {
                return Ok(Decision::deny(DenyReason::OutsideWindow, "allowed-days"));
            }
        }
        if let Some(hours) = &time.allowed_hours {
            if !hours.contains(local.hour() as u8) {
                return Ok(Decision::deny(DenyReason::OutsideWindow, "allowed-hours"));
            }
        }
    }

    // (4) Deny-precedence. A malformed deny pattern denies conservatively.
    for pat in &env.mandate.denied_actions {
        match pattern::match_uri_pattern(pat, &req.action) {
            Ok(true) => {
                return Ok(Decision::deny(
                    DenyReason::ExplicitDeny,
                    format!("deny-precedence:{pat}"),
                ));
            }
            Ok(false) => {}
            Err(_) => {
                return Ok(Decision::deny(
                    DenyReason::ExplicitDeny,
                    format!("malformed-deny-pattern:{pat}"),
                ));
            }
        }
    }

    // (5) Default-deny: the action must match an allowed pattern. Malformed
    // allow patterns match nothing.
    let allowed = env
        .mandate
        .allowed_actions
        .iter()
        .find(|pat| pattern::match_uri_pattern(pat, &req.action).unwrap_or(false));
    let Some(allowed_pattern) = allowed else {
        return Ok(Decision::deny(DenyReason::NotPermitted, "default-deny"));
    };

    // (6) Resource attribute patterns, any-of, applied when the request
    // touches a resource.
    if !env.mandate.resources.is_empty() {
        if let Some(resource) = &req.resource {
            let matched = env
                .mandate
                .resources
                .iter()
                .any(|pat| resource_pattern_matches(pat, resource));
            if !matched {
                return Ok(Decision::deny(
                    DenyReason::ResourceDenied,
                    "resource-patterns",
                ));
            }
        }
    }

    // (7) Jurisdiction membership.
    if let Some(jurisdictions) = &env.constraints.jurisdictions {
        let permitted = req
            .jurisdiction
            .as_ref()
            .map(|j| jurisdictions.contains(&j.to_ascii_uppercase()))
            .unwrap_or(false);
        if !permitted {
            return Ok(Decision::deny(
                DenyReason::JurisdictionDenied,
                "jurisdictions",
            ));
        }
    }

    // (8) Counterparty trust score gate.
    if let Some(min) = env.constraints.counterparty_min_score {
        let passes = req.counterparty_score.map(|s| s >= min).unwrap_or(false);
        if !passes {
            return Ok(Decision::deny(
                DenyReason::CounterpartyScore,
                "counterparty-min-score",
            ));
        }
    }

    // (9) Tool allowlist, applied when the request names a tool.
    if let (
        Some(tool),
        Some(Obligations {
            tool_allowlist: Some(allowlist),
            ..
        }),
    ) = (&req.tool, env.constraints.obligations.as_ref())
    {
        if !allowlist.contains(tool) {
            return Ok(Decision::deny(DenyReason::ToolNotAllowed, "tool-allowlist"));
        }
    }

    // (10) Financial ladder.
    if let Some(amount) = &req.amount {
        if let Some(fin) = &env.constraints.financial {
            if amount.currency != fin.currency {
                return Err(EvaluateError::CurrencyMismatch {
                    expected: fin.currency.clone(),
                    got: amount.currency.clone(),
                });
            }
            let value = amount.value;
            let human_gate = env
                .constraints
                .obligations
                .as_ref()
                .and_then(|o| o.require_human_approval_above);
            if fin.approval_threshold.is_some_and(|t| value >= t)
                || human_gate.is_some_and(|t| value >= t)
            {
                return Ok(Decision::new(
                    DecisionKind::RequireHumanApproval,
                    "financial:approval",
                ));
            }
            if fin.step_up_threshold.is_some_and(|t| value >= t) {
                return Ok(Decision::new(DecisionKind::StepUp, "financial:step-up"));
            }
        }
    }

    Ok(Decision::new(
        DecisionKind::Allow,
        format!("allow:{allowed_pattern}"),
    ))
}

/// Resource patterns are `key=valueGlob`; the request's attribute map matches
/// when it carries the key and the value glob-matches.
fn resource_pattern_matches(pattern: &str, attributes: &BTreeMap<String, String>) -> bool {
    let Some((key, value_glob)) = pattern.split_once('=') else {
        return false;
    };
    attributes
        .get(key)
        .map(|v| {
            let pat: Vec<char> = value_glob.chars().collect();
            let txt: Vec<char> = v.chars().collect();
            glob_value(&pat, &txt)
        })
        .unwrap_or(false)
}

fn glob_value(pattern: &[char], text: &[char]) -> bool {
    match pattern.split_first() {
        None => text.is_empty(),
        Some(('*', rest)) => (0..=text.len()).any(|i| glob_value(rest, &text[i..])),
        Some((c, rest)) => match text.split_first() {
            Some((t, text_rest)) => c == t && glob_value(rest, text_rest),
            None => false,
        },
    }
}

/// Convenience constructor for envelopes; every test fixture and the CLI go
/// through this.
#[derive(Debug, Clone)]
pub struct EnvelopeBuilder {
    id: Uuid,
    mandate: Mandate,
    constraints: Constraints,
    validity: Validity,
    parent_ref: Option<Uuid>,
}

impl EnvelopeBuilder {
    pub fn new(
        issuer: Did,
        holder: Did,
        issued_at: DateTime<Utc>,
        expires_at: DateTime<Utc>,
    ) -> Self {
        Self {
            id: Uuid::new_v4(),
            mandate: Mandate {
                purpose: Purpose::Commerce,
                allowed_actions: Vec::new(),
                denied_actions: Vec::new(),
                resources: Vec::new(),
                delegation: DelegationPolicy {
                    allowed: false,
                    max_depth: 0,
                },
            },
            constraints: Constraints {
                time: TimeConstraints {
                    ttl_seconds: (expires_at - issued_at).num_seconds().max(0) as u64,
                    session_seconds: None,
                    allowed_days: None,
                    allowed_hours: None,
                    timezone: "UTC".to_string(),
                },
                financial: None,
                jurisdictions: None,
                counterparty_min_score: None,
                obligations: None,
            },
            validity: Validity {
                issuer,
                verification_key_id: "key-0".to_string(),
                holder,
                issued_at,
                expires_at: Some(expires_at),
                revocation_endpoint: "https://registry.invalid/credentials/revoke".to_string(),
                on_chain_anchor: None,
            },
            parent_ref: None,
        }
    }

    pub fn id(mut self, id: Uuid) -> Self {
        self.id = id;
        self
    }

    pub fn purpose(mut self, purpose: Purpose) -> Self {
        self.mandate.purpose = purpose;
        self
    }

    pub fn allow(mut self, pattern: &str) -> Self {
        self.mandate.allowed_actions.push(pattern.to_string());
        self
    }

    pub fn deny(mut self, pattern: &str) -> Self {
        self.mandate.denied_actions.push(pattern.to_string());
        self
    }

    pub fn resource(mut self, pattern: &str) -> Self {
        self.mandate.resources.push(pattern.to_string());
        self
    }

    pub fn delegation(mut self, allowed: bool, max_depth: u8) -> Self {
        self.mandate.delegation = DelegationPolicy { allowed, max_depth };
        self
    }

    pub fn no_expiry(mut self) -> Self {
        self.validity.expires_at = None;
        self
    }

    pub fn timezone(mut self, tz: &str) -> Self {
        self.constraints.time.timezone = tz.to_string();
        self
    }

    pub fn allowed_days(mut self, days: impl IntoIterator<Item = Weekday>) -> Self {
        self.constraints.time.allowed_days = Some(days.into_iter().collect());
        self
    }

    pub fn allowed_hours(mut self, start: u8, end: u8) -> Self {
        self.constraints.time.allowed_hours = Some(HourWindow { start, end });
        self
    }

    pub fn financial(mut self, fin: FinancialConstraints) -> Self {
        self.constraints.financial = Some(fin);
        self
    }

    pub fn jurisdictions(mut self, codes: impl IntoIterator<Item = &'static str>) -> Self {
        self.constraints.jurisdictions = Some(codes.into_iter().map(|c| c.to_string()).collect());
        self
    }

    pub fn jurisdiction_set(mut self, codes: BTreeSet<String>) -> Self {
        self.constraints.jurisdictions = Some(codes);
        self
    }

    pub fn counterparty_min_score(mut self, min: f64) -> Self {
        self.constraints.counterparty_min_score = Some(min);
        self
    }

    pub fn obligations(mut self, obligations: Obligations) -> Self {
        self.constraints.obligations = Some(obligations);
        self
    }

    pub fn parent(mut self, parent_id: Uuid) -> Self {
        self.parent_ref = Some(parent_id);
        self
    }

    pub fn verification_key_id(mut self, key_id: &str) -> Self {
        self.validity.verification_key_id = key_id.to_string();
        self
    }

    pub fn build_signed(self, issuer_key: &SigningKey) -> AuthorizationEnvelope {
        let mut env = AuthorizationEnvelope {
            id: self.id,
            mandate: self.mandate,
            constraints: self.constraints,
            validity: self.validity,
            parent_ref: self.parent_ref,
            proof: EnvelopeProof {
                signature: Signature::from_bytes(&[0u8; 64]),
            },
        };
        let payload = env.signing_payload();
        env.proof.signature = sign(issuer_key, &payload);
        env
    }
}

#[cfg(test)]
mod tests;
