//! The reference reputation model.
//!
//! An agent's trust score combines four weighted components with additive
//! modifiers:
//!
//! ```text
//! raw   = 0.6 * direct + 0.3 * propagated + 0.1 * cross_vertical_bonus
//!         + interaction_bonus
//! final = clamp(raw - sybil_penalty * 20 + inactivity_penalty, 0, 100)
//!         (seeds: final = max(final, base_score))
//! ```
//!
//! The direct component is the agent's received endorsements weighted by each
//! endorser's own score and exponentially time-decayed (90-day half-life),
//! squashed through `100 * m / (m + 150)`. The propagated component is the
//! decay-weighted mean of the endorsers' direct scores. Imported external
//! scores fold into the direct mass at 0.3 relative weight with a 45-day
//! half-life.
//!
//! Sybil resistance is layered. A flat penalty of 10.0 nullifies (after the
//! x20 multiplier) any non-seed agent with endorsements from fewer than three
//! distinct verticals. Independently, an endorser set whose Jaccard
//! similarity with its most similar peer exceeds 0.8 is penalized by
//! `jaccard * |endorsers| * 0.5`. Scores of non-seed agents with fewer than
//! three distinct endorser DIDs are withheld entirely. Seed agents are floored
//! at their assigned base score so the gate cannot strand the bootstrap set.
//!
//! Violations attach to the *principal* DID and survive agent
//! re-registration: shedding an agent identity does not shed its operator's
//! history.
//!
//! Endorsement weights depend on endorser scores, which depend on
//! endorsements; the engine resolves the cycle by fixed-point iteration from
//! seed base scores, stopping when the largest per-agent change drops below
//! 0.01 (at most 20 rounds). Each round's per-agent evaluations are
//! independent and run data-parallel when the `parallel` feature is enabled.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Utc};
#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use uuid::Uuid;

use crate::canonical::to_canonical_json;
use crate::crypto::{sign, verify, Signature, SigningKey};
use crate::identity::{Did, DidDocument};

pub const DIRECT_WEIGHT: f64 = 0.6;
pub const PROPAGATED_WEIGHT: f64 = 0.3;
pub const CROSS_VERTICAL_WEIGHT: f64 = 0.1;

pub const NATIVE_HALF_LIFE_DAYS: f64 = 90.0;
pub const IMPORT_HALF_LIFE_DAYS: f64 = 45.0;
pub const IMPORT_RELATIVE_WEIGHT: f64 = 0.3;

pub const CROSS_VERTICAL_BONUS_PER_VERTICAL: f64 = 10.0;
pub const CROSS_VERTICAL_BONUS_CAP: f64 = 30.0;
pub const INTERACTION_BONUS_PER_RECORD: f64 = 0.5;
pub const INTERACTION_BONUS_CAP: f64 = 10.0;

pub const JACCARD_THRESHOLD: f64 = 0.8;
pub const JACCARD_PENALTY_FACTOR: f64 = 0.5;
pub const VERTICAL_GATE_MINIMUM: usize = 3;
pub const VERTICAL_GATE_PENALTY: f64 = 10.0;
pub const SYBIL_PENALTY_MULTIPLIER: f64 = 20.0;
pub const WITHHOLD_MIN_ENDORSERS: usize = 3;

pub const INACTIVITY_GRACE_DAYS: f64 = 90.0;
pub const INACTIVITY_PENALTY_PER_DAY: f64 = 0.1;
pub const INACTIVITY_PENALTY_FLOOR: f64 = -20.0;

pub const DIRECT_SATURATION_MASS: f64 = 150.0;

pub const FIXED_POINT_EPSILON: f64 = 0.01;
pub const FIXED_POINT_MAX_ITERATIONS: usize = 20;

#[derive(Debug, Error, PartialEq)]
pub enum TrustError {
    #[error("unknown agent: {0}")]
    UnknownAgent(String),
    #[error("unknown principal: {0}")]
    UnknownPrincipal(String),
    #[error("agent already registered: {0}")]
    DuplicateAgent(String),
    #[error("agent is not operated by this principal")]
    PrincipalMismatch,
    #[error("agents cannot endorse themselves")]
    SelfEndorsement,
    #[error("jaccard of two empty sets is undefined")]
    BothEmpty,
    #[error("base score is set exactly for seed agents")]
    BaseScoreMismatch,
    #[error("score out of range: {0}")]
    ScoreOutOfRange(f64),
}

/// Canonical vertical vocabulary: the seven endorsement verticals plus the
/// eight credential-type verticals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Vertical {
    #[serde(rename = "core")]
    Core,
    #[serde(rename = "skill")]
    Skill,
    #[serde(rename = "shopping")]
    Shopping,
    #[serde(rename = "travel")]
    Travel,
    #[serde(rename = "prediction")]
    Prediction,
    #[serde(rename = "salesguard")]
    Salesguard,
    #[serde(rename = "sports")]
    Sports,
    VerifiedSkillCredential,
    BuyerAgentCredential,
    AuthorizedAgentCredential,
    TravelAgentCredential,
    PredictionTrackCredential,
    ProductProvenanceCredential,
    AuthorizedResellerCredential,
    SkillEndorsementCredential,
}

impl Vertical {
    pub const ALL: [Vertical; 15] = [
        Vertical::Core,
        Vertical::Skill,
        Vertical::Shopping,
        Vertical::Travel,
        Vertical::Prediction,
        Vertical::Salesguard,
        Vertical::Sports,
        Vertical::VerifiedSkillCredential,
        Vertical::BuyerAgentCredential,
        Vertical::AuthorizedAgentCredential,
        Vertical::TravelAgentCredential,
        Vertical::PredictionTrackCredential,
        Vertical::ProductProvenanceCredential,
        Vertical::AuthorizedResellerCredential,
        Vertical::SkillEndorsementCredential,
    ];

    pub fn parse(s: &str) -> Option<Vertical> {
        serde_json::from_value(serde_json::Value::String(s.to_string())).ok()
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Vertical::Core => "core",
            Vertical::Skill => "skill",
            Vertical::Shopping => "shopping",
            Vertical::Travel => "travel",
            Vertical::Prediction => "prediction",
            Vertical::Salesguard => "salesguard",
            Vertical::Sports => "sports",
            Vertical::VerifiedSkillCredential => "VerifiedSkillCredential",
            Vertical::BuyerAgentCredential => "BuyerAgentCredential",
            Vertical::AuthorizedAgentCredential => "AuthorizedAgentCredential",
            Vertical::TravelAgentCredential => "TravelAgentCredential",
            Vertical::PredictionTrackCredential => "PredictionTrackCredential",
            Vertical::ProductProvenanceCredential => "ProductProvenanceCredential",
            Vertical::AuthorizedResellerCredential => "AuthorizedResellerCredential",
            Vertical::SkillEndorsementCredential => "SkillEndorsementCredential",
        }
    }
}

impl std::fmt::Display for Vertical {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AgentRecord {
    pub did: Did,
    pub principal: Did,
    pub is_seed: bool,
    /// Present exactly for seed agents; the floor their score cannot fall
    /// below.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub base_score: Option<f64>,
    /// Credential-type verticals the agent holds.
    pub verticals: BTreeSet<Vertical>,
    pub registered_at: DateTime<Utc>,
    pub last_activity_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Endorsement {
    pub endorser: Did,
    pub subject: Did,
    pub vertical: Vertical,
    pub timestamp: DateTime<Utc>,
    pub signature: Signature,
}

impl Endorsement {
    pub fn signing_payload(
        endorser: &Did,
        subject: &Did,
        vertical: Vertical,
        timestamp: DateTime<Utc>,
    ) -> Vec<u8> {
        to_canonical_json(&serde_json::json!({
            "endorser": endorser.to_string(),
            "subject": subject.to_string(),
            "timestamp": timestamp,
            "vertical": vertical.as_str(),
        }))
        .expect("endorsement payload is plain JSON")
    }

    pub fn create(
        endorser_key: &SigningKey,
        endorser: &Did,
        subject: &Did,
        vertical: Vertical,
        timestamp: DateTime<Utc>,
    ) -> Self {
        let payload = Self::signing_payload(endorser, subject, vertical, timestamp);
        Self {
            endorser: endorser.clone(),
            subject: subject.clone(),
            vertical,
            timestamp,
            signature: sign(endorser_key, &payload),
        }
    }

    pub fn verify_signature(&self, endorser_doc: &DidDocument) -> bool {
        let payload =
            Self::signing_payload(&self.endorser, &self.subject, self.vertical, self.timestamp);
        endorser_doc
            .active_methods()
            .any(|m| verify(&m.public_key_multibase, &payload, &self.signature))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    PolicyViolation,
    SybilFlag,
    EndorsementPattern,
    KernelEvent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationSeverity {
    Warning,
    Fail,
    HardFail,
}

/// A recorded misbehavior, keyed by the operating principal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ViolationRecord {
    pub id: Uuid,
    pub principal: Did,
    pub agent: Did,
    pub kind: ViolationKind,
    pub severity: ViolationSeverity,
    pub detail: String,
    pub timestamp: DateTime<Utc>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExternalScoreImport {
    pub source_score: f64,
    pub imported_at: DateTime<Utc>,
}

/// Every score component, the penalties, and the clamped result.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TrustScoreBreakdown {
    pub direct_score: f64,
    pub propagated_score: f64,
    /// Unweighted bonus in {0, 10, 20, 30}; enters `raw` at weight 0.1.
    pub cross_vertical_bonus: f64,
    pub interaction_bonus: f64,
    pub sybil_penalty: f64,
    pub inactivity_penalty: f64,
    pub raw: f64,
    #[serde(rename = "final")]
    pub final_score: f64,
    pub withheld: bool,
    pub seed_floor_applied: bool,
}

/// In-memory endorsement graph plus the per-agent state scoring consumes.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrustGraph {
    agents: BTreeMap<String, AgentRecord>,
    /// Endorsements keyed by subject DID.
    endorsements: BTreeMap<String, Vec<Endorsement>>,
    /// Violations keyed by principal DID.
    violations: BTreeMap<String, Vec<ViolationRecord>>,
    verified_ipr_counts: BTreeMap<String, u64>,
    imports: BTreeMap<String, Vec<ExternalScoreImport>>,
}

impl TrustGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register_agent(&mut self, record: AgentRecord) -> Result<(), TrustError> {
        let key = record.did.to_string();
        if self.agents.contains_key(&key) {
            return Err(TrustError::DuplicateAgent(key));
        }
        if record.is_seed != record.base_score.is_some() {
            return Err(TrustError::BaseScoreMismatch);
        }
        if let Some(base) = record.base_score {
            if !(0.0..=100.0).contains(&base) {
                return Err(TrustError::ScoreOutOfRange(base));
            }
        }
        self.agents.insert(key, record);
        Ok(())
    }

    pub fn agent(&self, did: &Did) -> Option<&AgentRecord> {
        self.agents.get(&did.to_string())
    }

    pub fn agents(&self) -> impl Iterator<Item = &AgentRecord> {
        self.agents.values()
    }

    pub fn agent_count(&self) -> usize {
        self.agents.len()
    }

    pub fn endorsement_count(&self) -> usize {
        self.endorsements.values().map(Vec::len).sum()
    }

    pub fn is_known_principal(&self, principal: &Did) -> bool {
        self.agents.values().any(|a| &a.principal == principal)
    }

    pub fn add_endorsement(&mut self, endorsement: Endorsement) -> Result<(), TrustError> {
        if endorsement.endorser == endorsement.subject {
            return Err(TrustError::SelfEndorsement);
        }
        let subject_key = endorsement.subject.to_string();
        if !self.agents.contains_key(&subject_key) {
            return Err(TrustError::UnknownAgent(subject_key));
        }
        self.endorsements
            .entry(subject_key)
            .or_default()
            .push(endorsement);
        Ok(())
    }

    pub fn endorsements_of(&self, did: &Did) -> &[Endorsement] {
        self.endorsements
            .get(&did.to_string())
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn add_external_import(
        &mut self,
        agent: &Did,
        import: ExternalScoreImport,
    ) -> Result<(), TrustError> {
        if !(0.0..=100.0).contains(&import.source_score) {
            return Err(TrustError::ScoreOutOfRange(import.source_score));
        }
        let key = agent.to_string();
        if !self.agents.contains_key(&key) {
            return Err(TrustError::UnknownAgent(key));
        }
        self.imports.entry(key).or_default().push(import);
        Ok(())
    }

    pub fn imports_of(&self, did: &Did) -> &[ExternalScoreImport] {
        self.imports
            .get(&did.to_string())
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn add_verified_ipr(&mut self, did: &Did) -> Result<(), TrustError> {
        let key = did.to_string();
        if !self.agents.contains_key(&key) {
            return Err(TrustError::UnknownAgent(key));
        }
        *self.verified_ipr_counts.entry(key).or_insert(0) += 1;
        Ok(())
    }

    pub fn verified_ipr_count(&self, did: &Did) -> u64 {
        self.verified_ipr_counts
            .get(&did.to_string())
            .copied()
            .unwrap_or(0)
    }

    pub fn touch_activity(&mut self, did: &Did, now: DateTime<Utc>) {
        if let Some(agent) = self.agents.get_mut(&did.to_string()) {
            if now > agent.last_activity_at {
                agent.last_activity_at = now;
            }
        }
    }

    /// Record that an agent holds a credential-type vertical. No-op for
    /// unregistered DIDs.
    pub fn add_vertical(&mut self, did: &Did, vertical: Vertical) {
        if let Some(agent) = self.agents.get_mut(&did.to_string()) {
            agent.verticals.insert(vertical);
        }
    }

    /// Record a violation under the agent's principal. Queryable by either
    /// DID afterwards.
    #[allow(clippy::too_many_arguments)]
    pub fn record_violation(
        &mut self,
        principal: &Did,
        agent: &Did,
        kind: ViolationKind,
        severity: ViolationSeverity,
        detail: &str,
        now: DateTime<Utc>,
        id: Uuid,
    ) -> Result<ViolationRecord, TrustError> {
        if !self.is_known_principal(principal) {
            return Err(TrustError::UnknownPrincipal(principal.to_string()));
        }
        let agent_record = self
            .agents
            .get(&agent.to_string())
            .ok_or_else(|| TrustError::UnknownAgent(agent.to_string()))?;
        if &agent_record.principal != principal {
            return Err(TrustError::PrincipalMismatch);
        }
        let record = ViolationRecord {
            id,
            principal: principal.clone(),
            agent: agent.clone(),
            kind,
            severity,
            detail: detail.to_string(),
            timestamp: now,
        };
        self.violations
            .entry(principal.to_string())
            .or_default()
            .push(record.clone());
        Ok(record)
    }

    pub fn violations_for_principal(&self, principal: &Did) -> &[ViolationRecord] {
        self.violations
            .get(&principal.to_string())
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn violations_for_agent(&self, agent: &Did) -> Vec<&ViolationRecord> {
        self.violations
            .values()
            .flatten()
            .filter(|v| &v.agent == agent)
            .collect()
    }

    /// Retire one agent DID and register a fresh one under the same
    /// principal. The principal's violation history persists; the new agent
    /// starts with no endorsements (and therefore a withheld score).
    pub fn reregister_agent(
        &mut self,
        principal: &Did,
        old_agent: &Did,
        new_agent: &Did,
        now: DateTime<Utc>,
    ) -> Result<AgentRecord, TrustError> {
        let old = self
            .agents
            .get(&old_agent.to_string())
            .ok_or_else(|| TrustError::UnknownAgent(old_agent.to_string()))?;
        if &old.principal != principal {
            return Err(TrustError::PrincipalMismatch);
        }
        let record = AgentRecord {
            did: new_agent.clone(),
            principal: principal.clone(),
            is_seed: false,
            base_score: None,
            verticals: BTreeSet::new(),
            registered_at: now,
            last_activity_at: now,
        };
        self.register_agent(record.clone())?;
        Ok(record)
    }

    /// Distinct endorser DIDs of an agent.
    pub fn endorser_set(&self, did: &Did) -> BTreeSet<String> {
        self.endorsements_of(did)
            .iter()
            .map(|e| e.endorser.to_string())
            .collect()
    }

    /// Distinct verticals the agent has been endorsed in.
    pub fn endorsement_verticals(&self, did: &Did) -> BTreeSet<Vertical> {
        self.endorsements_of(did)
            .iter()
            .map(|e| e.vertical)
            .collect()
    }

    /// Verticals counted for the cross-vertical bonus: endorsement-declared
    /// plus held credential-type verticals.
    pub fn unique_verticals(&self, did: &Did) -> BTreeSet<Vertical> {
        let mut set = self.endorsement_verticals(did);
        if let Some(agent) = self.agent(did) {
            set.extend(agent.verticals.iter().copied());
        }
        set
    }
}

fn age_days(from: DateTime<Utc>, to: DateTime<Utc>) -> f64 {
    ((to - from).num_seconds().max(0) as f64) / 86_400.0
}

/// Exponential decay `2^(-age / half_life)`.
pub fn decay_factor(age_days: f64, half_life_days: f64) -> f64 {
    debug_assert!(age_days >= 0.0 && half_life_days > 0.0);
    (-age_days / half_life_days).exp2()
}

/// Set similarity `|a ∩ b| / |a ∪ b|`.
pub fn jaccard(a: &BTreeSet<String>, b: &BTreeSet<String>) -> Result<f64, TrustError> {
    if a.is_empty() && b.is_empty() {
        return Err(TrustError::BothEmpty);
    }
    let intersection = a.intersection(b).count() as f64;
    let union = a.union(b).count() as f64;
    Ok(intersection / union)
}

/// `min(unique_verticals * 10, 30)`.
pub fn cross_vertical_bonus(unique_verticals: usize) -> f64 {
    (unique_verticals as f64 * CROSS_VERTICAL_BONUS_PER_VERTICAL).min(CROSS_VERTICAL_BONUS_CAP)
}

/// `min(verified_ipr_count * 0.5, 10)`.
pub fn interaction_bonus(verified_ipr_count: u64) -> f64 {
    (verified_ipr_count as f64 * INTERACTION_BONUS_PER_RECORD).min(INTERACTION_BONUS_CAP)
}

/// Zero within the 90-day grace window, then -0.1 per idle day, floored at
/// -20.
pub fn inactivity_penalty(last_activity_at: DateTime<Utc>, now: DateTime<Utc>) -> f64 {
    let idle = age_days(last_activity_at, now);
    if idle <= INACTIVITY_GRACE_DAYS {
        0.0
    } else {
        (-(idle - INACTIVITY_GRACE_DAYS) * INACTIVITY_PENALTY_PER_DAY).max(INACTIVITY_PENALTY_FLOOR)
    }
}

/// Contribution of one imported external score to the direct mass:
/// `0.3 * source * 2^(-age/45)`.
pub fn import_contribution(
    source_score: f64,
    imported_at: DateTime<Utc>,
    now: DateTime<Utc>,
) -> f64 {
    IMPORT_RELATIVE_WEIGHT
        * source_score
        * decay_factor(age_days(imported_at, now), IMPORT_HALF_LIFE_DAYS)
}

/// Sybil penalty: the maximum of the cross-vertical gate and the Jaccard
/// cluster penalty.
///
/// The gate fires a flat 10.0 for non-seed agents endorsed in fewer than
/// three distinct verticals. The cluster penalty fires when the agent's
/// endorser set exceeds 0.8 Jaccard similarity with its most similar peer:
/// `jaccard * |endorsers| * 0.5`. Either alone already nullifies a score
/// after the x20 multiplier, so they do not stack.
pub fn sybil_penalty(
    agent: &AgentRecord,
    endorsement_vertical_count: usize,
    endorser_set: &BTreeSet<String>,
    peer_endorser_sets: &BTreeMap<String, BTreeSet<String>>,
) -> f64 {
    let gate = if !agent.is_seed && endorsement_vertical_count < VERTICAL_GATE_MINIMUM {
        VERTICAL_GATE_PENALTY
    } else {
        0.0
    };

    let mut cluster = 0.0;
    if !endorser_set.is_empty() {
        let own = agent.did.to_string();
        let mut max_similarity = 0.0f64;
        for (peer, peer_set) in peer_endorser_sets {
            if peer == &own || peer_set.is_empty() {
                continue;
            }
            let similarity = jaccard(endorser_set, peer_set).expect("sets are non-empty");
            max_similarity = max_similarity.max(similarity);
        }
        if max_similarity > JACCARD_THRESHOLD {
            cluster = max_similarity * endorser_set.len() as f64 * JACCARD_PENALTY_FACTOR;
        }
    }

    gate.max(cluster)
}

/// Direct-endorsement score: decayed, endorser-score-weighted endorsement
/// mass (plus imported-score contributions) squashed through
/// `100 * m / (m + 150)`.
pub fn direct_score(
    endorsements: &[Endorsement],
    imports: &[ExternalScoreImport],
    endorser_scores: &BTreeMap<String, f64>,
    now: DateTime<Utc>,
) -> f64 {
    let mut mass = 0.0;
    for endorsement in endorsements {
        let endorser_score = endorser_scores
            .get(&endorsement.endorser.to_string())
            .copied()
            .unwrap_or(0.0);
        mass += endorser_score
            * decay_factor(age_days(endorsement.timestamp, now), NATIVE_HALF_LIFE_DAYS);
    }
    for import in imports {
        mass += import_contribution(import.source_score, import.imported_at, now);
    }
    if mass <= 0.0 {
        0.0
    } else {
        (100.0 * mass / (mass + DIRECT_SATURATION_MASS)).clamp(0.0, 100.0)
    }
}

/// Second-order component: decay-weighted mean of the endorsers' direct
/// scores. Zero without endorsers.
pub fn propagated_score(
    endorsements: &[Endorsement],
    endorser_direct_scores: &BTreeMap<String, f64>,
    now: DateTime<Utc>,
) -> f64 {
    let mut numerator = 0.0;
    let mut denominator = 0.0;
    for endorsement in endorsements {
        let weight = decay_factor(age_days(endorsement.timestamp, now), NATIVE_HALF_LIFE_DAYS);
        let endorser_direct = endorser_direct_scores
            .get(&endorsement.endorser.to_string())
            .copied()
            .unwrap_or(0.0);
        numerator += endorser_direct * weight;
        denominator += weight;
    }
    if denominator == 0.0 {
        0.0
    } else {
        (numerator / denominator).clamp(0.0, 100.0)
    }
}

/// `clamp(raw - sybil_penalty * 20 + inactivity_penalty, 0, 100)`.
pub fn final_from_components(raw: f64, sybil_penalty: f64, inactivity_penalty: f64) -> f64 {
    (raw - sybil_penalty * SYBIL_PENALTY_MULTIPLIER + inactivity_penalty).clamp(0.0, 100.0)
}

/// Iteration-invariant per-agent inputs, computed once per sweep.
struct StaticInputs {
    dids: Vec<String>,
    sybil: BTreeMap<String, f64>,
    cross_bonus: BTreeMap<String, f64>,
    interaction: BTreeMap<String, f64>,
    inactivity: BTreeMap<String, f64>,
    withheld: BTreeMap<String, bool>,
}

fn static_inputs(graph: &TrustGraph, now: DateTime<Utc>, parallel: bool) -> StaticInputs {
    let dids: Vec<String> = graph.agents.keys().cloned().collect();

    // Peer universe for cluster detection: non-seed agents with at least two
    // endorsers.
    let peer_sets: BTreeMap<String, BTreeSet<String>> = graph
        .agents
        .values()
        .filter(|a| !a.is_seed)
        .filter_map(|a| {
            let set = graph.endorser_set(&a.did);
            (set.len() >= 2).then(|| (a.did.to_string(), set))
        })
        .collect();

    let per_agent = |did: &String| {
        let agent = &graph.agents[did];
        let endorser_set = graph.endorser_set(&agent.did);
        let sybil = sybil_penalty(
            agent,
            graph.endorsement_verticals(&agent.did).len(),
            &endorser_set,
            &peer_sets,
        );
        let cross = cross_vertical_bonus(graph.unique_verticals(&agent.did).len());
        let inter = interaction_bonus(graph.verified_ipr_count(&agent.did));
        let inact = inactivity_penalty(agent.last_activity_at, now);
        let withheld = !agent.is_seed && endorser_set.len() < WITHHOLD_MIN_ENDORSERS;
        (did.clone(), sybil, cross, inter, inact, withheld)
    };

    let rows = run_over(&dids, parallel, per_agent);

    let mut inputs = StaticInputs {
        dids,
        sybil: BTreeMap::new(),
        cross_bonus: BTreeMap::new(),
        interaction: BTreeMap::new(),
        inactivity: BTreeMap::new(),
        withheld: BTreeMap::new(),
    };
    for (did, sybil, cross, inter, inact, withheld) in rows {
        inputs.sybil.insert(did.clone(), sybil);
        inputs.cross_bonus.insert(did.clone(), cross);
        inputs.interaction.insert(did.clone(), inter);
        inputs.inactivity.insert(did.clone(), inact);
        inputs.withheld.insert(did, withheld);
    }
    inputs
}

#[cfg(feature = "parallel")]
fn run_over<T: Send>(
    dids: &[String],
    parallel: bool,
    f: impl Fn(&String) -> T + Sync + Send,
) -> Vec<T> {
    if parallel {
        dids.par_iter().map(f).collect()
    } else {
        dids.iter().map(f).collect()
    }
}

#[cfg(not(feature = "parallel"))]
fn run_over<T: Send>(
    dids: &[String],
    _parallel: bool,
    f: impl Fn(&String) -> T + Sync + Send,
) -> Vec<T> {
    dids.iter().map(f).collect()
}

fn compute_fixed_point(
    graph: &TrustGraph,
    now: DateTime<Utc>,
    parallel: bool,
) -> BTreeMap<String, TrustScoreBreakdown> {
    let inputs = static_inputs(graph, now, parallel);

    // Endorser weights start at the bootstrap values: seeds at their base
    // score, everyone else at zero.
    let mut scores: BTreeMap<String, f64> = graph
        .agents
        .iter()
        .map(|(did, agent)| (did.clone(), agent.base_score.unwrap_or(0.0)))
        .collect();

    let mut breakdowns = BTreeMap::new();
    for _ in 0..FIXED_POINT_MAX_ITERATIONS {
        let directs: BTreeMap<String, f64> = run_over(&inputs.dids, parallel, |did| {
            let agent = &graph.agents[did];
            (
                did.clone(),
                direct_score(
                    graph.endorsements_of(&agent.did),
                    graph.imports_of(&agent.did),
                    &scores,
                    now,
                ),
            )
        })
        .into_iter()
        .collect();

        let rows = run_over(&inputs.dids, parallel, |did| {
            let agent = &graph.agents[did];
            let direct = directs[did];
            let propagated = propagated_score(graph.endorsements_of(&agent.did), &directs, now);
            let raw = DIRECT_WEIGHT * direct
                + PROPAGATED_WEIGHT * propagated
                + CROSS_VERTICAL_WEIGHT * inputs.cross_bonus[did]
                + inputs.interaction[did];
            let mut final_score =
                final_from_components(raw, inputs.sybil[did], inputs.inactivity[did]);
            let mut seed_floor_applied = false;
            if let Some(base) = agent.base_score {
                if final_score < base {
                    final_score = base;
                    seed_floor_applied = true;
                }
            }
            (
                did.clone(),
                TrustScoreBreakdown {
                    direct_score: direct,
                    propagated_score: propagated,
                    cross_vertical_bonus: inputs.cross_bonus[did],
                    interaction_bonus: inputs.interaction[did],
                    sybil_penalty: inputs.sybil[did],
                    inactivity_penalty: inputs.inactivity[did],
                    raw,
                    final_score,
                    withheld: inputs.withheld[did],
                    seed_floor_applied,
                },
            )
        });

        let mut delta = 0.0f64;
        let mut next_scores = BTreeMap::new();
        let mut next_breakdowns = BTreeMap::new();
        for (did, breakdown) in rows {
            delta = delta.max((breakdown.final_score - scores[&did]).abs());
            next_scores.insert(did.clone(), breakdown.final_score);
            next_breakdowns.insert(did, breakdown);
        }
        scores = next_scores;
        breakdowns = next_breakdowns;
        if delta < FIXED_POINT_EPSILON {
            break;
        }
    }
    breakdowns
}

/// Score every registered agent against a graph snapshot. Runs the per-agent
/// work data-parallel when the `parallel` feature is enabled.
pub fn compute_all_scores(
    graph: &TrustGraph,
    now: DateTime<Utc>,
) -> BTreeMap<String, TrustScoreBreakdown> {
    compute_fixed_point(graph, now, cfg!(feature = "parallel"))
}

/// Sequential scoring sweep, always available; the benchmark baseline.
pub fn compute_all_scores_sequential(
    graph: &TrustGraph,
    now: DateTime<Utc>,
) -> BTreeMap<String, TrustScoreBreakdown> {
    compute_fixed_point(graph, now, false)
}

/// Score a single agent (runs the full fixed point over its graph).
pub fn compute_score(
    graph: &TrustGraph,
    did: &Did,
    now: DateTime<Utc>,
) -> Result<TrustScoreBreakdown, TrustError> {
    if graph.agent(did).is_none() {
        return Err(TrustError::UnknownAgent(did.to_string()));
    }
    let mut all = compute_all_scores(graph, now);
    Ok(all.remove(&did.to_string()).expect("agent scored"))
}
