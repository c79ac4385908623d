//! Attenuation-only delegation: a delegated envelope may narrow its parent's
//! permissions, never widen them.

use chrono::{DateTime, Utc};
use rust_decimal::Decimal;
use thiserror::Error;

use super::pattern::pattern_covers;
use super::AuthorizationEnvelope;
use crate::identity::DidResolver;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AttenuationError {
    #[error("child scope exceeds parent: {0}")]
    ScopeExceedsParent(String),
    #[error("delegation depth exhausted")]
    DepthExhausted,
    #[error("parent forbids delegation")]
    ParentForbidsDelegation,
    #[error("child does not reference this parent")]
    NotChildOfParent,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ChainError {
    #[error("delegation chain is empty")]
    EmptyChain,
    #[error("delegation chain too deep: {depth} envelopes (limit 8)")]
    ChainTooDeep { depth: usize },
    #[error("broken chain link at envelope {index}: {detail}")]
    BrokenLink { index: usize, detail: String },
    #[error("envelope {index} has an invalid proof")]
    BadProof { index: usize },
    #[error("attenuation violated at envelope {index}: {source}")]
    Attenuation {
        index: usize,
        source: AttenuationError,
    },
}

/// Accept the child only if it is a provable subset of its parent.
///
/// Checked, in order: parent reference, parent permits delegation, strictly
/// decreasing delegation depth, every child allowed pattern covered by a
/// parent allowed pattern and not inside parent denied territory, child
/// denied patterns a superset of the parent's, child financial thresholds at
/// or below the parent's, child jurisdictions a subset, child validity window
/// inside the parent's.
///
/// Pattern-subset checking is syntactic and conservative (see
/// [`pattern_covers`]): ambiguous combinations are rejected, never accepted.
pub fn attenuation_check(
    parent: &AuthorizationEnvelope,
    child: &AuthorizationEnvelope,
) -> Result<(), AttenuationError> {
    if child.parent_ref != Some(parent.id) {
        return Err(AttenuationError::NotChildOfParent);
    }
    if !parent.mandate.delegation.allowed {
        return Err(AttenuationError::ParentForbidsDelegation);
    }
    if child.mandate.delegation.max_depth >= parent.mandate.delegation.max_depth {
        return Err(AttenuationError::DepthExhausted);
    }

    for child_pattern in &child.mandate.allowed_actions {
        let covered =
            parent.mandate.allowed_actions.iter().any(|parent_pattern| {
                pattern_covers(parent_pattern, child_pattern).unwrap_or(false)
            });
        if !covered {
            return Err(AttenuationError::ScopeExceedsParent(format!(
                "allowed pattern {child_pattern} not covered by any parent pattern"
            )));
        }
        let denied =
            parent.mandate.denied_actions.iter().any(|denied_pattern| {
                pattern_covers(denied_pattern, child_pattern).unwrap_or(false)
            });
        if denied {
            return Err(AttenuationError::ScopeExceedsParent(format!(
                "allowed pattern {child_pattern} lies inside parent denied scope"
            )));
        }
    }

    for parent_denied in &parent.mandate.denied_actions {
        if !child.mandate.denied_actions.contains(parent_denied) {
            return Err(AttenuationError::ScopeExceedsParent(format!(
                "parent denied pattern {parent_denied} missing from child denials"
            )));
        }
    }

    check_financial(parent, child)?;

    match (
        &parent.constraints.jurisdictions,
        &child.constraints.jurisdictions,
    ) {
        (None, _) => {}
        (Some(parent_set), Some(child_set)) => {
            if !child_set.is_subset(parent_set) {
                return Err(AttenuationError::ScopeExceedsParent(
                    "child jurisdictions exceed parent".into(),
                ));
            }
        }
        (Some(_), None) => {
            return Err(AttenuationError::ScopeExceedsParent(
                "child drops the parent jurisdiction restriction".into(),
            ));
        }
    }

    let window_ok = child.validity.issued_at >= parent.validity.issued_at
        && match (child.validity.expires_at, parent.validity.expires_at) {
            (Some(child_exp), Some(parent_exp)) => child_exp <= parent_exp,
            // Mandatory expiry is validated separately; an open-ended side
            // can never demonstrate containment.
            _ => false,
        };
    if !window_ok {
        return Err(AttenuationError::ScopeExceedsParent(
            "child validity window exceeds parent".into(),
        ));
    }

    Ok(())
}

fn check_financial(
    parent: &AuthorizationEnvelope,
    child: &AuthorizationEnvelope,
) -> Result<(), AttenuationError> {
    let Some(parent_fin) = &parent.constraints.financial else {
        return Ok(()); // parent unconstrained, anything the child sets narrows
    };
    let Some(child_fin) = &child.constraints.financial else {
        return Err(AttenuationError::ScopeExceedsParent(
            "child drops the parent financial constraints".into(),
        ));
    };
    if child_fin.currency != parent_fin.currency {
        return Err(AttenuationError::ScopeExceedsParent(
            "child changes the constraint currency".into(),
        ));
    }
    let leq = |name: &str, child_t: &Option<Decimal>, parent_t: &Option<Decimal>| match (
        child_t, parent_t,
    ) {
        (_, None) => Ok(()),
        (Some(c), Some(p)) if c <= p => Ok(()),
        (Some(_), Some(_)) => Err(AttenuationError::ScopeExceedsParent(format!(
            "child {name} exceeds parent"
        ))),
        (None, Some(_)) => Err(AttenuationError::ScopeExceedsParent(format!(
            "child drops the parent {name}"
        ))),
    };
    leq(
        "autonomous threshold",
        &child_fin.autonomous_threshold,
        &parent_fin.autonomous_threshold,
    )?;
    leq(
        "step-up threshold",
        &child_fin.step_up_threshold,
        &parent_fin.step_up_threshold,
    )?;
    leq(
        "approval threshold",
        &child_fin.approval_threshold,
        &parent_fin.approval_threshold,
    )?;
    Ok(())
}

/// Verify a root-to-leaf delegation chain: every proof, every adjacent
/// attenuation, and the depth bound of 8 envelopes.
///
/// Chain verification is structural; expiry is evaluated per request by
/// [`super::evaluate`] (attenuation already forces child windows inside the
/// parent's). `now` is part of the signature for verifiers that pin a
/// decision time.
pub fn verify_delegation_chain(
    chain: &[AuthorizationEnvelope],
    resolver: &dyn DidResolver,
    _now: DateTime<Utc>,
) -> Result<(), ChainError> {
    if chain.is_empty() {
        return Err(ChainError::EmptyChain);
    }
    if chain.len() > super::MAX_DELEGATION_DEPTH as usize {
        return Err(ChainError::ChainTooDeep { depth: chain.len() });
    }
    if chain[0].parent_ref.is_some() {
        return Err(ChainError::BrokenLink {
            index: 0,
            detail: "root envelope carries a parent reference".into(),
        });
    }
    for (index, env) in chain.iter().enumerate() {
        if !env.verify_proof(resolver) {
            return Err(ChainError::BadProof { index });
        }
        if index > 0 {
            let parent = &chain[index - 1];
            if env.parent_ref != Some(parent.id) {
                return Err(ChainError::BrokenLink {
                    index,
                    detail: "parent reference does not name the preceding envelope".into(),
                });
            }
            attenuation_check(parent, env)
                .map_err(|source| ChainError::Attenuation { index, source })?;
        }
    }
    Ok(())
}
