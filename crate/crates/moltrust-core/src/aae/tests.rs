use std::collections::BTreeSet;

use chrono::{DateTime, Duration, Utc};
use proptest::prelude::*;
use rust_decimal::Decimal;
use uuid::Uuid;

use super::*;
use crate::crypto::SigningKey;
use crate::identity::{create_did, InMemoryResolver, NATIVE_METHOD};

fn t0() -> DateTime<Utc> {
    "2026-03-01T12:00:00Z".parse().unwrap()
}

struct Fixture {
    issuer_key: SigningKey,
    issuer: Did,
    holder: Did,
    resolver: InMemoryResolver,
}

fn fixture() -> Fixture {
    let issuer_key = SigningKey::from_seed([50u8; 32]);
    let (issuer, issuer_doc) = create_did(&issuer_key.verifying_key(), NATIVE_METHOD, t0());
    let holder_key = SigningKey::from_seed([51u8; 32]);
    let (holder, holder_doc) = create_did(&holder_key.verifying_key(), NATIVE_METHOD, t0());
    let mut resolver = InMemoryResolver::new();
    resolver.insert(issuer_doc);
    resolver.insert(holder_doc);
    Fixture {
        issuer_key,
        issuer,
        holder,
        resolver,
    }
}

fn base_builder(fx: &Fixture) -> EnvelopeBuilder {
    EnvelopeBuilder::new(
        fx.issuer.clone(),
        fx.holder.clone(),
        t0(),
        t0() + Duration::hours(24),
    )
}

fn request(fx: &Fixture, action: &str) -> ActionRequest {
    ActionRequest {
        actor: fx.holder.clone(),
        action: action.to_string(),
        resource: None,
        amount: None,
        tool: None,
        counterparty_score: None,
        jurisdiction: None,
        timestamp: t0() + Duration::hours(1),
    }
}

fn usd(value: &str) -> Money {
    Money {
        value: value.parse().unwrap(),
        currency: "USD".to_string(),
    }
}

fn fin(autonomous: &str, step_up: &str, approval: &str) -> FinancialConstraints {
    FinancialConstraints {
        autonomous_threshold: Some(autonomous.parse().unwrap()),
        step_up_threshold: Some(step_up.parse().unwrap()),
        approval_threshold: Some(approval.parse().unwrap()),
        max_tx_per_hour: None,
        currency: "USD".to_string(),
    }
}

#[test]
fn well_formed_envelope_has_no_violations() {
    let fx = fixture();
    let env = base_builder(&fx)
        .allow("https://api.shop/**")
        .build_signed(&fx.issuer_key);
    assert!(validate_envelope(&env, &fx.resolver, t0() + Duration::hours(1)).is_empty());
}

#[test]
fn missing_expiry_is_flagged() {
    let fx = fixture();
    let env = base_builder(&fx).no_expiry().build_signed(&fx.issuer_key);
    let violations = validate_envelope(&env, &fx.resolver, t0());
    assert!(violations.contains(&EnvelopeViolation::MissingExpiry));
}

#[test]
fn depth_above_eight_is_flagged() {
    let fx = fixture();
    let env = base_builder(&fx)
        .delegation(true, 9)
        .build_signed(&fx.issuer_key);
    let violations = validate_envelope(&env, &fx.resolver, t0());
    assert!(violations.contains(&EnvelopeViolation::DepthExceeded));
}

#[test]
fn threshold_misordering_is_flagged() {
    let fx = fixture();
    let env = base_builder(&fx)
        .financial(fin("100", "50", "500"))
        .build_signed(&fx.issuer_key);
    let violations = validate_envelope(&env, &fx.resolver, t0());
    assert!(violations.contains(&EnvelopeViolation::ThresholdOrder));
}

#[test]
fn tampered_proof_is_flagged() {
    let fx = fixture();
    let mut env = base_builder(&fx)
        .allow("https://api.shop/**")
        .build_signed(&fx.issuer_key);
    env.mandate
        .allowed_actions
        .push("https://extra.example/**".into());
    let violations = validate_envelope(&env, &fx.resolver, t0());
    assert!(violations.contains(&EnvelopeViolation::BadProof));
}

#[test]
fn expired_envelope_is_flagged() {
    let fx = fixture();
    let env = base_builder(&fx).build_signed(&fx.issuer_key);
    let violations = validate_envelope(&env, &fx.resolver, t0() + Duration::days(2));
    assert!(violations.contains(&EnvelopeViolation::ExpiredValidity));
}

#[test]
fn malformed_pattern_and_timezone_flagged() {
    let fx = fixture();
    let env = base_builder(&fx)
        .allow("no-scheme-here")
        .timezone("Mars/Olympus")
        .build_signed(&fx.issuer_key);
    let violations = validate_envelope(&env, &fx.resolver, t0());
    assert!(violations.contains(&EnvelopeViolation::MalformedPattern("no-scheme-here".into())));
    assert!(violations.contains(&EnvelopeViolation::UnknownTimezone("Mars/Olympus".into())));
}

#[test]
fn deny_precedence_beats_allow() {
    let fx = fixture();
    let env = base_builder(&fx)
        .allow("https://api.shop/**")
        .deny("https://api.shop/admin/**")
        .build_signed(&fx.issuer_key);
    let decision = evaluate(&env, &request(&fx, "https://api.shop/admin/users"), t0()).unwrap();
    assert_eq!(
        decision.kind,
        DecisionKind::Deny {
            reason: DenyReason::ExplicitDeny
        }
    );
}

#[test]
fn unmatched_action_is_default_denied() {
    let fx = fixture();
    let env = base_builder(&fx)
        .allow("https://api.shop/orders/**")
        .build_signed(&fx.issuer_key);
    let decision = evaluate(&env, &request(&fx, "https://api.shop/users/1"), t0()).unwrap();
    assert_eq!(
        decision.kind,
        DecisionKind::Deny {
            reason: DenyReason::NotPermitted
        }
    );
}

#[test]
fn holder_binding_is_exclusive() {
    let fx = fixture();
    let env = base_builder(&fx)
        .allow("https://api.shop/**")
        .build_signed(&fx.issuer_key);
    let mut req = request(&fx, "https://api.shop/orders/1");
    req.actor = fx.issuer.clone();
    let decision = evaluate(&env, &req, t0()).unwrap();
    assert_eq!(
        decision.kind,
        DecisionKind::Deny {
            reason: DenyReason::HolderMismatch
        }
    );
}

#[test]
fn validity_window_is_half_open() {
    let fx = fixture();
    let env = base_builder(&fx)
        .allow("https://api.shop/**")
        .build_signed(&fx.issuer_key);
    let req = request(&fx, "https://api.shop/orders/1");
    let expires = env.validity.expires_at.unwrap();
    assert!(evaluate(&env, &req, expires - Duration::seconds(1))
        .unwrap()
        .is_allow());
    let at_expiry = evaluate(&env, &req, expires).unwrap();
    assert_eq!(
        at_expiry.kind,
        DecisionKind::Deny {
            reason: DenyReason::Expired
        }
    );
    let before_issue = evaluate(&env, &req, t0() - Duration::seconds(1)).unwrap();
    assert!(before_issue.is_deny());
}

#[test]
fn day_and_hour_windows_use_declared_zone() {
    let fx = fixture();
    // 2026-03-01 is a Sunday; 12:00 UTC is 07:00 in New York (UTC-5).
    let env = base_builder(&fx)
        .allow("https://api.shop/**")
        .timezone("America/New_York")
        .allowed_days([Weekday::Sun])
        .allowed_hours(6, 9)
        .build_signed(&fx.issuer_key);
    let mut req = request(&fx, "https://api.shop/orders/1");
    req.timestamp = t0(); // 07:00 local
    assert!(evaluate(&env, &req, t0()).unwrap().is_allow());

    req.timestamp = t0() + Duration::hours(3); // 10:00 local, outside hours
    let decision = evaluate(&env, &req, t0()).unwrap();
    assert_eq!(
        decision.kind,
        DecisionKind::Deny {
            reason: DenyReason::OutsideWindow
        }
    );

    let weekday_env = base_builder(&fx)
        .allow("https://api.shop/**")
        .timezone("America/New_York")
        .allowed_days([Weekday::Mon, Weekday::Tue])
        .build_signed(&fx.issuer_key);
    req.timestamp = t0();
    let decision = evaluate(&weekday_env, &req, t0()).unwrap();
    assert_eq!(
        decision.kind,
        DecisionKind::Deny {
            reason: DenyReason::OutsideWindow
        }
    );
}

#[test]
fn financial_ladder_boundaries() {
    let fx = fixture();
    let env = base_builder(&fx)
        .allow("https://api.shop/**")
        .financial(fin("25", "100", "1000"))
        .build_signed(&fx.issuer_key);
    let mut req = request(&fx, "https://api.shop/orders/1");

    req.amount = Some(usd("24.99"));
    assert!(evaluate(&env, &req, t0()).unwrap().is_allow());

    // Between autonomous and step-up: still allowed, no extra check defined.
    req.amount = Some(usd("50"));
    assert!(evaluate(&env, &req, t0()).unwrap().is_allow());

    // Ties take the stricter branch.
    req.amount = Some(usd("100"));
    assert_eq!(
        evaluate(&env, &req, t0()).unwrap().kind,
        DecisionKind::StepUp
    );
    req.amount = Some(usd("1000"));
    assert_eq!(
        evaluate(&env, &req, t0()).unwrap().kind,
        DecisionKind::RequireHumanApproval
    );

    req.amount = Some(Money {
        value: Decimal::from(10),
        currency: "EUR".to_string(),
    });
    assert_eq!(
        evaluate(&env, &req, t0()).unwrap_err(),
        EvaluateError::CurrencyMismatch {
            expected: "USD".into(),
            got: "EUR".into()
        }
    );
}

#[test]
fn human_approval_obligation_overrides_autonomy() {
    let fx = fixture();
    let env = base_builder(&fx)
        .allow("https://api.shop/**")
        .financial(fin("100", "500", "5000"))
        .obligations(Obligations {
            tool_allowlist: None,
            require_human_approval_above: Some("10".parse().unwrap()),
        })
        .build_signed(&fx.issuer_key);
    let mut req = request(&fx, "https://api.shop/orders/1");
    req.amount = Some(usd("50")); // under autonomous, over the obligation gate
    assert_eq!(
        evaluate(&env, &req, t0()).unwrap().kind,
        DecisionKind::RequireHumanApproval
    );
}

#[test]
fn jurisdiction_and_score_gates() {
    let fx = fixture();
    let env = base_builder(&fx)
        .allow("https://api.shop/**")
        .jurisdictions(["CH", "DE"])
        .counterparty_min_score(70.0)
        .build_signed(&fx.issuer_key);
    let mut req = request(&fx, "https://api.shop/orders/1");

    // Unknown facts cannot satisfy present gates.
    let decision = evaluate(&env, &req, t0()).unwrap();
    assert_eq!(
        decision.kind,
        DecisionKind::Deny {
            reason: DenyReason::JurisdictionDenied
        }
    );

    req.jurisdiction = Some("ch".to_string());
    let decision = evaluate(&env, &req, t0()).unwrap();
    assert_eq!(
        decision.kind,
        DecisionKind::Deny {
            reason: DenyReason::CounterpartyScore
        }
    );

    req.counterparty_score = Some(70.0);
    assert!(evaluate(&env, &req, t0()).unwrap().is_allow());

    req.jurisdiction = Some("US".to_string());
    let decision = evaluate(&env, &req, t0()).unwrap();
    assert_eq!(
        decision.kind,
        DecisionKind::Deny {
            reason: DenyReason::JurisdictionDenied
        }
    );
}

#[test]
fn tool_allowlist_applies_when_tool_named() {
    let fx = fixture();
    let env = base_builder(&fx)
        .allow("https://api.shop/**")
        .obligations(Obligations {
            tool_allowlist: Some(vec!["browser".into(), "payments".into()]),
            require_human_approval_above: None,
        })
        .build_signed(&fx.issuer_key);
    let mut req = request(&fx, "https://api.shop/orders/1");
    assert!(evaluate(&env, &req, t0()).unwrap().is_allow());

    req.tool = Some("payments".to_string());
    assert!(evaluate(&env, &req, t0()).unwrap().is_allow());

    req.tool = Some("shell".to_string());
    let decision = evaluate(&env, &req, t0()).unwrap();
    assert_eq!(
        decision.kind,
        DecisionKind::Deny {
            reason: DenyReason::ToolNotAllowed
        }
    );
}

#[test]
fn resource_patterns_any_of() {
    let fx = fixture();
    let env = base_builder(&fx)
        .allow("https://api.shop/**")
        .resource("type=order")
        .resource("region=eu-*")
        .build_signed(&fx.issuer_key);
    let mut req = request(&fx, "https://api.shop/orders/1");
    req.resource = Some(
        [("type".to_string(), "order".to_string())]
            .into_iter()
            .collect(),
    );
    assert!(evaluate(&env, &req, t0()).unwrap().is_allow());

    req.resource = Some(
        [("region".to_string(), "us-east".to_string())]
            .into_iter()
            .collect(),
    );
    let decision = evaluate(&env, &req, t0()).unwrap();
    assert_eq!(
        decision.kind,
        DecisionKind::Deny {
            reason: DenyReason::ResourceDenied
        }
    );
}

// --- attenuation ---

fn delegating_parent(fx: &Fixture) -> AuthorizationEnvelope {
    base_builder(fx)
        .allow("https://api.shop/**")
        .deny("https://api.shop/admin/**")
        .delegation(true, 4)
        .financial(fin("100", "500", "1000"))
        .jurisdictions(["CH", "DE", "FR"])
        .build_signed(&fx.issuer_key)
}

fn child_of(fx: &Fixture, parent: &AuthorizationEnvelope) -> EnvelopeBuilder {
    EnvelopeBuilder::new(
        fx.issuer.clone(),
        fx.holder.clone(),
        parent.validity.issued_at,
        parent.validity.expires_at.unwrap(),
    )
    .parent(parent.id)
    .deny("https://api.shop/admin/**")
    .delegation(true, parent.mandate.delegation.max_depth - 1)
    .financial(fin("100", "500", "1000"))
    .jurisdictions(["CH", "DE", "FR"])
}

#[test]
fn narrowing_child_is_accepted() {
    let fx = fixture();
    let parent = delegating_parent(&fx);
    let half_ttl = parent.validity.issued_at
        + (parent.validity.expires_at.unwrap() - parent.validity.issued_at) / 2;
    let mut child = child_of(&fx, &parent)
        .allow("https://api.shop/orders/**")
        .jurisdictions(["CH"])
        .build_signed(&fx.issuer_key);
    child.validity.expires_at = Some(half_ttl);
    let payload = child.signing_payload();
    child.proof.signature = crate::crypto::sign(&fx.issuer_key, &payload);
    assert_eq!(attenuation_check(&parent, &child), Ok(()));
}

#[test]
fn widening_child_is_rejected() {
    let fx = fixture();
    let parent = delegating_parent(&fx);
    let child = child_of(&fx, &parent)
        .allow("https://api.shop/orders/**")
        .allow("https://api.other/**") // not in parent scope
        .build_signed(&fx.issuer_key);
    assert!(matches!(
        attenuation_check(&parent, &child),
        Err(AttenuationError::ScopeExceedsParent(_))
    ));
}

#[test]
fn child_inside_parent_denied_scope_is_rejected() {
    let fx = fixture();
    let parent = delegating_parent(&fx);
    let child = child_of(&fx, &parent)
        .allow("https://api.shop/admin/keys")
        .build_signed(&fx.issuer_key);
    assert!(matches!(
        attenuation_check(&parent, &child),
        Err(AttenuationError::ScopeExceedsParent(_))
    ));
}

#[test]
fn dropping_parent_denials_is_rejected() {
    let fx = fixture();
    let parent = delegating_parent(&fx);
    let mut child = child_of(&fx, &parent)
        .allow("https://api.shop/orders/**")
        .build_signed(&fx.issuer_key);
    child.mandate.denied_actions.clear();
    assert!(matches!(
        attenuation_check(&parent, &child),
        Err(AttenuationError::ScopeExceedsParent(_))
    ));
}

#[test]
fn delegation_forbidden_by_parent() {
    let fx = fixture();
    let mut parent = delegating_parent(&fx);
    parent.mandate.delegation.allowed = false;
    let child = child_of(&fx, &parent)
        .allow("https://api.shop/orders/**")
        .build_signed(&fx.issuer_key);
    assert_eq!(
        attenuation_check(&parent, &child),
        Err(AttenuationError::ParentForbidsDelegation)
    );
}

#[test]
fn depth_must_strictly_decrease() {
    let fx = fixture();
    let parent = delegating_parent(&fx);
    let child = child_of(&fx, &parent)
        .allow("https://api.shop/orders/**")
        .delegation(true, parent.mandate.delegation.max_depth)
        .build_signed(&fx.issuer_key);
    assert_eq!(
        attenuation_check(&parent, &child),
        Err(AttenuationError::DepthExhausted)
    );
}

#[test]
fn raised_financial_threshold_is_rejected() {
    let fx = fixture();
    let parent = delegating_parent(&fx);
    let child = child_of(&fx, &parent)
        .allow("https://api.shop/orders/**")
        .financial(fin("100", "500", "2000"))
        .build_signed(&fx.issuer_key);
    assert!(matches!(
        attenuation_check(&parent, &child),
        Err(AttenuationError::ScopeExceedsParent(_))
    ));
}

// --- delegation chains ---

fn make_chain(fx: &Fixture, depth: usize) -> Vec<AuthorizationEnvelope> {
    let mut chain = Vec::with_capacity(depth);
    let root = base_builder(fx)
        .allow("https://api.shop/**")
        .delegation(true, 8)
        .build_signed(&fx.issuer_key);
    chain.push(root);
    for i in 1..depth {
        let parent = &chain[i - 1];
        let child = EnvelopeBuilder::new(
            fx.issuer.clone(),
            fx.holder.clone(),
            parent.validity.issued_at,
            parent.validity.expires_at.unwrap(),
        )
        .parent(parent.id)
        .allow("https://api.shop/**")
        .delegation(true, parent.mandate.delegation.max_depth - 1)
        .build_signed(&fx.issuer_key);
        chain.push(child);
    }
    chain
}

#[test]
fn root_only_chain_verifies() {
    let fx = fixture();
    let chain = make_chain(&fx, 1);
    assert_eq!(verify_delegation_chain(&chain, &fx.resolver, t0()), Ok(()));
}

#[test]
fn depth_three_chain_verifies() {
    let fx = fixture();
    let chain = make_chain(&fx, 3);
    assert_eq!(verify_delegation_chain(&chain, &fx.resolver, t0()), Ok(()));
}

#[test]
fn nine_envelope_chain_is_too_deep() {
    let fx = fixture();
    let chain = make_chain(&fx, 9);
    assert_eq!(
        verify_delegation_chain(&chain, &fx.resolver, t0()),
        Err(ChainError::ChainTooDeep { depth: 9 })
    );
}

#[test]
fn broken_link_is_detected() {
    let fx = fixture();
    let mut chain = make_chain(&fx, 3);
    chain[2].parent_ref = Some(Uuid::new_v4());
    let payload = chain[2].signing_payload();
    chain[2].proof.signature = crate::crypto::sign(&fx.issuer_key, &payload);
    assert!(matches!(
        verify_delegation_chain(&chain, &fx.resolver, t0()),
        Err(ChainError::BrokenLink { index: 2, .. })
    ));
}

#[test]
fn tampered_chain_envelope_fails_proof() {
    let fx = fixture();
    let mut chain = make_chain(&fx, 2);
    chain[1]
        .mandate
        .allowed_actions
        .push("https://api.shop/extra".into());
    assert_eq!(
        verify_delegation_chain(&chain, &fx.resolver, t0()),
        Err(ChainError::BadProof { index: 1 })
    );
}

// --- properties ---

fn pattern_strategy() -> impl Strategy<Value = String> {
    prop_oneof![
        Just("https://api.shop/**".to_string()),
        Just("https://api.shop/orders/*".to_string()),
        Just("https://api.shop/orders/**".to_string()),
        Just("https://api.shop/orders/1".to_string()),
        Just("https://api.shop/users/*".to_string()),
        Just("https://api.shop/users/7".to_string()),
        Just("https://api.shop/*".to_string()),
    ]
}

fn action_strategy() -> impl Strategy<Value = String> {
    prop_oneof![
        Just("https://api.shop/orders/1".to_string()),
        Just("https://api.shop/orders/1/cancel".to_string()),
        Just("https://api.shop/users/7".to_string()),
        Just("https://api.shop/orders".to_string()),
        Just("https://api.shop/profile".to_string()),
    ]
}

proptest! {
    // Deny-precedence: whenever the action matches any denied pattern the
    // decision is a denial, regardless of allows.
    #[test]
    fn deny_always_wins(
        allows in prop::collection::vec(pattern_strategy(), 0..4),
        denies in prop::collection::vec(pattern_strategy(), 1..4),
        action in action_strategy(),
    ) {
        let fx = fixture();
        let mut builder = base_builder(&fx);
        for a in &allows {
            builder = builder.allow(a);
        }
        for d in &denies {
            builder = builder.deny(d);
        }
        let env = builder.build_signed(&fx.issuer_key);
        let denied_matches = denies
            .iter()
            .any(|d| match_uri_pattern(d, &action).unwrap());
        let decision = evaluate(&env, &request(&fx, &action), t0()).unwrap();
        if denied_matches {
            prop_assert_eq!(
                decision.kind,
                DecisionKind::Deny { reason: DenyReason::ExplicitDeny }
            );
        }
    }

    // Default-deny: with no allowed patterns every request is denied.
    #[test]
    fn empty_allow_list_denies_everything(action in action_strategy()) {
        let fx = fixture();
        let env = base_builder(&fx).build_signed(&fx.issuer_key);
        let decision = evaluate(&env, &request(&fx, &action), t0()).unwrap();
        prop_assert!(decision.is_deny());
    }

    // Evaluation is deterministic in (env, req, now).
    #[test]
    fn evaluation_is_pure(
        allows in prop::collection::vec(pattern_strategy(), 0..3),
        action in action_strategy(),
    ) {
        let fx = fixture();
        let mut builder = base_builder(&fx);
        for a in &allows {
            builder = builder.allow(a);
        }
        let env = builder.build_signed(&fx.issuer_key);
        let req = request(&fx, &action);
        let first = evaluate(&env, &req, t0()).unwrap();
        let second = evaluate(&env, &req, t0()).unwrap();
        prop_assert_eq!(first, second);
    }

    // Attenuation monotonicity: any action allowed under an accepted child is
    // also scope-allowed under its parent.
    #[test]
    fn accepted_children_never_widen_scope(
        parent_allows in prop::collection::vec(pattern_strategy(), 1..3),
        parent_denies in prop::collection::vec(pattern_strategy(), 0..2),
        child_allows in prop::collection::vec(pattern_strategy(), 1..3),
        action in action_strategy(),
    ) {
        let fx = fixture();
        let mut pb = base_builder(&fx).delegation(true, 4);
        for a in &parent_allows {
            pb = pb.allow(a);
        }
        for d in &parent_denies {
            pb = pb.deny(d);
        }
        let parent = pb.build_signed(&fx.issuer_key);

        let mut cb = child_of_generic(&fx, &parent);
        for a in &child_allows {
            cb = cb.allow(a);
        }
        for d in &parent_denies {
            cb = cb.deny(d);
        }
        let child = cb.build_signed(&fx.issuer_key);

        if attenuation_check(&parent, &child).is_ok() {
            let child_scope_allows = scope_allows(&child, &action);
            let parent_scope_allows = scope_allows(&parent, &action);
            if child_scope_allows {
                prop_assert!(
                    parent_scope_allows,
                    "child allows {} but parent does not", action
                );
            }
        }
    }
}

fn child_of_generic(fx: &Fixture, parent: &AuthorizationEnvelope) -> EnvelopeBuilder {
    EnvelopeBuilder::new(
        fx.issuer.clone(),
        fx.holder.clone(),
        parent.validity.issued_at,
        parent.validity.expires_at.unwrap(),
    )
    .parent(parent.id)
    .delegation(true, parent.mandate.delegation.max_depth.saturating_sub(1))
}

/// Pure MANDATE scope check: matched by an allow, not matched by a deny.
fn scope_allows(env: &AuthorizationEnvelope, action: &str) -> bool {
    let denied = env
        .mandate
        .denied_actions
        .iter()
        .any(|d| match_uri_pattern(d, action).unwrap_or(true));
    if denied {
        return false;
    }
    env.mandate
        .allowed_actions
        .iter()
        .any(|a| match_uri_pattern(a, action).unwrap_or(false))
}

// Effective-permission shrinkage along an accepted chain.
#[test]
fn allowed_set_shrinks_along_chain() {
    let fx = fixture();
    let universe = [
        "https://api.shop/orders/1",
        "https://api.shop/orders/2",
        "https://api.shop/orders/1/cancel",
        "https://api.shop/users/7",
        "https://api.shop/profile",
    ];
    let root = base_builder(&fx)
        .allow("https://api.shop/**")
        .delegation(true, 8)
        .build_signed(&fx.issuer_key);
    let mid = child_of_generic(&fx, &root)
        .allow("https://api.shop/orders/**")
        .build_signed(&fx.issuer_key);
    let leaf = child_of_generic(&fx, &mid)
        .allow("https://api.shop/orders/*")
        .build_signed(&fx.issuer_key);
    let chain = [root, mid, leaf];
    assert_eq!(verify_delegation_chain(&chain, &fx.resolver, t0()), Ok(()));

    let mut previous: Option<BTreeSet<&str>> = None;
    for env in &chain {
        let allowed: BTreeSet<&str> = universe
            .iter()
            .copied()
            .filter(|a| scope_allows(env, a))
            .collect();
        if let Some(prev) = &previous {
            assert!(allowed.is_subset(prev));
        }
        previous = Some(allowed);
    }
}
