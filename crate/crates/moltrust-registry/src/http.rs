//! HTTP+JSON surface of the registry.
//!
//! All POST bodies pass through the strict canonical parser (duplicate member
//! names rejected) and an explicit size limit before any handler logic runs.
//! TLS termination is expected upstream of this service; the optional per-IP
//! rate limiter activates when configured.

use std::collections::HashMap;
use std::net::{IpAddr, SocketAddr};
use std::sync::Arc;
use std::time::Instant;

use axum::extract::{ConnectInfo, DefaultBodyLimit, Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use parking_lot::Mutex;
use serde::Deserialize;
use serde_json::{json, Value};
use uuid::Uuid;

use moltrust_core::credential::{RevocationEvent, VerifiableCredential};
use moltrust_core::crypto::VerifyingKey;
use moltrust_core::identity::{Did, KeyRotationRecord};
use moltrust_core::interop::run_conformance_vectors;
use moltrust_core::ipr::InteractionProofRecord;
use moltrust_core::trust::{Endorsement, ViolationKind, ViolationSeverity};

use crate::registry::{RegistrationRequest, Registry, RegistryError, MAX_BODY_BYTES};

pub struct AppState {
    pub registry: Arc<Registry>,
    pub rate_limiter: Option<RateLimiter>,
}

/// Fixed-window per-IP limiter; enabled via `rate_limit_per_minute`.
pub struct RateLimiter {
    per_minute: u32,
    hits: Mutex<HashMap<IpAddr, (Instant, u32)>>,
}

impl RateLimiter {
    pub fn new(per_minute: u32) -> Self {
        Self {
            per_minute,
            hits: Mutex::new(HashMap::new()),
        }
    }

    fn allow(&self, ip: IpAddr) -> bool {
        let mut hits = self.hits.lock();
        let now = Instant::now();
        let entry = hits.entry(ip).or_insert((now, 0));
        if now.duration_since(entry.0).as_secs() >= 60 {
            *entry = (now, 0);
        }
        entry.1 += 1;
        entry.1 <= self.per_minute
    }
}

struct ApiError {
    status: StatusCode,
    message: String,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

impl From<RegistryError> for ApiError {
    fn from(e: RegistryError) -> Self {
        use RegistryError::*;
        let status = match &e {
            DuplicateDid(_) => StatusCode::CONFLICT,
            BadProofOfControl(_) | BadEventSignature | BadEndorsement(_) | InvalidIpr(_)
            | InvalidCredential(_) | MalformedInput(_) | Crypto(_) | Identity(_) => {
                StatusCode::BAD_REQUEST
            }
            UnknownAgent(_) | UnknownCredential(_) | Resolve(_) => StatusCode::NOT_FOUND,
            Credential(inner) => match inner {
                moltrust_core::credential::CredentialError::UnknownCredential(_) => {
                    StatusCode::NOT_FOUND
                }
                moltrust_core::credential::CredentialError::AlreadyRevoked => StatusCode::CONFLICT,
                _ => StatusCode::BAD_REQUEST,
            },
            Trust(inner) => match inner {
                moltrust_core::trust::TrustError::UnknownAgent(_)
                | moltrust_core::trust::TrustError::UnknownPrincipal(_) => StatusCode::NOT_FOUND,
                moltrust_core::trust::TrustError::DuplicateAgent(_) => StatusCode::CONFLICT,
                _ => StatusCode::BAD_REQUEST,
            },
            Log(_) | Apply(_) | Anchor(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError {
            status,
            message: e.to_string(),
        }
    }
}

fn bad_request(message: impl Into<String>) -> ApiError {
    ApiError {
        status: StatusCode::BAD_REQUEST,
        message: message.into(),
    }
}

/// Strict body parse: size limit, duplicate-key rejection, then typed
/// decode.
fn parse_body<T: serde::de::DeserializeOwned>(body: &str) -> Result<T, ApiError> {
    if body.len() > MAX_BODY_BYTES {
        return Err(ApiError {
            status: StatusCode::PAYLOAD_TOO_LARGE,
            message: format!("body exceeds {MAX_BODY_BYTES} bytes"),
        });
    }
    let value = moltrust_core::canonical::parse_canonical_text(body)
        .map_err(|e| bad_request(format!("invalid JSON: {e}")))?;
    serde_json::from_value(value).map_err(|e| bad_request(format!("invalid request: {e}")))
}

fn parse_did(raw: &str) -> Result<Did, ApiError> {
    Did::parse(raw).map_err(|e| bad_request(format!("invalid DID: {e}")))
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/agents/challenge", post(agents_challenge))
        .route("/agents", post(agents_register))
        .route("/agents/rotate-key", post(agents_rotate_key))
        .route("/agents/:did/score", get(agents_score))
        .route("/endorsements", post(endorsements_add))
        .route("/iprs", post(iprs_submit))
        .route("/violations", post(violations_record))
        .route("/credentials", post(credentials_register))
        .route("/credentials/revoke", post(credentials_revoke))
        .route("/credentials/:id/status", get(credentials_status))
        .route(
            "/credentials/status-list/:issuer",
            get(credentials_status_list),
        )
        .route("/swarm/stats", get(swarm_stats))
        .route("/.well-known/did.json", get(well_known_did))
        .route("/version", get(version))
        .route("/guard/audit/checks", get(guard_audit_checks))
        .route("/guard/events", post(guard_events))
        .layer(DefaultBodyLimit::max(MAX_BODY_BYTES + 1024))
        .layer(axum::middleware::from_fn_with_state(
            state.clone(),
            rate_limit_middleware,
        ))
        .with_state(state)
}

async fn rate_limit_middleware(
    State(state): State<Arc<AppState>>,
    ConnectInfo(addr): ConnectInfo<SocketAddr>,
    request: axum::extract::Request,
    next: axum::middleware::Next,
) -> Response {
    if let Some(limiter) = &state.rate_limiter {
        if !limiter.allow(addr.ip()) {
            return (
                StatusCode::TOO_MANY_REQUESTS,
                Json(json!({"error": "rate limit exceeded"})),
            )
                .into_response();
        }
    }
    next.run(request).await
}

#[derive(Deserialize)]
struct ChallengeRequest {
    did: Did,
}

async fn agents_challenge(
    State(state): State<Arc<AppState>>,
    body: String,
) -> Result<Json<Value>, ApiError> {
    let request: ChallengeRequest = parse_body(&body)?;
    let challenge = state.registry.issue_challenge(&request.did);
    Ok(Json(serde_json::to_value(challenge).expect("serializes")))
}

async fn agents_register(
    State(state): State<Arc<AppState>>,
    body: String,
) -> Result<(StatusCode, Json<Value>), ApiError> {
    let request: RegistrationRequest = parse_body(&body)?;
    let record = state.registry.register_agent(request)?;
    flush_in_background(&state);
    Ok((
        StatusCode::CREATED,
        Json(serde_json::to_value(record).expect("serializes")),
    ))
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct RotateKeyRequest {
    record: KeyRotationRecord,
    new_key: VerifyingKey,
}

async fn agents_rotate_key(
    State(state): State<Arc<AppState>>,
    body: String,
) -> Result<Json<Value>, ApiError> {
    let request: RotateKeyRequest = parse_body(&body)?;
    let document = state
        .registry
        .rotate_agent_key(&request.record, &request.new_key)?;
    Ok(Json(serde_json::to_value(document).expect("serializes")))
}

async fn agents_score(
    State(state): State<Arc<AppState>>,
    Path(did): Path<String>,
) -> Result<Json<Value>, ApiError> {
    let did = parse_did(&did)?;
    let response = state.registry.get_score(&did)?;
    Ok(Json(serde_json::to_value(response).expect("serializes")))
}

async fn endorsements_add(
    State(state): State<Arc<AppState>>,
    body: String,
) -> Result<(StatusCode, Json<Value>), ApiError> {
    let endorsement: Endorsement = parse_body(&body)?;
    state.registry.add_endorsement(endorsement)?;
    Ok((StatusCode::CREATED, Json(json!({"status": "recorded"}))))
}

async fn iprs_submit(
    State(state): State<Arc<AppState>>,
    body: String,
) -> Result<(StatusCode, Json<Value>), ApiError> {
    let record: InteractionProofRecord = parse_body(&body)?;
    let outcome = state.registry.submit_ipr(record)?;
    flush_in_background(&state);
    Ok((
        StatusCode::ACCEPTED,
        Json(serde_json::to_value(outcome).expect("serializes")),
    ))
}

#[derive(Deserialize)]
struct ViolationRequest {
    principal: Did,
    agent: Did,
    kind: ViolationKind,
    severity: ViolationSeverity,
    #[serde(default)]
    detail: String,
}

async fn violations_record(
    State(state): State<Arc<AppState>>,
    body: String,
) -> Result<(StatusCode, Json<Value>), ApiError> {
    let request: ViolationRequest = parse_body(&body)?;
    let record = state.registry.record_violation(
        &request.principal,
        &request.agent,
        request.kind,
        request.severity,
        &request.detail,
    )?;
    Ok((
        StatusCode::CREATED,
        Json(serde_json::to_value(record).expect("serializes")),
    ))
}

async fn credentials_register(
    State(state): State<Arc<AppState>>,
    body: String,
) -> Result<(StatusCode, Json<Value>), ApiError> {
    let credential: VerifiableCredential = parse_body(&body)?;
    let id = credential.id;
    state.registry.register_credential(credential)?;
    Ok((
        StatusCode::CREATED,
        Json(json!({"status": "registered", "id": id})),
    ))
}

async fn credentials_revoke(
    State(state): State<Arc<AppState>>,
    body: String,
) -> Result<Json<Value>, ApiError> {
    let event: RevocationEvent = parse_body(&body)?;
    state.registry.propagate_revocation(event)?;
    Ok(Json(json!({"status": "revoked"})))
}

async fn credentials_status(
    State(state): State<Arc<AppState>>,
    Path(id): Path<Uuid>,
) -> Result<Json<Value>, ApiError> {
    let status = state.registry.check_credential_status(&id)?;
    Ok(Json(serde_json::to_value(status).expect("serializes")))
}

async fn credentials_status_list(
    State(state): State<Arc<AppState>>,
    Path(issuer): Path<String>,
) -> Result<Json<Value>, ApiError> {
    let issuer = parse_did(&issuer)?;
    let export = state.registry.status_bitstring(&issuer);
    Ok(Json(serde_json::to_value(export).expect("serializes")))
}

async fn swarm_stats(State(state): State<Arc<AppState>>) -> Json<Value> {
    Json(serde_json::to_value(state.registry.swarm_stats()).expect("serializes"))
}

async fn well_known_did(State(state): State<Arc<AppState>>) -> Json<Value> {
    Json(serde_json::to_value(state.registry.operator_document()).expect("serializes"))
}

async fn version() -> Json<Value> {
    Json(json!({
        "service": "moltrust-registry",
        "version": env!("CARGO_PKG_VERSION"),
        "protocol": "0.8",
    }))
}

async fn guard_audit_checks(State(state): State<Arc<AppState>>) -> Json<Value> {
    let checks = state.registry.audit_checks();
    let conformance = run_conformance_vectors();
    let all_passed = checks.iter().all(|c| c.passed) && conformance.all_passed();
    Json(json!({
        "checks": checks,
        "conformanceVectors": conformance,
        "allPassed": all_passed,
    }))
}

async fn guard_events(
    State(state): State<Arc<AppState>>,
    body: String,
) -> Result<Json<Value>, ApiError> {
    if body.len() > MAX_BODY_BYTES {
        return Err(ApiError {
            status: StatusCode::PAYLOAD_TOO_LARGE,
            message: format!("body exceeds {MAX_BODY_BYTES} bytes"),
        });
    }
    let outcomes = state.registry.ingest_kernel_events(&body);
    Ok(Json(serde_json::to_value(outcomes).expect("serializes")))
}

fn flush_in_background(state: &Arc<AppState>) {
    let registry = state.registry.clone();
    tokio::task::spawn_blocking(move || {
        if let Err(e) = registry.flush_anchors(false) {
            tracing::warn!("anchor flush failed: {e}");
        }
    });
}

/// Serve the API until the provided future resolves (or forever).
pub async fn serve(listener: tokio::net::TcpListener, state: Arc<AppState>) -> std::io::Result<()> {
    let app = router(state);
    axum::serve(
        listener,
        app.into_make_service_with_connect_info::<SocketAddr>(),
    )
    .await
}
