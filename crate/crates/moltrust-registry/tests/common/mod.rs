//! Shared test harness: a registry over a temp directory with a manual
//! clock, plus agent registration through the real proof-of-control path.

// Each test binary uses a different subset of the harness.
#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use chrono::{DateTime, Utc};

use moltrust_core::crypto::{sign, SigningKey};
use moltrust_core::identity::{create_did, Did, DidDocument, NATIVE_METHOD};
use moltrust_core::trust::Vertical;
use moltrust_registry::clock::ManualClock;
use moltrust_registry::config::{AnchorBackendKind, RegistryConfig};
use moltrust_registry::registry::{RegistrationRequest, Registry};

pub fn t0() -> DateTime<Utc> {
    "2026-03-01T00:00:00Z".parse().unwrap()
}

pub struct TestBed {
    pub dir: tempfile::TempDir,
    pub clock: Arc<ManualClock>,
    pub registry: Arc<Registry>,
    pub config: RegistryConfig,
}

impl TestBed {
    pub fn new() -> Self {
        Self::with_batch_max(64)
    }

    pub fn with_batch_max(batch_max_records: usize) -> Self {
        let dir = tempfile::tempdir().expect("tempdir");
        let config = RegistryConfig {
            listen: "127.0.0.1:0".into(),
            data_dir: dir.path().to_path_buf(),
            operator_key_path: PathBuf::from("unused"),
            anchor_backend: AnchorBackendKind::Mock,
            batch_max_records,
            batch_max_interval_secs: 600,
            snapshot_every: 0,
            rate_limit_per_minute: 0,
        };
        let clock = ManualClock::new(t0());
        let operator_key = SigningKey::from_seed([0xEE; 32]);
        let registry =
            Arc::new(Registry::open(&config, clock.clone(), operator_key).expect("open registry"));
        Self {
            dir,
            clock,
            registry,
            config,
        }
    }

    /// Reopen the registry over the same data directory (kill-and-replay).
    pub fn reopen(&self) -> Registry {
        Registry::open(
            &self.config,
            self.clock.clone(),
            SigningKey::from_seed([0xEE; 32]),
        )
        .expect("reopen registry")
    }

    /// Register an agent through the real challenge/proof-of-control path.
    pub fn register_agent(
        &self,
        seed: u8,
        principal: &str,
        verticals: &[Vertical],
        seed_base_score: Option<f64>,
    ) -> Agent {
        self.register_agent_opt(seed, principal, verticals, seed_base_score, None)
    }

    pub fn register_agent_opt(
        &self,
        seed: u8,
        principal: &str,
        verticals: &[Vertical],
        seed_base_score: Option<f64>,
        replaces: Option<&Did>,
    ) -> Agent {
        let key = SigningKey::from_seed([seed; 32]);
        let (did, document) = create_did(&key.verifying_key(), NATIVE_METHOD, self.registry.now());
        let challenge = self.registry.issue_challenge(&did);
        let signature = sign(&key, challenge.challenge.as_bytes());
        self.registry
            .register_agent(RegistrationRequest {
                did_document: document.clone(),
                principal: Did::new(NATIVE_METHOD, principal).unwrap(),
                verticals: verticals.to_vec(),
                seed_base_score,
                challenge: challenge.challenge,
                signature,
                replaces_agent: replaces.cloned(),
            })
            .expect("registration succeeds");
        Agent { key, did, document }
    }
}

pub struct Agent {
    pub key: SigningKey,
    pub did: Did,
    pub document: DidDocument,
}
