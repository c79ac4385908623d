//! `moltrust` command line: run the registry, manage keys, and act as a
//! client against a running instance.

use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use rand::RngCore;

use moltrust_core::credential::issue_credential;
use moltrust_core::crypto::{Digest, SigningKey};
use moltrust_core::identity::{create_did, Did, DidDocument, NATIVE_METHOD};
use moltrust_core::interop::{
    conformance_checksum, run_conformance_vectors, verify_drift, ConformanceSuite,
};
use moltrust_core::trust::{Endorsement, Vertical};

use crate::clock::SystemClock;
use crate::config::RegistryConfig;
use crate::http::{serve, AppState, RateLimiter};
use crate::registry::{RegistrationRequest, Registry, SignedScoreResponse};

#[derive(Parser)]
#[command(
    name = "moltrust",
    version,
    about = "MolTrust registry and client tools"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the registry HTTP service.
    Serve {
        /// TOML config file; environment variables MOLTRUST_* override it.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Generate an Ed25519 signing key and print its DID.
    Keygen {
        /// Where to write the hex-encoded 32-byte seed.
        #[arg(long)]
        out: PathBuf,
    },
    /// Register the key's DID as an agent at a registry.
    Register {
        #[arg(long)]
        registry: String,
        #[arg(long)]
        key: PathBuf,
        /// Principal (operator) DID this agent acts for.
        #[arg(long)]
        principal: String,
        /// Vertical tags the agent participates in (repeatable).
        #[arg(long = "vertical")]
        verticals: Vec<String>,
        /// Provision as a seed agent with this base score.
        #[arg(long)]
        seed_base_score: Option<f64>,
        /// Re-register: the retiring agent DID under the same principal.
        #[arg(long)]
        replaces: Option<String>,
    },
    /// Issue a verifiable credential signed by the key.
    Issue {
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        subject: String,
        #[arg(long = "type", default_value = "CoreIdentity")]
        credential_type: String,
        #[arg(long, default_value_t = 86_400)]
        ttl: u64,
        /// Claims as a JSON object.
        #[arg(long, default_value = "{}")]
        claims: String,
        #[arg(long, default_value = "https://registry.invalid/credentials/revoke")]
        revocation_endpoint: String,
        /// Also submit the credential to this registry for status tracking.
        #[arg(long)]
        registry: Option<String>,
    },
    /// Endorse an agent in a vertical.
    Endorse {
        #[arg(long)]
        registry: String,
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        subject: String,
        #[arg(long)]
        vertical: String,
    },
    /// Fetch and verify an agent's signed score.
    Score {
        #[arg(long)]
        registry: String,
        #[arg(long)]
        agent: String,
    },
    /// Conformance and self-audit tooling.
    Audit {
        #[command(subcommand)]
        command: AuditCommand,
    },
    /// Replay an event log and print the reconstructed state digest.
    Replay {
        #[arg(long)]
        data_dir: PathBuf,
    },
}

#[derive(Subcommand)]
enum AuditCommand {
    /// Run the protocol-level self-audit checks (locally, or against a
    /// running registry with --registry).
    Checks {
        #[arg(long)]
        registry: Option<String>,
    },
    /// Run conformance vectors TV-001..TV-005.
    Vectors {
        /// Write the canonical conformance document here.
        #[arg(long)]
        write_document: Option<PathBuf>,
    },
    /// Compare the generated conformance document against a published
    /// checksum.
    Drift {
        /// Expected SHA-256, lowercase hex.
        #[arg(long)]
        expected: String,
    },
}

pub async fn run() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Serve { config } => serve_command(config).await,
        Command::Keygen { out } => keygen_command(&out),
        Command::Register {
            registry,
            key,
            principal,
            verticals,
            seed_base_score,
            replaces,
        } => {
            register_command(
                &registry,
                &key,
                &principal,
                &verticals,
                seed_base_score,
                replaces.as_deref(),
            )
            .await
        }
        Command::Issue {
            key,
            subject,
            credential_type,
            ttl,
            claims,
            revocation_endpoint,
            registry,
        } => {
            issue_command(
                &key,
                &subject,
                &credential_type,
                ttl,
                &claims,
                &revocation_endpoint,
                registry.as_deref(),
            )
            .await
        }
        Command::Endorse {
            registry,
            key,
            subject,
            vertical,
        } => endorse_command(&registry, &key, &subject, &vertical).await,
        Command::Score { registry, agent } => score_command(&registry, &agent).await,
        Command::Audit { command } => audit_command(command).await,
        Command::Replay { data_dir } => replay_command(&data_dir),
    }
}

async fn serve_command(config_path: Option<PathBuf>) -> Result<()> {
    let config = RegistryConfig::load(config_path.as_deref())?;
    let operator_key = if config.operator_key_path.exists() {
        load_key(&config.operator_key_path)?
    } else {
        bail!(
            "operator key not found at {}; generate one with `moltrust keygen --out {}`",
            config.operator_key_path.display(),
            config.operator_key_path.display()
        );
    };

    let registry = Arc::new(Registry::open(
        &config,
        Arc::new(SystemClock),
        operator_key,
    )?);
    tracing::info!(
        "registry DID {} serving on {} (data dir {})",
        registry.operator_did(),
        config.listen,
        config.data_dir.display()
    );

    // Interval-based anchor flush, off the request path.
    let flusher = registry.clone();
    tokio::spawn(async move {
        let mut ticker = tokio::time::interval(std::time::Duration::from_secs(30));
        loop {
            ticker.tick().await;
            let registry = flusher.clone();
            let _ = tokio::task::spawn_blocking(move || registry.flush_anchors(false)).await;
        }
    });

    let rate_limiter =
        (config.rate_limit_per_minute > 0).then(|| RateLimiter::new(config.rate_limit_per_minute));
    let state = Arc::new(AppState {
        registry,
        rate_limiter,
    });
    let listener = tokio::net::TcpListener::bind(&config.listen)
        .await
        .with_context(|| format!("cannot bind {}", config.listen))?;
    serve(listener, state).await?;
    Ok(())
}

fn keygen_command(out: &std::path::Path) -> Result<()> {
    let mut seed = [0u8; 32];
    rand::thread_rng().fill_bytes(&mut seed);
    let key = SigningKey::from_seed(seed);
    std::fs::write(out, key.seed_hex())
        .with_context(|| format!("cannot write {}", out.display()))?;
    let (did, _) = create_did(&key.verifying_key(), NATIVE_METHOD, chrono::Utc::now());
    println!("key written to {}", out.display());
    println!("public key: {}", key.verifying_key().to_multibase());
    println!("did: {did}");
    Ok(())
}

fn load_key(path: &std::path::Path) -> Result<SigningKey> {
    let hex_seed = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read key file {}", path.display()))?;
    Ok(SigningKey::from_seed_hex(&hex_seed)?)
}

fn parse_vertical(raw: &str) -> Result<Vertical> {
    Vertical::parse(raw)
        .with_context(|| format!("unknown vertical {raw}; expected one of the canonical tags"))
}

async fn register_command(
    registry: &str,
    key_path: &std::path::Path,
    principal: &str,
    verticals: &[String],
    seed_base_score: Option<f64>,
    replaces: Option<&str>,
) -> Result<()> {
    let key = load_key(key_path)?;
    let principal = Did::parse(principal)?;
    let (did, document) = create_did(&key.verifying_key(), NATIVE_METHOD, chrono::Utc::now());
    let verticals = verticals
        .iter()
        .map(|v| parse_vertical(v))
        .collect::<Result<Vec<_>>>()?;

    let client = reqwest::Client::new();
    let challenge: serde_json::Value = client
        .post(format!("{registry}/agents/challenge"))
        .body(serde_json::json!({"did": did}).to_string())
        .send()
        .await?
        .error_for_status()?
        .json()
        .await?;
    let challenge_text = challenge["challenge"]
        .as_str()
        .context("challenge response missing challenge")?
        .to_string();
    let signature = moltrust_core::crypto::sign(&key, challenge_text.as_bytes());

    let request = RegistrationRequest {
        did_document: document,
        principal,
        verticals,
        seed_base_score,
        challenge: challenge_text,
        signature,
        replaces_agent: replaces.map(Did::parse).transpose()?,
    };
    let record: serde_json::Value = client
        .post(format!("{registry}/agents"))
        .body(serde_json::to_string(&request)?)
        .send()
        .await?
        .error_for_status()?
        .json()
        .await?;
    println!("registered: {}", serde_json::to_string_pretty(&record)?);
    Ok(())
}

async fn issue_command(
    key_path: &std::path::Path,
    subject: &str,
    credential_type: &str,
    ttl: u64,
    claims: &str,
    revocation_endpoint: &str,
    registry: Option<&str>,
) -> Result<()> {
    let key = load_key(key_path)?;
    let subject = Did::parse(subject)?;
    let claims: serde_json::Value = serde_json::from_str(claims).context("claims must be JSON")?;
    let (_, issuer_doc) = create_did(&key.verifying_key(), NATIVE_METHOD, chrono::Utc::now());
    let vc = issue_credential(
        &key,
        &issuer_doc,
        &subject,
        credential_type,
        claims,
        ttl,
        revocation_endpoint,
        chrono::Utc::now(),
    )?;
    println!("{}", serde_json::to_string_pretty(&vc)?);

    if let Some(registry) = registry {
        let client = reqwest::Client::new();
        client
            .post(format!("{registry}/credentials"))
            .body(serde_json::to_string(&vc)?)
            .send()
            .await?
            .error_for_status()?;
        eprintln!("submitted to {registry}");
    }
    Ok(())
}

async fn endorse_command(
    registry: &str,
    key_path: &std::path::Path,
    subject: &str,
    vertical: &str,
) -> Result<()> {
    let key = load_key(key_path)?;
    let subject = Did::parse(subject)?;
    let vertical = parse_vertical(vertical)?;
    let (endorser, _) = create_did(&key.verifying_key(), NATIVE_METHOD, chrono::Utc::now());
    let endorsement = Endorsement::create(&key, &endorser, &subject, vertical, chrono::Utc::now());
    reqwest::Client::new()
        .post(format!("{registry}/endorsements"))
        .body(serde_json::to_string(&endorsement)?)
        .send()
        .await?
        .error_for_status()?;
    println!("endorsed {subject} in {vertical} as {endorser}");
    Ok(())
}

async fn score_command(registry: &str, agent: &str) -> Result<()> {
    let client = reqwest::Client::new();
    let response: SignedScoreResponse = client
        .get(format!("{registry}/agents/{agent}/score"))
        .send()
        .await?
        .error_for_status()?
        .json()
        .await?;
    let operator: DidDocument = client
        .get(format!("{registry}/.well-known/did.json"))
        .send()
        .await?
        .error_for_status()?
        .json()
        .await?;
    let verified = response.verify(&operator);
    println!("{}", serde_json::to_string_pretty(&response)?);
    if !verified {
        bail!("response signature does NOT verify under the registry operator key");
    }
    eprintln!("signature verified under {}", operator.id);
    Ok(())
}

async fn audit_command(command: AuditCommand) -> Result<()> {
    match command {
        AuditCommand::Checks { registry } => {
            let report = match registry {
                Some(url) => {
                    reqwest::Client::new()
                        .get(format!("{url}/guard/audit/checks"))
                        .send()
                        .await?
                        .error_for_status()?
                        .json::<serde_json::Value>()
                        .await?
                }
                None => serde_json::json!({
                    "checks": crate::registry::run_audit_checks(chrono::Utc::now()),
                }),
            };
            println!("{}", serde_json::to_string_pretty(&report)?);
            let all = report["checks"]
                .as_array()
                .map(|checks| checks.iter().all(|c| c["passed"] == true))
                .unwrap_or(false);
            if !all {
                bail!("one or more audit checks failed");
            }
            Ok(())
        }
        AuditCommand::Vectors { write_document } => {
            let report = run_conformance_vectors();
            for outcome in &report.outcomes {
                println!(
                    "{} {} — {}",
                    outcome.id,
                    if outcome.passed { "PASS" } else { "FAIL" },
                    outcome.description
                );
            }
            let document = ConformanceSuite::new().document();
            println!(
                "document checksum: {}",
                conformance_checksum(document.as_bytes())
            );
            if let Some(path) = write_document {
                std::fs::write(&path, &document)?;
                println!("document written to {}", path.display());
            }
            if !report.all_passed() {
                bail!("conformance vectors failed");
            }
            Ok(())
        }
        AuditCommand::Drift { expected } => {
            let expected = Digest::from_hex(&expected)?;
            let document = ConformanceSuite::new().document();
            if verify_drift(&expected, document.as_bytes()) {
                println!("no drift: document matches {expected}");
                Ok(())
            } else {
                bail!(
                    "drift detected: document hashes to {}",
                    conformance_checksum(document.as_bytes())
                );
            }
        }
    }
}

fn replay_command(data_dir: &std::path::Path) -> Result<()> {
    let log_path = data_dir.join("events.log");
    let state = crate::log::replay(&log_path)
        .with_context(|| format!("replaying {}", log_path.display()))?;
    println!("replayed {} events", state.applied_events);
    println!("agents: {}", state.graph.agent_count());
    println!("state digest: {}", state.state_digest());
    Ok(())
}
