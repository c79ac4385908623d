//! Registry service for the MolTrust protocol.
//!
//! Wraps the core primitives with what a live deployment needs: a durable
//! append-only event log with snapshot replay, an HTTP API, operator-signed
//! score responses, revocation propagation with a bounded staleness window,
//! batch anchoring, and kernel-monitor event ingestion.

pub mod cli;
pub mod clock;
pub mod config;
pub mod http;
pub mod log;
pub mod registry;
pub mod state;
