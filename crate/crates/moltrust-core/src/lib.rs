//! Core primitives for the MolTrust agent trust protocol.
//!
//! The protocol answers three questions about an autonomous agent — is it the
//! same agent as before, is it permitted to do what it claims, and has it
//! behaved consistently — with four primitives:
//!
//! - **Identity**: decentralized identifiers ([`identity::Did`]) whose control
//!   is proven by possession of an Ed25519 key, resolvable to a
//!   [`identity::DidDocument`] that retains revoked keys.
//! - **Authorization**: verifiable credentials ([`credential`]) with mandatory
//!   expiry and fail-closed revocation checking, and the Agent Authorization
//!   Envelope ([`aae`]) — a signed MANDATE/CONSTRAINTS/VALIDITY structure with
//!   default-deny, deny-precedence, attenuation-only delegation, and mandatory
//!   expiry.
//! - **Behavioral record**: dual-signed interaction proof records ([`ipr`])
//!   batched into Merkle trees for anchoring, feeding the reference
//!   reputation model ([`trust`]) with layered Sybil resistance.
//! - **Portability**: every artifact serializes to RFC 8785 canonical JSON
//!   ([`canonical`]) and is signed with Ed25519 ([`crypto`]), so any party
//!   can verify evidence without contacting the registry. Cross-protocol
//!   mappings live in [`interop`].
//!
//! Everything here is pure with respect to time: operations take an explicit
//! `now` so verification and expiry behavior is deterministic under test.

pub mod aae;
pub mod canonical;
pub mod credential;
pub mod crypto;
pub mod identity;
pub mod interop;
pub mod ipr;
pub mod trust;

pub use crypto::{digest, sign, verify, Digest, Signature, SigningKey, VerifyingKey};
pub use identity::{Did, DidDocument, DidResolver, InMemoryResolver};
