//! Agent Network Protocol core library.
//!
//! The protocol stack has three layers:
//!
//! 1. **Identity and secure communication** — [`identity`] (did:wba identifiers
//!    and DID documents), [`auth`] (per-request DID signatures, bearer tokens,
//!    replay defense, human-authorization gating) and [`e2e`] (ECDHE sessions
//!    whose envelopes forwarding proxies can route but not read).
//! 2. **Meta-protocol** — [`metaproto`], the negotiation state machine by which
//!    two agents agree on a concrete protocol, test it, and take it live,
//!    with a cache of prior agreements.
//! 3. **Application protocols** — [`description`] (agent description documents)
//!    and [`discovery`] (well-known directory crawling plus a registration
//!    index).
//!
//! Everything here is transport-agnostic: network access goes through the
//! [`wire::Transport`] capability so the same code runs over real HTTP or the
//! in-memory simulation harness in `anp-node`.

pub mod auth;
pub mod canonical;
pub mod description;
pub mod discovery;
pub mod e2e;
pub mod encoding;
pub mod identity;
pub mod metaproto;
pub mod time;
pub mod wire;
