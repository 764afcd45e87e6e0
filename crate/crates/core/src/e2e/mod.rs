//! End-to-end encrypted channels between two DIDs.

mod handshake;
mod session;

pub use handshake::{
    complete_handshake, initiate_handshake, respond_handshake, E2eIdentity, HandshakeError,
    HandshakeMessage, HandshakeReply, PendingSession,
};
pub use session::{
    Envelope, OpenError, RoutingHeader, SealError, Session, WireError, ENVELOPE_VERSION,
};
