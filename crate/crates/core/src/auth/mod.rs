//! Request authentication: DID signatures in headers, bearer tokens, replay
//! defense, and the human-authorization gate.

mod gate;
mod header;
mod nonce;
mod token;

pub use gate::{
    authorize_operation, human_confirmation_payload, AuditLog, AuditRecord, Decision,
    DecliningGate, DenyReason, HumanConfirmation, HumanGate, PresentedConfirmation, RiskClass,
    SigningGate,
};
pub use header::{
    normalize_url, sign_request, signing_payload, verify_request, AuthHeader, HeaderParseError,
    RejectReason, SignError, Verification, DEFAULT_SKEW_SECS,
};
pub use nonce::NonceStore;
pub use token::{
    issue_token, parse_bearer, verify_token, Token, TokenClaims, TokenError, TokenInvalid,
    TokenOutcome,
};
