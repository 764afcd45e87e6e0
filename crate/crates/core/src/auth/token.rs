//! Short-lived bearer tokens issued after the first verified request.
//!
//! A token is self-contained: canonical-JSON claims plus a detached issuer
//! signature, framed as `base64url(claims) "." base64url(signature)`. Servers
//! verify the signature under their own routine authentication key, so no
//! session state survives issuance. Subsequent requests carry
//! `Authorization: Bearer <framed token>`.

use base64::engine::general_purpose::URL_SAFE_NO_PAD;
use base64::Engine as _;
use rand::rngs::OsRng;
use rand::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::identity::{verify_signature, DidDocument, DidId, KeyPair};
use crate::time::Clock;

const TOKEN_CONTEXT: &str = "anp-token.v1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenClaims {
    /// The authenticated client.
    pub sub: DidId,
    /// The node that issued the token.
    pub iss: DidId,
    pub iat: u64,
    pub exp: u64,
    pub jti: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub claims: TokenClaims,
    pub signature: Vec<u8>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TokenError {
    #[error("ttl must be positive")]
    ZeroTtl,
    #[error("malformed token")]
    Malformed,
    #[error(transparent)]
    Key(#[from] crate::identity::KeyError),
}

fn claims_bytes(claims: &TokenClaims) -> Vec<u8> {
    crate::canonical::to_canonical_json(claims).expect("claims serialize")
}

fn signed_payload(claims: &TokenClaims) -> Vec<u8> {
    let mut payload = format!("{TOKEN_CONTEXT}\n").into_bytes();
    payload.extend_from_slice(&claims_bytes(claims));
    payload
}

/// Issue a token for `subject`, signed by the issuer's routine key.
pub fn issue_token(
    subject: &DidId,
    issuer: &DidId,
    issuer_key: &KeyPair,
    ttl_secs: u64,
    clock: &dyn Clock,
) -> Result<Token, TokenError> {
    if ttl_secs == 0 {
        return Err(TokenError::ZeroTtl);
    }
    let mut id_bytes = [0u8; 16];
    OsRng.fill_bytes(&mut id_bytes);
    let iat = clock.now_unix();
    let claims = TokenClaims {
        sub: subject.clone(),
        iss: issuer.clone(),
        iat,
        exp: iat + ttl_secs,
        jti: hex::encode(id_bytes),
    };
    let signature = issuer_key.sign(&signed_payload(&claims))?;
    Ok(Token { claims, signature })
}

impl Token {
    /// Compact framing carried on the wire.
    pub fn encode(&self) -> String {
        format!(
            "{}.{}",
            URL_SAFE_NO_PAD.encode(claims_bytes(&self.claims)),
            URL_SAFE_NO_PAD.encode(&self.signature)
        )
    }

    pub fn decode(framed: &str) -> Result<Self, TokenError> {
        let (claims_b64, sig_b64) = framed.split_once('.').ok_or(TokenError::Malformed)?;
        let claims_raw = URL_SAFE_NO_PAD
            .decode(claims_b64)
            .map_err(|_| TokenError::Malformed)?;
        let claims: TokenClaims =
            serde_json::from_slice(&claims_raw).map_err(|_| TokenError::Malformed)?;
        let signature = URL_SAFE_NO_PAD
            .decode(sig_b64)
            .map_err(|_| TokenError::Malformed)?;
        Ok(Token { claims, signature })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TokenOutcome {
    Valid(TokenClaims),
    Invalid(TokenInvalid),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenInvalid {
    Expired,
    BadSignature,
    UnknownIssuerKey,
}

impl TokenOutcome {
    pub fn is_valid(&self) -> bool {
        matches!(self, TokenOutcome::Valid(_))
    }
}

/// Check a token against the issuer's DID document and the clock.
pub fn verify_token(token: &Token, issuer_doc: &DidDocument, clock: &dyn Clock) -> TokenOutcome {
    if token.claims.iss != issuer_doc.id {
        return TokenOutcome::Invalid(TokenInvalid::UnknownIssuerKey);
    }
    let payload = signed_payload(&token.claims);
    let signed_by_issuer = issuer_doc
        .authentication_methods()
        .any(|m| verify_signature(&m.public_key, &payload, &token.signature));
    if !signed_by_issuer {
        return TokenOutcome::Invalid(TokenInvalid::BadSignature);
    }
    if clock.now_unix() >= token.claims.exp {
        return TokenOutcome::Invalid(TokenInvalid::Expired);
    }
    TokenOutcome::Valid(token.claims.clone())
}

/// Extract the framed token from a `Bearer` authorization value.
pub fn parse_bearer(header_value: &str) -> Option<&str> {
    header_value.strip_prefix("Bearer ")
}
