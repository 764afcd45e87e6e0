//! Agent identity: did:wba identifiers, key material, and DID documents.

mod did;
mod document;
mod keys;
mod resolve;

pub use did::{parse_did, DidId, DidParseError};
pub use document::{
    build_did_document, validate_did_document, BuildError, DidDocument, KeyPurpose, ServiceEntry,
    VerificationMethod, Violation, AGENT_DESCRIPTION_SERVICE,
};
pub use keys::{
    generate_keypair, generate_keypair_named, multibase_decode, multibase_encode, verify_signature,
    Algorithm, KeyClass, KeyError, KeyPair,
};
pub use resolve::{CachingResolver, DidResolver, ResolveError, StaticResolver, TransportResolver};
