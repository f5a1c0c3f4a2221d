//! Sender authentication and provenance.
//!
//! SPF/DKIM verdicts are read from the Authentication-Results headers the
//! audit receiver stored with each message; signatures are not re-verified.
//! The sender IP comes from the Received header that receiver wrote.

mod provenance;
mod received;
mod results;

pub use provenance::{
    classify_provenance, OrgEntry, OrgMap, Provenance, ProvenanceContext, ProvenanceLabel,
    SpamClass, DEFAULT_CLOUD_ORGS,
};
pub use received::{extract_sender_ip, received_by, received_from_ip, received_timestamp};
pub use results::{parse_auth_results, AuthResult, AuthVerdict};
