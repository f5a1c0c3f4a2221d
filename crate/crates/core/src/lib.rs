//! Batch auditing toolkit for inbox-provenance studies.
//!
//! A corpus of `.eml` files collected at a catch-all domain, one alias per
//! audited service, is parsed and bound to services ([`corpus`]). Sender
//! authentication and provenance are derived from stored headers
//! ([`authlineage`]), content is classified ([`classify`]), sender IPs are
//! enriched with ASN and abuse data ([`netintel`]), and the corpus is analysed
//! for periodicity ([`temporal`]), behavioural clusters ([`cluster`]) and
//! cross-sector differences ([`stats`]). [`report`] ties the stages together
//! and writes the analysis artifacts.

pub mod authlineage;
pub mod classify;
pub mod cluster;
pub mod corpus;
pub mod error;
pub mod netintel;
pub mod report;
pub mod stats;
pub mod synth;
pub mod temporal;

pub use authlineage::{AuthResult, AuthVerdict, Provenance, ProvenanceLabel, SpamClass};
pub use classify::{Classification, ContentLabel};
pub use cluster::{ClusterModel, FeatureVector, PcaModel};
pub use corpus::{AliasEntry, AliasRegistry, CorpusStore, EmailRecord, ParseStatus};
pub use error::{AuditError, ErrorKind, Result};
pub use netintel::{AsnRecord, AsnTable, SenderProfile};
pub use stats::{ContingencyTable, TestResult};
pub use temporal::{DailySeries, Decomposition, SpectrumPeak};
