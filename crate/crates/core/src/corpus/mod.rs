//! Raw EML parsing, alias binding, and the corpus store.

pub mod alias;
pub mod domain;
mod eml;
mod headers;
mod ingest;
mod record;

pub use alias::{generate_alias, load_alias_registry, AliasEntry, AliasRegistry, ServiceKind};
pub use domain::root_domain;
pub use eml::{content_hash_id, parse_eml, parse_eml_full, strip_html, ParseOptions, ParsedEml};
pub use headers::Headers;
pub use ingest::{ingest_corpus, ingest_files, CorpusStore, IngestReport, UNMATCHED_BUCKET};
pub use record::{EmailRecord, ParseStatus};
