use std::collections::BTreeMap;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::AuthResult;
use crate::classify::ContentLabel;
use crate::corpus::domain::registrable;
use crate::corpus::EmailRecord;
use crate::error::{AuditError, Result};
use crate::netintel::AsnRecord;

const SEED_ORG_MAP: &str = include_str!("../../data/org_map.csv");

/// Default substrings identifying public-cloud ASNs.
pub const DEFAULT_CLOUD_ORGS: &[&str] = &["amazon", "google-cloud", "rackspace"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Internal,
    Atp,
    Utp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpamClass {
    Sos,
    Uuss,
    NotSpam,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ProvenanceLabel {
    pub provenance: Provenance,
    pub spam: SpamClass,
    /// Sent from a cloud ASN (or an unresolved one), so the operator behind
    /// the campaign cannot be identified from the IP.
    pub operator_unknown: bool,
    /// Needs a human look, e.g. an own-domain message failing both SPF and DKIM.
    pub needs_review: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrgEntry {
    pub service_name: String,
    pub accepted_domains: Vec<String>,
    pub accepted_asn_org_substrings: Vec<String>,
}

/// Service → accepted sending domains and own-network ASN organisations.
#[derive(Debug, Clone, Default)]
pub struct OrgMap {
    entries: BTreeMap<String, OrgEntry>,
}

#[derive(Deserialize)]
struct OrgRow {
    service_name: String,
    accepted_domains: String,
    accepted_asn_org_substrings: String,
}

fn split_list(s: &str) -> Vec<String> {
    s.split(';')
        .map(|x| x.trim().to_ascii_lowercase())
        .filter(|x| !x.is_empty())
        .collect()
}

impl OrgMap {
    pub fn from_reader<R: Read>(reader: R, source: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(reader);
        let mut entries = BTreeMap::new();
        for (i, row) in rdr.deserialize::<OrgRow>().enumerate() {
            let row = row.map_err(|e| AuditError::parse(source, i + 2, e.to_string()))?;
            let entry = OrgEntry {
                service_name: row.service_name.clone(),
                accepted_domains: split_list(&row.accepted_domains)
                    .iter()
                    .map(|d| registrable(d))
                    .collect(),
                accepted_asn_org_substrings: split_list(&row.accepted_asn_org_substrings),
            };
            entries.insert(row.service_name.to_ascii_lowercase(), entry);
        }
        Ok(OrgMap { entries })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| AuditError::io(path, e))?;
        Self::from_reader(file, &path.display().to_string())
    }

    /// Mapping seeded with services known to send from their own networks.
    pub fn seeded() -> Self {
        Self::from_reader(SEED_ORG_MAP.as_bytes(), "org_map.csv").expect("bundled org map parses")
    }

    pub fn get(&self, service_name: &str) -> Option<&OrgEntry> {
        self.entries.get(&service_name.to_ascii_lowercase())
    }

    pub fn merge(&mut self, other: OrgMap) {
        self.entries.extend(other.entries);
    }

    /// Whether `root_domain` is a sending domain of the service. Services
    /// without an entry match when the domain's first label starts with the
    /// service name reduced to lowercase alphanumerics.
    pub fn domain_matches(&self, service_name: &str, root_domain: &str) -> bool {
        match self.get(service_name) {
            Some(e) => e.accepted_domains.iter().any(|d| d == root_domain),
            None => {
                let key = normalized(service_name);
                let first = root_domain.split('.').next().unwrap_or("");
                !key.is_empty() && first.starts_with(&key)
            }
        }
    }

    /// Whether an ASN organisation is the service's own network.
    pub fn asn_is_own(&self, service_name: &str, organization: &str) -> bool {
        let org = organization.to_ascii_lowercase();
        match self.get(service_name) {
            Some(e) => e
                .accepted_asn_org_substrings
                .iter()
                .any(|s| org.contains(s.as_str())),
            None => {
                let key = normalized(service_name);
                !key.is_empty() && normalized(&org).contains(&key)
            }
        }
    }
}

fn normalized(s: &str) -> String {
    s.chars()
        .filter(|c| c.is_ascii_alphanumeric())
        .map(|c| c.to_ascii_lowercase())
        .collect()
}

#[derive(Debug, Clone)]
pub struct ProvenanceContext {
    pub org_map: OrgMap,
    pub cloud_orgs: Vec<String>,
}

impl Default for ProvenanceContext {
    fn default() -> Self {
        ProvenanceContext {
            org_map: OrgMap::seeded(),
            cloud_orgs: DEFAULT_CLOUD_ORGS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl ProvenanceContext {
    pub fn is_cloud(&self, organization: &str) -> bool {
        let org = organization.to_ascii_lowercase();
        self.cloud_orgs.iter().any(|c| org.contains(c.as_str()))
    }
}

/// Assigns Internal/ATP/UTP provenance and the SOS/UUSS spam class.
///
/// `content` is the message's content class, `None` when unclassified. The
/// marketing flag does not change the provenance class (a marketing ESP is
/// one kind of distinct organisation) but is accepted so callers can pass
/// everything they know about the sender.
pub fn classify_provenance(
    record: &EmailRecord,
    ctx: &ProvenanceContext,
    asn: Option<&AsnRecord>,
    marketing_flag: bool,
    content: Option<ContentLabel>,
) -> ProvenanceLabel {
    let auth_pass = record.spf == AuthResult::Pass || record.dkim == AuthResult::Pass;
    let both_fail = record.spf == AuthResult::Fail && record.dkim == AuthResult::Fail;

    let service = record.alias.as_ref().map(|a| a.service_name.as_str());
    let domain_match = service.is_some_and(|s| {
        !record.from_root_domain.is_empty()
            && ctx.org_map.domain_matches(s, &record.from_root_domain)
    });

    let utp = ProvenanceLabel {
        provenance: Provenance::Utp,
        spam: SpamClass::Uuss,
        operator_unknown: false,
        needs_review: false,
    };
    let (Some(service), true) = (service, domain_match) else {
        return utp;
    };

    let own = asn.is_some_and(|a| ctx.org_map.asn_is_own(service, &a.organization));
    let (provenance, operator_unknown) = if own {
        (Provenance::Internal, false)
    } else if auth_pass {
        let unknown = match asn {
            None => true,
            Some(a) => !marketing_flag && ctx.is_cloud(&a.organization),
        };
        (Provenance::Atp, unknown)
    } else {
        return ProvenanceLabel {
            needs_review: both_fail,
            ..utp
        };
    };

    let spam = if both_fail {
        SpamClass::Uuss
    } else if auth_pass && matches!(content, Some(ContentLabel::Promotional | ContentLabel::Crm)) {
        SpamClass::Sos
    } else {
        SpamClass::NotSpam
    };
    ProvenanceLabel {
        provenance,
        spam,
        operator_unknown,
        needs_review: both_fail || !auth_pass,
    }
}
