use std::collections::{BTreeMap, BTreeSet};
use std::net::IpAddr;

use serde::{Deserialize, Serialize};

use super::abuse::AbuseReports;
use super::table::{AsnLookup, AsnRecord, AsnTable};
use crate::corpus::CorpusStore;
use crate::error::{AuditError, Result};
use crate::stats::{pearson, spearman, Correlation};

const BUNDLED_PROVIDERS: &str = include_str!("../../data/marketing_providers.txt");

/// Label of the node collecting public IPs missing from the ASN table.
pub const UNROUTED_LABEL: &str = "AS0 UNROUTED";

/// Known marketing-provider organisation substrings.
pub fn bundled_providers() -> Vec<String> {
    parse_provider_list(BUNDLED_PROVIDERS)
}

pub fn parse_provider_list(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_ascii_lowercase)
        .collect()
}

pub fn load_provider_list(path: impl AsRef<std::path::Path>) -> Result<Vec<String>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| AuditError::io(path, e))?;
    let list = parse_provider_list(&text);
    if list.is_empty() {
        return Err(AuditError::Config(format!(
            "{}: provider list is empty",
            path.display()
        )));
    }
    Ok(list)
}

/// Case-insensitive substring match of the ASN organisation against the list.
pub fn flag_marketing_asn(record: &AsnRecord, providers: &[String]) -> bool {
    let org = record.organization.to_ascii_lowercase();
    !org.is_empty()
        && providers
            .iter()
            .any(|p| !p.is_empty() && org.contains(&p.to_ascii_lowercase()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SenderProfile {
    pub service_name: String,
    pub ips: BTreeSet<IpAddr>,
    pub asns: BTreeSet<AsnRecord>,
    pub uses_marketing_provider: bool,
    pub spam_reports_total: u64,
    pub emails_total: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowEdge {
    pub source: String,
    pub target: String,
    pub weight: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreemapLeaf {
    pub name: String,
    pub value: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreemapNode {
    pub name: String,
    pub value: u64,
    pub children: Vec<TreemapLeaf>,
}

/// Profiles plus the flow data behind the Sankey and treemap figures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SenderNetwork {
    pub profiles: Vec<SenderProfile>,
    /// service → ASN, weighted by email count.
    pub sankey: Vec<FlowEdge>,
    /// ASN → sending root domain, weighted by spam reports.
    pub treemap: Vec<TreemapNode>,
}

/// Builds one profile per service with at least one email. Reserved and
/// unknown sender IPs are left out of `ips` and the flow outputs but the
/// messages still count toward `emails_total`.
pub fn build_sender_profiles(
    store: &CorpusStore,
    table: &AsnTable,
    abuse: &AbuseReports,
    providers: &[String],
) -> SenderNetwork {
    let mut profiles = Vec::new();
    let mut sankey: BTreeMap<(String, String), u64> = BTreeMap::new();
    let mut tree: BTreeMap<String, BTreeMap<String, u64>> = BTreeMap::new();

    for service in store.services() {
        let mut ips = BTreeSet::new();
        let mut asns = BTreeSet::new();
        let mut emails_total = 0u64;
        // ip → root domain → count, to attribute that IP's reports
        let mut ip_domains: BTreeMap<IpAddr, BTreeMap<&str, u64>> = BTreeMap::new();
        for r in store.service_records(service) {
            emails_total += 1;
            let lookup = table.lookup(r.sender_ip);
            let target = match lookup {
                AsnLookup::Routed(rec) => {
                    asns.insert(rec.clone());
                    rec.label()
                }
                AsnLookup::Unrouted => UNROUTED_LABEL.to_string(),
                AsnLookup::InternalHop | AsnLookup::Unknown => continue,
            };
            let ip = r.sender_ip.expect("routable lookups carry an ip");
            ips.insert(ip);
            *ip_domains
                .entry(ip)
                .or_default()
                .entry(r.from_root_domain.as_str())
                .or_default() += 1;
            *sankey.entry((service.to_string(), target)).or_default() += 1;
        }
        let mut spam_reports_total = 0;
        for (ip, domains) in &ip_domains {
            let reports = abuse.get(ip).copied().unwrap_or(0);
            spam_reports_total += reports;
            if reports == 0 {
                continue;
            }
            let asn_label = table
                .get(*ip)
                .map_or_else(|| UNROUTED_LABEL.to_string(), AsnRecord::label);
            // most frequent domain; ties go to the alphabetically first
            let domain = domains
                .iter()
                .max_by(|a, b| a.1.cmp(b.1).then_with(|| b.0.cmp(a.0)))
                .map(|(d, _)| if d.is_empty() { "(none)" } else { d })
                .unwrap_or("(none)");
            *tree
                .entry(asn_label)
                .or_default()
                .entry(domain.to_string())
                .or_default() += reports;
        }
        profiles.push(SenderProfile {
            service_name: service.to_string(),
            uses_marketing_provider: asns.iter().any(|a| flag_marketing_asn(a, providers)),
            ips,
            asns,
            spam_reports_total,
            emails_total,
        });
    }

    let mut treemap: Vec<TreemapNode> = tree
        .into_iter()
        .map(|(name, domains)| {
            let mut children: Vec<TreemapLeaf> = domains
                .into_iter()
                .map(|(name, value)| TreemapLeaf { name, value })
                .collect();
            children.sort_by(|a, b| b.value.cmp(&a.value).then_with(|| a.name.cmp(&b.name)));
            TreemapNode {
                value: children.iter().map(|c| c.value).sum(),
                name,
                children,
            }
        })
        .collect();
    treemap.sort_by(|a, b| b.value.cmp(&a.value).then_with(|| a.name.cmp(&b.name)));

    SenderNetwork {
        profiles,
        sankey: sankey
            .into_iter()
            .map(|((source, target), weight)| FlowEdge {
                source,
                target,
                weight,
            })
            .collect(),
        treemap,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsnVolume {
    pub asn: String,
    pub emails: u64,
    pub share: f64,
    pub cumulative: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsnConcentration {
    pub volumes: Vec<AsnVolume>,
    /// Number of ASNs making up the top fraction (rounded up).
    pub top_n: usize,
    pub top_fraction: f64,
    pub top_share: f64,
}

/// Email volume per ASN, descending, with the share held by the top
/// `top_fraction` of ASNs.
pub fn asn_volume_concentration(
    sankey: &[FlowEdge],
    top_fraction: f64,
) -> Result<AsnConcentration> {
    if !(0.0..=1.0).contains(&top_fraction) {
        return Err(AuditError::Range {
            what: "top fraction",
            value: top_fraction.to_string(),
        });
    }
    let mut by_asn: BTreeMap<&str, u64> = BTreeMap::new();
    for e in sankey {
        *by_asn.entry(e.target.as_str()).or_default() += e.weight;
    }
    let total: u64 = by_asn.values().sum();
    if total == 0 {
        return Err(AuditError::InsufficientData(
            "no routed email volume".into(),
        ));
    }
    let mut sorted: Vec<(&str, u64)> = by_asn.into_iter().collect();
    sorted.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let mut cum = 0u64;
    let volumes: Vec<AsnVolume> = sorted
        .iter()
        .map(|&(asn, emails)| {
            cum += emails;
            AsnVolume {
                asn: asn.to_string(),
                emails,
                share: emails as f64 / total as f64,
                cumulative: cum as f64 / total as f64,
            }
        })
        .collect();
    let top_n = ((volumes.len() as f64 * top_fraction).ceil() as usize).min(volumes.len());
    let top_share = if top_n == 0 {
        0.0
    } else {
        volumes[top_n - 1].cumulative
    };
    Ok(AsnConcentration {
        volumes,
        top_n,
        top_fraction,
        top_share,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoppingCorrelation {
    pub companies: usize,
    pub pearson: Correlation,
    pub spearman: Correlation,
}

/// Correlates distinct sending IPs with abuse reports across companies
/// that have at least one public sending IP.
pub fn ip_hopping_correlation(profiles: &[SenderProfile]) -> Result<HoppingCorrelation> {
    let used: Vec<&SenderProfile> = profiles.iter().filter(|p| !p.ips.is_empty()).collect();
    if used.len() < 3 {
        return Err(AuditError::InsufficientData(format!(
            "IP-hopping correlation needs 3 companies with sending IPs, got {}",
            used.len()
        )));
    }
    let x: Vec<f64> = used.iter().map(|p| p.ips.len() as f64).collect();
    let y: Vec<f64> = used.iter().map(|p| p.spam_reports_total as f64).collect();
    Ok(HoppingCorrelation {
        companies: used.len(),
        pearson: pearson(&x, &y)?,
        spearman: spearman(&x, &y)?,
    })
}
