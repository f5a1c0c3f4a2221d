use std::collections::BTreeSet;
use std::io::{BufRead, BufReader, Read};
use std::net::IpAddr;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::block::{is_reserved, to_u128, IpBlock};
use crate::error::{AuditError, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AsnRecord {
    pub asn: u32,
    pub organization: String,
    pub prefix: IpBlock,
}

impl AsnRecord {
    pub fn new(asn: u32, organization: &str, prefix: IpBlock) -> Self {
        AsnRecord {
            asn,
            organization: organization.to_string(),
            prefix,
        }
    }

    /// `AS11377 SENDGRID` style label used in flow outputs.
    pub fn label(&self) -> String {
        format!("AS{} {}", self.asn, self.organization)
    }
}

/// Outcome of resolving a sender IP.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AsnLookup<'a> {
    Routed(&'a AsnRecord),
    /// Public address not covered by the table.
    Unrouted,
    /// Private or otherwise reserved address.
    InternalHop,
    /// Sender IP not known.
    Unknown,
}

impl<'a> AsnLookup<'a> {
    pub fn record(self) -> Option<&'a AsnRecord> {
        match self {
            AsnLookup::Routed(r) => Some(r),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Segment {
    start: u128,
    end: u128,
    record: usize,
}

/// Offline IP→ASN table. Overlapping ranges are flattened into disjoint
/// segments, each owned by the most specific (smallest) covering range.
#[derive(Debug, Clone, Default)]
pub struct AsnTable {
    records: Vec<AsnRecord>,
    v4: Vec<Segment>,
    v6: Vec<Segment>,
}

fn flatten(records: &[AsnRecord], v4: bool) -> Vec<Segment> {
    // (position, is_start, specificity key)
    let mut events: Vec<(u128, bool, (u128, usize))> = Vec::new();
    for (i, r) in records.iter().enumerate() {
        if r.prefix.is_ipv4() != v4 {
            continue;
        }
        let s = to_u128(r.prefix.start());
        let e = to_u128(r.prefix.end());
        let key = (r.prefix.span(), i);
        events.push((s, true, key));
        if let Some(after) = e.checked_add(1) {
            events.push((after, false, key));
        }
    }
    events.sort();
    let family_max = if v4 { u32::MAX as u128 } else { u128::MAX };
    let mut active: BTreeSet<(u128, usize)> = BTreeSet::new();
    let mut out: Vec<Segment> = Vec::new();
    let mut i = 0;
    while i < events.len() {
        let pos = events[i].0;
        while i < events.len() && events[i].0 == pos {
            let (_, is_start, key) = events[i];
            if is_start {
                active.insert(key);
            } else {
                active.remove(&key);
            }
            i += 1;
        }
        let Some(&(_, owner)) = active.first() else {
            continue;
        };
        let end = if i < events.len() {
            events[i].0 - 1
        } else {
            family_max
        };
        match out.last_mut() {
            Some(last) if last.record == owner && last.end.checked_add(1) == Some(pos) => {
                last.end = end
            }
            _ => out.push(Segment {
                start: pos,
                end,
                record: owner,
            }),
        }
    }
    out
}

fn parse_asn(s: &str) -> Option<u32> {
    let s = s.trim();
    let digits = s
        .strip_prefix("AS")
        .or_else(|| s.strip_prefix("as"))
        .unwrap_or(s);
    digits.parse().ok()
}

fn looks_like_country(s: &str) -> bool {
    s == "None" || (s.len() == 2 && s.chars().all(|c| c.is_ascii_uppercase()))
}

impl AsnTable {
    pub fn from_records(records: Vec<AsnRecord>) -> Self {
        let v4 = flatten(&records, true);
        let v6 = flatten(&records, false);
        AsnTable { records, v4, v6 }
    }

    /// Reads `cidr, asn, organization` or `range_start, range_end, asn,
    /// organization` rows, tab or comma separated. Blank lines, `#`
    /// comments and a header line are skipped. Rows with ASN 0 mark
    /// unrouted space and are dropped. In tab-separated five-column rows
    /// (`start end asn country org`) the country column is ignored.
    pub fn from_reader<R: Read>(reader: R, source: &str) -> Result<Self> {
        let mut records = Vec::new();
        for (i, line) in BufReader::new(reader).lines().enumerate() {
            let row = i + 1;
            let line = line.map_err(|e| AuditError::parse(source, row, e.to_string()))?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let sep = if line.contains('\t') { '\t' } else { ',' };
            let owned = split_fields(line, sep);
            let fields: Vec<&str> = owned.iter().map(String::as_str).collect();
            let bad = |m: &str| AuditError::parse(source, row, m.to_string());
            let (block, rest) = if fields[0].contains('/') {
                let b: IpBlock = fields[0]
                    .parse()
                    .map_err(|e: super::block::BlockError| bad(&e.0))?;
                (b, &fields[1..])
            } else {
                if fields.len() < 3 {
                    return Err(bad("expected range_start, range_end, asn, organization"));
                }
                let start: std::result::Result<IpAddr, _> = fields[0].parse();
                let end: std::result::Result<IpAddr, _> = fields[1].parse();
                match (start, end) {
                    (Ok(s), Ok(e)) => {
                        let b = IpBlock::from_range(s, e).map_err(|e| bad(&e.0))?;
                        (b, &fields[2..])
                    }
                    _ if records.is_empty() && row_is_header(&fields) => continue,
                    _ => return Err(bad(&format!("bad address range {:?}", &fields[..2]))),
                }
            };
            let Some(asn) = rest.first().and_then(|a| parse_asn(a)) else {
                return Err(bad("missing or non-numeric asn"));
            };
            let mut org_fields = &rest[1..];
            if sep == '\t' && org_fields.len() >= 2 && looks_like_country(org_fields[0]) {
                org_fields = &org_fields[1..];
            }
            let organization = org_fields.join(if sep == '\t' { " " } else { "," });
            if asn == 0 {
                continue;
            }
            records.push(AsnRecord {
                asn,
                organization: organization.trim().to_string(),
                prefix: block,
            });
        }
        Ok(Self::from_records(records))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = std::fs::File::open(path).map_err(|e| AuditError::io(path, e))?;
        Self::from_reader(f, &path.display().to_string())
    }

    pub fn records(&self) -> &[AsnRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Most specific record containing `ip`.
    pub fn get(&self, ip: IpAddr) -> Option<&AsnRecord> {
        let segs = if ip.is_ipv4() { &self.v4 } else { &self.v6 };
        let x = to_u128(ip);
        let idx = segs.partition_point(|s| s.start <= x).checked_sub(1)?;
        let seg = segs[idx];
        (x <= seg.end).then(|| &self.records[seg.record])
    }

    pub fn lookup(&self, ip: Option<IpAddr>) -> AsnLookup<'_> {
        match ip {
            None => AsnLookup::Unknown,
            Some(ip) if is_reserved(ip) => AsnLookup::InternalHop,
            Some(ip) => self.get(ip).map_or(AsnLookup::Unrouted, AsnLookup::Routed),
        }
    }
}

fn split_fields(line: &str, sep: char) -> Vec<String> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .delimiter(sep as u8)
        .quoting(sep == ',')
        .trim(csv::Trim::All)
        .from_reader(line.as_bytes());
    match rdr.records().next() {
        Some(Ok(rec)) => rec.iter().map(str::to_string).collect(),
        _ => line.split(sep).map(|f| f.trim().to_string()).collect(),
    }
}

fn row_is_header(fields: &[&str]) -> bool {
    fields
        .iter()
        .all(|f| f.chars().all(|c| c.is_alphabetic() || c == '_' || c == ' '))
}

/// Most specific record containing `ip`, `None` for reserved, unrouted or
/// unknown addresses.
pub fn lookup_asn(ip: Option<IpAddr>, table: &AsnTable) -> Option<&AsnRecord> {
    table.lookup(ip).record()
}

pub fn load_ip2asn(path: impl AsRef<Path>) -> Result<AsnTable> {
    AsnTable::load(path)
}
