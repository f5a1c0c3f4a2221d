use std::collections::BTreeMap;
use std::io::Read;
use std::net::IpAddr;
use std::path::Path;
use std::time::Duration;

use crate::error::{AuditError, Result};

pub type AbuseReports = BTreeMap<IpAddr, u64>;

/// Reads `ip, total_reports` rows. A header row is allowed; duplicate IPs
/// are summed.
pub fn abuse_reports_from_reader<R: Read>(reader: R, source: &str) -> Result<AbuseReports> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .flexible(true)
        .from_reader(reader);
    let mut out = AbuseReports::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row.map_err(|e| AuditError::parse(source, i + 1, e.to_string()))?;
        let line = row.position().map_or(i + 1, |p| p.line() as usize);
        if row.len() < 2 {
            return Err(AuditError::parse(
                source,
                line,
                "expected ip, total_reports",
            ));
        }
        let ip: IpAddr = match row[0].parse() {
            Ok(ip) => ip,
            Err(_) if i == 0 => continue,
            Err(_) => {
                return Err(AuditError::parse(
                    source,
                    line,
                    format!("bad ip {:?}", &row[0]),
                ))
            }
        };
        let n: u64 = row[1].parse().map_err(|_| {
            AuditError::parse(source, line, format!("bad report count {:?}", &row[1]))
        })?;
        *out.entry(ip).or_default() += n;
    }
    Ok(out)
}

pub fn load_abuse_reports(path: impl AsRef<Path>) -> Result<AbuseReports> {
    let path = path.as_ref();
    let f = std::fs::File::open(path).map_err(|e| AuditError::io(path, e))?;
    abuse_reports_from_reader(f, &path.display().to_string())
}

/// Client for an AbuseIPDB-compatible `check` endpoint, for refreshing a
/// snapshot. Answers are read from `data.totalReports`.
pub struct AbuseClient {
    base_url: String,
    api_key: String,
    max_age_days: u32,
    agent: ureq::Agent,
}

impl AbuseClient {
    pub fn new(base_url: &str, api_key: &str, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(true)
            .build()
            .into();
        AbuseClient {
            base_url: base_url.trim_end_matches('/').to_string(),
            api_key: api_key.to_string(),
            max_age_days: 365,
            agent,
        }
    }

    pub fn with_max_age_days(mut self, days: u32) -> Self {
        self.max_age_days = days;
        self
    }

    pub fn total_reports(&self, ip: IpAddr) -> Result<u64> {
        let url = format!("{}/check", self.base_url);
        let fail = |m: String| AuditError::Format(format!("abuse lookup for {ip}: {m}"));
        let body: serde_json::Value = self
            .agent
            .get(&url)
            .query("ipAddress", ip.to_string())
            .query("maxAgeInDays", self.max_age_days.to_string())
            .header("Key", &self.api_key)
            .header("Accept", "application/json")
            .call()
            .map_err(|e| fail(e.to_string()))?
            .body_mut()
            .read_json()
            .map_err(|e| fail(e.to_string()))?;
        body.pointer("/data/totalReports")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| fail("response lacks data.totalReports".into()))
    }

    /// Fetches counts for every address; failures are logged and skipped.
    pub fn snapshot<'a>(&self, ips: impl IntoIterator<Item = &'a IpAddr>) -> AbuseReports {
        let mut out = AbuseReports::new();
        for ip in ips {
            match self.total_reports(*ip) {
                Ok(n) => {
                    out.insert(*ip, n);
                }
                Err(e) => log::warn!("{e}"),
            }
        }
        out
    }
}

/// Writes a snapshot in the format [`load_abuse_reports`] reads.
pub fn write_abuse_reports(path: impl AsRef<Path>, reports: &AbuseReports) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["ip", "total_reports"])?;
    for (ip, n) in reports {
        w.write_record([ip.to_string(), n.to_string()])?;
    }
    w.flush().map_err(|e| AuditError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<AbuseReports> {
        abuse_reports_from_reader(s.as_bytes(), "t")
    }

    #[test]
    fn three_rows() {
        let m = parse("ip,total_reports\n1.2.3.4,5\n5.6.7.8,0\n2001:db8::1,9\n").unwrap();
        assert_eq!(m.len(), 3);
        assert_eq!(m[&"5.6.7.8".parse::<IpAddr>().unwrap()], 0);
    }

    #[test]
    fn duplicates_are_summed() {
        let m = parse("1.2.3.4,5\n1.2.3.4,7\n").unwrap();
        assert_eq!(m.values().copied().collect::<Vec<_>>(), vec![12]);
    }

    #[test]
    fn malformed_rows() {
        assert!(matches!(
            parse("1.2.3.4,5\nnot-an-ip,1\n"),
            Err(AuditError::Parse { row: 2, .. })
        ));
        assert!(parse("1.2.3.4,-1\n").is_err());
        assert!(parse("1.2.3.4\n").is_err());
    }

    #[test]
    fn write_then_read() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("abuse.csv");
        let m = parse("1.2.3.4,5\n8.8.8.8,2\n").unwrap();
        write_abuse_reports(&p, &m).unwrap();
        assert_eq!(load_abuse_reports(&p).unwrap(), m);
    }
}
