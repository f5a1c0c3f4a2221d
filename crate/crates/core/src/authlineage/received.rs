use std::net::IpAddr;
use std::sync::OnceLock;

use chrono::{DateTime, Utc};
use regex::Regex;

use crate::corpus::Headers;
use crate::netintel::is_reserved;

fn by_host_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)(?:^|[\s)])by\s+([^\s;()]+)").unwrap())
}

fn bracket_ip_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)\[(?:ipv6:)?([0-9a-f:.]+)\]").unwrap())
}

fn bare_ipv4_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\b(\d{1,3}(?:\.\d{1,3}){3})\b").unwrap())
}

/// Host named in the `by` clause of a Received header.
pub fn received_by(value: &str) -> Option<&str> {
    by_host_re()
        .captures(value)
        .and_then(|c| c.get(1))
        .map(|m| m.as_str().trim_end_matches('.'))
}

/// Connecting IP named in the `from` clause of a Received header.
pub fn received_from_ip(value: &str) -> Option<IpAddr> {
    let from_clause = match by_host_re().find(value) {
        Some(m) => &value[..m.start()],
        None => value.split(';').next().unwrap_or(value),
    };
    bracket_ip_re()
        .captures_iter(from_clause)
        .filter_map(|c| c[1].parse::<IpAddr>().ok())
        .next()
        .or_else(|| {
            bare_ipv4_re()
                .captures_iter(from_clause)
                .filter_map(|c| c[1].parse::<IpAddr>().ok())
                .next()
        })
}

fn trusted_received<'a>(
    headers: &'a Headers,
    trusted_mx: Option<&'a str>,
) -> impl Iterator<Item = &'a str> + 'a {
    headers
        .get_all("Received")
        .filter(move |v| match trusted_mx {
            None => true,
            Some(host) => received_by(v).is_some_and(|by| by.eq_ignore_ascii_case(host)),
        })
}

/// The sender IP as seen by the trusted receiver: the connecting address in
/// the topmost Received header it wrote. Internal hops (private or loopback
/// addresses) are skipped.
pub fn extract_sender_ip(headers: &Headers, trusted_mx: Option<&str>) -> Option<IpAddr> {
    trusted_received(headers, trusted_mx)
        .filter_map(received_from_ip)
        .find(|ip| !is_reserved(*ip))
}

/// Delivery timestamp from the topmost trusted Received header.
pub fn received_timestamp(headers: &Headers, trusted_mx: Option<&str>) -> Option<DateTime<Utc>> {
    trusted_received(headers, trusted_mx).find_map(|v| {
        let (_, date) = v.rsplit_once(';')?;
        let secs = mailparse::dateparse(date.trim()).ok()?;
        DateTime::from_timestamp(secs, 0)
    })
}
