use serde::{Deserialize, Serialize};

use crate::corpus::Headers;

/// Verdict of one authentication mechanism as recorded by the receiver.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default,
)]
#[serde(rename_all = "snake_case")]
pub enum AuthResult {
    Pass,
    Fail,
    None,
    /// No trusted Authentication-Results header mentioned the mechanism.
    #[default]
    Absent,
}

impl AuthResult {
    /// Maps an RFC 8601 result keyword. softfail, permerror, temperror and
    /// policy count as failures; neutral counts as none.
    fn from_keyword(word: &str) -> Self {
        match word.to_ascii_lowercase().as_str() {
            "pass" => AuthResult::Pass,
            "fail" | "softfail" | "hardfail" | "permerror" | "temperror" | "policy" => {
                AuthResult::Fail
            }
            _ => AuthResult::None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AuthResult::Pass => "pass",
            AuthResult::Fail => "fail",
            AuthResult::None => "none",
            AuthResult::Absent => "absent",
        }
    }

    /// Combines multiple results for one mechanism (several DKIM signatures):
    /// any pass wins, then fail, then none.
    fn merge(self, other: AuthResult) -> AuthResult {
        self.min(other)
    }
}

impl std::fmt::Display for AuthResult {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AuthVerdict {
    pub spf: AuthResult,
    pub dkim: AuthResult,
    pub authenticated_domain: Option<String>,
    /// The selected header could not be parsed.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub malformed: bool,
}

impl AuthVerdict {
    pub fn any_pass(&self) -> bool {
        self.spf == AuthResult::Pass || self.dkim == AuthResult::Pass
    }
}

/// Reads SPF and DKIM verdicts from the first Authentication-Results header
/// written by `trusted_mx` (or the first such header at all when no trusted
/// receiver is configured).
pub fn parse_auth_results(headers: &Headers, trusted_mx: Option<&str>) -> AuthVerdict {
    let selected = headers
        .get_all("Authentication-Results")
        .find(|value| match trusted_mx {
            None => true,
            Some(host) => authserv_id(value).is_some_and(|id| id.eq_ignore_ascii_case(host)),
        });
    match selected {
        None => AuthVerdict::default(),
        Some(value) => match parse_header_value(value) {
            Some(v) => v,
            None => {
                log::warn!("malformed Authentication-Results header: {value:?}");
                AuthVerdict {
                    malformed: true,
                    ..AuthVerdict::default()
                }
            }
        },
    }
}

fn authserv_id(value: &str) -> Option<&str> {
    let (head, _) = value.split_once(';')?;
    head.split_whitespace().next()
}

fn strip_comments(value: &str) -> String {
    let mut out = String::with_capacity(value.len());
    let mut depth = 0usize;
    for c in value.chars() {
        match c {
            '(' => depth += 1,
            ')' if depth > 0 => depth -= 1,
            _ if depth == 0 => out.push(c),
            _ => {}
        }
    }
    out
}

fn parse_header_value(value: &str) -> Option<AuthVerdict> {
    let cleaned = strip_comments(value);
    let mut parts = cleaned.split(';');
    let id = parts.next()?.trim();
    if id.is_empty() || id.contains('=') {
        return None;
    }
    let mut verdict = AuthVerdict::default();
    let mut saw_resinfo = false;
    let mut dkim_domain = None;
    let mut spf_domain = None;
    for resinfo in parts {
        let resinfo = resinfo.trim();
        if resinfo.is_empty() || resinfo.eq_ignore_ascii_case("none") {
            continue;
        }
        let mut tokens = resinfo.split_whitespace();
        let (method, result) = tokens.next().and_then(|t| t.split_once('='))?;
        saw_resinfo = true;
        let result = AuthResult::from_keyword(result);
        let props: Vec<(&str, &str)> = tokens.filter_map(|t| t.split_once('=')).collect();
        match method.to_ascii_lowercase().as_str() {
            "spf" => {
                verdict.spf = verdict.spf.merge(result);
                if result == AuthResult::Pass && spf_domain.is_none() {
                    spf_domain = prop(&props, &["smtp.mailfrom", "smtp.helo"]).map(domain_of);
                }
            }
            "dkim" => {
                verdict.dkim = verdict.dkim.merge(result);
                if result == AuthResult::Pass && dkim_domain.is_none() {
                    dkim_domain = prop(&props, &["header.d", "header.i"]).map(domain_of);
                }
            }
            _ => {}
        }
    }
    if !saw_resinfo && !cleaned.to_ascii_lowercase().contains("none") {
        return None;
    }
    verdict.authenticated_domain = dkim_domain.or(spf_domain);
    Some(verdict)
}

fn prop<'a>(props: &[(&'a str, &'a str)], keys: &[&str]) -> Option<&'a str> {
    keys.iter().find_map(|k| {
        props
            .iter()
            .find(|(name, _)| name.eq_ignore_ascii_case(k))
            .map(|(_, v)| *v)
    })
}

fn domain_of(value: &str) -> String {
    let v = value.trim_matches(|c| c == '"' || c == '<' || c == '>');
    v.rsplit_once('@')
        .map_or(v, |(_, d)| d)
        .to_ascii_lowercase()
}
