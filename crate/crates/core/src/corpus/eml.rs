use chrono::{DateTime, Utc};
use chrono_tz::Tz;
use mailparse::{MailHeaderMap, ParsedMail};
use sha2::{Digest, Sha256};

use super::domain::root_domain;
use super::headers::Headers;
use super::record::{EmailRecord, ParseStatus};
use crate::authlineage::{extract_sender_ip, parse_auth_results, received_timestamp};

/// Receiver-side context needed to interpret stored headers.
#[derive(Debug, Clone)]
pub struct ParseOptions {
    pub trusted_mx: Option<String>,
    pub timezone: Tz,
}

impl Default for ParseOptions {
    fn default() -> Self {
        ParseOptions {
            trusted_mx: None,
            timezone: Tz::UTC,
        }
    }
}

/// A parsed message plus what ingestion needs beyond the record itself.
#[derive(Debug, Clone)]
pub struct ParsedEml {
    pub record: EmailRecord,
    /// Recipient local parts in resolution order: Delivered-To, X-Original-To, To.
    pub recipients: Vec<String>,
    pub headers: Headers,
}

pub fn content_hash_id(raw: &[u8]) -> String {
    format!("sha256:{}", hex::encode(Sha256::digest(raw)))
}

/// Parses one message. Never fails: input that is not a usable message
/// yields a record with `parse_status = Unparseable` and a content-hash id.
pub fn parse_eml(raw: &[u8], opts: &ParseOptions) -> EmailRecord {
    parse_eml_full(raw, opts).record
}

pub fn parse_eml_full(raw: &[u8], opts: &ParseOptions) -> ParsedEml {
    let unparseable = |headers: Headers, recipients: Vec<String>| ParsedEml {
        record: EmailRecord {
            message_id: content_hash_id(raw),
            parse_status: ParseStatus::Unparseable,
            ..EmailRecord::default()
        },
        recipients,
        headers,
    };

    let Ok(mail) = mailparse::parse_mail(raw) else {
        return unparseable(Headers::new(), Vec::new());
    };
    let headers: Headers = mail
        .headers
        .iter()
        .map(|h| (h.get_key(), h.get_value()))
        .collect();
    let recipients = recipient_local_parts(&mail);

    let trusted = opts.trusted_mx.as_deref();
    let from_address = mail
        .headers
        .get_first_header("From")
        .and_then(|h| first_address(h));
    let received_utc = received_timestamp(&headers, trusted).or_else(|| {
        headers
            .get_first("Date")
            .and_then(|d| mailparse::dateparse(d).ok())
            .and_then(|s| DateTime::<Utc>::from_timestamp(s, 0))
    });

    let (Some(from_address), Some(received_utc)) = (from_address, received_utc) else {
        return unparseable(headers, recipients);
    };
    let Ok(from_root_domain) = root_domain(&from_address) else {
        return unparseable(headers, recipients);
    };

    let message_id = headers
        .get_first("Message-ID")
        .map(|v| {
            v.trim()
                .trim_start_matches('<')
                .trim_end_matches('>')
                .trim()
                .to_string()
        })
        .filter(|v| !v.is_empty())
        .unwrap_or_else(|| content_hash_id(raw));

    let verdict = parse_auth_results(&headers, trusted);
    let sender_ip = extract_sender_ip(&headers, trusted);

    let record = EmailRecord {
        message_id,
        alias: None,
        from_address,
        from_root_domain,
        received_utc: Some(received_utc),
        received_local: Some(received_utc.with_timezone(&opts.timezone).fixed_offset()),
        sender_ip,
        spf: verdict.spf,
        dkim: verdict.dkim,
        subject: headers
            .get_first("Subject")
            .unwrap_or("")
            .trim()
            .to_string(),
        body_text: body_text(&mail),
        parse_status: ParseStatus::Ok,
    };
    ParsedEml {
        record,
        recipients,
        headers,
    }
}

fn first_address(header: &mailparse::MailHeader<'_>) -> Option<String> {
    let from_list = mailparse::addrparse_header(header).ok().and_then(|list| {
        list.iter().find_map(|a| match a {
            mailparse::MailAddr::Single(s) => Some(s.addr.clone()),
            mailparse::MailAddr::Group(g) => g.addrs.first().map(|s| s.addr.clone()),
        })
    });
    from_list
        .filter(|a| a.contains('@'))
        .map(|a| a.trim().to_ascii_lowercase())
}

fn recipient_local_parts(mail: &ParsedMail<'_>) -> Vec<String> {
    let mut out = Vec::new();
    for name in ["Delivered-To", "X-Original-To", "To"] {
        for header in mail.headers.get_all_headers(name) {
            let Ok(list) = mailparse::addrparse_header(header) else {
                continue;
            };
            for addr in list.iter() {
                let singles = match addr {
                    mailparse::MailAddr::Single(s) => vec![s],
                    mailparse::MailAddr::Group(g) => g.addrs.iter().collect(),
                };
                for s in singles {
                    if let Some((local, _)) = s.addr.rsplit_once('@') {
                        let local = local.trim().to_ascii_lowercase();
                        if !local.is_empty() && !out.contains(&local) {
                            out.push(local);
                        }
                    }
                }
            }
        }
    }
    out
}

fn body_text(mail: &ParsedMail<'_>) -> String {
    let mut plain = Vec::new();
    let mut html = Vec::new();
    collect_text(mail, &mut plain, &mut html);
    let plain: Vec<String> = plain.into_iter().filter(|s| !s.trim().is_empty()).collect();
    if !plain.is_empty() {
        return plain.join("\n").trim().to_string();
    }
    strip_html(&html.join("\n"))
}

fn collect_text(part: &ParsedMail<'_>, plain: &mut Vec<String>, html: &mut Vec<String>) {
    if !part.subparts.is_empty() {
        for sub in &part.subparts {
            collect_text(sub, plain, html);
        }
        return;
    }
    if part.get_content_disposition().disposition == mailparse::DispositionType::Attachment {
        return;
    }
    let Ok(body) = part.get_body() else {
        return;
    };
    match part.ctype.mimetype.to_ascii_lowercase().as_str() {
        "text/plain" => plain.push(body),
        "text/html" => html.push(body),
        _ => {}
    }
}

/// Drops tags, comments, and script/style contents; decodes common entities;
/// collapses whitespace.
pub fn strip_html(html: &str) -> String {
    let mut out = String::with_capacity(html.len() / 2);
    let lower = html.to_ascii_lowercase();
    let mut i = 0;
    let bytes = html.as_bytes();
    while i < bytes.len() {
        if bytes[i] == b'<' {
            let rest = &lower[i..];
            let skip_to = if rest.starts_with("<!--") {
                rest.find("-->").map(|e| i + e + 3)
            } else if rest.starts_with("<script") {
                rest.find("</script")
                    .and_then(|e| lower[i + e..].find('>').map(|g| i + e + g + 1))
            } else if rest.starts_with("<style") {
                rest.find("</style")
                    .and_then(|e| lower[i + e..].find('>').map(|g| i + e + g + 1))
            } else {
                rest.find('>').map(|e| i + e + 1)
            };
            let end = skip_to.unwrap_or(bytes.len());
            out.push(' ');
            i = end;
            continue;
        }
        let next = html[i..].find('<').map_or(bytes.len(), |n| i + n);
        out.push_str(&html[i..next]);
        i = next;
    }
    let decoded = decode_entities(&out);
    decoded.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn decode_entities(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    while let Some(amp) = rest.find('&') {
        out.push_str(&rest[..amp]);
        rest = &rest[amp..];
        let end = rest.find(';').filter(|&e| e <= 10);
        let Some(end) = end else {
            out.push('&');
            rest = &rest[1..];
            continue;
        };
        let entity = &rest[1..end];
        let replacement = match entity {
            "amp" => Some('&'),
            "lt" => Some('<'),
            "gt" => Some('>'),
            "quot" => Some('"'),
            "apos" => Some('\''),
            "nbsp" => Some(' '),
            _ if entity.starts_with("#x") || entity.starts_with("#X") => {
                u32::from_str_radix(&entity[2..], 16)
                    .ok()
                    .and_then(char::from_u32)
            }
            _ if entity.starts_with('#') => entity[1..].parse().ok().and_then(char::from_u32),
            _ => None,
        };
        match replacement {
            Some(c) => {
                out.push(c);
                rest = &rest[end + 1..];
            }
            None => {
                out.push('&');
                rest = &rest[1..];
            }
        }
    }
    out.push_str(rest);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::authlineage::AuthResult;
    use rand::{RngCore, SeedableRng};

    const MINIMAL: &str = "Date: Tue, 14 Nov 2023 14:05:00 +0000\r\n\
From: Best Buy <news@mail.bestbuy.com>\r\n\
To: karen007@audit.example\r\n\
Subject: Hello\r\n\
Message-ID: <abc@bestbuy.com>\r\n\
\r\n\
Body line.\r\n";

    #[test]
    fn minimal_message() {
        let r = parse_eml(MINIMAL.as_bytes(), &ParseOptions::default());
        assert_eq!(r.parse_status, ParseStatus::Ok);
        assert_eq!(r.message_id, "abc@bestbuy.com");
        assert_eq!(r.from_address, "news@mail.bestbuy.com");
        assert_eq!(r.from_root_domain, "bestbuy.com");
        assert_eq!(r.subject, "Hello");
        assert_eq!(r.body_text, "Body line.");
        assert_eq!(
            r.received_utc.unwrap().to_rfc3339(),
            "2023-11-14T14:05:00+00:00"
        );
        assert_eq!((r.spf, r.dkim), (AuthResult::Absent, AuthResult::Absent));
        assert_eq!(r.sender_ip, None);
    }

    #[test]
    fn local_time_in_audit_zone() {
        let opts = ParseOptions {
            trusted_mx: None,
            timezone: "America/Chicago".parse().unwrap(),
        };
        let r = parse_eml(MINIMAL.as_bytes(), &opts);
        assert_eq!(
            r.received_local.unwrap().to_rfc3339(),
            "2023-11-14T08:05:00-06:00"
        );
    }

    #[test]
    fn noise_is_unparseable() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let mut buf = vec![0u8; 512];
            rng.fill_bytes(&mut buf);
            let r = parse_eml(&buf, &ParseOptions::default());
            assert_eq!(r.parse_status, ParseStatus::Unparseable);
            assert_eq!(r.message_id, content_hash_id(&buf));
        }
    }

    #[test]
    fn folded_received_headers() {
        let raw = "Received: from o1.email.example.net\r\n\
\t(o1.email.example.net [167.89.1.2])\r\n\
\tby mx.audit with ESMTPS id 9; Wed, 15 Nov 2023 13:30:00 +0000\r\n\
Received: from internal ([10.0.0.5]) by o1.email.example.net; Wed, 15 Nov 2023 13:29:59 +0000\r\n\
Authentication-Results: mx.audit;\r\n\
\tspf=pass smtp.mailfrom=bounce@em.target.com;\r\n\
\tdkim=pass header.d=target.com\r\n\
Date: Wed, 15 Nov 2023 07:29:00 -0600\r\n\
From: Target <deals@em.target.com>\r\n\
To: ann012@audit.example\r\n\
Subject: =?utf-8?q?Caf=C3=A9_deals?=\r\n\
\r\n\
hi\r\n";
        let parsed = parse_eml_full(
            raw.as_bytes(),
            &ParseOptions {
                trusted_mx: Some("mx.audit".into()),
                ..ParseOptions::default()
            },
        );
        let received: Vec<&str> = parsed.headers.get_all("Received").collect();
        // hand-unfolded first header
        let unfolded = "from o1.email.example.net (o1.email.example.net [167.89.1.2]) by mx.audit with ESMTPS id 9; Wed, 15 Nov 2023 13:30:00 +0000";
        assert_eq!(
            received[0].split_whitespace().collect::<Vec<_>>().join(" "),
            unfolded
        );
        let r = parsed.record;
        assert_eq!(r.sender_ip, Some("167.89.1.2".parse().unwrap()));
        // trusted Received timestamp takes precedence over Date
        assert_eq!(
            r.received_utc.unwrap().to_rfc3339(),
            "2023-11-15T13:30:00+00:00"
        );
        assert_eq!((r.spf, r.dkim), (AuthResult::Pass, AuthResult::Pass));
        assert_eq!(r.subject, "Café deals");
        assert_eq!(parsed.recipients, vec!["ann012".to_string()]);
    }

    #[test]
    fn recipient_priority() {
        let raw = "Delivered-To: bob042@audit.example\r\n\
X-Original-To: carl043@audit.example\r\n\
To: Someone <list@example.com>\r\n\
Date: Tue, 14 Nov 2023 14:05:00 +0000\r\n\
From: a@b.com\r\n\r\nx";
        let p = parse_eml_full(raw.as_bytes(), &ParseOptions::default());
        assert_eq!(p.recipients, vec!["bob042", "carl043", "list"]);
    }

    #[test]
    fn multipart_prefers_plain_and_skips_attachments() {
        let raw = "Date: Tue, 14 Nov 2023 14:05:00 +0000\r\n\
From: a@b.com\r\n\
MIME-Version: 1.0\r\n\
Content-Type: multipart/mixed; boundary=\"XX\"\r\n\r\n\
--XX\r\n\
Content-Type: multipart/alternative; boundary=\"YY\"\r\n\r\n\
--YY\r\n\
Content-Type: text/plain; charset=utf-8\r\n\
Content-Transfer-Encoding: quoted-printable\r\n\r\n\
Save 30% =E2=80=94 today\r\n\
--YY\r\n\
Content-Type: text/html\r\n\r\n\
<p>ignored</p>\r\n\
--YY--\r\n\
--XX\r\n\
Content-Type: text/plain\r\n\
Content-Disposition: attachment; filename=x.txt\r\n\r\n\
attachment text\r\n\
--XX--\r\n";
        let r = parse_eml(raw.as_bytes(), &ParseOptions::default());
        assert_eq!(r.body_text, "Save 30% \u{2014} today");
    }

    #[test]
    fn html_only_body_is_stripped() {
        let raw = "Date: Tue, 14 Nov 2023 14:05:00 +0000\r\n\
From: a@b.com\r\n\
Content-Type: text/html\r\n\r\n\
<html><head><style>p{color:red}</style></head><body><p>Hello&nbsp;<b>world</b> &amp; co</p><!-- hidden --><script>x()</script></body></html>";
        let r = parse_eml(raw.as_bytes(), &ParseOptions::default());
        assert_eq!(r.body_text, "Hello world & co");
    }

    #[test]
    fn missing_message_id_uses_hash() {
        let raw = "Date: Tue, 14 Nov 2023 14:05:00 +0000\r\nFrom: a@b.com\r\n\r\nx";
        let r = parse_eml(raw.as_bytes(), &ParseOptions::default());
        assert_eq!(r.parse_status, ParseStatus::Ok);
        assert!(r.message_id.starts_with("sha256:"));
    }

    #[test]
    fn missing_date_and_received_is_unparseable() {
        let raw = "From: a@b.com\r\nTo: ann001@x.org\r\n\r\nx";
        let p = parse_eml_full(raw.as_bytes(), &ParseOptions::default());
        assert_eq!(p.record.parse_status, ParseStatus::Unparseable);
        assert_eq!(p.recipients, vec!["ann001"]);
    }

    #[test]
    fn entity_decoding() {
        assert_eq!(
            decode_entities("a &lt;b&gt; &#65;&#x42; &bogus; & c"),
            "a <b> AB &bogus; & c"
        );
    }
}
