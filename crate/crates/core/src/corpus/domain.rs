use crate::error::{AuditError, Result};

/// Registrable ("root") domain of an address's domain part.
///
/// Suffixes come from the public-suffix snapshot compiled into the `psl`
/// crate, pinned to an exact version. Domains whose suffix is unknown, or
/// that are themselves a bare suffix, fall back to their last two labels.
pub fn root_domain(address: &str) -> Result<String> {
    let (_, domain) = address
        .rsplit_once('@')
        .ok_or_else(|| AuditError::Format(format!("address without '@': {address:?}")))?;
    let domain = domain
        .trim()
        .trim_end_matches('>')
        .trim_end_matches('.')
        .to_ascii_lowercase();
    if domain.is_empty() {
        return Err(AuditError::Format(format!(
            "address without domain: {address:?}"
        )));
    }
    Ok(registrable(&domain))
}

pub(crate) fn registrable(domain: &str) -> String {
    if let Some(d) = psl::domain_str(domain) {
        return d.to_string();
    }
    last_two_labels(domain)
}

fn last_two_labels(domain: &str) -> String {
    let labels: Vec<&str> = domain.split('.').filter(|l| !l.is_empty()).collect();
    let start = labels.len().saturating_sub(2);
    labels[start..].join(".")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registrable_domains() {
        assert_eq!(root_domain("news@mail.bestbuy.com").unwrap(), "bestbuy.com");
        assert_eq!(root_domain("a@b.co.uk").unwrap(), "b.co.uk");
        assert_eq!(
            root_domain("promo@em.temuemail.com").unwrap(),
            "temuemail.com"
        );
        assert_eq!(root_domain("x@Mail.Plex.TV").unwrap(), "plex.tv");
        assert_eq!(root_domain("x@deep.sub.codepen.io").unwrap(), "codepen.io");
    }

    #[test]
    fn unknown_suffix_falls_back() {
        assert_eq!(
            root_domain("a@mx.corp.internalzzz").unwrap(),
            "corp.internalzzz"
        );
        assert_eq!(root_domain("a@co.uk").unwrap(), "co.uk");
    }

    #[test]
    fn missing_at_is_format_error() {
        assert!(matches!(
            root_domain("bestbuy.com"),
            Err(AuditError::Format(_))
        ));
        assert!(matches!(root_domain("a@"), Err(AuditError::Format(_))));
    }
}
