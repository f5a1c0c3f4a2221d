use std::collections::HashMap;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{AuditError, Result};

/// Highest alias index; 0–99 are online services and 100–149 mobile apps.
pub const MAX_ALIAS_INDEX: u16 = 149;
const FIRST_APP_INDEX: u16 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ServiceKind {
    OnlineService,
    MobileApp,
}

impl ServiceKind {
    pub fn for_index(index: u16) -> Option<Self> {
        match index {
            0..FIRST_APP_INDEX => Some(ServiceKind::OnlineService),
            FIRST_APP_INDEX..=MAX_ALIAS_INDEX => Some(ServiceKind::MobileApp),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AliasEntry {
    pub local_part: String,
    pub index: u16,
    pub service_name: String,
    pub service_kind: ServiceKind,
    pub registration_date: NaiveDate,
}

/// Builds `<name_seed><index as 3 digits>@<domain>`.
pub fn generate_alias(name_seed: &str, index: u16, domain: &str) -> Result<String> {
    if index > MAX_ALIAS_INDEX {
        return Err(AuditError::Range {
            what: "alias index",
            value: index.to_string(),
        });
    }
    if name_seed.is_empty() || !name_seed.bytes().all(|b| b.is_ascii_lowercase()) {
        return Err(AuditError::Format(format!(
            "alias name seed must be nonempty lowercase letters, got {name_seed:?}"
        )));
    }
    if domain.is_empty() {
        return Err(AuditError::Format("alias domain is empty".into()));
    }
    Ok(format!("{name_seed}{index:03}@{domain}"))
}

/// Splits an alias local part into its name and index, if it follows the
/// `<letters><3 digits>` scheme.
pub fn split_local_part(local_part: &str) -> Option<(&str, u16)> {
    if local_part.len() < 4 || !local_part.is_ascii() {
        return None;
    }
    let (name, digits) = local_part.split_at(local_part.len() - 3);
    if name.is_empty() || !name.bytes().all(|b| b.is_ascii_alphabetic()) {
        return None;
    }
    if !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok().map(|i| (name, i))
}

#[derive(Debug, Clone, Default)]
pub struct AliasRegistry {
    entries: Vec<AliasEntry>,
    by_local_part: HashMap<String, usize>,
}

#[derive(Debug, Deserialize)]
struct RegistryRow {
    local_part: String,
    index: String,
    service_name: String,
    service_kind: String,
    registration_date: String,
}

impl AliasRegistry {
    pub fn from_entries(entries: Vec<AliasEntry>) -> Result<Self> {
        let mut registry = AliasRegistry::default();
        for entry in entries {
            registry.insert(entry)?;
        }
        registry.entries.sort_by_key(|e| e.index);
        registry.reindex();
        Ok(registry)
    }

    fn insert(&mut self, entry: AliasEntry) -> Result<()> {
        validate_entry(&entry)?;
        if self.entries.iter().any(|e| e.index == entry.index) {
            return Err(AuditError::Integrity(format!(
                "duplicate alias index {:03}",
                entry.index
            )));
        }
        let key = entry.local_part.to_ascii_lowercase();
        if self.by_local_part.contains_key(&key) {
            return Err(AuditError::Integrity(format!(
                "duplicate alias local part {}",
                entry.local_part
            )));
        }
        self.by_local_part.insert(key, self.entries.len());
        self.entries.push(entry);
        Ok(())
    }

    fn reindex(&mut self) {
        self.by_local_part = self
            .entries
            .iter()
            .enumerate()
            .map(|(i, e)| (e.local_part.to_ascii_lowercase(), i))
            .collect();
    }

    pub fn from_reader<R: Read>(reader: R, source: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(reader);
        let mut entries = Vec::new();
        for (i, row) in rdr.deserialize::<RegistryRow>().enumerate() {
            // header is line 1
            let line = i + 2;
            let row = row.map_err(|e| AuditError::parse(source, line, e.to_string()))?;
            entries.push(parse_row(row).map_err(|m| AuditError::parse(source, line, m))?);
        }
        if entries.is_empty() {
            log::warn!("alias registry {source} is empty");
        }
        Self::from_entries(entries)
    }

    pub fn entries(&self) -> &[AliasEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn by_local_part(&self, local_part: &str) -> Option<&AliasEntry> {
        self.by_local_part
            .get(&local_part.to_ascii_lowercase())
            .map(|&i| &self.entries[i])
    }

    pub fn by_index(&self, index: u16) -> Option<&AliasEntry> {
        self.entries
            .binary_search_by_key(&index, |e| e.index)
            .ok()
            .map(|i| &self.entries[i])
    }

    pub fn by_service(&self, service_name: &str) -> Option<&AliasEntry> {
        self.entries.iter().find(|e| e.service_name == service_name)
    }
}

fn parse_row(row: RegistryRow) -> std::result::Result<AliasEntry, String> {
    let index: u16 = row
        .index
        .parse()
        .map_err(|_| format!("invalid index {:?}", row.index))?;
    let service_kind = match row.service_kind.to_ascii_lowercase().as_str() {
        "online_service" | "online" | "service" => ServiceKind::OnlineService,
        "mobile_app" | "app" => ServiceKind::MobileApp,
        other => return Err(format!("unknown service kind {other:?}")),
    };
    let registration_date = NaiveDate::parse_from_str(&row.registration_date, "%Y-%m-%d")
        .map_err(|e| format!("invalid registration date {:?}: {e}", row.registration_date))?;
    if row.service_name.is_empty() {
        return Err("empty service name".into());
    }
    Ok(AliasEntry {
        local_part: row.local_part,
        index,
        service_name: row.service_name,
        service_kind,
        registration_date,
    })
}

fn validate_entry(entry: &AliasEntry) -> Result<()> {
    let Some(expected_kind) = ServiceKind::for_index(entry.index) else {
        return Err(AuditError::Range {
            what: "alias index",
            value: entry.index.to_string(),
        });
    };
    if expected_kind != entry.service_kind {
        return Err(AuditError::Integrity(format!(
            "alias {} has index {:03} but kind {:?}",
            entry.local_part, entry.index, entry.service_kind
        )));
    }
    match split_local_part(&entry.local_part) {
        Some((_, i)) if i == entry.index => Ok(()),
        Some((_, i)) => Err(AuditError::Integrity(format!(
            "alias {} encodes index {i:03} but row says {:03}",
            entry.local_part, entry.index
        ))),
        None => Err(AuditError::Integrity(format!(
            "alias local part {:?} does not match <letters><3 digits>",
            entry.local_part
        ))),
    }
}

pub fn load_alias_registry(path: impl AsRef<Path>) -> Result<AliasRegistry> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| AuditError::io(path, e))?;
    AliasRegistry::from_reader(file, &path.display().to_string())
}
