use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::alias::AliasRegistry;
use super::eml::{parse_eml_full, ParseOptions};
use super::record::{EmailRecord, ParseStatus};
use crate::error::{AuditError, Result};

/// `by_service` key holding records whose recipient matched no alias.
pub const UNMATCHED_BUCKET: &str = "<unmatched>";

/// Immutable, ordered corpus with per-service and per-root-domain indexes.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CorpusStore {
    records: Vec<EmailRecord>,
    by_service: BTreeMap<String, Vec<usize>>,
    by_root_domain: BTreeMap<String, Vec<usize>>,
}

impl CorpusStore {
    /// Builds a store, ordering records by `(received_utc, message_id)`.
    pub fn from_records(mut records: Vec<EmailRecord>) -> Self {
        records.sort_by(|a, b| {
            a.received_utc
                .cmp(&b.received_utc)
                .then_with(|| a.message_id.cmp(&b.message_id))
        });
        let mut by_service: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        let mut by_root_domain: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, r) in records.iter().enumerate() {
            let key = r.service_name().unwrap_or(UNMATCHED_BUCKET).to_string();
            by_service.entry(key).or_default().push(i);
            if !r.from_root_domain.is_empty() {
                by_root_domain
                    .entry(r.from_root_domain.clone())
                    .or_default()
                    .push(i);
            }
        }
        CorpusStore {
            records,
            by_service,
            by_root_domain,
        }
    }

    pub fn records(&self) -> &[EmailRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn by_service(&self) -> &BTreeMap<String, Vec<usize>> {
        &self.by_service
    }

    pub fn by_root_domain(&self) -> &BTreeMap<String, Vec<usize>> {
        &self.by_root_domain
    }

    /// Service names with at least one record, excluding the unmatched bucket.
    pub fn services(&self) -> impl Iterator<Item = &str> {
        self.by_service
            .keys()
            .map(String::as_str)
            .filter(|k| *k != UNMATCHED_BUCKET)
    }

    pub fn service_records<'a>(
        &'a self,
        service: &str,
    ) -> impl Iterator<Item = &'a EmailRecord> + 'a {
        self.by_service
            .get(service)
            .into_iter()
            .flatten()
            .map(move |&i| &self.records[i])
    }

    pub fn unmatched_count(&self) -> usize {
        self.by_service.get(UNMATCHED_BUCKET).map_or(0, Vec::len)
    }

    pub fn write_jsonl(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = fs::File::create(path).map_err(|e| AuditError::io(path, e))?;
        let mut out = BufWriter::new(file);
        for r in &self.records {
            serde_json::to_writer(&mut out, r)?;
            out.write_all(b"\n").map_err(|e| AuditError::io(path, e))?;
        }
        out.flush().map_err(|e| AuditError::io(path, e))
    }

    pub fn read_jsonl(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = fs::File::open(path).map_err(|e| AuditError::io(path, e))?;
        let mut records = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| AuditError::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let r = serde_json::from_str(&line)
                .map_err(|e| AuditError::parse(path.display(), i + 1, e.to_string()))?;
            records.push(r);
        }
        Ok(Self::from_records(records))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub files: usize,
    pub ok: usize,
    pub unparseable: usize,
    pub unmatched: usize,
    pub duplicate_message_ids: usize,
    pub services: usize,
    pub root_domains: usize,
}

fn collect_eml_files(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let entries = fs::read_dir(dir).map_err(|e| AuditError::io(dir, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| AuditError::io(dir, e))?;
        let path = entry.path();
        let ft = entry.file_type().map_err(|e| AuditError::io(&path, e))?;
        if ft.is_dir() {
            collect_eml_files(&path, out)?;
        } else if path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("eml"))
        {
            out.push(path);
        }
    }
    Ok(())
}

/// Parses every `.eml` file under `dir` (recursively) and binds each message
/// to the service owning its recipient alias.
pub fn ingest_corpus(
    dir: impl AsRef<Path>,
    registry: &AliasRegistry,
    opts: &ParseOptions,
) -> Result<(CorpusStore, IngestReport)> {
    let dir = dir.as_ref();
    let mut paths = Vec::new();
    collect_eml_files(dir, &mut paths)?;
    paths.sort();
    let blobs = paths
        .par_iter()
        .map(|p| fs::read(p).map_err(|e| AuditError::io(p, e)))
        .collect::<Result<Vec<_>>>()?;
    if blobs.is_empty() {
        log::warn!("no .eml files found under {}", dir.display());
    }
    Ok(ingest_files(&blobs, registry, opts))
}

/// Ingests raw messages in the given order; on duplicate message ids the
/// first occurrence wins.
pub fn ingest_files<B: AsRef<[u8]> + Sync>(
    blobs: &[B],
    registry: &AliasRegistry,
    opts: &ParseOptions,
) -> (CorpusStore, IngestReport) {
    let parsed: Vec<_> = blobs
        .par_iter()
        .map(|b| parse_eml_full(b.as_ref(), opts))
        .collect();

    let mut report = IngestReport {
        files: blobs.len(),
        ..IngestReport::default()
    };
    let mut seen = HashSet::new();
    let mut records = Vec::with_capacity(parsed.len());
    for p in parsed {
        let mut record = p.record;
        if !seen.insert(record.message_id.clone()) {
            report.duplicate_message_ids += 1;
            continue;
        }
        record.alias = p
            .recipients
            .iter()
            .find_map(|local| registry.by_local_part(local))
            .cloned();
        match record.parse_status {
            ParseStatus::Ok => report.ok += 1,
            ParseStatus::Unparseable => report.unparseable += 1,
        }
        if record.alias.is_none() {
            report.unmatched += 1;
        }
        records.push(record);
    }
    let store = CorpusStore::from_records(records);
    report.services = store.services().count();
    report.root_domains = store.by_root_domain().len();
    (store, report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::alias::{AliasEntry, ServiceKind};
    use chrono::NaiveDate;

    fn registry() -> AliasRegistry {
        let e = |lp: &str, i: u16, name: &str| AliasEntry {
            local_part: lp.into(),
            index: i,
            service_name: name.into(),
            service_kind: ServiceKind::for_index(i).unwrap(),
            registration_date: NaiveDate::from_ymd_opt(2023, 9, 1).unwrap(),
        };
        AliasRegistry::from_entries(vec![
            e("ann001", 1, "BestBuy"),
            e("bob002", 2, "Target"),
            e("cat103", 103, "Temu"),
        ])
        .unwrap()
    }

    fn eml(to: &str, from: &str, day: u32, id: &str) -> String {
        format!(
            "Date: Tue, {day} Nov 2023 14:05:00 +0000\r\nFrom: {from}\r\nTo: {to}@audit.example\r\nMessage-ID: <{id}>\r\nSubject: s\r\n\r\nbody\r\n"
        )
    }

    #[test]
    fn ten_messages_three_services() {
        let msgs = [
            eml("ann001", "news@bestbuy.com", 1, "m1"),
            eml("ann001", "news@bestbuy.com", 2, "m2"),
            eml("ann001", "deals@em.bestbuy.com", 3, "m3"),
            eml("ann001", "news@bestbuy.com", 4, "m4"),
            eml("bob002", "t@target.com", 1, "m5"),
            eml("bob002", "t@target.com", 2, "m6"),
            eml("bob002", "t@target.com", 5, "m7"),
            eml("cat103", "p@temuemail.com", 6, "m8"),
            eml("cat103", "p@temu.com", 7, "m9"),
            eml("CAT103", "p@temuemail.com", 8, "m10"),
        ];
        let (store, report) = ingest_files(&msgs, &registry(), &ParseOptions::default());
        assert_eq!(report.ok, 10);
        assert_eq!(report.unmatched, 0);
        assert_eq!(store.services().count(), 3);
        assert_eq!(store.service_records("BestBuy").count(), 4);
        assert_eq!(store.service_records("Target").count(), 3);
        assert_eq!(store.service_records("Temu").count(), 3);
        assert_eq!(store.by_root_domain().len(), 4);
        assert_eq!(report.root_domains, 4);
    }

    #[test]
    fn unknown_alias_goes_to_unmatched() {
        let msgs = [eml("zed099", "x@y.com", 1, "u1")];
        let (store, report) = ingest_files(&msgs, &registry(), &ParseOptions::default());
        assert_eq!(report.unmatched, 1);
        assert_eq!(store.unmatched_count(), 1);
        assert_eq!(
            store.by_service().keys().collect::<Vec<_>>(),
            vec![UNMATCHED_BUCKET]
        );
    }

    #[test]
    fn duplicate_message_id_keeps_first() {
        let msgs = [
            eml("ann001", "a@bestbuy.com", 1, "same"),
            eml("bob002", "b@target.com", 2, "same"),
        ];
        let (store, report) = ingest_files(&msgs, &registry(), &ParseOptions::default());
        assert_eq!(report.duplicate_message_ids, 1);
        assert_eq!(store.len(), 1);
        assert_eq!(store.records()[0].service_name(), Some("BestBuy"));
    }

    #[test]
    fn unparseable_counts_toward_volume() {
        let msgs: Vec<Vec<u8>> = vec![
            eml("ann001", "a@bestbuy.com", 1, "x").into_bytes(),
            vec![0xff, 0x00, 0x13, 0x37],
        ];
        let (store, report) = ingest_files(&msgs, &registry(), &ParseOptions::default());
        assert_eq!((report.ok, report.unparseable), (1, 1));
        assert_eq!(store.len(), 2);
        let total: usize = store.by_service().values().map(Vec::len).sum();
        assert_eq!(total, store.len());
    }

    #[test]
    fn directory_ingest_and_jsonl_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        fs::create_dir(dir.path().join("sub")).unwrap();
        fs::write(
            dir.path().join("a.eml"),
            eml("ann001", "a@bestbuy.com", 1, "a"),
        )
        .unwrap();
        fs::write(
            dir.path().join("sub/b.EML"),
            eml("bob002", "b@target.com", 2, "b"),
        )
        .unwrap();
        fs::write(dir.path().join("notes.txt"), "ignored").unwrap();
        let (store, report) =
            ingest_corpus(dir.path(), &registry(), &ParseOptions::default()).unwrap();
        assert_eq!(report.files, 2);
        let out = dir.path().join("corpus.jsonl");
        store.write_jsonl(&out).unwrap();
        let back = CorpusStore::read_jsonl(&out).unwrap();
        assert_eq!(back, store);
    }

    #[test]
    fn missing_directory_is_io_error() {
        let err =
            ingest_corpus("/nonexistent/dir/x", &registry(), &ParseOptions::default()).unwrap_err();
        assert!(matches!(err, AuditError::Io { .. }));
    }
}
