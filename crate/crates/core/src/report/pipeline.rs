use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{AuditConfig, ClassifierMode, Stage};
use crate::authlineage::{classify_provenance, OrgMap, ProvenanceContext};
use crate::classify::{
    classify_batch_external, classify_rule_based, Classification, ClassificationSummary,
    ClassifiedMessage, ContentLabel, HttpTransport, Transport,
};
use crate::cluster::{
    build_features, feature_names, loadings_report, pca_fit, select_k, standardize, LoadingsReport,
};
use crate::corpus::{ingest_corpus, load_alias_registry, CorpusStore, IngestReport, ParseOptions};
use crate::error::{AuditError, Result};
use crate::netintel::{
    asn_volume_concentration, build_sender_profiles, bundled_providers, flag_marketing_asn,
    ip_hopping_correlation, load_abuse_reports, load_ip2asn, load_provider_list, AbuseReports,
    AsnConcentration, AsnTable, HoppingCorrelation, TreemapNode,
};
use crate::stats::{
    chi_squared_independence, descriptive, kruskal_wallis, one_way_anova, pareto, ContingencyTable,
    Descriptive, MomentConvention, Pareto, TestResult,
};
use crate::temporal::{
    build_daily_series, decompose_additive, hour_day_matrix, spectrum, Scope, SpectrumPeak,
};

pub const CORPUS: &str = "corpus.jsonl";
pub const INGEST_REPORT: &str = "ingest_report.json";
pub const CLASSIFICATIONS: &str = "classifications.jsonl";
pub const CLASSIFICATION_SUMMARY: &str = "classification_summary.json";
pub const SUMMARY: &str = "summary.json";
pub const REPORT: &str = "report.md";

/// Files written by the analysis stage, besides `summary.json`.
pub const ANALYSIS_ARTIFACTS: [&str; 10] = [
    "pareto.csv",
    "spectrum.csv",
    "decomposition.csv",
    "heatmap.csv",
    "features.csv",
    "clusters.csv",
    "loadings.json",
    "sankey.json",
    "treemap.json",
    "sector_stats.json",
];

/// Share of ASNs treated as the head of the volume distribution.
pub const ASN_TOP_FRACTION: f64 = 0.2;
/// Below this many companies the correlation p-values get a caveat.
const SMALL_N: usize = 30;
const TOP_LOADINGS: usize = 5;

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| AuditError::io(dir, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| AuditError::io(path, e))?;
    let mut out = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n").map_err(|e| AuditError::io(path, e))?;
    out.flush().map_err(|e| AuditError::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| AuditError::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

fn write_csv(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush().map_err(|e| AuditError::io(path, e))
}

fn strings(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Parses `.eml` files and writes `corpus.jsonl` and `ingest_report.json`.
pub fn run_ingest(cfg: &AuditConfig) -> Result<IngestReport> {
    cfg.validate(Stage::Ingest)?;
    let registry = load_alias_registry(cfg.registry_path.as_ref().expect("validated"))?;
    let opts = ParseOptions {
        trusted_mx: cfg.trusted_mx.clone(),
        timezone: cfg.audit_timezone,
    };
    let (store, report) = ingest_corpus(
        cfg.corpus_dir.as_ref().expect("validated"),
        &registry,
        &opts,
    )?;
    create_dir(&cfg.output_dir)?;
    store.write_jsonl(cfg.output_dir.join(CORPUS))?;
    write_json(&cfg.output_dir.join(INGEST_REPORT), &report)?;
    Ok(report)
}

fn load_corpus(cfg: &AuditConfig) -> Result<CorpusStore> {
    let path = cfg.output_dir.join(CORPUS);
    if !path.exists() {
        return Err(AuditError::io(
            &path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "run ingest first"),
        ));
    }
    CorpusStore::read_jsonl(path)
}

fn classify_store(
    store: &CorpusStore,
    cfg: &AuditConfig,
    transport: Option<&dyn Transport>,
) -> BTreeMap<String, Classification> {
    let ok: Vec<_> = store.records().iter().filter(|r| r.is_ok()).collect();
    match cfg.classifier {
        ClassifierMode::Rules => ok
            .iter()
            .map(|r| (r.message_id.clone(), classify_rule_based(r)))
            .collect(),
        ClassifierMode::External => {
            let http;
            let transport = match transport {
                Some(t) => t,
                None => {
                    http = HttpTransport::new(cfg.adapter.timeout);
                    &http
                }
            };
            classify_batch_external(&ok, &cfg.adapter, transport)
                .into_iter()
                .collect()
        }
    }
}

/// Labels every parseable message and writes `classifications.jsonl` plus
/// the distribution summary. `transport` overrides the HTTP client used in
/// external mode.
pub fn run_classify(
    cfg: &AuditConfig,
    transport: Option<&dyn Transport>,
) -> Result<ClassificationSummary> {
    cfg.validate(Stage::Classify)?;
    let store = load_corpus(cfg)?;
    let labels = classify_store(&store, cfg, transport);
    let path = cfg.output_dir.join(CLASSIFICATIONS);
    let file = fs::File::create(&path).map_err(|e| AuditError::io(&path, e))?;
    let mut out = BufWriter::new(file);
    for (id, c) in &labels {
        let line = ClassifiedMessage {
            message_id: id.clone(),
            classification: c.clone(),
        };
        serde_json::to_writer(&mut out, &line)?;
        out.write_all(b"\n").map_err(|e| AuditError::io(&path, e))?;
    }
    out.flush().map_err(|e| AuditError::io(&path, e))?;
    let unparseable = store.records().iter().filter(|r| !r.is_ok()).count();
    let summary = ClassificationSummary::tally(&labels, unparseable);
    if summary.fallbacks > 0 {
        log::warn!(
            "{} message(s) fell back to the rule classifier",
            summary.fallbacks
        );
    }
    write_json(&cfg.output_dir.join(CLASSIFICATION_SUMMARY), &summary)?;
    Ok(summary)
}

pub fn read_classifications(path: impl AsRef<Path>) -> Result<BTreeMap<String, Classification>> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| AuditError::io(path, e))?;
    let mut out = BTreeMap::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| AuditError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let m: ClassifiedMessage = serde_json::from_str(&line)
            .map_err(|e| AuditError::parse(path.display(), i + 1, e.to_string()))?;
        out.insert(m.message_id, m.classification);
    }
    Ok(out)
}

/// `service_name,sector` rows.
pub fn load_sectors(path: impl AsRef<Path>) -> Result<BTreeMap<String, String>> {
    let path = path.as_ref();
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)?;
    let mut out = BTreeMap::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row.map_err(|e| AuditError::parse(path.display(), i + 2, e.to_string()))?;
        if row.len() < 2 || row[0].is_empty() || row[1].is_empty() {
            return Err(AuditError::parse(
                path.display(),
                i + 2,
                "expected service_name,sector",
            ));
        }
        out.insert(row[0].to_string(), row[1].to_string());
    }
    Ok(out)
}

/// A section result or the reason it could not be computed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome<T> {
    pub result: Option<T>,
    pub error: Option<String>,
}

impl<T> Outcome<T> {
    fn of(r: Result<T>, section: &str, warnings: &mut Vec<String>) -> Self {
        match r {
            Ok(v) => Outcome {
                result: Some(v),
                error: None,
            },
            Err(e) => {
                warnings.push(format!("{section}: {e}"));
                Outcome {
                    result: None,
                    error: Some(e.to_string()),
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectorStats {
    pub moment_convention: MomentConvention,
    /// Moments of per-root-domain email totals.
    pub domain_totals: Outcome<Descriptive>,
    pub pareto: Outcome<Pareto>,
    pub top10_share: Option<f64>,
    /// Sector × content type over classified messages.
    pub contingency: Option<ContingencyTable>,
    pub chi_squared: Outcome<TestResult>,
    /// Per-service totals grouped by sector.
    pub anova: Outcome<TestResult>,
    pub kruskal_wallis: Outcome<TestResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuthSummary {
    pub parsed: usize,
    pub spf_pass: usize,
    pub dkim_pass: usize,
    pub either_pass: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringSummary {
    pub companies: usize,
    pub pca_components: usize,
    pub explained_variance_ratio: Vec<f64>,
    pub k: usize,
    pub silhouette: f64,
    pub inertia: f64,
    pub silhouette_by_k: Vec<(usize, f64)>,
    pub k_range_clamped: bool,
    pub labels: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisSummary {
    pub seed: u64,
    pub timezone: String,
    pub messages: usize,
    pub services: usize,
    /// Messages per root domain and per bound service; the two divisors
    /// differ when a service mails from several domains.
    pub mean_per_root_domain: Option<f64>,
    pub mean_per_service: Option<f64>,
    pub unmatched: usize,
    pub unparseable: usize,
    pub auth: AuthSummary,
    /// `provenance/spam` → message count over service-bound messages.
    pub provenance: BTreeMap<String, usize>,
    pub needs_review: usize,
    pub operator_unknown: usize,
    pub classification: ClassificationSummary,
    pub asn_concentration: Outcome<AsnConcentration>,
    pub ip_hopping: Outcome<HoppingCorrelation>,
    pub spectrum_peaks: Vec<SpectrumPeak>,
    pub seasonal_variance_share: Option<f64>,
    pub clustering: Option<ClusteringSummary>,
    pub warnings: Vec<String>,
}

#[derive(Serialize)]
struct LoadingsFile<'a> {
    feature_names: Vec<String>,
    pca_components: usize,
    explained_variance_ratio: &'a [f64],
    components: &'a [Vec<f64>],
    k: usize,
    silhouette: f64,
    report: &'a LoadingsReport,
}

#[derive(Serialize)]
struct TreemapFile<'a> {
    name: &'static str,
    value: u64,
    children: &'a [TreemapNode],
}

fn load_inputs(
    cfg: &AuditConfig,
    warnings: &mut Vec<String>,
) -> Result<(AsnTable, AbuseReports, Vec<String>, ProvenanceContext)> {
    let table = match &cfg.ip2asn_path {
        Some(p) => load_ip2asn(p)?,
        None => {
            warnings.push("ip2asn not set: every public sender IP is unrouted".into());
            AsnTable::default()
        }
    };
    let abuse = match &cfg.abuse_path {
        Some(p) => load_abuse_reports(p)?,
        None => AbuseReports::new(),
    };
    let providers = match &cfg.provider_list {
        Some(p) => load_provider_list(p)?,
        None => bundled_providers(),
    };
    let mut ctx = ProvenanceContext::default();
    if let Some(p) = &cfg.org_map_path {
        ctx.org_map.merge(OrgMap::load(p)?);
    }
    Ok((table, abuse, providers, ctx))
}

/// Runs every analysis over the ingested corpus and writes the artifact set
/// plus `summary.json`. Sections that cannot be computed on this corpus are
/// written empty and listed under `warnings`.
pub fn run_analyze(cfg: &AuditConfig) -> Result<AnalysisSummary> {
    cfg.validate(Stage::Analyze)?;
    let store = load_corpus(cfg)?;
    let mut warnings = Vec::new();
    let (table, abuse, providers, ctx) = load_inputs(cfg, &mut warnings)?;
    let sectors = match &cfg.sectors_path {
        Some(p) => load_sectors(p)?,
        None => BTreeMap::new(),
    };
    let cls_path = cfg.output_dir.join(CLASSIFICATIONS);
    let labels = if cls_path.exists() {
        read_classifications(&cls_path)?
    } else {
        warnings.push("no classifications found: using the rule classifier".into());
        let rules = AuditConfig {
            classifier: ClassifierMode::Rules,
            ..cfg.clone()
        };
        classify_store(&store, &rules, None)
    };
    let out = &cfg.output_dir;
    let tz = cfg.audit_timezone;

    // authentication and provenance
    let mut auth = AuthSummary {
        parsed: 0,
        spf_pass: 0,
        dkim_pass: 0,
        either_pass: 0,
    };
    let mut provenance: BTreeMap<String, usize> = BTreeMap::new();
    let (mut needs_review, mut operator_unknown) = (0, 0);
    for r in store.records().iter().filter(|r| r.is_ok()) {
        use crate::authlineage::AuthResult::Pass;
        auth.parsed += 1;
        auth.spf_pass += usize::from(r.spf == Pass);
        auth.dkim_pass += usize::from(r.dkim == Pass);
        auth.either_pass += usize::from(r.spf == Pass || r.dkim == Pass);
        if r.alias.is_none() {
            continue;
        }
        let asn = table.lookup(r.sender_ip).record();
        let marketing = asn.is_some_and(|a| flag_marketing_asn(a, &providers));
        let content = labels.get(&r.message_id).map(|c| c.label);
        let l = classify_provenance(r, &ctx, asn, marketing, content);
        let key = format!(
            "{}/{}",
            serde_json::to_value(l.provenance)?.as_str().unwrap_or(""),
            serde_json::to_value(l.spam)?.as_str().unwrap_or("")
        );
        *provenance.entry(key).or_default() += 1;
        needs_review += usize::from(l.needs_review);
        operator_unknown += usize::from(l.operator_unknown);
    }

    // pareto over root domains
    let domain_counts: Vec<(String, f64)> = store
        .by_root_domain()
        .iter()
        .map(|(d, ix)| (d.clone(), ix.len() as f64))
        .collect();
    let pareto_out = Outcome::of(pareto(&domain_counts), "pareto", &mut warnings);
    let pareto_rows: Vec<Vec<String>> = pareto_out
        .result
        .iter()
        .flat_map(|p| &p.entries)
        .enumerate()
        .map(|(i, e)| {
            vec![
                (i + 1).to_string(),
                e.name.clone(),
                e.value.to_string(),
                e.share.to_string(),
                e.cumulative.to_string(),
            ]
        })
        .collect();
    write_csv(
        &out.join("pareto.csv"),
        &strings(&["rank", "root_domain", "emails", "share", "cumulative"]),
        &pareto_rows,
    )?;

    // temporal
    let series = Outcome::of(
        build_daily_series(&store, &Scope::All, tz),
        "daily series",
        &mut warnings,
    );
    let spec = series
        .result
        .as_ref()
        .map(|s| spectrum(s, cfg.sigma_multiplier));
    let spec = match spec {
        Some(r) => Outcome::of(r, "spectrum", &mut warnings).result,
        None => None,
    };
    let spec_rows: Vec<Vec<String>> = spec
        .iter()
        .flat_map(|s| &s.bins)
        .map(|b| {
            vec![
                b.frequency.to_string(),
                b.magnitude.to_string(),
                b.period_days.to_string(),
                b.is_peak.to_string(),
            ]
        })
        .collect();
    write_csv(
        &out.join("spectrum.csv"),
        &strings(&["frequency", "magnitude", "period_days", "is_peak"]),
        &spec_rows,
    )?;
    let decomp = match &series.result {
        Some(s) => {
            Outcome::of(
                decompose_additive(s, cfg.season_period),
                "decomposition",
                &mut warnings,
            )
            .result
        }
        None => None,
    };
    let mut dec_rows = Vec::new();
    if let (Some(s), Some(d)) = (&series.result, &decomp) {
        for (i, v) in s.values.iter().enumerate() {
            dec_rows.push(vec![
                (s.day0 + chrono::Days::new(i as u64)).to_string(),
                v.to_string(),
                opt(d.trend[i]),
                d.seasonal[i].to_string(),
                opt(d.residual[i]),
            ]);
        }
    }
    write_csv(
        &out.join("decomposition.csv"),
        &strings(&["day", "observed", "trend", "seasonal", "residual"]),
        &dec_rows,
    )?;
    const DOW: [&str; 7] = ["mon", "tue", "wed", "thu", "fri", "sat", "sun"];
    let heat = hour_day_matrix(&store, &Scope::All, tz);
    let heat_rows: Vec<Vec<String>> = (0..7)
        .flat_map(|d| (0..24).map(move |h| (d, h)))
        .map(|(d, h)| vec![DOW[d].to_string(), h.to_string(), heat[d][h].to_string()])
        .collect();
    write_csv(
        &out.join("heatmap.csv"),
        &strings(&["dow", "hour", "count"]),
        &heat_rows,
    )?;

    // sender network
    let network = build_sender_profiles(&store, &table, &abuse, &providers);
    write_json(&out.join("sankey.json"), &network.sankey)?;
    write_json(
        &out.join("treemap.json"),
        &TreemapFile {
            name: "spam_reports",
            value: network.treemap.iter().map(|n| n.value).sum(),
            children: &network.treemap,
        },
    )?;
    let asn_concentration = Outcome::of(
        asn_volume_concentration(&network.sankey, ASN_TOP_FRACTION),
        "asn concentration",
        &mut warnings,
    );
    let ip_hopping = Outcome::of(
        ip_hopping_correlation(&network.profiles),
        "ip hopping",
        &mut warnings,
    );

    // clustering
    let names = feature_names();
    let mut features_rows = Vec::new();
    let mut cluster_rows = Vec::new();
    let mut clustering = None;
    let mut loadings_written = false;
    match build_features(&store, &network.profiles, &labels, tz) {
        Ok(fm) => {
            let raw = fm.rows();
            for (c, row) in fm.companies.iter().zip(&raw) {
                let mut line = vec![c.clone()];
                line.extend(row.iter().map(f64::to_string));
                features_rows.push(line);
            }
            let fitted = standardize(&raw).and_then(|z| {
                let pca = pca_fit(&z.data, cfg.pca)?;
                let scores = pca.transform(&z.data);
                let sel = select_k(&scores, cfg.k_min, cfg.k_max, cfg.seed)?;
                let rep = loadings_report(&pca, &sel.model, &z.data, &names, TOP_LOADINGS)?;
                Ok((pca, scores, sel, rep))
            });
            match fitted {
                Ok((pca, scores, sel, rep)) => {
                    if sel.clamped {
                        warnings.push(format!(
                            "k range {}..={} clamped to {}..={} for {} companies",
                            cfg.k_min,
                            cfg.k_max,
                            cfg.k_min,
                            sel.model.scores.last().map_or(0, |s| s.0),
                            fm.companies.len()
                        ));
                    }
                    for ((c, s), l) in fm.companies.iter().zip(&scores).zip(&sel.model.labels) {
                        cluster_rows.push(vec![
                            c.clone(),
                            l.to_string(),
                            s[0].to_string(),
                            opt(s.get(1).copied()),
                        ]);
                    }
                    write_json(
                        &out.join("loadings.json"),
                        &LoadingsFile {
                            feature_names: names.clone(),
                            pca_components: pca.n_components(),
                            explained_variance_ratio: &pca.explained_variance_ratio,
                            components: &pca.components,
                            k: sel.model.k,
                            silhouette: sel.model.silhouette,
                            report: &rep,
                        },
                    )?;
                    loadings_written = true;
                    clustering = Some(ClusteringSummary {
                        companies: fm.companies.len(),
                        pca_components: pca.n_components(),
                        explained_variance_ratio: pca.explained_variance_ratio.clone(),
                        k: sel.model.k,
                        silhouette: sel.model.silhouette,
                        inertia: sel.model.inertia,
                        silhouette_by_k: sel.model.scores.clone(),
                        k_range_clamped: sel.clamped,
                        labels: sel.model.label_map(&fm.companies)?,
                    });
                }
                Err(e) => warnings.push(format!("clustering: {e}")),
            }
        }
        Err(e) => warnings.push(format!("features: {e}")),
    }
    let mut header = vec!["company".to_string()];
    header.extend(names.iter().cloned());
    write_csv(&out.join("features.csv"), &header, &features_rows)?;
    write_csv(
        &out.join("clusters.csv"),
        &strings(&["company", "cluster", "pc1", "pc2"]),
        &cluster_rows,
    )?;
    if !loadings_written {
        write_json(
            &out.join("loadings.json"),
            &serde_json::json!({ "report": null }),
        )?;
    }

    // cross-sector statistics
    let domain_totals: Vec<f64> = domain_counts.iter().map(|d| d.1).collect();
    let sector_stats = sector_statistics(
        &store,
        &labels,
        &sectors,
        &domain_totals,
        pareto_out,
        cfg.moment_convention,
        &mut warnings,
    );
    write_json(&out.join("sector_stats.json"), &sector_stats)?;

    if let Some(s) = &spec {
        let days = series.result.as_ref().map_or(0, |x| x.len());
        for p in s.peaks.iter().filter(|p| p.period_days * 3.0 > days as f64) {
            warnings.push(format!(
                "spectrum: the {:.1}-day peak completes fewer than 3 cycles in {days} days; its period is poorly resolved",
                p.period_days
            ));
        }
    }
    if let Some(h) = &ip_hopping.result {
        if h.companies < SMALL_N {
            warnings.push(format!(
                "ip hopping: n = {} companies; correlation p-values use the t approximation and are rough at this size",
                h.companies
            ));
        }
    }

    let unparseable = store.records().iter().filter(|r| !r.is_ok()).count();
    let bound: usize = store
        .services()
        .map(|s| store.service_records(s).count())
        .sum();
    let n_services = store.services().count();
    let summary = AnalysisSummary {
        seed: cfg.seed,
        timezone: tz.name().to_string(),
        messages: store.len(),
        services: n_services,
        mean_per_root_domain: (!domain_totals.is_empty())
            .then(|| domain_totals.iter().sum::<f64>() / domain_totals.len() as f64),
        mean_per_service: (n_services > 0).then(|| bound as f64 / n_services as f64),
        unmatched: store.unmatched_count(),
        unparseable,
        auth,
        provenance,
        needs_review,
        operator_unknown,
        classification: ClassificationSummary::tally(&labels, unparseable),
        asn_concentration,
        ip_hopping,
        spectrum_peaks: spec.map(|s| s.peaks).unwrap_or_default(),
        seasonal_variance_share: decomp.map(|d| d.seasonal_variance_share),
        clustering,
        warnings,
    };
    for w in &summary.warnings {
        log::warn!("{w}");
    }
    write_json(&out.join(SUMMARY), &summary)?;
    Ok(summary)
}

fn sector_statistics(
    store: &CorpusStore,
    labels: &BTreeMap<String, Classification>,
    sectors: &BTreeMap<String, String>,
    domain_totals: &[f64],
    pareto_out: Outcome<Pareto>,
    convention: MomentConvention,
    warnings: &mut Vec<String>,
) -> SectorStats {
    let domain_moments = Outcome::of(
        descriptive(domain_totals, convention),
        "domain moments",
        warnings,
    );
    let top10_share = pareto_out.result.as_ref().map(|p| p.top_k_share(10));

    let mut counts: BTreeMap<&str, [u64; 3]> = BTreeMap::new();
    let mut totals: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for service in store.services() {
        let Some(sector) = sectors.get(service) else {
            continue;
        };
        let mut n = 0.0;
        for r in store.service_records(service) {
            n += 1.0;
            if let Some(c) = labels.get(&r.message_id) {
                let i = ContentLabel::ALL
                    .iter()
                    .position(|&l| l == c.label)
                    .expect("label");
                counts.entry(sector).or_default()[i] += 1;
            }
        }
        totals.entry(sector).or_default().push(n);
    }
    let no_sectors = || {
        Err(AuditError::InsufficientData(
            "no services with a sector".into(),
        ))
    };
    let contingency = if counts.is_empty() {
        None
    } else {
        ContingencyTable::new(
            counts.keys().map(|s| s.to_string()).collect(),
            ContentLabel::ALL.iter().map(|l| l.to_string()).collect(),
            counts.values().map(|c| c.to_vec()).collect(),
        )
        .ok()
    };
    let chi = match &contingency {
        Some(t) => chi_squared_independence(t),
        None => no_sectors(),
    };
    let groups: Vec<Vec<f64>> = totals.into_values().collect();
    let (anova, kw) = if groups.is_empty() {
        (no_sectors(), no_sectors())
    } else {
        (one_way_anova(&groups), kruskal_wallis(&groups))
    };
    SectorStats {
        moment_convention: convention,
        domain_totals: domain_moments,
        pareto: pareto_out,
        top10_share,
        contingency,
        chi_squared: Outcome::of(chi, "chi-squared", warnings),
        anova: Outcome::of(anova, "anova", warnings),
        kruskal_wallis: Outcome::of(kw, "kruskal-wallis", warnings),
    }
}

fn fmt_test(t: &Outcome<TestResult>) -> String {
    match (&t.result, &t.error) {
        (Some(r), _) => format!(
            "statistic {}, df {}, p {:.4e}",
            if r.statistic.is_finite() {
                format!("{:.4}", r.statistic)
            } else {
                "inf".into()
            },
            serde_json::to_string(&r.df).unwrap_or_default(),
            r.p_value
        ),
        (None, Some(e)) => format!("not computed ({e})"),
        (None, None) => "not computed".into(),
    }
}

/// Renders a Markdown digest of an analysis run from its artifacts.
pub fn render_report(out_dir: &Path) -> Result<String> {
    let s: AnalysisSummary = read_json(&out_dir.join(SUMMARY))?;
    let st: SectorStats = read_json(&out_dir.join("sector_stats.json"))?;
    let pct = |a: usize, b: usize| {
        if b == 0 {
            0.0
        } else {
            100.0 * a as f64 / b as f64
        }
    };
    let mut md = String::new();
    let mut p = |line: String| {
        md.push_str(&line);
        md.push('\n');
    };
    p("# Inbox audit report".into());
    p(String::new());
    p(format!(
        "{} messages from {} services ({} unmatched, {} unparseable). Seed {}, timezone {}.",
        s.messages, s.services, s.unmatched, s.unparseable, s.seed, s.timezone
    ));
    if let (Some(d), Some(v)) = (s.mean_per_root_domain, s.mean_per_service) {
        p(format!(
            "Mean {d:.1} emails per root domain, {v:.1} per service."
        ));
    }
    p(String::new());
    p("## Authentication".into());
    p(format!(
        "- SPF pass: {:.2}%",
        pct(s.auth.spf_pass, s.auth.parsed)
    ));
    p(format!(
        "- DKIM pass: {:.2}%",
        pct(s.auth.dkim_pass, s.auth.parsed)
    ));
    p(format!(
        "- SPF or DKIM pass: {:.2}%",
        pct(s.auth.either_pass, s.auth.parsed)
    ));
    for (k, v) in &s.provenance {
        p(format!("- {k}: {v}"));
    }
    p(String::new());
    p("## Content".into());
    let c = &s.classification;
    for (name, share) in [
        ("promotional", &c.promotional),
        ("crm", &c.crm),
        ("alert", &c.alert),
        ("unparseable", &c.unparseable),
    ] {
        p(format!("- {name}: {} ({:.2}%)", share.count, share.percent));
    }
    p(String::new());
    p("## Volume".into());
    if let Some(share) = st.top10_share {
        p(format!(
            "- top-10 root domains: {:.2}% of mail",
            100.0 * share
        ));
    }
    if let Some(d) = &st.domain_totals.result {
        p(format!(
            "- per-domain totals: mean {:.2}, median {}, skewness {:.3}, excess kurtosis {:.3}",
            d.mean, d.median, d.skewness, d.excess_kurtosis
        ));
    }
    if let Some(a) = &s.asn_concentration.result {
        p(format!(
            "- top {} of {} ASNs carry {:.2}% of mail",
            a.top_n,
            a.volumes.len(),
            100.0 * a.top_share
        ));
    }
    if let Some(h) = &s.ip_hopping.result {
        p(format!(
            "- IPs vs spam reports over {} companies: pearson r {:.3} (p {:.3e}), spearman {:.3} (p {:.3e})",
            h.companies, h.pearson.r, h.pearson.p_value, h.spearman.r, h.spearman.p_value
        ));
    }
    p(String::new());
    p("## Timing".into());
    for peak in s.spectrum_peaks.iter().take(5) {
        p(format!(
            "- peak at f = {:.4}/day (period {:.2} days)",
            peak.frequency, peak.period_days
        ));
    }
    if let Some(v) = s.seasonal_variance_share {
        p(format!(
            "- weekly seasonal variance share: {:.2}%",
            100.0 * v
        ));
    }
    p(String::new());
    p("## Clusters".into());
    match &s.clustering {
        Some(cl) => {
            p(format!(
                "- k = {} (silhouette {:.3}) over {} companies, {} principal components",
                cl.k, cl.silhouette, cl.companies, cl.pca_components
            ));
            for k in 0..cl.k {
                let members: Vec<&str> = cl
                    .labels
                    .iter()
                    .filter(|(_, &l)| l == k)
                    .map(|(c, _)| c.as_str())
                    .collect();
                p(format!("- cluster {k}: {}", members.join(", ")));
            }
        }
        None => p("- not computed".into()),
    }
    p(String::new());
    p("## Sectors".into());
    p(format!("- chi-squared: {}", fmt_test(&st.chi_squared)));
    p(format!("- ANOVA: {}", fmt_test(&st.anova)));
    p(format!(
        "- Kruskal-Wallis: {}",
        fmt_test(&st.kruskal_wallis)
    ));
    if !s.warnings.is_empty() {
        p(String::new());
        p("## Warnings".into());
        for w in &s.warnings {
            p(format!("- {w}"));
        }
    }
    Ok(md)
}

/// Writes `report.md` next to the artifacts and returns its path.
pub fn run_report(cfg: &AuditConfig) -> Result<PathBuf> {
    let md = render_report(&cfg.output_dir)?;
    let path = cfg.output_dir.join(REPORT);
    fs::write(&path, md).map_err(|e| AuditError::io(&path, e))?;
    Ok(path)
}
