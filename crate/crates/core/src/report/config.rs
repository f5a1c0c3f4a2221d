use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use chrono_tz::Tz;
use serde::Serialize;

use crate::classify::AdapterConfig;
use crate::cluster::PcaTarget;
use crate::error::{AuditError, Result};
use crate::stats::{MomentConvention, PINNED_CONVENTION};

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierMode {
    Rules,
    External,
}

impl FromStr for ClassifierMode {
    type Err = AuditError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rules" => Ok(ClassifierMode::Rules),
            "external" | "llm" => Ok(ClassifierMode::External),
            other => Err(AuditError::Config(format!(
                "unknown classifier mode {other:?}"
            ))),
        }
    }
}

/// Pipeline settings. Loaded from a `key = value` file whose relative
/// paths resolve against the file's directory; command-line flags are
/// applied on top by the caller.
#[derive(Debug, Clone)]
pub struct AuditConfig {
    pub corpus_dir: Option<PathBuf>,
    pub registry_path: Option<PathBuf>,
    pub ip2asn_path: Option<PathBuf>,
    pub abuse_path: Option<PathBuf>,
    /// Marketing-provider substrings, one per line. Bundled list when unset.
    pub provider_list: Option<PathBuf>,
    /// Extra service → domain/ASN mappings merged over the seeded map.
    pub org_map_path: Option<PathBuf>,
    /// `service_name,sector` rows for the cross-sector tests.
    pub sectors_path: Option<PathBuf>,
    pub trusted_mx: Option<String>,
    pub audit_timezone: Tz,
    pub classifier: ClassifierMode,
    pub adapter: AdapterConfig,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub k_min: usize,
    pub k_max: usize,
    pub pca: PcaTarget,
    pub season_period: usize,
    pub sigma_multiplier: f64,
    /// Skewness/kurtosis normalisation for the sector statistics.
    pub moment_convention: MomentConvention,
}

impl Default for AuditConfig {
    fn default() -> Self {
        AuditConfig {
            corpus_dir: None,
            registry_path: None,
            ip2asn_path: None,
            abuse_path: None,
            provider_list: None,
            org_map_path: None,
            sectors_path: None,
            trusted_mx: None,
            audit_timezone: Tz::UTC,
            classifier: ClassifierMode::Rules,
            adapter: AdapterConfig::default(),
            seed: DEFAULT_SEED,
            output_dir: PathBuf::from("out"),
            k_min: 2,
            k_max: 10,
            pca: PcaTarget::default(),
            season_period: 7,
            sigma_multiplier: 2.0,
            moment_convention: PINNED_CONVENTION,
        }
    }
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| AuditError::Config(format!("{key}: cannot parse {value:?}")))
}

impl AuditConfig {
    /// Parses the key-value text. `base` anchors relative paths.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut cfg = AuditConfig {
            output_dir: base.join("out"),
            ..AuditConfig::default()
        };
        let mut seen = std::collections::BTreeSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(AuditError::Config(format!(
                    "line {}: expected key = value, got {line:?}",
                    i + 1
                )));
            };
            let key = key.trim().to_ascii_lowercase();
            let value = value.trim().trim_matches('"');
            if !seen.insert(key.clone()) {
                return Err(AuditError::Config(format!(
                    "line {}: duplicate key {key}",
                    i + 1
                )));
            }
            cfg.set(&key, value, base)
                .map_err(|e| AuditError::Config(format!("line {}: {e}", i + 1)))?;
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| AuditError::Config(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::parse(&text, base)
    }

    /// Applies one setting. Also used for command-line overrides.
    pub fn set(&mut self, key: &str, value: &str, base: &Path) -> Result<()> {
        let path = || Some(base.join(value));
        match key {
            "corpus_dir" => self.corpus_dir = path(),
            "registry" | "registry_path" => self.registry_path = path(),
            "ip2asn" | "ip2asn_path" => self.ip2asn_path = path(),
            "abuse" | "abuse_path" => self.abuse_path = path(),
            "providers" | "provider_list" => self.provider_list = path(),
            "org_map" | "org_map_path" => self.org_map_path = path(),
            "sectors" | "sectors_path" => self.sectors_path = path(),
            "output_dir" => self.output_dir = base.join(value),
            "trusted_mx" => self.trusted_mx = (!value.is_empty()).then(|| value.to_string()),
            "timezone" | "audit_timezone" => {
                self.audit_timezone = value
                    .parse()
                    .map_err(|_| AuditError::Config(format!("unknown timezone {value:?}")))?
            }
            "classifier" => self.classifier = value.parse()?,
            "adapter_url" => self.adapter.url = value.to_string(),
            "adapter_model" => self.adapter.model = value.to_string(),
            "adapter_timeout_secs" => {
                self.adapter.timeout = Duration::from_secs_f64(parse_num(key, value)?)
            }
            "adapter_retries" => self.adapter.retries = parse_num(key, value)?,
            "adapter_max_chars" => self.adapter.max_chars = parse_num(key, value)?,
            "adapter_pool_size" => self.adapter.pool_size = parse_num(key, value)?,
            "seed" => self.seed = parse_num(key, value)?,
            "k_min" => self.k_min = parse_num(key, value)?,
            "k_max" => self.k_max = parse_num(key, value)?,
            "pca_components" => self.pca = PcaTarget::FixedComponents(parse_num(key, value)?),
            "pca_variance" => self.pca = PcaTarget::VarianceThreshold(parse_num(key, value)?),
            "season_period" => self.season_period = parse_num(key, value)?,
            "sigma_multiplier" => self.sigma_multiplier = parse_num(key, value)?,
            "moment_convention" => {
                self.moment_convention = match value.to_ascii_lowercase().as_str() {
                    "population" => MomentConvention::Population,
                    "sample_adjusted" | "sample" => MomentConvention::SampleAdjusted,
                    other => {
                        return Err(AuditError::Config(format!(
                            "unknown moment convention {other:?}"
                        )))
                    }
                }
            }
            other => return Err(AuditError::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// Checks the settings a stage depends on before any work starts.
    pub fn validate(&self, stage: Stage) -> Result<()> {
        fn need<'a>(p: &'a Option<PathBuf>, key: &str) -> Result<&'a PathBuf> {
            p.as_ref()
                .ok_or_else(|| AuditError::Config(format!("{key} is not set")))
        }
        fn exists(p: &Path, key: &str) -> Result<()> {
            if p.exists() {
                Ok(())
            } else {
                Err(AuditError::Config(format!(
                    "{key} {} does not exist",
                    p.display()
                )))
            }
        }
        if stage == Stage::Ingest {
            exists(need(&self.corpus_dir, "corpus_dir")?, "corpus_dir")?;
            exists(need(&self.registry_path, "registry")?, "registry")?;
        }
        if stage == Stage::Analyze {
            for (p, key) in [
                (&self.ip2asn_path, "ip2asn"),
                (&self.abuse_path, "abuse"),
                (&self.provider_list, "providers"),
                (&self.org_map_path, "org_map"),
                (&self.sectors_path, "sectors"),
            ] {
                if let Some(p) = p {
                    exists(p, key)?;
                }
            }
            if self.k_min < 2 || self.k_min > self.k_max {
                return Err(AuditError::Config(format!(
                    "k range {}..={} is empty or starts below 2",
                    self.k_min, self.k_max
                )));
            }
            if self.season_period < 2 {
                return Err(AuditError::Config(
                    "season_period must be at least 2".into(),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Ingest,
    Classify,
    Analyze,
}
