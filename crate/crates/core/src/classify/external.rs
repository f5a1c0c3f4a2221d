//! Adapter for an external LLM classifier endpoint.
//!
//! Request body: `{"model", "prompt", "schema"}`. The response body must be a
//! JSON object with exactly `sentiment` (promotional | CRM | alert),
//! `confidence` (integer 1–5) and `rationale`. An envelope of the form
//! `{"response": "<text>"}` is unwrapped first; prose around a single
//! conforming object is tolerated.

use std::time::Duration;

use serde_json::{json, Map, Value};
use thiserror::Error;

use super::rules::classify_rule_based;
use super::{Classification, ClassificationSource, ContentLabel};
use crate::corpus::EmailRecord;

const PROMPT_TEMPLATE: &str = include_str!("../../data/classifier_prompt.txt");
const SCHEMA: &str = include_str!("../../data/classification_schema.json");
const JSON_ONLY_SUFFIX: &str = "\n\nRespond with JSON only";

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ClassifyError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("protocol error: {0}")]
    Protocol(String),
}

#[derive(Debug, Clone)]
pub struct AdapterConfig {
    pub url: String,
    pub model: String,
    pub timeout: Duration,
    /// Extra attempts allowed after transport failures.
    pub retries: u32,
    /// Characters of subject+body sent to the model.
    pub max_chars: usize,
    /// Requests in flight for batch classification.
    pub pool_size: usize,
}

impl Default for AdapterConfig {
    fn default() -> Self {
        AdapterConfig {
            url: "http://127.0.0.1:11434/classify".into(),
            model: "llama3.1:8b-instruct".into(),
            timeout: Duration::from_secs(60),
            retries: 2,
            max_chars: 4000,
            pool_size: 4,
        }
    }
}

/// Posts a JSON body and returns the response body text.
pub trait Transport: Sync {
    fn post_json(&self, url: &str, body: &Value) -> Result<String, String>;
}

pub struct HttpTransport {
    agent: ureq::Agent,
}

impl HttpTransport {
    pub fn new(timeout: Duration) -> Self {
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .build();
        HttpTransport {
            agent: config.into(),
        }
    }
}

impl Transport for HttpTransport {
    fn post_json(&self, url: &str, body: &Value) -> Result<String, String> {
        let mut resp = self
            .agent
            .post(url)
            .send_json(body)
            .map_err(|e| e.to_string())?;
        resp.body_mut().read_to_string().map_err(|e| e.to_string())
    }
}

pub fn schema() -> Value {
    serde_json::from_str(SCHEMA).expect("bundled schema is JSON")
}

fn email_text(record: &EmailRecord, max_chars: usize) -> String {
    let full = format!("Subject: {}\n\n{}", record.subject, record.body_text);
    full.chars().take(max_chars).collect()
}

pub fn build_prompt(record: &EmailRecord, max_chars: usize) -> String {
    PROMPT_TEMPLATE
        .replace("{schema}", SCHEMA.trim())
        .replace("{input}", &email_text(record, max_chars))
}

fn validate(obj: &Map<String, Value>) -> Result<Classification, String> {
    if let Some(extra) = obj
        .keys()
        .find(|k| !matches!(k.as_str(), "sentiment" | "confidence" | "rationale"))
    {
        return Err(format!("unexpected field {extra:?}"));
    }
    let label = match obj.get("sentiment").and_then(Value::as_str) {
        Some(s) if s.eq_ignore_ascii_case("promotional") => ContentLabel::Promotional,
        Some(s) if s.eq_ignore_ascii_case("crm") => ContentLabel::Crm,
        Some(s) if s.eq_ignore_ascii_case("alert") => ContentLabel::Alert,
        Some(s) => return Err(format!("sentiment {s:?} not in enum")),
        None => return Err("missing string field sentiment".into()),
    };
    let confidence = match obj.get("confidence").and_then(Value::as_u64) {
        Some(c @ 1..=5) => c as u8,
        _ => return Err("confidence must be an integer in 1..=5".into()),
    };
    let rationale = obj
        .get("rationale")
        .and_then(Value::as_str)
        .ok_or("missing string field rationale")?
        .to_string();
    Ok(Classification {
        label,
        confidence,
        rationale,
        source: ClassificationSource::External,
        low_signal: false,
        fallback: None,
    })
}

/// Top-level `{...}` spans of `text`, honouring JSON string escapes.
fn object_spans(text: &str) -> Vec<&str> {
    let mut spans = Vec::new();
    let bytes = text.as_bytes();
    let mut depth = 0usize;
    let mut start = 0;
    let mut in_string = false;
    let mut escaped = false;
    for (i, &b) in bytes.iter().enumerate() {
        if in_string {
            match b {
                _ if escaped => escaped = false,
                b'\\' => escaped = true,
                b'"' => in_string = false,
                _ => {}
            }
            continue;
        }
        match b {
            b'"' if depth > 0 => in_string = true,
            b'{' => {
                if depth == 0 {
                    start = i;
                }
                depth += 1;
            }
            b'}' if depth > 0 => {
                depth -= 1;
                if depth == 0 {
                    spans.push(&text[start..=i]);
                }
            }
            _ => {}
        }
    }
    spans
}

/// Decodes a response body into a classification.
pub fn decode_response(body: &str) -> Result<Classification, ClassifyError> {
    decode_inner(body, true)
}

fn decode_inner(body: &str, allow_envelope: bool) -> Result<Classification, ClassifyError> {
    if let Ok(Value::Object(obj)) = serde_json::from_str::<Value>(body.trim()) {
        if allow_envelope && !obj.contains_key("sentiment") {
            if let Some(inner) = obj.get("response").and_then(Value::as_str) {
                return decode_inner(inner, false);
            }
        }
        return validate(&obj).map_err(ClassifyError::Protocol);
    }
    let conforming: Vec<Classification> = object_spans(body)
        .into_iter()
        .filter_map(|s| match serde_json::from_str::<Value>(s) {
            Ok(Value::Object(o)) => validate(&o).ok(),
            _ => None,
        })
        .collect();
    match conforming.len() {
        1 => Ok(conforming.into_iter().next().unwrap()),
        0 => Err(ClassifyError::Protocol(
            "no conforming JSON object in response".into(),
        )),
        n => Err(ClassifyError::Protocol(format!(
            "{n} candidate JSON objects in response"
        ))),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExternalOutcome {
    pub classification: Classification,
    pub attempts: u32,
    pub transport_failures: u32,
    pub reprompted: bool,
}

/// Classifies one record through the external endpoint. Transport failures
/// are retried up to `config.retries` times; a non-conforming answer gets
/// one re-prompt asking for JSON only.
pub fn classify_external(
    record: &EmailRecord,
    config: &AdapterConfig,
    transport: &dyn Transport,
) -> Result<ExternalOutcome, ClassifyError> {
    let base = build_prompt(record, config.max_chars);
    let schema = schema();
    let mut attempts = 0;
    let mut transport_failures = 0;
    let mut reprompted = false;
    loop {
        attempts += 1;
        let prompt = if reprompted {
            format!("{base}{JSON_ONLY_SUFFIX}")
        } else {
            base.clone()
        };
        let request = json!({ "model": config.model, "prompt": prompt, "schema": schema });
        match transport.post_json(&config.url, &request) {
            Err(e) => {
                transport_failures += 1;
                if transport_failures > config.retries {
                    return Err(ClassifyError::Transport(e));
                }
            }
            Ok(body) => match decode_response(&body) {
                Ok(classification) => {
                    return Ok(ExternalOutcome {
                        classification,
                        attempts,
                        transport_failures,
                        reprompted,
                    })
                }
                Err(e) if reprompted => return Err(e),
                Err(_) => reprompted = true,
            },
        }
    }
}

/// External classification, falling back to the rule engine on any error.
pub fn classify_with_fallback(
    record: &EmailRecord,
    config: &AdapterConfig,
    transport: &dyn Transport,
) -> Classification {
    match classify_external(record, config, transport) {
        Ok(o) => o.classification,
        Err(e) => {
            log::warn!(
                "external classification of {} failed: {e}",
                record.message_id
            );
            Classification {
                fallback: Some(e.to_string()),
                ..classify_rule_based(record)
            }
        }
    }
}

/// Classifies records with at most `config.pool_size` requests in flight.
/// Output is ordered by message id.
pub fn classify_batch_external(
    records: &[&EmailRecord],
    config: &AdapterConfig,
    transport: &dyn Transport,
) -> Vec<(String, Classification)> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.pool_size.max(1))
        .build()
        .expect("thread pool");
    let mut out: Vec<(String, Classification)> = pool.install(|| {
        use rayon::prelude::*;
        records
            .par_iter()
            .map(|r| {
                (
                    r.message_id.clone(),
                    classify_with_fallback(r, config, transport),
                )
            })
            .collect()
    });
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}
