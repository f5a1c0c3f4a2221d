use std::sync::OnceLock;

use regex::Regex;

use super::{Classification, ClassificationSource, ContentLabel};
use crate::corpus::EmailRecord;
use crate::error::{AuditError, Result};

const BUNDLED_RULES: &str = include_str!("../../data/rules.csv");

/// Score every message starts with for `crm`, the fallback class.
pub const CRM_BASELINE: f64 = 2.0;
const SUBJECT_WEIGHT: f64 = 2.0;

#[derive(Debug, Clone)]
struct Rule {
    label: ContentLabel,
    pattern: String,
    regex: Regex,
    weight: f64,
}

/// Compiled, versioned rule table.
#[derive(Debug, Clone)]
pub struct RuleEngine {
    version: u32,
    rules: Vec<Rule>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RuleScores {
    pub promotional: f64,
    pub crm: f64,
    pub alert: f64,
    pub matched: Vec<(ContentLabel, String)>,
}

impl RuleScores {
    fn get(&self, label: ContentLabel) -> f64 {
        match label {
            ContentLabel::Promotional => self.promotional,
            ContentLabel::Crm => self.crm,
            ContentLabel::Alert => self.alert,
        }
    }
}

fn compile(pattern: &str) -> std::result::Result<Regex, regex::Error> {
    if let Some(re) = pattern.strip_prefix("re:") {
        return Regex::new(&format!("(?i){re}"));
    }
    let word = |c: Option<char>| c.is_some_and(|c| c.is_alphanumeric() || c == '_');
    let lead = if word(pattern.chars().next()) {
        r"\b"
    } else {
        ""
    };
    let tail = if word(pattern.chars().last()) {
        r"\b"
    } else {
        ""
    };
    Regex::new(&format!("(?i){lead}{}{tail}", regex::escape(pattern)))
}

fn confidence_from_margin(margin: f64) -> u8 {
    match margin {
        m if m < 1.0 => 1,
        m if m < 2.5 => 2,
        m if m < 5.0 => 3,
        m if m < 8.0 => 4,
        _ => 5,
    }
}

impl RuleEngine {
    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let version = text
            .lines()
            .find_map(|l| l.trim().strip_prefix("# rules-version:"))
            .and_then(|v| v.trim().parse().ok())
            .unwrap_or(0);
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut rules = Vec::new();
        for (i, row) in rdr.records().enumerate() {
            let row = row?;
            let line = i + 2;
            if row.len() != 3 {
                return Err(AuditError::parse(
                    source,
                    line,
                    "expected label,pattern,weight",
                ));
            }
            let label: ContentLabel = row[0]
                .parse()
                .map_err(|e: String| AuditError::parse(source, line, e))?;
            let weight: f64 = row[2].parse().map_err(|_| {
                AuditError::parse(source, line, format!("bad weight {:?}", &row[2]))
            })?;
            let regex =
                compile(&row[1]).map_err(|e| AuditError::parse(source, line, e.to_string()))?;
            rules.push(Rule {
                label,
                pattern: row[1].to_string(),
                regex,
                weight,
            });
        }
        Ok(RuleEngine { version, rules })
    }

    pub fn bundled() -> &'static RuleEngine {
        static ENGINE: OnceLock<RuleEngine> = OnceLock::new();
        ENGINE.get_or_init(|| {
            RuleEngine::parse(BUNDLED_RULES, "rules.csv").expect("bundled rules parse")
        })
    }

    pub fn version(&self) -> u32 {
        self.version
    }

    pub fn score(&self, subject: &str, body: &str) -> RuleScores {
        let mut scores = RuleScores {
            promotional: 0.0,
            crm: CRM_BASELINE,
            alert: 0.0,
            matched: Vec::new(),
        };
        for rule in &self.rules {
            let mut hit = 0.0;
            if rule.regex.is_match(subject) {
                hit += SUBJECT_WEIGHT;
            }
            if rule.regex.is_match(body) {
                hit += 1.0;
            }
            if hit > 0.0 {
                let s = hit * rule.weight;
                match rule.label {
                    ContentLabel::Promotional => scores.promotional += s,
                    ContentLabel::Crm => scores.crm += s,
                    ContentLabel::Alert => scores.alert += s,
                }
                scores.matched.push((rule.label, rule.pattern.clone()));
            }
        }
        scores
    }

    pub fn classify_text(&self, subject: &str, body: &str) -> Classification {
        if subject.trim().is_empty() && body.trim().is_empty() {
            return Classification {
                label: ContentLabel::Crm,
                confidence: 1,
                rationale: "no subject or body text".into(),
                source: ClassificationSource::Rules,
                low_signal: true,
                fallback: None,
            };
        }
        let scores = self.score(subject, body);
        // priority order doubles as the tie-break
        let order = [
            ContentLabel::Alert,
            ContentLabel::Promotional,
            ContentLabel::Crm,
        ];
        let mut best = order[0];
        for &l in &order[1..] {
            if scores.get(l) > scores.get(best) {
                best = l;
            }
        }
        let runner_up = order
            .iter()
            .filter(|&&l| l != best)
            .map(|&l| scores.get(l))
            .fold(f64::NEG_INFINITY, f64::max);
        let margin = scores.get(best) - runner_up;
        let cues: Vec<&str> = scores
            .matched
            .iter()
            .filter(|(l, _)| *l == best)
            .map(|(_, p)| p.as_str())
            .take(3)
            .collect();
        let rationale = if cues.is_empty() {
            format!("{best}: no cues for other classes")
        } else {
            format!("{best}: matched {}", cues.join(", "))
        };
        Classification {
            label: best,
            confidence: confidence_from_margin(margin),
            rationale,
            source: ClassificationSource::Rules,
            low_signal: false,
            fallback: None,
        }
    }
}

/// Rule-based content class from a record's subject and body.
pub fn classify_rule_based(record: &EmailRecord) -> Classification {
    RuleEngine::bundled().classify_text(&record.subject, &record.body_text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn label(subject: &str) -> ContentLabel {
        RuleEngine::bundled().classify_text(subject, "").label
    }

    #[test]
    fn overt_discount_is_promotional() {
        assert_eq!(
            label("48-Hour Sale: 30% off everything"),
            ContentLabel::Promotional
        );
        assert_eq!(
            label("Use promo code SAVE20 today"),
            ContentLabel::Promotional
        );
    }

    #[test]
    fn notification_is_alert() {
        assert_eq!(
            label("Your verification code is 882415"),
            ContentLabel::Alert
        );
        assert_eq!(
            label("Security alert: new sign-in on Windows"),
            ContentLabel::Alert
        );
        assert_eq!(label("Your order has shipped"), ContentLabel::Alert);
    }

    #[test]
    fn engagement_is_crm() {
        // expected label per the bundled rule table: crm cues only
        assert_eq!(
            label("Here's what's new in your community this week"),
            ContentLabel::Crm
        );
        assert_eq!(label("Meet the people behind our brand"), ContentLabel::Crm);
    }

    #[test]
    fn empty_input_is_low_signal_crm() {
        let c = RuleEngine::bundled().classify_text("", "  ");
        assert_eq!(
            (c.label, c.confidence, c.low_signal),
            (ContentLabel::Crm, 1, true)
        );
    }

    #[test]
    fn words_match_on_boundaries() {
        let s = RuleEngine::bundled().score("Wholesale saleswoman", "");
        assert_eq!(s.promotional, 0.0);
    }

    #[test]
    fn exact_tie_prefers_alert_then_promotional() {
        let engine = RuleEngine::parse(
            "label,pattern,weight\npromotional,zzpromo,1.0\nalert,zzalert,1.0\n",
            "t",
        )
        .unwrap();
        // promo = alert = 2, crm baseline 2: alert wins the three-way tie
        let c = engine.classify_text("zzpromo zzalert", "");
        assert_eq!(c.label, ContentLabel::Alert);
        assert_eq!(c.confidence, 1);
        let c = engine.classify_text("zzpromo", "");
        assert_eq!(c.label, ContentLabel::Promotional);
    }

    #[test]
    fn confidence_grows_with_margin() {
        let weak = RuleEngine::bundled().classify_text("A deal", "");
        let strong =
            RuleEngine::bundled().classify_text("Clearance sale: 50% off, free shipping", "");
        assert!(strong.confidence > weak.confidence);
        assert_eq!(strong.confidence, 5);
    }

    #[test]
    fn bundled_version_and_bad_rows() {
        assert_eq!(RuleEngine::bundled().version(), 1);
        assert!(RuleEngine::parse("label,pattern,weight\nspam,x,1\n", "t").is_err());
        assert!(RuleEngine::parse("label,pattern,weight\ncrm,x,heavy\n", "t").is_err());
    }
}
