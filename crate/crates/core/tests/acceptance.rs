//! Acceptance suite. Each test prints one `PASS`/`FAIL` line for its
//! criterion straight to stdout, so the lines appear even when the harness
//! captures output, and then asserts the same condition.

mod oracles;

use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::{Duration, Instant};

use chrono::NaiveDate;
use inboxaudit_core::authlineage::{classify_provenance, OrgMap, ProvenanceContext};
use inboxaudit_core::classify::classify_rule_based;
use inboxaudit_core::cluster::select_k;
use inboxaudit_core::corpus::{ingest_files, AliasRegistry, ParseOptions};
use inboxaudit_core::netintel::{bundled_providers, flag_marketing_asn, lookup_asn, AsnTable};
use inboxaudit_core::report::{
    fixture_check, fixture_membership_check, run_analyze, run_classify, run_ingest, AuditConfig,
    CheckLine, FixtureTable, ANALYSIS_ARTIFACTS, CLASSIFICATIONS, CORPUS, DEFAULT_SEED, SUMMARY,
};
use inboxaudit_core::synth::{generate, taxonomy_grid, NetworkKind, SynthSpec, MX_HOST};
use inboxaudit_core::temporal::{decompose_additive, spectrum_peaks, DailySeries};
use inboxaudit_core::{AuthResult, Provenance, SpamClass};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn report(n: u32, name: &str, passed: bool, detail: &str) {
    let line = format!(
        "criterion {n:>2} {} {name}: {detail}\n",
        if passed { "PASS" } else { "FAIL" }
    );
    let mut out = std::io::stdout().lock();
    out.write_all(line.as_bytes()).unwrap();
    out.flush().unwrap();
}

fn fixture_line(index: usize) -> (CheckLine, Duration, String) {
    let t0 = Instant::now();
    let r = fixture_check(&FixtureTable::bundled());
    let elapsed = t0.elapsed();
    let convention = format!("{:?}", r.convention);
    (r.checks[index].clone(), elapsed, convention)
}

fn fixture_criterion(n: u32, index: usize, limit: Duration) {
    let (line, elapsed, convention) = fixture_line(index);
    let passed = line.passed && elapsed < limit;
    let mut detail = format!(
        "observed {}; expected {}; {:.1} ms",
        line.observed,
        line.expected,
        elapsed.as_secs_f64() * 1e3
    );
    if n == 3 {
        detail.push_str(&format!("; convention {convention}"));
    }
    report(n, &line.name, passed, &detail);
    assert!(passed, "{line}");
}

#[test]
fn criterion_01_fixture_volume() {
    fixture_criterion(1, 0, Duration::from_secs(1));
}

#[test]
fn criterion_02_pareto_top10() {
    fixture_criterion(2, 1, Duration::from_secs(1));
}

#[test]
fn criterion_03_moments() {
    fixture_criterion(3, 2, Duration::from_secs(1));
}

#[test]
fn criterion_04_chi_squared() {
    fixture_criterion(4, 3, Duration::from_secs(1));
}

#[test]
fn criterion_05_anova() {
    fixture_criterion(5, 4, Duration::from_secs(1));
}

#[test]
fn criterion_06_weekly_period_recovery() {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(DEFAULT_SEED);
    let noise = Normal::new(0.0, 1.0).unwrap();
    // amplitude 3 against unit noise
    let values: Vec<f64> = (0..361)
        .map(|t| {
            40.0 + 3.0 * (2.0 * std::f64::consts::PI * t as f64 / 7.0).sin()
                + noise.sample(&mut rng)
        })
        .collect();
    let series = DailySeries {
        day0: NaiveDate::from_ymd_opt(2023, 9, 1).unwrap(),
        values,
    };
    let peaks = spectrum_peaks(&series).unwrap();
    let elapsed = t0.elapsed();
    let weekly = peaks.iter().find(|p| (6.9..=7.1).contains(&p.period_days));
    let passed = weekly.is_some() && elapsed < Duration::from_secs(5);
    let detail = match weekly {
        Some(p) => format!(
            "peak at f = {:.4}, T = {:.3} days among {} peaks; {:.1} ms",
            p.frequency,
            p.period_days,
            peaks.len(),
            elapsed.as_secs_f64() * 1e3
        ),
        None => format!("no peak in [6.9, 7.1] days; peaks {:?}", peaks),
    };
    report(6, "weekly period recovery", passed, &detail);
    assert!(passed, "{detail}");
}

fn series(values: Vec<f64>) -> DailySeries {
    DailySeries {
        day0: NaiveDate::from_ymd_opt(2024, 1, 1).unwrap(),
        values,
    }
}

/// Largest relative reconstruction error over indices with a defined trend.
fn reconstruction_error(s: &DailySeries) -> f64 {
    let d = decompose_additive(s, 7).unwrap();
    let mut worst = 0.0f64;
    for (i, x) in s.values.iter().enumerate() {
        if let (Some(t), Some(r)) = (d.trend[i], d.residual[i]) {
            worst = worst.max((t + d.seasonal[i] + r - x).abs() / x.abs().max(1.0));
        }
    }
    worst
}

#[test]
fn criterion_07_decomposition_identity() {
    let pattern = [5.0, 9.0, 12.0, 10.0, 8.0, 2.0, 1.0];
    let seasonal = series((0..140).map(|t| 50.0 + pattern[t % 7]).collect());
    let trend = series((0..140).map(|t| 10.0 + 0.75 * t as f64).collect());
    let mut rng = ChaCha8Rng::seed_from_u64(DEFAULT_SEED);
    let noise = Normal::new(0.0, 2.0).unwrap();
    let mixed = series(
        (0..140)
            .map(|t| 30.0 + 0.2 * t as f64 + pattern[t % 7] + noise.sample(&mut rng))
            .collect(),
    );
    let err = [&seasonal, &trend, &mixed]
        .into_iter()
        .map(reconstruction_error)
        .fold(0.0, f64::max);
    let s_share = decompose_additive(&seasonal, 7)
        .unwrap()
        .seasonal_variance_share;
    let t_share = decompose_additive(&trend, 7)
        .unwrap()
        .seasonal_variance_share;
    let passed = err < 1e-9 && s_share > 0.99 && t_share < 0.01;
    let detail = format!(
        "max relative reconstruction error {err:.2e}; seasonal share {s_share:.4} on pure-seasonal, {t_share:.2e} on pure-trend"
    );
    report(7, "decomposition identity", passed, &detail);
    assert!(passed, "{detail}");
}

fn blobs(centers: &[[f64; 4]], per_blob: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.5).unwrap();
    centers
        .iter()
        .flat_map(|c| {
            (0..per_blob)
                .map(|_| {
                    c.iter()
                        .map(|v| v + noise.sample(&mut rng))
                        .collect::<Vec<f64>>()
                })
                .collect::<Vec<_>>()
        })
        .collect()
}

#[test]
fn criterion_08_cluster_model_selection() {
    let t0 = Instant::now();
    let two = blobs(&[[0.0; 4], [8.0, 8.0, 0.0, 0.0]], 40, 1);
    let three = blobs(
        &[[0.0; 4], [8.0, 8.0, 0.0, 0.0], [0.0, 0.0, 8.0, 8.0]],
        40,
        2,
    );
    let a = select_k(&two, 2, 10, DEFAULT_SEED).unwrap().model;
    let b = select_k(&three, 2, 10, DEFAULT_SEED).unwrap().model;
    let elapsed = t0.elapsed();
    let passed = a.k == 2
        && b.k == 3
        && a.silhouette > 0.8
        && b.silhouette > 0.8
        && elapsed < Duration::from_secs(30);
    let detail = format!(
        "2-blob k = {} (silhouette {:.3}); 3-blob k = {} (silhouette {:.3}); {:.2} s",
        a.k,
        a.silhouette,
        b.k,
        b.silhouette,
        elapsed.as_secs_f64()
    );
    report(8, "silhouette model selection", passed, &detail);
    assert!(passed, "{detail}");
}

#[test]
fn criterion_09_fixture_cluster_membership() {
    let m = fixture_membership_check(&FixtureTable::bundled(), DEFAULT_SEED).unwrap();
    let detail = format!(
        "{} misassigned (at most 2 allowed); flagged {:?}; k-means cluster holds {} domains",
        m.misassigned,
        m.expected_members,
        m.found_members.len()
    );
    report(9, "soft cluster membership (k = 2)", m.passed, &detail);
    assert!(m.passed, "{detail}");
}

#[test]
fn criterion_10_statistical_oracles() {
    let d = oracles::discrepancies();
    let special = oracles::special_function_error();
    let worst_stat = d.iter().map(|x| x.1).fold(0.0, f64::max);
    let worst_p = d.iter().map(|x| x.2).fold(0.0, f64::max);
    let passed = worst_stat < oracles::TOL && worst_p < oracles::TOL && special < 1e-10;
    let names: Vec<&str> = d.iter().map(|x| x.0).collect();
    let detail = format!(
        "{} tests x {} instances, worst statistic error {worst_stat:.2e}, worst p error {worst_p:.2e}; special functions at 20 points, worst relative error {special:.2e}",
        names.len(),
        oracles::INSTANCES,
    );
    report(10, "statistical oracles", passed, &detail);
    assert!(passed, "{detail} ({names:?})");
}

#[test]
fn criterion_11_pipeline_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = generate(&SynthSpec {
        services: 16,
        days: 90,
        ..SynthSpec::default()
    })
    .unwrap();
    let mut cfg = AuditConfig::load(corpus.write(dir.path()).unwrap()).unwrap();
    run_ingest(&cfg).unwrap();
    run_classify(&cfg, None).unwrap();
    let first = cfg.output_dir.clone();
    run_analyze(&cfg).unwrap();
    let second = dir.path().join("second");
    fs::create_dir_all(&second).unwrap();
    for f in [CORPUS, CLASSIFICATIONS] {
        fs::copy(first.join(f), second.join(f)).unwrap();
    }
    cfg.output_dir = second.clone();
    run_analyze(&cfg).unwrap();
    let read = |d: &Path, f: &str| fs::read(d.join(f)).unwrap();
    let differing: Vec<&str> = ANALYSIS_ARTIFACTS
        .iter()
        .copied()
        .chain([SUMMARY])
        .filter(|f| read(&first, f) != read(&second, f))
        .collect();
    let passed = differing.is_empty();
    let detail = if passed {
        format!(
            "{} artifacts byte-identical across two runs",
            ANALYSIS_ARTIFACTS.len() + 1
        )
    } else {
        format!("differing artifacts: {differing:?}")
    };
    report(11, "pipeline determinism", passed, &detail);
    assert!(passed, "{detail}");
}

#[test]
fn criterion_12_taxonomy_totality() {
    let grid = taxonomy_grid(500, DEFAULT_SEED);
    let registry =
        AliasRegistry::from_reader(grid.registry_csv.as_bytes(), "grid registry").unwrap();
    let table = AsnTable::from_reader(grid.ip2asn_tsv.as_bytes(), "grid ip2asn").unwrap();
    let mut ctx = ProvenanceContext::default();
    ctx.org_map
        .merge(OrgMap::from_reader(grid.org_map_csv.as_bytes(), "grid org map").unwrap());
    let providers = bundled_providers();
    let opts = ParseOptions {
        trusted_mx: Some(MX_HOST.into()),
        timezone: chrono_tz::UTC,
    };
    let (store, _) = ingest_files(&grid.emails, &registry, &opts);
    let records = store.records();

    let mut problems = Vec::new();
    let (mut internal_cell, mut utp_cell) = (0, 0);
    for (i, (rec, cell)) in records.iter().zip(&grid.cells).enumerate() {
        if !rec.is_ok() || rec.alias.is_none() {
            problems.push(format!("message {i} did not parse or bind"));
            continue;
        }
        let asn = lookup_asn(rec.sender_ip, &table);
        let marketing = asn.is_some_and(|a| flag_marketing_asn(a, &providers));
        let content = classify_rule_based(rec).label;
        let label = classify_provenance(rec, &ctx, asn, marketing, Some(content));
        let auth_pass = rec.spf == AuthResult::Pass || rec.dkim == AuthResult::Pass;
        let both_fail = rec.spf == AuthResult::Fail && rec.dkim == AuthResult::Fail;
        if label.spam == SpamClass::Uuss && !(label.provenance == Provenance::Utp || both_fail) {
            problems.push(format!(
                "message {i}: uuss on {:?} without fail/fail",
                label.provenance
            ));
        }
        if label.spam == SpamClass::Sos && (label.provenance == Provenance::Utp || !auth_pass) {
            problems.push(format!("message {i}: sos on {:?}", label.provenance));
        }
        if cell.spf_pass
            && cell.dkim_pass
            && cell.domain_matches
            && cell.network == NetworkKind::Own
        {
            internal_cell += 1;
            if label.provenance != Provenance::Internal {
                problems.push(format!(
                    "message {i}: all-pass own-domain gave {:?}",
                    label.provenance
                ));
            }
        }
        if !cell.spf_pass && !cell.dkim_pass && !cell.domain_matches {
            utp_cell += 1;
            if (label.provenance, label.spam) != (Provenance::Utp, SpamClass::Uuss) {
                problems.push(format!("message {i}: fail/fail mismatched gave {label:?}"));
            }
        }
    }
    if records.len() != grid.cells.len() {
        problems.push(format!(
            "{} records for {} messages",
            records.len(),
            grid.cells.len()
        ));
    }
    let passed = problems.is_empty() && internal_cell > 0 && utp_cell > 0;
    let detail = if passed {
        format!(
            "{} messages over 32 cells labelled; {internal_cell} internal-cell and {utp_cell} fail/fail-mismatched messages as expected",
            records.len()
        )
    } else {
        format!("{} problems, first: {:?}", problems.len(), problems.first())
    };
    report(12, "taxonomy totality", passed, &detail);
    assert!(passed, "{detail}");
}
