//! Pipeline orchestration, configuration and the bundled fixture table.

pub mod config;
pub mod fixture;
pub mod pipeline;

pub use config::{AuditConfig, ClassifierMode, Stage, DEFAULT_SEED};
pub use fixture::{
    fixture_check, fixture_feature_rows, fixture_membership_check, CheckLine, FixtureReport,
    FixtureRow, FixtureTable, MembershipCheck, FIXTURE_ROWS,
};
pub use pipeline::{
    load_sectors, read_classifications, render_report, run_analyze, run_classify, run_ingest,
    run_report, AnalysisSummary, AuthSummary, ClusteringSummary, Outcome, SectorStats,
    ANALYSIS_ARTIFACTS, CLASSIFICATIONS, CLASSIFICATION_SUMMARY, CORPUS, INGEST_REPORT, REPORT,
    SUMMARY,
};
