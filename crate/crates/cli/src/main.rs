use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use inboxaudit_core::classify::{pairwise_irr, RaterMatrix};
use inboxaudit_core::report::{
    fixture_check, fixture_membership_check, run_analyze, run_classify, run_ingest, run_report,
    AuditConfig, FixtureTable, ANALYSIS_ARTIFACTS,
};
use inboxaudit_core::synth::{generate, SynthSpec};
use inboxaudit_core::{AuditError, ErrorKind};

#[derive(Parser)]
#[command(
    name = "audit",
    version,
    about = "Inbox provenance and email-marketing audit"
)]
struct Cli {
    /// Key-value configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for randomized steps (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (overrides the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse the .eml corpus and bind messages to services.
    Ingest,
    /// Label every parsed message as promotional, CRM or alert.
    Classify,
    /// Compute all analysis artifacts from the ingested corpus.
    Analyze,
    /// Recompute the reference table statistics and compare.
    FixtureCheck {
        /// Table to check instead of the bundled one.
        #[arg(long)]
        table: Option<PathBuf>,
        /// Also run the k = 2 membership check.
        #[arg(long)]
        clusters: bool,
        /// Exit with status 1 when a check fails.
        #[arg(long)]
        strict: bool,
    },
    /// Write a Markdown digest of the analysis artifacts.
    Report,
    /// Agreement between raters in an `item,rater...` CSV.
    Irr {
        ratings: PathBuf,
        /// Column holding the machine classifier's labels.
        #[arg(long)]
        machine: Option<String>,
    },
    /// Write a seeded demo corpus with all side inputs.
    Synth {
        dir: PathBuf,
        #[arg(long, default_value_t = 24)]
        services: usize,
        #[arg(long, default_value_t = 120)]
        days: u32,
    },
}

fn load_config(cli: &Cli) -> Result<AuditConfig> {
    let mut cfg = match &cli.config {
        Some(p) => AuditConfig::load(p)?,
        None => AuditConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<ExitCode> {
    match &cli.command {
        Command::Ingest => {
            let cfg = load_config(cli)?;
            let r = run_ingest(&cfg)?;
            if r.files == 0 {
                log::warn!("corpus directory holds no .eml files");
            }
            println!(
                "ingested {} files: {} ok, {} unparseable, {} unmatched, {} duplicate ids, {} services",
                r.files, r.ok, r.unparseable, r.unmatched, r.duplicate_message_ids, r.services
            );
        }
        Command::Classify => {
            let cfg = load_config(cli)?;
            let s = run_classify(&cfg, None)?;
            println!("classified {} messages", s.total);
            for (name, share) in [
                ("promotional", &s.promotional),
                ("crm", &s.crm),
                ("alert", &s.alert),
                ("unparseable", &s.unparseable),
            ] {
                println!("  {name:<12} {:>6} ({:.2}%)", share.count, share.percent);
            }
            if s.fallbacks > 0 {
                println!("  {} fell back to the rule classifier", s.fallbacks);
            }
        }
        Command::Analyze => {
            let cfg = load_config(cli)?;
            let s = run_analyze(&cfg)?;
            println!(
                "analysed {} messages; wrote {} artifacts to {}",
                s.messages,
                ANALYSIS_ARTIFACTS.len() + 1,
                cfg.output_dir.display()
            );
            for w in &s.warnings {
                println!("warning: {w}");
            }
        }
        Command::FixtureCheck {
            table,
            clusters,
            strict,
        } => {
            let t = match table {
                Some(p) => FixtureTable::load(p)?,
                None => FixtureTable::bundled(),
            };
            let report = fixture_check(&t);
            print!("{report}");
            let mut ok = report.all_passed();
            if *clusters {
                let seed = load_config(cli)?.seed;
                let m = fixture_membership_check(&t, seed)?;
                println!(
                    "{} k=2 membership: {} misassigned of {} flagged domains",
                    if m.passed { "PASS" } else { "FAIL" },
                    m.misassigned,
                    m.expected_members.len()
                );
                ok &= m.passed;
            }
            if *strict && !ok {
                return Ok(ExitCode::from(1));
            }
        }
        Command::Report => {
            let cfg = load_config(cli)?;
            let path = run_report(&cfg)?;
            println!("wrote {}", path.display());
        }
        Command::Irr { ratings, machine } => {
            let m = RaterMatrix::load(ratings)?;
            let s = pairwise_irr(&m, machine.as_deref())?;
            for p in &s.pairs {
                println!("{} vs {}: kappa {:.4}", p.a, p.b, p.kappa);
            }
            if let Some(h) = s.human_human_mean {
                println!("mean human/human kappa: {h:.4}");
            }
            if let Some(x) = s.machine_human_mean {
                println!("mean machine/human kappa: {x:.4}");
            }
        }
        Command::Synth {
            dir,
            services,
            days,
        } => {
            let spec = SynthSpec {
                seed: cli.seed.unwrap_or(42),
                services: *services,
                days: *days,
                ..SynthSpec::default()
            };
            let corpus = generate(&spec)?;
            let conf = corpus
                .write(dir)
                .with_context(|| format!("writing demo corpus to {}", dir.display()))?;
            println!(
                "wrote {} messages for {} services; config at {}",
                corpus.emails.len(),
                corpus.services.len(),
                conf.display()
            );
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err
        .chain()
        .find_map(|e| e.downcast_ref::<AuditError>())
        .map(AuditError::kind)
    {
        Some(ErrorKind::Config) => 2,
        Some(ErrorKind::Input) | None => 3,
        Some(ErrorKind::Analysis) => 4,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            // causes already quoted by their parent are skipped
            let mut msg = e.to_string();
            for cause in e.chain().skip(1) {
                let c = cause.to_string();
                if !msg.contains(&c) {
                    msg = format!("{msg}: {c}");
                }
            }
            eprintln!("error: {msg}");
            ExitCode::from(exit_code(&e))
        }
    }
}
