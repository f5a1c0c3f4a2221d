//! Seeded demo corpus: raw `.eml` files plus every side input the pipeline
//! reads (alias registry, organisation map, ip2asn snapshot, abuse snapshot,
//! sector map and a config file).

use std::fmt::Write as _;
use std::fs;
use std::net::{IpAddr, Ipv4Addr};
use std::path::{Path, PathBuf};

use chrono::{Datelike, Duration, NaiveDate, NaiveTime, TimeZone, Utc};
use chrono_tz::Tz;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{AuditError, Result};

pub const MX_HOST: &str = "mx.audit.test";
pub const CATCH_ALL_DOMAIN: &str = "catchall.test";

const CATALOG: &[(&str, &str, &str)] = &[
    ("Wayfair", "wayfair.com", "E-tailer"),
    ("Wish", "wish.com", "Online Marketplace"),
    ("Lowes", "lowes.com", "Omnichannel"),
    ("BestBuy", "bestbuy.com", "Omnichannel"),
    ("Kohls", "kohls.com", "Omnichannel"),
    ("Etsy", "etsy.com", "Online Marketplace"),
    ("WebMD", "webmd.com", "Digital Services"),
    ("Adobe", "adobe.com", "Digital Services"),
    ("AliExpress", "aliexpress.com", "E-tailer"),
    ("LinkedIn", "linkedin.com", "Communication Platforms"),
    ("Spotify", "spotify.com", "Online Entertainment"),
    ("Target", "target.com", "Brick and Mortar"),
    ("Chase", "chase.com", "Financials"),
    ("Discord", "discord.com", "Communication Platforms"),
    ("Hulu", "hulu.com", "Online Entertainment"),
    ("Zillow", "zillow.com", "Online Marketplace"),
    ("Airtable", "airtable.com", "Digital Services"),
    ("Temu", "temu.com", "E-tailer"),
    ("Costco", "costco.com", "Brick and Mortar"),
    ("Venmo", "venmo.com", "Financials"),
    ("Twitch", "twitch.tv", "Online Entertainment"),
    ("Slack", "slack.com", "Communication Platforms"),
    ("Shein", "shein.com", "E-tailer"),
    ("Macys", "macys.com", "Omnichannel"),
    ("Dropbox", "dropbox.com", "Digital Services"),
    ("Reddit", "reddit.com", "Communication Platforms"),
    ("Walgreens", "walgreens.com", "Brick and Mortar"),
    ("Netflix", "netflix.com", "Online Entertainment"),
    ("Mercari", "mercari.com", "Online Marketplace"),
    ("Canva", "canva.com", "Digital Services"),
];

/// (asn, organization, first address, prefix length)
const PROVIDERS: &[(u32, &str, [u8; 4], u8)] = &[
    (11377, "SENDGRID", [167, 89, 0, 0], 17),
    (22606, "SALESFORCE-MC", [136, 147, 128, 0], 18),
    (396479, "MAILGUN-TECH", [69, 72, 32, 0], 20),
    (19911, "SPARKPOST", [192, 174, 80, 0], 20),
    (16509, "AMAZON-02", [54, 240, 0, 0], 18),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SendingMode {
    /// Index into the provider list.
    Provider(usize),
    /// Own autonomous system.
    Own,
}

#[derive(Debug, Clone)]
pub struct SynthService {
    pub name: String,
    pub domain: String,
    pub sector: String,
    pub index: u16,
    pub local_part: String,
    pub mode: SendingMode,
    pub own_asn: u32,
    pub ips: Vec<IpAddr>,
    /// Mean messages per day before the weekday factor.
    pub daily_rate: f64,
    pub peak_hour: u32,
    /// Promotional, CRM, alert probabilities.
    pub mix: [f64; 3],
}

#[derive(Debug, Clone)]
pub struct SynthSpec {
    pub seed: u64,
    pub services: usize,
    pub days: u32,
    pub start: NaiveDate,
    /// Expected messages per day over all services.
    pub messages_per_day: f64,
    pub timezone: Tz,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            seed: 42,
            services: 24,
            days: 120,
            start: NaiveDate::from_ymd_opt(2023, 9, 1).expect("date"),
            messages_per_day: 25.0,
            timezone: chrono_tz::America::New_York,
        }
    }
}

/// One generated message before rendering.
#[derive(Debug, Clone)]
pub struct SynthMessage {
    pub message_id: String,
    pub to_local: String,
    pub from_address: String,
    pub subject: String,
    pub body: String,
    pub sender_ip: Option<IpAddr>,
    pub spf_pass: bool,
    pub dkim_pass: bool,
    pub sent: chrono::DateTime<Utc>,
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub services: Vec<SynthService>,
    /// Relative path → file contents for the message files.
    pub emails: Vec<(PathBuf, String)>,
    pub registry_csv: String,
    pub org_map_csv: String,
    pub ip2asn_tsv: String,
    pub abuse_csv: String,
    pub sectors_csv: String,
    pub config: String,
}

const WEEKDAY_FACTOR: [f64; 7] = [1.1, 1.5, 1.0, 1.4, 1.2, 0.5, 0.3];

const PROMO: &[&str] = &[
    "Flash sale: 40% off everything this weekend",
    "Limited time offer, save $20 on your next order",
    "Exclusive deals picked for you, shop now",
    "Last chance: clearance prices end tonight",
    "Free shipping on orders over $35",
];
const CRM: &[&str] = &[
    "Your weekly digest is here",
    "We miss you, see what's new",
    "Tips to get more out of your account",
    "New features we think you'll love",
    "Thanks for being a member",
];
const ALERT: &[&str] = &[
    "Your order has shipped",
    "Security alert: new sign-in to your account",
    "Password reset request",
    "Your receipt for a recent purchase",
    "Verify your email address",
];

fn slug(name: &str) -> String {
    name.chars()
        .filter(|c| c.is_ascii_alphabetic())
        .map(|c| c.to_ascii_lowercase())
        .take(8)
        .collect()
}

fn host_in(base: [u8; 4], offset: u32) -> IpAddr {
    IpAddr::V4(Ipv4Addr::from(u32::from(Ipv4Addr::from(base)) + offset))
}

fn own_prefix(i: usize) -> [u8; 4] {
    [23, 10 + i as u8, 0, 0]
}

fn build_services(spec: &SynthSpec, rng: &mut ChaCha8Rng) -> Result<Vec<SynthService>> {
    if spec.services < 2 || spec.services > CATALOG.len() {
        return Err(AuditError::Range {
            what: "synthetic service count",
            value: spec.services.to_string(),
        });
    }
    let mut picks: Vec<usize> = (0..CATALOG.len()).collect();
    picks[7..].shuffle(rng);
    picks.truncate(spec.services);
    // heavy-tailed volume by rank: the first picks dominate
    let weights: Vec<f64> = (0..spec.services)
        .map(|r| 1.0 / ((r + 1) as f64).powf(1.5))
        .collect();
    let wsum: f64 = weights.iter().sum();
    let heavy = (spec.services * 2).div_ceil(5);
    let mut esp_counter = 0;
    let mut app_index = 100u16;
    let mut services = Vec::new();
    for (rank, &ci) in picks.iter().enumerate() {
        let (name, domain, sector) = CATALOG[ci];
        let mode = if rank < heavy {
            SendingMode::Provider(rank % 2)
        } else {
            esp_counter += 1;
            match esp_counter % 4 {
                0 => SendingMode::Provider(2),
                1 => SendingMode::Own,
                2 => SendingMode::Provider(3 + usize::from(rng.random_bool(0.5))),
                _ => SendingMode::Own,
            }
        };
        let index = if rank % 5 == 4 {
            app_index += 1;
            app_index - 1
        } else {
            rank as u16
        };
        let n_ips = 1 + rng.random_range(0..5) + usize::from(rank < heavy) * 2;
        let ips = (0..n_ips)
            .map(|k| match mode {
                SendingMode::Provider(p) => {
                    host_in(PROVIDERS[p].2, 256 * (rank as u32 + 1) + k as u32 + 10)
                }
                SendingMode::Own => host_in(own_prefix(rank), k as u32 + 10),
            })
            .collect();
        let mix = if rank < heavy {
            [0.8, 0.12, 0.08]
        } else {
            let p = rng.random_range(0.1..0.6);
            let c = rng.random_range(0.1..(1.0 - p));
            [p, c, 1.0 - p - c]
        };
        services.push(SynthService {
            name: name.to_string(),
            domain: domain.to_string(),
            sector: sector.to_string(),
            index,
            local_part: format!("{}{index:03}", slug(name)),
            mode,
            own_asn: 64600 + rank as u32,
            ips,
            daily_rate: spec.messages_per_day * weights[rank] / wsum,
            peak_hour: rng.random_range(6..21),
            mix,
        });
    }
    Ok(services)
}

/// Renders a message the way the audit receiver stores it: an internal hop,
/// the trusted receiver's Received and Authentication-Results headers, then
/// the sender's headers.
pub fn render_eml(m: &SynthMessage) -> String {
    let date = m.sent.to_rfc2822();
    let from_domain = m.from_address.rsplit_once('@').map_or("", |(_, d)| d);
    let mut s = String::new();
    let _ = writeln!(
        s,
        "Received: from {MX_HOST} ([10.0.0.5]) by {MX_HOST} with LMTP; {date}"
    );
    match m.sender_ip {
        Some(ip) => {
            let _ = writeln!(
                s,
                "Received: from mta.{from_domain} (mta.{from_domain} [{ip}]) by {MX_HOST} with ESMTPS; {date}"
            );
        }
        None => {
            let _ = writeln!(s, "Received: from unknown by {MX_HOST} with ESMTP; {date}");
        }
    }
    let verdict = |pass: bool| if pass { "pass" } else { "fail" };
    let _ = writeln!(
        s,
        "Authentication-Results: {MX_HOST}; spf={} smtp.mailfrom={from_domain}; dkim={} header.d={from_domain}",
        verdict(m.spf_pass),
        verdict(m.dkim_pass)
    );
    let _ = writeln!(s, "Delivered-To: {}@{CATCH_ALL_DOMAIN}", m.to_local);
    let _ = writeln!(s, "From: <{}>", m.from_address);
    let _ = writeln!(s, "To: <{}@{CATCH_ALL_DOMAIN}>", m.to_local);
    let _ = writeln!(s, "Subject: {}", m.subject);
    let _ = writeln!(s, "Date: {date}");
    let _ = writeln!(s, "Message-ID: <{}>", m.message_id);
    let _ = writeln!(s, "MIME-Version: 1.0");
    let _ = writeln!(s, "Content-Type: text/plain; charset=utf-8");
    let _ = writeln!(s);
    let _ = writeln!(s, "{}", m.body);
    s.replace('\n', "\r\n")
}

fn body_for(label: usize, service: &str) -> String {
    match label {
        0 => format!("Shop the sale at {service}. Use code SAVE20 at checkout. Unsubscribe any time."),
        1 => format!("Hi there, here is what happened at {service} this week. Manage your preferences."),
        _ => format!("This is an automated notice from {service} about your account. No action is needed if this was you."),
    }
}

/// Generates the demo corpus in memory.
pub fn generate(spec: &SynthSpec) -> Result<SynthCorpus> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let services = build_services(spec, &mut rng)?;
    let mut emails = Vec::new();
    let mut counter = 0u64;
    for day in 0..spec.days {
        let date = spec.start + Duration::days(day as i64);
        let wd = WEEKDAY_FACTOR[date.weekday().num_days_from_monday() as usize];
        for svc in &services {
            let lambda = svc.daily_rate * wd;
            if lambda <= 0.0 {
                continue;
            }
            let n = Poisson::new(lambda)
                .expect("positive rate")
                .sample(&mut rng) as u64;
            for _ in 0..n {
                counter += 1;
                let hour = if rng.random_bool(0.7) {
                    (svc.peak_hour as i32 + rng.random_range(-1..=1)).clamp(0, 23) as u32
                } else {
                    rng.random_range(0..24)
                };
                let t =
                    NaiveTime::from_hms_opt(hour, rng.random_range(0..60), rng.random_range(0..60))
                        .expect("time");
                let local = spec
                    .timezone
                    .from_local_datetime(&date.and_time(t))
                    .earliest()
                    .unwrap_or_else(|| spec.timezone.from_utc_datetime(&date.and_time(t)));
                let u: f64 = rng.random();
                let label = if u < svc.mix[0] {
                    0
                } else if u < svc.mix[0] + svc.mix[1] {
                    1
                } else {
                    2
                };
                let subject = [PROMO, CRM, ALERT][label];
                let subject = subject[rng.random_range(0..subject.len())];
                let mismatched = rng.random_bool(0.03);
                let from_domain = if mismatched {
                    format!("{}-offers.net", slug(&svc.name))
                } else {
                    svc.domain.clone()
                };
                let unmatched = rng.random_bool(0.01);
                let m = SynthMessage {
                    message_id: format!("{counter}.{}@{}", slug(&svc.name), svc.domain),
                    to_local: if unmatched {
                        format!("nobody{:03}", 149 - (counter % 10))
                    } else {
                        svc.local_part.clone()
                    },
                    from_address: format!("news@{from_domain}"),
                    subject: subject.to_string(),
                    body: body_for(label, &svc.name),
                    sender_ip: Some(svc.ips[rng.random_range(0..svc.ips.len())]),
                    spf_pass: rng.random_bool(0.995),
                    dkim_pass: rng.random_bool(0.98),
                    sent: local.with_timezone(&Utc),
                };
                let raw = if rng.random_bool(0.003) {
                    // damaged file: no usable headers
                    format!("\u{0}\u{1}corrupted message {counter}\r\n")
                } else {
                    render_eml(&m)
                };
                let path = PathBuf::from(format!("{:04}-{:02}", date.year(), date.month()))
                    .join(format!("{counter:06}.eml"));
                emails.push((path, raw));
            }
        }
    }

    let mut registry_csv =
        String::from("local_part,index,service_name,service_kind,registration_date\n");
    let mut org_map_csv =
        String::from("service_name,accepted_domains,accepted_asn_org_substrings\n");
    let mut sectors_csv = String::from("service_name,sector\n");
    let registered = spec.start - Duration::days(1);
    for s in &services {
        let kind = if s.index >= 100 {
            "mobile_app"
        } else {
            "online_service"
        };
        let _ = writeln!(
            registry_csv,
            "{},{},{},{kind},{registered}",
            s.local_part, s.index, s.name
        );
        let own_org = format!("{}-NET", slug(&s.name).to_ascii_uppercase());
        let _ = writeln!(
            org_map_csv,
            "{},{},{}",
            s.name,
            s.domain,
            own_org.to_ascii_lowercase()
        );
        let _ = writeln!(sectors_csv, "{},{}", s.name, s.sector);
    }

    let mut ip2asn_tsv = String::new();
    let range = |base: [u8; 4], len: u8| {
        let start = u32::from(Ipv4Addr::from(base));
        (
            Ipv4Addr::from(start),
            Ipv4Addr::from(start + (1u32 << (32 - len)) - 1),
        )
    };
    for (asn, org, base, len) in PROVIDERS {
        let (a, b) = range(*base, *len);
        let _ = writeln!(ip2asn_tsv, "{a}\t{b}\t{asn}\tUS\t{org}");
    }
    for (rank, s) in services.iter().enumerate() {
        if s.mode == SendingMode::Own {
            let (a, b) = range(own_prefix(rank), 16);
            let org = format!("{}-NET", slug(&s.name).to_ascii_uppercase());
            let _ = writeln!(ip2asn_tsv, "{a}\t{b}\t{}\tUS\t{org}", s.own_asn);
        }
    }

    // reports grow with the number of sending IPs; cloud space draws more
    let mut abuse_csv = String::from("ip,total_reports\n");
    for s in &services {
        let per_ip = match s.mode {
            SendingMode::Provider(4) => 6.0,
            SendingMode::Provider(_) => 2.0,
            SendingMode::Own => 0.5,
        };
        for ip in &s.ips {
            let n = Poisson::new(per_ip * s.ips.len() as f64 / 3.0)
                .expect("positive rate")
                .sample(&mut rng) as u64;
            let _ = writeln!(abuse_csv, "{ip},{n}");
        }
    }

    let config = format!(
        "# demo corpus configuration\ncorpus_dir = emails\nregistry = registry.csv\nip2asn = ip2asn.tsv\nabuse = abuse.csv\norg_map = org_map.csv\nsectors = sectors.csv\ntrusted_mx = {MX_HOST}\ntimezone = {}\nseed = {}\noutput_dir = out\n",
        spec.timezone.name(),
        spec.seed
    );

    Ok(SynthCorpus {
        services,
        emails,
        registry_csv,
        org_map_csv,
        ip2asn_tsv,
        abuse_csv,
        sectors_csv,
        config,
    })
}

impl SynthCorpus {
    /// Writes everything under `dir` and returns the config file path.
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let put = |rel: &Path, text: &str| -> Result<()> {
            let path = dir.join(rel);
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent).map_err(|e| AuditError::io(parent, e))?;
            }
            fs::write(&path, text).map_err(|e| AuditError::io(&path, e))
        };
        for (rel, raw) in &self.emails {
            put(&Path::new("emails").join(rel), raw)?;
        }
        put(Path::new("registry.csv"), &self.registry_csv)?;
        put(Path::new("org_map.csv"), &self.org_map_csv)?;
        put(Path::new("ip2asn.tsv"), &self.ip2asn_tsv)?;
        put(Path::new("abuse.csv"), &self.abuse_csv)?;
        put(Path::new("sectors.csv"), &self.sectors_csv)?;
        put(Path::new("audit.conf"), &self.config)?;
        Ok(dir.join("audit.conf"))
    }
}

/// Where a taxonomy-grid message was sent from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NetworkKind {
    Marketing,
    Own,
    Cloud,
    NoAsn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TaxonomyCell {
    pub spf_pass: bool,
    pub dkim_pass: bool,
    pub domain_matches: bool,
    pub network: NetworkKind,
}

impl TaxonomyCell {
    pub fn all() -> Vec<TaxonomyCell> {
        let mut out = Vec::new();
        for spf_pass in [true, false] {
            for dkim_pass in [true, false] {
                for domain_matches in [true, false] {
                    for network in [
                        NetworkKind::Marketing,
                        NetworkKind::Own,
                        NetworkKind::Cloud,
                        NetworkKind::NoAsn,
                    ] {
                        out.push(TaxonomyCell {
                            spf_pass,
                            dkim_pass,
                            domain_matches,
                            network,
                        });
                    }
                }
            }
        }
        out
    }
}

/// Messages cycling through every authentication × domain × network cell
/// for a single service, with the registry, org map and ip2asn text they
/// need. `NoAsn` messages come from a public address absent from the table.
pub struct TaxonomyGrid {
    pub cells: Vec<TaxonomyCell>,
    pub emails: Vec<String>,
    pub registry_csv: String,
    pub org_map_csv: String,
    pub ip2asn_tsv: String,
}

pub fn taxonomy_grid(n: usize, seed: u64) -> TaxonomyGrid {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let all = TaxonomyCell::all();
    let start = Utc
        .with_ymd_and_hms(2023, 10, 2, 12, 0, 0)
        .single()
        .expect("time");
    let mut cells = Vec::with_capacity(n);
    let mut emails = Vec::with_capacity(n);
    for i in 0..n {
        let cell = all[i % all.len()];
        let host = rng.random_range(1..250);
        let ip = match cell.network {
            NetworkKind::Marketing => host_in(PROVIDERS[0].2, host),
            NetworkKind::Own => host_in([23, 50, 0, 0], host),
            NetworkKind::Cloud => host_in(PROVIDERS[4].2, host),
            NetworkKind::NoAsn => host_in([198, 51, 100, 0], host),
        };
        let from = if cell.domain_matches {
            "acme.com"
        } else {
            "bulk-sender.net"
        };
        let m = SynthMessage {
            message_id: format!("grid{i}@{from}"),
            to_local: "acme001".into(),
            from_address: format!("news@{from}"),
            subject: PROMO[i % PROMO.len()].to_string(),
            body: body_for(0, "Acme"),
            sender_ip: Some(ip),
            spf_pass: cell.spf_pass,
            dkim_pass: cell.dkim_pass,
            sent: start + Duration::minutes(i as i64 * 17),
        };
        cells.push(cell);
        emails.push(render_eml(&m));
    }
    TaxonomyGrid {
        cells,
        emails,
        registry_csv: "local_part,index,service_name,service_kind,registration_date\nacme001,1,Acme,online_service,2023-09-01\n".into(),
        org_map_csv: "service_name,accepted_domains,accepted_asn_org_substrings\nAcme,acme.com,acme-net\n".into(),
        ip2asn_tsv: "167.89.0.0\t167.89.127.255\t11377\tUS\tSENDGRID\n23.50.0.0\t23.50.255.255\t64700\tUS\tACME-NET\n54.240.0.0\t54.240.63.255\t16509\tUS\tAMAZON-02\n"
            .into(),
    }
}
