//! Sender network intelligence: IP→ASN lookup from an offline snapshot,
//! marketing-provider flags, abuse-report counts and per-service profiles.

mod abuse;
mod block;
mod profiles;
mod table;

pub use abuse::{
    abuse_reports_from_reader, load_abuse_reports, write_abuse_reports, AbuseClient, AbuseReports,
};
pub use block::{is_reserved, BlockError, IpBlock};
pub use profiles::{
    asn_volume_concentration, build_sender_profiles, bundled_providers, flag_marketing_asn,
    ip_hopping_correlation, load_provider_list, parse_provider_list, AsnConcentration, AsnVolume,
    FlowEdge, HoppingCorrelation, SenderNetwork, SenderProfile, TreemapLeaf, TreemapNode,
    UNROUTED_LABEL,
};
pub use table::{load_ip2asn, lookup_asn, AsnLookup, AsnRecord, AsnTable};
