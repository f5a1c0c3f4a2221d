use std::net::IpAddr;

use chrono::{DateTime, FixedOffset, Utc};
use serde::{Deserialize, Serialize};

use super::alias::AliasEntry;
use crate::authlineage::AuthResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParseStatus {
    #[default]
    Ok,
    Unparseable,
}

/// One message of the corpus. `alias = None` is the UNMATCHED binding and
/// `sender_ip = None` means the sender IP is unknown.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EmailRecord {
    pub message_id: String,
    pub alias: Option<AliasEntry>,
    pub from_address: String,
    pub from_root_domain: String,
    pub received_utc: Option<DateTime<Utc>>,
    pub received_local: Option<DateTime<FixedOffset>>,
    pub sender_ip: Option<IpAddr>,
    pub spf: AuthResult,
    pub dkim: AuthResult,
    pub subject: String,
    pub body_text: String,
    pub parse_status: ParseStatus,
}

impl EmailRecord {
    pub fn is_ok(&self) -> bool {
        self.parse_status == ParseStatus::Ok
    }

    pub fn service_name(&self) -> Option<&str> {
        self.alias.as_ref().map(|a| a.service_name.as_str())
    }
}
