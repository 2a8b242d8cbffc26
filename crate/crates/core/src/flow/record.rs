use std::fmt;

use serde::{Deserialize, Serialize};

/// Transport protocol of a connection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Proto {
    Tcp,
    Udp,
    Icmp,
    Other,
}

impl Proto {
    pub fn parse(token: &str) -> Proto {
        match token.to_ascii_lowercase().as_str() {
            "tcp" => Proto::Tcp,
            "udp" => Proto::Udp,
            "icmp" => Proto::Icmp,
            _ => Proto::Other,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Proto::Tcp => "tcp",
            Proto::Udp => "udp",
            Proto::Icmp => "icmp",
            Proto::Other => "other",
        }
    }
}

impl fmt::Display for Proto {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One row of a labeled connection log. `None` marks an unset (`-`) value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawFlowRecord {
    pub ts: f64,
    pub uid: String,
    pub orig_h: String,
    pub orig_p: u16,
    pub resp_h: String,
    pub resp_p: u16,
    pub proto: Proto,
    pub service: Option<String>,
    pub duration: Option<f64>,
    pub orig_bytes: Option<u64>,
    pub resp_bytes: Option<u64>,
    pub conn_state: String,
    pub local_orig: Option<bool>,
    pub local_resp: Option<bool>,
    pub missed_bytes: Option<u64>,
    pub history: Option<String>,
    pub orig_pkts: Option<u64>,
    pub orig_ip_bytes: Option<u64>,
    pub resp_pkts: Option<u64>,
    pub resp_ip_bytes: Option<u64>,
    pub tunnel_parents: Option<String>,
    pub raw_label: Option<String>,
    pub raw_detailed_label: Option<String>,
}

impl RawFlowRecord {
    /// True when no numeric field and no service value is unset.
    pub fn is_complete(&self) -> bool {
        self.service.is_some()
            && self.duration.is_some()
            && self.orig_bytes.is_some()
            && self.resp_bytes.is_some()
            && self.local_orig.is_some()
            && self.local_resp.is_some()
            && self.missed_bytes.is_some()
            && self.orig_pkts.is_some()
            && self.orig_ip_bytes.is_some()
            && self.resp_pkts.is_some()
            && self.resp_ip_bytes.is_some()
    }
}

pub const UNKNOWN_SERVICE: &str = "unknown";

/// Replaces every unset numeric field with zero and an unset service with
/// `"unknown"`. Tri-state booleans count as numeric (unset becomes false).
pub fn impute_missing(mut record: RawFlowRecord) -> RawFlowRecord {
    record.service.get_or_insert_with(|| UNKNOWN_SERVICE.to_string());
    record.duration.get_or_insert(0.0);
    for field in [
        &mut record.orig_bytes,
        &mut record.resp_bytes,
        &mut record.missed_bytes,
        &mut record.orig_pkts,
        &mut record.orig_ip_bytes,
        &mut record.resp_pkts,
        &mut record.resp_ip_bytes,
    ] {
        field.get_or_insert(0);
    }
    record.local_orig.get_or_insert(false);
    record.local_resp.get_or_insert(false);
    record
}
