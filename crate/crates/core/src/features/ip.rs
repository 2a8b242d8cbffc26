//! IP address scope and country lookup against an offline CIDR table.

use std::net::IpAddr;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::FeatureError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prefix {
    addr: IpAddr,
    len: u8,
}

impl Prefix {
    pub fn prefix_len(&self) -> u8 {
        self.len
    }

    pub fn contains(&self, ip: &IpAddr) -> bool {
        match (self.addr, ip) {
            (IpAddr::V4(net), IpAddr::V4(ip)) => {
                let mask = mask32(self.len);
                u32::from(net) & mask == u32::from(*ip) & mask
            }
            (IpAddr::V6(net), IpAddr::V6(ip)) => {
                let mask = mask128(self.len);
                u128::from(net) & mask == u128::from(*ip) & mask
            }
            _ => false,
        }
    }
}

fn mask32(len: u8) -> u32 {
    if len == 0 {
        0
    } else {
        u32::MAX << (32 - u32::from(len))
    }
}

fn mask128(len: u8) -> u128 {
    if len == 0 {
        0
    } else {
        u128::MAX << (128 - u32::from(len))
    }
}

impl FromStr for Prefix {
    type Err = FeatureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || FeatureError::BadCidr(s.to_string());
        let (addr, len) = s.trim().split_once('/').ok_or_else(bad)?;
        let addr: IpAddr = addr.parse().map_err(|_| bad())?;
        let len: u8 = len.parse().map_err(|_| bad())?;
        let max = if addr.is_ipv4() { 32 } else { 128 };
        if len > max {
            return Err(bad());
        }
        Ok(Prefix { addr, len })
    }
}

const PRIVATE_RANGES: [&str; 9] = [
    "10.0.0.0/8",
    "172.16.0.0/12",
    "192.168.0.0/16",
    "127.0.0.0/8",
    "169.254.0.0/16",
    "fc00::/7",
    "::1/128",
    "fe80::/10",
    "0.0.0.0/8",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IpScope {
    Private,
    Global,
}

pub const UNKNOWN_COUNTRY: &str = "unknown";

/// Prefix→country table plus the built-in private ranges.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CidrTable {
    entries: Vec<(Prefix, String)>,
}

impl CidrTable {
    pub fn new(entries: Vec<(Prefix, String)>) -> Self {
        Self { entries }
    }

    /// Parses a CSV with header `cidr,country`.
    pub fn from_csv(text: &str) -> Result<Self, FeatureError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        match lines.next().map(|h| h.trim().replace(' ', "")) {
            Some(h) if h.eq_ignore_ascii_case("cidr,country") => {}
            _ => return Err(FeatureError::BadCidrHeader),
        }
        let entries = lines
            .map(|l| {
                let (cidr, country) = l
                    .split_once(',')
                    .ok_or_else(|| FeatureError::BadCidr(l.to_string()))?;
                Ok((cidr.parse()?, country.trim().to_string()))
            })
            .collect::<Result<Vec<_>, FeatureError>>()?;
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[(Prefix, String)] {
        &self.entries
    }

    /// Longest-prefix match; the first listed entry wins among equal lengths.
    pub fn country(&self, ip: &IpAddr) -> &str {
        let mut best: Option<&(Prefix, String)> = None;
        for entry in &self.entries {
            if entry.0.contains(ip) && best.is_none_or(|b| entry.0.len > b.0.len) {
                best = Some(entry);
            }
        }
        best.map_or(UNKNOWN_COUNTRY, |e| e.1.as_str())
    }
}

pub fn scope(ip: &IpAddr) -> IpScope {
    let private = PRIVATE_RANGES
        .iter()
        .map(|r| r.parse::<Prefix>().expect("built-in range"))
        .any(|p| p.contains(ip));
    if private {
        IpScope::Private
    } else {
        IpScope::Global
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IpFeatures {
    pub orig_scope: IpScope,
    pub resp_scope: IpScope,
    pub orig_country: String,
    pub resp_country: String,
}

fn parse_ip(s: &str) -> Result<IpAddr, FeatureError> {
    s.trim()
        .parse()
        .map_err(|_| FeatureError::BadIpSyntax(s.to_string()))
}

/// Scope and country of both endpoints of a flow.
pub fn derive_ip_features(
    orig_h: &str,
    resp_h: &str,
    table: &CidrTable,
) -> Result<IpFeatures, FeatureError> {
    let orig = parse_ip(orig_h)?;
    let resp = parse_ip(resp_h)?;
    Ok(IpFeatures {
        orig_scope: scope(&orig),
        resp_scope: scope(&resp),
        orig_country: table.country(&orig).to_string(),
        resp_country: table.country(&resp).to_string(),
    })
}
