use std::collections::BTreeMap;
use std::fmt;
use std::net::Ipv4Addr;
use std::str::FromStr;

use chrono::{DateTime, Datelike, NaiveDate, NaiveDateTime, NaiveTime};

use crate::error::{Error, Result};

/// Building recorded for flows whose location cannot be resolved.
pub const UNKNOWN_BUILDING: &str = "UNKNOWN";

/// Milliseconds since the Unix epoch, UTC.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Timestamp(pub i64);

impl Timestamp {
    pub fn from_millis(ms: i64) -> Self {
        Timestamp(ms)
    }

    pub fn millis(self) -> i64 {
        self.0
    }
}

/// Parses the two accepted timestamp spellings.
///
/// The trace form `MMDD.HH:MM:SS.mmm` carries no year, so it is completed
/// with `base_year`. ISO-8601 values (`2008-03-01T10:00:00Z`, with an offset,
/// or without zone which is read as UTC) are also accepted.
#[derive(Debug, Clone, Copy)]
pub struct TimestampParser {
    pub base_year: i32,
}

impl Default for TimestampParser {
    fn default() -> Self {
        TimestampParser { base_year: 2008 }
    }
}

impl TimestampParser {
    pub fn new(base_year: i32) -> Self {
        TimestampParser { base_year }
    }

    pub fn parse(&self, raw: &str) -> Option<Timestamp> {
        let raw = raw.trim();
        if raw.contains('-') {
            return parse_iso(raw);
        }
        let (date, time) = raw.split_once('.')?;
        if date.len() != 4 || !date.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        let month: u32 = date[..2].parse().ok()?;
        let day: u32 = date[2..].parse().ok()?;
        let date = NaiveDate::from_ymd_opt(self.base_year, month, day)?;
        let time = NaiveTime::parse_from_str(time, "%H:%M:%S%.f").ok()?;
        Some(Timestamp(date.and_time(time).and_utc().timestamp_millis()))
    }
}

fn parse_iso(raw: &str) -> Option<Timestamp> {
    if let Ok(dt) = DateTime::parse_from_rfc3339(raw) {
        return Some(Timestamp(dt.timestamp_millis()));
    }
    for pattern in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(raw, pattern) {
            return Some(Timestamp(dt.and_utc().timestamp_millis()));
        }
    }
    None
}

/// Calendar month in UTC.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Period {
    pub year: i32,
    pub month: u32,
}

impl Period {
    pub fn of(ts: Timestamp) -> Period {
        let dt = DateTime::from_timestamp_millis(ts.0).unwrap_or_default();
        Period {
            year: dt.year(),
            month: dt.month(),
        }
    }
}

impl fmt::Display for Period {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for Period {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("period `{s}` is not YYYY-MM"));
        let (y, m) = s.trim().split_once('-').ok_or_else(bad)?;
        let year: i32 = y.parse().map_err(|_| bad())?;
        let month: u32 = m.parse().map_err(|_| bad())?;
        if !(1..=12).contains(&month) {
            return Err(bad());
        }
        Ok(Period { year, month })
    }
}

/// 48-bit hardware address; the user identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MacAddr(pub [u8; 6]);

impl fmt::Display for MacAddr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let b = self.0;
        write!(
            f,
            "{:02x}:{:02x}:{:02x}:{:02x}:{:02x}:{:02x}",
            b[0], b[1], b[2], b[3], b[4], b[5]
        )
    }
}

impl FromStr for MacAddr {
    type Err = Error;

    /// Accepts `:` or `-` separated hex octets in either case.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("`{s}` is not a MAC address"));
        let mut out = [0u8; 6];
        let mut parts = s.trim().split([':', '-']);
        for byte in out.iter_mut() {
            let part = parts.next().ok_or_else(bad)?;
            if part.len() != 2 {
                return Err(bad());
            }
            *byte = u8::from_str_radix(part, 16).map_err(|_| bad())?;
        }
        if parts.next().is_some() {
            return Err(bad());
        }
        Ok(MacAddr(out))
    }
}

/// The first 24 bits of an IPv4 address.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Prefix24(pub u32);

impl Prefix24 {
    pub fn of(ip: Ipv4Addr) -> Prefix24 {
        Prefix24(u32::from(ip) >> 8)
    }
}

impl fmt::Display for Prefix24 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/24", Ipv4Addr::from(self.0 << 8))
    }
}

impl FromStr for Prefix24 {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("`{s}` is not an a.b.c.0/24 prefix"));
        let (addr, len) = s.trim().split_once('/').ok_or_else(bad)?;
        if len != "24" {
            return Err(bad());
        }
        let ip: Ipv4Addr = addr.parse().map_err(|_| bad())?;
        Ok(Prefix24::of(ip))
    }
}

/// One netflow line: columns follow the collector's export order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowRecord {
    pub start_ts: Timestamp,
    pub finish_ts: Timestamp,
    pub src_ip: Ipv4Addr,
    pub src_port: u16,
    pub dst_ip: Ipv4Addr,
    pub dst_port: u16,
    pub protocol: u8,
    pub tos: u8,
    pub packet_count: u64,
    pub flow_size_bytes: u64,
}

impl FlowRecord {
    pub fn duration_ms(&self) -> u64 {
        (self.finish_ts.0 - self.start_ts.0) as u64
    }

    pub fn dst_prefix(&self) -> Prefix24 {
        Prefix24::of(self.dst_ip)
    }
}

/// A DHCP assignment of `ip` to `mac`. `lease_end == None` is an open lease.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DhcpLease {
    pub mac: MacAddr,
    pub ip: Ipv4Addr,
    pub lease_start: Timestamp,
    pub lease_end: Option<Timestamp>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum SessionKind {
    Start,
    End,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionEvent {
    pub mac: MacAddr,
    pub ap_id: String,
    pub building: String,
    pub event: SessionKind,
    pub ts: Timestamp,
}

/// Static /24-prefix to domain-name mapping.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DomainMap {
    entries: BTreeMap<Prefix24, String>,
}

impl DomainMap {
    /// Fails on a duplicate prefix.
    pub fn from_entries(entries: impl IntoIterator<Item = (Prefix24, String)>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (prefix, domain) in entries {
            if map.insert(prefix, domain).is_some() {
                return Err(Error::InvalidArgument(format!(
                    "duplicate prefix {prefix} in domain map"
                )));
            }
        }
        Ok(DomainMap { entries: map })
    }

    pub fn lookup(&self, prefix: Prefix24) -> Option<&str> {
        self.entries.get(&prefix).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Total online time of one user on one domain in one building and month.
#[derive(Debug, Clone, PartialEq)]
pub struct UsageRecord {
    pub user: MacAddr,
    pub domain: String,
    pub building: String,
    pub period: Period,
    pub online_minutes: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trace_timestamp_uses_base_year() {
        let p = TimestampParser::new(2008);
        let ts = p.parse("0618.00:00:07.184").unwrap();
        let iso = p.parse("2008-06-18T00:00:07.184Z").unwrap();
        assert_eq!(ts, iso);
        assert_eq!(Period::of(ts).to_string(), "2008-06");
        assert!(p.parse("1318.00:00:07.184").is_none());
        assert!(p.parse("0618-00:00").is_none());
    }

    #[test]
    fn iso_forms() {
        let p = TimestampParser::default();
        let a = p.parse("2008-03-01T10:00:00Z").unwrap();
        let b = p.parse("2008-03-01 10:00:00").unwrap();
        let c = p.parse("2008-03-01T12:00:00+02:00").unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
    }

    #[test]
    fn month_is_utc() {
        let p = TimestampParser::default();
        let ts = p.parse("2008-03-31T23:30:00-02:00").unwrap();
        assert_eq!(Period::of(ts).to_string(), "2008-04");
    }

    #[test]
    fn mac_canonical_form() {
        let m: MacAddr = "00-1A-2B-3C-4D-5E".parse().unwrap();
        assert_eq!(m.to_string(), "00:1a:2b:3c:4d:5e");
        assert!("00:1a:2b:3c:4d".parse::<MacAddr>().is_err());
        assert!("00:1a:2b:3c:4d:5e:6f".parse::<MacAddr>().is_err());
    }

    #[test]
    fn prefix_round_trip() {
        let p: Prefix24 = "74.125.19.0/24".parse().unwrap();
        assert_eq!(p, Prefix24::of("74.125.19.17".parse().unwrap()));
        assert_eq!(p.to_string(), "74.125.19.0/24");
        assert!("74.125.19.0/16".parse::<Prefix24>().is_err());
    }

    #[test]
    fn duplicate_prefixes_rejected() {
        let p: Prefix24 = "1.2.3.0/24".parse().unwrap();
        assert!(DomainMap::from_entries([(p, "a".into()), (p, "b".into())]).is_err());
    }
}
