//! Line parsers for the trace files.
//!
//! Flow, DHCP and session files are lossy production logs: a malformed line
//! is skipped and counted. When more than half of the non-blank lines are
//! malformed the whole file is rejected, which is what a wrong delimiter or a
//! wrong file looks like. The domain map is curated and parsed strictly.

use std::io::BufRead;
use std::net::Ipv4Addr;

use crate::error::{Error, Result};
use crate::par::Exec;

use super::types::{
    DhcpLease, DomainMap, FlowRecord, MacAddr, Prefix24, SessionEvent, SessionKind, Timestamp,
    TimestampParser,
};

/// Records from a lossy file plus the number of skipped lines.
#[derive(Debug, Clone, PartialEq)]
pub struct Parsed<T> {
    pub records: Vec<T>,
    pub skipped: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Delimiter {
    /// `|` when the line contains one, otherwise runs of whitespace.
    Auto,
    Char(char),
}

impl Delimiter {
    fn split<'a>(&self, line: &'a str) -> Vec<&'a str> {
        match *self {
            Delimiter::Auto if line.contains('|') => line.split('|').map(str::trim).collect(),
            Delimiter::Auto => line.split_whitespace().collect(),
            Delimiter::Char(c) if c.is_whitespace() => line.split_whitespace().collect(),
            Delimiter::Char(c) => line.split(c).map(str::trim).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FlowFormat {
    pub delimiter: Delimiter,
    /// Skip the first non-blank line.
    pub has_header: bool,
    pub timestamps: TimestampParser,
}

impl Default for FlowFormat {
    fn default() -> Self {
        FlowFormat {
            delimiter: Delimiter::Auto,
            has_header: false,
            timestamps: TimestampParser::default(),
        }
    }
}

fn read_lines<R: BufRead>(reader: R) -> Result<Vec<String>> {
    let mut lines = Vec::new();
    for line in reader.lines() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        lines.push(line);
    }
    Ok(lines)
}

fn collect_lossy<T: Send>(
    what: &str,
    lines: &[String],
    parse: impl Fn(&str) -> Option<T> + Sync + Send,
) -> Result<Parsed<T>> {
    let exec = Exec::default().for_work(lines.len() * 64);
    let parsed = exec.map_slice(lines, |l| parse(l));
    let total = parsed.len();
    let records: Vec<T> = parsed.into_iter().flatten().collect();
    let skipped = total - records.len();
    if skipped * 2 > total {
        return Err(Error::format(
            format!("{what} file"),
            format!("{skipped} of {total} lines are malformed; wrong delimiter or wrong file?"),
        ));
    }
    if skipped > 0 {
        log::warn!("{what}: skipped {skipped} malformed line(s) of {total}");
    }
    Ok(Parsed { records, skipped })
}

/// Parses netflow lines in the collector's column order: start, finish,
/// source IP, source port, destination IP, destination port, protocol, ToS,
/// packet count, flow size in bytes.
pub fn parse_flows<R: BufRead>(reader: R, format: &FlowFormat) -> Result<Parsed<FlowRecord>> {
    let mut lines = read_lines(reader)?;
    if format.has_header && !lines.is_empty() {
        lines.remove(0);
    }
    collect_lossy("flow", &lines, |l| parse_flow_line(l, format))
}

fn parse_flow_line(line: &str, format: &FlowFormat) -> Option<FlowRecord> {
    let f = format.delimiter.split(line);
    if f.len() != 10 {
        return None;
    }
    let start_ts = format.timestamps.parse(f[0])?;
    let finish_ts = format.timestamps.parse(f[1])?;
    let record = FlowRecord {
        start_ts,
        finish_ts,
        src_ip: f[2].parse().ok()?,
        src_port: f[3].parse().ok()?,
        dst_ip: f[4].parse().ok()?,
        dst_port: f[5].parse().ok()?,
        protocol: f[6].parse().ok()?,
        tos: f[7].parse().ok()?,
        packet_count: f[8].parse().ok()?,
        flow_size_bytes: f[9].parse().ok()?,
    };
    let valid = record.finish_ts >= record.start_ts
        && record.packet_count >= 1
        && record.flow_size_bytes >= 1;
    valid.then_some(record)
}

fn csv_fields(line: &str) -> Vec<&str> {
    line.split(',').map(str::trim).collect()
}

/// A first line whose leading field is the column name is a header.
fn drop_header(lines: &mut Vec<String>, first_column: &str) {
    if let Some(first) = lines.first() {
        if csv_fields(first)
            .first()
            .is_some_and(|f| f.eq_ignore_ascii_case(first_column))
        {
            lines.remove(0);
        }
    }
}

/// Parses `mac,ip,lease_start,lease_end`. An empty end, `-`, `open` or
/// `unbounded` marks a lease that is still active.
pub fn parse_leases<R: BufRead>(reader: R, timestamps: TimestampParser) -> Result<Parsed<DhcpLease>> {
    let mut lines = read_lines(reader)?;
    drop_header(&mut lines, "mac");
    collect_lossy("dhcp", &lines, |line| {
        let f = csv_fields(line);
        if f.len() != 4 {
            return None;
        }
        let lease_start = timestamps.parse(f[2])?;
        let lease_end = match f[3].to_ascii_lowercase().as_str() {
            "" | "-" | "open" | "unbounded" => None,
            _ => Some(timestamps.parse(f[3])?),
        };
        if lease_end.is_some_and(|end: Timestamp| end <= lease_start) {
            return None;
        }
        Some(DhcpLease {
            mac: f[0].parse().ok()?,
            ip: f[1].parse::<Ipv4Addr>().ok()?,
            lease_start,
            lease_end,
        })
    })
}

/// Parses `mac,ap_id,building,event,ts` with event `start` or `end`.
pub fn parse_sessions<R: BufRead>(
    reader: R,
    timestamps: TimestampParser,
) -> Result<Parsed<SessionEvent>> {
    let mut lines = read_lines(reader)?;
    drop_header(&mut lines, "mac");
    collect_lossy("session", &lines, |line| {
        let f = csv_fields(line);
        if f.len() != 5 || f[1].is_empty() || f[2].is_empty() {
            return None;
        }
        let event = match f[3].to_ascii_lowercase().as_str() {
            "start" => SessionKind::Start,
            "end" => SessionKind::End,
            _ => return None,
        };
        Some(SessionEvent {
            mac: f[0].parse::<MacAddr>().ok()?,
            ap_id: f[1].to_string(),
            building: f[2].to_string(),
            event,
            ts: timestamps.parse(f[4])?,
        })
    })
}

/// Parses `a.b.c.0/24,domain` lines. Any malformed line is an error.
pub fn parse_domain_map<R: BufRead>(reader: R) -> Result<DomainMap> {
    let mut lines = read_lines(reader)?;
    drop_header(&mut lines, "prefix");
    let mut entries = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate() {
        let f = csv_fields(line);
        let bad = |msg: &str| Error::format("domain map", format!("entry {}: {msg}: `{line}`", i + 1));
        if f.len() != 2 || f[1].is_empty() {
            return Err(bad("expected `a.b.c.0/24,domain`"));
        }
        let prefix: Prefix24 = f[0].parse().map_err(|_| bad("bad prefix"))?;
        entries.push((prefix, f[1].to_string()));
    }
    DomainMap::from_entries(entries).map_err(|e| Error::format("domain map", e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    const ROW1: &str = "0618.00:00:07.184 | 0618.00:00:07.184 | 128.125.253.143 | 53 | 207.151.245.121 | 64209 | 17 | 0 | 1 | 469";

    #[test]
    fn table_row_parses() {
        let out = parse_flows(ROW1.as_bytes(), &FlowFormat::default()).unwrap();
        assert_eq!(out.skipped, 0);
        let r = &out.records[0];
        assert_eq!(r.src_port, 53);
        assert_eq!(r.dst_port, 64209);
        assert_eq!(r.protocol, 17);
        assert_eq!(r.tos, 0);
        assert_eq!(r.packet_count, 1);
        assert_eq!(r.flow_size_bytes, 469);
        assert_eq!(r.src_ip, "128.125.253.143".parse::<Ipv4Addr>().unwrap());
        assert_eq!(r.dst_ip, "207.151.245.121".parse::<Ipv4Addr>().unwrap());
        assert_eq!(r.start_ts, r.finish_ts);
    }

    #[test]
    fn whitespace_rows_parse() {
        let text = "0618.00:00:07.184\t0618.00:00:07.472\t207.151.241.60\t52759\t74.125.19.17\t80\t6\t0\t4\t1789\n";
        let out = parse_flows(text.as_bytes(), &FlowFormat::default()).unwrap();
        assert_eq!(out.records[0].duration_ms(), 288);
        assert_eq!(out.records[0].packet_count, 4);
    }

    #[test]
    fn empty_stream() {
        let out = parse_flows(&b""[..], &FlowFormat::default()).unwrap();
        assert!(out.records.is_empty());
        assert_eq!(out.skipped, 0);
    }

    #[test]
    fn malformed_lines_are_counted() {
        let mut text = String::new();
        for _ in 0..10 {
            text.push_str(ROW1);
            text.push('\n');
        }
        text.push_str("garbage line\n");
        text.push_str("0618.00:00:09.000 | 0618.00:00:08.000 | 1.1.1.1 | 1 | 2.2.2.2 | 2 | 6 | 0 | 1 | 10\n");
        let out = parse_flows(text.as_bytes(), &FlowFormat::default()).unwrap();
        assert_eq!(out.records.len(), 10);
        assert_eq!(out.skipped, 2);
    }

    #[test]
    fn wrong_delimiter_is_a_format_error() {
        let format = FlowFormat {
            delimiter: Delimiter::Char(','),
            ..FlowFormat::default()
        };
        let err = parse_flows(format!("{ROW1}\n{ROW1}\n").as_bytes(), &format).unwrap_err();
        assert!(matches!(err, Error::Format { .. }));
    }

    #[test]
    fn header_is_skipped_on_request() {
        let text = format!("start|finish|src|sport|dst|dport|proto|tos|pkts|bytes\n{ROW1}\n");
        let format = FlowFormat {
            has_header: true,
            ..FlowFormat::default()
        };
        let out = parse_flows(text.as_bytes(), &format).unwrap();
        assert_eq!((out.records.len(), out.skipped), (1, 0));
    }

    #[test]
    fn leases_and_sessions() {
        let ts = TimestampParser::default();
        let leases = parse_leases(
            "mac,ip,lease_start,lease_end\naa:bb:cc:dd:ee:ff,10.0.0.1,2008-03-01T00:00:00Z,\naa:bb:cc:dd:ee:ff,10.0.0.2,2008-03-01T00:00:00Z,2008-03-02T00:00:00Z\n"
                .as_bytes(),
            ts,
        )
        .unwrap();
        assert_eq!(leases.records.len(), 2);
        assert!(leases.records[0].lease_end.is_none());

        let sessions = parse_sessions(
            "aa:bb:cc:dd:ee:ff,ap1,KAT,start,2008-03-01T00:00:00Z\naa:bb:cc:dd:ee:ff,ap1,KAT,stop,2008-03-01T00:00:00Z\naa:bb:cc:dd:ee:ff,ap1,KAT,end,2008-03-01T01:00:00Z\n"
                .as_bytes(),
            ts,
        )
        .unwrap();
        assert_eq!(sessions.records.len(), 2);
        assert_eq!(sessions.skipped, 1);
    }

    #[test]
    fn domain_map_is_strict() {
        let map = parse_domain_map("74.125.19.0/24,google\n66.102.7.0/24,google\n".as_bytes()).unwrap();
        assert_eq!(map.len(), 2);
        assert!(parse_domain_map("74.125.19.0/24\n".as_bytes()).is_err());
        assert!(parse_domain_map("74.125.19.0/24,a\n74.125.19.0/24,b\n".as_bytes()).is_err());
    }
}
