use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::par::Exec;
use crate::textfmt::fmt_f64;

use super::index::{LeaseIndex, SessionIndex};
use super::types::{DomainMap, FlowRecord, MacAddr, Period, Prefix24, UsageRecord, UNKNOWN_BUILDING};

/// Minimum flows per destination /24 prefix.
pub const DEFAULT_PREFIX_THRESHOLD: u64 = 100_000;
/// Number of most active domains kept.
pub const DEFAULT_TOP_DOMAINS: usize = 100;

pub const USAGE_HEADER: &str = "user,domain,building,period,online_minutes";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AggregateConfig {
    pub prefix_threshold: u64,
    pub top_domains: usize,
}

impl Default for AggregateConfig {
    fn default() -> Self {
        AggregateConfig {
            prefix_threshold: DEFAULT_PREFIX_THRESHOLD,
            top_domains: DEFAULT_TOP_DOMAINS,
        }
    }
}

/// Destination prefixes that received at least `threshold` flows.
pub fn filter_prefixes(flows: &[FlowRecord], threshold: u64) -> BTreeSet<Prefix24> {
    let mut counts: HashMap<Prefix24, u64> = HashMap::new();
    for f in flows {
        *counts.entry(f.dst_prefix()).or_default() += 1;
    }
    counts
        .into_iter()
        .filter(|&(_, c)| c >= threshold)
        .map(|(p, _)| p)
        .collect()
}

/// Where every flow went. Durations are kept in integer milliseconds so the
/// conservation identity holds exactly.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AggregateReport {
    pub total_flows: usize,
    pub passing_prefixes: usize,
    pub below_threshold_flows: usize,
    pub unresolved_domain_flows: usize,
    pub outside_top_flows: usize,
    /// Flows on a passing prefix whose domain is in the top set.
    pub considered_flows: usize,
    pub considered_ms: u64,
    pub unresolved_user_flows: usize,
    pub unresolved_user_ms: u64,
    pub unknown_location_flows: usize,
    pub output_ms: u64,
    pub output_records: usize,
    /// Selected domains, most active first.
    pub top_domains: Vec<String>,
}

impl AggregateReport {
    /// Output time plus dropped time equals the time of all considered flows.
    pub fn is_conserved(&self) -> bool {
        self.output_ms + self.unresolved_user_ms == self.considered_ms
    }
}

impl fmt::Display for AggregateReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "total_flows={}", self.total_flows)?;
        writeln!(f, "passing_prefixes={}", self.passing_prefixes)?;
        writeln!(f, "below_threshold_flows={}", self.below_threshold_flows)?;
        writeln!(f, "unresolved_domain_flows={}", self.unresolved_domain_flows)?;
        writeln!(f, "outside_top_flows={}", self.outside_top_flows)?;
        writeln!(f, "considered_flows={}", self.considered_flows)?;
        writeln!(f, "considered_ms={}", self.considered_ms)?;
        writeln!(f, "unresolved_user_flows={}", self.unresolved_user_flows)?;
        writeln!(f, "unresolved_user_ms={}", self.unresolved_user_ms)?;
        writeln!(f, "unknown_location_flows={}", self.unknown_location_flows)?;
        writeln!(f, "output_ms={}", self.output_ms)?;
        writeln!(f, "output_records={}", self.output_records)?;
        writeln!(f, "conserved={}", self.is_conserved())?;
        writeln!(f, "top_domains={}", self.top_domains.join(" "))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Aggregation {
    /// Sorted by (user, domain, building, period).
    pub records: Vec<UsageRecord>,
    pub report: AggregateReport,
}

type GroupKey = (MacAddr, String, String, Period);

/// Joins flows to users, domains and buildings and sums online time per
/// (user, domain, building, month).
///
/// Flows on prefixes below the threshold, with no domain, or outside the
/// `top_domains` most active domains (by flow count, ties by name) are not
/// considered. Considered flows with no user are dropped and counted; flows
/// with no location are kept under [`UNKNOWN_BUILDING`].
pub fn aggregate_usage(
    flows: &[FlowRecord],
    leases: &LeaseIndex,
    sessions: &SessionIndex,
    domains: &DomainMap,
    config: &AggregateConfig,
) -> Result<Aggregation> {
    if config.prefix_threshold == 0 || config.top_domains == 0 {
        return Err(Error::InvalidArgument(
            "prefix threshold and top-domain count must be positive".into(),
        ));
    }
    let mut report = AggregateReport {
        total_flows: flows.len(),
        ..AggregateReport::default()
    };
    let passing = filter_prefixes(flows, config.prefix_threshold);
    report.passing_prefixes = passing.len();

    let mut domain_counts: HashMap<&str, u64> = HashMap::new();
    let mut candidates: Vec<(&FlowRecord, &str)> = Vec::new();
    for f in flows {
        let prefix = f.dst_prefix();
        if !passing.contains(&prefix) {
            report.below_threshold_flows += 1;
            continue;
        }
        match domains.lookup(prefix) {
            Some(d) => {
                *domain_counts.entry(d).or_default() += 1;
                candidates.push((f, d));
            }
            None => report.unresolved_domain_flows += 1,
        }
    }

    let mut ranked: Vec<(&str, u64)> = domain_counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    ranked.truncate(config.top_domains);
    let top: BTreeSet<&str> = ranked.iter().map(|&(d, _)| d).collect();
    report.top_domains = ranked.iter().map(|&(d, _)| d.to_string()).collect();

    candidates.retain(|&(_, d)| {
        let keep = top.contains(d);
        if !keep {
            report.outside_top_flows += 1;
        }
        keep
    });

    let exec = Exec::default().for_work(candidates.len() * 32);
    let resolved = exec.map_slice(&candidates, |&(f, d)| {
        let user = leases.lookup(f.src_ip, f.start_ts)?;
        let building = sessions.lookup(&user, f.start_ts);
        Some((user, d, building, Period::of(f.start_ts)))
    });

    let mut groups: BTreeMap<GroupKey, u64> = BTreeMap::new();
    for (&(f, _), r) in candidates.iter().zip(resolved) {
        let ms = f.duration_ms();
        report.considered_flows += 1;
        report.considered_ms += ms;
        let Some((user, domain, building, period)) = r else {
            report.unresolved_user_flows += 1;
            report.unresolved_user_ms += ms;
            continue;
        };
        let building = building.unwrap_or_else(|| {
            report.unknown_location_flows += 1;
            UNKNOWN_BUILDING
        });
        report.output_ms += ms;
        *groups
            .entry((user, domain.to_string(), building.to_string(), period))
            .or_default() += ms;
    }

    let records: Vec<UsageRecord> = groups
        .into_iter()
        .map(|((user, domain, building, period), ms)| UsageRecord {
            user,
            domain,
            building,
            period,
            online_minutes: ms as f64 / 60_000.0,
        })
        .collect();
    report.output_records = records.len();
    if records.is_empty() {
        log::warn!("aggregation produced no usage records");
    }
    Ok(Aggregation { records, report })
}

/// Writes records as `user,domain,building,period,online_minutes` with a
/// header line.
pub fn write_usage_records<W: Write>(mut out: W, records: &[UsageRecord]) -> Result<()> {
    writeln!(out, "{USAGE_HEADER}")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.user,
            r.domain,
            r.building,
            r.period,
            fmt_f64(r.online_minutes)
        )?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a usage file written by [`write_usage_records`].
pub fn read_usage_records<R: BufRead>(reader: R) -> Result<Vec<UsageRecord>> {
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || (i == 0 && line == USAGE_HEADER) {
            continue;
        }
        let bad = |msg: &str| Error::format("usage file", format!("line {}: {msg}", i + 1));
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 5 {
            return Err(bad("expected 5 fields"));
        }
        let online_minutes: f64 = f[4].parse().map_err(|_| bad("bad minutes"))?;
        if !(online_minutes >= 0.0) || !online_minutes.is_finite() {
            return Err(bad("minutes must be finite and non-negative"));
        }
        records.push(UsageRecord {
            user: f[0].parse().map_err(|_| bad("bad user"))?,
            domain: f[1].to_string(),
            building: f[2].to_string(),
            period: f[3].parse().map_err(|_| bad("bad period"))?,
            online_minutes,
        });
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{DhcpLease, SessionEvent, SessionKind, Timestamp};

    const MIN: i64 = 60_000;
    const MARCH: i64 = 1_204_329_600_000; // 2008-03-01T00:00:00Z

    fn flow(src: &str, dst: &str, start: i64, dur: i64) -> FlowRecord {
        FlowRecord {
            start_ts: Timestamp(start),
            finish_ts: Timestamp(start + dur),
            src_ip: src.parse().unwrap(),
            src_port: 40000,
            dst_ip: dst.parse().unwrap(),
            dst_port: 80,
            protocol: 6,
            tos: 0,
            packet_count: 3,
            flow_size_bytes: 900,
        }
    }

    fn world() -> (LeaseIndex, SessionIndex, DomainMap) {
        let m: MacAddr = "00:00:00:00:00:01".parse().unwrap();
        let leases = LeaseIndex::new(&[DhcpLease {
            mac: m,
            ip: "10.0.0.1".parse().unwrap(),
            lease_start: Timestamp(MARCH),
            lease_end: None,
        }]);
        let sessions = SessionIndex::new(&[
            SessionEvent {
                mac: m,
                ap_id: "ap1".into(),
                building: "KAT".into(),
                event: SessionKind::Start,
                ts: Timestamp(MARCH),
            },
            SessionEvent {
                mac: m,
                ap_id: "ap1".into(),
                building: "KAT".into(),
                event: SessionKind::End,
                ts: Timestamp(MARCH + 60 * MIN),
            },
        ]);
        let domains = DomainMap::from_entries([
            ("1.1.1.0/24".parse().unwrap(), "alpha".to_string()),
            ("2.2.2.0/24".parse().unwrap(), "beta".to_string()),
        ])
        .unwrap();
        (leases, sessions, domains)
    }

    fn cfg(threshold: u64, top: usize) -> AggregateConfig {
        AggregateConfig {
            prefix_threshold: threshold,
            top_domains: top,
        }
    }

    #[test]
    fn prefix_filter_counts() {
        let flows = vec![
            flow("10.0.0.1", "1.1.1.1", 0, 0),
            flow("10.0.0.1", "1.1.1.2", 0, 0),
            flow("10.0.0.1", "1.1.1.3", 0, 0),
            flow("10.0.0.1", "2.2.2.2", 0, 0),
        ];
        let a: Prefix24 = "1.1.1.0/24".parse().unwrap();
        assert_eq!(filter_prefixes(&flows, 2), BTreeSet::from([a]));
        assert_eq!(filter_prefixes(&flows[..1], 1), BTreeSet::from([a]));
        assert!(filter_prefixes(&[], 1).is_empty());
        assert_eq!(AggregateConfig::default().prefix_threshold, 100_000);
    }

    #[test]
    fn single_flow_becomes_minutes() {
        let (l, s, d) = world();
        let out = aggregate_usage(&[flow("10.0.0.1", "1.1.1.1", MARCH + MIN, 120_000)], &l, &s, &d, &cfg(1, 10)).unwrap();
        assert_eq!(out.records.len(), 1);
        let r = &out.records[0];
        assert_eq!(r.online_minutes, 2.0);
        assert_eq!(r.building, "KAT");
        assert_eq!(r.domain, "alpha");
        assert_eq!(r.period.to_string(), "2008-03");
    }

    #[test]
    fn additive_groups() {
        let (l, s, d) = world();
        let flows = [
            flow("10.0.0.1", "1.1.1.1", MARCH + MIN, 60_000),
            flow("10.0.0.1", "1.1.1.9", MARCH + 5 * MIN, 60_000),
        ];
        let out = aggregate_usage(&flows, &l, &s, &d, &cfg(1, 10)).unwrap();
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.records[0].online_minutes, 2.0);
    }

    #[test]
    fn top_n_by_flow_count() {
        let (l, s, d) = world();
        let mut flows = Vec::new();
        for i in 0..10 {
            flows.push(flow("10.0.0.1", "1.1.1.1", MARCH + i * MIN, 1000));
        }
        for i in 0..2 {
            flows.push(flow("10.0.0.1", "2.2.2.2", MARCH + i * MIN, 1000));
        }
        let out = aggregate_usage(&flows, &l, &s, &d, &cfg(1, 1)).unwrap();
        assert!(out.records.iter().all(|r| r.domain == "alpha"));
        assert_eq!(out.report.outside_top_flows, 2);
        assert_eq!(out.report.top_domains, vec!["alpha".to_string()]);
    }

    #[test]
    fn drops_and_unknowns_are_counted() {
        let (l, s, d) = world();
        let flows = [
            flow("10.0.0.1", "1.1.1.1", MARCH + 90 * MIN, 30_000), // outside session
            flow("10.0.0.9", "1.1.1.1", MARCH + MIN, 45_000),      // no lease
            flow("10.0.0.1", "9.9.9.9", MARCH + MIN, 10_000),      // no domain
        ];
        let out = aggregate_usage(&flows, &l, &s, &d, &cfg(1, 10)).unwrap();
        let r = &out.report;
        assert_eq!(out.records[0].building, UNKNOWN_BUILDING);
        assert_eq!(r.unknown_location_flows, 1);
        assert_eq!((r.unresolved_user_flows, r.unresolved_user_ms), (1, 45_000));
        assert_eq!(r.unresolved_domain_flows, 1);
        assert_eq!(r.considered_ms, 75_000);
        assert!(r.is_conserved());
    }

    #[test]
    fn empty_join_is_not_an_error() {
        let (l, s, d) = world();
        let out = aggregate_usage(&[], &l, &s, &d, &cfg(1, 10)).unwrap();
        assert!(out.records.is_empty());
        assert!(aggregate_usage(&[], &l, &s, &d, &cfg(0, 10)).is_err());
    }

    #[test]
    fn usage_file_round_trip() {
        let (l, s, d) = world();
        let out = aggregate_usage(&[flow("10.0.0.1", "1.1.1.1", MARCH + MIN, 7_777)], &l, &s, &d, &cfg(1, 10)).unwrap();
        let mut buf = Vec::new();
        write_usage_records(&mut buf, &out.records).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(USAGE_HEADER));
        let back = read_usage_records(&buf[..]).unwrap();
        assert_eq!(back, out.records);
        assert!(read_usage_records("a,b\n".as_bytes()).is_err());
    }
}
