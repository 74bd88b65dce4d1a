//! Interval indexes answering "which MAC held this IP at time t" and "where
//! was this MAC at time t". All intervals are closed on both ends.

use std::collections::{BTreeMap, HashMap};
use std::net::Ipv4Addr;

use super::types::{DhcpLease, FlowRecord, MacAddr, SessionEvent, SessionKind, Timestamp};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct LeaseSpan {
    start: Timestamp,
    /// `None` is unbounded.
    end: Option<Timestamp>,
    mac: MacAddr,
}

impl LeaseSpan {
    fn covers(&self, t: Timestamp) -> bool {
        self.start <= t && self.end.is_none_or(|e| t <= e)
    }
}

/// Leases grouped by IP, sorted by start and made non-overlapping.
#[derive(Debug, Clone, Default)]
pub struct LeaseIndex {
    by_ip: HashMap<Ipv4Addr, Vec<LeaseSpan>>,
}

impl LeaseIndex {
    /// Normalizes overlaps per IP: overlapping leases of the same MAC are
    /// merged (renewals); otherwise the earlier lease is cut at the start of
    /// the later one.
    pub fn new(leases: &[DhcpLease]) -> Self {
        let mut by_ip: HashMap<Ipv4Addr, Vec<LeaseSpan>> = HashMap::new();
        for l in leases {
            by_ip.entry(l.ip).or_default().push(LeaseSpan {
                start: l.lease_start,
                end: l.lease_end,
                mac: l.mac,
            });
        }
        for spans in by_ip.values_mut() {
            spans.sort_by_key(|s| (s.start, s.end.is_none(), s.end, s.mac));
            let mut merged: Vec<LeaseSpan> = Vec::with_capacity(spans.len());
            for span in spans.drain(..) {
                if let Some(prev) = merged.last_mut() {
                    if prev.covers(span.start) {
                        if prev.mac == span.mac {
                            prev.end = match (prev.end, span.end) {
                                (Some(a), Some(b)) => Some(a.max(b)),
                                _ => None,
                            };
                            continue;
                        }
                        if prev.start == span.start {
                            merged.pop();
                        } else {
                            prev.end = Some(span.start);
                        }
                    }
                }
                merged.push(span);
            }
            *spans = merged;
        }
        LeaseIndex { by_ip }
    }

    /// MAC whose lease on `ip` covers `t`. At a shared boundary the later
    /// lease wins.
    pub fn lookup(&self, ip: Ipv4Addr, t: Timestamp) -> Option<MacAddr> {
        let spans = self.by_ip.get(&ip)?;
        let idx = spans.partition_point(|s| s.start <= t);
        let span = spans[..idx].last()?;
        span.covers(t).then_some(span.mac)
    }
}

/// Matches a flow to a user by its source IP at the flow's start time.
pub fn resolve_user(flow: &FlowRecord, leases: &LeaseIndex) -> Option<MacAddr> {
    leases.lookup(flow.src_ip, flow.start_ts)
}

/// A repaired association of one MAC with one access point.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionInterval {
    pub start: Timestamp,
    pub end: Timestamp,
    pub ap_id: String,
    pub building: String,
}

/// Session intervals per MAC, sorted by start.
#[derive(Debug, Clone, Default)]
pub struct SessionIndex {
    by_mac: HashMap<MacAddr, Vec<SessionInterval>>,
    repaired: usize,
}

impl SessionIndex {
    /// Pairs start/end events per (mac, ap). A start that is still open when
    /// the next start for the same pair arrives is closed at that start; an
    /// end without an open start is dropped; a start left open at the end of
    /// the log is dropped.
    pub fn new(events: &[SessionEvent]) -> Self {
        let mut streams: BTreeMap<(MacAddr, &str), Vec<&SessionEvent>> = BTreeMap::new();
        for e in events {
            streams.entry((e.mac, e.ap_id.as_str())).or_default().push(e);
        }
        let mut by_mac: HashMap<MacAddr, Vec<SessionInterval>> = HashMap::new();
        let mut repaired = 0;
        for ((mac, ap), mut stream) in streams {
            // starts before ends at the same tick, so input order never matters
            stream.sort_by(|a, b| (a.ts, a.event, &a.building).cmp(&(b.ts, b.event, &b.building)));
            let out = by_mac.entry(mac).or_default();
            let mut open: Option<&SessionEvent> = None;
            for e in stream {
                match (e.event, open) {
                    (SessionKind::Start, Some(s)) => {
                        repaired += 1;
                        out.push(interval(s, e.ts, ap));
                        open = Some(e);
                    }
                    (SessionKind::Start, None) => open = Some(e),
                    (SessionKind::End, Some(s)) => {
                        out.push(interval(s, e.ts, ap));
                        open = None;
                    }
                    (SessionKind::End, None) => repaired += 1,
                }
            }
            if open.is_some() {
                repaired += 1;
            }
        }
        for intervals in by_mac.values_mut() {
            intervals.sort_by(|a, b| {
                (a.start, &a.ap_id, a.end).cmp(&(b.start, &b.ap_id, b.end))
            });
        }
        SessionIndex { by_mac, repaired }
    }

    /// Number of events that needed repair.
    pub fn repaired_events(&self) -> usize {
        self.repaired
    }

    pub fn intervals(&self, mac: &MacAddr) -> &[SessionInterval] {
        self.by_mac.get(mac).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Building of the latest-started session of `mac` that contains `t`.
    pub fn lookup(&self, mac: &MacAddr, t: Timestamp) -> Option<&str> {
        let intervals = self.by_mac.get(mac)?;
        let idx = intervals.partition_point(|s| s.start <= t);
        intervals[..idx]
            .iter()
            .rev()
            .find(|s| t <= s.end)
            .map(|s| s.building.as_str())
    }
}

fn interval(start: &SessionEvent, end: Timestamp, ap: &str) -> SessionInterval {
    SessionInterval {
        start: start.ts,
        end,
        ap_id: ap.to_string(),
        building: start.building.clone(),
    }
}

pub fn resolve_location<'a>(mac: &MacAddr, ts: Timestamp, sessions: &'a SessionIndex) -> Option<&'a str> {
    sessions.lookup(mac, ts)
}
