//! Trace ingestion: parsing of netflow, DHCP and AP-session logs, joins from
//! flows to users and buildings, and aggregation of online time.

mod aggregate;
mod index;
mod parse;
mod types;

pub use aggregate::{
    aggregate_usage, filter_prefixes, read_usage_records, write_usage_records, AggregateConfig,
    AggregateReport, Aggregation, DEFAULT_PREFIX_THRESHOLD, DEFAULT_TOP_DOMAINS, USAGE_HEADER,
};
pub use index::{resolve_location, resolve_user, LeaseIndex, SessionIndex, SessionInterval};
pub use parse::{
    parse_domain_map, parse_flows, parse_leases, parse_sessions, Delimiter, FlowFormat, Parsed,
};
pub use types::{
    DhcpLease, DomainMap, FlowRecord, MacAddr, Period, Prefix24, SessionEvent, SessionKind,
    Timestamp, TimestampParser, UsageRecord, UNKNOWN_BUILDING,
};
