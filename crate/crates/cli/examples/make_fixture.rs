//! Regenerates the trace fixture under `tests/fixtures/`.
//!
//! Sixteen users over March and April 2008. Every user holds one lease per
//! month and the April leases are reshuffled, so an IP maps to different
//! users in the two months. One extra IP never holds a lease. Each user has a
//! daytime session per day in one of five buildings; flows outside it land in
//! UNKNOWN. The domain map covers eight prefixes of six domains, and one busy
//! prefix is left unmapped.
//!
//! ```text
//! cargo run -p trendmap-cli --example make_fixture
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const USERS: usize = 16;
const DAYS: u32 = 61;
const FLOWS: usize = 1200;
const BUILDINGS: [&str; 5] = ["KAT", "SAL", "LVL", "RTH", "VKC"];

// (prefix, domain, weight); the last entry is unmapped, `cnn.com` falls out
// of the top 5 and the second `usc.edu` prefix is below the threshold
const DESTINATIONS: [(&str, Option<&str>, u32); 9] = [
    ("74.125.19", Some("google.com"), 30),
    ("74.125.20", Some("google.com"), 10),
    ("69.63.176", Some("facebook.com"), 22),
    ("69.63.181", Some("facebook.com"), 6),
    ("208.80.152", Some("wikipedia.org"), 9),
    ("128.125.253", Some("usc.edu"), 12),
    ("128.125.4", Some("usc.edu"), 1),
    ("66.94.234", Some("yahoo.com"), 8),
    ("203.0.113", None, 5),
];
const EXTRA_MAPPED: (&str, &str) = ("157.166.224", "cnn.com");

fn mac(u: usize) -> String {
    format!("00:16:cb:a0:00:{u:02x}")
}

fn ip(month: u32, u: usize) -> String {
    // April reshuffles the March addresses
    let slot = if month == 3 { u } else { (u * 5 + 3) % USERS };
    format!("10.1.0.{}", slot + 10)
}

/// (month, day) of a day index counted from March 1.
fn date(day: u32) -> (u32, u32) {
    if day < 31 {
        (3, day + 1)
    } else {
        (4, day - 30)
    }
}

fn flow_ts(day: u32, ms: u64) -> String {
    let (m, d) = date(day);
    let s = ms / 1000;
    format!("{m:02}{d:02}.{:02}:{:02}:{:02}.{:03}", s / 3600, s / 60 % 60, s % 60, ms % 1000)
}

fn iso(day: u32, hour: u32) -> String {
    let (m, d) = date(day);
    format!("2008-{m:02}-{d:02}T{hour:02}:00:00Z")
}

fn pick_destination(rng: &mut ChaCha8Rng) -> (String, u32) {
    let mut table: Vec<(&str, u32)> = DESTINATIONS.iter().map(|&(p, _, w)| (p, w)).collect();
    table.push((EXTRA_MAPPED.0, 2));
    let total: u32 = table.iter().map(|t| t.1).sum();
    let mut x = rng.random_range(0..total);
    for (p, w) in table {
        if x < w {
            return (p.to_string(), rng.random_range(1..255));
        }
        x -= w;
    }
    unreachable!()
}

fn flows(rng: &mut ChaCha8Rng) -> String {
    let mut out = String::new();
    let mut emit = |rng: &mut ChaCha8Rng, src: &dyn Fn(u32) -> String| {
        let day = rng.random_range(0..DAYS);
        let src = src(date(day).0);
        let start = rng.random_range(0..86_000_000u64);
        let dur = rng.random_range(500..600_000u64);
        let (prefix, host) = pick_destination(rng);
        let packets = rng.random_range(1..400u32);
        let bytes = packets * rng.random_range(40..1500u32);
        writeln!(
            out,
            "{} | {} | {src} | {} | {prefix}.{host} | {} | {} | 0 | {packets} | {bytes}",
            flow_ts(day, start),
            flow_ts(day, (start + dur).min(86_399_999)),
            rng.random_range(1024..65535u32),
            [80u32, 443, 53].choose(rng).expect("non-empty"),
            [6u32, 6, 17].choose(rng).expect("non-empty"),
        )
        .expect("writing to a string");
    };
    for _ in 0..FLOWS {
        let u = rng.random_range(0..USERS);
        emit(rng, &|month| ip(month, u));
    }
    for _ in 0..20 {
        emit(rng, &|_| "10.1.9.9".to_string());
    }
    out.push_str("0301.10:00:00.000 | 0301.10:00:01.000 | 10.1.0.10 | 80\n");
    out.push_str("0301.10:00:00.000 | 0301.10:00:01.000 | 10.1.0.300 | 80 | 74.125.19.1 | 80 | 6 | 0 | 1 | 60\n");
    out.push_str("0301.10:00:05.000 | 0301.10:00:01.000 | 10.1.0.10 | 80 | 74.125.19.1 | 80 | 6 | 0 | 1 | 60\n");
    out.push_str("1345.10:00:00.000 | 1345.10:00:01.000 | 10.1.0.10 | 80 | 74.125.19.1 | 80 | 6 | 0 | 1 | 60\n");
    out.push_str("0301.10:00:00.000 | 0301.10:00:01.000 | 10.1.0.10 | 80 | 74.125.19.1 | 80 | 6 | 0 | 0 | 60\n");
    out.push_str("garbage\n");
    out
}

fn leases() -> String {
    let mut out = String::from("mac,ip,lease_start,lease_end\n");
    for u in 0..USERS {
        writeln!(out, "{},{},{},{}", mac(u), ip(3, u), iso(0, 0), iso(31, 0)).expect("writing to a string");
    }
    for u in 0..USERS {
        let end = if u % 2 == 0 { "open".to_string() } else { "2008-05-01T00:00:00Z".to_string() };
        writeln!(out, "{},{},2008-04-01T00:00:00.001Z,{end}", mac(u), ip(4, u)).expect("writing to a string");
    }
    out.push_str("not-a-mac,10.1.0.99,2008-03-01T00:00:00Z,open\n");
    out
}

fn sessions(rng: &mut ChaCha8Rng) -> String {
    let mut out = String::from("mac,ap_id,building,event,ts\n");
    for u in 0..USERS {
        for day in 0..DAYS {
            let b = BUILDINGS[rng.random_range(0..BUILDINGS.len())];
            let ap = format!("{b}-ap{}", rng.random_range(1..4));
            let (start, end) = (rng.random_range(7..11), rng.random_range(16..22));
            writeln!(out, "{},{ap},{b},start,{}", mac(u), iso(day, start)).expect("writing to a string");
            // user 3 drops the end event on the first of every week
            if !(u == 3 && day % 7 == 0) {
                writeln!(out, "{},{ap},{b},end,{}", mac(u), iso(day, end)).expect("writing to a string");
            }
        }
    }
    // an end with no start and a line with a bad event
    writeln!(out, "{},KAT-ap9,KAT,end,{}", mac(0), iso(5, 3)).expect("writing to a string");
    writeln!(out, "{},KAT-ap9,KAT,pause,{}", mac(0), iso(5, 4)).expect("writing to a string");
    out
}

fn domain_map() -> String {
    let mut out = String::new();
    for &(p, d, _) in &DESTINATIONS {
        if let Some(d) = d {
            writeln!(out, "{p}.0/24,{d}").expect("writing to a string");
        }
    }
    writeln!(out, "{}.0/24,{}", EXTRA_MAPPED.0, EXTRA_MAPPED.1).expect("writing to a string");
    out
}

const CONFIG: &str = "\
# desk-scale fixture: 16 users, two months
flows = flows.txt
dhcp = dhcp.csv
sessions = sessions.csv
domain_map = domains.csv
delimiter = auto
base_year = 2008
prefix_threshold = 20
top_domains = 5
top_buildings = 5
tensor_domains = 5
tensor_buildings = 5
units = 16
k_trends = 3
k_features = 2
restarts = 4
cell = 8
seed = 7
";

fn main() -> std::io::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    fs::create_dir_all(&dir)?;
    let mut rng = ChaCha8Rng::seed_from_u64(2008);
    fs::write(dir.join("flows.txt"), flows(&mut rng))?;
    fs::write(dir.join("dhcp.csv"), leases())?;
    fs::write(dir.join("sessions.csv"), sessions(&mut rng))?;
    fs::write(dir.join("domains.csv"), domain_map())?;
    fs::write(dir.join("fixture.conf"), CONFIG)?;
    println!("wrote fixture to {}", dir.display());
    Ok(())
}
