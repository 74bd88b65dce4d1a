use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use trendmap::ingest::{
    aggregate_usage, parse_domain_map, parse_flows, parse_leases, parse_sessions, write_usage_records,
    AggregateConfig, FlowFormat, LeaseIndex, SessionIndex, TimestampParser,
};

use crate::config::PipelineConfig;
use crate::error::{CliError, Context};
use crate::output::{ensure_dir, write_text, write_with};

fn required(config: &PipelineConfig) -> Result<[PathBuf; 4], CliError> {
    let named = [
        ("flows", &config.flows),
        ("dhcp", &config.dhcp),
        ("sessions", &config.sessions),
        ("domain_map", &config.domain_map),
    ];
    let missing: Vec<&str> = named.iter().filter(|(_, p)| p.is_none()).map(|(k, _)| *k).collect();
    if !missing.is_empty() {
        return Err(CliError::usage(format!("config does not set {}", missing.join(", "))));
    }
    let paths = named.map(|(_, p)| p.clone().expect("checked above"));
    for p in &paths {
        if !p.is_file() {
            return Err(CliError::io(
                "input file",
                std::io::Error::new(std::io::ErrorKind::NotFound, format!("{} does not exist", p.display())),
            ));
        }
    }
    Ok(paths)
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    Ok(BufReader::new(File::open(path).context(format!("opening {}", path.display()))?))
}

pub fn run(config: &PipelineConfig) -> Result<(), CliError> {
    let [flows_path, dhcp_path, sessions_path, map_path] = required(config)?;
    ensure_dir(&config.out)?;
    let timestamps = TimestampParser::new(config.base_year);
    let format = FlowFormat {
        delimiter: config.delimiter,
        has_header: config.flow_header,
        timestamps,
    };

    let flows = parse_flows(open(&flows_path)?, &format).context(flows_path.display())?;
    let leases = parse_leases(open(&dhcp_path)?, timestamps).context(dhcp_path.display())?;
    let sessions = parse_sessions(open(&sessions_path)?, timestamps).context(sessions_path.display())?;
    let domains = parse_domain_map(open(&map_path)?).context(map_path.display())?;
    if flows.records.is_empty() {
        log::warn!("no flows in {}", flows_path.display());
    }

    let lease_index = LeaseIndex::new(&leases.records);
    let session_index = SessionIndex::new(&sessions.records);
    let agg = aggregate_usage(
        &flows.records,
        &lease_index,
        &session_index,
        &domains,
        &AggregateConfig {
            prefix_threshold: config.prefix_threshold,
            top_domains: config.top_domains,
        },
    )
    .context("aggregating usage")?;

    let usage = config.out.join("usage.csv");
    write_with(&usage, |w| write_usage_records(w, &agg.records).context(usage.display()))?;
    let report = format!(
        "flows_parsed={}\nflows_skipped={}\nleases_parsed={}\nleases_skipped={}\n\
         session_events_parsed={}\nsession_events_skipped={}\nsession_events_repaired={}\n\
         domain_map_entries={}\n{}",
        flows.records.len(),
        flows.skipped,
        leases.records.len(),
        leases.skipped,
        sessions.records.len(),
        sessions.skipped,
        session_index.repaired_events(),
        domains.len(),
        agg.report
    );
    write_text(&config.out.join("ingest_report.txt"), &report)?;
    if !agg.report.is_conserved() {
        return Err(CliError::computation("online time is not conserved; see ingest_report.txt"));
    }
    println!(
        "ingest: {} usage records from {} flows -> {}",
        agg.records.len(),
        flows.records.len(),
        usage.display()
    );
    Ok(())
}
