//! Pipeline configuration: `key = value` lines, `#` starts a comment.
//! Relative paths are resolved against the config file's directory.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use trendmap::analysis::{Linkage, DEFAULT_RESTARTS};
use trendmap::gmm::CovarianceMode;
use trendmap::ingest::{Delimiter, Period, DEFAULT_PREFIX_THRESHOLD, DEFAULT_TOP_DOMAINS};
use trendmap::matrix::{RowNorm, DEFAULT_TENSOR_BUILDINGS, DEFAULT_TENSOR_DOMAINS};
use trendmap::som::{Decay, InitMode, Topology};

use crate::error::CliError;

pub const DEFAULT_TOP_BUILDINGS: usize = 79;
pub const DEFAULT_UNITS: usize = 768;
pub const DEFAULT_K_TRENDS: usize = 20;
pub const DEFAULT_K_FEATURES: usize = 20;
pub const DEFAULT_BASE_YEAR: i32 = 2008;
pub const DEFAULT_SIM_PERIOD: &str = "2008-03";

/// Optional overrides of the default training schedule.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScheduleOverrides {
    pub iterations: Option<usize>,
    pub epochs: Option<usize>,
    pub r0: Option<f64>,
    pub r_final: Option<f64>,
    pub eta0: Option<f64>,
    pub eta_final: Option<f64>,
    pub radius_decay: Option<Decay>,
    pub rate_decay: Option<Decay>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub flows: Option<PathBuf>,
    pub dhcp: Option<PathBuf>,
    pub sessions: Option<PathBuf>,
    pub domain_map: Option<PathBuf>,
    /// Usage file read by `train`; defaults to `<out>/usage.csv`.
    pub usage: Option<PathBuf>,
    pub out: PathBuf,

    pub delimiter: Delimiter,
    pub flow_header: bool,
    pub base_year: i32,
    pub prefix_threshold: u64,
    pub top_domains: usize,

    pub top_buildings: usize,
    pub tensor_domains: usize,
    pub tensor_buildings: usize,
    pub log_transform: bool,
    pub row_norm: RowNorm,

    pub units: usize,
    /// Fixed map shape instead of the eigenvalue-driven choice.
    pub rows: Option<usize>,
    pub cols: Option<usize>,
    pub topology: Topology,
    pub init: InitMode,
    pub schedule: ScheduleOverrides,
    pub seed: u64,

    pub k_trends: usize,
    pub restarts: usize,
    pub k_features: usize,
    pub linkage: Linkage,
    /// Features to draw maps for; empty means all.
    pub features: Vec<String>,
    pub cell: u32,
    pub interpolate: bool,

    pub covariance: CovarianceMode,
    pub r_est: Option<f64>,
    pub sim_period: Period,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            flows: None,
            dhcp: None,
            sessions: None,
            domain_map: None,
            usage: None,
            out: PathBuf::from("out"),
            delimiter: Delimiter::Auto,
            flow_header: false,
            base_year: DEFAULT_BASE_YEAR,
            prefix_threshold: DEFAULT_PREFIX_THRESHOLD,
            top_domains: DEFAULT_TOP_DOMAINS,
            top_buildings: DEFAULT_TOP_BUILDINGS,
            tensor_domains: DEFAULT_TENSOR_DOMAINS,
            tensor_buildings: DEFAULT_TENSOR_BUILDINGS,
            log_transform: true,
            row_norm: RowNorm::L1,
            units: DEFAULT_UNITS,
            rows: None,
            cols: None,
            topology: Topology::Rectangular,
            init: InitMode::Linear,
            schedule: ScheduleOverrides::default(),
            seed: 0,
            k_trends: DEFAULT_K_TRENDS,
            restarts: DEFAULT_RESTARTS,
            k_features: DEFAULT_K_FEATURES,
            linkage: Linkage::Average,
            features: Vec::new(),
            cell: 16,
            interpolate: false,
            covariance: CovarianceMode::Full,
            r_est: None,
            sim_period: DEFAULT_SIM_PERIOD.parse().expect("valid default period"),
        }
    }
}

fn parse_delimiter(v: &str) -> Result<Delimiter, String> {
    match v {
        "auto" => Ok(Delimiter::Auto),
        "tab" | "\\t" => Ok(Delimiter::Char('\t')),
        "space" | "whitespace" => Ok(Delimiter::Char(' ')),
        "pipe" => Ok(Delimiter::Char('|')),
        "comma" => Ok(Delimiter::Char(',')),
        _ => {
            let mut chars = v.chars();
            match (chars.next(), chars.next()) {
                (Some(c), None) => Ok(Delimiter::Char(c)),
                _ => Err("expected auto, tab, space, pipe, comma or a single character".into()),
            }
        }
    }
}

fn parse_bool(v: &str) -> Result<bool, String> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err("expected true or false".into()),
    }
}

fn num<T: std::str::FromStr>(v: &str) -> Result<T, String> {
    v.parse().map_err(|_| format!("cannot parse `{v}`"))
}

fn positive<T: std::str::FromStr + PartialOrd + Default>(v: &str) -> Result<T, String> {
    let x: T = num(v)?;
    if x <= T::default() {
        return Err("must be positive".into());
    }
    Ok(x)
}

fn via<T: std::str::FromStr>(v: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    v.parse().map_err(|e: T::Err| e.to_string())
}

impl PipelineConfig {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(format!("reading config {}", path.display()), e))?;
        let base = path.parent().unwrap_or(Path::new(""));
        Self::parse(&text, base)
    }

    /// Parses config text; relative paths are taken relative to `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self, CliError> {
        let mut entries = BTreeMap::new();
        for (no, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(CliError::usage(format!("config line {}: expected `key = value`", no + 1)));
            };
            let (k, v) = (k.trim(), v.trim());
            if entries.insert(k.to_string(), (no + 1, v.to_string())).is_some() {
                return Err(CliError::usage(format!("config line {}: `{k}` is set twice", no + 1)));
            }
        }
        let mut c = PipelineConfig::default();
        for (key, (no, v)) in &entries {
            c.set(key, v, base)
                .map_err(|m| CliError::usage(format!("config line {no}: `{key}`: {m}")))?;
        }
        Ok(c)
    }

    fn set(&mut self, key: &str, v: &str, base: &Path) -> Result<(), String> {
        let path = || base.join(v);
        match key {
            "flows" => self.flows = Some(path()),
            "dhcp" => self.dhcp = Some(path()),
            "sessions" => self.sessions = Some(path()),
            "domain_map" => self.domain_map = Some(path()),
            "usage" => self.usage = Some(path()),
            "out" => self.out = path(),
            "delimiter" => self.delimiter = parse_delimiter(v)?,
            "flow_header" => self.flow_header = parse_bool(v)?,
            "base_year" => self.base_year = num(v)?,
            "prefix_threshold" => self.prefix_threshold = positive(v)?,
            "top_domains" => self.top_domains = positive(v)?,
            "top_buildings" => self.top_buildings = positive(v)?,
            "tensor_domains" => self.tensor_domains = positive(v)?,
            "tensor_buildings" => self.tensor_buildings = positive(v)?,
            "log_transform" => self.log_transform = parse_bool(v)?,
            "row_norm" => self.row_norm = via(v)?,
            "units" => self.units = positive(v)?,
            "rows" => self.rows = Some(positive(v)?),
            "cols" => self.cols = Some(positive(v)?),
            "topology" => self.topology = via(v)?,
            "init" => self.init = via(v)?,
            "iterations" => self.schedule.iterations = Some(num(v)?),
            "epochs" => self.schedule.epochs = Some(positive(v)?),
            "r0" => self.schedule.r0 = Some(positive(v)?),
            "r_final" => self.schedule.r_final = Some(positive(v)?),
            "eta0" => self.schedule.eta0 = Some(positive(v)?),
            "eta_final" => self.schedule.eta_final = Some(positive(v)?),
            "radius_decay" => self.schedule.radius_decay = Some(via(v)?),
            "rate_decay" => self.schedule.rate_decay = Some(via(v)?),
            "seed" => self.seed = num(v)?,
            "k_trends" => self.k_trends = positive(v)?,
            "restarts" => self.restarts = positive(v)?,
            "k_features" => self.k_features = positive(v)?,
            "linkage" => self.linkage = via(v)?,
            "features" => {
                self.features = v
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(str::to_string)
                    .collect()
            }
            "cell" => self.cell = positive(v)?,
            "interpolate" => self.interpolate = parse_bool(v)?,
            "covariance" => self.covariance = via(v)?,
            "r_est" => self.r_est = Some(positive(v)?),
            "sim_period" => self.sim_period = via(v)?,
            _ => return Err("unknown key".into()),
        }
        Ok(())
    }

    /// Usage file consumed by `train`.
    pub fn usage_path(&self) -> PathBuf {
        self.usage.clone().unwrap_or_else(|| self.out.join("usage.csv"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_the_reference_setup() {
        let c = PipelineConfig::default();
        assert_eq!(c.prefix_threshold, 100_000);
        assert_eq!(c.top_domains, 100);
        assert_eq!(c.top_buildings, 79);
        assert_eq!((c.tensor_domains, c.tensor_buildings), (40, 20));
        assert_eq!(c.units, 768);
        assert_eq!((c.k_trends, c.k_features), (20, 20));
        assert_eq!(c.restarts, 10);
        assert_eq!(c.linkage, Linkage::Average);
    }

    #[test]
    fn parses_values_and_paths() {
        let text = "# run\nflows = data/flows.txt\nout=/tmp/x\nseed = 7 # fixed\ndelimiter = |\nk_trends = 4\nrow_norm = l2\nfeatures = a, b@c\n";
        let c = PipelineConfig::parse(text, Path::new("/etc/tm")).unwrap();
        assert_eq!(c.flows, Some(PathBuf::from("/etc/tm/data/flows.txt")));
        assert_eq!(c.out, PathBuf::from("/tmp/x"));
        assert_eq!(c.seed, 7);
        assert_eq!(c.delimiter, Delimiter::Char('|'));
        assert_eq!(c.k_trends, 4);
        assert_eq!(c.row_norm, RowNorm::L2);
        assert_eq!(c.features, vec!["a", "b@c"]);
        assert_eq!(c.usage_path(), PathBuf::from("/tmp/x/usage.csv"));
    }

    #[test]
    fn bad_lines_are_usage_errors() {
        for text in ["nonsense", "units = 0", "units = -3", "colour = red", "seed = 1\nseed = 2", "topology = round"] {
            let e = PipelineConfig::parse(text, Path::new("")).unwrap_err();
            assert_eq!(e.exit_code(), 2, "{text}");
        }
    }
}
