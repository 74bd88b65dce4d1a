use std::fmt::Write as _;
use std::fs::File;
use std::io::BufReader;

use trendmap::ingest::{read_usage_records, UsageRecord, UNKNOWN_BUILDING};
use trendmap::matrix::{build_matrix, build_tensor, normalize_matrix, normalize_tensor, write_matrix, write_tensor, FeatureAxis};
use trendmap::som::{
    initialize, map_dimensions, topographic_error, train_from, write_model, GridSpec, TrainingData, TrainingSchedule,
};
use trendmap::textfmt::fmt_f64;
use trendmap::{Error, Exec};

use crate::config::PipelineConfig;
use crate::error::{CliError, Context};
use crate::output::{ensure_dir, write_text, write_with};
use crate::Aspect;

/// Normalized training data plus a writer for its matrix file.
enum Prepared {
    Matrix(trendmap::matrix::NormalizedMatrix),
    Tensor(trendmap::matrix::NormalizedTensor),
}

impl Prepared {
    fn data(&self) -> TrainingData {
        match self {
            Prepared::Matrix(m) => TrainingData::from(m),
            Prepared::Tensor(t) => TrainingData::from(t),
        }
    }
}

fn located(records: &[UsageRecord]) -> Vec<UsageRecord> {
    records.iter().filter(|r| r.building != UNKNOWN_BUILDING).cloned().collect()
}

fn prepare(records: &[UsageRecord], aspect: Aspect, config: &PipelineConfig) -> trendmap::Result<Prepared> {
    let (log, norm) = (config.log_transform, config.row_norm);
    let prepared = match aspect {
        Aspect::Domain => {
            let mut m = build_matrix(records, FeatureAxis::Domain)?.top_features(config.top_domains);
            m.drop_zero_rows();
            Prepared::Matrix(normalize_matrix(&m, log, norm))
        }
        Aspect::Location => {
            let mut m = build_matrix(&located(records), FeatureAxis::Building)?.top_features(config.top_buildings);
            m.drop_zero_rows();
            Prepared::Matrix(normalize_matrix(&m, log, norm))
        }
        Aspect::Multi => {
            let mut t = build_tensor(&located(records), config.tensor_domains, config.tensor_buildings)?;
            t.drop_zero_rows();
            Prepared::Tensor(normalize_tensor(&t, log, norm))
        }
    };
    Ok(prepared)
}

pub fn schedule_for(config: &PipelineConfig, grid: &GridSpec, samples: usize) -> Result<TrainingSchedule, CliError> {
    let o = &config.schedule;
    let mut s = TrainingSchedule::default_for(grid, samples, config.seed);
    if let Some(e) = o.epochs {
        s.iterations = e * samples;
    }
    if let Some(i) = o.iterations {
        s.iterations = i;
    }
    s.r0 = o.r0.unwrap_or(s.r0);
    s.r_final = o.r_final.unwrap_or(s.r_final);
    s.eta0 = o.eta0.unwrap_or(s.eta0);
    s.eta_final = o.eta_final.unwrap_or(s.eta_final);
    s.radius_decay = o.radius_decay.unwrap_or(s.radius_decay);
    s.rate_decay = o.rate_decay.unwrap_or(s.rate_decay);
    s.validate().map_err(|e| CliError::usage(format!("training schedule: {e}")))?;
    Ok(s)
}

fn grid_for(config: &PipelineConfig, data: &TrainingData) -> Result<GridSpec, CliError> {
    let mut grid = match (config.rows, config.cols) {
        (Some(r), Some(c)) => GridSpec::rectangular(r, c).context("map shape")?,
        (None, None) => map_dimensions(data.samples.view(), config.units).context("map shape")?,
        _ => return Err(CliError::usage("set both rows and cols, or neither")),
    };
    grid.topology = config.topology;
    Ok(grid)
}

pub fn run(config: &PipelineConfig, aspect: Aspect) -> Result<(), CliError> {
    let usage = config.usage_path();
    let file = File::open(&usage).context(format!("opening {}", usage.display()))?;
    let records = read_usage_records(BufReader::new(file)).context(usage.display())?;
    let prepared = prepare(&records, aspect, config).map_err(|e| match e {
        Error::Empty(m) => CliError::computation(format!("{aspect} matrix is empty: {m}")),
        e => CliError::from_lib(format!("building the {aspect} matrix"), e),
    })?;
    let data = prepared.data();
    if data.is_empty() || data.dim() == 0 {
        return Err(CliError::computation(format!("{aspect} matrix is empty")));
    }

    let grid = grid_for(config, &data)?;
    let schedule = schedule_for(config, &grid, data.len())?;
    log::info!(
        "training a {}x{} {} map on {} users x {} features for {} steps",
        grid.rows,
        grid.cols,
        grid.topology,
        data.len(),
        data.dim(),
        schedule.iterations
    );
    let init = initialize(&data, grid, config.init, config.seed).context("initializing the map")?;
    let outcome = train_from(init, &data, &schedule, Exec::default()).context("training")?;
    for (e, qe) in outcome.epoch_qe.iter().enumerate() {
        log::info!("epoch {}: quantization error {qe:.6}", e + 1);
    }
    let te = topographic_error(&outcome.model, data.samples.view()).context("topographic error")?;

    ensure_dir(&config.out)?;
    let stem = format!("som_{aspect}");
    let model_path = config.out.join(format!("{stem}.model"));
    write_with(&model_path, |w| write_model(w, &outcome.model).context(model_path.display()))?;
    let matrix_path = config.out.join(format!("{stem}.matrix"));
    write_with(&matrix_path, |w| {
        match &prepared {
            Prepared::Matrix(m) => write_matrix(w, m),
            Prepared::Tensor(t) => write_tensor(w, t),
        }
        .context(matrix_path.display())
    })?;
    let mut log_text = String::from("epoch quantization_error\n");
    for (e, qe) in outcome.epoch_qe.iter().enumerate() {
        writeln!(log_text, "{} {}", e + 1, fmt_f64(*qe)).expect("writing to a string");
    }
    writeln!(log_text, "topographic_error {}", fmt_f64(te)).expect("writing to a string");
    write_text(&config.out.join(format!("{stem}.qe")), &log_text)?;

    println!(
        "train: {}x{} {aspect} map, final quantization error {:.6}, topographic error {:.4} -> {}",
        grid.rows,
        grid.cols,
        outcome.epoch_qe.last().copied().unwrap_or(0.0),
        te,
        model_path.display()
    );
    Ok(())
}
