use std::path::Path;

use ndarray::Array2;
use trendmap::gmm::{denormalize, estimate_with, sample, synthetic_records, synthetic_user, write_gmm};
use trendmap::ingest::write_usage_records;
use trendmap::matrix::{read_matrix_file, write_matrix, FeatureAxis, MatrixFile, NormalizedMatrix, UsageMatrix};
use trendmap::som::{read_model, TrainingData};
use trendmap::Exec;

use crate::config::PipelineConfig;
use crate::error::{CliError, Context};
use crate::output::{export_grid, model_stem, read_text, sibling, write_with};
use crate::Aspect;

fn infer_aspect(model_path: &Path) -> Aspect {
    match model_stem(model_path).as_str() {
        "som_location" => Aspect::Location,
        "som_multi" => Aspect::Multi,
        _ => Aspect::Domain,
    }
}

pub fn run(config: &PipelineConfig, model_path: &Path, n: usize, aspect: Option<Aspect>) -> Result<(), CliError> {
    let model = read_model(&read_text(model_path)?).context(format!("model file {}", model_path.display()))?;
    let matrix_path = sibling(model_path, "matrix");
    let data = match read_matrix_file(&read_text(&matrix_path)?).context(matrix_path.display())? {
        MatrixFile::Matrix(m) => TrainingData::from(&m),
        MatrixFile::Tensor(t) => TrainingData::from(&t),
        MatrixFile::Grid(_) => {
            return Err(CliError::from_lib(
                matrix_path.display(),
                trendmap::Error::Format {
                    context: "matrix file".into(),
                    message: "holds a bare grid, not training data".into(),
                },
            ))
        }
    };
    let r_est = config.r_est.unwrap_or_else(|| {
        model
            .schedule
            .map(|s| s.r_final)
            .unwrap_or(0.5)
    });
    let gmm = estimate_with(&model, &data, r_est, config.covariance, Exec::default())
        .context("estimating the mixture")?;
    log::info!("{} of {} nodes kept as components", gmm.components.len(), model.nodes());

    let dir = config.out.join(format!("sim_{}", model_stem(model_path)));
    let gmm_path = dir.join("mixture.gmm");
    write_with(&gmm_path, |w| write_gmm(w, &gmm).context(gmm_path.display()))?;

    let mut alpha = Array2::zeros((model.grid.rows, model.grid.cols));
    for c in &gmm.components {
        let (r, col) = model.grid.row_col(c.node);
        alpha[[r, col]] = c.alpha;
    }
    export_grid(&dir, "alpha", alpha.view(), model.grid.topology, config)?;

    let samples = sample(&gmm, n, config.seed).context("sampling")?;
    let users = (0..n)
        .map(|i| synthetic_user(i).map(|m| m.to_string()))
        .collect::<trendmap::Result<Vec<_>>>()
        .context("naming simulated users")?;
    let normalized = NormalizedMatrix {
        matrix: UsageMatrix {
            users,
            features: gmm.labels.names(),
            values: samples,
        },
        normalization: gmm.normalization,
        // samples have no pre-normalization norm of their own
        row_scales: vec![1.0; n],
    };
    let samples_path = dir.join("samples.matrix");
    write_with(&samples_path, |w| write_matrix(w, &normalized).context(samples_path.display()))?;

    let minutes = denormalize(normalized.matrix.values.view(), gmm.normalization, &gmm.row_scales, config.seed);
    let axis = match aspect.unwrap_or_else(|| infer_aspect(model_path)) {
        Aspect::Location => FeatureAxis::Building,
        Aspect::Domain | Aspect::Multi => FeatureAxis::Domain,
    };
    let records = synthetic_records(minutes.view(), &gmm.labels, axis, config.sim_period).context("simulated records")?;
    let usage = dir.join("usage.csv");
    write_with(&usage, |w| write_usage_records(w, &records).context(usage.display()))?;

    println!(
        "simulate: {} components, {n} users, {} usage records -> {}",
        gmm.components.len(),
        records.len(),
        dir.display()
    );
    Ok(())
}
