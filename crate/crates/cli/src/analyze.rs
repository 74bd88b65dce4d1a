use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array2;
use trendmap::analysis::{
    cluster_features, cluster_trends, compute_umatrix, extract_feature_vector, feature_vectors, heatmap_order,
    FeatureKey,
};
use trendmap::matrix::write_grid;
use trendmap::render::{render_clusters, render_heatmap, save_png};
use trendmap::som::{read_model, SomModel};

use crate::config::PipelineConfig;
use crate::error::{CliError, Context};
use crate::output::{export_grid, file_safe, model_stem, read_text, render_options, write_text, write_with};

fn clamp_k(k: usize, available: usize, what: &str) -> usize {
    if k > available {
        log::warn!("asked for {k} {what} clusters but only {available} are possible; using {available}");
        available
    } else {
        k
    }
}

fn as_grid(model: &SomModel, values: &[f64]) -> Array2<f64> {
    Array2::from_shape_vec((model.grid.rows, model.grid.cols), values.to_vec()).expect("one value per node")
}

fn trends(model: &SomModel, config: &PipelineConfig, dir: &Path) -> Result<(), CliError> {
    let k = clamp_k(config.k_trends, model.nodes(), "trend");
    let trends = cluster_trends(model, k, config.restarts, config.seed).context("clustering map nodes")?;
    let mut csv = String::from("node_row,node_col,cluster_id\n");
    for (node, c) in trends.assignment.iter().enumerate() {
        let (r, col) = model.grid.row_col(node);
        writeln!(csv, "{r},{col},{c}").expect("writing to a string");
    }
    write_text(&dir.join("trends.csv"), &csv)?;
    let png = dir.join("trends.png");
    let img = render_clusters(&model.grid, &trends.assignment, &render_options(config)).context(png.display())?;
    save_png(&img, &png).context(png.display())?;
    log::info!("{k} trend clusters, SSE {:.6}", trends.sse);
    Ok(())
}

fn feature_maps(model: &SomModel, config: &PipelineConfig, requested: &[String], dir: &Path) -> Result<(), CliError> {
    let names: Vec<String> = if requested.is_empty() {
        model.labels.names()
    } else {
        requested.to_vec()
    };
    // resolve every name before writing anything
    let vectors = names
        .iter()
        .map(|n| {
            let key = n.parse::<FeatureKey>().context("feature name")?;
            extract_feature_vector(model, &key).context("feature map")
        })
        .collect::<Result<Vec<_>, _>>()?;
    let maps = dir.join("feature_maps");
    for v in &vectors {
        let grid = as_grid(model, &v.values);
        export_grid(&maps, &file_safe(&v.feature), grid.view(), model.grid.topology, config)?;
    }
    Ok(())
}

fn feature_clusters(model: &SomModel, config: &PipelineConfig, dir: &Path) -> Result<(), CliError> {
    let vectors = feature_vectors(model);
    let k = clamp_k(config.k_features, vectors.len(), "feature");
    let fc = cluster_features(&vectors, config.linkage, k).context("clustering features")?;

    let mut csv = String::from("feature,cluster_id\n");
    for (name, c) in fc.dendrogram.labels.iter().zip(&fc.partition) {
        writeln!(csv, "{name},{c}").expect("writing to a string");
    }
    write_text(&dir.join("feature_clusters.csv"), &csv)?;
    let mut table = String::new();
    for (c, members) in fc.members().iter().enumerate() {
        writeln!(table, "cluster {c}: {}", members.join(", ")).expect("writing to a string");
    }
    write_text(&dir.join("feature_clusters.txt"), &table)?;

    let (perm, distances) = heatmap_order(&vectors, &fc.dendrogram).context("ordering the heatmap")?;
    let order: String = perm.iter().map(|&i| format!("{}\n", vectors[i].feature)).collect();
    write_text(&dir.join("heatmap_order.txt"), &order)?;
    let grid_path = dir.join("heatmap.grid");
    write_with(&grid_path, |w| write_grid(w, distances.view()).context(grid_path.display()))?;
    let png = dir.join("heatmap.png");
    let img = render_heatmap(distances.view(), &render_options(config)).context(png.display())?;
    save_png(&img, &png).context(png.display())
}

pub fn run(config: &PipelineConfig, model_path: &Path, features: &[String]) -> Result<(), CliError> {
    let text = read_text(model_path)?;
    let model = read_model(&text).context(format!("model file {}", model_path.display()))?;
    let requested = if features.is_empty() { &config.features[..] } else { features };
    let dir = config.out.join(format!("analysis_{}", model_stem(model_path)));

    // unknown feature names fail before any output is written
    for n in requested {
        let key = n.parse::<FeatureKey>().context("feature name")?;
        extract_feature_vector(&model, &key).context("feature map")?;
    }

    let u = compute_umatrix(&model);
    export_grid(&dir, "umatrix", u.values.view(), model.grid.topology, config)?;
    trends(&model, config, &dir)?;
    feature_maps(&model, config, requested, &dir)?;
    feature_clusters(&model, config, &dir)?;
    println!("analyze: {} nodes, {} features -> {}", model.nodes(), model.dim(), dir.display());
    Ok(())
}
