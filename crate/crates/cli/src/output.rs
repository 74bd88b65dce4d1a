use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use ndarray::ArrayView2;
use trendmap::matrix::write_grid;
use trendmap::render::{render_grid, save_png, RenderOptions};
use trendmap::som::Topology;

use crate::config::PipelineConfig;
use crate::error::{CliError, Context};

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).context(format!("creating {}", dir.display()))
}

/// Writes `path` through a buffered writer, creating parent directories.
pub fn write_with<F>(path: &Path, f: F) -> Result<(), CliError>
where
    F: FnOnce(&mut BufWriter<File>) -> Result<(), CliError>,
{
    if let Some(dir) = path.parent() {
        ensure_dir(dir)?;
    }
    let file = File::create(path).context(format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    f(&mut w)?;
    w.flush().context(format!("writing {}", path.display()))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    write_with(path, |w| w.write_all(text.as_bytes()).context(format!("writing {}", path.display())))
}

pub fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).context(format!("reading {}", path.display()))
}

pub fn render_options(config: &PipelineConfig) -> RenderOptions {
    RenderOptions {
        cell: config.cell,
        interpolate: config.interpolate,
    }
}

/// Writes `<stem>.grid` and `<stem>.png` for a map-shaped grid.
pub fn export_grid(
    dir: &Path,
    stem: &str,
    values: ArrayView2<f64>,
    topology: Topology,
    config: &PipelineConfig,
) -> Result<(), CliError> {
    let grid_path = dir.join(format!("{stem}.grid"));
    write_with(&grid_path, |w| write_grid(w, values).context(grid_path.display()))?;
    let png = dir.join(format!("{stem}.png"));
    let img = render_grid(values, topology, &render_options(config)).context(png.display())?;
    save_png(&img, &png).context(png.display())
}

/// File-name stem of a model path, used to name output directories.
pub fn model_stem(model: &Path) -> String {
    model
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "model".into())
}

/// Feature names made safe for file names.
pub fn file_safe(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || "._@-".contains(c) { c } else { '_' })
        .collect()
}

pub fn sibling(path: &Path, ext: &str) -> PathBuf {
    path.with_extension(ext)
}
