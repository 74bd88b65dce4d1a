//! Raster images of map-shaped grids.
//!
//! Values are colored on a blue → cyan → green → yellow → red scale, low to
//! high. Cluster maps use a fixed categorical palette.

use std::path::Path;

use image::{Rgb, RgbImage};
use ndarray::ArrayView2;

use crate::error::{Error, Result};
use crate::som::{GridSpec, Topology};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderOptions {
    /// Side of one grid cell in pixels.
    pub cell: u32,
    /// Bilinear shading between cell centers instead of flat cells.
    pub interpolate: bool,
}

impl Default for RenderOptions {
    fn default() -> Self {
        RenderOptions {
            cell: 16,
            interpolate: false,
        }
    }
}

const STOPS: [[f64; 3]; 5] = [
    [0.0, 0.0, 255.0],
    [0.0, 255.0, 255.0],
    [0.0, 255.0, 0.0],
    [255.0, 255.0, 0.0],
    [255.0, 0.0, 0.0],
];

/// Color of `t` in `[0, 1]` (clamped; NaN maps to black).
pub fn colormap(t: f64) -> [u8; 3] {
    if t.is_nan() {
        return [0, 0, 0];
    }
    let x = t.clamp(0.0, 1.0) * (STOPS.len() - 1) as f64;
    let i = (x.floor() as usize).min(STOPS.len() - 2);
    let f = x - i as f64;
    let mut out = [0u8; 3];
    for (c, o) in out.iter_mut().enumerate() {
        *o = (STOPS[i][c] + f * (STOPS[i + 1][c] - STOPS[i][c])).round() as u8;
    }
    out
}

const PALETTE: [[u8; 3]; 20] = [
    [31, 119, 180], [255, 127, 14], [44, 160, 44], [214, 39, 40], [148, 103, 189],
    [140, 86, 75], [227, 119, 194], [127, 127, 127], [188, 189, 34], [23, 190, 207],
    [174, 199, 232], [255, 187, 120], [152, 223, 138], [255, 152, 150], [197, 176, 213],
    [196, 156, 148], [247, 182, 210], [199, 199, 199], [219, 219, 141], [158, 218, 229],
];

/// Categorical color of cluster `id`; repeats after 20 ids.
pub fn cluster_color(id: usize) -> [u8; 3] {
    PALETTE[id % PALETTE.len()]
}

fn check_options(opts: &RenderOptions) -> Result<()> {
    if opts.cell == 0 {
        return Err(Error::InvalidArgument("cell size must be positive".into()));
    }
    Ok(())
}

fn offset(topology: Topology, row: usize, cell: u32) -> u32 {
    match topology {
        Topology::Hexagonal if row % 2 == 1 => cell / 2,
        _ => 0,
    }
}

/// Paints a `rows × cols` layout, asking `color(row, col, fx, fy)` for each
/// pixel; `fx, fy` are the pixel's fractional position within its cell.
fn paint<F>(rows: usize, cols: usize, topology: Topology, cell: u32, color: F) -> RgbImage
where
    F: Fn(usize, usize, f64, f64) -> [u8; 3],
{
    let extra = if topology == Topology::Hexagonal && rows > 1 { cell / 2 } else { 0 };
    let (w, h) = (cols as u32 * cell + extra, rows as u32 * cell);
    let mut img = RgbImage::from_pixel(w, h, Rgb([255, 255, 255]));
    for r in 0..rows {
        let dx = offset(topology, r, cell);
        for c in 0..cols {
            for py in 0..cell {
                for px in 0..cell {
                    let fx = (px as f64 + 0.5) / cell as f64;
                    let fy = (py as f64 + 0.5) / cell as f64;
                    let rgb = color(r, c, fx, fy);
                    img.put_pixel(dx + c as u32 * cell + px, r as u32 * cell + py, Rgb(rgb));
                }
            }
        }
    }
    img
}

fn scale(lo: f64, hi: f64) -> impl Fn(f64) -> f64 {
    move |v| if hi > lo { (v - lo) / (hi - lo) } else { 0.5 }
}

/// Bilinear value at fractional position `(r + fy − 0.5, c + fx − 0.5)`,
/// clamped to the grid.
fn bilinear(values: ArrayView2<f64>, r: usize, c: usize, fx: f64, fy: f64) -> f64 {
    let (rows, cols) = values.dim();
    let y = (r as f64 + fy - 0.5).clamp(0.0, (rows - 1) as f64);
    let x = (c as f64 + fx - 0.5).clamp(0.0, (cols - 1) as f64);
    let (r0, c0) = (y.floor() as usize, x.floor() as usize);
    let (r1, c1) = ((r0 + 1).min(rows - 1), (c0 + 1).min(cols - 1));
    let (ty, tx) = (y - r0 as f64, x - c0 as f64);
    let top = values[[r0, c0]] * (1.0 - tx) + values[[r0, c1]] * tx;
    let bottom = values[[r1, c0]] * (1.0 - tx) + values[[r1, c1]] * tx;
    top * (1.0 - ty) + bottom * ty
}

/// Renders `values` with the colormap stretched between `lo` and `hi`.
pub fn render_values(
    values: ArrayView2<f64>,
    topology: Topology,
    lo: f64,
    hi: f64,
    opts: &RenderOptions,
) -> Result<RgbImage> {
    check_options(opts)?;
    let (rows, cols) = values.dim();
    if rows == 0 || cols == 0 {
        return Err(Error::Empty("nothing to render".into()));
    }
    let s = scale(lo, hi);
    Ok(paint(rows, cols, topology, opts.cell, |r, c, fx, fy| {
        let v = if opts.interpolate {
            bilinear(values, r, c, fx, fy)
        } else {
            values[[r, c]]
        };
        colormap(s(v))
    }))
}

/// Renders a map-shaped grid, colormap stretched over its own range.
pub fn render_grid(values: ArrayView2<f64>, topology: Topology, opts: &RenderOptions) -> Result<RgbImage> {
    let finite = values.iter().copied().filter(|v| v.is_finite());
    let (lo, hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    render_values(values, topology, lo, hi, opts)
}

/// Renders a cluster id per node with the categorical palette.
pub fn render_clusters(grid: &GridSpec, assignment: &[usize], opts: &RenderOptions) -> Result<RgbImage> {
    check_options(opts)?;
    if assignment.len() != grid.nodes() {
        return Err(Error::ShapeMismatch {
            expected: grid.nodes(),
            actual: assignment.len(),
        });
    }
    Ok(paint(grid.rows, grid.cols, grid.topology, opts.cell, |r, c, _, _| {
        cluster_color(assignment[grid.index(r, c)])
    }))
}

/// Renders a correlation-distance matrix as a heatmap of correlation
/// `1 − D`, from −1 (blue) to 1 (red).
pub fn render_heatmap(distances: ArrayView2<f64>, opts: &RenderOptions) -> Result<RgbImage> {
    let corr = distances.mapv(|d| 1.0 - d);
    let flat = RenderOptions {
        interpolate: false,
        ..*opts
    };
    render_values(corr.view(), Topology::Rectangular, -1.0, 1.0, &flat)
}

pub fn save_png(img: &RgbImage, path: &Path) -> Result<()> {
    img.save_with_format(path, image::ImageFormat::Png)?;
    Ok(())
}
