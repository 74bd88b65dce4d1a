use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{column_means, covariance, top_eigenpairs, EigenPair};

use super::grid::{GridSpec, Topology};
use super::model::{SomModel, TrainingData};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitMode {
    /// Regular lattice over the two leading principal axes.
    Linear,
    /// Uniform within each feature's observed range.
    Random,
}

impl fmt::Display for InitMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InitMode::Linear => "linear",
            InitMode::Random => "random",
        })
    }
}

impl FromStr for InitMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "linear" => Ok(InitMode::Linear),
            "random" => Ok(InitMode::Random),
            other => Err(Error::InvalidArgument(format!("unknown init mode `{other}`"))),
        }
    }
}

/// Eigenvalues at or below this fraction of the largest count as zero.
const RANK_TOLERANCE: f64 = 1e-12;

/// The two leading principal axes, or `None` when the data has rank < 2 or
/// the power iteration fails.
fn principal_axes(data: ArrayView2<f64>) -> Option<(EigenPair, EigenPair)> {
    if data.nrows() < 2 || data.ncols() < 2 {
        return None;
    }
    let cov = covariance(data);
    let mut pairs = top_eigenpairs(cov.view(), 2)?;
    let second = pairs.pop()?;
    let first = pairs.pop()?;
    if !(first.value > 0.0) || second.value <= RANK_TOLERANCE * first.value {
        return None;
    }
    Some((first, second))
}

/// Picks `rows × cols` near `units` with `rows / cols` near the square root
/// of the ratio of the two largest covariance eigenvalues. Falls back to the
/// most square shape when the eigenvalues are unavailable.
pub fn map_dimensions(data: ArrayView2<f64>, units: usize) -> Result<GridSpec> {
    if units == 0 {
        return Err(Error::InvalidArgument("map needs at least one unit".into()));
    }
    let ratio = match principal_axes(data) {
        Some((a, b)) => (a.value / b.value).sqrt(),
        None => {
            log::info!("eigenvalues unavailable; using the most square map shape");
            1.0
        }
    };
    let target = ratio.ln();
    let mut best: Option<((f64, f64), usize, usize)> = None;
    // Descending so that ties prefer rows >= cols.
    for rows in (1..=units).rev() {
        let cols = ((units as f64 / rows as f64).round() as usize).max(1);
        let shape_err = ((rows as f64 / cols as f64).ln() - target).abs();
        let size_err = ((rows * cols) as f64 / units as f64).ln().abs();
        let cost = (shape_err + size_err, size_err);
        if best.is_none_or(|(c, _, _)| cost.0 < c.0 - 1e-12 || (cost.0 <= c.0 + 1e-12 && cost.1 < c.1)) {
            best = Some((cost, rows, cols));
        }
    }
    let (_, rows, cols) = best.expect("units >= 1");
    GridSpec::new(rows, cols, Topology::Rectangular)
}

fn lattice(n: usize, k: usize) -> f64 {
    if n <= 1 {
        0.0
    } else {
        -1.0 + 2.0 * k as f64 / (n - 1) as f64
    }
}

/// Initial weights for `grid`.
///
/// Linear mode places nodes on a regular lattice centered on the data mean
/// and spanning ±2 standard deviations along the leading principal axes:
/// rows follow the first axis, columns the second. When the axes cannot be
/// computed it falls back to random mode, which draws every component
/// uniformly between that feature's minimum and maximum.
pub fn initialize(data: &TrainingData, grid: GridSpec, mode: InitMode, seed: u64) -> Result<SomModel> {
    if data.is_empty() {
        return Err(Error::Empty("cannot initialize a map without samples".into()));
    }
    let samples = data.samples.view();
    let linear = match mode {
        InitMode::Linear => linear_weights(samples, &grid),
        InitMode::Random => None,
    };
    let (weights, init) = match linear {
        Some(w) => (w, InitMode::Linear),
        None => {
            if mode == InitMode::Linear {
                log::info!("principal axes unavailable; falling back to random initialization");
            }
            (random_weights(samples, &grid, seed), InitMode::Random)
        }
    };
    Ok(SomModel {
        grid,
        labels: data.labels.clone(),
        weights,
        init,
        schedule: None,
        normalization: data.normalization,
        row_scales: data.row_scales.clone(),
    })
}

fn linear_weights(data: ArrayView2<f64>, grid: &GridSpec) -> Option<Array2<f64>> {
    let mean = column_means(data);
    let spans: Vec<usize> = [grid.rows, grid.cols].into_iter().filter(|&n| n > 1).collect();
    let axes: Vec<Array1<f64>> = match spans.len() {
        0 => Vec::new(),
        _ => {
            let (a, b) = principal_axes(data)?;
            [a, b]
                .into_iter()
                .map(|p| p.vector * (2.0 * p.value.sqrt()))
                .collect()
        }
    };
    let mut weights = Array2::zeros((grid.nodes(), data.ncols()));
    for (i, mut w) in weights.axis_iter_mut(Axis(0)).enumerate() {
        let (r, c) = grid.row_col(i);
        w.assign(&mean);
        let mut axis = axes.iter();
        if grid.rows > 1 {
            w.scaled_add(lattice(grid.rows, r), axis.next()?);
        }
        if grid.cols > 1 {
            w.scaled_add(lattice(grid.cols, c), axis.next()?);
        }
    }
    Some(weights)
}

fn random_weights(data: ArrayView2<f64>, grid: &GridSpec, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let lo: Vec<f64> = data
        .axis_iter(Axis(1))
        .map(|c| c.iter().copied().fold(f64::INFINITY, f64::min))
        .collect();
    let hi: Vec<f64> = data
        .axis_iter(Axis(1))
        .map(|c| c.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .collect();
    Array2::from_shape_fn((grid.nodes(), data.ncols()), |(_, j)| {
        let u: f64 = rng.random();
        lo[j] + u * (hi[j] - lo[j])
    })
}
