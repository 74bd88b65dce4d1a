//! Gaussian mixtures seeded by a trained map: one kernel per node, with
//! parameters estimated from the samples mapped to the node and its
//! neighbors. The mixture generates synthetic usage vectors.

mod io;
mod sample;

pub use io::{read_gmm, write_gmm};
pub use sample::{denormalize, sample, sample_with, synthetic_records, synthetic_user};

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::linalg::{cholesky, forward_substitute};
use crate::matrix::Normalization;
use crate::par::Exec;
use crate::som::grid::gaussian;
use crate::som::model::all_bmus;
use crate::som::{map_distance, FeatureLabels, GridSpec, SomModel, TrainingData};

/// Nodes whose total kernel weight is below this (one effective sample)
/// are dropped.
pub const MIN_NODE_WEIGHT: f64 = 1.0;

/// Ridge added to every covariance diagonal, relative to the mean per-feature
/// variance of the data.
pub const REGULARIZATION: f64 = 1e-6;

/// Kernel weights below this are treated as zero during estimation.
const NEGLIGIBLE_KERNEL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CovarianceMode {
    #[default]
    Full,
    Diagonal,
}

impl fmt::Display for CovarianceMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CovarianceMode::Full => "full",
            CovarianceMode::Diagonal => "diagonal",
        })
    }
}

impl FromStr for CovarianceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "full" => Ok(CovarianceMode::Full),
            "diagonal" | "diag" => Ok(CovarianceMode::Diagonal),
            other => Err(Error::InvalidArgument(format!("unknown covariance mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Covariance {
    Full(Array2<f64>),
    /// Variances only; off-diagonal terms are zero.
    Diagonal(Array1<f64>),
}

impl Covariance {
    pub fn dim(&self) -> usize {
        match self {
            Covariance::Full(m) => m.nrows(),
            Covariance::Diagonal(v) => v.len(),
        }
    }

    pub fn mode(&self) -> CovarianceMode {
        match self {
            Covariance::Full(_) => CovarianceMode::Full,
            Covariance::Diagonal(_) => CovarianceMode::Diagonal,
        }
    }

    pub fn to_dense(&self) -> Array2<f64> {
        match self {
            Covariance::Full(m) => m.clone(),
            Covariance::Diagonal(v) => Array2::from_diag(v),
        }
    }
}

/// One mixture component. The square-root factor of `sigma` is computed on
/// construction.
#[derive(Debug, Clone, PartialEq)]
pub struct GmmComponent {
    /// Map node the component was estimated at.
    pub node: usize,
    pub alpha: f64,
    pub mu: Array1<f64>,
    pub sigma: Covariance,
    /// Lower Cholesky factor, or per-feature standard deviations.
    factor: Covariance,
    /// `ln |sigma|`.
    log_det: f64,
}

impl GmmComponent {
    /// Fails when `sigma` is not positive definite.
    pub fn new(node: usize, alpha: f64, mu: Array1<f64>, sigma: Covariance) -> Result<Self> {
        if sigma.dim() != mu.len() {
            return Err(Error::ShapeMismatch {
                expected: mu.len(),
                actual: sigma.dim(),
            });
        }
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidArgument(format!("mixing weight {alpha} is outside [0, 1]")));
        }
        let (factor, log_det) = match &sigma {
            Covariance::Full(m) => {
                let l = cholesky(m.view())?;
                let log_det = 2.0 * l.diag().iter().map(|d| d.ln()).sum::<f64>();
                (Covariance::Full(l), log_det)
            }
            Covariance::Diagonal(v) => {
                if let Some(bad) = v.iter().find(|&&x| !(x > 0.0 && x.is_finite())) {
                    return Err(Error::Numerical(format!("variance {bad:e} is not positive")));
                }
                (Covariance::Diagonal(v.mapv(f64::sqrt)), v.iter().map(|x| x.ln()).sum())
            }
        };
        Ok(GmmComponent {
            node,
            alpha,
            mu,
            sigma,
            factor,
            log_det,
        })
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    /// Log of the multivariate normal density at `x`.
    pub fn log_pdf(&self, x: ArrayView1<f64>) -> f64 {
        let diff = &x - &self.mu;
        let maha = match &self.factor {
            Covariance::Full(l) => forward_substitute(l.view(), diff.view()).mapv(|v| v * v).sum(),
            Covariance::Diagonal(sd) => diff.iter().zip(sd).map(|(d, s)| (d / s) * (d / s)).sum(),
        };
        -0.5 * (self.dim() as f64 * (2.0 * PI).ln() + self.log_det + maha)
    }

    /// `mu + factor · z`.
    pub(crate) fn transform(&self, z: &[f64], out: &mut [f64]) {
        match &self.factor {
            Covariance::Full(l) => {
                for (i, o) in out.iter_mut().enumerate() {
                    let row = l.row(i);
                    let mut s = self.mu[i];
                    for k in 0..=i {
                        s += row[k] * z[k];
                    }
                    *o = s;
                }
            }
            Covariance::Diagonal(sd) => {
                for (i, o) in out.iter_mut().enumerate() {
                    *o = self.mu[i] + sd[i] * z[i];
                }
            }
        }
    }
}

/// A mixture estimated from a map.
#[derive(Debug, Clone, PartialEq)]
pub struct GmmModel {
    pub components: Vec<GmmComponent>,
    pub labels: FeatureLabels,
    /// Grid of the originating map.
    pub grid: GridSpec,
    /// Normalization of the training data, for mapping samples back to minutes.
    pub normalization: Normalization,
    pub row_scales: Vec<f64>,
}

impl GmmModel {
    /// Checks that the weights sum to one and the shapes agree.
    pub fn new(
        components: Vec<GmmComponent>,
        labels: FeatureLabels,
        grid: GridSpec,
        normalization: Normalization,
        row_scales: Vec<f64>,
    ) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::Empty("mixture has no components".into()));
        }
        let dim = labels.dim();
        if let Some(c) = components.iter().find(|c| c.dim() != dim) {
            return Err(Error::ShapeMismatch {
                expected: dim,
                actual: c.dim(),
            });
        }
        let total: f64 = components.iter().map(|c| c.alpha).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!("mixing weights sum to {total}, not 1")));
        }
        Ok(GmmModel {
            components,
            labels,
            grid,
            normalization,
            row_scales,
        })
    }

    pub fn dim(&self) -> usize {
        self.labels.dim()
    }

    pub fn alphas(&self) -> Vec<f64> {
        self.components.iter().map(|c| c.alpha).collect()
    }

    /// Log mixture density, computed with log-sum-exp.
    pub fn log_density(&self, x: ArrayView1<f64>) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::ShapeMismatch {
                expected: self.dim(),
                actual: x.len(),
            });
        }
        let terms: Vec<f64> = self
            .components
            .iter()
            .filter(|c| c.alpha > 0.0)
            .map(|c| c.alpha.ln() + c.log_pdf(x))
            .collect();
        let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return Ok(max);
        }
        Ok(max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln())
    }

    pub fn density(&self, x: ArrayView1<f64>) -> Result<f64> {
        Ok(self.log_density(x)?.exp())
    }
}

/// Per-BMU sufficient statistics: count, mean and centered scatter.
struct Group {
    count: f64,
    mean: Array1<f64>,
    scatter: Covariance,
}

fn groups(samples: ArrayView2<f64>, bmus: &[usize], nodes: usize, mode: CovarianceMode) -> Vec<Group> {
    let dim = samples.ncols();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); nodes];
    for (i, &b) in bmus.iter().enumerate() {
        members[b].push(i);
    }
    members
        .into_iter()
        .map(|idx| {
            let count = idx.len() as f64;
            let mut mean = Array1::zeros(dim);
            for &i in &idx {
                mean += &samples.row(i);
            }
            if count > 0.0 {
                mean /= count;
            }
            let scatter = match mode {
                CovarianceMode::Full => {
                    let mut s = Array2::zeros((dim, dim));
                    for &i in &idx {
                        let d = &samples.row(i) - &mean;
                        for a in 0..dim {
                            for b in 0..=a {
                                s[[a, b]] += d[a] * d[b];
                            }
                        }
                    }
                    Covariance::Full(s)
                }
                CovarianceMode::Diagonal => {
                    let mut s = Array1::zeros(dim);
                    for &i in &idx {
                        let d = &samples.row(i) - &mean;
                        s += &d.mapv(|v| v * v);
                    }
                    Covariance::Diagonal(s)
                }
            };
            Group { count, mean, scatter }
        })
        .collect()
}

/// Total kernel weight, mean and covariance of one node.
type NodeMoments = (f64, Array1<f64>, Covariance);

/// Weight, mean and covariance of node `k` from the groups' statistics.
fn node_moments(
    k: usize,
    grid: &GridSpec,
    r_est: f64,
    groups: &[Group],
    ridge: f64,
    mode: CovarianceMode,
) -> Option<NodeMoments> {
    let dim = groups[0].mean.len();
    let kernel: Vec<(usize, f64)> = groups
        .iter()
        .enumerate()
        .filter(|(_, g)| g.count > 0.0)
        .map(|(b, g)| {
            let d = map_distance(grid, b, k);
            (b, gaussian(d * d, r_est) * g.count)
        })
        .filter(|&(b, w)| w >= NEGLIGIBLE_KERNEL * groups[b].count)
        .collect();
    let total: f64 = kernel.iter().map(|&(_, w)| w).sum();
    if total < MIN_NODE_WEIGHT {
        return None;
    }
    let mut mu = Array1::zeros(dim);
    for &(b, w) in &kernel {
        mu.scaled_add(w, &groups[b].mean);
    }
    mu /= total;
    let sigma = match mode {
        CovarianceMode::Full => {
            let mut s = Array2::<f64>::zeros((dim, dim));
            for &(b, w) in &kernel {
                let g = &groups[b];
                let h = w / g.count;
                let d = &g.mean - &mu;
                let Covariance::Full(c) = &g.scatter else { unreachable!() };
                for a in 0..dim {
                    for bb in 0..=a {
                        s[[a, bb]] += h * c[[a, bb]] + w * d[a] * d[bb];
                    }
                }
            }
            s /= total;
            for a in 0..dim {
                s[[a, a]] += ridge;
                for bb in 0..a {
                    s[[bb, a]] = s[[a, bb]];
                }
            }
            Covariance::Full(s)
        }
        CovarianceMode::Diagonal => {
            let mut s = Array1::<f64>::zeros(dim);
            for &(b, w) in &kernel {
                let g = &groups[b];
                let h = w / g.count;
                let Covariance::Diagonal(c) = &g.scatter else { unreachable!() };
                for a in 0..dim {
                    let d = g.mean[a] - mu[a];
                    s[a] += h * c[a] + w * d * d;
                }
            }
            s /= total;
            s += ridge;
            Covariance::Diagonal(s)
        }
    };
    Some((total, mu, sigma))
}

/// Mixture with full covariances; see [`estimate_with`].
pub fn estimate(model: &SomModel, data: &TrainingData, r_est: f64) -> Result<GmmModel> {
    estimate_with(model, data, r_est, CovarianceMode::Full, Exec::default())
}

/// Estimates one Gaussian per node. Sample `x` contributes to node `k` with
/// weight `h(BMU(x), k; r_est)`; each node's mean and covariance are the
/// weighted mean and (population) covariance of the data, and its mixing
/// weight is proportional to its total weight. Nodes with total weight below
/// [`MIN_NODE_WEIGHT`] are dropped. Every covariance gets
/// [`REGULARIZATION`] times the mean per-feature data variance added to its
/// diagonal.
pub fn estimate_with(
    model: &SomModel,
    data: &TrainingData,
    r_est: f64,
    mode: CovarianceMode,
    exec: Exec,
) -> Result<GmmModel> {
    if !(r_est > 0.0 && r_est.is_finite()) {
        return Err(Error::InvalidArgument(format!("estimation radius must be positive, got {r_est}")));
    }
    model.check_dim(data.dim())?;
    if data.is_empty() {
        return Err(Error::Empty("no samples to estimate from".into()));
    }
    let samples = data.samples.view();
    let bmus = all_bmus(model, samples, exec);
    let groups = groups(samples, &bmus, model.nodes(), mode);

    let n = data.len() as f64;
    let mean_var = {
        let means = crate::linalg::column_means(samples);
        let total: f64 = samples
            .rows()
            .into_iter()
            .map(|r| (&r - &means).mapv(|v| v * v).sum())
            .sum();
        total / n / data.dim().max(1) as f64
    };
    let ridge = if mean_var > 0.0 { REGULARIZATION * mean_var } else { REGULARIZATION * 1e-6 };

    let dim = data.dim();
    let work = model.nodes() * model.nodes() * if mode == CovarianceMode::Full { dim * dim } else { dim };
    let moments = exec
        .for_work(work)
        .map_range(model.nodes(), |k| node_moments(k, &model.grid, r_est, &groups, ridge, mode));
    let kept: Vec<(usize, NodeMoments)> = moments
        .into_iter()
        .enumerate()
        .filter_map(|(k, m)| m.map(|m| (k, m)))
        .collect();
    if kept.is_empty() {
        return Err(Error::Numerical(format!(
            "no node has kernel weight of at least {MIN_NODE_WEIGHT}; data and map do not match"
        )));
    }
    let dropped = model.nodes() - kept.len();
    if dropped > 0 {
        log::info!("{dropped} of {} nodes fell below the weight threshold and were dropped", model.nodes());
    }
    let total: f64 = kept.iter().map(|(_, m)| m.0).sum();
    let components = kept
        .into_iter()
        .map(|(k, (w, mu, sigma))| GmmComponent::new(k, w / total, mu, sigma))
        .collect::<Result<Vec<_>>>()?;
    GmmModel::new(
        components,
        model.labels.clone(),
        model.grid,
        model.normalization,
        model.row_scales.clone(),
    )
}
