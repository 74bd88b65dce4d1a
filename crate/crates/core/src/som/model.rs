use ndarray::{Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::matrix::{NormalizedMatrix, NormalizedTensor, Normalization};
use crate::par::Exec;

use super::grid::GridSpec;
use super::init::InitMode;
use super::schedule::TrainingSchedule;

/// Names of the weight components.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FeatureLabels {
    /// One label per vector component.
    Vector(Vec<String>),
    /// Weight matrices of `domains × buildings`, stored row-major.
    Matrix {
        domains: Vec<String>,
        buildings: Vec<String>,
    },
}

impl FeatureLabels {
    pub fn dim(&self) -> usize {
        match self {
            FeatureLabels::Vector(v) => v.len(),
            FeatureLabels::Matrix { domains, buildings } => domains.len() * buildings.len(),
        }
    }

    /// Label of flat component `k`; matrix cells read `domain@building`.
    pub fn name(&self, k: usize) -> String {
        match self {
            FeatureLabels::Vector(v) => v[k].clone(),
            FeatureLabels::Matrix { domains, buildings } => {
                let b = buildings.len();
                format!("{}@{}", domains[k / b], buildings[k % b])
            }
        }
    }

    pub fn names(&self) -> Vec<String> {
        (0..self.dim()).map(|k| self.name(k)).collect()
    }

    pub fn is_matrix(&self) -> bool {
        matches!(self, FeatureLabels::Matrix { .. })
    }
}

/// Samples prepared for training: one flat row per user.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingData {
    pub samples: Array2<f64>,
    pub labels: FeatureLabels,
    pub normalization: Normalization,
    pub row_scales: Vec<f64>,
}

impl TrainingData {
    /// Unnormalized samples with generated labels `f0, f1, …`.
    pub fn from_samples(samples: Array2<f64>) -> Self {
        let labels = (0..samples.ncols()).map(|j| format!("f{j}")).collect();
        let row_scales = vec![1.0; samples.nrows()];
        TrainingData {
            samples: standard(samples),
            labels: FeatureLabels::Vector(labels),
            normalization: Normalization::identity(),
            row_scales,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.samples.ncols()
    }
}

/// Row-major copy, so each sample row is one slice.
fn standard(a: Array2<f64>) -> Array2<f64> {
    if a.is_standard_layout() {
        a
    } else {
        a.as_standard_layout().into_owned()
    }
}

impl From<&NormalizedMatrix> for TrainingData {
    fn from(m: &NormalizedMatrix) -> Self {
        TrainingData {
            samples: standard(m.matrix.values.clone()),
            labels: FeatureLabels::Vector(m.matrix.features.clone()),
            normalization: m.normalization,
            row_scales: m.row_scales.clone(),
        }
    }
}

impl From<&NormalizedTensor> for TrainingData {
    fn from(t: &NormalizedTensor) -> Self {
        TrainingData {
            samples: standard(t.tensor.flattened().to_owned()),
            labels: FeatureLabels::Matrix {
                domains: t.tensor.domains.clone(),
                buildings: t.tensor.buildings.clone(),
            },
            normalization: t.normalization,
            row_scales: t.row_scales.clone(),
        }
    }
}

/// A map: geometry plus one flat weight row per node.
#[derive(Debug, Clone, PartialEq)]
pub struct SomModel {
    pub grid: GridSpec,
    pub labels: FeatureLabels,
    /// `nodes × dim`.
    pub weights: Array2<f64>,
    pub init: InitMode,
    /// `None` until trained.
    pub schedule: Option<TrainingSchedule>,
    pub normalization: Normalization,
    /// Original per-user row norms of the training data.
    pub row_scales: Vec<f64>,
}

impl SomModel {
    pub fn nodes(&self) -> usize {
        self.grid.nodes()
    }

    pub fn dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn weight(&self, node: usize) -> ArrayView1<'_, f64> {
        self.weights.row(node)
    }

    pub(crate) fn check_dim(&self, actual: usize) -> Result<()> {
        if actual != self.dim() {
            return Err(Error::ShapeMismatch {
                expected: self.dim(),
                actual,
            });
        }
        Ok(())
    }
}

#[inline]
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Squared distances from `x` to every node weight.
pub(crate) fn node_distances(weights: ArrayView2<f64>, x: &[f64], exec: Exec) -> Vec<f64> {
    let w = weights
        .as_slice()
        .expect("weights are stored contiguously");
    let dim = weights.ncols();
    let exec = exec.for_work(weights.len());
    exec.map_range(weights.nrows(), |i| sq_dist(&w[i * dim..(i + 1) * dim], x))
}

/// Index of the smallest value; ties go to the lowest index.
pub(crate) fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v < values[best] {
            best = i;
        }
    }
    best
}

/// Best and second-best nodes.
pub(crate) fn best_two(values: &[f64]) -> (usize, Option<usize>) {
    let first = argmin(values);
    let second = (0..values.len())
        .filter(|&i| i != first)
        .fold(None, |acc: Option<usize>, i| match acc {
            Some(b) if values[b] <= values[i] => Some(b),
            _ => Some(i),
        });
    (first, second)
}

pub(crate) fn bmu_of(weights: ArrayView2<f64>, x: &[f64], exec: Exec) -> usize {
    argmin(&node_distances(weights, x, exec))
}

/// Node whose weight is nearest to `x` (Euclidean, or Frobenius for matrix
/// weights); ties go to the lowest node index.
pub fn find_bmu(model: &SomModel, x: ArrayView1<f64>) -> Result<usize> {
    model.check_dim(x.len())?;
    let x = x.to_vec();
    Ok(bmu_of(model.weights.view(), &x, Exec::default()))
}

/// BMU of every sample, in sample order.
pub(crate) fn all_bmus(model: &SomModel, data: ArrayView2<f64>, exec: Exec) -> Vec<usize> {
    let rows: Vec<Vec<f64>> = data.rows().into_iter().map(|r| r.to_vec()).collect();
    let exec = exec.for_work(rows.len() * model.weights.len());
    exec.map_slice(&rows, |x| bmu_of(model.weights.view(), x, Exec::Sequential))
}

/// Mean distance from each sample to its BMU weight.
pub fn quantization_error(model: &SomModel, data: ArrayView2<f64>) -> Result<f64> {
    quantization_error_with(model, data, Exec::default())
}

pub(crate) fn quantization_error_with(model: &SomModel, data: ArrayView2<f64>, exec: Exec) -> Result<f64> {
    model.check_dim(data.ncols())?;
    if data.nrows() == 0 {
        return Ok(0.0);
    }
    let rows: Vec<Vec<f64>> = data.rows().into_iter().map(|r| r.to_vec()).collect();
    let exec = exec.for_work(rows.len() * model.weights.len());
    let dists = exec.map_slice(&rows, |x| {
        let d = node_distances(model.weights.view(), x, Exec::Sequential);
        d[argmin(&d)].sqrt()
    });
    Ok(dists.iter().sum::<f64>() / dists.len() as f64)
}

/// Fraction of samples whose best and second-best nodes are not grid
/// neighbors. A single-node map has error 0.
pub fn topographic_error(model: &SomModel, data: ArrayView2<f64>) -> Result<f64> {
    model.check_dim(data.ncols())?;
    if data.nrows() == 0 || model.nodes() < 2 {
        return Ok(0.0);
    }
    let rows: Vec<Vec<f64>> = data.rows().into_iter().map(|r| r.to_vec()).collect();
    let exec = Exec::default().for_work(rows.len() * model.weights.len());
    let misses = exec.map_slice(&rows, |x| {
        let d = node_distances(model.weights.view(), x, Exec::Sequential);
        match best_two(&d) {
            (a, Some(b)) => !model.grid.are_adjacent(a, b),
            _ => false,
        }
    });
    Ok(misses.iter().filter(|&&m| m).count() as f64 / rows.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::som::{Topology, GridSpec};
    use ndarray::array;

    #[test]
    fn training_rows_are_contiguous() {
        let column_major = array![[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]].reversed_axes();
        let data = TrainingData::from_samples(column_major.clone());
        assert!(data.samples.row(1).as_slice().is_some());
        assert_eq!(data.samples, column_major);
    }

    pub(crate) fn model_with(weights: Array2<f64>, rows: usize, cols: usize) -> SomModel {
        let dim = weights.ncols();
        SomModel {
            grid: GridSpec::new(rows, cols, Topology::Rectangular).unwrap(),
            labels: FeatureLabels::Vector((0..dim).map(|j| format!("f{j}")).collect()),
            weights,
            init: InitMode::Random,
            schedule: None,
            normalization: Normalization::identity(),
            row_scales: Vec::new(),
        }
    }

    #[test]
    fn bmu_examples() {
        let m = model_with(array![[0.0], [1.0], [2.0]], 1, 3);
        assert_eq!(find_bmu(&m, array![1.4].view()).unwrap(), 1);
        let same = model_with(array![[5.0, 5.0], [5.0, 5.0], [5.0, 5.0]], 1, 3);
        assert_eq!(find_bmu(&same, array![0.0, 1.0].view()).unwrap(), 0);
        let w = Array2::from_shape_fn((9, 2), |(i, j)| (i * 3 + j) as f64);
        let m = model_with(w.clone(), 3, 3);
        assert_eq!(find_bmu(&m, w.row(7)).unwrap(), 7);
        assert!(find_bmu(&m, array![1.0].view()).is_err());
    }

    #[test]
    fn quantization_error_examples() {
        let m = model_with(array![[0.0]], 1, 1);
        let qe = quantization_error(&m, array![[1.0], [-1.0]].view()).unwrap();
        assert_eq!(qe, 1.0);
        let m = model_with(array![[0.0], [3.0]], 1, 2);
        assert_eq!(quantization_error(&m, array![[3.0], [0.0], [3.0]].view()).unwrap(), 0.0);
    }

    #[test]
    fn topographic_error_counts_non_neighbors() {
        // nodes on a 1x3 line at 0, 10, 1: sample 0.4 has BMUs 0 and 2
        let m = model_with(array![[0.0], [10.0], [1.0]], 1, 3);
        assert_eq!(topographic_error(&m, array![[0.4]].view()).unwrap(), 1.0);
        assert_eq!(topographic_error(&m, array![[9.0]].view()).unwrap(), 0.0);
    }

    #[test]
    fn matrix_labels() {
        let l = FeatureLabels::Matrix {
            domains: vec!["yahoo".into(), "google".into()],
            buildings: vec!["ANH".into(), "KAT".into()],
        };
        assert_eq!(l.dim(), 4);
        assert_eq!(l.name(1), "yahoo@KAT");
        assert_eq!(l.name(2), "google@ANH");
    }
}
