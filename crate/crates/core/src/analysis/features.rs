use std::fmt;
use std::str::FromStr;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::par::Exec;
use crate::som::{FeatureLabels, SomModel};

/// Names a weight component: a plain feature, or one `(domain, building)`
/// cell of a matrix model. Parses `domain@building` as a cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FeatureKey {
    Name(String),
    Cell { domain: String, building: String },
}

impl FromStr for FeatureKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() {
            return Err(Error::InvalidArgument("empty feature name".into()));
        }
        Ok(match s.split_once('@') {
            Some((d, b)) if !d.is_empty() && !b.is_empty() => FeatureKey::Cell {
                domain: d.to_string(),
                building: b.to_string(),
            },
            _ => FeatureKey::Name(s.to_string()),
        })
    }
}

impl fmt::Display for FeatureKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeatureKey::Name(n) => f.write_str(n),
            FeatureKey::Cell { domain, building } => write!(f, "{domain}@{building}"),
        }
    }
}

impl FeatureKey {
    fn component(&self, labels: &FeatureLabels) -> Option<usize> {
        match (labels, self) {
            (FeatureLabels::Vector(names), key) => {
                let wanted = key.to_string();
                names.iter().position(|n| *n == wanted)
            }
            (FeatureLabels::Matrix { domains, buildings }, FeatureKey::Cell { domain, building }) => {
                let d = domains.iter().position(|x| x == domain)?;
                let b = buildings.iter().position(|x| x == building)?;
                Some(d * buildings.len() + b)
            }
            (FeatureLabels::Matrix { .. }, FeatureKey::Name(_)) => None,
        }
    }
}

/// One feature's value at every node, in node order.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub feature: String,
    pub values: Vec<f64>,
}

fn column(model: &SomModel, k: usize) -> FeatureVector {
    FeatureVector {
        feature: model.labels.name(k),
        values: model.weights.column(k).to_vec(),
    }
}

pub fn extract_feature_vector(model: &SomModel, key: &FeatureKey) -> Result<FeatureVector> {
    match key.component(&model.labels) {
        Some(k) => Ok(column(model, k)),
        None => Err(Error::UnknownFeature {
            name: key.to_string(),
            available: model.labels.names(),
        }),
    }
}

/// Feature vectors for every weight component, in component order.
pub fn feature_vectors(model: &SomModel) -> Vec<FeatureVector> {
    (0..model.dim()).map(|k| column(model, k)).collect()
}

/// `1 − r` where `r` is the Pearson correlation of `a` and `b`, in `[0, 2]`.
/// A constant input has no defined correlation and gets distance 1.
///
/// Panics if the lengths differ.
pub fn correlation_distance(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "feature vectors must have equal length");
    let constant = |v: &[f64]| v.iter().all(|&x| x == v[0]);
    if a.len() < 2 || constant(a) || constant(b) {
        return 1.0;
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return 1.0;
    }
    (1.0 - sab / (saa.sqrt() * sbb.sqrt())).clamp(0.0, 2.0)
}

/// Symmetric matrix of pairwise correlation distances with a zero diagonal.
pub fn distance_matrix(vectors: &[FeatureVector], exec: Exec) -> Array2<f64> {
    let n = vectors.len();
    let len = vectors.first().map_or(0, |v| v.values.len());
    let exec = exec.for_work(n * n * len / 2);
    let rows = exec.map_range(n, |i| {
        (0..n)
            .map(|j| {
                if j <= i {
                    0.0
                } else {
                    correlation_distance(&vectors[i].values, &vectors[j].values)
                }
            })
            .collect::<Vec<f64>>()
    });
    let mut d = Array2::zeros((n, n));
    for (i, row) in rows.into_iter().enumerate() {
        for j in (i + 1)..n {
            d[[i, j]] = row[j];
            d[[j, i]] = row[j];
        }
    }
    d
}
