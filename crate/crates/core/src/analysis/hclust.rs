use std::fmt;
use std::str::FromStr;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::par::Exec;

use super::features::{distance_matrix, FeatureVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Linkage {
    #[default]
    Average,
    Complete,
}

impl fmt::Display for Linkage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Linkage::Average => "average",
            Linkage::Complete => "complete",
        })
    }
}

impl FromStr for Linkage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "average" => Ok(Linkage::Average),
            "complete" => Ok(Linkage::Complete),
            other => Err(Error::InvalidArgument(format!("unknown linkage `{other}`"))),
        }
    }
}

/// One agglomeration step. Ids below the leaf count are leaves; merge `t`
/// creates cluster `leaves + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub height: f64,
    /// Leaves under the new cluster.
    pub size: usize,
}

/// Merge tree over features. Leaves are the features sorted by name.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureDendrogram {
    pub labels: Vec<String>,
    pub merges: Vec<Merge>,
    pub linkage: Linkage,
    /// Pairwise correlation distances in label order.
    pub distances: Array2<f64>,
}

impl FeatureDendrogram {
    pub fn leaves(&self) -> usize {
        self.labels.len()
    }

    /// Leaves in drawing order: depth-first from the root, left branch first.
    pub fn leaf_order(&self) -> Vec<usize> {
        let n = self.leaves();
        if self.merges.is_empty() {
            return (0..n).collect();
        }
        let mut order = Vec::with_capacity(n);
        let mut stack = vec![n + self.merges.len() - 1];
        while let Some(id) = stack.pop() {
            if id < n {
                order.push(id);
            } else {
                let m = &self.merges[id - n];
                stack.push(m.right);
                stack.push(m.left);
            }
        }
        order
    }

    /// Partition into `k` clusters by undoing the last `k − 1` merges.
    /// Returns one cluster id per label; ids are numbered by first
    /// appearance in leaf order.
    pub fn cut(&self, k: usize) -> Result<Vec<usize>> {
        let n = self.leaves();
        if k == 0 || k > n {
            return Err(Error::InvalidArgument(format!(
                "cannot cut {n} features into {k} clusters"
            )));
        }
        let mut parent: Vec<usize> = (0..n + self.merges.len()).collect();
        fn root(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for (t, m) in self.merges.iter().take(n - k).enumerate() {
            let id = n + t;
            let (a, b) = (root(&mut parent, m.left), root(&mut parent, m.right));
            parent[a] = id;
            parent[b] = id;
        }
        let mut ids = vec![usize::MAX; n];
        let mut next = 0;
        let mut by_root = std::collections::HashMap::new();
        for leaf in self.leaf_order() {
            let r = root(&mut parent, leaf);
            let id = *by_root.entry(r).or_insert_with(|| {
                next += 1;
                next - 1
            });
            ids[leaf] = id;
        }
        Ok(ids)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureClustering {
    pub dendrogram: FeatureDendrogram,
    pub k: usize,
    /// Cluster id per dendrogram label.
    pub partition: Vec<usize>,
}

impl FeatureClustering {
    /// Member names of each cluster, listed in leaf order.
    pub fn members(&self) -> Vec<Vec<String>> {
        let mut out = vec![Vec::new(); self.k];
        for leaf in self.dendrogram.leaf_order() {
            out[self.partition[leaf]].push(self.dendrogram.labels[leaf].clone());
        }
        out
    }
}

/// Agglomerative clustering of `d` (symmetric, in leaf order) with
/// Lance–Williams updates. Each active cluster sits in the slot of its
/// smallest leaf; equal distances merge the lowest slot pair first.
fn agglomerate(d: &Array2<f64>, linkage: Linkage) -> Vec<Merge> {
    let n = d.nrows();
    let mut dist: Vec<f64> = d.iter().copied().collect();
    let mut active = vec![true; n];
    let mut id: Vec<usize> = (0..n).collect();
    let mut size = vec![1usize; n];
    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    let mut floor = 0.0f64;
    for t in 0..n.saturating_sub(1) {
        let mut best = (f64::INFINITY, 0, 0);
        for i in (0..n).filter(|&i| active[i]) {
            let row = &dist[i * n..(i + 1) * n];
            for j in (i + 1..n).filter(|&j| active[j]) {
                if row[j] < best.0 {
                    best = (row[j], i, j);
                }
            }
        }
        let (h, i, j) = best;
        // rounding in the average update must not make the tree non-monotone
        floor = floor.max(h);
        merges.push(Merge {
            left: id[i],
            right: id[j],
            height: floor,
            size: size[i] + size[j],
        });
        for k in (0..n).filter(|&k| active[k] && k != i && k != j) {
            let (dik, djk) = (dist[i * n + k], dist[j * n + k]);
            let v = match linkage {
                Linkage::Average => (size[i] as f64 * dik + size[j] as f64 * djk) / (size[i] + size[j]) as f64,
                Linkage::Complete => dik.max(djk),
            };
            dist[i * n + k] = v;
            dist[k * n + i] = v;
        }
        active[j] = false;
        size[i] += size[j];
        id[i] = n + t;
    }
    merges
}

fn sorted_by_name(vectors: &[FeatureVector]) -> Result<Vec<usize>> {
    let mut idx: Vec<usize> = (0..vectors.len()).collect();
    idx.sort_by(|&a, &b| vectors[a].feature.cmp(&vectors[b].feature));
    if let Some(w) = idx.windows(2).find(|w| vectors[w[0]].feature == vectors[w[1]].feature) {
        return Err(Error::InvalidArgument(format!(
            "duplicate feature `{}`",
            vectors[w[0]].feature
        )));
    }
    Ok(idx)
}

/// Hierarchical clustering of feature vectors under correlation distance,
/// cut into `k` clusters. Leaves are ordered by feature name so that the
/// result does not depend on input order. Vectors of a single value are
/// constant, so every pair of them is at distance 1.
pub fn cluster_features(vectors: &[FeatureVector], linkage: Linkage, k: usize) -> Result<FeatureClustering> {
    if vectors.is_empty() {
        return Err(Error::Empty("no features to cluster".into()));
    }
    let len = vectors[0].values.len();
    if let Some(v) = vectors.iter().find(|v| v.values.len() != len) {
        return Err(Error::ShapeMismatch {
            expected: len,
            actual: v.values.len(),
        });
    }
    if len == 0 {
        return Err(Error::Empty("feature vectors have no values".into()));
    }
    let order = sorted_by_name(vectors)?;
    let sorted: Vec<FeatureVector> = order.iter().map(|&i| vectors[i].clone()).collect();
    let distances = distance_matrix(&sorted, Exec::default());
    let dendrogram = FeatureDendrogram {
        labels: sorted.into_iter().map(|v| v.feature).collect(),
        merges: agglomerate(&distances, linkage),
        linkage,
        distances,
    };
    let partition = dendrogram.cut(k)?;
    Ok(FeatureClustering {
        dendrogram,
        k,
        partition,
    })
}

/// Input indices of `vectors` in dendrogram leaf order, and their distance
/// matrix permuted the same way.
pub fn heatmap_order(vectors: &[FeatureVector], dendrogram: &FeatureDendrogram) -> Result<(Vec<usize>, Array2<f64>)> {
    if vectors.len() != dendrogram.leaves() {
        return Err(Error::ShapeMismatch {
            expected: dendrogram.leaves(),
            actual: vectors.len(),
        });
    }
    let mut perm = Vec::with_capacity(vectors.len());
    let mut leaves = Vec::with_capacity(vectors.len());
    for leaf in dendrogram.leaf_order() {
        let name = &dendrogram.labels[leaf];
        let i = vectors
            .iter()
            .position(|v| &v.feature == name)
            .ok_or_else(|| Error::UnknownFeature {
                name: name.clone(),
                available: vectors.iter().map(|v| v.feature.clone()).collect(),
            })?;
        perm.push(i);
        leaves.push(leaf);
    }
    let d = &dendrogram.distances;
    let permuted = Array2::from_shape_fn((leaves.len(), leaves.len()), |(a, b)| d[[leaves[a], leaves[b]]]);
    Ok((perm, permuted))
}
