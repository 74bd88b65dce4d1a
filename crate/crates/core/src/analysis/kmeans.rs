use ndarray::{Array2, ArrayView2};
use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::par::Exec;
use crate::som::SomModel;

pub const DEFAULT_RESTARTS: usize = 10;
const MAX_LLOYD_ITERATIONS: usize = 300;

/// Partition of map nodes into major trends.
#[derive(Debug, Clone, PartialEq)]
pub struct TrendClustering {
    pub k: usize,
    /// Cluster id in `0..k` per node (or per point for [`kmeans`]).
    pub assignment: Vec<usize>,
    /// `k × dim`.
    pub centroids: Array2<f64>,
    pub sse: f64,
    /// SSE of every restart, in restart order.
    pub restart_sse: Vec<f64>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

struct Points<'a> {
    data: &'a [f64],
    dim: usize,
    n: usize,
}

impl Points<'_> {
    fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

fn nearest(centroids: &[f64], dim: usize, x: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.chunks(dim).enumerate() {
        let d = sq_dist(centroid, x);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// k-means++ seeding: first centroid uniform, then proportional to squared
/// distance from the nearest chosen centroid.
fn seed_centroids(p: &Points<'_>, k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut centroids = Vec::with_capacity(k * p.dim);
    let first = rng.random_range(0..p.n);
    centroids.extend_from_slice(p.row(first));
    let mut d2: Vec<f64> = (0..p.n).map(|i| sq_dist(p.row(i), p.row(first))).collect();
    for _ in 1..k {
        let pick = match WeightedIndex::new(&d2) {
            Ok(dist) => dist.sample(rng),
            // every point coincides with a centroid
            Err(_) => rng.random_range(0..p.n),
        };
        let chosen = p.row(pick).to_vec();
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(p.row(i), &chosen));
        }
        centroids.extend_from_slice(&chosen);
    }
    centroids
}

fn assign(p: &Points<'_>, centroids: &[f64]) -> Vec<usize> {
    (0..p.n).map(|i| nearest(centroids, p.dim, p.row(i)).0).collect()
}

/// Means of each cluster. An empty cluster takes over the point farthest from
/// its current centroid among clusters with more than one member.
fn update(p: &Points<'_>, k: usize, assignment: &mut [usize], centroids: &[f64]) -> Vec<f64> {
    let mut counts = vec![0usize; k];
    for &a in assignment.iter() {
        counts[a] += 1;
    }
    for empty in 0..k {
        if counts[empty] > 0 {
            continue;
        }
        let donor = (0..p.n)
            .filter(|&i| counts[assignment[i]] > 1)
            .map(|i| {
                let c = assignment[i];
                (i, sq_dist(p.row(i), &centroids[c * p.dim..(c + 1) * p.dim]))
            })
            .fold(None, |best: Option<(usize, f64)>, cur| match best {
                Some(b) if b.1 >= cur.1 => Some(b),
                _ => Some(cur),
            });
        if let Some((i, _)) = donor {
            counts[assignment[i]] -= 1;
            assignment[i] = empty;
            counts[empty] = 1;
        }
    }
    let mut sums = vec![0.0; k * p.dim];
    for i in 0..p.n {
        let c = assignment[i];
        for (s, x) in sums[c * p.dim..(c + 1) * p.dim].iter_mut().zip(p.row(i)) {
            *s += x;
        }
    }
    for c in 0..k {
        if counts[c] > 0 {
            for s in &mut sums[c * p.dim..(c + 1) * p.dim] {
                *s /= counts[c] as f64;
            }
        }
    }
    sums
}

fn sse(p: &Points<'_>, assignment: &[usize], centroids: &[f64]) -> f64 {
    (0..p.n)
        .map(|i| {
            let c = assignment[i];
            sq_dist(p.row(i), &centroids[c * p.dim..(c + 1) * p.dim])
        })
        .sum()
}

fn lloyd(p: &Points<'_>, k: usize, rng: &mut ChaCha8Rng) -> (Vec<usize>, Vec<f64>, f64) {
    let mut centroids = seed_centroids(p, k, rng);
    let mut assignment = assign(p, &centroids);
    for _ in 0..MAX_LLOYD_ITERATIONS {
        centroids = update(p, k, &mut assignment, &centroids);
        let next = assign(p, &centroids);
        if next == assignment {
            break;
        }
        assignment = next;
    }
    // centroids are the means of the returned assignment
    centroids = update(p, k, &mut assignment, &centroids);
    let total = sse(p, &assignment, &centroids);
    (assignment, centroids, total)
}

/// Lloyd's k-means with k-means++ seeding over the rows of `points`, run
/// `restarts` times; the run with the smallest SSE wins (ties go to the
/// earliest restart). Restart `r` uses stream `r` of a generator seeded with
/// `seed`, so results do not depend on scheduling.
pub fn kmeans(points: ArrayView2<f64>, k: usize, restarts: usize, seed: u64, exec: Exec) -> Result<TrendClustering> {
    let n = points.nrows();
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!(
            "k = {k} must be between 1 and the number of points ({n})"
        )));
    }
    if restarts == 0 {
        return Err(Error::InvalidArgument("need at least one restart".into()));
    }
    let owned = points.as_standard_layout().into_owned();
    let p = Points {
        data: owned.as_slice().expect("standard layout"),
        dim: points.ncols(),
        n,
    };
    let exec = exec.for_work(restarts * n * k * p.dim.max(1) * 8);
    let runs = exec.map_range(restarts, |r| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(r as u64);
        lloyd(&p, k, &mut rng)
    });
    let restart_sse: Vec<f64> = runs.iter().map(|r| r.2).collect();
    let best = (0..runs.len()).fold(0, |b, i| if restart_sse[i] < restart_sse[b] { i } else { b });
    let (assignment, centroids, sse) = runs.into_iter().nth(best).expect("at least one restart");
    Ok(TrendClustering {
        k,
        assignment,
        centroids: Array2::from_shape_vec((k, p.dim), centroids).expect("k × dim"),
        sse,
        restart_sse,
    })
}

/// Clusters the map's node weights into `k` major trends.
pub fn cluster_trends(model: &SomModel, k: usize, restarts: usize, seed: u64) -> Result<TrendClustering> {
    kmeans(model.weights.view(), k, restarts, seed, Exec::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Axis};
    use proptest::prelude::*;

    #[test]
    fn k_one_is_the_mean() {
        let pts = array![[0.0, 0.0], [2.0, 0.0], [4.0, 6.0]];
        let c = kmeans(pts.view(), 1, 3, 0, Exec::Sequential).unwrap();
        assert_eq!(c.assignment, vec![0, 0, 0]);
        assert_eq!(c.centroids.row(0).to_vec(), vec![2.0, 2.0]);
        // total variance · n = Σ |x − mean|² = 8 + 4 + 20
        assert!((c.sse - 32.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_k() {
        let pts = array![[0.0], [1.0]];
        assert!(kmeans(pts.view(), 3, 1, 0, Exec::Sequential).is_err());
        assert!(kmeans(pts.view(), 0, 1, 0, Exec::Sequential).is_err());
        assert!(kmeans(pts.view(), 1, 0, 0, Exec::Sequential).is_err());
    }

    #[test]
    fn duplicate_points_fill_all_clusters() {
        let pts = Array2::from_elem((5, 2), 1.0);
        let c = kmeans(pts.view(), 3, 2, 9, Exec::Sequential).unwrap();
        let mut used = c.assignment.clone();
        used.sort();
        used.dedup();
        assert_eq!(used.len(), 3);
        assert_eq!(c.sse, 0.0);
    }

    /// Smallest SSE over every split into two non-empty groups.
    fn brute_force_two_partition(pts: &Array2<f64>) -> (f64, Vec<usize>) {
        let n = pts.nrows();
        let mut best = (f64::INFINITY, vec![]);
        for mask in 1u32..(1 << (n - 1)) {
            let labels: Vec<usize> = (0..n).map(|i| ((mask >> i) & 1) as usize).collect();
            let mut total = 0.0;
            for g in 0..2 {
                let idx: Vec<usize> = (0..n).filter(|&i| labels[i] == g).collect();
                let sub = pts.select(Axis(0), &idx);
                let mean = sub.mean_axis(Axis(0)).unwrap();
                total += sub.rows().into_iter().map(|r| (&r - &mean).mapv(|v| v * v).sum()).sum::<f64>();
            }
            if total < best.0 {
                best = (total, labels);
            }
        }
        best
    }

    fn same_partition(a: &[usize], b: &[usize]) -> bool {
        a.iter().zip(b).all(|(x, y)| x == y) || a.iter().zip(b).all(|(x, y)| x != y)
    }

    #[test]
    fn separated_blobs_match_exhaustive_search() {
        let pts = array![
            [0.0, 0.1], [0.2, 0.0], [10.0, 10.1], [0.1, 0.3], [9.8, 10.0], [10.2, 9.9],
            [0.3, 0.2], [10.1, 10.3], [-0.1, 0.1], [9.9, 9.7], [0.0, -0.2], [10.0, 10.0]
        ];
        let (best_sse, labels) = brute_force_two_partition(&pts);
        let c = kmeans(pts.view(), 2, 10, 1, Exec::Sequential).unwrap();
        assert!(same_partition(&c.assignment, &labels));
        assert!((c.sse - best_sse).abs() < 1e-9);
    }

    #[test]
    fn restarts_are_scheduling_independent() {
        let pts = Array2::from_shape_fn((200, 3), |(i, j)| ((i * 31 + j * 17) % 97) as f64);
        let a = kmeans(pts.view(), 5, 8, 4, Exec::Sequential).unwrap();
        let b = kmeans(pts.view(), 5, 8, 4, Exec::Parallel).unwrap();
        assert_eq!(a, b);
    }

    proptest! {
        #[test]
        fn best_restart_and_centroids_are_means(
            raw in proptest::collection::vec(-10.0f64..10.0, 16..60),
            k in 1usize..5,
            seed in any::<u64>(),
        ) {
            let n = raw.len() / 2;
            let pts = Array2::from_shape_vec((n, 2), raw[..n * 2].to_vec()).unwrap();
            let c = kmeans(pts.view(), k, 4, seed, Exec::Sequential).unwrap();
            prop_assert!(c.restart_sse.iter().all(|&s| c.sse <= s));
            prop_assert_eq!(c.assignment.len(), n);
            for cluster in 0..k {
                let idx: Vec<usize> = (0..n).filter(|&i| c.assignment[i] == cluster).collect();
                if idx.is_empty() { continue; }
                let mean = pts.select(Axis(0), &idx).mean_axis(Axis(0)).unwrap();
                for (m, x) in mean.iter().zip(c.centroids.row(cluster)) {
                    prop_assert!((m - x).abs() < 1e-9);
                }
            }
        }
    }
}
