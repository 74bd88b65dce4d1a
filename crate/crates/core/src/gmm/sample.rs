use ndarray::{Array2, ArrayView2};
use rand::distr::{weighted::WeightedIndex, Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::ingest::{MacAddr, Period, UsageRecord, UNKNOWN_BUILDING};
use crate::matrix::{FeatureAxis, Normalization, RowNorm};
use crate::par::Exec;
use crate::som::FeatureLabels;

use super::GmmModel;

/// Rows drawn from one generator stream.
const CHUNK: usize = 1024;

/// `n` draws from the mixture, one per row; see [`sample_with`].
pub fn sample(gmm: &GmmModel, n: usize, seed: u64) -> Result<Array2<f64>> {
    sample_with(gmm, n, seed, Exec::default())
}

/// Draws a component index with probability `alpha`, then a point from
/// that component's Gaussian. Rows are generated in chunks of 1024, chunk
/// `c` from stream `c` of a generator seeded with `seed`, so the output does
/// not depend on the execution mode.
pub fn sample_with(gmm: &GmmModel, n: usize, seed: u64, exec: Exec) -> Result<Array2<f64>> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample count must be at least 1".into()));
    }
    let pick = WeightedIndex::new(gmm.alphas()).map_err(|e| Error::Numerical(format!("mixing weights: {e}")))?;
    let dim = gmm.dim();
    let mut out = Array2::zeros((n, dim));
    let exec = exec.for_work(n * dim * dim.max(8));
    exec.for_each_chunk_mut(
        out.as_slice_mut().expect("fresh array is contiguous"),
        CHUNK * dim.max(1),
        |c, rows| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let mut z = vec![0.0; dim];
            for row in rows.chunks_mut(dim.max(1)) {
                let comp = &gmm.components[pick.sample(&mut rng)];
                for v in z.iter_mut() {
                    *v = StandardNormal.sample(&mut rng);
                }
                comp.transform(&z, &mut row[..dim]);
            }
        },
    );
    Ok(out)
}

/// Maps normalized samples back to minutes: each row is multiplied by a
/// scale drawn uniformly from `row_scales` (skipped when rows were not
/// normalized), the log transform is undone with `exp(x) − 1`, and negative
/// results are clamped to 0.
pub fn denormalize(
    samples: ArrayView2<f64>,
    normalization: Normalization,
    row_scales: &[f64],
    seed: u64,
) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX);
    let pick = (!row_scales.is_empty() && normalization.row_norm != RowNorm::None)
        .then(|| Uniform::new(0, row_scales.len()).expect("non-empty range"));
    let mut out = samples.to_owned();
    for mut row in out.rows_mut() {
        let scale = pick.as_ref().map_or(1.0, |u| row_scales[u.sample(&mut rng)]);
        row.mapv_inplace(|v| {
            let v = v * scale;
            let v = if normalization.log_applied { v.exp_m1() } else { v };
            v.max(0.0)
        });
    }
    out
}

/// Address of simulated user `i`: locally administered, `02:00:00:xx:xx:xx`.
pub fn synthetic_user(i: usize) -> Result<MacAddr> {
    if i >= 1 << 24 {
        return Err(Error::InvalidArgument(format!("at most {} simulated users", 1 << 24)));
    }
    Ok(MacAddr([0x02, 0, 0, (i >> 16) as u8, (i >> 8) as u8, i as u8]))
}

/// Usage records for simulated users, one per positive cell. `axis` tells
/// what vector labels name; the missing side is recorded as `UNKNOWN`.
pub fn synthetic_records(
    minutes: ArrayView2<f64>,
    labels: &FeatureLabels,
    axis: FeatureAxis,
    period: Period,
) -> Result<Vec<UsageRecord>> {
    if minutes.ncols() != labels.dim() {
        return Err(Error::ShapeMismatch {
            expected: labels.dim(),
            actual: minutes.ncols(),
        });
    }
    let cell = |k: usize| -> (String, String) {
        match labels {
            FeatureLabels::Matrix { domains, buildings } => {
                let b = buildings.len();
                (domains[k / b].clone(), buildings[k % b].clone())
            }
            FeatureLabels::Vector(names) => match axis {
                FeatureAxis::Domain => (names[k].clone(), UNKNOWN_BUILDING.to_string()),
                FeatureAxis::Building => (UNKNOWN_BUILDING.to_string(), names[k].clone()),
            },
        }
    };
    let mut out = Vec::new();
    for (i, row) in minutes.rows().into_iter().enumerate() {
        let user = synthetic_user(i)?;
        for (k, &v) in row.iter().enumerate() {
            if v > 0.0 {
                let (domain, building) = cell(k);
                out.push(UsageRecord {
                    user,
                    domain,
                    building,
                    period,
                    online_minutes: v,
                });
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::super::tests::mixture;
    use super::super::Covariance;
    use super::*;
    use ndarray::{array, Axis};

    #[test]
    fn tiny_covariance_returns_the_mean() {
        let g = mixture(&[(1.0, vec![3.0, -1.0], Covariance::Full(array![[1e-18, 0.0], [0.0, 1e-18]]))]);
        let s = sample(&g, 50, 1).unwrap();
        assert!(s.rows().into_iter().all(|r| (r[0] - 3.0).abs() < 1e-6 && (r[1] + 1.0).abs() < 1e-6));
        assert!(sample(&g, 0, 1).is_err());
    }

    #[test]
    fn proportions_and_mean() {
        // component means far apart so the draw is identifiable
        let g = mixture(&[
            (0.3, vec![-100.0], Covariance::Diagonal(array![1.0])),
            (0.7, vec![100.0], Covariance::Diagonal(array![1.0])),
        ]);
        let n = 100_000;
        let s = sample(&g, n, 7).unwrap();
        let first = s.iter().filter(|&&v| v < 0.0).count() as f64 / n as f64;
        assert!((first - 0.3).abs() < 0.01, "{first}");

        let one = mixture(&[(1.0, vec![2.0, -3.0], Covariance::Full(array![[4.0, 1.0], [1.0, 1.0]]))]);
        let s = sample(&one, n, 3).unwrap();
        let mean = s.mean_axis(Axis(0)).unwrap();
        let sd = [2.0, 1.0];
        for (j, mu) in [2.0, -3.0].iter().enumerate() {
            assert!((mean[j] - mu).abs() < 4.0 * sd[j] / (n as f64).sqrt());
        }
        let cov01 = s.rows().into_iter().map(|r| (r[0] - mean[0]) * (r[1] - mean[1])).sum::<f64>() / n as f64;
        assert!((cov01 - 1.0).abs() < 0.05);
    }

    #[test]
    fn seeded_and_mode_independent() {
        let g = mixture(&[
            (0.5, vec![0.0, 0.0], Covariance::Full(array![[1.0, 0.5], [0.5, 1.0]])),
            (0.5, vec![5.0, 5.0], Covariance::Diagonal(array![1.0, 2.0])),
        ]);
        let a = sample_with(&g, 5000, 11, Exec::Sequential).unwrap();
        let b = sample_with(&g, 5000, 11, Exec::Parallel).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, sample_with(&g, 5000, 12, Exec::Sequential).unwrap());
        // a shorter run is a prefix of a longer one
        let c = sample_with(&g, 1500, 11, Exec::Sequential).unwrap();
        assert_eq!(c, a.slice(ndarray::s![..1500, ..]));
    }

    #[test]
    fn denormalize_examples() {
        let x = array![[0.25, -1.0, 3.0]];
        assert_eq!(denormalize(x.view(), Normalization::identity(), &[5.0], 0), array![[0.25, 0.0, 3.0]]);

        let log_only = Normalization {
            log_applied: true,
            row_norm: RowNorm::L1,
        };
        let out = denormalize(array![[1.0]].view(), log_only, &[1.0], 0);
        assert!((out[[0, 0]] - (std::f64::consts::E - 1.0)).abs() < 1e-15);
        let zero = denormalize(Array2::zeros((2, 3)).view(), log_only, &[3.0, 9.0], 4);
        assert!(zero.iter().all(|&v| v == 0.0));

        let scaled = denormalize(array![[0.5, 0.5]].view(), Normalization { log_applied: false, row_norm: RowNorm::L1 }, &[4.0], 0);
        assert_eq!(scaled, array![[2.0, 2.0]]);
    }

    #[test]
    fn records_from_minutes() {
        let period: Period = "2008-03".parse().unwrap();
        let m = array![[1.5, 0.0], [0.0, 2.0]];
        let r = synthetic_records(m.view(), &FeatureLabels::Vector(vec!["a".into(), "b".into()]), FeatureAxis::Domain, period).unwrap();
        assert_eq!(r.len(), 2);
        assert_eq!(r[0].user.to_string(), "02:00:00:00:00:00");
        assert_eq!((r[1].domain.as_str(), r[1].building.as_str()), ("b", UNKNOWN_BUILDING));
        assert_eq!(synthetic_user(0x010203).unwrap().to_string(), "02:00:00:01:02:03");

        let labels = FeatureLabels::Matrix {
            domains: vec!["d".into()],
            buildings: vec!["x".into(), "y".into()],
        };
        let r = synthetic_records(m.view(), &labels, FeatureAxis::Domain, period).unwrap();
        assert_eq!((r[1].domain.as_str(), r[1].building.as_str()), ("d", "y"));
        let r = synthetic_records(m.view(), &FeatureLabels::Vector(vec!["p".into(), "q".into()]), FeatureAxis::Building, period).unwrap();
        assert_eq!((r[0].domain.as_str(), r[0].building.as_str()), (UNKNOWN_BUILDING, "p"));
    }
}
