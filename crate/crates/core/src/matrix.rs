//! User×feature matrices and user×domain×building tensors built from usage
//! records, plus their log/row normalization and file format.
//!
//! # File format
//!
//! ```text
//! trendmap-matrix 1
//! kind matrix|tensor|grid
//! shape <dims...>
//! ```
//!
//! followed, for `matrix`, by `log <bool>`, `norm <none|l1|l2|max>`,
//! `rows <tab-separated user labels>`, `cols <tab-separated feature labels>`,
//! `scales <one original row norm per user>`, `data`, one line of
//! space-separated reals per user, and `end`. A `tensor` has `domains` and
//! `buildings` label lines instead of `cols`, and its data is written as one
//! line per (user, domain) holding the building values. A `grid` (U-matrix,
//! feature map, alpha map) has only `data` and `end`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use ndarray::{Array2, Array3, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::ingest::UsageRecord;
use crate::textfmt::{join_f64, join_labels, SectionReader};

pub const DEFAULT_TENSOR_DOMAINS: usize = 40;
pub const DEFAULT_TENSOR_BUILDINGS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureAxis {
    Domain,
    Building,
}

/// Online minutes per user (row) and feature (column).
#[derive(Debug, Clone, PartialEq)]
pub struct UsageMatrix {
    pub users: Vec<String>,
    pub features: Vec<String>,
    pub values: Array2<f64>,
}

/// Online minutes per user, domain and building.
#[derive(Debug, Clone, PartialEq)]
pub struct UsageTensor {
    pub users: Vec<String>,
    pub domains: Vec<String>,
    pub buildings: Vec<String>,
    /// Indexed `[user, domain, building]`.
    pub values: Array3<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RowNorm {
    None,
    #[default]
    L1,
    L2,
    Max,
}

impl RowNorm {
    pub fn of(self, row: impl Iterator<Item = f64>) -> f64 {
        match self {
            RowNorm::None => 1.0,
            RowNorm::L1 => row.map(f64::abs).sum(),
            RowNorm::L2 => row.map(|x| x * x).sum::<f64>().sqrt(),
            RowNorm::Max => row.map(f64::abs).fold(0.0, f64::max),
        }
    }
}

impl fmt::Display for RowNorm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RowNorm::None => "none",
            RowNorm::L1 => "l1",
            RowNorm::L2 => "l2",
            RowNorm::Max => "max",
        })
    }
}

impl FromStr for RowNorm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "none" => Ok(RowNorm::None),
            "l1" => Ok(RowNorm::L1),
            "l2" => Ok(RowNorm::L2),
            "max" => Ok(RowNorm::Max),
            other => Err(Error::InvalidArgument(format!(
                "row norm `{other}` (expected none, l1, l2 or max)"
            ))),
        }
    }
}

/// How a matrix was normalized; travels with models so samples can be
/// mapped back to minutes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Normalization {
    pub log_applied: bool,
    pub row_norm: RowNorm,
}

impl Normalization {
    pub fn identity() -> Self {
        Normalization {
            log_applied: false,
            row_norm: RowNorm::None,
        }
    }
}

impl Default for Normalization {
    fn default() -> Self {
        Normalization {
            log_applied: true,
            row_norm: RowNorm::L1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedMatrix {
    pub matrix: UsageMatrix,
    pub normalization: Normalization,
    /// Norm of each row before scaling (0 for zero rows).
    pub row_scales: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedTensor {
    pub tensor: UsageTensor,
    pub normalization: Normalization,
    /// Norm of each flattened user slice before scaling.
    pub row_scales: Vec<f64>,
}

fn index_of(labels: &BTreeSet<&str>) -> HashMap<String, usize> {
    labels
        .iter()
        .enumerate()
        .map(|(i, s)| (s.to_string(), i))
        .collect()
}

/// Sums minutes per (user, feature) over periods and the other axis. Users and
/// features are sorted lexicographically.
pub fn build_matrix(records: &[UsageRecord], axis: FeatureAxis) -> Result<UsageMatrix> {
    if records.is_empty() {
        return Err(Error::Empty("no usage records".into()));
    }
    fn feature(r: &UsageRecord, axis: FeatureAxis) -> &str {
        match axis {
            FeatureAxis::Domain => &r.domain,
            FeatureAxis::Building => &r.building,
        }
    }
    let users: BTreeSet<String> = records.iter().map(|r| r.user.to_string()).collect();
    let features: BTreeSet<&str> = records.iter().map(|r| feature(r, axis)).collect();
    let user_idx: HashMap<&str, usize> =
        users.iter().enumerate().map(|(i, u)| (u.as_str(), i)).collect();
    let feat_idx = index_of(&features);
    let mut values = Array2::zeros((users.len(), features.len()));
    for r in records {
        let u = user_idx[r.user.to_string().as_str()];
        let f = feat_idx[feature(r, axis)];
        values[[u, f]] += r.online_minutes;
    }
    Ok(UsageMatrix {
        users: users.into_iter().collect(),
        features: features.into_iter().map(str::to_string).collect(),
        values,
    })
}

/// Picks the `k` labels with the largest totals (ties by name), returned in
/// lexicographic order.
fn top_by_total<'a>(totals: &BTreeMap<&'a str, f64>, k: usize, what: &str) -> BTreeSet<&'a str> {
    if totals.len() < k {
        log::warn!(
            "requested top {k} {what} but only {} are present; using all",
            totals.len()
        );
    }
    let mut ranked: Vec<(&str, f64)> = totals.iter().map(|(&s, &t)| (s, t)).collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(b.0)));
    ranked.into_iter().take(k).map(|(s, _)| s).collect()
}

/// Builds a tensor restricted to the most active domains and buildings
/// (ranked by total minutes). Users with no minutes on the retained cells are
/// left out.
pub fn build_tensor(
    records: &[UsageRecord],
    top_domains: usize,
    top_buildings: usize,
) -> Result<UsageTensor> {
    if top_domains == 0 || top_buildings == 0 {
        return Err(Error::InvalidArgument(
            "tensor axis sizes must be positive".into(),
        ));
    }
    if records.is_empty() {
        return Err(Error::Empty("no usage records".into()));
    }
    let mut domain_totals: BTreeMap<&str, f64> = BTreeMap::new();
    let mut building_totals: BTreeMap<&str, f64> = BTreeMap::new();
    for r in records {
        *domain_totals.entry(&r.domain).or_default() += r.online_minutes;
        *building_totals.entry(&r.building).or_default() += r.online_minutes;
    }
    let domains = top_by_total(&domain_totals, top_domains, "domains");
    let buildings = top_by_total(&building_totals, top_buildings, "buildings");
    let kept: Vec<&UsageRecord> = records
        .iter()
        .filter(|r| domains.contains(r.domain.as_str()) && buildings.contains(r.building.as_str()))
        .collect();
    let users: BTreeSet<String> = kept.iter().map(|r| r.user.to_string()).collect();
    let user_idx: HashMap<&str, usize> =
        users.iter().enumerate().map(|(i, u)| (u.as_str(), i)).collect();
    let d_idx = index_of(&domains);
    let b_idx = index_of(&buildings);
    let mut values = Array3::zeros((users.len(), domains.len(), buildings.len()));
    for r in kept {
        let u = user_idx[r.user.to_string().as_str()];
        values[[u, d_idx[&r.domain], b_idx[&r.building]]] += r.online_minutes;
    }
    Ok(UsageTensor {
        users: users.into_iter().collect(),
        domains: domains.into_iter().map(str::to_string).collect(),
        buildings: buildings.into_iter().map(str::to_string).collect(),
        values,
    })
}

impl UsageMatrix {
    /// Keeps the `k` features with the largest column totals, in their
    /// existing order.
    pub fn top_features(&self, k: usize) -> UsageMatrix {
        let totals: BTreeMap<&str, f64> = self
            .features
            .iter()
            .zip(self.values.sum_axis(Axis(0)))
            .map(|(f, t)| (f.as_str(), t))
            .collect();
        let keep = top_by_total(&totals, k, "features");
        self.select_features(|f| keep.contains(f))
    }

    /// Removes one feature column if present.
    pub fn without_feature(&self, name: &str) -> UsageMatrix {
        self.select_features(|f| f != name)
    }

    fn select_features(&self, keep: impl Fn(&str) -> bool) -> UsageMatrix {
        let cols: Vec<usize> = (0..self.features.len())
            .filter(|&j| keep(&self.features[j]))
            .collect();
        UsageMatrix {
            users: self.users.clone(),
            features: cols.iter().map(|&j| self.features[j].clone()).collect(),
            values: self.values.select(Axis(1), &cols).as_standard_layout().into_owned(),
        }
    }

    /// Drops users whose row is all zero and returns how many were dropped.
    pub fn drop_zero_rows(&mut self) -> usize {
        let keep: Vec<usize> = (0..self.users.len())
            .filter(|&i| self.values.row(i).iter().any(|&v| v != 0.0))
            .collect();
        let dropped = self.users.len() - keep.len();
        if dropped > 0 {
            log::warn!("dropping {dropped} all-zero user row(s)");
            self.values = self.values.select(Axis(0), &keep);
            self.users = keep.iter().map(|&i| self.users[i].clone()).collect();
        }
        dropped
    }
}

impl UsageTensor {
    /// Drops users whose slice is all zero and returns how many were dropped.
    pub fn drop_zero_rows(&mut self) -> usize {
        let keep: Vec<usize> = (0..self.users.len())
            .filter(|&i| self.values.index_axis(Axis(0), i).iter().any(|&v| v != 0.0))
            .collect();
        let dropped = self.users.len() - keep.len();
        if dropped > 0 {
            log::warn!("dropping {dropped} all-zero user slice(s)");
            self.values = self.values.select(Axis(0), &keep);
            self.users = keep.iter().map(|&i| self.users[i].clone()).collect();
        }
        dropped
    }

    /// View with one row per user and the domain×building slice flattened
    /// row-major.
    pub fn flattened(&self) -> ArrayView2<'_, f64> {
        let (u, d, b) = self.values.dim();
        self.values
            .view()
            .into_shape_with_order((u, d * b))
            .expect("tensor is contiguous")
    }
}

/// Applies `x → ln(1 + x)` when requested, then scales each row to unit norm.
/// Returns the pre-scaling norm per row. Zero rows are left untouched.
fn normalize_rows(values: &mut Array2<f64>, log_applied: bool, row_norm: RowNorm) -> Vec<f64> {
    if log_applied {
        values.mapv_inplace(f64::ln_1p);
    }
    let mut scales = Vec::with_capacity(values.nrows());
    for mut row in values.rows_mut() {
        let norm = row_norm.of(row.iter().copied());
        if norm > 0.0 && row_norm != RowNorm::None {
            row.mapv_inplace(|x| x / norm);
        }
        scales.push(if row.iter().all(|&x| x == 0.0) { 0.0 } else { norm });
    }
    scales
}

pub fn normalize_matrix(m: &UsageMatrix, log_applied: bool, row_norm: RowNorm) -> NormalizedMatrix {
    let mut matrix = m.clone();
    let row_scales = normalize_rows(&mut matrix.values, log_applied, row_norm);
    NormalizedMatrix {
        matrix,
        normalization: Normalization {
            log_applied,
            row_norm,
        },
        row_scales,
    }
}

/// Normalizes per user slice (the flattened domain×building block).
pub fn normalize_tensor(t: &UsageTensor, log_applied: bool, row_norm: RowNorm) -> NormalizedTensor {
    let (u, d, b) = t.values.dim();
    let mut flat = t.flattened().to_owned();
    let row_scales = normalize_rows(&mut flat, log_applied, row_norm);
    let values = flat
        .into_shape_with_order((u, d, b))
        .expect("shape preserved");
    NormalizedTensor {
        tensor: UsageTensor {
            users: t.users.clone(),
            domains: t.domains.clone(),
            buildings: t.buildings.clone(),
            values,
        },
        normalization: Normalization {
            log_applied,
            row_norm,
        },
        row_scales,
    }
}

impl NormalizedMatrix {
    /// Re-applies only the row-scaling step with `row_norm`; the log
    /// transform is never applied twice. Original row scales are kept.
    pub fn renormalize(&self, row_norm: RowNorm) -> NormalizedMatrix {
        let mut matrix = self.matrix.clone();
        normalize_rows(&mut matrix.values, false, row_norm);
        NormalizedMatrix {
            matrix,
            normalization: Normalization {
                log_applied: self.normalization.log_applied,
                row_norm,
            },
            row_scales: self.row_scales.clone(),
        }
    }
}

/// Contents of a matrix-format file.
#[derive(Debug, Clone, PartialEq)]
pub enum MatrixFile {
    Matrix(NormalizedMatrix),
    Tensor(NormalizedTensor),
    Grid(Array2<f64>),
}

const MATRIX_KIND: &str = "matrix";
const MATRIX_VERSION: u32 = 1;

fn write_norm<W: Write>(out: &mut W, n: &Normalization, scales: &[f64]) -> Result<()> {
    writeln!(out, "log {}", n.log_applied)?;
    writeln!(out, "norm {}", n.row_norm)?;
    writeln!(out, "scales {}", join_f64(scales.iter().copied()))?;
    Ok(())
}

pub fn write_matrix<W: Write>(mut out: W, m: &NormalizedMatrix) -> Result<()> {
    let v = &m.matrix.values;
    writeln!(out, "trendmap-{MATRIX_KIND} {MATRIX_VERSION}")?;
    writeln!(out, "kind matrix")?;
    writeln!(out, "shape {} {}", v.nrows(), v.ncols())?;
    writeln!(out, "rows\t{}", join_labels(&m.matrix.users))?;
    writeln!(out, "cols\t{}", join_labels(&m.matrix.features))?;
    write_norm(&mut out, &m.normalization, &m.row_scales)?;
    writeln!(out, "data")?;
    for row in v.rows() {
        writeln!(out, "{}", join_f64(row.iter().copied()))?;
    }
    writeln!(out, "end")?;
    out.flush()?;
    Ok(())
}

pub fn write_tensor<W: Write>(mut out: W, t: &NormalizedTensor) -> Result<()> {
    let (u, d, b) = t.tensor.values.dim();
    writeln!(out, "trendmap-{MATRIX_KIND} {MATRIX_VERSION}")?;
    writeln!(out, "kind tensor")?;
    writeln!(out, "shape {u} {d} {b}")?;
    writeln!(out, "rows\t{}", join_labels(&t.tensor.users))?;
    writeln!(out, "domains\t{}", join_labels(&t.tensor.domains))?;
    writeln!(out, "buildings\t{}", join_labels(&t.tensor.buildings))?;
    write_norm(&mut out, &t.normalization, &t.row_scales)?;
    writeln!(out, "data")?;
    for slice in t.tensor.values.outer_iter() {
        for row in slice.rows() {
            writeln!(out, "{}", join_f64(row.iter().copied()))?;
        }
    }
    writeln!(out, "end")?;
    out.flush()?;
    Ok(())
}

/// Writes a bare grid of values (rows × cols of the map).
pub fn write_grid<W: Write>(mut out: W, grid: ArrayView2<f64>) -> Result<()> {
    writeln!(out, "trendmap-{MATRIX_KIND} {MATRIX_VERSION}")?;
    writeln!(out, "kind grid")?;
    writeln!(out, "shape {} {}", grid.nrows(), grid.ncols())?;
    writeln!(out, "data")?;
    for row in grid.rows() {
        writeln!(out, "{}", join_f64(row.iter().copied()))?;
    }
    writeln!(out, "end")?;
    out.flush()?;
    Ok(())
}

fn read_norm(r: &mut SectionReader<'_>, users: usize) -> Result<(Normalization, Vec<f64>)> {
    let log_applied: bool = r.parse("log")?;
    let row_norm: RowNorm = r
        .field("norm")?
        .parse()
        .map_err(|e: Error| r.err("norm", e.to_string()))?;
    let scales = r.parse_list("scales", Some(users))?;
    Ok((
        Normalization {
            log_applied,
            row_norm,
        },
        scales,
    ))
}

pub fn read_matrix_file(text: &str) -> Result<MatrixFile> {
    let mut r = SectionReader::open(text, MATRIX_KIND, MATRIX_VERSION)?;
    let kind = r.field("kind")?.trim().to_string();
    let file = match kind.as_str() {
        "matrix" => {
            let shape: Vec<usize> = r.parse_list("shape", Some(2))?;
            let users = r.labels("rows", shape[0])?;
            let features = r.labels("cols", shape[1])?;
            let (normalization, row_scales) = read_norm(&mut r, shape[0])?;
            r.field("data")?;
            let data = r.rows("data", shape[0], shape[1])?;
            let values = Array2::from_shape_vec((shape[0], shape[1]), data)
                .map_err(|e| r.err("data", e.to_string()))?;
            MatrixFile::Matrix(NormalizedMatrix {
                matrix: UsageMatrix {
                    users,
                    features,
                    values,
                },
                normalization,
                row_scales,
            })
        }
        "tensor" => {
            let shape: Vec<usize> = r.parse_list("shape", Some(3))?;
            let users = r.labels("rows", shape[0])?;
            let domains = r.labels("domains", shape[1])?;
            let buildings = r.labels("buildings", shape[2])?;
            let (normalization, row_scales) = read_norm(&mut r, shape[0])?;
            r.field("data")?;
            let data = r.rows("data", shape[0] * shape[1], shape[2])?;
            let values = Array3::from_shape_vec((shape[0], shape[1], shape[2]), data)
                .map_err(|e| r.err("data", e.to_string()))?;
            MatrixFile::Tensor(NormalizedTensor {
                tensor: UsageTensor {
                    users,
                    domains,
                    buildings,
                    values,
                },
                normalization,
                row_scales,
            })
        }
        "grid" => {
            let shape: Vec<usize> = r.parse_list("shape", Some(2))?;
            r.field("data")?;
            let data = r.rows("data", shape[0], shape[1])?;
            MatrixFile::Grid(
                Array2::from_shape_vec((shape[0], shape[1]), data)
                    .map_err(|e| r.err("data", e.to_string()))?,
            )
        }
        other => return Err(r.err("kind", format!("unknown kind `{other}`"))),
    };
    r.finish()?;
    Ok(file)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{MacAddr, Period};
    use ndarray::array;

    fn rec(user: u8, domain: &str, building: &str, minutes: f64) -> UsageRecord {
        UsageRecord {
            user: MacAddr([0, 0, 0, 0, 0, user]),
            domain: domain.into(),
            building: building.into(),
            period: Period { year: 2008, month: 3 },
            online_minutes: minutes,
        }
    }

    #[test]
    fn single_record_matrix() {
        let m = build_matrix(&[rec(1, "d", "b", 5.0)], FeatureAxis::Domain).unwrap();
        assert_eq!(m.values, array![[5.0]]);
        assert!(build_matrix(&[], FeatureAxis::Domain).is_err());
    }

    #[test]
    fn matrix_sums_over_other_axis() {
        let m = build_matrix(
            &[rec(1, "d2", "b", 4.0), rec(1, "d1", "a", 1.0), rec(1, "d1", "b", 2.0)],
            FeatureAxis::Domain,
        )
        .unwrap();
        assert_eq!(m.features, vec!["d1", "d2"]);
        assert_eq!(m.values, array![[3.0, 4.0]]);
        let by_b = build_matrix(&[rec(1, "d2", "b", 4.0), rec(2, "d1", "a", 1.0)], FeatureAxis::Building).unwrap();
        assert_eq!(by_b.values, array![[0.0, 4.0], [1.0, 0.0]]);
    }

    #[test]
    fn tensor_keeps_top_axes() {
        let t = build_tensor(&[rec(1, "d", "b", 7.0)], 40, 20).unwrap();
        assert_eq!(t.values.dim(), (1, 1, 1));
        assert_eq!(t.values[[0, 0, 0]], 7.0);

        let t = build_tensor(&[rec(1, "d", "big", 10.0), rec(2, "d", "small", 3.0)], 1, 1).unwrap();
        assert_eq!(t.buildings, vec!["big"]);
        assert_eq!(t.users.len(), 1);
        assert!(build_tensor(&[rec(1, "d", "b", 1.0)], 0, 1).is_err());
    }

    #[test]
    fn log_then_l1() {
        let m = UsageMatrix {
            users: vec!["u".into(), "z".into()],
            features: vec!["a".into(), "b".into()],
            values: array![[std::f64::consts::E - 1.0, 0.0], [0.0, 0.0]],
        };
        let n = normalize_matrix(&m, true, RowNorm::L1);
        assert!((n.matrix.values[[0, 0]] - 1.0).abs() < 1e-15);
        assert_eq!(n.matrix.values[[0, 1]], 0.0);
        assert_eq!(n.matrix.values.row(1).to_vec(), vec![0.0, 0.0]);
        assert_eq!(n.row_scales[1], 0.0);
    }

    #[test]
    fn max_norm_without_log() {
        let m = UsageMatrix {
            users: vec!["u".into()],
            features: vec!["a".into()],
            values: array![[3.0]],
        };
        let n = normalize_matrix(&m, false, RowNorm::Max);
        assert_eq!(n.matrix.values, array![[1.0]]);
        assert_eq!(n.row_scales, vec![3.0]);
    }

    #[test]
    fn zero_rows_dropped() {
        let mut m = UsageMatrix {
            users: vec!["a".into(), "b".into()],
            features: vec!["x".into()],
            values: array![[0.0], [2.0]],
        };
        assert_eq!(m.drop_zero_rows(), 1);
        assert_eq!(m.users, vec!["b"]);
    }

    #[test]
    fn top_features_and_exclusion() {
        let m = UsageMatrix {
            users: vec!["a".into()],
            features: vec!["UNKNOWN".into(), "x".into(), "y".into()],
            values: array![[9.0, 1.0, 5.0]],
        };
        let top = m.top_features(2);
        assert_eq!(top.features, vec!["UNKNOWN", "y"]);
        let no_unknown = m.without_feature("UNKNOWN");
        assert_eq!(no_unknown.values, array![[1.0, 5.0]]);
    }

    #[test]
    fn files_round_trip() {
        let m = UsageMatrix {
            users: vec!["u 1".into(), "u2".into()],
            features: vec!["a".into(), "b".into(), "c".into()],
            values: array![[0.1, 2.0, 1.0 / 3.0], [0.0, 0.0, 7.5]],
        };
        let n = normalize_matrix(&m, true, RowNorm::L2);
        let mut buf = Vec::new();
        write_matrix(&mut buf, &n).unwrap();
        let back = read_matrix_file(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(back, MatrixFile::Matrix(n));

        let t = build_tensor(&[rec(1, "d", "b", 7.0), rec(2, "e", "b", 1.5)], 4, 4).unwrap();
        let nt = normalize_tensor(&t, true, RowNorm::L1);
        let mut buf = Vec::new();
        write_tensor(&mut buf, &nt).unwrap();
        let back = read_matrix_file(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(back, MatrixFile::Tensor(nt));

        let g = array![[1.0, 2.0], [3.0, 4.5]];
        let mut buf = Vec::new();
        write_grid(&mut buf, g.view()).unwrap();
        let back = read_matrix_file(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(back, MatrixFile::Grid(g));
    }

    #[test]
    fn corrupt_file_names_section() {
        let text = "trendmap-matrix 1\nkind matrix\nshape 1 2\nrows\tu\ncols\ta\tb\nlog true\nnorm l1\nscales 1.0\ndata\n1.0 x\nend\n";
        let err = read_matrix_file(text).unwrap_err().to_string();
        assert!(err.contains("`data`"), "{err}");
    }
}
