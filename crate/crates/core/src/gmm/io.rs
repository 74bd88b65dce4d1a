//! Mixture files.
//!
//! ```text
//! trendmap-gmm 1
//! grid <rows> <cols> <topology>
//! labels ...                    (as in model files)
//! log <bool>
//! norm <none|l1|l2|max>
//! scales <original row norms...>
//! covariance <full|diagonal>
//! components <K>
//! component <node> <alpha>      (K times, each followed by:)
//! mu <values...>
//! sigma                         then one row per feature (full), or
//! sigma <variances...>          (diagonal)
//! end
//! ```

use std::io::Write;

use ndarray::{Array1, Array2};

use crate::error::Result;
use crate::matrix::{Normalization, RowNorm};
use crate::som::io::{parse_tok, read_grid, read_labels, write_labels};
use crate::textfmt::{fmt_f64, join_f64, SectionReader};

use super::{Covariance, CovarianceMode, GmmComponent, GmmModel};

const KIND: &str = "gmm";
const VERSION: u32 = 1;

pub fn write_gmm<W: Write>(mut out: W, gmm: &GmmModel) -> Result<()> {
    let g = &gmm.grid;
    writeln!(out, "trendmap-{KIND} {VERSION}")?;
    writeln!(out, "grid {} {} {}", g.rows, g.cols, g.topology)?;
    write_labels(&mut out, &gmm.labels)?;
    writeln!(out, "log {}", gmm.normalization.log_applied)?;
    writeln!(out, "norm {}", gmm.normalization.row_norm)?;
    writeln!(out, "scales {}", join_f64(gmm.row_scales.iter().copied()))?;
    let mode = gmm.components[0].sigma.mode();
    writeln!(out, "covariance {mode}")?;
    writeln!(out, "components {}", gmm.components.len())?;
    for c in &gmm.components {
        writeln!(out, "component {} {}", c.node, fmt_f64(c.alpha))?;
        writeln!(out, "mu {}", join_f64(c.mu.iter().copied()))?;
        match &c.sigma {
            Covariance::Full(m) => {
                writeln!(out, "sigma")?;
                for row in m.rows() {
                    writeln!(out, "{}", join_f64(row.iter().copied()))?;
                }
            }
            Covariance::Diagonal(v) => writeln!(out, "sigma {}", join_f64(v.iter().copied()))?,
        }
    }
    writeln!(out, "end")?;
    out.flush()?;
    Ok(())
}

/// Parses a mixture file. Errors name the section that failed.
pub fn read_gmm(text: &str) -> Result<GmmModel> {
    let mut r = SectionReader::open(text, KIND, VERSION)?;
    let grid = read_grid(&mut r)?;
    let labels = read_labels(&mut r)?;
    let log_applied: bool = r.parse("log")?;
    let row_norm: RowNorm = {
        let raw = r.field("norm")?;
        parse_tok(&r, "norm", Some(raw.trim()))?
    };
    let row_scales: Vec<f64> = r.parse_list("scales", None)?;
    let mode: CovarianceMode = {
        let raw = r.field("covariance")?;
        parse_tok(&r, "covariance", Some(raw.trim()))?
    };
    let k: usize = r.parse("components")?;
    let dim = labels.dim();
    let mut components = Vec::with_capacity(k);
    for _ in 0..k {
        let raw = r.field("component")?;
        let mut t = raw.split_whitespace();
        let node: usize = parse_tok(&r, "component", t.next())?;
        let alpha: f64 = parse_tok(&r, "component", t.next())?;
        let mu = Array1::from(r.parse_list::<f64>("mu", Some(dim))?);
        let sigma = match mode {
            CovarianceMode::Full => {
                r.field("sigma")?;
                let data = r.rows("sigma", dim, dim)?;
                Covariance::Full(Array2::from_shape_vec((dim, dim), data).map_err(|e| r.err("sigma", e.to_string()))?)
            }
            CovarianceMode::Diagonal => Covariance::Diagonal(Array1::from(r.parse_list::<f64>("sigma", Some(dim))?)),
        };
        let c = GmmComponent::new(node, alpha, mu, sigma).map_err(|e| r.err("component", e.to_string()))?;
        components.push(c);
    }
    r.finish()?;
    GmmModel::new(
        components,
        labels,
        grid,
        Normalization {
            log_applied,
            row_norm,
        },
        row_scales,
    )
    .map_err(|e| crate::error::Error::format("gmm section `components`", e.to_string()))
}
