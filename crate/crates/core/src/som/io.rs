//! Model files.
//!
//! ```text
//! trendmap-som 1
//! grid <rows> <cols> <rectangular|hexagonal>
//! labels vector <n>            | labels matrix <domains> <buildings>
//! features\t<names...>         | domains\t<names...> + buildings\t<names...>
//! init <linear|random>
//! log <bool>
//! norm <none|l1|l2|max>
//! scales <original row norms...>
//! schedule none                | schedule <iterations> <r0> <r_final> <eta0> <eta_final> <radius decay> <rate decay> <seed>
//! weights
//! <one line of reals per node>
//! end
//! ```

use std::io::Write;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::matrix::{Normalization, RowNorm};
use crate::textfmt::{fmt_f64, join_f64, join_labels, SectionReader};

use super::grid::{GridSpec, Topology};
use super::init::InitMode;
use super::model::{FeatureLabels, SomModel};
use super::schedule::{Decay, TrainingSchedule};

const KIND: &str = "som";
const VERSION: u32 = 1;

pub fn write_model<W: Write>(mut out: W, model: &SomModel) -> Result<()> {
    let g = &model.grid;
    writeln!(out, "trendmap-{KIND} {VERSION}")?;
    writeln!(out, "grid {} {} {}", g.rows, g.cols, g.topology)?;
    write_labels(&mut out, &model.labels)?;
    writeln!(out, "init {}", model.init)?;
    writeln!(out, "log {}", model.normalization.log_applied)?;
    writeln!(out, "norm {}", model.normalization.row_norm)?;
    writeln!(out, "scales {}", join_f64(model.row_scales.iter().copied()))?;
    match &model.schedule {
        None => writeln!(out, "schedule none")?,
        Some(s) => writeln!(
            out,
            "schedule {} {} {} {} {} {} {} {}",
            s.iterations,
            fmt_f64(s.r0),
            fmt_f64(s.r_final),
            fmt_f64(s.eta0),
            fmt_f64(s.eta_final),
            s.radius_decay,
            s.rate_decay,
            s.seed
        )?,
    }
    writeln!(out, "weights")?;
    for row in model.weights.rows() {
        writeln!(out, "{}", join_f64(row.iter().copied()))?;
    }
    writeln!(out, "end")?;
    out.flush()?;
    Ok(())
}

pub(crate) fn write_labels<W: Write>(out: &mut W, labels: &FeatureLabels) -> Result<()> {
    match labels {
        FeatureLabels::Vector(names) => {
            writeln!(out, "labels vector {}", names.len())?;
            writeln!(out, "features\t{}", join_labels(names))?;
        }
        FeatureLabels::Matrix { domains, buildings } => {
            writeln!(out, "labels matrix {} {}", domains.len(), buildings.len())?;
            writeln!(out, "domains\t{}", join_labels(domains))?;
            writeln!(out, "buildings\t{}", join_labels(buildings))?;
        }
    }
    Ok(())
}

pub(crate) fn read_labels(r: &mut SectionReader<'_>) -> Result<FeatureLabels> {
    let raw = r.field("labels")?;
    let mut t = raw.split_whitespace();
    match t.next() {
        Some("vector") => {
            let n: usize = parse_tok(r, "labels", t.next())?;
            Ok(FeatureLabels::Vector(r.labels("features", n)?))
        }
        Some("matrix") => {
            let d: usize = parse_tok(r, "labels", t.next())?;
            let b: usize = parse_tok(r, "labels", t.next())?;
            Ok(FeatureLabels::Matrix {
                domains: r.labels("domains", d)?,
                buildings: r.labels("buildings", b)?,
            })
        }
        other => Err(r.err("labels", format!("expected vector or matrix, found {other:?}"))),
    }
}

pub(crate) fn read_grid(r: &mut SectionReader<'_>) -> Result<GridSpec> {
    let raw = r.field("grid")?;
    let mut t = raw.split_whitespace();
    let rows: usize = parse_tok(r, "grid", t.next())?;
    let cols: usize = parse_tok(r, "grid", t.next())?;
    let topology: Topology = parse_tok(r, "grid", t.next())?;
    GridSpec::new(rows, cols, topology).map_err(|e| r.err("grid", e.to_string()))
}

pub(crate) fn parse_tok<T: std::str::FromStr>(r: &SectionReader<'_>, section: &str, tok: Option<&str>) -> Result<T> {
    let tok = tok.ok_or_else(|| r.err(section, "missing value"))?;
    tok.parse()
        .map_err(|_| r.err(section, format!("cannot parse `{tok}`")))
}

fn parse_schedule(r: &SectionReader<'_>, raw: &str) -> Result<Option<TrainingSchedule>> {
    if raw.trim() == "none" {
        return Ok(None);
    }
    let mut t = raw.split_whitespace();
    let s = TrainingSchedule {
        iterations: parse_tok(r, "schedule", t.next())?,
        r0: parse_tok(r, "schedule", t.next())?,
        r_final: parse_tok(r, "schedule", t.next())?,
        eta0: parse_tok(r, "schedule", t.next())?,
        eta_final: parse_tok(r, "schedule", t.next())?,
        radius_decay: parse_tok::<Decay>(r, "schedule", t.next())?,
        rate_decay: parse_tok::<Decay>(r, "schedule", t.next())?,
        seed: parse_tok(r, "schedule", t.next())?,
    };
    if t.next().is_some() {
        return Err(r.err("schedule", "trailing values"));
    }
    s.validate().map_err(|e| r.err("schedule", e.to_string()))?;
    Ok(Some(s))
}

/// Parses a model file. Errors name the section that failed.
pub fn read_model(text: &str) -> Result<SomModel> {
    let mut r = SectionReader::open(text, KIND, VERSION)?;

    let grid = read_grid(&mut r)?;

    let labels = read_labels(&mut r)?;

    let init: InitMode = {
        let raw = r.field("init")?;
        parse_tok(&r, "init", Some(raw.trim()))?
    };
    let log_applied: bool = r.parse("log")?;
    let row_norm: RowNorm = {
        let raw = r.field("norm")?;
        parse_tok(&r, "norm", Some(raw.trim()))?
    };
    let row_scales: Vec<f64> = r.parse_list("scales", None)?;
    let schedule = {
        let raw = r.field("schedule")?;
        parse_schedule(&r, raw)?
    };
    r.field("weights")?;
    let dim = labels.dim();
    let data = r.rows("weights", grid.nodes(), dim)?;
    let weights = Array2::from_shape_vec((grid.nodes(), dim), data)
        .map_err(|e| Error::format("som section `weights`", e.to_string()))?;
    r.finish()?;
    Ok(SomModel {
        grid,
        labels,
        weights,
        init,
        schedule,
        normalization: Normalization {
            log_applied,
            row_norm,
        },
        row_scales,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::som::{initialize, train_from, TrainingData};
    use crate::Exec;
    use ndarray::array;

    fn trained() -> SomModel {
        let data = TrainingData::from_samples(array![[0.1, 0.2], [0.3, 1.0 / 3.0], [1e-9, 7.0]]);
        let grid = GridSpec::new(2, 3, Topology::Hexagonal).unwrap();
        let init = initialize(&data, grid, InitMode::Linear, 1).unwrap();
        let s = TrainingSchedule::default_for(&grid, data.len(), 1);
        train_from(init, &data, &s, Exec::Sequential).unwrap().model
    }

    #[test]
    fn round_trip_is_lossless() {
        let m = trained();
        let mut buf = Vec::new();
        write_model(&mut buf, &m).unwrap();
        let back = read_model(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(back, m);

        let mut mm = m.clone();
        mm.labels = FeatureLabels::Matrix {
            domains: vec!["yahoo".into(), "google".into()],
            buildings: vec!["ANH".into()],
        };
        mm.schedule = None;
        let mut buf = Vec::new();
        write_model(&mut buf, &mm).unwrap();
        assert_eq!(read_model(std::str::from_utf8(&buf).unwrap()).unwrap(), mm);
    }

    #[test]
    fn corrupt_sections_are_named() {
        let mut buf = Vec::new();
        write_model(&mut buf, &trained()).unwrap();
        let text = String::from_utf8(buf).unwrap();

        let broken = text.replace("hexagonal", "triangular");
        assert!(read_model(&broken).unwrap_err().to_string().contains("`grid`"));

        let mut lines: Vec<&str> = text.lines().collect();
        let w = lines.iter().position(|l| *l == "weights").unwrap();
        lines[w + 2] = "1.0 nope";
        let err = read_model(&lines.join("\n")).unwrap_err().to_string();
        assert!(err.contains("`weights`"), "{err}");

        let truncated: String = text.lines().take(w + 2).collect::<Vec<_>>().join("\n");
        assert!(read_model(&truncated).unwrap_err().to_string().contains("`weights`"));
        assert!(read_model("trendmap-matrix 1\n").is_err());
    }
}
