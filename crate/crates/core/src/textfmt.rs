//! Line-oriented, self-describing text format shared by matrix, model and
//! mixture files.
//!
//! Every file starts with a `trendmap-<kind> <version>` line followed by
//! `key value` lines. Labels are tab-separated; reals are written with the
//! shortest representation that parses back to the same `f64`, so saving and
//! loading is lossless.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Formats a real so that parsing it yields the identical bits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

pub fn join_f64(values: impl IntoIterator<Item = f64>) -> String {
    let mut out = String::new();
    for (i, v) in values.into_iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        let _ = write!(out, "{v:?}");
    }
    out
}

pub fn join_labels<S: AsRef<str>>(labels: &[S]) -> String {
    labels
        .iter()
        .map(|s| s.as_ref())
        .collect::<Vec<_>>()
        .join("\t")
}

/// Cursor over the lines of a section file.
pub struct SectionReader<'a> {
    kind: &'static str,
    lines: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>,
}

impl<'a> SectionReader<'a> {
    /// Checks the magic line and returns a reader positioned after it.
    pub fn open(text: &'a str, kind: &'static str, version: u32) -> Result<Self> {
        let mut reader = SectionReader {
            kind,
            lines: text.lines().enumerate().peekable(),
        };
        let (_, header) = reader.next_line("header")?;
        let magic = format!("trendmap-{kind}");
        let mut parts = header.split_whitespace();
        if parts.next() != Some(magic.as_str()) {
            return Err(Error::format(
                format!("{kind} header"),
                format!("expected `{magic} {version}`, found `{header}`"),
            ));
        }
        let found: u32 = parts
            .next()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::format(format!("{kind} header"), "missing version"))?;
        if found != version {
            return Err(Error::format(
                format!("{kind} header"),
                format!("unsupported version {found} (expected {version})"),
            ));
        }
        Ok(reader)
    }

    pub fn err(&self, section: &str, message: impl Into<String>) -> Error {
        Error::format(format!("{} section `{section}`", self.kind), message)
    }

    fn next_line(&mut self, section: &str) -> Result<(usize, &'a str)> {
        for (no, line) in self.lines.by_ref() {
            if !line.trim().is_empty() {
                return Ok((no + 1, line));
            }
        }
        Err(Error::format(
            format!("{} section `{section}`", self.kind),
            "unexpected end of file",
        ))
    }

    /// Reads a `key value` line and returns the value part (may be empty).
    pub fn field(&mut self, key: &str) -> Result<&'a str> {
        let (no, line) = self.next_line(key)?;
        let (found, rest) = match line.split_once([' ', '\t']) {
            Some((k, r)) => (k, r),
            None => (line.trim_end(), ""),
        };
        if found != key {
            return Err(self.err(key, format!("line {no}: expected `{key}`, found `{found}`")));
        }
        Ok(rest)
    }

    /// Reads a field and parses it as a single value.
    pub fn parse<T: FromStr>(&mut self, key: &str) -> Result<T> {
        let raw = self.field(key)?.trim();
        raw.parse()
            .map_err(|_| self.err(key, format!("cannot parse `{raw}`")))
    }

    /// Reads a field of whitespace-separated values.
    pub fn parse_list<T: FromStr>(&mut self, key: &str, expected: Option<usize>) -> Result<Vec<T>> {
        let raw = self.field(key)?;
        let values = parse_values(raw).map_err(|tok| self.err(key, format!("cannot parse `{tok}`")))?;
        if let Some(n) = expected {
            if values.len() != n {
                return Err(self.err(key, format!("expected {n} values, found {}", values.len())));
            }
        }
        Ok(values)
    }

    /// Reads a field of tab-separated labels.
    pub fn labels(&mut self, key: &str, expected: usize) -> Result<Vec<String>> {
        let raw = self.field(key)?;
        let labels: Vec<String> = if raw.is_empty() {
            Vec::new()
        } else {
            raw.split('\t').map(str::to_string).collect()
        };
        if labels.len() != expected {
            return Err(self.err(
                key,
                format!("expected {expected} labels, found {}", labels.len()),
            ));
        }
        Ok(labels)
    }

    /// Reads `rows` lines of exactly `cols` finite reals each.
    pub fn rows(&mut self, section: &str, rows: usize, cols: usize) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let (no, line) = self.next_line(section)?;
            let values: Vec<f64> = parse_values(line)
                .map_err(|tok| self.err(section, format!("line {no}: cannot parse `{tok}`")))?;
            if values.len() != cols {
                return Err(self.err(
                    section,
                    format!("line {no}: expected {cols} values, found {}", values.len()),
                ));
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(self.err(section, format!("line {no}: non-finite value")));
            }
            out.extend(values);
        }
        Ok(out)
    }

    /// Requires the terminating `end` line.
    pub fn finish(mut self) -> Result<()> {
        let (no, line) = self.next_line("end")?;
        if line.trim() != "end" {
            return Err(self.err("end", format!("line {no}: expected `end`")));
        }
        Ok(())
    }
}

fn parse_values<T: FromStr>(raw: &str) -> std::result::Result<Vec<T>, String> {
    raw.split_whitespace()
        .map(|tok| tok.parse::<T>().map_err(|_| tok.to_string()))
        .collect()
}
