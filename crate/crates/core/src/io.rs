//! Space file formats.
//!
//! JSON is canonical: `{"n": 3, "labels": ["a", "b", "c"], "d": [[...], ...]}`
//! with the full row-major matrix. CSV holds `n` rows of `n` comma-separated
//! distances, optionally preceded by a header row of labels. A CSV of point
//! coordinates can be read instead and turned into its Euclidean matrix.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::spaces::{FiniteMetricSpace, MetricError};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("CSV line {line}: {message}")]
    Csv { line: usize, message: String },
    #[error("declared n = {declared} but matrix has {actual} rows")]
    SizeMismatch { declared: usize, actual: usize },
    #[error("unknown format {0:?} (expected json or csv)")]
    UnknownFormat(String),
    #[error("invalid metric: {0}")]
    Metric(#[from] MetricError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Json,
    Csv,
}

impl std::str::FromStr for Format {
    type Err = IoError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            other => Err(IoError::UnknownFormat(other.to_string())),
        }
    }
}

impl Format {
    pub fn from_path(path: &Path) -> Format {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => Format::Csv,
            _ => Format::Json,
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Csv => "csv",
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct SpaceFile {
    n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<String>>,
    d: Vec<Vec<f64>>,
}

pub fn space_to_json(x: &FiniteMetricSpace) -> String {
    let file = SpaceFile { n: x.len(), labels: x.labels().map(<[String]>::to_vec), d: x.to_rows() };
    serde_json::to_string(&file).expect("plain data serializes")
}

pub fn space_from_json(text: &str, tolerance: f64) -> Result<FiniteMetricSpace, IoError> {
    let file: SpaceFile = serde_json::from_str(text)?;
    if file.d.len() != file.n {
        return Err(IoError::SizeMismatch { declared: file.n, actual: file.d.len() });
    }
    let space = FiniteMetricSpace::from_rows(file.d, tolerance)?;
    Ok(match file.labels {
        Some(labels) => space.with_labels(labels)?,
        None => space,
    })
}

pub fn space_to_csv(x: &FiniteMetricSpace) -> String {
    let mut out = String::new();
    if let Some(labels) = x.labels() {
        out.push_str(&labels.join(","));
        out.push('\n');
    }
    for row in x.to_rows() {
        let cells: Vec<String> = row.iter().map(|v| format_number(*v)).collect();
        let _ = writeln!(out, "{}", cells.join(","));
    }
    out
}

/// Shortest decimal that parses back to the same `f64`.
fn format_number(v: f64) -> String {
    format!("{v}")
}

fn parse_rows(text: &str) -> Result<(Option<Vec<String>>, Vec<Vec<f64>>), IoError> {
    let mut header = None;
    let mut rows = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed: Result<Vec<f64>, _> = cells.iter().map(|c| c.parse::<f64>()).collect();
        match parsed {
            Ok(r) => rows.push(r),
            Err(e) => {
                if rows.is_empty() && header.is_none() {
                    header = Some(cells.iter().map(|c| c.to_string()).collect());
                } else {
                    return Err(IoError::Csv { line: idx + 1, message: e.to_string() });
                }
            }
        }
    }
    Ok((header, rows))
}

pub fn space_from_csv(text: &str, tolerance: f64) -> Result<FiniteMetricSpace, IoError> {
    let (header, rows) = parse_rows(text)?;
    let space = FiniteMetricSpace::from_rows(rows, tolerance)?;
    Ok(match header {
        Some(labels) => space.with_labels(labels)?,
        None => space,
    })
}

/// Reads a CSV of point coordinates and returns their Euclidean distances.
pub fn space_from_coordinates_csv(text: &str, tolerance: f64) -> Result<FiniteMetricSpace, IoError> {
    let (_, rows) = parse_rows(text)?;
    if let Some(first) = rows.first() {
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != first.len()) {
            return Err(IoError::Csv {
                line: i + 1,
                message: format!("expected {} coordinates, found {}", first.len(), r.len()),
            });
        }
    }
    Ok(FiniteMetricSpace::from_coordinates(&rows, tolerance)?)
}

fn read_text(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path).map_err(|source| IoError::Io { path: path.to_path_buf(), source })
}

/// Reads a space, choosing the format from the file extension.
pub fn read_space(path: &Path, tolerance: f64, coordinates: bool) -> Result<FiniteMetricSpace, IoError> {
    let text = read_text(path)?;
    match (Format::from_path(path), coordinates) {
        (_, true) => space_from_coordinates_csv(&text, tolerance),
        (Format::Csv, false) => space_from_csv(&text, tolerance),
        (Format::Json, false) => space_from_json(&text, tolerance),
    }
}

pub fn write_space(x: &FiniteMetricSpace, path: &Path, format: Format) -> Result<(), IoError> {
    let text = match format {
        Format::Json => space_to_json(x),
        Format::Csv => space_to_csv(x),
    };
    fs::write(path, text).map_err(|source| IoError::Io { path: path.to_path_buf(), source })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constructions::{random_metric, u_space};
    use proptest::prelude::*;

    #[test]
    fn json_with_labels() {
        let text = r#"{"n": 2, "labels": ["a", "b"], "d": [[0, 1.5], [1.5, 0]]}"#;
        let x = space_from_json(text, 0.0).unwrap();
        assert_eq!(x.labels().unwrap(), &["a".to_string(), "b".to_string()]);
        assert_eq!(space_from_json(&space_to_json(&x), 0.0).unwrap(), x);
        assert!(matches!(
            space_from_json(r#"{"n": 3, "d": [[0, 1], [1, 0]]}"#, 0.0),
            Err(IoError::SizeMismatch { declared: 3, actual: 2 })
        ));
    }

    #[test]
    fn csv_header_and_errors() {
        let x = space_from_csv("a,b,c\n0,1,2\n1,0,1\n2,1,0\n", 0.0).unwrap();
        assert_eq!(x.labels().unwrap()[2], "c");
        assert_eq!(x.dist(0, 2), 2.0);
        assert!(matches!(space_from_csv("0,1\nx,0\n", 0.0), Err(IoError::Csv { line: 2, .. })));
        assert!(matches!(space_from_csv("0,3\n1,0\n", 0.0), Err(IoError::Metric(_))));
    }

    #[test]
    fn integer_csv_round_trip_is_exact() {
        let u = u_space(5).unwrap();
        assert_eq!(space_from_csv(&space_to_csv(&u), 0.0).unwrap(), u);
    }

    #[test]
    fn coordinate_csv() {
        let x = space_from_coordinates_csv("x,y\n0,0\n3,4\n", 1e-9).unwrap();
        assert_eq!(x.dist(0, 1), 5.0);
        assert!(space_from_coordinates_csv("0,0\n1\n", 1e-9).is_err());
    }

    proptest! {
        #[test]
        fn json_round_trip_is_bit_identical(n in 1usize..8, seed in 0u64..10_000, diam in 0.01f64..100.0) {
            let x = random_metric(n, seed, diam).unwrap();
            let back = space_from_json(&space_to_json(&x), 1e-9).unwrap();
            prop_assert_eq!(back.as_flat(), x.as_flat());
            let back = space_from_csv(&space_to_csv(&x), 1e-9).unwrap();
            prop_assert_eq!(back.as_flat(), x.as_flat());
        }
    }
}
