//! Serialization of series and matrices, and figure-grade SVG rendering.
//!
//! All outputs are deterministic functions of their inputs: fixed float
//! formatting (12 decimal places in CSV), stable iteration orders, no
//! timestamps.

mod subgraph;
mod svg;

pub use subgraph::export_subgraph;
pub use svg::{render_chart, ChartData, ChartKind, ChartSpec};

use std::io::{BufWriter, Write};
use std::path::Path;

use thiserror::Error;

use crate::metrics::{MetricPoint, MetricSeries};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("series {0:?} has no points")]
    EmptySeries(String),
    #[error("chart data is empty")]
    EmptyData,
    #[error("chart data does not match spec kind {0:?}")]
    KindMismatch(String),
    #[error("subgraph of {0} concepts exceeds the export bound of 200")]
    TooLarge(usize),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed series file {path} at line {line}: {message}")]
    Malformed {
        path: String,
        line: usize,
        message: String,
    },
    #[error(transparent)]
    Embedding(#[from] crate::embedding::EmbeddingError),
}

/// `<metric>_<n>_<n_samples>.<ext>` naming convention for metric artifacts.
pub fn series_file_name(metric: &str, n: usize, n_samples: usize, ext: &str) -> String {
    format!("{metric}_{n}_{n_samples}.{ext}")
}

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(v) => format!("{v:.12}"),
        None => String::new(),
    }
}

/// Writes `metric,year,mean,std,n_samples` rows; missing values become
/// empty fields.
pub fn emit_series_csv(series: &MetricSeries, path: &Path) -> Result<(), ReportError> {
    if series.points.is_empty() {
        return Err(ReportError::EmptySeries(series.metric.clone()));
    }
    let io_err = |source| ReportError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut w = BufWriter::new(std::fs::File::create(path).map_err(io_err)?);
    writeln!(w, "metric,year,mean,std,n_samples").map_err(io_err)?;
    for p in &series.points {
        writeln!(
            w,
            "{},{},{},{},{}",
            series.metric,
            p.year,
            fmt_opt(p.mean),
            fmt_opt(p.std),
            p.n_samples
        )
        .map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

/// Reads a series written by [`emit_series_csv`].
pub fn read_series_csv(path: &Path) -> Result<MetricSeries, ReportError> {
    let io_err = |source| ReportError::Io {
        path: path.display().to_string(),
        source,
    };
    let content = std::fs::read_to_string(path).map_err(io_err)?;
    let mut metric = String::new();
    let mut points = Vec::new();
    for (lineno, line) in content.lines().enumerate() {
        if lineno == 0 || line.is_empty() {
            continue;
        }
        let malformed = |message: &str| ReportError::Malformed {
            path: path.display().to_string(),
            line: lineno + 1,
            message: message.to_string(),
        };
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(malformed("expected 5 fields"));
        }
        metric = fields[0].to_string();
        let year: i32 = fields[1].parse().map_err(|_| malformed("bad year"))?;
        let parse_opt = |s: &str| -> Result<Option<f64>, ReportError> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|_| malformed("bad float"))
            }
        };
        let mean = parse_opt(fields[2])?;
        let std = parse_opt(fields[3])?;
        let n_samples: u32 = fields[4].parse().map_err(|_| malformed("bad count"))?;
        points.push(MetricPoint {
            year,
            mean,
            std,
            n_samples,
        });
    }
    Ok(MetricSeries { metric, points })
}

/// Writes one `year,index,value` row per raw sample value, the interchange
/// feeding significance tests.
pub fn emit_samples_csv(
    per_year: &std::collections::BTreeMap<i32, Vec<f64>>,
    path: &Path,
) -> Result<(), ReportError> {
    let io_err = |source| ReportError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut w = BufWriter::new(std::fs::File::create(path).map_err(io_err)?);
    writeln!(w, "year,index,value").map_err(io_err)?;
    for (year, values) in per_year {
        for (i, v) in values.iter().enumerate() {
            writeln!(w, "{year},{i},{v:.12}").map_err(io_err)?;
        }
    }
    w.flush().map_err(io_err)
}

/// Reads a file written by [`emit_samples_csv`].
pub fn read_samples_csv(
    path: &Path,
) -> Result<std::collections::BTreeMap<i32, Vec<f64>>, ReportError> {
    let io_err = |source| ReportError::Io {
        path: path.display().to_string(),
        source,
    };
    let content = std::fs::read_to_string(path).map_err(io_err)?;
    let mut out: std::collections::BTreeMap<i32, Vec<f64>> = std::collections::BTreeMap::new();
    for (lineno, line) in content.lines().enumerate() {
        if lineno == 0 || line.is_empty() {
            continue;
        }
        let malformed = |message: &str| ReportError::Malformed {
            path: path.display().to_string(),
            line: lineno + 1,
            message: message.to_string(),
        };
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(malformed("expected 3 fields"));
        }
        let year: i32 = fields[0].parse().map_err(|_| malformed("bad year"))?;
        let value: f64 = fields[2].parse().map_err(|_| malformed("bad value"))?;
        out.entry(year).or_default().push(value);
    }
    Ok(out)
}
