use std::fmt;
use std::path::Path;

use ndarray::Array2;

use super::Dataset;
use crate::{Error, Result};

/// Selects a CSV column by header name or zero-based position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ColumnRef {
    Name(String),
    Index(usize),
}

impl ColumnRef {
    /// All-digit strings are positions, anything else is a header name.
    pub fn parse(s: &str) -> ColumnRef {
        let s = s.trim();
        match s.parse::<usize>() {
            Ok(i) => ColumnRef::Index(i),
            Err(_) => ColumnRef::Name(s.to_string()),
        }
    }

    pub fn parse_list(s: &str) -> Vec<ColumnRef> {
        s.split(',')
            .filter(|t| !t.trim().is_empty())
            .map(ColumnRef::parse)
            .collect()
    }
}

impl fmt::Display for ColumnRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ColumnRef::Name(n) => f.write_str(n),
            ColumnRef::Index(i) => write!(f, "{i}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RejectedRow {
    /// 1-based line number in the file.
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LoadReport {
    pub rows_read: usize,
    pub rejected: Vec<RejectedRow>,
}

impl fmt::Display for LoadReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "read {} rows, rejected {}",
            self.rows_read,
            self.rejected.len()
        )?;
        for r in &self.rejected {
            writeln!(f, "  line {}: {}", r.line, r.reason)?;
        }
        Ok(())
    }
}

/// Reads selected columns of a comma-separated file. Rows with a missing or
/// unparseable cell are skipped and listed in the report.
pub fn load_csv(
    path: &Path,
    feature_columns: &[ColumnRef],
    target_columns: &[ColumnRef],
    header: bool,
) -> Result<(Dataset, LoadReport)> {
    if feature_columns.is_empty() || target_columns.is_empty() {
        return Err(Error::InvalidArgument(
            "need at least one feature and one target column".into(),
        ));
    }
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);

    let headers: Option<Vec<String>> = if header {
        Some(reader.headers()?.iter().map(str::to_string).collect())
    } else {
        None
    };
    let resolve = |c: &ColumnRef| -> Result<usize> {
        match (c, &headers) {
            (ColumnRef::Index(i), Some(h)) if *i >= h.len() => {
                Err(Error::MissingColumn(c.to_string()))
            }
            (ColumnRef::Index(i), _) => Ok(*i),
            (ColumnRef::Name(n), Some(h)) => h
                .iter()
                .position(|x| x == n)
                .ok_or_else(|| Error::MissingColumn(n.clone())),
            (ColumnRef::Name(n), None) => Err(Error::MissingColumn(n.clone())),
        }
    };
    let fcols = feature_columns
        .iter()
        .map(resolve)
        .collect::<Result<Vec<_>>>()?;
    let tcols = target_columns
        .iter()
        .map(resolve)
        .collect::<Result<Vec<_>>>()?;

    let mut report = LoadReport::default();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for record in reader.records() {
        let record = record?;
        report.rows_read += 1;
        let line = record.position().map_or(0, |p| p.line());
        let parse = |cols: &[usize]| -> std::result::Result<Vec<f64>, String> {
            cols.iter()
                .map(|&c| {
                    let cell = record.get(c).ok_or_else(|| format!("missing column {c}"))?;
                    match cell.parse::<f64>() {
                        Ok(v) if v.is_finite() => Ok(v),
                        _ => Err(format!("column {c}: cannot parse {cell:?}")),
                    }
                })
                .collect()
        };
        match (parse(&fcols), parse(&tcols)) {
            (Ok(x), Ok(y)) => {
                xs.extend(x);
                ys.extend(y);
            }
            (Err(reason), _) | (_, Err(reason)) => {
                report.rejected.push(RejectedRow { line, reason })
            }
        }
    }

    let n = xs.len() / fcols.len();
    if n == 0 {
        return Err(Error::NoUsableRows(path.to_path_buf()));
    }
    let x = Array2::from_shape_vec((n, fcols.len()), xs).expect("row-major features");
    let y = Array2::from_shape_vec((n, tcols.len()), ys).expect("row-major targets");
    let mut dataset = Dataset::new(x, y)?;
    if let Some(h) = &headers {
        let names = |cols: &[usize]| cols.iter().map(|&c| h[c].clone()).collect();
        dataset = dataset.with_names(names(&fcols), names(&tcols))?;
    }
    Ok((dataset, report))
}

/// Writes features then targets, with a header row of column names.
pub fn write_csv(dataset: &Dataset, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(dataset.feature_names().iter().chain(dataset.target_names()))?;
    for i in 0..dataset.len() {
        let row: Vec<String> = dataset
            .feature_row(i)
            .iter()
            .chain(dataset.target_row(i).iter())
            .map(|v| v.to_string())
            .collect();
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}
