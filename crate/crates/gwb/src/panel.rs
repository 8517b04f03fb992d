//! Return panels loaded from CSV files of prices or returns.

use std::path::Path;

use gwb_core::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{AppError, Result};

/// What the cells of an input CSV hold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellKind {
    /// Adjusted closing prices; converted to simple returns.
    #[default]
    Prices,
    /// Simple returns, used as given.
    Returns,
}

/// Periods × assets simple returns with their labels.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnsPanel {
    pub dates: Vec<String>,
    pub tickers: Vec<String>,
    pub returns: DMatrix<f64>,
}

impl ReturnsPanel {
    pub fn n_assets(&self) -> usize {
        self.tickers.len()
    }

    pub fn n_periods(&self) -> usize {
        self.dates.len()
    }
}

/// What ingestion threw away.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct LoadReport {
    pub dropped_tickers: Vec<String>,
    pub dropped_rows: usize,
}

fn is_missing(cell: &str) -> bool {
    matches!(cell, "" | "NA" | "N/A" | "NaN" | "nan" | "null")
}

/// Read `date,ticker1,ticker2,...` and return a panel without missing cells.
///
/// Tickers with fewer than `min_history` usable returns are dropped first,
/// then every row that still has a gap.
pub fn load_returns_csv(path: &Path, kind: CellKind, min_history: usize) -> Result<(ReturnsPanel, LoadReport)> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let header = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    if header.len() < 2 {
        return Err(AppError::Parse {
            path: path.to_path_buf(),
            row: 1,
            column: "header".into(),
            message: "expected `date` followed by at least one ticker".into(),
        });
    }
    let tickers: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut dates = Vec::new();
    let mut cells: Vec<Vec<Option<f64>>> = Vec::new();
    for (k, record) in reader.records().enumerate() {
        // header is line 1
        let line = k + 2;
        let record = record.map_err(|e| csv_error(path, e))?;
        if record.len() != header.len() {
            return Err(AppError::Parse {
                path: path.to_path_buf(),
                row: line,
                column: "*".into(),
                message: format!("expected {} fields, found {}", header.len(), record.len()),
            });
        }
        let date = record[0].to_string();
        if let Some(prev) = dates.last() {
            if *prev >= date {
                return Err(AppError::Parse {
                    path: path.to_path_buf(),
                    row: line,
                    column: header[0].to_string(),
                    message: format!("dates must be strictly increasing ({prev} then {date})"),
                });
            }
        }
        let mut row = Vec::with_capacity(tickers.len());
        for (j, cell) in record.iter().enumerate().skip(1) {
            if is_missing(cell) {
                row.push(None);
                continue;
            }
            let value: f64 = cell.parse().map_err(|_| AppError::Parse {
                path: path.to_path_buf(),
                row: line,
                column: header[j].to_string(),
                message: format!("cannot parse {cell:?} as a number"),
            })?;
            if !value.is_finite() {
                return Err(AppError::Parse {
                    path: path.to_path_buf(),
                    row: line,
                    column: header[j].to_string(),
                    message: "non-finite value".into(),
                });
            }
            row.push(Some(value));
        }
        dates.push(date);
        cells.push(row);
    }

    let (dates, cells) = match kind {
        CellKind::Returns => (dates, cells),
        CellKind::Prices => {
            let rets = cells
                .windows(2)
                .map(|w| {
                    w[0].iter()
                        .zip(&w[1])
                        .map(|(a, b)| match (a, b) {
                            (Some(p0), Some(p1)) if *p0 != 0.0 => Some(p1 / p0 - 1.0),
                            _ => None,
                        })
                        .collect()
                })
                .collect();
            (dates.into_iter().skip(1).collect(), rets)
        }
    };

    let mut report = LoadReport::default();
    let keep: Vec<usize> = (0..tickers.len())
        .filter(|&j| {
            let seen = cells.iter().filter(|r| r[j].is_some()).count();
            if seen < min_history {
                report.dropped_tickers.push(tickers[j].clone());
                false
            } else {
                true
            }
        })
        .collect();
    if keep.is_empty() {
        return Err(AppError::validation(
            "data",
            format!("no ticker in {} has {min_history} observations", path.display()),
        ));
    }
    let mut kept_dates = Vec::new();
    let mut values = Vec::new();
    for (date, row) in dates.into_iter().zip(&cells) {
        let picked: Option<Vec<f64>> = keep.iter().map(|&j| row[j]).collect();
        match picked {
            Some(v) => {
                kept_dates.push(date);
                values.extend(v);
            }
            None => report.dropped_rows += 1,
        }
    }
    let panel = ReturnsPanel {
        returns: DMatrix::from_row_slice(kept_dates.len(), keep.len(), &values),
        dates: kept_dates,
        tickers: keep.iter().map(|&j| tickers[j].clone()).collect(),
    };
    Ok((panel, report))
}

fn csv_error(path: &Path, e: csv::Error) -> AppError {
    let row = e.position().map(|p| p.line() as usize).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => AppError::io(path, io),
        other => AppError::Parse {
            path: path.to_path_buf(),
            row,
            column: "*".into(),
            message: format!("{other:?}"),
        },
    }
}

/// Uniformly random `n`-subset of the tickers, kept in file order.
pub fn subsample_universe<R: Rng + ?Sized>(panel: &ReturnsPanel, n: usize, rng: &mut R) -> Result<ReturnsPanel> {
    let total = panel.n_assets();
    if n == 0 || n > total {
        return Err(AppError::validation(
            "n_assets",
            format!("cannot choose {n} assets from a universe of {total}"),
        ));
    }
    let mut idx = rand::seq::index::sample(rng, total, n).into_vec();
    idx.sort_unstable();
    Ok(ReturnsPanel {
        dates: panel.dates.clone(),
        tickers: idx.iter().map(|&j| panel.tickers[j].clone()).collect(),
        returns: panel.returns.select_columns(&idx),
    })
}
