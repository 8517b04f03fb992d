//! Run reports: per-path Sharpe ratios, pairwise outperformance tables and
//! histograms, rendered as canonical JSON or as CSV tables.

use std::fs;
use std::path::Path;

use gwb_core::stats::{freedman_diaconis_edges, histogram, is_significant, pairwise, T_CRITICAL};
use gwb_core::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{AppError, Result};
use crate::json::{format_g17, read_json, write_canonical};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// Shared bin edges over the pooled Sharpe ratios.
    pub edges: Vec<f64>,
    /// One row of counts per methodology.
    pub counts: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub methods: Vec<String>,
    /// Paths × methods.
    pub sharpe: Vec<Vec<f64>>,
    /// `delta_s[i][j]` = mean over paths of `S_i − S_j`.
    pub delta_s: Vec<Vec<f64>>,
    pub tstat: Vec<Vec<f64>>,
    /// Method pairs whose Sharpe ratios coincide on every path (t-statistic left at 0).
    pub zero_variance_pairs: Vec<(String, String)>,
    pub t_critical: f64,
    pub histogram: Histogram,
    pub config: Value,
    pub seeds: Vec<u64>,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

impl RunReport {
    pub fn build(methods: Vec<String>, sharpe: Vec<Vec<f64>>, config: Value, seeds: Vec<u64>) -> Result<Self> {
        let m = methods.len();
        let paths = sharpe.len();
        if sharpe.iter().any(|r| r.len() != m) {
            return Err(AppError::validation("sharpe", "ragged Sharpe table"));
        }
        let table = DMatrix::from_fn(paths, m, |i, j| sharpe[i][j]);
        let stats = pairwise(&table).map_err(|e| AppError::core("pairwise statistics", e))?;
        let pooled: Vec<f64> = sharpe.iter().flatten().copied().collect();
        let edges = freedman_diaconis_edges(&pooled);
        let counts = (0..m)
            .map(|j| histogram(table.column(j).as_slice(), &edges))
            .collect();
        Ok(Self {
            zero_variance_pairs: stats
                .zero_variance_pairs
                .iter()
                .map(|&(i, j)| (methods[i].clone(), methods[j].clone()))
                .collect(),
            delta_s: rows(&stats.delta_s),
            tstat: rows(&stats.tstat),
            methods,
            sharpe,
            t_critical: T_CRITICAL,
            histogram: Histogram { edges, counts },
            config,
            seeds,
        })
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.methods.iter().position(|m| m == label)
    }

    pub fn delta(&self, a: &str, b: &str) -> Option<f64> {
        Some(self.delta_s[self.index_of(a)?][self.index_of(b)?])
    }

    pub fn t(&self, a: &str, b: &str) -> Option<f64> {
        Some(self.tstat[self.index_of(a)?][self.index_of(b)?])
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        write_canonical(path, self)
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        read_json(path)
    }

    /// `method_a,method_b,delta_s,tstat,significant` for every ordered pair
    /// of distinct methods.
    pub fn pairs_csv(&self) -> String {
        let mut out = String::from("method_a,method_b,delta_s,tstat,significant\n");
        for (i, a) in self.methods.iter().enumerate() {
            for (j, b) in self.methods.iter().enumerate() {
                if i == j {
                    continue;
                }
                let t = self.tstat[i][j];
                out.push_str(&format!(
                    "{a},{b},{},{},{}\n",
                    format_g17(self.delta_s[i][j]),
                    format_g17(t),
                    is_significant(t, self.t_critical)
                ));
            }
        }
        out
    }

    /// Barycenter rows against every column, the layout of the usual
    /// outperformance tables.
    pub fn table_csv(&self, values: &[Vec<f64>]) -> String {
        let mut out = String::from("method");
        for m in &self.methods {
            out.push(',');
            out.push_str(m);
        }
        out.push('\n');
        for (i, m) in self.methods.iter().enumerate() {
            if !m.starts_with("GWB") {
                continue;
            }
            out.push_str(m);
            for v in &values[i] {
                out.push(',');
                out.push_str(&format_g17(*v));
            }
            out.push('\n');
        }
        out
    }

    pub fn histogram_csv(&self) -> String {
        let mut out = String::from("method,bin_left,bin_right,count\n");
        for (m, counts) in self.methods.iter().zip(&self.histogram.counts) {
            for (k, c) in counts.iter().enumerate() {
                out.push_str(&format!(
                    "{m},{},{},{c}\n",
                    format_g17(self.histogram.edges[k]),
                    format_g17(self.histogram.edges[k + 1])
                ));
            }
        }
        out
    }

    pub fn sharpe_csv(&self) -> String {
        let mut out = String::from("path");
        for m in &self.methods {
            out.push(',');
            out.push_str(m);
        }
        out.push('\n');
        for (p, row) in self.sharpe.iter().enumerate() {
            out.push_str(&p.to_string());
            for v in row {
                out.push(',');
                out.push_str(&format_g17(*v));
            }
            out.push('\n');
        }
        out
    }

    /// Write `pairs.csv`, `delta_s.csv`, `tstat.csv`, `histogram.csv` and
    /// `sharpe.csv` into `dir`.
    pub fn save_csv(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))?;
        let files = [
            ("pairs.csv", self.pairs_csv()),
            ("delta_s.csv", self.table_csv(&self.delta_s)),
            ("tstat.csv", self.table_csv(&self.tstat)),
            ("histogram.csv", self.histogram_csv()),
            ("sharpe.csv", self.sharpe_csv()),
        ];
        for (name, body) in files {
            let path = dir.join(name);
            fs::write(&path, body).map_err(|e| AppError::io(&path, e))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> RunReport {
        let methods = vec!["BM".to_string(), "BL1".into(), "GWB2(t=0.95)".into()];
        let sharpe = (0..10)
            .map(|p| vec![0.1 * p as f64, 0.05 * (p * p) as f64, 1.0 - 0.1 * p as f64])
            .collect();
        RunReport::build(methods, sharpe, Value::Null, vec![1, 2]).unwrap()
    }

    #[test]
    fn pair_rows_exclude_diagonal() {
        let r = sample();
        assert_eq!(r.pairs_csv().lines().count() - 1, 3 * 3 - 3);
    }

    #[test]
    fn histogram_counts_every_path() {
        let r = sample();
        for counts in &r.histogram.counts {
            assert_eq!(counts.iter().sum::<usize>(), 10);
        }
    }

    #[test]
    fn json_round_trip() {
        let r = sample();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.json");
        r.save_json(&path).unwrap();
        assert_eq!(RunReport::load_json(&path).unwrap(), r);
    }

    #[test]
    fn table_rows_are_barycenter_methods() {
        let r = sample();
        let t = r.table_csv(&r.delta_s);
        assert_eq!(t.lines().count(), 2);
        assert!(t.lines().nth(1).unwrap().starts_with("GWB2(t=0.95),"));
    }
}
