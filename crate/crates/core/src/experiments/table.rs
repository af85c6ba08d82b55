use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::stats::{median, quartiles};

/// One long-format observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionRow {
    pub experiment: String,
    pub method: String,
    pub covariance: String,
    pub n: usize,
    pub replicate: usize,
    pub criterion: String,
    pub value: f64,
}

impl CriterionRow {
    pub fn is_failure(&self) -> bool {
        self.criterion.starts_with(FAILURE_PREFIX)
    }

    /// Reason code of a failure row.
    pub fn failure_code(&self) -> Option<&str> {
        self.criterion.strip_prefix(FAILURE_PREFIX)
    }
}

pub const FAILURE_PREFIX: &str = "failed:";

/// Median and quartiles of one `(experiment, method, covariance, n, criterion)` group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub experiment: String,
    pub method: String,
    pub covariance: String,
    pub n: usize,
    pub criterion: String,
    pub count: usize,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
}

/// α-CI curve of one replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRecord {
    pub method: String,
    pub covariance: String,
    pub n: usize,
    pub replicate: usize,
    pub curve: Vec<(f64, f64)>,
}

type GroupKey = (String, String, String, usize, String);

/// Long-format results of one experiment run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CriterionTable {
    pub rows: Vec<CriterionRow>,
    pub curves: Vec<CurveRecord>,
}

impl CriterionTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn extend(&mut self, other: CriterionTable) {
        self.rows.extend(other.rows);
        self.curves.extend(other.curves);
    }

    pub fn failures(&self) -> impl Iterator<Item = &CriterionRow> {
        self.rows.iter().filter(|r| r.is_failure())
    }

    pub fn failure_count(&self) -> usize {
        self.failures().count()
    }

    /// Finite values of one criterion for a `(method, n)` group, in row order.
    pub fn values(&self, method: &str, n: usize, criterion: &str) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.method == method && r.n == n && r.criterion == criterion && r.value.is_finite())
            .map(|r| r.value)
            .collect()
    }

    /// Median of [`CriterionTable::values`], `None` if the group is empty.
    pub fn median(&self, method: &str, n: usize, criterion: &str) -> Option<f64> {
        let v = self.values(method, n, criterion);
        (!v.is_empty()).then(|| median(&v))
    }

    /// Groups over all non-failure rows with finite values, in key order.
    pub fn summary(&self) -> Vec<SummaryRow> {
        let mut groups: BTreeMap<GroupKey, Vec<f64>> = BTreeMap::new();
        for r in self.rows.iter().filter(|r| !r.is_failure() && r.value.is_finite()) {
            groups
                .entry((
                    r.experiment.clone(),
                    r.method.clone(),
                    r.covariance.clone(),
                    r.n,
                    r.criterion.clone(),
                ))
                .or_default()
                .push(r.value);
        }
        groups
            .into_iter()
            .map(|((experiment, method, covariance, n, criterion), v)| {
                let (q1, med, q3) = quartiles(&v);
                SummaryRow {
                    experiment,
                    method,
                    covariance,
                    n,
                    criterion,
                    count: v.len(),
                    median: med,
                    q1,
                    q3,
                }
            })
            .collect()
    }

    pub fn write_rows_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_summary_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for r in self.summary() {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_summary_json(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(&self.summary())?)?;
        Ok(())
    }

    /// One `replicate,alpha,delta` CSV per `(method, covariance, n)` group.
    pub fn write_curves(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let mut groups: BTreeMap<(String, String, usize), Vec<&CurveRecord>> = BTreeMap::new();
        for c in &self.curves {
            groups
                .entry((c.method.clone(), c.covariance.clone(), c.n))
                .or_default()
                .push(c);
        }
        if groups.is_empty() {
            return Ok(Vec::new());
        }
        fs::create_dir_all(dir)?;
        let mut paths = Vec::new();
        for ((method, cov, n), recs) in groups {
            let path = dir.join(format!("alpha_{method}_{cov}_n{n}.csv"));
            let mut w = csv::Writer::from_path(&path)?;
            w.write_record(["replicate", "alpha", "delta"])?;
            for c in recs {
                for (a, d) in &c.curve {
                    w.write_record([c.replicate.to_string(), a.to_string(), d.to_string()])?;
                }
            }
            w.flush()?;
            paths.push(path);
        }
        Ok(paths)
    }

    /// `criteria.csv`, `summary.csv`, `summary.json` and `curves/`; returns the written paths.
    pub fn write_dir(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let rows = dir.join("criteria.csv");
        let summary_csv = dir.join("summary.csv");
        let summary_json = dir.join("summary.json");
        self.write_rows_csv(&rows)?;
        self.write_summary_csv(&summary_csv)?;
        self.write_summary_json(&summary_json)?;
        let mut paths = vec![rows, summary_csv, summary_json];
        paths.extend(self.write_curves(&dir.join("curves"))?);
        Ok(paths)
    }
}
