//! Benchmark rows and their per-cell aggregation.

use std::collections::BTreeMap;
use std::fs::OpenOptions;
use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

/// One solve. Column order is the CSV header order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub instance: String,
    pub family: String,
    pub n: usize,
    pub r: usize,
    pub alpha: f64,
    pub omega: f64,
    pub method: String,
    pub time_s: f64,
    pub qp_count: usize,
    pub pivot_count: usize,
    /// B&B only.
    pub nodes: Option<usize>,
    pub objective: Option<f64>,
    /// Convex solves only.
    pub kkt_residual: Option<f64>,
    /// Percent; B&B only.
    pub egap: Option<f64>,
    pub solved: bool,
}

/// Means over the instances of one `(family, n, r, alpha, omega, method)` cell.
/// `solved` counts solved instances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellMean {
    pub family: String,
    pub n: usize,
    pub r: usize,
    pub alpha: f64,
    pub omega: f64,
    pub method: String,
    pub count: usize,
    pub time_s: f64,
    pub qp_count: f64,
    pub pivot_count: f64,
    pub nodes: Option<f64>,
    pub objective: Option<f64>,
    pub kkt_residual: Option<f64>,
    pub egap: Option<f64>,
    pub solved: usize,
}

/// Appends rows, writing the header only when the file is new or empty.
pub fn append_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let fresh = std::fs::metadata(path).map_or(true, |m| m.len() == 0);
    let file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let mut w = csv::WriterBuilder::new()
        .has_headers(fresh)
        .from_writer(file);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w =
        csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

fn mean_of(vals: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let present: Vec<f64> = vals.flatten().collect();
    if present.is_empty() {
        None
    } else {
        Some(present.iter().sum::<f64>() / present.len() as f64)
    }
}

/// Groups rows by cell and method, keeping first-seen cell order.
pub fn aggregate(rows: &[BenchRecord]) -> Vec<CellMean> {
    let mut order = Vec::new();
    let mut groups: BTreeMap<usize, Vec<&BenchRecord>> = BTreeMap::new();
    for row in rows {
        let pos = order.iter().position(|k: &&BenchRecord| {
            k.family == row.family
                && k.n == row.n
                && k.r == row.r
                && k.alpha == row.alpha
                && k.omega == row.omega
                && k.method == row.method
        });
        let idx = pos.unwrap_or_else(|| {
            order.push(row);
            order.len() - 1
        });
        groups.entry(idx).or_default().push(row);
    }
    groups
        .into_iter()
        .map(|(idx, g)| {
            let k = order[idx];
            let count = g.len();
            let mean = |f: &dyn Fn(&BenchRecord) -> f64| {
                g.iter().map(|r| f(r)).sum::<f64>() / count as f64
            };
            CellMean {
                family: k.family.clone(),
                n: k.n,
                r: k.r,
                alpha: k.alpha,
                omega: k.omega,
                method: k.method.clone(),
                count,
                time_s: mean(&|r| r.time_s),
                qp_count: mean(&|r| r.qp_count as f64),
                pivot_count: mean(&|r| r.pivot_count as f64),
                nodes: mean_of(g.iter().map(|r| r.nodes.map(|v| v as f64))),
                objective: mean_of(g.iter().map(|r| r.objective)),
                kkt_residual: mean_of(g.iter().map(|r| r.kkt_residual)),
                egap: mean_of(g.iter().map(|r| r.egap)),
                solved: g.iter().filter(|r| r.solved).count(),
            }
        })
        .collect()
}
