//! Metric series and CSV/JSON emission.

use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

use crate::plan::ExperimentPlan;
use gatescope_core::ud::{StratCell, StratKey};
use std::collections::BTreeMap;

/// One labeled curve: a metric over an x-axis (epoch, offset, distance…),
/// with the sample count behind every mean.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricSeries {
    pub metric: String,
    /// Training-setting label ("familiar", "unfamiliar", "k=4", "").
    pub setting: String,
    /// Test-domain label ("in", "out", "").
    pub domain: String,
    pub x: Vec<f64>,
    pub y_mean: Vec<f64>,
    pub y_count: Vec<usize>,
}

impl MetricSeries {
    pub fn new(metric: &str, setting: &str, domain: &str) -> Self {
        MetricSeries {
            metric: metric.to_string(),
            setting: setting.to_string(),
            domain: domain.to_string(),
            x: Vec::new(),
            y_mean: Vec::new(),
            y_count: Vec::new(),
        }
    }

    pub fn push(&mut self, x: f64, mean: f64, count: usize) {
        self.x.push(x);
        self.y_mean.push(mean);
        self.y_count.push(count);
    }

    pub fn last_y(&self) -> Option<f64> {
        self.y_mean.last().copied()
    }

    pub fn first_y(&self) -> Option<f64> {
        self.y_mean.first().copied()
    }

    /// First x whose mean reaches `threshold`, if any.
    pub fn first_x_reaching(&self, threshold: f64) -> Option<f64> {
        self.x
            .iter()
            .zip(self.y_mean.iter())
            .find(|(_, &y)| y >= threshold)
            .map(|(&x, _)| x)
    }
}

/// Writes series as CSV: `metric,setting,domain,x,y_mean,y_count`.
pub fn write_series_csv(path: &Path, series: &[MetricSeries]) -> std::io::Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "metric,setting,domain,x,y_mean,y_count")?;
    for s in series {
        for i in 0..s.x.len() {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                s.metric, s.setting, s.domain, s.x[i], s.y_mean[i], s.y_count[i]
            )?;
        }
    }
    w.flush()
}

/// Writes the full plan next to result files so outputs are self-describing.
pub fn write_plan_sidecar(path: &Path, plan: &ExperimentPlan) -> std::io::Result<()> {
    let json = serde_json::to_string_pretty(plan).expect("plan serializes");
    std::fs::write(path, json)
}

/// Writes a stratified table as CSV:
/// `seq_dist,syn_dist,class,mean,count,stderr,suppressed`.
pub fn write_strata_csv(
    path: &Path,
    table: &BTreeMap<StratKey, StratCell>,
) -> std::io::Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "seq_dist,syn_dist,class,mean,count,stderr,suppressed")?;
    for (key, cell) in table {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            key.seq_dist,
            key.syn_dist,
            key.class,
            cell.mean,
            cell.count,
            cell.stderr,
            cell.suppressed
        )?;
    }
    w.flush()
}
