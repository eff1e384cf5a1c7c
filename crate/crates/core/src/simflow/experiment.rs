use std::io;

use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::engine::run_replication;
use super::report::{Metric, SimReport};
use super::SimScenario;
use crate::dispatch::PolicySpec;
use crate::error::{Error, Result};

/// Mean, sample standard deviation and two-sided 95% Student-t interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    pub stddev: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl Summary {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Self {
                n,
                mean: f64::NAN,
                stddev: f64::NAN,
                ci_low: f64::NAN,
                ci_high: f64::NAN,
            };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        if n == 1 {
            return Self {
                n,
                mean,
                stddev: 0.0,
                ci_low: mean,
                ci_high: mean,
            };
        }
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let stddev = var.sqrt();
        let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
            .expect("positive degrees of freedom")
            .inverse_cdf(0.975);
        let half = t * stddev / (n as f64).sqrt();
        Self {
            n,
            mean,
            stddev,
            ci_low: mean - half,
            ci_high: mean + half,
        }
    }

    pub fn half_width(&self) -> f64 {
        (self.ci_high - self.ci_low) / 2.0
    }
}

fn check_count(replications: u64) -> Result<()> {
    if replications == 0 {
        return Err(Error::Domain {
            what: "replication count",
            value: 0.0,
        });
    }
    Ok(())
}

fn metric_values(r: &SimReport) -> Vec<f64> {
    Metric::ALL.iter().map(|&m| r.metric(m)).collect()
}

fn run_all(sc: &SimScenario, policy: &PolicySpec, replications: u64) -> Result<Vec<Vec<f64>>> {
    (0..replications)
        .into_par_iter()
        .map(|r| run_replication(sc, policy, r).map(|rep| metric_values(&rep)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicationSummary {
    /// Metric values per replication, in [`Metric::ALL`] order.
    pub values: Vec<Vec<f64>>,
    pub metrics: Vec<(Metric, Summary)>,
}

impl ReplicationSummary {
    pub fn summary(&self, m: Metric) -> Summary {
        self.metrics
            .iter()
            .find(|(k, _)| *k == m)
            .map(|(_, s)| *s)
            .expect("all metrics summarized")
    }
}

/// Runs replications `0..R` and summarizes every metric.
pub fn replicate(sc: &SimScenario, policy: &PolicySpec, replications: u64) -> Result<ReplicationSummary> {
    check_count(replications)?;
    let values = run_all(sc, policy, replications)?;
    let metrics = Metric::ALL
        .iter()
        .enumerate()
        .map(|(i, &m)| (m, Summary::of(&values.iter().map(|v| v[i]).collect::<Vec<_>>())))
        .collect();
    Ok(ReplicationSummary { values, metrics })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CompareRow {
    pub replication: u64,
    pub metric: &'static str,
    pub a: f64,
    pub b: f64,
    pub diff: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricComparison {
    pub metric: Metric,
    pub a: Summary,
    pub b: Summary,
    /// Summary of `a − b`.
    pub diff: Summary,
    /// Share of replications where `a` is strictly below `b`.
    pub win_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairedComparison {
    /// Replication-major, metrics in [`Metric::ALL`] order.
    pub rows: Vec<CompareRow>,
    pub metrics: Vec<MetricComparison>,
}

impl PairedComparison {
    pub fn metric(&self, m: Metric) -> &MetricComparison {
        self.metrics
            .iter()
            .find(|c| c.metric == m)
            .expect("all metrics compared")
    }

    /// Writes `compare.csv`: `replication,metric,a,b,diff`.
    pub fn write_csv<W: io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for r in &self.rows {
            out.serialize(r)?;
        }
        out.flush().map_err(|e| Error::Csv(e.to_string()))?;
        Ok(())
    }
}

/// Runs both policies on each replication's common random numbers and
/// summarizes the paired differences.
pub fn compare(sc: &SimScenario, a: &PolicySpec, b: &PolicySpec, replications: u64) -> Result<PairedComparison> {
    check_count(replications)?;
    let va = run_all(sc, a, replications)?;
    let vb = run_all(sc, b, replications)?;
    let mut rows = Vec::with_capacity(va.len() * Metric::ALL.len());
    for (r, (xa, xb)) in va.iter().zip(&vb).enumerate() {
        for (i, m) in Metric::ALL.iter().enumerate() {
            rows.push(CompareRow {
                replication: r as u64,
                metric: m.name(),
                a: xa[i],
                b: xb[i],
                diff: xa[i] - xb[i],
            });
        }
    }
    let metrics = Metric::ALL
        .iter()
        .enumerate()
        .map(|(i, &metric)| {
            let col = |v: &Vec<Vec<f64>>| v.iter().map(|x| x[i]).collect::<Vec<f64>>();
            let (ca, cb) = (col(&va), col(&vb));
            let diffs: Vec<f64> = ca.iter().zip(&cb).map(|(x, y)| x - y).collect();
            MetricComparison {
                metric,
                a: Summary::of(&ca),
                b: Summary::of(&cb),
                diff: Summary::of(&diffs),
                win_rate: diffs.iter().filter(|d| **d < 0.0).count() as f64 / diffs.len() as f64,
            }
        })
        .collect();
    Ok(PairedComparison { rows, metrics })
}
