//! Master production schedule: decomposition by time.
//!
//! Work in process sits at stages `1..=n` ordered toward completion. A job at
//! stage `m` historically needs `S_m = L_m + … + L_n` more days to finish, so
//! the WIP that can be completed on day `j` is the WIP of the stages whose
//! remaining sojourn falls in `(j−1, j]`. The daily required quantity is then
//! rolled forward from today:
//!
//! ```text
//! Q_j = min(A_j, D_j, μ_j)
//! D_j = Σ_i q_ij + (D_{j−1} − Q_{j−1})⁺
//! ```
//!
//! The stage window of day `j` is located through the reach indices
//! `R_j^U` and `R_j^L`, the largest number of trailing stages whose total
//! sojourn fits within `j` and `j − 1` days respectively.

use std::collections::BTreeMap;
use std::io;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Historical per-stage sojourn times and current WIP of a process flow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcessFlow {
    /// `L_m` in days, stage 1 first.
    pub sojourn: Vec<f64>,
    /// `W_m` in jobs, stage 1 first.
    pub wip: Vec<f64>,
}

impl ProcessFlow {
    pub fn new(sojourn: Vec<f64>, wip: Vec<f64>) -> Result<Self> {
        let f = Self { sojourn, wip };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sojourn.is_empty() {
            return Err(Error::Validation("process flow needs at least one stage".into()));
        }
        if self.sojourn.len() != self.wip.len() {
            return Err(Error::Validation(format!(
                "{} sojourn times but {} WIP entries",
                self.sojourn.len(),
                self.wip.len()
            )));
        }
        for &l in &self.sojourn {
            if !(l.is_finite() && l >= 0.0) {
                return Err(Error::Domain {
                    what: "stage sojourn time",
                    value: l,
                });
            }
        }
        for &w in &self.wip {
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::Domain {
                    what: "stage WIP",
                    value: w,
                });
            }
        }
        Ok(())
    }

    pub fn stages(&self) -> usize {
        self.sojourn.len()
    }

    /// `L_m` for a 1-based stage, zero for `m ≤ 0`.
    pub fn sojourn_at(&self, m: i64) -> f64 {
        if m >= 1 {
            self.sojourn[(m - 1) as usize]
        } else {
            0.0
        }
    }

    /// `W_m` for a 1-based stage, zero for `m ≤ 0`.
    pub fn wip_at(&self, m: i64) -> f64 {
        if m >= 1 {
            self.wip[(m - 1) as usize]
        } else {
            0.0
        }
    }

    /// Largest `i ∈ [0, top]` with `Σ_{m=top_stage−i}^{top_stage} L_m ≤ bound`, or −1.
    pub(crate) fn reach(&self, top_stage: usize, bound: f64) -> i64 {
        let mut sum = 0.0;
        let mut best = -1;
        for i in 0..=top_stage as i64 {
            sum += self.sojourn_at(top_stage as i64 - i);
            if sum <= bound {
                best = i;
            } else {
                break;
            }
        }
        best
    }

    /// `(R_j^U, R_j^L)` for day `j ≥ 1`.
    pub fn reach_windows(&self, j: usize) -> (i64, i64) {
        let n = self.stages();
        (self.reach(n, j as f64), self.reach(n, j as f64 - 1.0))
    }

    /// WIP whose historical remaining sojourn lies in `(j−1, j]`.
    pub fn available_wip(&self, j: usize) -> f64 {
        let n = self.stages() as i64;
        let (upper, lower) = self.reach_windows(j);
        (n - upper..=n - lower - 1)
            .map(|m| self.wip_at(m))
            .fold(0.0, |acc, w| acc + w)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct JobId(pub u64);

/// Quantity of a job due for completion on a given day.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Commitment {
    pub job: JobId,
    /// 1-based day index counted from today.
    pub day: usize,
    pub quantity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobDates {
    pub release: f64,
    pub committed: f64,
}

impl JobDates {
    /// Planned sojourn, committed minus release.
    pub fn sojourn(&self) -> f64 {
        self.committed - self.release
    }
}

/// Committed demand: per-day quantities plus job-level dates.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DemandBook {
    pub commitments: Vec<Commitment>,
    pub jobs: BTreeMap<JobId, JobDates>,
}

impl DemandBook {
    pub fn validate(&self) -> Result<()> {
        for c in &self.commitments {
            if !(c.quantity.is_finite() && c.quantity >= 0.0) {
                return Err(Error::Domain {
                    what: "committed quantity",
                    value: c.quantity,
                });
            }
            if c.day == 0 {
                return Err(Error::Data(format!(
                    "job {} committed on day 0; days start at 1",
                    c.job.0
                )));
            }
        }
        for (id, d) in &self.jobs {
            if !(d.committed >= d.release) {
                return Err(Error::Data(format!(
                    "job {}: committed date {} precedes release date {}",
                    id.0, d.committed, d.release
                )));
            }
        }
        Ok(())
    }

    /// `Σ_i q_ij`.
    pub fn quantity_on(&self, day: usize) -> f64 {
        self.commitments
            .iter()
            .filter(|c| c.day == day)
            .map(|c| c.quantity)
            .fold(0.0, |acc, q| acc + q)
    }
}

/// Per-day capacity `μ_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Capacity {
    Constant(f64),
    Daily(Vec<f64>),
}

impl Capacity {
    fn at(&self, day: usize) -> Result<f64> {
        let v = match self {
            Capacity::Constant(c) => *c,
            Capacity::Daily(v) => *v
                .get(day - 1)
                .ok_or_else(|| Error::Data(format!("no capacity given for day {day} ({} days listed)", v.len())))?,
        };
        if v.is_nan() || v < 0.0 {
            return Err(Error::Domain {
                what: "daily capacity",
                value: v,
            });
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MpsOptions {
    /// Carry unconsumed available WIP into the next day's availability.
    pub rollover_available_wip: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MpsDay {
    pub day: usize,
    pub demand: f64,
    pub available_wip: f64,
    pub capacity: f64,
    pub required_qty: f64,
    pub delinquency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MpsResult {
    pub days: Vec<MpsDay>,
}

impl MpsResult {
    pub fn horizon(&self) -> usize {
        self.days.len()
    }

    /// `Q_j` for `j = 1..=horizon`.
    pub fn required(&self) -> Vec<f64> {
        self.days.iter().map(|d| d.required_qty).collect()
    }

    /// Delinquency left after the last day.
    pub fn terminal_delinquency(&self) -> f64 {
        self.days.last().map_or(0.0, |d| d.delinquency)
    }

    /// Writes `mps.csv`: `day,demand,available_wip,capacity,required_qty,delinquency`.
    pub fn write_csv<W: io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for d in &self.days {
            out.serialize(d)?;
        }
        out.flush().map_err(|e| Error::Csv(e.to_string()))?;
        Ok(())
    }
}

/// Rolls the daily required quantity forward over `horizon` days.
pub fn compute_mps(
    flow: &ProcessFlow,
    demand: &DemandBook,
    capacity: &Capacity,
    horizon: usize,
    options: MpsOptions,
) -> Result<MpsResult> {
    flow.validate()?;
    demand.validate()?;
    if horizon == 0 {
        return Err(Error::Domain {
            what: "MPS horizon",
            value: 0.0,
        });
    }
    let mut days = Vec::with_capacity(horizon);
    let (mut prev_demand, mut prev_qty, mut prev_avail) = (0.0f64, 0.0f64, 0.0f64);
    for j in 1..=horizon {
        let mut avail = flow.available_wip(j);
        if options.rollover_available_wip {
            avail += (prev_avail - prev_qty).max(0.0);
        }
        let d = demand.quantity_on(j) + (prev_demand - prev_qty).max(0.0);
        let mu = capacity.at(j)?;
        let q = avail.min(d).min(mu);
        days.push(MpsDay {
            day: j,
            demand: d,
            available_wip: avail,
            capacity: mu,
            required_qty: q,
            delinquency: (d - q).max(0.0),
        });
        prev_demand = d;
        prev_qty = q;
        prev_avail = avail;
    }
    Ok(MpsResult { days })
}

/// Total slackness `Σ_i (forecast completion − committed)⁺` over the book's jobs.
pub fn slackness(forecast_completion: &BTreeMap<JobId, f64>, demand: &DemandBook) -> Result<f64> {
    let mut total = 0.0;
    for (id, dates) in &demand.jobs {
        let f = forecast_completion
            .get(id)
            .ok_or_else(|| Error::Data(format!("no forecast completion date for job {}", id.0)))?;
        total += (f - dates.committed).max(0.0);
    }
    Ok(total)
}
