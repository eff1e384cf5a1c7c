//! Discrete-event simulation of a multi-stage flow line.
//!
//! Each simulated day `d` covers the interval `(d − 1, d]`. At every day
//! boundary the simulator rebuilds the master production schedule from the
//! live WIP and the open jobs' committed dates, decomposes it into per-stage
//! move targets, and hands those to the dispatcher for the coming day.
//!
//! Randomness is drawn up front from three independent streams (arrivals,
//! service times, forecast noise), so two policies simulated with the same
//! seed and replication see exactly the same jobs and process times.

mod engine;
mod experiment;
mod report;
mod rng;

use rand::Rng;
use rand_distr::{Distribution, Exp, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mps::{JobDates, ProcessFlow};

pub use engine::{run, run_replication};
pub use experiment::{compare, replicate, MetricComparison, PairedComparison, ReplicationSummary, Summary};
pub use report::{DayRecord, JobRecord, Metric, SimReport, StageDay, StageFlow};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ServiceFamily {
    Deterministic,
    Exponential,
    Gamma,
}

/// Service-time distribution of one machine.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceDist {
    pub family: ServiceFamily,
    /// Mean service time in days.
    pub mean: f64,
    /// Squared coefficient of variation; used by the gamma family only.
    #[serde(default)]
    pub scv: f64,
}

impl ServiceDist {
    pub fn deterministic(mean: f64) -> Self {
        Self {
            family: ServiceFamily::Deterministic,
            mean,
            scv: 0.0,
        }
    }

    pub fn exponential(mean: f64) -> Self {
        Self {
            family: ServiceFamily::Exponential,
            mean,
            scv: 1.0,
        }
    }

    pub fn gamma(mean: f64, scv: f64) -> Self {
        Self {
            family: ServiceFamily::Gamma,
            mean,
            scv,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mean.is_finite() && self.mean > 0.0) {
            return Err(Error::Domain {
                what: "mean service time",
                value: self.mean,
            });
        }
        if !(self.scv.is_finite() && self.scv >= 0.0) {
            return Err(Error::Domain {
                what: "service SCV",
                value: self.scv,
            });
        }
        Ok(())
    }

    /// SCV actually realized by the family.
    pub fn effective_scv(&self) -> f64 {
        match self.family {
            ServiceFamily::Deterministic => 0.0,
            ServiceFamily::Exponential => 1.0,
            ServiceFamily::Gamma => self.scv,
        }
    }

    pub(crate) fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.family {
            ServiceFamily::Deterministic => self.mean,
            ServiceFamily::Exponential => Exp::new(1.0 / self.mean).expect("validated mean").sample(rng),
            ServiceFamily::Gamma if self.scv == 0.0 => self.mean,
            ServiceFamily::Gamma => Gamma::new(1.0 / self.scv, self.mean * self.scv)
                .expect("validated parameters")
                .sample(rng),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageConfig {
    /// Identical parallel machines.
    pub machines: usize,
    pub service: ServiceDist,
}

impl StageConfig {
    /// Jobs per day the stage can finish when fully busy.
    pub fn capacity(&self) -> f64 {
        self.machines as f64 / self.service.mean
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arrivals {
    /// Jobs with fixed release and committed dates.
    Scheduled(Vec<JobDates>),
    /// Poisson arrivals; each job is due `due_offset` days after release.
    Poisson { rate: f64, due_offset: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimScenario {
    /// Historical sojourn per stage and the WIP present at time 0.
    pub flow: ProcessFlow,
    pub stages: Vec<StageConfig>,
    pub arrivals: Arrivals,
    pub horizon_days: u32,
    #[serde(default)]
    pub seed: u64,
    /// Daily MPS capacity; defaults to the slowest stage's capacity.
    #[serde(default)]
    pub mps_capacity: Option<f64>,
    #[serde(default)]
    pub rollover_available_wip: bool,
    /// Keep a text log of every event in the report.
    #[serde(default)]
    pub record_events: bool,
}

impl SimScenario {
    pub fn validate(&self) -> Result<()> {
        self.flow.validate()?;
        if self.stages.len() != self.flow.stages() {
            return Err(Error::Validation(format!(
                "{} stage configs for a {}-stage flow",
                self.stages.len(),
                self.flow.stages()
            )));
        }
        for (k, s) in self.stages.iter().enumerate() {
            if s.machines == 0 {
                return Err(Error::Validation(format!("stage {} has no machines", k + 1)));
            }
            s.service.validate()?;
        }
        if let Some(&w) = self.flow.wip.iter().find(|w| w.fract() != 0.0) {
            return Err(Error::Validation(format!(
                "initial WIP {w} is not a whole number of jobs"
            )));
        }
        if self.horizon_days == 0 {
            return Err(Error::Validation("horizon must be at least one day".into()));
        }
        if let Some(c) = self.mps_capacity {
            if c.is_nan() || c < 0.0 {
                return Err(Error::Domain {
                    what: "MPS capacity",
                    value: c,
                });
            }
        }
        match &self.arrivals {
            Arrivals::Scheduled(jobs) => {
                for (i, j) in jobs.iter().enumerate() {
                    if !(j.release.is_finite()
                        && j.release >= 0.0
                        && j.committed >= j.release
                        && j.committed.is_finite())
                    {
                        return Err(Error::Validation(format!(
                            "scheduled job {i}: need 0 <= release <= committed, got {} and {}",
                            j.release, j.committed
                        )));
                    }
                }
            }
            Arrivals::Poisson { rate, due_offset } => {
                if !(rate.is_finite() && *rate > 0.0) {
                    return Err(Error::Domain {
                        what: "arrival rate",
                        value: *rate,
                    });
                }
                if !(due_offset.is_finite() && *due_offset >= 0.0) {
                    return Err(Error::Domain {
                        what: "due offset",
                        value: *due_offset,
                    });
                }
            }
        }
        Ok(())
    }
}
