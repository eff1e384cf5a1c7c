use std::io;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mps::JobId;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StageDay {
    pub moves: u64,
    pub target: f64,
}

impl StageDay {
    pub fn shortage(&self) -> f64 {
        (self.target - self.moves as f64).max(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DayRecord {
    pub day: u32,
    /// First-day MPS quantity planned at the start of the day.
    pub required_qty: f64,
    pub completions: u64,
    pub stages: Vec<StageDay>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JobRecord {
    pub id: JobId,
    pub release: f64,
    pub committed: f64,
    pub completed: Option<f64>,
    /// Realized process time per stage.
    pub service_times: Vec<f64>,
}

impl JobRecord {
    pub fn sojourn(&self) -> Option<f64> {
        self.completed.map(|c| c - self.release)
    }

    pub fn slack(&self) -> Option<f64> {
        self.completed.map(|c| (c - self.committed).max(0.0))
    }
}

/// Job accounting for one stage over the whole run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct StageFlow {
    pub initial_wip: usize,
    pub entries: u64,
    pub exits: u64,
    pub final_wip: usize,
    pub max_wip: usize,
}

impl StageFlow {
    /// `entries − exits = final WIP − initial WIP`.
    pub fn conserved(&self) -> bool {
        self.entries as i128 - self.exits as i128 == self.final_wip as i128 - self.initial_wip as i128
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimReport {
    pub seed: u64,
    pub replication: u64,
    pub horizon_days: u32,
    pub days: Vec<DayRecord>,
    pub jobs: Vec<JobRecord>,
    pub stage_flow: Vec<StageFlow>,
    pub max_total_wip: usize,
    /// Busy time per machine, per stage.
    pub machine_busy: Vec<Vec<f64>>,
    /// `Σ_j Σ_m (M_k − moves)⁺` over all days and stages.
    pub throughput_shortage: f64,
    /// `Σ_j (Q_1 − completions)⁺` over all days.
    pub mps_shortage: f64,
    /// `Σ_i (completion − committed)⁺`; unfinished jobs count as completing
    /// at the horizon.
    pub total_slackness: f64,
    pub event_count: u64,
    pub events: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    ThroughputShortage,
    MpsShortage,
    TotalSlackness,
    Completions,
    MeanSojourn,
}

impl Metric {
    pub const ALL: [Metric; 5] = [
        Metric::ThroughputShortage,
        Metric::MpsShortage,
        Metric::TotalSlackness,
        Metric::Completions,
        Metric::MeanSojourn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::ThroughputShortage => "throughput_shortage",
            Metric::MpsShortage => "mps_shortage",
            Metric::TotalSlackness => "total_slackness",
            Metric::Completions => "completions",
            Metric::MeanSojourn => "mean_sojourn",
        }
    }
}

#[derive(Serialize)]
struct SimRow {
    day: u32,
    stage: usize,
    moves: u64,
    target: f64,
    shortage: f64,
}

#[derive(Serialize)]
struct JobRow {
    id: JobId,
    release: f64,
    committed: f64,
    completed: Option<f64>,
    sojourn: Option<f64>,
    slack: Option<f64>,
}

impl SimReport {
    pub fn completions(&self) -> u64 {
        self.jobs.iter().filter(|j| j.completed.is_some()).count() as u64
    }

    /// Mean sojourn of completed jobs; 0 when none completed.
    pub fn mean_sojourn(&self) -> f64 {
        let s: Vec<f64> = self.jobs.iter().filter_map(JobRecord::sojourn).collect();
        if s.is_empty() {
            0.0
        } else {
            s.iter().sum::<f64>() / s.len() as f64
        }
    }

    pub fn metric(&self, m: Metric) -> f64 {
        match m {
            Metric::ThroughputShortage => self.throughput_shortage,
            Metric::MpsShortage => self.mps_shortage,
            Metric::TotalSlackness => self.total_slackness,
            Metric::Completions => self.completions() as f64,
            Metric::MeanSojourn => self.mean_sojourn(),
        }
    }

    /// Writes `simreport.csv`: `day,stage,moves,target,shortage`.
    pub fn write_simreport_csv<W: io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for d in &self.days {
            for (k, s) in d.stages.iter().enumerate() {
                out.serialize(SimRow {
                    day: d.day,
                    stage: k + 1,
                    moves: s.moves,
                    target: s.target,
                    shortage: s.shortage(),
                })?;
            }
        }
        if self.days.is_empty() {
            out.write_record(["day", "stage", "moves", "target", "shortage"])?;
        }
        out.flush().map_err(|e| Error::Csv(e.to_string()))?;
        Ok(())
    }

    /// Writes `jobs.csv`: `id,release,committed,completed,sojourn,slack`.
    /// The last three are empty for unfinished jobs.
    pub fn write_jobs_csv<W: io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for j in &self.jobs {
            out.serialize(JobRow {
                id: j.id,
                release: j.release,
                committed: j.committed,
                completed: j.completed,
                sojourn: j.sojourn(),
                slack: j.slack(),
            })?;
        }
        if self.jobs.is_empty() {
            out.write_record(["id", "release", "committed", "completed", "sojourn", "slack"])?;
        }
        out.flush().map_err(|e| Error::Csv(e.to_string()))?;
        Ok(())
    }
}
