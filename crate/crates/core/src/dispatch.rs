//! Job selection and release control.
//!
//! A dispatcher never looks at the shop floor directly. It sees a
//! [`StageView`] built by [`make_view`], and the information mode of the
//! policy decides what that view contains:
//!
//! * **pull**: the live queue at the decision instant with exact attributes;
//! * **push**: what was known at the last day boundary. Jobs that were
//!   already queued then are known exactly; jobs that arrived since are only
//!   known through a forecast of their arrival time, and process times are
//!   forecasts too. Forecast errors are zero-mean Gaussian with standard
//!   deviation `σ`, truncated at zero.
//!
//! With `σ = 0` a push view is identical to the pull view.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mps::JobId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PolicyKind {
    #[serde(rename = "FIFO")]
    Fifo,
    #[serde(rename = "SPT")]
    Spt,
    #[serde(rename = "EDD")]
    Edd,
    #[serde(rename = "MOVE_TARGET")]
    MoveTarget,
    #[serde(rename = "CONWIP")]
    Conwip,
    #[serde(rename = "KANBAN")]
    Kanban,
}

impl PolicyKind {
    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Fifo => "FIFO",
            PolicyKind::Spt => "SPT",
            PolicyKind::Edd => "EDD",
            PolicyKind::MoveTarget => "MOVE_TARGET",
            PolicyKind::Conwip => "CONWIP",
            PolicyKind::Kanban => "KANBAN",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InfoMode {
    #[default]
    Pull,
    Push,
}

fn default_delay_fraction() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySpec {
    pub kind: PolicyKind,
    #[serde(default)]
    pub info_mode: InfoMode,
    /// Total WIP cap for CONWIP.
    #[serde(default)]
    pub conwip_cap: Option<u32>,
    /// Card count per stage for KANBAN.
    #[serde(default)]
    pub kanban_cards: Vec<u32>,
    /// Standard deviation of push-view forecast errors, in days.
    #[serde(default)]
    pub forecast_noise: f64,
    /// Let MOVE_TARGET keep working once today's target is met.
    #[serde(default)]
    pub allow_overproduction: bool,
    /// Share of the current stage's historical sojourn a job may use before
    /// it counts as delayed.
    #[serde(default = "default_delay_fraction")]
    pub delay_fraction: f64,
}

impl PolicySpec {
    pub fn new(kind: PolicyKind, info_mode: InfoMode) -> Self {
        Self {
            kind,
            info_mode,
            conwip_cap: None,
            kanban_cards: Vec::new(),
            forecast_noise: 0.0,
            allow_overproduction: false,
            delay_fraction: default_delay_fraction(),
        }
    }

    pub fn with_noise(mut self, sigma: f64) -> Self {
        self.forecast_noise = sigma;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.forecast_noise.is_finite() && self.forecast_noise >= 0.0) {
            return Err(Error::Domain {
                what: "forecast noise",
                value: self.forecast_noise,
            });
        }
        if !(0.0..=1.0).contains(&self.delay_fraction) {
            return Err(Error::Domain {
                what: "delay fraction",
                value: self.delay_fraction,
            });
        }
        match self.kind {
            PolicyKind::Conwip => match self.conwip_cap {
                Some(c) if c >= 1 => {}
                _ => return Err(Error::Validation("CONWIP needs conwip_cap >= 1".into())),
            },
            PolicyKind::Kanban if self.kanban_cards.is_empty() || self.kanban_cards.contains(&0) => {
                return Err(Error::Validation("KANBAN needs one card count >= 1 per stage".into()));
            }
            _ => {}
        }
        Ok(())
    }
}

/// Ground truth about one job waiting at a stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueuedJob {
    pub id: JobId,
    pub release: f64,
    pub committed: f64,
    /// Time the job joined this stage's queue.
    pub stage_entry: f64,
    /// Realized process time at this stage.
    pub process_time: f64,
    /// Historical sojourn of the stages already completed.
    pub historical_before: f64,
    /// Historical sojourn of this stage.
    pub historical_stage: f64,
    /// Standard-normal draw behind the arrival-time forecast.
    pub arrival_noise: f64,
    /// Standard-normal draw behind the process-time forecast.
    pub service_noise: f64,
}

/// A job in service at the upstream stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Incoming {
    pub id: JobId,
    pub started: f64,
    pub process_time: f64,
    pub service_noise: f64,
}

/// Everything that is true about a stage at a decision instant.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StageTruth {
    pub stage: usize,
    pub queue: Vec<QueuedJob>,
    pub machines: usize,
    pub busy_machines: usize,
    pub incoming: Vec<Incoming>,
    pub move_target: f64,
    pub moves_so_far: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JobView {
    pub id: JobId,
    pub release: f64,
    pub committed: f64,
    pub stage_entry: f64,
    pub process_time: f64,
    pub historical_before: f64,
    pub historical_stage: f64,
}

impl JobView {
    /// Time past the job's historical trajectory; positive means delayed.
    pub fn lateness(&self, clock: f64, delay_fraction: f64) -> f64 {
        clock - self.release - (self.historical_before + delay_fraction * self.historical_stage)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageView {
    pub stage: usize,
    pub queue: Vec<JobView>,
    pub move_target: f64,
    pub moves_so_far: u64,
    pub machines: usize,
    pub busy_machines: usize,
    /// Expected arrival time of each job now in service upstream.
    pub incoming: Vec<(JobId, f64)>,
}

fn forecast(actual: f64, sigma: f64, z: f64) -> f64 {
    (actual + sigma * z).max(0.0)
}

/// Instant from which a push dispatcher believes the job is in its queue.
pub fn push_visible_from(job: &QueuedJob, sigma: f64, day_start: f64) -> f64 {
    if job.stage_entry <= day_start {
        job.stage_entry
    } else {
        forecast(job.stage_entry, sigma, job.arrival_noise)
    }
}

/// Builds the view a dispatcher of the given information mode sees.
pub fn make_view(mode: InfoMode, truth: &StageTruth, clock: f64, sigma: f64, day_start: f64) -> StageView {
    let exact = |j: &QueuedJob| JobView {
        id: j.id,
        release: j.release,
        committed: j.committed,
        stage_entry: j.stage_entry,
        process_time: j.process_time,
        historical_before: j.historical_before,
        historical_stage: j.historical_stage,
    };
    let (queue, incoming) = match mode {
        InfoMode::Pull => (
            truth.queue.iter().map(exact).collect(),
            truth
                .incoming
                .iter()
                .map(|i| (i.id, i.started + i.process_time))
                .collect(),
        ),
        InfoMode::Push => (
            truth
                .queue
                .iter()
                .filter_map(|j| {
                    let seen = push_visible_from(j, sigma, day_start);
                    (seen <= clock).then(|| JobView {
                        stage_entry: seen,
                        process_time: forecast(j.process_time, sigma, j.service_noise),
                        ..exact(j)
                    })
                })
                .collect(),
            truth
                .incoming
                .iter()
                .map(|i| (i.id, i.started + forecast(i.process_time, sigma, i.service_noise)))
                .collect(),
        ),
    };
    StageView {
        stage: truth.stage,
        queue,
        move_target: truth.move_target,
        moves_so_far: truth.moves_so_far,
        machines: truth.machines,
        busy_machines: truth.busy_machines,
        incoming,
    }
}

fn by_edd(a: &JobView, b: &JobView) -> Ordering {
    a.committed
        .total_cmp(&b.committed)
        .then(a.stage_entry.total_cmp(&b.stage_entry))
        .then(a.id.cmp(&b.id))
}

fn by_fifo(a: &JobView, b: &JobView) -> Ordering {
    a.stage_entry.total_cmp(&b.stage_entry).then(by_edd(a, b))
}

fn by_spt(a: &JobView, b: &JobView) -> Ordering {
    a.process_time.total_cmp(&b.process_time).then(by_edd(a, b))
}

/// Picks the next job to start at the stage, or `None` to leave it idle.
pub fn next_job(policy: &PolicySpec, view: &StageView, clock: f64) -> Option<JobId> {
    let q = &view.queue;
    let pick = match policy.kind {
        PolicyKind::Fifo | PolicyKind::Conwip | PolicyKind::Kanban => q.iter().min_by(|a, b| by_fifo(a, b)),
        PolicyKind::Spt => q.iter().min_by(|a, b| by_spt(a, b)),
        PolicyKind::Edd => q.iter().min_by(|a, b| by_edd(a, b)),
        PolicyKind::MoveTarget => {
            let most_delayed = q
                .iter()
                .map(|j| (j, j.lateness(clock, policy.delay_fraction)))
                .filter(|(_, late)| *late > 0.0)
                .min_by(|(a, la), (b, lb)| lb.total_cmp(la).then(by_edd(a, b)));
            match most_delayed {
                Some((j, _)) => Some(j),
                None if policy.allow_overproduction || (view.moves_so_far as f64) < view.move_target => {
                    q.iter().min_by(|a, b| by_edd(a, b))
                }
                None => None,
            }
        }
    };
    pick.map(|j| j.id)
}

/// What release control can see of the whole line.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemView {
    pub total_wip: usize,
    pub stage_wip: Vec<usize>,
    /// Release date of the next raw job waiting for release.
    pub next_release: Option<f64>,
}

/// Whether the next raw job may enter the line.
pub fn admit_release(policy: &PolicySpec, system: &SystemView, clock: f64) -> bool {
    match policy.kind {
        PolicyKind::Conwip => policy.conwip_cap.is_some_and(|cap| system.total_wip < cap as usize),
        PolicyKind::Kanban => match (policy.kanban_cards.first(), system.stage_wip.first()) {
            (Some(&cards), Some(&wip)) => wip < cards as usize,
            _ => false,
        },
        _ => system.next_release.is_some_and(|r| r <= clock),
    }
}
