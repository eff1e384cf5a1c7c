use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeSet, BinaryHeap, VecDeque};

use rand_distr::{Distribution, Exp, StandardNormal};

use super::report::{DayRecord, JobRecord, SimReport, StageDay, StageFlow};
use super::rng::{stream, Purpose};
use super::{Arrivals, SimScenario};
use crate::dispatch::{
    admit_release, make_view, next_job, push_visible_from, Incoming, InfoMode, PolicyKind, PolicySpec, QueuedJob,
    StageTruth, StageView, SystemView,
};
use crate::error::{Error, Result};
use crate::movetarget::compute_targets;
use crate::mps::{compute_mps, Capacity, Commitment, DemandBook, JobDates, JobId, MpsOptions, ProcessFlow};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    Pending,
    Backlog,
    Queued,
    InService,
    Blocked,
    Done,
}

#[derive(Debug, Clone)]
struct Job {
    dates: JobDates,
    service: Vec<f64>,
    arrival_z: Vec<f64>,
    service_z: Vec<f64>,
    stage: usize,
    entry: f64,
    status: Status,
    completed: Option<f64>,
}

#[derive(Debug, Clone, Copy)]
enum EvKind {
    ServiceEnd { stage: usize, machine: usize },
    Arrival { job: usize },
    DayBoundary { day: u32 },
    Wake { stage: usize },
}

impl EvKind {
    fn rank(self) -> u8 {
        match self {
            EvKind::ServiceEnd { .. } => 0,
            EvKind::Arrival { .. } => 1,
            EvKind::DayBoundary { .. } => 2,
            EvKind::Wake { .. } => 3,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Event {
    time: f64,
    rank: u8,
    seq: u64,
    kind: EvKind,
}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time
            .total_cmp(&other.time)
            .then(self.rank.cmp(&other.rank))
            .then(self.seq.cmp(&other.seq))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

#[derive(Debug, Clone, Default)]
struct StageState {
    /// Job indices in order of arrival at the stage.
    queue: Vec<usize>,
    machines: Vec<Option<(usize, f64)>>,
    /// Finished here but waiting for a downstream kanban card.
    blocked: VecDeque<usize>,
    busy: Vec<f64>,
    flow: StageFlow,
    moves_today: u64,
    target_today: f64,
    wake_at: Option<f64>,
    dirty: bool,
}

impl StageState {
    fn in_service(&self) -> usize {
        self.machines.iter().filter(|m| m.is_some()).count()
    }

    fn wip(&self) -> usize {
        self.queue.len() + self.in_service() + self.blocked.len()
    }

    fn free_machine(&self) -> Option<usize> {
        self.machines.iter().position(Option::is_none)
    }
}

struct Sim<'a> {
    sc: &'a SimScenario,
    policy: &'a PolicySpec,
    replication: u64,
    /// Historical sojourn before each stage.
    prefix: Vec<f64>,
    capacities: Vec<f64>,
    jobs: Vec<Job>,
    stages: Vec<StageState>,
    backlog: VecDeque<usize>,
    /// Arrived and not yet completed.
    open: BTreeSet<usize>,
    heap: BinaryHeap<Reverse<Event>>,
    seq: u64,
    now: f64,
    day_start: f64,
    required_today: f64,
    completions_today: u64,
    days: Vec<DayRecord>,
    throughput_shortage: f64,
    mps_shortage: f64,
    max_total_wip: usize,
    event_count: u64,
    events: Vec<String>,
}

/// Runs replication 0 of the scenario.
pub fn run(scenario: &SimScenario, policy: &PolicySpec) -> Result<SimReport> {
    run_replication(scenario, policy, 0)
}

/// Runs one replication; its random streams depend only on the scenario seed
/// and `replication`.
pub fn run_replication(scenario: &SimScenario, policy: &PolicySpec, replication: u64) -> Result<SimReport> {
    scenario.validate()?;
    policy.validate()?;
    validate_pair(scenario, policy)?;
    Sim::new(scenario, policy, replication).run()
}

fn validate_pair(sc: &SimScenario, policy: &PolicySpec) -> Result<()> {
    let n = sc.stages.len();
    let wip: Vec<usize> = sc.flow.wip.iter().map(|&w| w as usize).collect();
    match policy.kind {
        PolicyKind::Kanban => {
            if policy.kanban_cards.len() != n {
                return Err(Error::Validation(format!(
                    "{} kanban card counts for {n} stages",
                    policy.kanban_cards.len()
                )));
            }
            for (k, (&w, &c)) in wip.iter().zip(&policy.kanban_cards).enumerate() {
                if w > c as usize {
                    return Err(Error::Validation(format!(
                        "stage {} starts with {w} jobs but has {c} kanban cards",
                        k + 1
                    )));
                }
            }
        }
        PolicyKind::Conwip => {
            let cap = policy.conwip_cap.unwrap_or(0) as usize;
            let total: usize = wip.iter().sum();
            if total > cap {
                return Err(Error::Validation(format!(
                    "initial WIP {total} exceeds the CONWIP cap {cap}"
                )));
            }
        }
        _ => {}
    }
    Ok(())
}

fn generate_jobs(sc: &SimScenario, replication: u64) -> Vec<(JobDates, Option<usize>)> {
    let n = sc.stages.len();
    let total: f64 = sc.flow.sojourn.iter().sum();
    let mut out = Vec::new();
    let mut before = 0.0;
    for k in 0..n {
        for _ in 0..sc.flow.wip[k] as usize {
            let release = 0.0 - before;
            out.push((
                JobDates {
                    release,
                    committed: release + total,
                },
                Some(k),
            ));
        }
        before += sc.flow.sojourn[k];
    }
    let horizon = f64::from(sc.horizon_days);
    match &sc.arrivals {
        Arrivals::Scheduled(jobs) => {
            let mut jobs: Vec<JobDates> = jobs.iter().copied().filter(|j| j.release < horizon).collect();
            jobs.sort_by(|a, b| {
                a.release
                    .total_cmp(&b.release)
                    .then(a.committed.total_cmp(&b.committed))
            });
            out.extend(jobs.into_iter().map(|j| (j, None)));
        }
        Arrivals::Poisson { rate, due_offset } => {
            let mut rng = stream(sc.seed, replication, Purpose::Arrivals);
            let gap = Exp::new(*rate).expect("validated rate");
            let mut t = 0.0;
            loop {
                t += gap.sample(&mut rng);
                if t >= horizon {
                    break;
                }
                out.push((
                    JobDates {
                        release: t,
                        committed: t + due_offset,
                    },
                    None,
                ));
            }
        }
    }
    out
}

impl<'a> Sim<'a> {
    fn new(sc: &'a SimScenario, policy: &'a PolicySpec, replication: u64) -> Self {
        let n = sc.stages.len();
        let mut prefix = Vec::with_capacity(n);
        let mut acc = 0.0;
        for &l in &sc.flow.sojourn {
            prefix.push(acc);
            acc += l;
        }
        let mut service_rng = stream(sc.seed, replication, Purpose::Service);
        let mut noise_rng = stream(sc.seed, replication, Purpose::Noise);
        let mut stages: Vec<StageState> = sc
            .stages
            .iter()
            .map(|s| StageState {
                machines: vec![None; s.machines],
                busy: vec![0.0; s.machines],
                ..StageState::default()
            })
            .collect();
        let mut jobs = Vec::new();
        let mut arrivals = Vec::new();
        let mut open = BTreeSet::new();
        for (i, (dates, initial)) in generate_jobs(sc, replication).into_iter().enumerate() {
            let service = sc.stages.iter().map(|s| s.service.sample(&mut service_rng)).collect();
            let mut z = || -> f64 { StandardNormal.sample(&mut noise_rng) };
            let arrival_z = (0..n).map(|_| z()).collect();
            let service_z = (0..n).map(|_| z()).collect();
            let mut job = Job {
                dates,
                service,
                arrival_z,
                service_z,
                stage: 0,
                entry: 0.0,
                status: Status::Pending,
                completed: None,
            };
            match initial {
                Some(k) => {
                    job.stage = k;
                    job.status = Status::Queued;
                    stages[k].queue.push(i);
                    open.insert(i);
                    stages[k].flow.initial_wip += 1;
                }
                None => arrivals.push(i),
            }
            jobs.push(job);
        }
        let mut sim = Sim {
            sc,
            policy,
            replication,
            prefix,
            capacities: sc.stages.iter().map(|s| s.capacity()).collect(),
            jobs,
            stages,
            backlog: VecDeque::new(),
            open,
            heap: BinaryHeap::new(),
            seq: 0,
            now: 0.0,
            day_start: 0.0,
            required_today: 0.0,
            completions_today: 0,
            days: Vec::new(),
            throughput_shortage: 0.0,
            mps_shortage: 0.0,
            max_total_wip: 0,
            event_count: 0,
            events: Vec::new(),
        };
        for i in arrivals {
            let t = sim.jobs[i].dates.release;
            sim.schedule(t, EvKind::Arrival { job: i });
        }
        sim.schedule(0.0, EvKind::DayBoundary { day: 0 });
        sim.track_wip();
        sim
    }

    fn schedule(&mut self, time: f64, kind: EvKind) {
        self.seq += 1;
        self.heap.push(Reverse(Event {
            time,
            rank: kind.rank(),
            seq: self.seq,
            kind,
        }));
    }

    fn log(&mut self, what: &str, stage: usize, job: usize) {
        if self.sc.record_events {
            self.events.push(format!("{} {what} s{} j{job}", self.now, stage + 1));
        }
    }

    fn run(mut self) -> Result<SimReport> {
        while let Some(Reverse(ev)) = self.heap.pop() {
            self.now = ev.time;
            self.event_count += 1;
            if self.handle(ev.kind)? {
                break;
            }
            let more_now = self.heap.peek().is_some_and(|Reverse(e)| e.time == self.now);
            if !more_now {
                self.dispatch_all();
            }
            self.track_wip();
        }
        Ok(self.finish())
    }

    /// Returns `true` once the horizon is reached.
    fn handle(&mut self, kind: EvKind) -> Result<bool> {
        match kind {
            EvKind::ServiceEnd { stage, machine } => {
                let (j, start) = self.stages[stage].machines[machine]
                    .take()
                    .expect("service end on an idle machine");
                let st = &mut self.stages[stage];
                st.busy[machine] += self.now - start;
                st.moves_today += 1;
                st.dirty = true;
                self.log("end", stage, j);
                self.advance(j, stage);
            }
            EvKind::Arrival { job } => {
                self.jobs[job].status = Status::Backlog;
                self.backlog.push_back(job);
                self.open.insert(job);
                self.log("arrive", 0, job);
                self.try_release();
            }
            EvKind::DayBoundary { day } => {
                if day >= 1 {
                    self.close_day(day);
                }
                if day == self.sc.horizon_days {
                    return Ok(true);
                }
                self.open_day(day)?;
                self.schedule(f64::from(day + 1), EvKind::DayBoundary { day: day + 1 });
            }
            EvKind::Wake { stage } => {
                let st = &mut self.stages[stage];
                if st.wake_at == Some(self.now) {
                    st.wake_at = None;
                }
                st.dirty = true;
            }
        }
        Ok(false)
    }

    fn kanban(&self) -> Option<&'a [u32]> {
        (self.policy.kind == PolicyKind::Kanban).then_some(self.policy.kanban_cards.as_slice())
    }

    fn enter(&mut self, j: usize, k: usize) {
        let job = &mut self.jobs[j];
        job.stage = k;
        job.entry = self.now;
        job.status = Status::Queued;
        let st = &mut self.stages[k];
        st.queue.push(j);
        st.flow.entries += 1;
        st.dirty = true;
    }

    fn try_release(&mut self) {
        while let Some(&j) = self.backlog.front() {
            let system = SystemView {
                total_wip: self.stages.iter().map(StageState::wip).sum(),
                stage_wip: self.stages.iter().map(StageState::wip).collect(),
                next_release: Some(self.jobs[j].dates.release),
            };
            if !admit_release(self.policy, &system, self.now) {
                break;
            }
            self.backlog.pop_front();
            self.enter(j, 0);
            self.log("release", 0, j);
        }
    }

    fn advance(&mut self, j: usize, k: usize) {
        let n = self.stages.len();
        if k + 1 == n {
            self.stages[k].flow.exits += 1;
            let job = &mut self.jobs[j];
            job.status = Status::Done;
            job.completed = Some(self.now);
            self.open.remove(&j);
            self.completions_today += 1;
            self.log("complete", k, j);
            self.freed(k);
        } else if self
            .kanban()
            .is_some_and(|c| self.stages[k + 1].wip() >= c[k + 1] as usize)
        {
            self.jobs[j].status = Status::Blocked;
            self.stages[k].blocked.push_back(j);
            self.log("block", k, j);
        } else {
            self.stages[k].flow.exits += 1;
            self.enter(j, k + 1);
            self.log("move", k + 1, j);
            self.freed(k);
        }
    }

    /// A job has left stage `k`.
    fn freed(&mut self, k: usize) {
        if let Some(cards) = self.kanban() {
            if k == 0 {
                self.try_release();
            } else if !self.stages[k - 1].blocked.is_empty() && self.stages[k].wip() < cards[k] as usize {
                let j = self.stages[k - 1].blocked.pop_front().expect("nonempty");
                self.stages[k - 1].flow.exits += 1;
                self.enter(j, k);
                self.log("unblock", k, j);
                self.freed(k - 1);
            }
        } else if k + 1 == self.stages.len() {
            self.try_release();
        }
    }

    fn dispatch_all(&mut self) {
        for k in 0..self.stages.len() {
            if std::mem::take(&mut self.stages[k].dirty) {
                self.dispatch_stage(k);
            }
        }
    }

    fn dispatch_stage(&mut self, k: usize) {
        while let Some(m) = self.stages[k].free_machine() {
            if self.stages[k].queue.is_empty() {
                return;
            }
            let view = self.view(k);
            match next_job(self.policy, &view, self.now) {
                Some(JobId(id)) => self.start(k, m, id as usize),
                None => {
                    self.schedule_wake(k);
                    return;
                }
            }
        }
    }

    fn start(&mut self, k: usize, m: usize, j: usize) {
        let st = &mut self.stages[k];
        let pos = st
            .queue
            .iter()
            .position(|&q| q == j)
            .expect("dispatcher picked a queued job");
        st.queue.remove(pos);
        st.machines[m] = Some((j, self.now));
        self.jobs[j].status = Status::InService;
        let end = self.now + self.jobs[j].service[k];
        self.schedule(end, EvKind::ServiceEnd { stage: k, machine: m });
        self.log("start", k, j);
    }

    fn queued(&self, j: usize, k: usize) -> QueuedJob {
        let job = &self.jobs[j];
        QueuedJob {
            id: JobId(j as u64),
            release: job.dates.release,
            committed: job.dates.committed,
            stage_entry: job.entry,
            process_time: job.service[k],
            historical_before: self.prefix[k],
            historical_stage: self.sc.flow.sojourn[k],
            arrival_noise: job.arrival_z[k],
            service_noise: job.service_z[k],
        }
    }

    fn view(&self, k: usize) -> StageView {
        let st = &self.stages[k];
        let incoming = if k == 0 {
            Vec::new()
        } else {
            self.stages[k - 1]
                .machines
                .iter()
                .flatten()
                .map(|&(j, started)| Incoming {
                    id: JobId(j as u64),
                    started,
                    process_time: self.jobs[j].service[k - 1],
                    service_noise: self.jobs[j].service_z[k - 1],
                })
                .collect()
        };
        let truth = StageTruth {
            stage: k,
            queue: st.queue.iter().map(|&j| self.queued(j, k)).collect(),
            machines: st.machines.len(),
            busy_machines: st.in_service(),
            incoming,
            move_target: st.target_today,
            moves_so_far: st.moves_today,
        };
        make_view(
            self.policy.info_mode,
            &truth,
            self.now,
            self.policy.forecast_noise,
            self.day_start,
        )
    }

    /// Schedules a re-dispatch for the next instant the stage's decision can
    /// change without any other event happening.
    fn schedule_wake(&mut self, k: usize) {
        let mut wake = f64::INFINITY;
        for &j in &self.stages[k].queue {
            let q = self.queued(j, k);
            if self.policy.info_mode == InfoMode::Push {
                let seen = push_visible_from(&q, self.policy.forecast_noise, self.day_start);
                if seen > self.now {
                    wake = wake.min(seen);
                }
            }
            if self.policy.kind == PolicyKind::MoveTarget {
                let frac = self.policy.delay_fraction;
                let late = |t: f64| t - q.release - (q.historical_before + frac * q.historical_stage);
                if late(self.now) <= 0.0 {
                    let mut t = (q.release + q.historical_before + frac * q.historical_stage).max(self.now);
                    while late(t) <= 0.0 {
                        t = t.next_up();
                    }
                    wake = wake.min(t);
                }
            }
        }
        if wake <= self.now || wake >= self.day_start + 1.0 {
            return;
        }
        let st = &mut self.stages[k];
        if st.wake_at.is_some_and(|w| w > self.now && w <= wake) {
            return;
        }
        st.wake_at = Some(wake);
        self.schedule(wake, EvKind::Wake { stage: k });
    }

    fn close_day(&mut self, day: u32) {
        let stages: Vec<StageDay> = self
            .stages
            .iter()
            .map(|s| StageDay {
                moves: s.moves_today,
                target: s.target_today,
            })
            .collect();
        self.throughput_shortage += stages.iter().map(StageDay::shortage).sum::<f64>();
        self.mps_shortage += (self.required_today - self.completions_today as f64).max(0.0);
        self.days.push(DayRecord {
            day,
            required_qty: self.required_today,
            completions: self.completions_today,
            stages,
        });
    }

    /// Plans day `day + 1` from the live state.
    fn open_day(&mut self, day: u32) -> Result<()> {
        self.day_start = self.now;
        let wip: Vec<f64> = self.stages.iter().map(|s| s.wip() as f64).collect();
        let flow = ProcessFlow::new(self.sc.flow.sojourn.clone(), wip)?;
        let commitments = self
            .open
            .iter()
            .map(|&i| Commitment {
                job: JobId(i as u64),
                day: (self.jobs[i].dates.committed - self.now).ceil().max(1.0) as usize,
                quantity: 1.0,
            })
            .collect();
        let book = DemandBook {
            commitments,
            ..DemandBook::default()
        };
        let total: f64 = self.sc.flow.sojourn.iter().sum();
        let horizon = total.ceil() as usize + 1;
        let capacity = self
            .sc
            .mps_capacity
            .unwrap_or_else(|| self.capacities.iter().copied().fold(f64::INFINITY, f64::min));
        let options = MpsOptions {
            rollover_available_wip: self.sc.rollover_available_wip,
        };
        let mps = compute_mps(&flow, &book, &Capacity::Constant(capacity), horizon, options)?;
        let targets = compute_targets(&flow, &mps.required(), &self.capacities)?;
        self.required_today = mps.days[0].required_qty;
        self.completions_today = 0;
        for (st, t) in self.stages.iter_mut().zip(targets.stages) {
            st.target_today = t.move_target;
            st.moves_today = 0;
            st.dirty = true;
        }
        if self.sc.record_events {
            self.events.push(format!("{} day {}", self.now, day + 1));
        }
        Ok(())
    }

    fn track_wip(&mut self) {
        let mut total = 0;
        for st in &mut self.stages {
            let w = st.wip();
            st.flow.max_wip = st.flow.max_wip.max(w);
            total += w;
        }
        self.max_total_wip = self.max_total_wip.max(total);
    }

    fn finish(mut self) -> SimReport {
        let horizon = f64::from(self.sc.horizon_days);
        for st in &mut self.stages {
            for (m, slot) in st.machines.iter().enumerate() {
                if let Some((_, start)) = slot {
                    st.busy[m] += horizon - start;
                }
            }
            st.flow.final_wip = st.wip();
        }
        let jobs: Vec<JobRecord> = self
            .jobs
            .iter()
            .enumerate()
            .map(|(i, j)| JobRecord {
                id: JobId(i as u64),
                release: j.dates.release,
                committed: j.dates.committed,
                completed: j.completed,
                service_times: j.service.clone(),
            })
            .collect();
        let total_slackness = jobs
            .iter()
            .map(|j| (j.completed.unwrap_or(horizon) - j.committed).max(0.0))
            .sum();
        SimReport {
            seed: self.sc.seed,
            replication: self.replication,
            horizon_days: self.sc.horizon_days,
            days: self.days,
            jobs,
            stage_flow: self.stages.iter().map(|s| s.flow).collect(),
            max_total_wip: self.max_total_wip,
            machine_busy: self.stages.iter().map(|s| s.busy.clone()).collect(),
            throughput_shortage: self.throughput_shortage,
            mps_shortage: self.mps_shortage,
            total_slackness,
            event_count: self.event_count,
            events: self.events,
        }
    }
}
