//! Acceptance criteria 1–9. Runs as a plain binary so every criterion prints
//! its verdict line even when the others pass.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use hierplan::dispatch::{InfoMode, PolicyKind, PolicySpec};
use hierplan::econ::MarketModel;
use hierplan::movetarget::compute_targets;
use hierplan::mps::{compute_mps, Capacity, Commitment, DemandBook, JobDates, JobId, MpsOptions, ProcessFlow};
use hierplan::perfcurve::FlowLineParams;
use hierplan::planner::{
    best_cell, optimize, price_sojourn_curves, response_surfaces, Coupled, CurveMode, CurveSpec, PlanningScenario,
    SweepVar, Variability,
};
use hierplan::simflow::{
    compare, run, run_replication, Arrivals, Metric, ServiceDist, SimReport, SimScenario, StageConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// Every report produced anywhere in the suite, for criterion 8.
#[derive(Default)]
struct Audit {
    reports: usize,
    violations: Vec<String>,
}

impl Audit {
    fn check(&mut self, label: &str, r: &SimReport, policy: &PolicySpec) {
        self.reports += 1;
        for (k, f) in r.stage_flow.iter().enumerate() {
            if !f.conserved() {
                self.violations.push(format!("{label}: stage {} flow {f:?}", k + 1));
            }
            if k > 0 && f.entries != r.stage_flow[k - 1].exits {
                self.violations
                    .push(format!("{label}: stage {} entries != upstream exits", k + 1));
            }
            if policy.kind == PolicyKind::Kanban && f.max_wip > policy.kanban_cards[k] as usize {
                self.violations
                    .push(format!("{label}: stage {} WIP {} over cards", k + 1, f.max_wip));
            }
        }
        if let Some(cap) = policy.conwip_cap.filter(|_| policy.kind == PolicyKind::Conwip) {
            if r.max_total_wip > cap as usize {
                self.violations
                    .push(format!("{label}: WIP {} over CONWIP cap {cap}", r.max_total_wip));
            }
        }
    }
}

// ---------------------------------------------------------------- 1

fn lead_time_curve(gamma: f64, points: usize) -> (Vec<(f64, f64)>, f64) {
    let scenario = PlanningScenario {
        market: MarketModel::new(3000.0, 1.0, gamma, 0.3).unwrap(),
        unit_capacity_costs: vec![0.0],
        capacity_ratios: vec![],
        variability: Variability {
            k1: Coupled::Fixed(1.0),
            k2: Coupled::Fixed(1.0),
            k3: Coupled::Ratio(1.0),
        },
        pt_f: 1.0,
        v0: 0.0,
        lifetime: 1.0,
        capital_budget: 0.0,
        competitor_rate: 100.0,
        mu_grid: vec![1.0],
        lambda_grid: vec![0.5],
    };
    let end = (3000.0f64).powf(1.0 / gamma);
    let mut values: Vec<f64> = (0..=points).map(|i| end * i as f64 / points as f64).collect();
    values.push(end * (1.0 + 1e-12));
    let spec = CurveSpec {
        name: format!("gamma_{gamma}"),
        mode: CurveMode::PerfectCompetition,
        sweep: SweepVar::LeadTime,
        values,
        lambda: 1.0,
        mu: 1.0,
    };
    let c = price_sojourn_curves(&scenario, &spec).unwrap();
    (c.samples.iter().map(|s| (s.l, s.price)).collect(), end)
}

fn criterion_1() -> Outcome {
    let mut notes = Vec::new();
    let mut pass = true;
    let mut drops = Vec::new();
    for gamma in [3.0, 0.8] {
        let (c, end) = lead_time_curve(gamma, 1000);
        let p0 = c[0].1;
        let monotone = c.windows(2).all(|w| w[1].1 <= w[0].1);
        let at_end = c[1000].1 / p0;
        let past_end = c[1001].1;
        let drop = (p0 - c[100].1) / p0;
        pass &= monotone && at_end < 1e-9 && past_end == 0.0;
        notes.push(format!(
            "gamma={gamma}: l*={end:.4} monotone={monotone} P(l*)/P0={at_end:.1e} first-decile drop={:.4}%",
            drop * 100.0
        ));
        drops.push(drop);
    }
    pass &= drops[1] > drops[0];
    notes.push(format!("slope ratio (0.8 vs 3) = {:.1}", drops[1] / drops[0]));
    outcome(pass, notes.join("; "))
}

// ---------------------------------------------------------------- 2

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let mu = rng.random_range(0.1..100.0);
        let p = FlowLineParams::new(
            mu,
            rng.random_range(0.0..5.0),
            rng.random_range(0.0..5.0),
            mu * rng.random_range(0.5..3.0),
            rng.random_range(0.01..10.0),
        )
        .unwrap();
        let p = if p.k1 + p.k2 == 0.0 {
            FlowLineParams { k1: 1.0, ..p }
        } else {
            p
        };
        let lambda = p.capacity() * rng.random_range(1e-6..0.999);
        let back = p.throughput_for_sojourn(p.sojourn(lambda).unwrap()).unwrap();
        worst = worst.max((back - lambda).abs() / lambda);
    }
    // one station: k1 = 1, k2 = 0, PT_f = 1/μ gives 1/(μ − λ)
    let mm1 = FlowLineParams::new(10.0, 1.0, 0.0, 1e6, 0.1).unwrap();
    let exact = 1.0 / (10.0 - 5.0);
    let reduction = (mm1.sojourn(5.0).unwrap() - exact).abs();
    outcome(
        worst < 1e-9,
        format!(
            "10^4 draws, worst relative round-trip error {worst:.2e}; k3-free M/M/1 reduction off by {reduction:.1e}"
        ),
    )
}

// ---------------------------------------------------------------- 3

fn criterion_3(audit: &mut Audit) -> Outcome {
    let (lambda, mu) = (5.0, 10.0);
    let sc = SimScenario {
        flow: ProcessFlow::new(vec![1.0 / (mu - lambda)], vec![0.0]).unwrap(),
        stages: vec![StageConfig {
            machines: 1,
            service: ServiceDist::exponential(1.0 / mu),
        }],
        arrivals: Arrivals::Poisson {
            rate: lambda,
            due_offset: 1.0,
        },
        horizon_days: 21_000,
        seed: 3,
        mps_capacity: None,
        rollover_available_wip: false,
        record_events: false,
    };
    let policy = PolicySpec::new(PolicyKind::Fifo, InfoMode::Pull);
    let r = run(&sc, &policy).unwrap();
    audit.check("M/M/1", &r, &policy);
    let exact = 1.0 / (mu - lambda);
    let sim_err = (r.mean_sojourn() - exact).abs() / exact;
    // with k1 = 1, k2 = 0 and PT_f = 1/μ the curve is exactly 1/(μ − λ)
    let line = FlowLineParams::new(mu, 1.0, 0.0, f64::MAX, 1.0 / mu).unwrap();
    let analytic = line.sojourn(lambda).unwrap();
    let analytic_err = (analytic - exact).abs();
    outcome(
        r.completions() >= 100_000 && sim_err < 0.05 && analytic_err < 1e-15,
        format!(
            "{} completions, mean sojourn {:.5} vs {exact} (rel err {:.2}%); analytic curve {analytic}",
            r.completions(),
            r.mean_sojourn(),
            sim_err * 100.0
        ),
    )
}

// ---------------------------------------------------------------- 4

/// Moves each stage's WIP forward day by day and records when it clears the
/// last stage; the schedule then follows from demand, capacity and carry-over.
fn wip_propagation_oracle(sojourn: &[f64], wip: &[f64], demand: &[f64], mu: f64) -> (Vec<f64>, f64) {
    let n = sojourn.len();
    let horizon = demand.len();
    let mut ready = vec![0.0; horizon + 1];
    for m in 0..n {
        // position = time still needed before completion
        let mut left: f64 = sojourn[m..].iter().sum();
        let mut day = 1;
        while left > 1.0 {
            left -= 1.0;
            day += 1;
        }
        if day <= horizon {
            ready[day] += wip[m];
        }
    }
    let mut q = Vec::new();
    let mut carried = 0.0;
    for j in 1..=horizon {
        let want = demand[j - 1] + carried;
        let make = ready[j].min(want).min(mu);
        carried = want - make;
        q.push(make);
    }
    (q, carried)
}

fn demand_book(q: &[f64]) -> DemandBook {
    DemandBook {
        commitments: q
            .iter()
            .enumerate()
            .map(|(i, &quantity)| Commitment {
                job: JobId(i as u64),
                day: i + 1,
                quantity,
            })
            .collect(),
        ..DemandBook::default()
    }
}

fn criterion_4() -> Outcome {
    let flow = ProcessFlow::new(vec![1.0, 1.0], vec![4.0, 6.0]).unwrap();
    let demand = [3.0, 10.0, 0.0];
    let r = compute_mps(
        &flow,
        &demand_book(&demand),
        &Capacity::Constant(5.0),
        3,
        MpsOptions::default(),
    )
    .unwrap();
    let (oracle, oracle_late) = wip_propagation_oracle(&[1.0, 1.0], &[4.0, 6.0], &demand, 5.0);
    let got = r.required();
    outcome(
        got == vec![3.0, 4.0, 0.0] && r.terminal_delinquency() == 6.0 && got == oracle && oracle_late == 6.0,
        format!(
            "Q={got:?} delinquency={} oracle Q={oracle:?} delinquency={oracle_late}",
            r.terminal_delinquency()
        ),
    )
}

// ---------------------------------------------------------------- 5

fn criterion_5() -> Outcome {
    let flow = ProcessFlow::new(vec![1.0, 1.0], vec![4.0, 6.0]).unwrap();
    let m = compute_targets(&flow, &[5.0, 5.0], &[5.0, 5.0]).unwrap().targets();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut bad = 0;
    for _ in 0..1000 {
        let l = rng.random_range(1e-6..=1.0);
        let w = f64::from(rng.random_range(0..50u32));
        let p = rng.random_range(0.0..50.0);
        let mu = rng.random_range(0.0..50.0);
        let f = ProcessFlow::new(vec![l], vec![w]).unwrap();
        let got = compute_targets(&f, &[p], &[mu]).unwrap().targets()[0];
        if got != w.min(p).min(mu) {
            bad += 1;
        }
    }
    outcome(
        m == vec![4.0, 5.0] && bad == 0,
        format!("M={m:?}; single-stage collapse failed on {bad} of 1000 draws"),
    )
}

// ---------------------------------------------------------------- 6

fn deterministic_scenario(rng: &mut ChaCha8Rng) -> SimScenario {
    let n = rng.random_range(1..=5usize);
    let sojourn: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
    let wip: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(0..3u32))).collect();
    let stages = (0..n)
        .map(|_| StageConfig {
            machines: rng.random_range(1..=3),
            service: ServiceDist::deterministic(rng.random_range(0.05..0.4)),
        })
        .collect();
    let jobs = (0..rng.random_range(5..40))
        .map(|_| {
            let release = rng.random_range(0.0..8.0);
            JobDates {
                release,
                committed: release + rng.random_range(0.0..3.0),
            }
        })
        .collect();
    SimScenario {
        flow: ProcessFlow::new(sojourn, wip).unwrap(),
        stages,
        arrivals: Arrivals::Scheduled(jobs),
        horizon_days: 10,
        seed: rng.random(),
        mps_capacity: None,
        rollover_available_wip: false,
        record_events: true,
    }
}

fn criterion_6(audit: &mut Audit) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let kinds = [
        PolicyKind::MoveTarget,
        PolicyKind::Fifo,
        PolicyKind::Spt,
        PolicyKind::Edd,
        PolicyKind::Conwip,
        PolicyKind::Kanban,
    ];
    let mut mismatches = 0;
    let mut events = 0;
    for i in 0..20 {
        let sc = deterministic_scenario(&mut rng);
        let n = sc.stages.len();
        let mut pull = PolicySpec::new(kinds[i % kinds.len()], InfoMode::Pull);
        pull.conwip_cap = Some(sc.flow.wip.iter().sum::<f64>() as u32 + 3);
        pull.kanban_cards = vec![3; n];
        let push = PolicySpec {
            info_mode: InfoMode::Push,
            forecast_noise: 0.0,
            ..pull.clone()
        };
        let a = run(&sc, &pull).unwrap();
        let b = run(&sc, &push).unwrap();
        audit.check("deterministic pull", &a, &pull);
        audit.check("deterministic push", &b, &push);
        events += a.events.len();
        if a.events.join("\n").into_bytes() != b.events.join("\n").into_bytes() {
            mismatches += 1;
        }
    }
    outcome(
        mismatches == 0,
        format!("20 scenarios, {events} logged events, {mismatches} pull/push log mismatches"),
    )
}

// ---------------------------------------------------------------- 7

const MEAN_SERVICE: f64 = 0.08;

fn five_stage_line() -> SimScenario {
    SimScenario {
        flow: ProcessFlow::new(vec![0.25; 5], vec![3.0; 5]).unwrap(),
        stages: (0..5)
            .map(|_| StageConfig {
                machines: 2,
                service: ServiceDist::gamma(MEAN_SERVICE, 1.0),
            })
            .collect(),
        arrivals: Arrivals::Poisson {
            rate: 18.0,
            due_offset: 2.0,
        },
        horizon_days: 30,
        seed: 7,
        mps_capacity: None,
        rollover_available_wip: false,
        record_events: false,
    }
}

fn criterion_7(audit: &mut Audit) -> Outcome {
    const R: u64 = 200;
    let sc = five_stage_line();
    let pull = PolicySpec::new(PolicyKind::MoveTarget, InfoMode::Pull);
    let push = |sigma: f64| PolicySpec::new(PolicyKind::MoveTarget, InfoMode::Push).with_noise(sigma);
    for (label, p) in [("pull", pull.clone()), ("push 0.5", push(0.5 * MEAN_SERVICE))] {
        for r in 0..3 {
            audit.check(label, &run_replication(&sc, &p, r).unwrap(), &p);
        }
    }
    let mut means = Vec::new();
    let mut notes = Vec::new();
    for factor in [0.0, 0.1, 0.5] {
        let c = compare(&sc, &pull, &push(factor * MEAN_SERVICE), R).unwrap();
        let m = c.metric(Metric::ThroughputShortage);
        means.push(m.b.mean);
        notes.push(format!(
            "sigma={factor}*mean: push G={:.3}, pull-push diff {:.3} [{:.3}, {:.3}], pull wins {:.0}%",
            m.b.mean,
            m.diff.mean,
            m.diff.ci_low,
            m.diff.ci_high,
            m.win_rate * 100.0
        ));
        if factor == 0.0 && c.rows.iter().any(|r| r.diff != 0.0) {
            return outcome(false, "push with zero noise differs from pull".into());
        }
        if !(m.diff.ci_low.is_finite() && m.diff.ci_high.is_finite()) {
            return outcome(false, format!("no CI reported at sigma={factor}*mean"));
        }
    }
    let monotone = means[0] <= means[1] && means[1] <= means[2];
    notes.push(format!("pull G={:.3}, {R} replications", means[0]));
    outcome(monotone, notes.join("; "))
}

// ---------------------------------------------------------------- 8

fn criterion_8(audit: &mut Audit) -> Outcome {
    let sc = five_stage_line();
    let mut conwip = PolicySpec::new(PolicyKind::Conwip, InfoMode::Pull);
    conwip.conwip_cap = Some(20);
    let mut kanban = PolicySpec::new(PolicyKind::Kanban, InfoMode::Pull);
    kanban.kanban_cards = vec![4; 5];
    for p in [conwip, kanban] {
        for r in 0..10 {
            let report = run_replication(&sc, &p, r).unwrap();
            audit.check(p.kind.name(), &report, &p);
        }
    }
    outcome(
        audit.violations.is_empty(),
        format!(
            "{} simulations audited, {} violations{}",
            audit.reports,
            audit.violations.len(),
            audit
                .violations
                .first()
                .map(|v| format!(" (first: {v})"))
                .unwrap_or_default()
        ),
    )
}

// ---------------------------------------------------------------- 9

fn random_planning(rng: &mut ChaCha8Rng) -> PlanningScenario {
    let stations = rng.random_range(1..4);
    PlanningScenario {
        market: MarketModel::new(
            rng.random_range(100.0..5000.0),
            rng.random_range(0.0..2.0),
            rng.random_range(0.5..3.0),
            rng.random_range(0.1..0.9),
        )
        .unwrap(),
        unit_capacity_costs: (0..stations).map(|_| rng.random_range(0.0..50.0)).collect(),
        capacity_ratios: vec![],
        variability: Variability {
            k1: Coupled::Fixed(rng.random_range(0.0..3.0)),
            k2: Coupled::Fixed(rng.random_range(0.0..3.0)),
            k3: Coupled::Ratio(rng.random_range(1.0..2.0)),
        },
        pt_f: rng.random_range(0.1..2.0),
        v0: rng.random_range(0.0..5.0),
        lifetime: 365.0,
        capital_budget: rng.random_range(50.0..5000.0),
        competitor_rate: rng.random_range(0.0..20.0),
        mu_grid: vec![2.0, 4.0, 8.0, 16.0, 32.0],
        lambda_grid: (1..=12).map(|i| f64::from(i) * 1.5).collect(),
    }
}

fn criterion_9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut beaten = 0;
    let mut solved = 0;
    for _ in 0..100 {
        let s = random_planning(&mut rng);
        let rows = response_surfaces(&s).unwrap();
        let Ok(op) = optimize(&s) else {
            if best_cell(&rows).is_some() {
                beaten += 1;
            }
            continue;
        };
        solved += 1;
        if rows
            .iter()
            .filter(|r| r.feasible)
            .any(|r| r.profit().unwrap() > op.total_profit)
        {
            beaten += 1;
        }
    }
    let (a, alpha, comp, v0) = (100.0f64, 0.5f64, 10.0f64, 0.1f64);
    let s = PlanningScenario {
        market: MarketModel::new(a, 0.0, 1.0, alpha).unwrap(),
        unit_capacity_costs: vec![0.0],
        capacity_ratios: vec![],
        variability: Variability {
            k1: Coupled::Fixed(1.0),
            k2: Coupled::Fixed(1.0),
            k3: Coupled::Ratio(1.0),
        },
        pt_f: 1.0,
        v0,
        lifetime: 365.0,
        capital_budget: 0.0,
        competitor_rate: comp,
        mu_grid: vec![1000.0],
        lambda_grid: (1..=20).map(|i| f64::from(i) * 2.0).collect(),
    };
    let op = optimize(&s).unwrap();
    let brute = (1..=1_000_000)
        .map(|i| f64::from(i) * 4e-5)
        .map(|x| x * ((a / (x + comp)).powf(1.0 / (1.0 - alpha)) - v0))
        .fold(f64::NEG_INFINITY, f64::max);
    let err = (op.total_profit - brute).abs() / brute;
    outcome(
        beaten == 0 && err < 0.005,
        format!("{solved}/100 scenarios feasible, grid cells beating the optimum: {beaten}; b=0,r=0 optimum off brute force by {:.4}%", err * 100.0),
    )
}

fn main() -> ExitCode {
    let mut audit = Audit::default();
    let criteria: Vec<(&str, Duration, Box<dyn FnOnce(&mut Audit) -> Outcome>)> = vec![
        (
            "price-lead-time curves",
            Duration::from_secs(1),
            Box::new(|_| criterion_1()),
        ),
        (
            "performance-curve round trip",
            Duration::from_secs(1),
            Box::new(|_| criterion_2()),
        ),
        ("M/M/1 oracle", Duration::from_secs(30), Box::new(criterion_3)),
        (
            "MPS worked instance",
            Duration::from_secs(1),
            Box::new(|_| criterion_4()),
        ),
        (
            "move-target worked instance",
            Duration::from_secs(1),
            Box::new(|_| criterion_5()),
        ),
        (
            "deterministic push equals pull",
            Duration::from_secs(10),
            Box::new(criterion_6),
        ),
        (
            "pull vs push experiment",
            Duration::from_secs(300),
            Box::new(criterion_7),
        ),
        ("conservation and caps", Duration::from_secs(300), Box::new(criterion_8)),
        (
            "planner exhaustiveness",
            Duration::from_secs(30),
            Box::new(|_| criterion_9()),
        ),
    ];
    let mut failed = 0;
    for (i, (name, limit, check)) in criteria.into_iter().enumerate() {
        let t0 = Instant::now();
        let o = check(&mut audit);
        let took = t0.elapsed();
        let pass = o.pass && took <= limit;
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {}: {} {name} ({:.2}s, limit {}s): {}",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            took.as_secs_f64(),
            limit.as_secs(),
            o.detail
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
