//! Long-term planning over the price and cost response surfaces.

use std::io;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::econ::{CostModel, MarketModel, Station};
use crate::error::{Error, Result};
use crate::perfcurve::FlowLineParams;

const INV_PHI: f64 = 0.618_033_988_749_894_8;
const GOLDEN_ITERS: usize = 80;

/// A variability or capacity parameter that is either fixed or tied to the
/// bottleneck rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Coupled {
    Fixed(f64),
    Ratio(f64),
}

impl Coupled {
    pub fn at(self, mu: f64) -> f64 {
        match self {
            Coupled::Fixed(v) => v,
            Coupled::Ratio(r) => r * mu,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Variability {
    pub k1: Coupled,
    pub k2: Coupled,
    pub k3: Coupled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanningScenario {
    pub market: MarketModel,
    /// `r_j` per station.
    pub unit_capacity_costs: Vec<f64>,
    /// `μ_j / μ` per station. Empty means the first station is the
    /// bottleneck and the others run at `k3`.
    #[serde(default)]
    pub capacity_ratios: Vec<f64>,
    pub variability: Variability,
    pub pt_f: f64,
    pub v0: f64,
    pub lifetime: f64,
    pub capital_budget: f64,
    /// Production rate of everyone else in the market.
    #[serde(default)]
    pub competitor_rate: f64,
    pub mu_grid: Vec<f64>,
    pub lambda_grid: Vec<f64>,
}

fn strictly_increasing(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite()) && v.windows(2).all(|w| w[0] < w[1])
}

impl PlanningScenario {
    pub fn validate(&self) -> Result<()> {
        self.market.validate()?;
        if !(self.capital_budget >= 0.0) {
            return Err(Error::Domain {
                what: "capital budget",
                value: self.capital_budget,
            });
        }
        if !(self.competitor_rate.is_finite() && self.competitor_rate >= 0.0) {
            return Err(Error::Domain {
                what: "competitor rate",
                value: self.competitor_rate,
            });
        }
        for (name, grid) in [("mu_grid", &self.mu_grid), ("lambda_grid", &self.lambda_grid)] {
            if grid.is_empty() || !strictly_increasing(grid) {
                return Err(Error::Validation(format!(
                    "{name} must be nonempty and strictly increasing"
                )));
            }
        }
        if self.mu_grid[0] <= 0.0 {
            return Err(Error::Domain {
                what: "bottleneck capacity",
                value: self.mu_grid[0],
            });
        }
        if self.lambda_grid[0] < 0.0 {
            return Err(Error::Domain {
                what: "throughput",
                value: self.lambda_grid[0],
            });
        }
        if self.unit_capacity_costs.is_empty() {
            return Err(Error::Validation("at least one station is required".into()));
        }
        if !self.capacity_ratios.is_empty() {
            if self.capacity_ratios.len() != self.unit_capacity_costs.len() {
                return Err(Error::Validation(
                    "capacity_ratios and unit_capacity_costs differ in length".into(),
                ));
            }
            if let Some(&r) = self.capacity_ratios.iter().find(|r| !(r.is_finite() && **r > 0.0)) {
                return Err(Error::Domain {
                    what: "capacity ratio",
                    value: r,
                });
            }
        }
        self.cost_model(self.mu_grid[0])?;
        self.flow_line(self.mu_grid[0])?;
        Ok(())
    }

    pub fn flow_line(&self, mu: f64) -> Result<FlowLineParams> {
        let v = &self.variability;
        FlowLineParams::new(mu, v.k1.at(mu), v.k2.at(mu), v.k3.at(mu), self.pt_f)
    }

    /// Station capacities implied by bottleneck rate `mu`.
    pub fn station_capacities(&self, mu: f64) -> Vec<f64> {
        if self.capacity_ratios.is_empty() {
            let k3 = self.variability.k3.at(mu);
            (0..self.unit_capacity_costs.len())
                .map(|j| if j == 0 { mu } else { k3 })
                .collect()
        } else {
            self.capacity_ratios.iter().map(|r| r * mu).collect()
        }
    }

    pub fn cost_model(&self, mu: f64) -> Result<CostModel> {
        let stations = self
            .unit_capacity_costs
            .iter()
            .zip(self.station_capacities(mu))
            .map(|(&r, mu)| Station { r, mu })
            .collect();
        CostModel::new(stations, self.v0, self.lifetime)
    }

    /// Price, cost and profit of one operating point, ignoring the budget.
    fn point(&self, lambda: f64, mu: f64) -> Result<Evaluated> {
        let line = self.flow_line(mu)?;
        let l = line.sojourn(lambda)?;
        let price = self.market.price(lambda + self.competitor_rate, l)?;
        let cost = self.cost_model(mu)?.avg_cost(lambda)?;
        Ok(Evaluated { l, price, cost })
    }

    fn affordable(&self, mu: f64) -> Result<bool> {
        Ok(self.cost_model(mu)?.capital() <= self.capital_budget)
    }
}

struct Evaluated {
    l: f64,
    price: f64,
    cost: f64,
}

impl Evaluated {
    fn profit(&self, lambda: f64) -> f64 {
        lambda * (self.price - self.cost)
    }
}

/// One cell of the response surface. Values are absent where the line is
/// unstable or `λ = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SurfaceRow {
    pub lambda: f64,
    pub mu: f64,
    pub l: Option<f64>,
    pub price: Option<f64>,
    pub cost: Option<f64>,
    pub unit_profit: Option<f64>,
    pub feasible: bool,
}

impl SurfaceRow {
    pub fn profit(&self) -> Option<f64> {
        self.unit_profit.map(|x| self.lambda * x)
    }
}

/// Evaluates every `(λ, μ)` cell; rows come sorted by `(μ, λ)`.
pub fn response_surfaces(scenario: &PlanningScenario) -> Result<Vec<SurfaceRow>> {
    scenario.validate()?;
    let cells: Vec<(f64, f64)> = scenario
        .mu_grid
        .iter()
        .flat_map(|&mu| scenario.lambda_grid.iter().map(move |&lambda| (lambda, mu)))
        .collect();
    let mut rows = cells
        .par_iter()
        .map(|&(lambda, mu)| {
            let affordable = scenario.affordable(mu)?;
            let row = match scenario.point(lambda, mu) {
                Ok(e) => SurfaceRow {
                    lambda,
                    mu,
                    l: Some(e.l),
                    price: Some(e.price),
                    cost: Some(e.cost),
                    unit_profit: Some(e.price - e.cost),
                    feasible: affordable,
                },
                Err(Error::Unstable { .. } | Error::Domain { .. }) => SurfaceRow {
                    lambda,
                    mu,
                    l: None,
                    price: None,
                    cost: None,
                    unit_profit: None,
                    feasible: false,
                },
                Err(e) => return Err(e),
            };
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| a.mu.total_cmp(&b.mu).then(a.lambda.total_cmp(&b.lambda)));
    Ok(rows)
}

/// Writes `surface.csv`: `lambda,mu,l,price,cost,unit_profit,feasible`.
/// Missing values are empty fields.
pub fn write_surface_csv<W: io::Write>(rows: &[SurfaceRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush().map_err(|e| Error::Csv(e.to_string()))?;
    Ok(())
}

/// Feasible cell with the largest daily profit; ties go to the first in
/// `(μ, λ)` order.
pub fn best_cell(rows: &[SurfaceRow]) -> Option<&SurfaceRow> {
    rows.iter()
        .filter(|r| r.feasible)
        .filter_map(|r| r.profit().map(|p| (r, p)))
        .fold(None, |best: Option<(&SurfaceRow, f64)>, (r, p)| match best {
            Some((_, bp)) if bp >= p => best,
            _ => Some((r, p)),
        })
        .map(|(r, _)| r)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OperatingPoint {
    pub lambda_bar: f64,
    pub l_bar: f64,
    pub mu: f64,
    pub price: f64,
    pub cost: f64,
    pub unit_profit: f64,
    /// Daily profit `λ·(p − c)`.
    pub total_profit: f64,
}

impl OperatingPoint {
    pub fn lifetime_profit(&self, lifetime: f64) -> f64 {
        self.total_profit * lifetime
    }

    /// Writes `optimum.csv`, a header and one row.
    pub fn write_csv<W: io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.serialize(self)?;
        out.flush().map_err(|e| Error::Csv(e.to_string()))?;
        Ok(())
    }
}

fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> (f64, f64) {
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..GOLDEN_ITERS {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        }
    }
    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Profit-maximizing operating point: best grid cell, then a golden-section
/// search in `λ` between the neighbouring grid values at the winning `μ`.
pub fn optimize(scenario: &PlanningScenario) -> Result<OperatingPoint> {
    let rows = response_surfaces(scenario)?;
    let best = *best_cell(&rows)
        .ok_or_else(|| Error::InfeasibleScenario("no grid cell is stable and within the capital budget".into()))?;
    let mu = best.mu;
    let cap = scenario.flow_line(mu)?.capacity();
    let grid = &scenario.lambda_grid;
    let i = grid.iter().position(|&x| x == best.lambda).unwrap_or(0);
    let lo = if i > 0 { grid[i - 1] } else { best.lambda * 0.5 };
    let hi = grid.get(i + 1).copied().unwrap_or(best.lambda).min(cap * (1.0 - 1e-9));
    let profit = |lambda: f64| match scenario.point(lambda, mu) {
        Ok(e) if lambda > 0.0 => e.profit(lambda),
        _ => f64::NEG_INFINITY,
    };
    let mut lambda = best.lambda;
    if hi > lo {
        let (x, fx) = golden_max(profit, lo.max(f64::MIN_POSITIVE), hi);
        if fx > profit(lambda) {
            lambda = x;
        }
    }
    let e = scenario.point(lambda, mu)?;
    Ok(OperatingPoint {
        lambda_bar: lambda,
        l_bar: e.l,
        mu,
        price: e.price,
        cost: e.cost,
        unit_profit: e.price - e.cost,
        total_profit: e.profit(lambda),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CurveMode {
    /// The firm is the whole market: `Λ = λ`.
    Monopoly,
    /// The firm is negligible: `Λ` is the competitor rate, held fixed.
    PerfectCompetition,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepVar {
    /// The lead time itself.
    LeadTime,
    Lambda,
    Mu,
    K1,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveSpec {
    pub name: String,
    pub mode: CurveMode,
    pub sweep: SweepVar,
    pub values: Vec<f64>,
    /// Throughput held fixed when it is not swept.
    #[serde(default)]
    pub lambda: f64,
    /// Bottleneck rate held fixed when it is not swept.
    #[serde(default)]
    pub mu: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurveSample {
    pub l: f64,
    pub price: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub name: String,
    /// Sorted by `l`.
    pub samples: Vec<CurveSample>,
    /// One line per skipped sweep value.
    pub warnings: Vec<String>,
}

impl Curve {
    /// Writes `curve_<name>.csv`: `l,price`.
    pub fn write_csv<W: io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for s in &self.samples {
            out.serialize(s)?;
        }
        out.flush().map_err(|e| Error::Csv(e.to_string()))?;
        Ok(())
    }
}

/// Samples one price–lead-time curve.
pub fn price_sojourn_curves(scenario: &PlanningScenario, spec: &CurveSpec) -> Result<Curve> {
    scenario.market.validate()?;
    if spec.values.is_empty() {
        return Err(Error::Validation(format!("curve {}: empty sweep", spec.name)));
    }
    if spec.mode == CurveMode::PerfectCompetition && !(scenario.competitor_rate > 0.0) {
        return Err(Error::Validation(format!(
            "curve {}: perfect competition needs a positive competitor rate",
            spec.name
        )));
    }
    let v = &scenario.variability;
    let line_at = |mu: f64, k1: f64| FlowLineParams::new(mu, k1, v.k2.at(mu), v.k3.at(mu), scenario.pt_f);
    let mut samples = Vec::with_capacity(spec.values.len());
    let mut warnings = Vec::new();
    for &x in &spec.values {
        let point = || -> Result<(f64, f64)> {
            let (l, lambda) = match spec.sweep {
                SweepVar::LeadTime => {
                    let lambda = match spec.mode {
                        CurveMode::Monopoly => line_at(spec.mu, v.k1.at(spec.mu))?.throughput_for_sojourn(x)?,
                        CurveMode::PerfectCompetition => spec.lambda,
                    };
                    (x, lambda)
                }
                SweepVar::Lambda => (line_at(spec.mu, v.k1.at(spec.mu))?.sojourn(x)?, x),
                SweepVar::Mu => (line_at(x, v.k1.at(x))?.sojourn(spec.lambda)?, spec.lambda),
                SweepVar::K1 => (line_at(spec.mu, x)?.sojourn(spec.lambda)?, spec.lambda),
            };
            let total = match spec.mode {
                CurveMode::Monopoly => lambda,
                CurveMode::PerfectCompetition => scenario.competitor_rate,
            };
            Ok((l, scenario.market.price(total, l)?))
        };
        match point() {
            Ok((l, price)) => samples.push(CurveSample { l, price }),
            Err(e) => warnings.push(format!("{} = {x}: skipped ({e})", sweep_name(spec.sweep))),
        }
    }
    samples.sort_by(|a, b| a.l.total_cmp(&b.l));
    Ok(Curve {
        name: spec.name.clone(),
        samples,
        warnings,
    })
}

fn sweep_name(s: SweepVar) -> &'static str {
    match s {
        SweepVar::LeadTime => "lead_time",
        SweepVar::Lambda => "lambda",
        SweepVar::Mu => "mu",
        SweepVar::K1 => "k1",
    }
}

/// Lead times where the sampled curve changes curvature, located by central
/// second differences and linear interpolation between sign changes.
pub fn inflection_points(samples: &[CurveSample]) -> Vec<f64> {
    let d2: Vec<(f64, f64)> = samples
        .windows(3)
        .filter_map(|w| {
            let (h1, h2) = (w[1].l - w[0].l, w[2].l - w[1].l);
            if h1 <= 0.0 || h2 <= 0.0 {
                return None;
            }
            let s1 = (w[1].price - w[0].price) / h1;
            let s2 = (w[2].price - w[1].price) / h2;
            Some((w[1].l, 2.0 * (s2 - s1) / (h1 + h2)))
        })
        .collect();
    d2.windows(2)
        .filter(|w| w[0].1 * w[1].1 < 0.0)
        .map(|w| {
            let ((x0, y0), (x1, y1)) = (w[0], w[1]);
            x0 + (x1 - x0) * y0 / (y0 - y1)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HorizonClass {
    /// Horizon beyond which price responds to lead time.
    pub t_p: f64,
    /// Horizon beyond which capacity can be changed.
    pub t_c: f64,
    /// Decision horizon.
    pub t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HorizonLabel {
    LongTermPlanning,
    CapacityPlanning,
    DemandPlanning,
    Scheduling,
    /// Some horizon is unbounded.
    Indeterminate,
}

impl HorizonLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            HorizonLabel::LongTermPlanning => "long-term-planning",
            HorizonLabel::CapacityPlanning => "capacity-planning",
            HorizonLabel::DemandPlanning => "demand-planning",
            HorizonLabel::Scheduling => "scheduling",
            HorizonLabel::Indeterminate => "indeterminate",
        }
    }
}

/// Which kind of decision a horizon supports. Boundary ties go to the
/// broader label.
pub fn classify_horizon(h: HorizonClass) -> Result<HorizonLabel> {
    for (what, v) in [("t_p", h.t_p), ("t_c", h.t_c), ("t", h.t)] {
        if !(v >= 0.0) {
            return Err(Error::Domain { what, value: v });
        }
    }
    if [h.t_p, h.t_c, h.t].iter().any(|v| v.is_infinite()) {
        return Ok(HorizonLabel::Indeterminate);
    }
    Ok(if h.t >= h.t_p.max(h.t_c) {
        HorizonLabel::LongTermPlanning
    } else if h.t <= h.t_p.min(h.t_c) {
        HorizonLabel::Scheduling
    } else if h.t >= h.t_c {
        HorizonLabel::CapacityPlanning
    } else {
        HorizonLabel::DemandPlanning
    })
}

/// Admits a decomposition step only if it computes within the tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecompositionGuard {
    pub tolerance: f64,
}

impl DecompositionGuard {
    pub fn admits(&self, computation_time: f64) -> bool {
        computation_time <= self.tolerance
    }
}
