//! Scenario files.
//!
//! One TOML document holds every section any subcommand might need; each
//! subcommand checks only the sections it reads. Unknown keys are rejected.

use std::path::Path;

use serde::Deserialize;

use hierplan::dispatch::PolicySpec;
use hierplan::econ::MarketModel;
use hierplan::mps::{Capacity, Commitment, DemandBook, JobId, ProcessFlow};
use hierplan::planner::{Coupled, CurveSpec, PlanningScenario, Variability};
use hierplan::simflow::{Arrivals, SimScenario, StageConfig};

use crate::CliError;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub market: Option<MarketModel>,
    pub cost: Option<CostSection>,
    pub perfcurve: Option<PerfcurveSection>,
    pub flow: Option<ProcessFlow>,
    pub demand: Option<DemandSection>,
    pub capacities: Option<CapacitiesSection>,
    pub policy: Option<PolicySpec>,
    pub simulation: Option<SimulationSection>,
    pub experiment: Option<ExperimentSection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostSection {
    pub unit_capacity_costs: Vec<f64>,
    #[serde(default)]
    pub capacity_ratios: Vec<f64>,
    pub v0: f64,
    pub lifetime: f64,
    pub capital_budget: f64,
    #[serde(default)]
    pub competitor_rate: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerfcurveSection {
    pub pt_f: f64,
    pub k1: Coupled,
    pub k2: Coupled,
    pub k3: Coupled,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemandSection {
    /// Committed quantity per day, starting with day 1.
    #[serde(default)]
    pub daily: Vec<f64>,
    /// Required quantities `Q_j` to decompose directly, skipping the MPS.
    #[serde(default)]
    pub required: Option<Vec<f64>>,
    /// MPS horizon; defaults to the length of `daily`.
    #[serde(default)]
    pub horizon: Option<usize>,
    #[serde(default)]
    pub rollover_available_wip: bool,
}

impl DemandSection {
    pub fn book(&self) -> DemandBook {
        DemandBook {
            commitments: self
                .daily
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
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapacitiesSection {
    /// Daily MPS capacity: one number or one per day.
    pub mps: Capacity,
    /// Per-stage daily capacity for move targets.
    #[serde(default)]
    pub stages: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    pub stages: Vec<StageConfig>,
    pub arrivals: Arrivals,
    pub horizon_days: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub mps_capacity: Option<f64>,
    #[serde(default)]
    pub record_events: bool,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    #[serde(default)]
    pub mu_grid: Vec<f64>,
    #[serde(default)]
    pub lambda_grid: Vec<f64>,
    #[serde(default)]
    pub curves: Vec<CurveSpec>,
    #[serde(default)]
    pub replications: Option<u64>,
    /// Second policy for `compare`.
    #[serde(default)]
    pub against: Option<PolicySpec>,
}

fn need<'a, T>(section: &'a Option<T>, name: &str) -> Result<&'a T, CliError> {
    section
        .as_ref()
        .ok_or_else(|| CliError::Config(format!("missing [{name}] section")))
}

impl ScenarioFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string().trim_end().to_string()))
    }

    pub fn planning(&self) -> Result<PlanningScenario, CliError> {
        let cost = need(&self.cost, "cost")?;
        let pc = need(&self.perfcurve, "perfcurve")?;
        let exp = self.experiment.clone().unwrap_or_default();
        Ok(PlanningScenario {
            market: *need(&self.market, "market")?,
            unit_capacity_costs: cost.unit_capacity_costs.clone(),
            capacity_ratios: cost.capacity_ratios.clone(),
            variability: Variability {
                k1: pc.k1,
                k2: pc.k2,
                k3: pc.k3,
            },
            pt_f: pc.pt_f,
            v0: cost.v0,
            lifetime: cost.lifetime,
            capital_budget: cost.capital_budget,
            competitor_rate: cost.competitor_rate,
            mu_grid: exp.mu_grid,
            lambda_grid: exp.lambda_grid,
        })
    }

    pub fn curves(&self) -> Result<&[CurveSpec], CliError> {
        let curves = &need(&self.experiment, "experiment")?.curves;
        if curves.is_empty() {
            return Err(CliError::Config("[experiment] lists no curves".into()));
        }
        for c in curves {
            let ok = !c.name.is_empty()
                && c.name
                    .chars()
                    .all(|ch| ch.is_ascii_alphanumeric() || ch == '_' || ch == '-');
            if !ok {
                return Err(CliError::Config(format!(
                    "curve name {:?} must be letters, digits, '_' or '-'",
                    c.name
                )));
            }
        }
        Ok(curves)
    }

    pub fn flow(&self) -> Result<&ProcessFlow, CliError> {
        need(&self.flow, "flow")
    }

    pub fn demand(&self) -> Result<&DemandSection, CliError> {
        need(&self.demand, "demand")
    }

    pub fn capacities(&self) -> Result<&CapacitiesSection, CliError> {
        need(&self.capacities, "capacities")
    }

    pub fn policy(&self) -> Result<&PolicySpec, CliError> {
        need(&self.policy, "policy")
    }

    pub fn against(&self) -> Result<&PolicySpec, CliError> {
        need(&self.experiment, "experiment")?
            .against
            .as_ref()
            .ok_or_else(|| CliError::Config("missing [experiment.against] policy".into()))
    }

    pub fn replications(&self) -> Option<u64> {
        self.experiment.as_ref().and_then(|e| e.replications)
    }

    pub fn simulation(&self, rollover: bool) -> Result<SimScenario, CliError> {
        let s = need(&self.simulation, "simulation")?;
        Ok(SimScenario {
            flow: self.flow()?.clone(),
            stages: s.stages.clone(),
            arrivals: s.arrivals.clone(),
            horizon_days: s.horizon_days,
            seed: s.seed,
            mps_capacity: s.mps_capacity,
            rollover_available_wip: rollover || self.demand.as_ref().is_some_and(|d| d.rollover_available_wip),
            record_events: s.record_events,
        })
    }
}
