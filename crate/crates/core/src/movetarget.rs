//! Move targets: decomposition by space.
//!
//! Today's MPS quantities are pushed back through the process flow, from the
//! last stage to the first. Stage `k` works toward the requirement of the day
//! on which its WIP historically completes, plus whatever the downstream
//! stage could not move:
//!
//! ```text
//! M_k     = min(A_1^k, D_1^k, μ_1^k)
//! D_1^k   = P_j + (D_1^{k+1} − M_{k+1})⁺,   R_j^L < n − k ≤ R_j^U
//! A_1^k   = Σ_{i=k−R_k}^{k} W_i
//! ```
//!
//! `R_k` counts how many stages upstream of `k` (inclusive) can reach the end
//! of stage `k` within one day.

use std::io;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mps::ProcessFlow;

fn check_stage(flow: &ProcessFlow, k: usize) -> Result<()> {
    if k == 0 || k > flow.stages() {
        return Err(Error::Domain {
            what: "stage index",
            value: k as f64,
        });
    }
    Ok(())
}

/// `R_k`: largest `i ∈ [0, k]` with `Σ_{m=k−i}^{k} L_m ≤ 1`, or −1.
pub fn stage_reach(flow: &ProcessFlow, k: usize) -> Result<i64> {
    check_stage(flow, k)?;
    Ok(flow.reach(k, 1.0))
}

/// `A_1^k`: WIP that can reach the end of stage `k` today.
pub fn stage_available_wip(flow: &ProcessFlow, k: usize) -> Result<f64> {
    let reach = stage_reach(flow, k)?;
    let k = k as i64;
    Ok((k - reach..=k).map(|i| flow.wip_at(i)).fold(0.0, |acc, w| acc + w))
}

/// The MPS day whose requirement stage `k` works toward: the smallest `j`
/// with `R_j^L < n − k ≤ R_j^U`, searched up to `max_day`.
///
/// Trailing stages with zero remaining sojourn map to day 1.
pub fn target_day(flow: &ProcessFlow, k: usize, max_day: usize) -> Result<usize> {
    check_stage(flow, k)?;
    let n = flow.stages();
    let downstream = (n - k) as i64;
    let remaining: f64 = flow.sojourn[k - 1..].iter().sum();
    if remaining == 0.0 && max_day >= 1 {
        return Ok(1);
    }
    for j in 1..=max_day {
        let (upper, lower) = flow.reach_windows(j);
        if lower < downstream && downstream <= upper {
            return Ok(j);
        }
    }
    Err(Error::HorizonTooShort {
        stage: k,
        day: (remaining.ceil() as usize).max(1),
        horizon: max_day,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageTarget {
    pub stage: usize,
    pub available_wip: f64,
    pub demand: f64,
    pub capacity: f64,
    pub move_target: f64,
}

/// Today's per-stage targets, stage 1 first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoveTargetTable {
    pub stages: Vec<StageTarget>,
}

impl MoveTargetTable {
    pub fn targets(&self) -> Vec<f64> {
        self.stages.iter().map(|s| s.move_target).collect()
    }

    /// Writes `targets.csv`: `stage,available_wip,demand,capacity,move_target`.
    pub fn write_csv<W: io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for s in &self.stages {
            out.serialize(s)?;
        }
        out.flush().map_err(|e| Error::Csv(e.to_string()))?;
        Ok(())
    }
}

/// Backward recurrence from the last stage to the first.
///
/// `required[j−1]` is the MPS quantity `P_j`; `capacities[k−1]` is `μ_1^k`.
pub fn compute_targets(flow: &ProcessFlow, required: &[f64], capacities: &[f64]) -> Result<MoveTargetTable> {
    flow.validate()?;
    let n = flow.stages();
    if capacities.len() != n {
        return Err(Error::Data(format!(
            "{} stage capacities for a {n}-stage flow",
            capacities.len()
        )));
    }
    let mut stages = Vec::with_capacity(n);
    let (mut next_demand, mut next_target) = (0.0f64, 0.0f64);
    for k in (1..=n).rev() {
        let j = target_day(flow, k, required.len())?;
        let demand = required[j - 1] + (next_demand - next_target).max(0.0);
        let available = stage_available_wip(flow, k)?;
        let capacity = capacities[k - 1];
        let target = available.min(demand).min(capacity);
        stages.push(StageTarget {
            stage: k,
            available_wip: available,
            demand,
            capacity,
            move_target: target,
        });
        next_demand = demand;
        next_target = target;
    }
    stages.reverse();
    Ok(MoveTargetTable { stages })
}

/// Throughput shortage `Σ (target − actual)⁺`.
pub fn shortage(targets: &[f64], actual: &[f64]) -> Result<f64> {
    if targets.len() != actual.len() {
        return Err(Error::Data(format!(
            "{} targets against {} actual quantities",
            targets.len(),
            actual.len()
        )));
    }
    Ok(targets
        .iter()
        .zip(actual)
        .map(|(t, a)| (t - a).max(0.0))
        .fold(0.0, |acc, g| acc + g))
}
