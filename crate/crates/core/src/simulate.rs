//! Closed-loop runs with scripted state overrides, and CLHO-vs-oracle tables.

use log::warn;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clho::{schedule_step, ClhoError, ValueModel};
use crate::dispatch::{DispatchError, Dynamics};
use crate::hybrid::{Schedule, Trajectory};
use crate::is_better;
use crate::oracle::{enumerate_all, optimal_tail, OracleError, DEFAULT_BUDGET};
use crate::scenario::{DispatchVector, Scenario};

/// Tail costs within this many dollars count as equal.
pub const TAIL_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Error)]
pub enum SimulateError {
    #[error("disturbance script: {0}")]
    Script(String),
    #[error(transparent)]
    Clho(#[from] ClhoError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Dispatch(#[from] DispatchError),
}

/// After the scheduler dispatches period `t`, the realized dispatch is
/// replaced by the override. The commitment is left as scheduled.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DisturbanceScript {
    pub overrides: Vec<(usize, DispatchVector)>,
}

impl DisturbanceScript {
    pub fn new(overrides: Vec<(usize, DispatchVector)>) -> Self {
        Self { overrides }
    }

    /// Parses `t=k:v1,v2,...`: thermal outputs, then DG and DR when the
    /// scenario has them.
    pub fn parse_entry(text: &str, s: &Scenario) -> Result<(usize, DispatchVector), SimulateError> {
        let bad = |m: &str| SimulateError::Script(format!("{text:?}: {m}"));
        let (head, values) = text.split_once(':').ok_or_else(|| bad("expected t=k:v1,v2,..."))?;
        let t = head
            .trim()
            .strip_prefix("t=")
            .and_then(|k| k.parse::<usize>().ok())
            .ok_or_else(|| bad("expected t=k before ':'"))?;
        let nums = values
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| bad(&e.to_string()))?;
        Ok((t, dispatch_from_values(&nums, s).map_err(|m| bad(&m))?))
    }

    pub fn check(&self, s: &Scenario) -> Result<(), SimulateError> {
        let mut last = 0;
        for (t, p) in &self.overrides {
            if *t <= last || *t > s.horizon() {
                return Err(SimulateError::Script(format!(
                    "periods must be strictly increasing within 1..={}, got {t}",
                    s.horizon()
                )));
            }
            if p.thermal.len() != s.n_units() {
                return Err(SimulateError::Script(format!(
                    "override at t={t} has {} thermal entries, expected {}",
                    p.thermal.len(),
                    s.n_units()
                )));
            }
            if p.coords().iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(SimulateError::Script(format!("override at t={t} must be finite and non-negative")));
            }
            last = *t;
        }
        Ok(())
    }
}

/// Builds a dispatch from `[P_1..P_N, (P_DG), (P_DR)]`, where the DG and DR
/// entries are present only if the scenario has those resources.
pub fn dispatch_from_values(values: &[f64], s: &Scenario) -> Result<DispatchVector, String> {
    let n = s.n_units();
    let expected = n + usize::from(s.has_dg()) + usize::from(s.has_dr());
    if values.len() != expected {
        return Err(format!("expected {expected} values, found {}", values.len()));
    }
    let mut rest = values[n..].iter();
    let dg = if s.has_dg() { *rest.next().unwrap() } else { 0.0 };
    let dr = if s.has_dr() { *rest.next().unwrap() } else { 0.0 };
    Ok(DispatchVector::new(values[..n].to_vec(), dg, dr))
}

/// Scheduled versus realized dispatch at a disturbance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Divergence {
    pub t: usize,
    pub planned: DispatchVector,
    pub realized: DispatchVector,
    pub max_abs_diff: f64,
}

/// Cost over `t+1..=T` after the disturbance at `t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailComparison {
    pub t: usize,
    pub realized_tail: f64,
    pub oracle_tail: Option<f64>,
    pub oracle_schedule: Option<String>,
    pub matches: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmissionsSummary {
    pub total_tons: f64,
    pub unit_tons: Vec<f64>,
    /// Priced emissions with the quota rebate applied.
    pub emission_cost: f64,
    pub quota_rebate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub fingerprint: String,
    pub schedule: String,
    pub total_cost: f64,
    pub trajectory: Trajectory,
    pub divergences: Vec<Divergence>,
    pub comparisons: Vec<TailComparison>,
    pub emissions: EmissionsSummary,
}

/// Runs the greedy scheduler from the initial state, applying the script.
pub fn simulate(s: &Scenario, m: &ValueModel, script: &DisturbanceScript) -> Result<RunReport, SimulateError> {
    script.check(s)?;
    let d = Dynamics::new(s)?;
    let mut state = s.initial_state();
    let mut realized = Vec::with_capacity(s.horizon());
    let mut divergences = Vec::new();
    let mut overrides = script.overrides.iter().peekable();
    for t in 1..=s.horizon() {
        let mut next = schedule_step(m, &d, t, &state)?;
        if let Some((_, p)) = overrides.next_if(|(k, _)| *k == t) {
            divergences.push(Divergence {
                t,
                planned: next.dispatch.clone(),
                realized: p.clone(),
                max_abs_diff: next.dispatch.max_abs_diff(p),
            });
            next.dispatch = p.clone();
        }
        realized.push(next.clone());
        state = next;
    }
    let trajectory = Trajectory::from_states(s, &realized);

    let mut comparisons = Vec::new();
    for div in &divergences {
        let realized_tail: f64 = trajectory.steps[div.t..].iter().map(|st| st.stage.total()).sum();
        let from = &realized[div.t - 1];
        let mut row = TailComparison { t: div.t, realized_tail, oracle_tail: None, oracle_schedule: None, matches: None };
        match optimal_tail(s, div.t + 1, from, DEFAULT_BUDGET) {
            Ok(Some((cost, modes))) => {
                row.oracle_tail = Some(cost);
                row.oracle_schedule = Some(modes.iter().map(|c| c.to_string()).collect::<Vec<_>>().join("-"));
                row.matches = Some((cost - realized_tail).abs() <= TAIL_TOLERANCE);
            }
            Ok(None) => row.matches = Some(false),
            Err(OracleError::BudgetExceeded { needed, .. }) => {
                warn!("t={}: oracle tail skipped, {needed:.3e} schedules exceed the budget", div.t);
            }
            Err(e) => return Err(e.into()),
        }
        comparisons.push(row);
    }

    Ok(RunReport {
        fingerprint: s.fingerprint(),
        schedule: trajectory.schedule().to_string(),
        total_cost: trajectory.grand_total,
        emissions: EmissionsSummary {
            total_tons: trajectory.total_tons,
            unit_tons: trajectory.unit_tons(),
            emission_cost: trajectory.emission_cost,
            quota_rebate: trajectory.quota_rebate,
        },
        trajectory,
        divergences,
        comparisons,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub schedule: String,
    pub cost: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    /// Every feasible schedule with its cost; empty when over budget.
    pub rows: Vec<ComparisonRow>,
    pub oracle_schedule: Option<String>,
    pub oracle_cost: Option<f64>,
    pub clho_schedule: String,
    pub clho_cost: f64,
    pub matches: Option<bool>,
}

pub fn compare_with_oracle(s: &Scenario, m: &ValueModel) -> Result<Comparison, SimulateError> {
    let clho = simulate(s, m, &DisturbanceScript::default())?;
    let mut out = Comparison {
        rows: Vec::new(),
        oracle_schedule: None,
        oracle_cost: None,
        clho_schedule: clho.schedule.clone(),
        clho_cost: clho.total_cost,
        matches: None,
    };
    match enumerate_all(s, DEFAULT_BUDGET) {
        Ok(all) => {
            let mut best: Option<&(Schedule, f64)> = None;
            for row in &all {
                if best.is_none_or(|(_, b)| is_better(row.1, *b)) {
                    best = Some(row);
                }
            }
            if let Some((sched, cost)) = best {
                out.oracle_schedule = Some(sched.to_string());
                out.oracle_cost = Some(*cost);
                out.matches = Some(sched.to_string() == clho.schedule);
            }
            out.rows = all.into_iter().map(|(sched, cost)| ComparisonRow { schedule: sched.to_string(), cost }).collect();
        }
        Err(OracleError::BudgetExceeded { needed, .. }) => {
            warn!("enumeration needs {needed:.3e} schedules; reporting the CLHO run only");
        }
        Err(e) => return Err(e.into()),
    }
    Ok(out)
}
