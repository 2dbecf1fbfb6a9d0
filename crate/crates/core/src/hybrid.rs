//! The hybrid system under a fixed switching schedule.
//!
//! Running a schedule applies the mode dynamics period by period from the
//! scenario's initial state. The switching cost at `t` is charged on the
//! transition `I[t-1] -> I[t]`, with `I[0]` the initial commitment. Nothing
//! is charged for period 0.

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cost::{emission, running_cost, switching_cost, StageCost};
use crate::dispatch::{mode_dynamics, DispatchError};
use crate::scenario::{CommitmentVector, DispatchVector, Scenario, SystemState};

/// One commitment per period `t = 1..=T`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Schedule {
    pub modes: Vec<CommitmentVector>,
}

#[derive(Debug, Error)]
pub enum HybridError {
    #[error(transparent)]
    Dispatch(#[from] DispatchError),
    #[error("schedule has {found} periods, scenario horizon is {expected}")]
    Length { expected: usize, found: usize },
    #[error("schedule mode at period {t} has {found} units, expected {expected}")]
    Width { t: usize, expected: usize, found: usize },
    #[error("cannot parse schedule `{0}`")]
    Parse(String),
}

impl Schedule {
    pub fn new(modes: Vec<CommitmentVector>) -> Self {
        Self { modes }
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    /// Parses either a digit code (one decimal digit per period holding the
    /// mode index, for at most three units, e.g. `"122333"`) or bitstrings
    /// separated by `-`, `,` or whitespace (e.g. `"01-10-11"`).
    pub fn parse(text: &str, n_units: usize) -> Result<Self, HybridError> {
        let text = text.trim();
        let err = || HybridError::Parse(text.to_string());
        let separated = text.contains(['-', ',', ' ']);
        let modes = if !separated && n_units <= 3 {
            text.chars()
                .map(|ch| {
                    let d = ch.to_digit(10).ok_or_else(err)? as usize;
                    if d >= 1 << n_units {
                        return Err(err());
                    }
                    Ok(CommitmentVector::from_index(d, n_units))
                })
                .collect::<Result<Vec<_>, _>>()?
        } else {
            text.split(['-', ',', ' '])
                .filter(|p| !p.is_empty())
                .map(|p| {
                    CommitmentVector::parse_bits(p).filter(|c| c.len() == n_units).ok_or_else(err)
                })
                .collect::<Result<Vec<_>, _>>()?
        };
        if modes.is_empty() {
            return Err(err());
        }
        Ok(Self { modes })
    }
}

impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let digits = self.modes.first().is_some_and(|m| m.len() <= 3);
        if digits {
            for m in &self.modes {
                write!(f, "{}", m.index())?;
            }
            Ok(())
        } else {
            let parts: Vec<String> = self.modes.iter().map(|m| m.to_string()).collect();
            f.write_str(&parts.join("-"))
        }
    }
}

/// Per-period record of a run plus horizon totals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub steps: Vec<Step>,
    pub total_running: f64,
    pub total_switching: f64,
    /// Emission cost over the horizon, quota rebate included.
    pub emission_cost: f64,
    pub quota_rebate: f64,
    pub grand_total: f64,
    pub total_tons: f64,
}

/// One realized period.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub t: usize,
    pub commitment: CommitmentVector,
    pub dispatch: DispatchVector,
    pub stage: StageCost,
    pub emissions: Vec<f64>,
    pub cumulative_cost: f64,
}

impl Trajectory {
    /// Costs a sequence of realized states for periods `1..=states.len()`.
    pub fn from_states(s: &Scenario, states: &[SystemState]) -> Self {
        let mut steps = Vec::with_capacity(states.len());
        let mut prev = &s.initial_commitment;
        let mut cumulative = 0.0;
        for (k, st) in states.iter().enumerate() {
            let stage = StageCost {
                running: running_cost(s, &st.commitment, &st.dispatch),
                switching: switching_cost(s, prev, &st.commitment),
            };
            cumulative += stage.total();
            let emissions = s
                .units
                .iter()
                .enumerate()
                .map(|(n, u)| {
                    if st.commitment.is_on(n) {
                        emission(u, st.dispatch.thermal[n])
                    } else {
                        0.0
                    }
                })
                .collect();
            steps.push(Step {
                t: k + 1,
                commitment: st.commitment.clone(),
                dispatch: st.dispatch.clone(),
                stage,
                emissions,
                cumulative_cost: cumulative,
            });
            prev = &st.commitment;
        }
        let total_running = steps.iter().map(|st| st.stage.running).sum();
        let total_switching = steps.iter().map(|st| st.stage.switching).sum();
        let total_tons = steps.iter().flat_map(|st| st.emissions.iter()).sum::<f64>();
        let quota_rebate = s.quota_rebate();
        Self {
            steps,
            total_running,
            total_switching,
            emission_cost: total_tons * s.cet.price + quota_rebate,
            quota_rebate,
            grand_total: total_running + total_switching + quota_rebate,
            total_tons,
        }
    }

    pub fn schedule(&self) -> Schedule {
        Schedule::new(self.steps.iter().map(|s| s.commitment.clone()).collect())
    }

    /// Per-unit emissions summed over the horizon.
    pub fn unit_tons(&self) -> Vec<f64> {
        let n = self.steps.first().map_or(0, |s| s.emissions.len());
        (0..n).map(|k| self.steps.iter().map(|s| s.emissions[k]).sum()).collect()
    }

    /// Writes one CSV row per period:
    /// `t, I_1..I_N, P_1..P_N, P_DG, P_DR, Q, kappa, emissions_ton, cumulative_cost`.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let n = self.steps.first().map_or(0, |s| s.commitment.len());
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        header.extend((1..=n).map(|k| format!("I_{k}")));
        header.extend((1..=n).map(|k| format!("P_{k}")));
        header.extend(["P_DG", "P_DR", "Q", "kappa", "emissions_ton", "cumulative_cost"].map(String::from));
        w.write_record(&header)?;
        for st in &self.steps {
            let mut rec = vec![st.t.to_string()];
            rec.extend(st.commitment.bits().iter().map(|&b| u8::from(b).to_string()));
            rec.extend(st.dispatch.thermal.iter().map(|p| p.to_string()));
            rec.push(st.dispatch.dg.to_string());
            rec.push(st.dispatch.dr.to_string());
            rec.push(st.stage.running.to_string());
            rec.push(st.stage.switching.to_string());
            rec.push(st.emissions.iter().sum::<f64>().to_string());
            rec.push(st.cumulative_cost.to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Runs `sched` from the scenario's initial state.
pub fn run_schedule(s: &Scenario, sched: &Schedule) -> Result<Trajectory, HybridError> {
    if sched.len() != s.horizon() {
        return Err(HybridError::Length { expected: s.horizon(), found: sched.len() });
    }
    let mut prev = s.initial_state();
    let mut states = Vec::with_capacity(sched.len());
    for (k, mode) in sched.modes.iter().enumerate() {
        let t = k + 1;
        if mode.len() != s.n_units() {
            return Err(HybridError::Width { t, expected: s.n_units(), found: mode.len() });
        }
        let dispatch = mode_dynamics(s, t, mode, &prev)?;
        let state = SystemState::new(mode.clone(), dispatch);
        states.push(state.clone());
        prev = state;
    }
    Ok(Trajectory::from_states(s, &states))
}

/// Objective of the full problem: running and switching costs over the
/// horizon plus the one-off quota rebate.
pub fn total_cost(traj: &Trajectory) -> f64 {
    traj.steps.iter().map(|st| st.stage.total()).sum::<f64>() + traj.quota_rebate
}
