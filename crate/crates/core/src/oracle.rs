//! Exact schedulers for desk-scale instances.
//!
//! [`enumerate_optimal`] visits every feasible schedule and carries the
//! continuous state exactly, so it is correct with or without ramp limits.
//! [`graph_dp_optimal`] is backward dynamic programming over the layered
//! commitment graph; it is only valid when ramp limits are relaxed, because
//! then each arc cost depends on `(t, I_prev, I)` alone.
//!
//! The state entering period `t` is the pair realized at `t - 1`; the stage
//! cost of decision `I` is `Q(f_I(P_prev), I) + kappa(I_prev, I)`. Ties are
//! broken towards the lexicographically smallest mode sequence.

use rayon::prelude::*;
use thiserror::Error;

use crate::cost::switching_cost;
use crate::dispatch::{DispatchError, Dynamics};
use crate::hybrid::{run_schedule, HybridError, Schedule, Trajectory};
use crate::is_better;
use crate::scenario::{CommitmentVector, DispatchVector, Scenario, SystemState};

/// Default cap on the number of complete schedules an enumeration may visit.
pub const DEFAULT_BUDGET: f64 = 1e7;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("enumeration needs up to {needed:.3e} schedule evaluations, budget is {budget:.3e}")]
    BudgetExceeded { needed: f64, budget: f64 },
    #[error("no feasible schedule exists")]
    NoFeasibleSchedule,
    #[error("graph dynamic programming requires ramp limits to be relaxed")]
    RampEnforced,
    #[error(transparent)]
    Dispatch(#[from] DispatchError),
    #[error(transparent)]
    Hybrid(#[from] HybridError),
}

#[derive(Clone, Debug)]
pub struct OracleSolution {
    pub schedule: Schedule,
    /// Horizon objective including the quota rebate.
    pub cost: f64,
    pub trajectory: Trajectory,
}

/// Exact cost-to-go at one sampled state.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueEntry {
    pub t: usize,
    pub prev: SystemState,
    /// Minimal running plus switching cost over `t..=T`; infinite when no
    /// feasible continuation exists.
    pub value: f64,
    pub first_mode: Option<CommitmentVector>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValueTable {
    pub entries: Vec<ValueEntry>,
}

impl ValueTable {
    pub fn get(&self, t: usize, prev: &SystemState) -> Option<&ValueEntry> {
        self.entries.iter().find(|e| e.t == t && &e.prev == prev)
    }
}

fn search_size(d: &Dynamics<'_>, from_t: usize) -> f64 {
    let horizon = d.scenario().horizon();
    (from_t..=horizon).map(|t| d.candidates(t).len() as f64).product()
}

fn check_budget(d: &Dynamics<'_>, from_t: usize, budget: f64) -> Result<(), OracleError> {
    let needed = search_size(d, from_t);
    if needed > budget {
        Err(OracleError::BudgetExceeded { needed, budget })
    } else {
        Ok(())
    }
}

/// Depth-first walk over every feasible continuation from `(t, prev)`,
/// visiting modes in increasing index order.
fn walk(
    d: &Dynamics<'_>,
    t: usize,
    prev: &SystemState,
    acc: f64,
    path: &mut Vec<CommitmentVector>,
    visit: &mut dyn FnMut(&[CommitmentVector], f64),
) -> Result<(), DispatchError> {
    let s = d.scenario();
    if t > s.horizon() {
        visit(path, acc);
        return Ok(());
    }
    for mode in d.candidates(t) {
        let Some(outcome) = d.step(t, mode, prev)? else {
            continue;
        };
        let stage = outcome.running + switching_cost(s, &prev.commitment, mode);
        let next = SystemState::new(outcome.commitment, outcome.dispatch);
        path.push(mode.clone());
        walk(d, t + 1, &next, acc + stage, path, visit)?;
        path.pop();
    }
    Ok(())
}

/// Best continuation from `(t, prev)` found by exhaustive search.
fn best_from(
    d: &Dynamics<'_>,
    t: usize,
    prev: &SystemState,
) -> Result<Option<(f64, Vec<CommitmentVector>)>, DispatchError> {
    let s = d.scenario();
    if t > s.horizon() {
        return Ok(Some((0.0, Vec::new())));
    }
    // Split on the first decision; each branch is searched independently and
    // the branches are merged in index order.
    let branches: Vec<Result<Option<(f64, Vec<CommitmentVector>)>, DispatchError>> = d
        .candidates(t)
        .par_iter()
        .map(|mode| {
            let Some(outcome) = d.step(t, mode, prev)? else {
                return Ok(None);
            };
            let stage = outcome.running + switching_cost(s, &prev.commitment, mode);
            let next = SystemState::new(outcome.commitment, outcome.dispatch);
            let mut best: Option<(f64, Vec<CommitmentVector>)> = None;
            let mut path = vec![mode.clone()];
            walk(d, t + 1, &next, stage, &mut path, &mut |p, cost| {
                if best.as_ref().is_none_or(|(b, _)| is_better(cost, *b)) {
                    best = Some((cost, p.to_vec()));
                }
            })?;
            Ok(best)
        })
        .collect();
    let mut best: Option<(f64, Vec<CommitmentVector>)> = None;
    for branch in branches {
        if let Some((cost, path)) = branch? {
            if best.as_ref().is_none_or(|(b, _)| is_better(cost, *b)) {
                best = Some((cost, path));
            }
        }
    }
    Ok(best)
}

/// Exhaustive search over all feasible schedules.
pub fn enumerate_optimal(s: &Scenario, budget: f64) -> Result<OracleSolution, OracleError> {
    let d = Dynamics::new(s)?;
    check_budget(&d, 1, budget)?;
    let (_, modes) = best_from(&d, 1, &s.initial_state())?.ok_or(OracleError::NoFeasibleSchedule)?;
    finish(s, Schedule::new(modes))
}

/// Every feasible schedule with its horizon objective, in lexicographic order.
pub fn enumerate_all(s: &Scenario, budget: f64) -> Result<Vec<(Schedule, f64)>, OracleError> {
    let d = Dynamics::new(s)?;
    check_budget(&d, 1, budget)?;
    let rebate = s.quota_rebate();
    let mut out = Vec::new();
    walk(&d, 1, &s.initial_state(), 0.0, &mut Vec::new(), &mut |p, cost| {
        out.push((Schedule::new(p.to_vec()), cost + rebate));
    })?;
    Ok(out)
}

fn finish(s: &Scenario, schedule: Schedule) -> Result<OracleSolution, OracleError> {
    let trajectory = run_schedule(s, &schedule)?;
    Ok(OracleSolution { cost: trajectory.grand_total, schedule, trajectory })
}

/// Shortest path through the layered commitment graph (ramp limits relaxed).
pub fn graph_dp_optimal(s: &Scenario) -> Result<OracleSolution, OracleError> {
    if s.ramp_enforced {
        return Err(OracleError::RampEnforced);
    }
    let d = Dynamics::new(s)?;
    let horizon = s.horizon();
    let width = 1usize << s.n_units();
    let idle = SystemState::new(CommitmentVector::all_off(s.n_units()), DispatchVector::zeros(s.n_units()));

    // value[t][p]: optimal cost over t..=T entering t with commitment index p
    let mut value = vec![vec![f64::INFINITY; width]; horizon + 2];
    let mut choice = vec![vec![None::<usize>; width]; horizon + 2];
    value[horizon + 1].iter_mut().for_each(|v| *v = 0.0);
    for t in (1..=horizon).rev() {
        let arcs = d.outcomes(t, &idle)?;
        let (head, tail) = value.split_at_mut(t + 1);
        let next = &tail[0];
        for (p, slot) in head[t].iter_mut().enumerate() {
            let prev = CommitmentVector::from_index(p, s.n_units());
            for arc in &arcs {
                let to = arc.commitment.index();
                if !next[to].is_finite() {
                    continue;
                }
                let cost = arc.running + switching_cost(s, &prev, &arc.commitment) + next[to];
                if !slot.is_finite() || is_better(cost, *slot) {
                    *slot = cost;
                    choice[t][p] = Some(to);
                }
            }
        }
    }

    let mut modes = Vec::with_capacity(horizon);
    let mut at = s.initial_commitment.index();
    for t in 1..=horizon {
        let to = choice[t][at].ok_or(OracleError::NoFeasibleSchedule)?;
        modes.push(CommitmentVector::from_index(to, s.n_units()));
        at = to;
    }
    finish(s, Schedule::new(modes))
}

/// Exact optimal continuation from `(t, prev)`: the cost over `t..=T` and the
/// mode sequence attaining it. `None` when no feasible continuation exists.
pub fn optimal_tail(
    s: &Scenario,
    t: usize,
    prev: &SystemState,
    budget: f64,
) -> Result<Option<(f64, Vec<CommitmentVector>)>, OracleError> {
    let d = Dynamics::new(s)?;
    check_budget(&d, t, budget)?;
    Ok(best_from(&d, t, prev)?)
}

/// Exact cost-to-go at each `(t, prev)` sample.
pub fn exact_value_table(
    s: &Scenario,
    samples: &[(usize, SystemState)],
    budget: f64,
) -> Result<ValueTable, OracleError> {
    let d = Dynamics::new(s)?;
    for (t, _) in samples {
        check_budget(&d, *t, budget)?;
    }
    let entries = samples
        .par_iter()
        .map(|(t, prev)| {
            let best = best_from(&d, *t, prev)?;
            Ok(ValueEntry {
                t: *t,
                prev: prev.clone(),
                value: best.as_ref().map_or(f64::INFINITY, |(v, _)| *v),
                first_mode: best.and_then(|(_, modes)| modes.into_iter().next()),
            })
        })
        .collect::<Result<Vec<_>, DispatchError>>()?;
    Ok(ValueTable { entries })
}
