//! Lower-level economic dispatch for a fixed commitment.
//!
//! For commitment `I` at period `t` the dispatch is the unique minimizer of
//! the running cost subject to power balance, spinning reserves, unit
//! capacities, ramp limits (units committed at both `t-1` and `t`, only when
//! the scenario enforces ramping), the DG cap, the linearized penetration
//! limit and the DR cap. Uncommitted units are removed from the problem and
//! pinned at zero. The solution map is the mode dynamics `f_I`.

use thiserror::Error;

use crate::cost::running_cost;
use crate::qp::{self, DenseQp, LinearRow, QpError, QpStatus};
use crate::scenario::{CommitmentVector, DispatchVector, Scenario, SystemState};

/// Dispatch coordinate carried by a free QP variable.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Coordinate {
    Thermal(usize),
    Dg,
    Dr,
}

/// Origin of an inequality row.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RowKind {
    ReserveLower,
    ReserveUpper,
    UnitMin(usize),
    UnitMax(usize),
    RampUp(usize),
    RampDown(usize),
    DgMin,
    DgMax,
    Penetration,
    DrMin,
    DrMax,
}

/// Assembled dispatch QP for one period and commitment.
#[derive(Clone, Debug)]
pub struct QpProblem {
    pub t: usize,
    pub commitment: CommitmentVector,
    pub variables: Vec<Coordinate>,
    /// One entry per row of `dense.inequalities`.
    pub row_kinds: Vec<RowKind>,
    pub dense: DenseQp,
}

pub use crate::qp::QpStatus as SolveStatus;

#[derive(Clone, Debug, PartialEq)]
pub struct QpSolution {
    pub dispatch: DispatchVector,
    /// Multiplier of the balance row.
    pub lambda: f64,
    /// One multiplier per inequality row, all non-negative.
    pub mu: Vec<f64>,
    pub objective_value: f64,
    pub status: SolveStatus,
}

impl QpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == QpStatus::Optimal
    }
}

#[derive(Debug, Error)]
pub enum DispatchError {
    #[error("commitment {commitment} is infeasible at period {t}")]
    Infeasible { t: usize, commitment: CommitmentVector },
    #[error("numerical failure at period {t} for commitment {commitment}: {source}")]
    Numerical {
        t: usize,
        commitment: CommitmentVector,
        #[source]
        source: QpError,
    },
}

impl QpProblem {
    pub fn n_units(&self) -> usize {
        self.commitment.len()
    }

    fn to_dispatch(&self, x: &[f64]) -> DispatchVector {
        let mut p = DispatchVector::zeros(self.n_units());
        for (v, coord) in x.iter().zip(&self.variables) {
            match coord {
                Coordinate::Thermal(n) => p.thermal[*n] = *v,
                Coordinate::Dg => p.dg = *v,
                Coordinate::Dr => p.dr = *v,
            }
        }
        p
    }

    fn to_vars(&self, p: &DispatchVector) -> Vec<f64> {
        self.variables
            .iter()
            .map(|coord| match coord {
                Coordinate::Thermal(n) => p.thermal[*n],
                Coordinate::Dg => p.dg,
                Coordinate::Dr => p.dr,
            })
            .collect()
    }

    pub fn rows_of(&self, kind: RowKind) -> impl Iterator<Item = usize> + '_ {
        self.row_kinds.iter().enumerate().filter(move |(_, k)| **k == kind).map(|(i, _)| i)
    }
}

/// Builds the dispatch QP for period `t` (1-based) under commitment
/// `commitment`, given the state realized at `t - 1`.
pub fn assemble(s: &Scenario, t: usize, commitment: &CommitmentVector, prev: &SystemState) -> QpProblem {
    let period = s.period(t);
    let price = s.cet.price;
    let mut variables: Vec<Coordinate> = commitment.committed().map(Coordinate::Thermal).collect();
    variables.push(Coordinate::Dg);
    variables.push(Coordinate::Dr);
    let dim = variables.len();
    let dg_var = dim - 2;
    let dr_var = dim - 1;

    let mut hessian_diag = Vec::with_capacity(dim);
    let mut linear = Vec::with_capacity(dim);
    let mut constant = 0.0;
    for n in commitment.committed() {
        let u = &s.units[n];
        hessian_diag.push(2.0 * (u.a + price * u.alpha));
        linear.push(u.b + price * u.beta);
        constant += u.c + price * u.gamma;
    }
    for v in [&s.dg, &s.dr] {
        hessian_diag.push(2.0 * v.a);
        linear.push(v.b);
        constant += v.c;
    }

    let unit_vec = |j: usize, sign: f64| {
        let mut row = vec![0.0; dim];
        row[j] = sign;
        row
    };
    let mut rows: Vec<(RowKind, LinearRow)> = Vec::new();
    let committed_min: f64 = commitment.committed().map(|n| s.units[n].p_min).sum();
    let committed_max: f64 = commitment.committed().map(|n| s.units[n].p_max).sum();

    let mut virtual_sum = vec![0.0; dim];
    virtual_sum[dg_var] = 1.0;
    virtual_sum[dr_var] = 1.0;
    rows.push((
        RowKind::ReserveLower,
        LinearRow::new(virtual_sum.clone(), period.demand - period.reserve_lo - committed_min),
    ));
    rows.push((
        RowKind::ReserveUpper,
        LinearRow::new(
            virtual_sum.iter().map(|v| -v).collect(),
            committed_max - period.demand - period.reserve_hi,
        ),
    ));

    for (j, n) in commitment.committed().enumerate() {
        let u = &s.units[n];
        rows.push((RowKind::UnitMin(n), LinearRow::new(unit_vec(j, -1.0), -u.p_min)));
        rows.push((RowKind::UnitMax(n), LinearRow::new(unit_vec(j, 1.0), u.p_max)));
        if s.ramp_enforced && prev.commitment.is_on(n) {
            let last = prev.dispatch.thermal[n];
            if let Some(up) = u.ramp_up {
                rows.push((RowKind::RampUp(n), LinearRow::new(unit_vec(j, 1.0), last + up)));
            }
            if let Some(down) = u.ramp_down {
                rows.push((RowKind::RampDown(n), LinearRow::new(unit_vec(j, -1.0), down - last)));
            }
        }
    }

    rows.push((RowKind::DgMin, LinearRow::new(unit_vec(dg_var, -1.0), 0.0)));
    rows.push((RowKind::DgMax, LinearRow::new(unit_vec(dg_var, 1.0), period.dg_max)));
    let mut penetration = vec![-s.eta_max; dim];
    penetration[dg_var] = 1.0 - s.eta_max;
    penetration[dr_var] = 0.0;
    rows.push((RowKind::Penetration, LinearRow::new(penetration, 0.0)));
    rows.push((RowKind::DrMin, LinearRow::new(unit_vec(dr_var, -1.0), 0.0)));
    rows.push((RowKind::DrMax, LinearRow::new(unit_vec(dr_var, 1.0), period.dr_max)));

    let balance = vec![1.0; dim];
    let (row_kinds, inequalities) = rows.into_iter().unzip();
    QpProblem {
        t,
        commitment: commitment.clone(),
        variables,
        row_kinds,
        dense: DenseQp {
            hessian_diag,
            linear,
            constant,
            equalities: vec![LinearRow::new(balance, period.demand)],
            inequalities,
        },
    }
}

pub fn solve(q: &QpProblem) -> Result<QpSolution, DispatchError> {
    let result = q.dense.solve().map_err(|source| DispatchError::Numerical {
        t: q.t,
        commitment: q.commitment.clone(),
        source,
    })?;
    Ok(QpSolution {
        dispatch: q.to_dispatch(&result.x),
        lambda: result.eq_multipliers[0],
        mu: result.ineq_multipliers,
        objective_value: result.objective,
        status: result.status,
    })
}

pub fn kkt_residual(q: &QpProblem, sol: &QpSolution) -> f64 {
    qp::kkt_residual(&q.dense, &q.to_vars(&sol.dispatch), &[sol.lambda], &sol.mu)
}

/// `f_I`: the optimal dispatch at period `t` under `commitment`.
pub fn mode_dynamics(
    s: &Scenario,
    t: usize,
    commitment: &CommitmentVector,
    prev: &SystemState,
) -> Result<DispatchVector, DispatchError> {
    let sol = solve(&assemble(s, t, commitment, prev))?;
    if sol.is_optimal() {
        Ok(sol.dispatch)
    } else {
        Err(DispatchError::Infeasible { t, commitment: commitment.clone() })
    }
}

fn is_feasible(q: &QpProblem) -> Result<bool, DispatchError> {
    q.dense.is_feasible().map_err(|source| DispatchError::Numerical {
        t: q.t,
        commitment: q.commitment.clone(),
        source,
    })
}

/// Commitments whose dispatch QP at `t` is feasible from `prev`, in index order.
pub fn feasible_modes(
    s: &Scenario,
    t: usize,
    prev: &SystemState,
) -> Result<Vec<CommitmentVector>, DispatchError> {
    let mut out = Vec::new();
    for c in CommitmentVector::enumerate(s.n_units()) {
        if is_feasible(&assemble(s, t, &c, prev))? {
            out.push(c);
        }
    }
    Ok(out)
}

/// Feasible commitments at `t` with ramp rows dropped. A superset of
/// [`feasible_modes`] from any previous state.
pub fn candidate_modes(s: &Scenario, t: usize) -> Result<Vec<CommitmentVector>, DispatchError> {
    let n = s.n_units();
    let idle = SystemState::new(CommitmentVector::all_off(n), DispatchVector::zeros(n));
    feasible_modes(s, t, &idle)
}

/// Outcome of running one mode for one period.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeOutcome {
    pub commitment: CommitmentVector,
    pub dispatch: DispatchVector,
    pub running: f64,
}

/// Mode dynamics with the per-period candidate sets precomputed.
///
/// When ramp limits are not enforced, `f_I` does not depend on the previous
/// state, so every outcome is tabulated once per `(t, I)`.
#[derive(Clone, Debug)]
pub struct Dynamics<'a> {
    scenario: &'a Scenario,
    candidates: Vec<Vec<CommitmentVector>>,
    table: Option<Vec<Vec<ModeOutcome>>>,
}

impl<'a> Dynamics<'a> {
    pub fn new(scenario: &'a Scenario) -> Result<Self, DispatchError> {
        let n = scenario.n_units();
        let idle = SystemState::new(CommitmentVector::all_off(n), DispatchVector::zeros(n));
        let mut candidates = Vec::with_capacity(scenario.horizon());
        let mut table = Vec::with_capacity(scenario.horizon());
        for t in 1..=scenario.horizon() {
            let mut modes = Vec::new();
            let mut outcomes = Vec::new();
            for c in CommitmentVector::enumerate(n) {
                let q = assemble(scenario, t, &c, &idle);
                if !is_feasible(&q)? {
                    continue;
                }
                if !scenario.ramp_enforced {
                    let dispatch = mode_dynamics(scenario, t, &c, &idle)?;
                    let running = running_cost(scenario, &c, &dispatch);
                    outcomes.push(ModeOutcome { commitment: c.clone(), dispatch, running });
                }
                modes.push(c);
            }
            candidates.push(modes);
            table.push(outcomes);
        }
        let table = (!scenario.ramp_enforced).then_some(table);
        Ok(Self { scenario, candidates, table })
    }

    pub fn scenario(&self) -> &'a Scenario {
        self.scenario
    }

    /// Modes feasible at `t` ignoring ramp rows.
    pub fn candidates(&self, t: usize) -> &[CommitmentVector] {
        &self.candidates[t - 1]
    }

    /// Runs `commitment` at `t` from `prev`; `None` when the mode is infeasible.
    pub fn step(
        &self,
        t: usize,
        commitment: &CommitmentVector,
        prev: &SystemState,
    ) -> Result<Option<ModeOutcome>, DispatchError> {
        if let Some(table) = &self.table {
            return Ok(table[t - 1].iter().find(|o| &o.commitment == commitment).cloned());
        }
        match mode_dynamics(self.scenario, t, commitment, prev) {
            Ok(dispatch) => {
                let running = running_cost(self.scenario, commitment, &dispatch);
                Ok(Some(ModeOutcome { commitment: commitment.clone(), dispatch, running }))
            }
            Err(DispatchError::Infeasible { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    }

    /// Every candidate at `t` that is feasible from `prev`, with its outcome.
    pub fn outcomes(&self, t: usize, prev: &SystemState) -> Result<Vec<ModeOutcome>, DispatchError> {
        if let Some(table) = &self.table {
            return Ok(table[t - 1].clone());
        }
        let mut out = Vec::new();
        for c in self.candidates(t) {
            if let Some(o) = self.step(t, c, prev)? {
                out.push(o);
            }
        }
        Ok(out)
    }
}
