//! Unit commitment and dispatch (UCD) for microgrids with thermal units,
//! aggregated distributed generation, demand response and carbon-emissions
//! trading, posed as optimal mode switching of a hybrid system.
//!
//! Each commitment vector selects a subsystem whose continuous dynamics are
//! the solution map of a strictly convex economic-dispatch QP. On top of that
//! the crate provides:
//!
//! - exact schedulers ([`oracle`]): exhaustive enumeration and, when ramp
//!   limits are relaxed, dynamic programming over the layered commitment graph;
//! - closed-loop hierarchical operation ([`clho`]): backward training of
//!   basis-function value approximations by least squares, followed by
//!   one-step greedy scheduling from any observed state without retraining;
//! - a simulation harness ([`simulate`]) with disturbance injection and
//!   oracle comparison.
//!
//! Periods are 1-based throughout: `t = 1..=T`, with `t = 0` denoting the
//! initial condition stored in the [`Scenario`].

pub mod clho;
pub mod cost;
pub mod dispatch;
pub mod hybrid;
pub mod oracle;
pub mod qp;
pub mod scenario;
pub mod simulate;


pub use cost::StageCost;
pub use dispatch::{DispatchError, QpProblem, QpSolution};
pub use hybrid::{Schedule, Trajectory};
pub use clho::{BasisSpec, TrainConfig, ValueModel};
pub use oracle::{OracleError, OracleSolution, ValueTable};

pub use simulate::{DisturbanceScript, RunReport};
pub use scenario::{
    CetParams, CommitmentVector, DispatchVector, PeriodExogenous, Scenario, ScenarioError,
    ThermalUnitParams, VirtualResourceParams,
};


/// Relative tolerance under which two candidate costs are treated as tied.
/// Ties are resolved towards the smaller mode index.
pub(crate) const TIE_TOLERANCE: f64 = 1e-9;

pub(crate) fn is_better(candidate: f64, incumbent: f64) -> bool {
    candidate < incumbent - TIE_TOLERANCE * incumbent.abs().max(1.0)
}
