//! Cost expressions: fuel, emissions, virtual units, the per-period running
//! cost `Q` and the closed-form switching cost `kappa`.
//!
//! Emissions are priced inside `Q` as `p_e * E_n(P_n) * I_n`. The quota rebate
//! `-sum_n Q_n * p_e` does not depend on any decision and is applied once per
//! horizon by [`crate::hybrid`].

use serde::{Deserialize, Serialize};

use crate::hybrid::Trajectory;
use crate::scenario::{CommitmentVector, DispatchVector, Scenario, ThermalUnitParams};

/// Running and switching cost charged at one period.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StageCost {
    pub running: f64,
    pub switching: f64,
}

impl StageCost {
    pub fn total(&self) -> f64 {
        self.running + self.switching
    }
}

pub fn fuel_cost(u: &ThermalUnitParams, p: f64) -> f64 {
    u.a * p * p + u.b * p + u.c
}

/// Emission in tons over one period at output `p`.
pub fn emission(u: &ThermalUnitParams, p: f64) -> f64 {
    u.alpha * p * p + u.beta * p + u.gamma
}

/// `Q(P, I)`: fuel and priced emissions of committed units plus the DG and DR
/// cost curves. Outputs of uncommitted units are ignored.
pub fn running_cost(s: &Scenario, commitment: &CommitmentVector, p: &DispatchVector) -> f64 {
    let price = s.cet.price;
    let thermal: f64 = commitment
        .committed()
        .map(|n| {
            let u = &s.units[n];
            let pn = p.thermal[n];
            fuel_cost(u, pn) + price * emission(u, pn)
        })
        .sum();
    thermal + s.dg.cost(p.dg) + s.dr.cost(p.dr)
}

/// Per-unit switching cost
/// `C_b + (C_f - C_b + C_D) * I_prev - (C_f + C_D) * I_prev * I`.
pub fn unit_switching_cost(u: &ThermalUnitParams, was_on: bool, is_on: bool) -> f64 {
    let prev = f64::from(u8::from(was_on));
    let now = f64::from(u8::from(is_on));
    u.c_bank + (u.c_fix - u.c_bank + u.c_shut) * prev - (u.c_fix + u.c_shut) * prev * now
}

/// `kappa(I_prev, I)`, summed over units.
pub fn switching_cost(s: &Scenario, prev: &CommitmentVector, next: &CommitmentVector) -> f64 {
    s.units
        .iter()
        .enumerate()
        .map(|(n, u)| unit_switching_cost(u, prev.is_on(n), next.is_on(n)))
        .sum()
}

/// Banking-mode start-up cost after `tau` offline periods: `C_b * tau + C_f`.
pub fn startup_cost_reference(u: &ThermalUnitParams, tau: u32) -> f64 {
    u.c_bank * f64::from(tau) + u.c_fix
}

/// Horizon emission cost including the quota rebate; negative when the
/// allowance exceeds what was emitted.
pub fn horizon_emission_cost(s: &Scenario, traj: &Trajectory) -> f64 {
    s.units
        .iter()
        .enumerate()
        .map(|(n, u)| {
            let emitted: f64 = traj
                .steps
                .iter()
                .filter(|step| step.commitment.is_on(n))
                .map(|step| emission(u, step.dispatch.thermal[n]))
                .sum();
            (emitted - u.quota) * s.cet.price
        })
        .sum()
}
