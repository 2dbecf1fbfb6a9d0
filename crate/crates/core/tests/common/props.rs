//! Randomized invariant checks. Each suite is a strategy plus a check
//! function, so the same code runs under `proptest!` and from the acceptance
//! report.

use std::sync::OnceLock;

use proptest::prelude::*;
use proptest::test_runner::{Config, RngSeed, TestCaseError, TestRunner};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ucd_core::cost::{running_cost, startup_cost_reference, switching_cost, unit_switching_cost};
use ucd_core::dispatch::{self, assemble, candidate_modes, mode_dynamics, DispatchError};
use ucd_core::hybrid::{run_schedule, total_cost, Schedule};
use ucd_core::oracle::{enumerate_optimal, exact_value_table, graph_dp_optimal, OracleError, DEFAULT_BUDGET};
use ucd_core::scenario::{
    CommitmentVector, DispatchVector, PeriodExogenous, Scenario, SystemState, ThermalUnitParams,
};

use super::{constraint_violation, reference_running, scenario};

pub const TRIALS: u32 = 1000;

pub fn config() -> Config {
    Config {
        cases: TRIALS,
        rng_seed: RngSeed::Fixed(0x00c0_ffee),
        failure_persistence: None,
        max_global_rejects: 20 * TRIALS,
        ..Config::default()
    }
}

fn example1() -> &'static Scenario {
    static S: OnceLock<Scenario> = OnceLock::new();
    S.get_or_init(|| scenario("example1_case1.ucd"))
}

fn example1_case4() -> &'static Scenario {
    static S: OnceLock<Scenario> = OnceLock::new();
    S.get_or_init(|| scenario("example1_case4.ucd"))
}

fn example2() -> &'static Scenario {
    static S: OnceLock<Scenario> = OnceLock::new();
    S.get_or_init(|| scenario("example2_case1.ucd"))
}

fn example2_modes() -> &'static Vec<Vec<CommitmentVector>> {
    static M: OnceLock<Vec<Vec<CommitmentVector>>> = OnceLock::new();
    M.get_or_init(|| {
        let s = example2();
        (1..=s.horizon()).map(|t| candidate_modes(s, t).unwrap()).collect()
    })
}

fn mask_commitment(mask: u32, n: usize) -> CommitmentVector {
    CommitmentVector::new((0..n).map(|k| mask & (1 << k) != 0).collect())
}

fn fail(msg: String) -> TestCaseError {
    TestCaseError::fail(msg)
}

/// Truth table of the switching charge, written out per case.
pub fn kappa_reference(s: &Scenario, prev: &CommitmentVector, next: &CommitmentVector) -> f64 {
    s.units
        .iter()
        .enumerate()
        .map(|(n, u)| match (prev.is_on(n), next.is_on(n)) {
            (false, _) => u.c_bank,
            (true, true) => 0.0,
            (true, false) => u.c_fix + u.c_shut,
        })
        .sum()
}

// ---------------------------------------------------------------- dispatch

#[derive(Clone, Debug)]
pub struct DispatchCase {
    pub s: Scenario,
    pub on: CommitmentVector,
    pub seed: u64,
}

/// One-period instances over random subsets of the Example-2 units with
/// demand inside the committed capacity envelope.
pub fn dispatch_case() -> impl Strategy<Value = DispatchCase> {
    (1u32..32, 0.1f64..0.9, 0.0f64..100.0, 0.0f64..40.0, any::<bool>(), 0.0f64..10.0, any::<u64>()).prop_map(
        |(mask, frac, dg_max, dr_max, reserve, price, seed)| {
            let mut s = example2().clone();
            let on = mask_commitment(mask, s.n_units());
            let lo: f64 = on.committed().map(|n| s.units[n].p_min).sum();
            let hi: f64 = on.committed().map(|n| s.units[n].p_max).sum();
            let demand = lo + frac * (hi - lo);
            let r = if reserve { 0.05 * demand } else { 0.0 };
            s.periods = vec![PeriodExogenous { demand, dg_max, dr_max, reserve_lo: r, reserve_hi: r }];
            s.cet.price = price;
            s.ramp_enforced = false;
            DispatchCase { s, on, seed }
        },
    )
}

/// Random feasible point: DG and DR drawn in their boxes, thermal outputs
/// water-filled along a random direction to close the balance, then kept only
/// if every other row holds.
fn random_feasible_point(s: &Scenario, on: &CommitmentVector, rng: &mut ChaCha8Rng) -> Option<DispatchVector> {
    let per = s.period(1);
    let dg = if per.dg_max > 0.0 { rng.random_range(0.0..=per.dg_max) } else { 0.0 };
    let dr = if per.dr_max > 0.0 { rng.random_range(0.0..=per.dr_max) } else { 0.0 };
    let target = per.demand - dg - dr;
    let w: Vec<f64> = (0..s.n_units()).map(|_| rng.random_range(0.05..1.0)).collect();
    let fill = |k: f64| -> Vec<f64> {
        (0..s.n_units())
            .map(|n| {
                if on.is_on(n) {
                    let u = &s.units[n];
                    (u.p_min + k * w[n] * (u.p_max - u.p_min)).clamp(u.p_min, u.p_max)
                } else {
                    0.0
                }
            })
            .collect()
    };
    let (mut lo, mut hi) = (0.0, 20.0);
    if fill(lo).iter().sum::<f64>() > target || fill(hi).iter().sum::<f64>() < target {
        return None;
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if fill(mid).iter().sum::<f64>() < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let p = DispatchVector::new(fill(0.5 * (lo + hi)), dg, dr);
    (constraint_violation(s, 1, on, &p) <= 1e-7).then_some(p)
}

/// KKT residual, sign of multipliers, balance and penetration bounds, and
/// dominance over random feasible points.
pub fn check_dispatch(c: &DispatchCase) -> Result<(), TestCaseError> {
    let s = &c.s;
    let q = assemble(s, 1, &c.on, &s.initial_state());
    let sol = dispatch::solve(&q).map_err(|e| fail(e.to_string()))?;
    prop_assume!(sol.is_optimal());
    let kkt = dispatch::kkt_residual(&q, &sol);
    prop_assert!(kkt <= 1e-8, "KKT residual {kkt}");
    prop_assert!(sol.mu.iter().all(|&m| m >= 0.0));
    let p = &sol.dispatch;
    let per = s.period(1);
    let thermal: f64 = p.thermal.iter().sum();
    let balance = (thermal + p.dg + p.dr - per.demand).abs();
    prop_assert!(balance <= 1e-6 * per.demand.max(1.0), "balance residual {balance}");
    if p.dg > 0.0 {
        prop_assert!(p.dg / (thermal + p.dg) <= s.eta_max + 1e-9, "penetration {}", p.dg / (thermal + p.dg));
    }
    prop_assert!(constraint_violation(s, 1, &c.on, p) <= 1e-7);
    let best = reference_running(s, &c.on, p);
    prop_assert!((best - sol.objective_value).abs() <= 1e-6 * best.abs().max(1.0));
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
    let mut found = 0;
    for _ in 0..400 {
        if found == 100 {
            break;
        }
        if let Some(x) = random_feasible_point(s, &c.on, &mut rng) {
            found += 1;
            let v = reference_running(s, &c.on, &x);
            prop_assert!(best <= v + 1e-6, "feasible point {x:?} costs {v} < optimum {best}");
        }
    }
    Ok(())
}

/// Solving with the inequality rows in a shuffled order gives the same point.
pub fn check_permutation(c: &DispatchCase) -> Result<(), TestCaseError> {
    let q = assemble(&c.s, 1, &c.on, &c.s.initial_state());
    let base = q.dense.solve().map_err(|e| fail(e.to_string()))?;
    prop_assume!(base.status == ucd_core::qp::QpStatus::Optimal);
    let mut shuffled = q.dense.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
    shuffled.inequalities.shuffle(&mut rng);
    let other = shuffled.solve().map_err(|e| fail(e.to_string()))?;
    for (a, b) in base.x.iter().zip(&other.x) {
        prop_assert!((a - b).abs() <= 1e-6, "{:?} vs {:?}", base.x, other.x);
    }
    Ok(())
}

// --------------------------------------------------------------- stability

#[derive(Clone, Debug)]
pub struct RampCase {
    pub s: Scenario,
    pub prev: SystemState,
    pub unit: usize,
    pub sign: f64,
}

pub fn ramp_case() -> impl Strategy<Value = RampCase> {
    (20.0f64..150.0, 300.0f64..700.0, 150.0f64..600.0, 100.0f64..400.0, 0usize..2, any::<bool>()).prop_map(
        |(r, demand, p1, p2, unit, up)| {
            let mut s = example1().clone();
            for u in &mut s.units {
                u.ramp_up = Some(r);
                u.ramp_down = Some(r);
            }
            s.ramp_enforced = true;
            s.periods = vec![PeriodExogenous { demand, dg_max: 0.0, dr_max: 0.0, reserve_lo: 0.0, reserve_hi: 0.0 }];
            let prev = SystemState::new(super::bits("11"), DispatchVector::new(vec![p1, p2], 0.0, 0.0));
            RampCase { s, prev, unit, sign: if up { 1.0 } else { -1.0 } }
        },
    )
}

/// Perturbing the previous dispatch by `delta` moves the dispatch by at most
/// `c * delta`, with `c` measured at the largest step.
pub fn check_stability(c: &RampCase) -> Result<(), TestCaseError> {
    let mode = super::bits("11");
    let solve = |delta: f64| -> Result<Option<DispatchVector>, TestCaseError> {
        let mut prev = c.prev.clone();
        prev.dispatch.thermal[c.unit] += c.sign * delta;
        match mode_dynamics(&c.s, 1, &mode, &prev) {
            Ok(p) => Ok(Some(p)),
            Err(DispatchError::Infeasible { .. }) => Ok(None),
            Err(e) => Err(fail(e.to_string())),
        }
    };
    let base = solve(0.0)?;
    prop_assume!(base.is_some());
    let base = base.unwrap();
    let moved = |delta: f64| -> Result<Option<f64>, TestCaseError> {
        Ok(solve(delta)?.map(|p| p.max_abs_diff(&base)))
    };
    let (Some(d_big), Some(d_half)) = (moved(1e-2)?, moved(5e-3)?) else {
        return Err(TestCaseError::reject("perturbation leaves the feasible region"));
    };
    // only probe where the solution map is affine over the window
    prop_assume!((d_big - 2.0 * d_half).abs() <= 1e-9);
    let c_est = d_big / 1e-2;
    for delta in [1e-4, 1e-6] {
        let d = moved(delta)?.ok_or_else(|| fail("small perturbation infeasible".into()))?;
        let ratio = d / delta;
        prop_assert!(ratio <= c_est * (1.0 + 1e-3) + 1e-3, "ratio {ratio} at {delta} exceeds {c_est}");
    }
    Ok(())
}

// --------------------------------------------------------------- switching

#[derive(Clone, Debug)]
pub struct SwitchCase {
    pub unit: ThermalUnitParams,
    pub tau: u32,
    pub initially_on: bool,
    pub status: Vec<bool>,
}

pub fn switch_case() -> impl Strategy<Value = SwitchCase> {
    (0.0f64..1000.0, 0.0f64..1000.0, 0.0f64..1000.0, 1u32..30, any::<bool>(), prop::collection::vec(any::<bool>(), 1..24))
        .prop_map(|(cb, cf, cd, tau, initially_on, status)| {
            let mut unit = ThermalUnitParams::new(1.0, 0.0, 0.0, 0.0, 1.0);
            unit.c_bank = cb;
            unit.c_fix = cf;
            unit.c_shut = cd;
            SwitchCase { unit, tau, initially_on, status }
        })
}

/// Truth table, interior cycle identity against the banking start-up cost,
/// and the per-transition sum against the per-stretch reference.
pub fn check_switching(c: &SwitchCase) -> Result<(), TestCaseError> {
    let u = &c.unit;
    let tol = 1e-9 * (u.c_bank + u.c_fix + u.c_shut).max(1.0) * f64::from(c.tau + 24);
    prop_assert!((unit_switching_cost(u, false, false) - u.c_bank).abs() <= tol);
    prop_assert!((unit_switching_cost(u, false, true) - u.c_bank).abs() <= tol);
    prop_assert!(unit_switching_cost(u, true, true).abs() <= tol);
    prop_assert!((unit_switching_cost(u, true, false) - (u.c_fix + u.c_shut)).abs() <= tol);

    let mut seq = vec![true];
    seq.extend(std::iter::repeat_n(false, c.tau as usize));
    seq.push(true);
    let cycle: f64 = seq.windows(2).map(|w| unit_switching_cost(u, w[0], w[1])).sum();
    let expected = startup_cost_reference(u, c.tau) + u.c_shut;
    prop_assert!((cycle - expected).abs() <= tol, "cycle {cycle} vs {expected}");
    prop_assert!((cycle - (u.c_fix + u.c_bank * f64::from(c.tau) + u.c_shut)).abs() <= tol);

    let mut prev = c.initially_on;
    let mut sum = 0.0;
    for &on in &c.status {
        sum += unit_switching_cost(u, prev, on);
        prev = on;
    }
    let reference = super::cycle_switching(u, c.initially_on, &c.status);
    prop_assert!((sum - reference).abs() <= tol, "{sum} vs {reference}");
    Ok(())
}

// --------------------------------------------------------------- convexity

#[derive(Clone, Debug)]
pub struct MidpointCase {
    pub on: CommitmentVector,
    pub a: DispatchVector,
    pub b: DispatchVector,
    pub noise: Vec<f64>,
    pub price: f64,
}

fn dispatch_strategy() -> impl Strategy<Value = DispatchVector> {
    (prop::collection::vec(0.0f64..600.0, 5), 0.0f64..100.0, 0.0f64..40.0)
        .prop_map(|(thermal, dg, dr)| DispatchVector::new(thermal, dg, dr))
}

pub fn midpoint_case() -> impl Strategy<Value = MidpointCase> {
    (0u32..32, dispatch_strategy(), dispatch_strategy(), prop::collection::vec(0.0f64..600.0, 5), 0.0f64..10.0)
        .prop_map(|(mask, a, b, noise, price)| MidpointCase { on: mask_commitment(mask, 5), a, b, noise, price })
}

/// `Q` at the midpoint sits below the chord by exactly a quarter of the
/// curvature-weighted squared step, and ignores uncommitted outputs.
pub fn check_midpoint(c: &MidpointCase) -> Result<(), TestCaseError> {
    let mut s = example2().clone();
    s.cet.price = c.price;
    let mid = DispatchVector::from_coords(
        &c.a.coords().iter().zip(c.b.coords()).map(|(x, y)| 0.5 * (x + y)).collect::<Vec<_>>(),
    );
    let qa = running_cost(&s, &c.on, &c.a);
    let qb = running_cost(&s, &c.on, &c.b);
    let qm = running_cost(&s, &c.on, &mid);
    let mut curvature = 0.0;
    for n in c.on.committed() {
        let u = &s.units[n];
        let d = c.a.thermal[n] - c.b.thermal[n];
        curvature += (u.a + s.cet.price * u.alpha) * d * d;
    }
    curvature += s.dg.a * (c.a.dg - c.b.dg).powi(2) + s.dr.a * (c.a.dr - c.b.dr).powi(2);
    let gap = 0.5 * (qa + qb) - qm;
    let scale = qa.abs().max(qb.abs()).max(1.0);
    prop_assume!(curvature > 1e-6);
    prop_assert!(gap > 0.0, "midpoint not strictly below the chord: {gap}");
    prop_assert!((gap - 0.25 * curvature).abs() <= 1e-9 * scale, "gap {gap} vs {}", 0.25 * curvature);

    let mut shifted = c.a.clone();
    for n in 0..5 {
        if !c.on.is_on(n) {
            shifted.thermal[n] = c.noise[n];
        }
    }
    prop_assert_eq!(running_cost(&s, &c.on, &shifted), qa);
    Ok(())
}

// ----------------------------------------------------------------- Bellman

#[derive(Clone, Debug)]
pub struct BellmanCase {
    pub s: Scenario,
    pub t: usize,
    pub prev: SystemState,
}

pub fn bellman_case() -> impl Strategy<Value = BellmanCase> {
    (any::<bool>(), any::<bool>(), 80.0f64..300.0, 2usize..6, 1usize..4, 0.0f64..1.0, 0.0f64..1.0).prop_map(
        |(case4, ramp, r, t, idx, f1, f2)| {
            let mut s = if case4 { example1_case4().clone() } else { example1().clone() };
            if ramp {
                for u in &mut s.units {
                    u.ramp_up = Some(r);
                    u.ramp_down = Some(r);
                }
                s.ramp_enforced = true;
            }
            let on = CommitmentVector::from_index(idx, 2);
            let thermal = [f1, f2]
                .iter()
                .enumerate()
                .map(|(n, f)| if on.is_on(n) { s.units[n].p_min + f * (s.units[n].p_max - s.units[n].p_min) } else { 0.0 })
                .collect();
            BellmanCase { prev: SystemState::new(on, DispatchVector::new(thermal, 0.0, 0.0)), s, t }
        },
    )
}

/// Tabulated cost-to-go equals the one-step minimization over successors,
/// each valued by the table.
pub fn check_bellman(c: &BellmanCase) -> Result<(), TestCaseError> {
    let s = &c.s;
    let here = exact_value_table(s, &[(c.t, c.prev.clone())], DEFAULT_BUDGET).map_err(|e| fail(e.to_string()))?;
    let value = here.entries[0].value;
    let mut succ = Vec::new();
    for mode in CommitmentVector::enumerate(s.n_units()) {
        match mode_dynamics(s, c.t, &mode, &c.prev) {
            Ok(p) => succ.push(SystemState::new(mode, p)),
            Err(DispatchError::Infeasible { .. }) => {}
            Err(e) => return Err(fail(e.to_string())),
        }
    }
    let samples: Vec<(usize, SystemState)> = succ.iter().map(|x| (c.t + 1, x.clone())).collect();
    let next = exact_value_table(s, &samples, DEFAULT_BUDGET).map_err(|e| fail(e.to_string()))?;
    let best = succ
        .iter()
        .zip(&next.entries)
        .map(|(x, e)| {
            reference_running(s, &x.commitment, &x.dispatch) + kappa_reference(s, &c.prev.commitment, &x.commitment) + e.value
        })
        .fold(f64::INFINITY, f64::min);
    if value.is_infinite() || best.is_infinite() {
        prop_assert!(value.is_infinite() && best.is_infinite(), "value {value}, recursion {best}");
    } else {
        prop_assert!((value - best).abs() <= 1e-6, "value {value}, recursion {best}");
    }
    Ok(())
}

// ------------------------------------------------------------- trajectories

pub fn example2_schedule() -> impl Strategy<Value = Schedule> {
    let horizon = example2().horizon();
    prop::collection::vec(any::<prop::sample::Index>(), horizon).prop_map(|picks| {
        let modes = example2_modes();
        Schedule::new(picks.iter().zip(modes).map(|(k, m)| k.get(m).clone()).collect())
    })
}

/// Running the same schedule twice gives identical trajectories.
pub fn check_determinism(sched: &Schedule) -> Result<(), TestCaseError> {
    let s = example2();
    let a = run_schedule(s, sched).map_err(|e| fail(e.to_string()))?;
    let b = run_schedule(s, sched).map_err(|e| fail(e.to_string()))?;
    prop_assert_eq!(a, b);
    Ok(())
}

/// Scaling every switching parameter by `k >= 1` never lowers the total.
pub fn check_switching_monotone(sched: &Schedule, k: f64) -> Result<(), TestCaseError> {
    let s = example2();
    let mut scaled = s.clone();
    for u in &mut scaled.units {
        u.c_bank *= k;
        u.c_fix *= k;
        u.c_shut *= k;
    }
    let base = total_cost(&run_schedule(s, sched).map_err(|e| fail(e.to_string()))?);
    let more = total_cost(&run_schedule(&scaled, sched).map_err(|e| fail(e.to_string()))?);
    prop_assert!(more >= base - 1e-9 * base.abs(), "{more} < {base}");
    Ok(())
}

/// With ramps relaxed, the trajectory at `t` depends only on `(t, I[t])`.
pub fn check_relaxed_locality(sched: &Schedule, other: &Schedule, t: usize) -> Result<(), TestCaseError> {
    let s = example2();
    let mut spliced = other.modes.clone();
    spliced[t - 1] = sched.modes[t - 1].clone();
    let a = run_schedule(s, sched).map_err(|e| fail(e.to_string()))?;
    let b = run_schedule(s, &Schedule::new(spliced)).map_err(|e| fail(e.to_string()))?;
    prop_assert_eq!(&a.steps[t - 1].dispatch, &b.steps[t - 1].dispatch);
    prop_assert_eq!(a.steps[t - 1].stage.running, b.steps[t - 1].stage.running);
    Ok(())
}

// ----------------------------------------------------------------- oracles

#[derive(Clone, Debug)]
pub struct SmallCase {
    pub s: Scenario,
    pub ramp: f64,
}

pub fn small_case() -> impl Strategy<Value = SmallCase> {
    (
        prop::collection::vec(150.0f64..1000.0, 1..=6),
        prop::collection::vec(0.0f64..500.0, 6),
        50.0f64..300.0,
        any::<bool>(),
    )
        .prop_map(|(demands, sw, ramp, start_on)| {
            let mut s = example1().clone();
            s.periods = demands
                .into_iter()
                .map(|demand| PeriodExogenous { demand, dg_max: 0.0, dr_max: 0.0, reserve_lo: 0.0, reserve_hi: 0.0 })
                .collect();
            for (n, u) in s.units.iter_mut().enumerate() {
                u.c_bank = sw[3 * n];
                u.c_fix = sw[3 * n + 1];
                u.c_shut = sw[3 * n + 2];
            }
            if start_on {
                s.initial_commitment = super::bits("11");
                s.initial_dispatch = DispatchVector::new(vec![300.0, 200.0], 0.0, 0.0);
            }
            SmallCase { s, ramp }
        })
}

/// Enumeration and graph dynamic programming agree; enforcing ramps never
/// lowers the optimum.
pub fn check_oracles(c: &SmallCase) -> Result<(), TestCaseError> {
    let s = &c.s;
    let a = enumerate_optimal(s, DEFAULT_BUDGET).map_err(|e| fail(e.to_string()))?;
    let b = graph_dp_optimal(s).map_err(|e| fail(e.to_string()))?;
    prop_assert_eq!(&a.schedule, &b.schedule);
    prop_assert!((a.cost - b.cost).abs() <= 1e-6);
    let direct: f64 = a
        .trajectory
        .steps
        .iter()
        .scan(s.initial_commitment.clone(), |prev, st| {
            let k = kappa_reference(s, prev, &st.commitment);
            *prev = st.commitment.clone();
            Some(reference_running(s, &st.commitment, &st.dispatch) + k)
        })
        .sum();
    prop_assert!((direct - a.cost).abs() <= 1e-6);

    let mut ramped = s.clone();
    for u in &mut ramped.units {
        u.ramp_up = Some(c.ramp);
        u.ramp_down = Some(c.ramp);
    }
    ramped.ramp_enforced = true;
    match enumerate_optimal(&ramped, DEFAULT_BUDGET) {
        Ok(r) => prop_assert!(r.cost >= a.cost - 1e-6, "ramped {} < relaxed {}", r.cost, a.cost),
        Err(OracleError::NoFeasibleSchedule) => {}
        Err(e) => return Err(fail(e.to_string())),
    }
    Ok(())
}

/// Switching cost along a schedule equals the truth-table sum.
pub fn check_kappa_sum(sched: &Schedule) -> Result<(), TestCaseError> {
    let s = example2();
    let mut prev = s.initial_commitment.clone();
    for m in &sched.modes {
        let a = switching_cost(s, &prev, m);
        let b = kappa_reference(s, &prev, m);
        prop_assert!((a - b).abs() <= 1e-9 * b.max(1.0));
        prev = m.clone();
    }
    Ok(())
}

// ------------------------------------------------------------------ runner

pub type SuiteFn = fn(&mut TestRunner) -> Result<(), String>;

fn run<S: Strategy>(
    runner: &mut TestRunner,
    strategy: S,
    check: impl Fn(&S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String> {
    runner.run(&strategy, |v| check(&v)).map_err(|e| e.to_string())
}

/// Every suite with its label, for the acceptance report.
pub fn suites() -> Vec<(&'static str, SuiteFn)> {
    vec![
        ("QP KKT residual, balance, penetration, feasible-point dominance", |r| run(r, dispatch_case(), check_dispatch)),
        ("QP uniqueness under row permutation", |r| run(r, dispatch_case(), check_permutation)),
        ("dispatch stability under ramp perturbation", |r| run(r, ramp_case(), check_stability)),
        ("switching truth table and cycle identity", |r| run(r, switch_case(), check_switching)),
        ("strict-convexity midpoint and uncommitted invariance", |r| run(r, midpoint_case(), check_midpoint)),
        ("Bellman consistency of the value table", |r| run(r, bellman_case(), check_bellman)),
        ("trajectory determinism", |r| run(r, example2_schedule(), check_determinism)),
    ]
}
