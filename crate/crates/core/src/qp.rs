//! Small dense convex QP solver.
//!
//! Solves
//!
//! ```text
//!     minimize    1/2 x' diag(h) x + g' x + c0
//!     subject to  E x  = e
//!                 A x <= b
//! ```
//!
//! with `h > 0`. Feasibility is settled first by a phase-one linear program
//! (minimum total constraint violation, Bland's-rule tableau simplex). From
//! the phase-one point a primal active-set method walks to the unique
//! minimizer. Every returned optimum is checked against the KKT conditions.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Pivot threshold for simplex and KKT decisions.
pub const PIVOT_TOL: f64 = 1e-10;
/// Phase-one infeasibility threshold, relative to the largest right-hand side.
pub const FEASIBILITY_TOL: f64 = 1e-8;
/// Contract on the KKT residual of returned optima.
pub const KKT_TOL: f64 = 1e-8;

const MAX_ACTIVE_SET_ITERATIONS: usize = 500;
const MAX_SIMPLEX_ITERATIONS: usize = 5_000;

/// Affine row `coeffs . x (= or <=) rhs`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearRow {
    pub coeffs: Vec<f64>,
    pub rhs: f64,
}

impl LinearRow {
    pub fn new(coeffs: Vec<f64>, rhs: f64) -> Self {
        Self { coeffs, rhs }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        dot(&self.coeffs, x)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DenseQp {
    pub hessian_diag: Vec<f64>,
    pub linear: Vec<f64>,
    pub constant: f64,
    pub equalities: Vec<LinearRow>,
    pub inequalities: Vec<LinearRow>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum QpStatus {
    Optimal,
    /// No point satisfies the rows; carries the minimal total violation.
    Infeasible { phase_one_residual: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct QpResult {
    pub x: Vec<f64>,
    pub eq_multipliers: Vec<f64>,
    pub ineq_multipliers: Vec<f64>,
    pub objective: f64,
    pub status: QpStatus,
}

#[derive(Debug, Error, PartialEq)]
pub enum QpError {
    #[error("malformed problem: {0}")]
    Malformed(String),
    #[error("singular KKT system with {active} active rows")]
    Singular { active: usize },
    #[error("iteration limit reached in {0}")]
    IterationLimit(&'static str),
    #[error("solution fails the KKT check (residual {residual:e})")]
    KktViolation { residual: f64 },
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl DenseQp {
    pub fn dim(&self) -> usize {
        self.hessian_diag.len()
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        let quad: f64 = self.hessian_diag.iter().zip(x).map(|(h, xi)| 0.5 * h * xi * xi).sum();
        quad + dot(&self.linear, x) + self.constant
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.hessian_diag.iter().zip(x).zip(&self.linear).map(|((h, xi), g)| h * xi + g).collect()
    }

    /// Largest equality or inequality violation at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let eq = self.equalities.iter().map(|r| (r.eval(x) - r.rhs).abs());
        let ineq = self.inequalities.iter().map(|r| (r.eval(x) - r.rhs).max(0.0));
        eq.chain(ineq).fold(0.0, f64::max)
    }

    fn rhs_scale(&self) -> f64 {
        self.equalities
            .iter()
            .chain(&self.inequalities)
            .map(|r| r.rhs.abs())
            .fold(1.0, f64::max)
    }

    fn check(&self) -> Result<(), QpError> {
        let n = self.dim();
        if self.linear.len() != n {
            return Err(QpError::Malformed("linear term length".into()));
        }
        if self.hessian_diag.iter().any(|h| !(*h > 0.0) || !h.is_finite()) {
            return Err(QpError::Malformed("curvature must be strictly positive".into()));
        }
        for row in self.equalities.iter().chain(&self.inequalities) {
            if row.coeffs.len() != n || !row.rhs.is_finite() || row.coeffs.iter().any(|c| !c.is_finite()) {
                return Err(QpError::Malformed("row dimension or non-finite entry".into()));
            }
        }
        Ok(())
    }

    /// Minimum total violation over all rows, and a point attaining it.
    pub fn phase_one(&self) -> Result<(f64, Vec<f64>), QpError> {
        self.check()?;
        phase_one(self)
    }

    pub fn is_feasible(&self) -> Result<bool, QpError> {
        let (residual, _) = self.phase_one()?;
        Ok(residual <= FEASIBILITY_TOL * self.rhs_scale())
    }

    pub fn solve(&self) -> Result<QpResult, QpError> {
        let (residual, x0) = self.phase_one()?;
        if residual > FEASIBILITY_TOL * self.rhs_scale() {
            return Ok(QpResult {
                objective: self.objective(&x0),
                eq_multipliers: vec![0.0; self.equalities.len()],
                ineq_multipliers: vec![0.0; self.inequalities.len()],
                x: x0,
                status: QpStatus::Infeasible { phase_one_residual: residual },
            });
        }
        let result = active_set(self, x0)?;
        let residual = kkt_residual(self, &result.x, &result.eq_multipliers, &result.ineq_multipliers);
        if residual > KKT_TOL {
            return Err(QpError::KktViolation { residual });
        }
        Ok(result)
    }
}

/// Max-norm of stationarity, primal feasibility, dual feasibility and
/// complementary slackness residuals.
pub fn kkt_residual(qp: &DenseQp, x: &[f64], lambda: &[f64], mu: &[f64]) -> f64 {
    let mut stationarity = qp.gradient(x);
    for (row, l) in qp.equalities.iter().zip(lambda) {
        for (s, a) in stationarity.iter_mut().zip(&row.coeffs) {
            *s += l * a;
        }
    }
    for (row, m) in qp.inequalities.iter().zip(mu) {
        for (s, a) in stationarity.iter_mut().zip(&row.coeffs) {
            *s += m * a;
        }
    }
    let mut worst = stationarity.iter().fold(0.0_f64, |acc, s| acc.max(s.abs()));
    worst = worst.max(qp.max_violation(x));
    for (row, m) in qp.inequalities.iter().zip(mu) {
        worst = worst.max(-m).max((m * (row.rhs - row.eval(x))).abs());
    }
    worst
}

/// Dense tableau for `min c'z, Mz = r, z >= 0` with a known feasible basis.
struct Tableau {
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    /// Reduced costs; the last entry holds minus the objective value.
    reduced: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    fn pivot(&mut self, r: usize, col: usize) {
        let p = self.rows[r][col];
        for v in self.rows[r].iter_mut() {
            *v /= p;
        }
        self.rhs[r] /= p;
        let pivot_row = self.rows[r].clone();
        let pivot_rhs = self.rhs[r];
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[col];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                self.rhs[i] -= f * pivot_rhs;
            }
        }
        let f = self.reduced[col];
        if f != 0.0 {
            let width = pivot_row.len();
            for (v, pv) in self.reduced[..width].iter_mut().zip(&pivot_row) {
                *v -= f * pv;
            }
            self.reduced[width] -= f * pivot_rhs;
        }
        self.basis[r] = col;
    }

    /// Bland's rule: lowest-index improving column, lowest-index leaving row
    /// among ratio ties.
    fn run(&mut self) -> Result<(), QpError> {
        let width = self.rows.first().map_or(0, |r| r.len());
        for _ in 0..MAX_SIMPLEX_ITERATIONS {
            let Some(col) = (0..width).find(|&j| self.reduced[j] < -PIVOT_TOL) else {
                return Ok(());
            };
            let mut leave: Option<(usize, f64)> = None;
            for (i, row) in self.rows.iter().enumerate() {
                if row[col] > PIVOT_TOL {
                    let ratio = self.rhs[i].max(0.0) / row[col];
                    let better = match leave {
                        None => true,
                        Some((li, lr)) => {
                            ratio < lr - PIVOT_TOL
                                || (ratio <= lr + PIVOT_TOL && self.basis[i] < self.basis[li])
                        }
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            match leave {
                Some((r, _)) => self.pivot(r, col),
                // The phase-one objective is bounded below by zero.
                None => return Err(QpError::IterationLimit("phase-one (unbounded ray)")),
            }
        }
        Err(QpError::IterationLimit("phase-one simplex"))
    }
}

fn phase_one(qp: &DenseQp) -> Result<(f64, Vec<f64>), QpError> {
    let n = qp.dim();
    let me = qp.equalities.len();
    let mi = qp.inequalities.len();
    // columns: x+ (n), x- (n), then per equality (e+, e-), per inequality (slack, violation)
    let width = 2 * n + 2 * me + 2 * mi;
    let mut rows = Vec::with_capacity(me + mi);
    let mut rhs = Vec::with_capacity(me + mi);
    let mut basis = Vec::with_capacity(me + mi);
    let mut cost = vec![0.0; width];

    let mut push = |coeffs: &[f64], b: f64, first_aux: usize, second_sign: f64, rows: &mut Vec<Vec<f64>>| {
        let mut row = vec![0.0; width];
        for (j, a) in coeffs.iter().enumerate() {
            row[j] = *a;
            row[n + j] = -a;
        }
        row[first_aux] = 1.0;
        row[first_aux + 1] = second_sign;
        let (row, b, basic) = if b >= 0.0 {
            (row, b, first_aux)
        } else {
            (row.into_iter().map(|v| -v).collect(), -b, first_aux + 1)
        };
        rows.push(row);
        rhs.push(b);
        basis.push(basic);
    };
    for (k, r) in qp.equalities.iter().enumerate() {
        let aux = 2 * n + 2 * k;
        cost[aux] = 1.0;
        cost[aux + 1] = 1.0;
        push(&r.coeffs, r.rhs, aux, -1.0, &mut rows);
    }
    for (k, r) in qp.inequalities.iter().enumerate() {
        let aux = 2 * n + 2 * me + 2 * k;
        cost[aux + 1] = 1.0;
        push(&r.coeffs, r.rhs, aux, -1.0, &mut rows);
    }

    // reduced costs: c_j - c_B' M_j, objective row stores -c_B' r
    let mut reduced = cost.clone();
    reduced.push(0.0);
    for (i, row) in rows.iter().enumerate() {
        let cb = cost[basis[i]];
        if cb != 0.0 {
            for (v, a) in reduced[..width].iter_mut().zip(row) {
                *v -= cb * a;
            }
            reduced[width] -= cb * rhs[i];
        }
    }
    let mut tab = Tableau { rows, rhs, reduced, basis };
    tab.run()?;

    let mut z = vec![0.0; width];
    for (i, &b) in tab.basis.iter().enumerate() {
        z[b] = tab.rhs[i];
    }
    let x: Vec<f64> = (0..n).map(|j| z[j] - z[n + j]).collect();
    let residual = (-tab.reduced[width]).max(0.0);
    Ok((residual, x))
}

fn active_set(qp: &DenseQp, mut x: Vec<f64>) -> Result<QpResult, QpError> {
    let n = qp.dim();
    let me = qp.equalities.len();
    let mut working: Vec<usize> = Vec::new();

    for _ in 0..MAX_ACTIVE_SET_ITERATIONS {
        let k = me + working.len();
        let size = n + k;
        let mut kkt = DMatrix::<f64>::zeros(size, size);
        let grad = qp.gradient(&x);
        let mut rhs = DVector::<f64>::zeros(size);
        for j in 0..n {
            kkt[(j, j)] = qp.hessian_diag[j];
            rhs[j] = -grad[j];
        }
        let active_rows = qp.equalities.iter().chain(working.iter().map(|&i| &qp.inequalities[i]));
        for (r, row) in active_rows.enumerate() {
            for (j, a) in row.coeffs.iter().enumerate() {
                kkt[(n + r, j)] = *a;
                kkt[(j, n + r)] = *a;
            }
        }
        let lu = kkt.lu();
        let pivots = lu.u().diagonal();
        let largest = pivots.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let smallest = pivots.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
        if !(smallest > 1e-14 * largest) {
            return Err(QpError::Singular { active: k });
        }
        let sol = lu.solve(&rhs).ok_or(QpError::Singular { active: k })?;
        let step: Vec<f64> = sol.iter().take(n).copied().collect();
        let multipliers: Vec<f64> = sol.iter().skip(n).copied().collect();

        let x_scale = x.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        let step_norm = step.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if step_norm <= 1e-12 * x_scale {
            let grad_scale = grad.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
            let worst = working
                .iter()
                .enumerate()
                .map(|(w, &i)| (multipliers[me + w], i, w))
                .filter(|(m, _, _)| *m < -1e-10 * grad_scale)
                .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            match worst {
                Some((_, _, w)) => {
                    working.remove(w);
                }
                None => {
                    let mut mu = vec![0.0; qp.inequalities.len()];
                    for (w, &i) in working.iter().enumerate() {
                        mu[i] = multipliers[me + w].max(0.0);
                    }
                    return Ok(QpResult {
                        objective: qp.objective(&x),
                        eq_multipliers: multipliers[..me].to_vec(),
                        ineq_multipliers: mu,
                        x,
                        status: QpStatus::Optimal,
                    });
                }
            }
            continue;
        }

        let mut alpha = 1.0;
        let mut blocking = None;
        for (i, row) in qp.inequalities.iter().enumerate() {
            if working.contains(&i) {
                continue;
            }
            let slope = row.eval(&step);
            if slope > PIVOT_TOL * row.coeffs.iter().fold(0.0_f64, |m, v| m.max(v.abs())) * step_norm {
                let ratio = ((row.rhs - row.eval(&x)) / slope).max(0.0);
                if ratio < alpha {
                    alpha = ratio;
                    blocking = Some(i);
                }
            }
        }
        for (xi, pi) in x.iter_mut().zip(&step) {
            *xi += alpha * pi;
        }
        if let Some(i) = blocking {
            working.push(i);
        }
    }
    Err(QpError::IterationLimit("active-set"))
}
