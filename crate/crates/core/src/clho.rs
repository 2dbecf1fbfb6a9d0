//! Closed-loop hierarchical operation: backward training of per-`(t, I_prev)`
//! value approximations and greedy one-step scheduling against them.
//!
//! `J_t(P_prev, I_prev)` is the cost-to-go entering period `t` with the state
//! realized at `t - 1`. It is approximated as `w . phi(P_prev)` with one weight
//! vector per `(t, I_prev)`; `J_{T+1} = 0`.

use std::fs;
use std::io::Write;
use std::path::Path;

use log::{debug, warn};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cost::switching_cost;
use crate::dispatch::{DispatchError, Dynamics};
use crate::is_better;
use crate::scenario::{CommitmentVector, DispatchVector, Scenario, SystemState};

/// Model document format version.
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ClhoError {
    #[error("no feasible mode at period {t}")]
    NoFeasibleMode { t: usize },
    #[error("no weights for t={t}, I_prev={prev}")]
    MissingWeights { t: usize, prev: CommitmentVector },
    #[error("model shape (N={model_units}, T={model_horizon}) does not match scenario (N={units}, T={horizon})")]
    Shape { model_units: usize, model_horizon: usize, units: usize, horizon: usize },
    #[error("model was trained on scenario {model}, not {scenario}")]
    Fingerprint { model: String, scenario: String },
    #[error("model format version {found}, expected {expected}")]
    Version { found: u32, expected: u32 },
    #[error("malformed model document: {0}")]
    Parse(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Dispatch(#[from] DispatchError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisFamily {
    /// Per-coordinate squares, then linears, then a constant.
    Quadratic,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasisSpec {
    pub family: BasisFamily,
    pub n_thermal: usize,
    pub dg: bool,
    pub dr: bool,
}

impl BasisSpec {
    /// All thermal coordinates, plus DG and DR when the scenario gives them
    /// any capacity.
    pub fn for_scenario(s: &Scenario) -> Self {
        Self { family: BasisFamily::Quadratic, n_thermal: s.n_units(), dg: s.has_dg(), dr: s.has_dr() }
    }

    pub fn n_coords(&self) -> usize {
        self.n_thermal + usize::from(self.dg) + usize::from(self.dr)
    }

    /// Feature count `M`.
    pub fn dim(&self) -> usize {
        match self.family {
            BasisFamily::Quadratic => 2 * self.n_coords() + 1,
        }
    }

    fn coords(&self, p: &DispatchVector) -> Vec<f64> {
        let mut x = p.thermal.clone();
        if self.dg {
            x.push(p.dg);
        }
        if self.dr {
            x.push(p.dr);
        }
        x
    }
}

pub fn basis_vector(spec: &BasisSpec, p: &DispatchVector) -> Vec<f64> {
    debug_assert_eq!(p.thermal.len(), spec.n_thermal);
    let x = spec.coords(p);
    match spec.family {
        BasisFamily::Quadratic => {
            let mut phi: Vec<f64> = x.iter().map(|v| v * v).collect();
            phi.extend_from_slice(&x);
            phi.push(1.0);
            phi
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub samples: usize,
    pub regularization: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { samples: 100, regularization: 0.0, seed: 0 }
    }
}

/// Least-squares diagnostics for one weight vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitInfo {
    pub samples_used: usize,
    pub samples_discarded: usize,
    pub residual_rms: f64,
    pub rank: usize,
    /// Features that are identically zero on the sampling region.
    pub zero_features: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightEntry {
    pub t: usize,
    pub prev: CommitmentVector,
    pub weights: Vec<f64>,
    pub fit: FitInfo,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValueModel {
    pub version: u32,
    pub basis: BasisSpec,
    pub n_units: usize,
    pub horizon: usize,
    pub config: TrainConfig,
    pub fingerprint: String,
    /// Sorted by `(t, I_prev index)`.
    pub entries: Vec<WeightEntry>,
}

impl ValueModel {
    pub fn weights(&self, t: usize, prev: &CommitmentVector) -> Option<&[f64]> {
        self.entries
            .binary_search_by(|e| (e.t, e.prev.index()).cmp(&(t, prev.index())))
            .ok()
            .map(|k| self.entries[k].weights.as_slice())
    }

    /// Checks shape and fingerprint against `s`; a fingerprint mismatch is
    /// tolerated with `force`.
    pub fn check_scenario(&self, s: &Scenario, force: bool) -> Result<(), ClhoError> {
        if self.n_units != s.n_units() || self.horizon != s.horizon() || self.basis.n_thermal != s.n_units() {
            return Err(ClhoError::Shape {
                model_units: self.n_units,
                model_horizon: self.horizon,
                units: s.n_units(),
                horizon: s.horizon(),
            });
        }
        let fp = s.fingerprint();
        if fp != self.fingerprint {
            if force {
                warn!("model fingerprint {} differs from scenario {fp}; continuing", self.fingerprint);
            } else {
                return Err(ClhoError::Fingerprint { model: self.fingerprint.clone(), scenario: fp });
            }
        }
        Ok(())
    }
}

/// `J~_t(P, I_prev)`; zero past the horizon.
pub fn approx_value(m: &ValueModel, t: usize, prev: &CommitmentVector, p: &DispatchVector) -> Result<f64, ClhoError> {
    if t > m.horizon {
        return Ok(0.0);
    }
    let w = m.weights(t, prev).ok_or_else(|| ClhoError::MissingWeights { t, prev: prev.clone() })?;
    Ok(basis_vector(&m.basis, p).iter().zip(w).map(|(f, w)| f * w).sum())
}

/// Draws a hypothetical state realized at `t - 1` with commitment `prev`.
fn sample_state(s: &Scenario, t: usize, prev: &CommitmentVector, rng: &mut ChaCha8Rng) -> SystemState {
    let thermal = s
        .units
        .iter()
        .enumerate()
        .map(|(n, u)| {
            if prev.is_on(n) && u.p_max > u.p_min {
                rng.random_range(u.p_min..=u.p_max)
            } else if prev.is_on(n) {
                u.p_min
            } else {
                0.0
            }
        })
        .collect();
    // there is no period 0, so the first period's caps bound the initial state
    let period = s.period(t.saturating_sub(1).max(1));
    let mut draw = |hi: f64| if hi > 0.0 { rng.random_range(0.0..=hi) } else { 0.0 };
    let dg = draw(period.dg_max);
    let dr = draw(period.dr_max);
    SystemState::new(prev.clone(), DispatchVector::new(thermal, dg, dr))
}

/// One-step Bellman target: `min_I Q(f_I(P_prev), I) + kappa(I_prev, I) + J~_{t+1}`.
/// Returns the value, the chosen outcome state, or `None` when no mode is feasible.
fn lookahead(
    d: &Dynamics<'_>,
    m: &ValueModel,
    t: usize,
    prev: &SystemState,
) -> Result<Option<(f64, SystemState)>, ClhoError> {
    let s = d.scenario();
    let mut best: Option<(f64, SystemState)> = None;
    for mode in d.candidates(t) {
        let Some(o) = d.step(t, mode, prev)? else {
            continue;
        };
        let tail = approx_value(m, t + 1, &o.commitment, &o.dispatch)?;
        let v = o.running + switching_cost(s, &prev.commitment, mode) + tail;
        if best.as_ref().is_none_or(|(b, _)| is_better(v, *b)) {
            best = Some((v, SystemState::new(o.commitment, o.dispatch)));
        }
    }
    Ok(best)
}

/// Minimum-norm least squares with column equilibration.
fn fit(phi: &DMatrix<f64>, y: &DVector<f64>, regularization: f64) -> (Vec<f64>, usize, usize) {
    let m = phi.ncols();
    let scale: Vec<f64> = (0..m).map(|j| phi.column(j).norm()).collect();
    let zero = scale.iter().filter(|&&c| c == 0.0).count();
    let mut a = phi.clone();
    for (j, &c) in scale.iter().enumerate() {
        if c > 0.0 {
            a.column_mut(j).scale_mut(1.0 / c);
        }
    }
    let (a, b) = if regularization > 0.0 {
        let mut aug = DMatrix::zeros(a.nrows() + m, m);
        aug.rows_mut(0, a.nrows()).copy_from(&a);
        for j in 0..m {
            aug[(a.nrows() + j, j)] = regularization.sqrt();
        }
        let mut rhs = DVector::zeros(a.nrows() + m);
        rhs.rows_mut(0, y.len()).copy_from(y);
        (aug, rhs)
    } else {
        (a, y.clone())
    };
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let eps = smax * 1e-12 * (b.nrows().max(m) as f64);
    let rank = svd.rank(eps);
    let z = svd.solve(&b, eps).expect("both factors were computed");
    let w = (0..m).map(|j| if scale[j] > 0.0 { z[j] / scale[j] } else { 0.0 }).collect();
    (w, rank, zero)
}

fn train_entry(
    d: &Dynamics<'_>,
    model: &ValueModel,
    cfg: &TrainConfig,
    t: usize,
    prev: &CommitmentVector,
) -> Result<Option<WeightEntry>, ClhoError> {
    let s = d.scenario();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(((t as u64) << 32) | prev.index() as u64);
    let mut rows = Vec::with_capacity(cfg.samples);
    let mut targets = Vec::with_capacity(cfg.samples);
    let mut discarded = 0;
    for _ in 0..cfg.samples {
        let state = sample_state(s, t, prev, &mut rng);
        match lookahead(d, model, t, &state)? {
            Some((v, _)) => {
                rows.push(basis_vector(&model.basis, &state.dispatch));
                targets.push(v);
            }
            None => discarded += 1,
        }
    }
    if discarded > 0 {
        debug!("t={t} I_prev={prev}: discarded {discarded} samples with no feasible mode");
    }
    if rows.is_empty() {
        warn!("t={t} I_prev={prev}: every sample was infeasible; no weights stored");
        return Ok(None);
    }
    let mdim = model.basis.dim();
    if rows.len() < mdim {
        warn!("t={t} I_prev={prev}: {} samples for {mdim} features", rows.len());
    }
    let phi = DMatrix::from_fn(rows.len(), mdim, |i, j| rows[i][j]);
    let y = DVector::from_vec(targets);
    let (weights, rank, zero) = fit(&phi, &y, cfg.regularization);
    if rank + zero < mdim {
        warn!("t={t} I_prev={prev}: rank-deficient fit (rank {rank}, {zero} zero features, {mdim} total); using minimum-norm weights");
    }
    let residual = &phi * DVector::from_column_slice(&weights) - &y;
    Ok(Some(WeightEntry {
        t,
        prev: prev.clone(),
        weights,
        fit: FitInfo {
            samples_used: y.len(),
            samples_discarded: discarded,
            residual_rms: residual.norm() / (y.len() as f64).sqrt(),
            rank,
            zero_features: zero,
        },
    }))
}

/// Backward training over `t = T..1`. At `t = 1` every commitment is trained
/// so the model can schedule from any initial condition.
pub fn train(s: &Scenario, cfg: &TrainConfig) -> Result<ValueModel, ClhoError> {
    let d = Dynamics::new(s)?;
    if let Some(t) = (1..=s.horizon()).find(|&t| d.candidates(t).is_empty()) {
        return Err(ClhoError::NoFeasibleMode { t });
    }
    let mut model = ValueModel {
        version: MODEL_VERSION,
        basis: BasisSpec::for_scenario(s),
        n_units: s.n_units(),
        horizon: s.horizon(),
        config: cfg.clone(),
        fingerprint: s.fingerprint(),
        entries: Vec::new(),
    };
    let all: Vec<CommitmentVector> = CommitmentVector::enumerate(s.n_units()).collect();
    for t in (1..=s.horizon()).rev() {
        let prevs: &[CommitmentVector] = if t == 1 { &all } else { d.candidates(t - 1) };
        let fitted = prevs
            .par_iter()
            .map(|prev| train_entry(&d, &model, cfg, t, prev))
            .collect::<Result<Vec<_>, _>>()?;
        let mut layer: Vec<WeightEntry> = fitted.into_iter().flatten().collect();
        layer.append(&mut model.entries);
        model.entries = layer;
    }
    Ok(model)
}

/// Greedy decision at `t` from the observed state; no training happens here.
pub fn schedule_step(
    m: &ValueModel,
    d: &Dynamics<'_>,
    t: usize,
    prev: &SystemState,
) -> Result<SystemState, ClhoError> {
    lookahead(d, m, t, prev)?.map(|(_, next)| next).ok_or(ClhoError::NoFeasibleMode { t })
}

/// Iterates [`schedule_step`] from `(from_t, prev)` to the horizon.
pub fn greedy_from(
    m: &ValueModel,
    d: &Dynamics<'_>,
    from_t: usize,
    prev: &SystemState,
) -> Result<Vec<SystemState>, ClhoError> {
    let mut state = prev.clone();
    let mut out = Vec::new();
    for t in from_t..=d.scenario().horizon() {
        state = schedule_step(m, d, t, &state)?;
        out.push(state.clone());
    }
    Ok(out)
}

pub fn save_model(m: &ValueModel, path: &Path) -> Result<(), ClhoError> {
    let text = serde_json::to_string_pretty(m)?;
    fs::write(path, text)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<ValueModel, ClhoError> {
    parse_model(&fs::read_to_string(path)?)
}

pub fn parse_model(text: &str) -> Result<ValueModel, ClhoError> {
    #[derive(Deserialize)]
    struct Probe {
        version: u32,
    }
    let probe: Probe = serde_json::from_str(text)?;
    if probe.version != MODEL_VERSION {
        return Err(ClhoError::Version { found: probe.version, expected: MODEL_VERSION });
    }
    let mut m: ValueModel = serde_json::from_str(text)?;
    m.entries.sort_by_key(|e| (e.t, e.prev.index()));
    Ok(m)
}

/// Weight trajectories as CSV: `t, I_prev, w_1..w_M`.
pub fn export_weights_csv<W: Write>(m: &ValueModel, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string(), "I_prev".to_string()];
    header.extend((1..=m.basis.dim()).map(|k| format!("w_{k}")));
    w.write_record(&header)?;
    for e in &m.entries {
        let mut rec = vec![e.t.to_string(), e.prev.to_string()];
        rec.extend(e.weights.iter().map(|x| x.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
