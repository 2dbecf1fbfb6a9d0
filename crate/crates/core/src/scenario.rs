//! Problem-instance data model and the `.ucd` scenario document format.
//!
//! A scenario document is TOML. Top-level `eta_max`, then the sections
//! `options`, `cet`, `dg`, `dr`, `initial`, and the arrays `units` and
//! `periods`. Reserves may be given per period or expanded from
//! `options.reserve_fraction` (a fraction of demand) at parse time.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Parameters of one thermal unit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThermalUnitParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub p_min: f64,
    pub p_max: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ramp_down: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ramp_up: Option<f64>,
    /// Banking cost per offline period.
    #[serde(default)]
    pub c_bank: f64,
    /// Fixed start-up cost.
    #[serde(default)]
    pub c_fix: f64,
    /// Fixed shutdown cost.
    #[serde(default)]
    pub c_shut: f64,
    #[serde(default)]
    pub alpha: f64,
    #[serde(default)]
    pub beta: f64,
    #[serde(default)]
    pub gamma: f64,
    /// Emission allowance over the whole horizon, in tons.
    #[serde(default)]
    pub quota: f64,
}

impl ThermalUnitParams {
    /// A unit with the given fuel curve and capacity, all other parameters zero.
    pub fn new(a: f64, b: f64, c: f64, p_min: f64, p_max: f64) -> Self {
        Self {
            a,
            b,
            c,
            p_min,
            p_max,
            ramp_down: None,
            ramp_up: None,
            c_bank: 0.0,
            c_fix: 0.0,
            c_shut: 0.0,
            alpha: 0.0,
            beta: 0.0,
            gamma: 0.0,
            quota: 0.0,
        }
    }
}

/// Role of a virtual generation resource.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VirtualRole {
    Dg,
    Dr,
}

/// Quadratic cost curve of the DG aggregator or the DR virtual unit.
#[derive(Clone, Debug, PartialEq)]
pub struct VirtualResourceParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub role: VirtualRole,
}

impl VirtualResourceParams {
    pub fn new(role: VirtualRole, a: f64, b: f64, c: f64) -> Self {
        Self { a, b, c, role }
    }

    pub fn cost(&self, p: f64) -> f64 {
        self.a * p * p + self.b * p + self.c
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CetParams {
    /// Emission trading price in $/ton.
    #[serde(default)]
    pub price: f64,
}

/// Exogenous data for one period (the forecast series).
#[derive(Clone, Debug, PartialEq)]
pub struct PeriodExogenous {
    pub demand: f64,
    pub dg_max: f64,
    pub dr_max: f64,
    pub reserve_lo: f64,
    pub reserve_hi: f64,
}

/// On/off status of the N thermal units for one period.
///
/// Ordered as the binary integer whose most significant bit is unit 1, so
/// that for two units `[0,1] < [1,0] < [1,1]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CommitmentVector {
    bits: Vec<bool>,
}

impl CommitmentVector {
    pub fn new(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    pub fn all_off(n: usize) -> Self {
        Self { bits: vec![false; n] }
    }

    pub fn from_index(index: usize, n: usize) -> Self {
        let bits = (0..n).map(|k| (index >> (n - 1 - k)) & 1 == 1).collect();
        Self { bits }
    }

    /// Every commitment vector of length `n`, in increasing index order.
    pub fn enumerate(n: usize) -> impl Iterator<Item = CommitmentVector> {
        (0..1usize << n).map(move |i| CommitmentVector::from_index(i, n))
    }

    pub fn index(&self) -> usize {
        self.bits.iter().fold(0, |acc, &b| (acc << 1) | b as usize)
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn is_on(&self, unit: usize) -> bool {
        self.bits[unit]
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn committed(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.iter().enumerate().filter(|(_, &b)| b).map(|(n, _)| n)
    }

    /// Parses a bitstring such as `"011"`; unit 1 comes first.
    pub fn parse_bits(text: &str) -> Option<Self> {
        let text = text.trim();
        if text.is_empty() {
            return None;
        }
        text.chars()
            .map(|ch| match ch {
                '0' => Some(false),
                '1' => Some(true),
                _ => None,
            })
            .collect::<Option<Vec<_>>>()
            .map(Self::new)
    }
}

impl fmt::Display for CommitmentVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl Serialize for CommitmentVector {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for CommitmentVector {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        CommitmentVector::parse_bits(&text)
            .ok_or_else(|| serde::de::Error::custom(format!("`{text}` is not a bitstring")))
    }
}

/// Power outputs `[P_1..P_N, P_DG, P_DR]` in MW for one period.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DispatchVector {
    pub thermal: Vec<f64>,
    pub dg: f64,
    pub dr: f64,
}

impl DispatchVector {
    pub fn new(thermal: Vec<f64>, dg: f64, dr: f64) -> Self {
        Self { thermal, dg, dr }
    }

    pub fn zeros(n: usize) -> Self {
        Self { thermal: vec![0.0; n], dg: 0.0, dr: 0.0 }
    }

    /// Flattened coordinates, thermal units first, then DG and DR.
    pub fn coords(&self) -> Vec<f64> {
        let mut out = self.thermal.clone();
        out.push(self.dg);
        out.push(self.dr);
        out
    }

    pub fn from_coords(coords: &[f64]) -> Self {
        let n = coords.len() - 2;
        Self { thermal: coords[..n].to_vec(), dg: coords[n], dr: coords[n + 1] }
    }

    pub fn total(&self) -> f64 {
        self.thermal.iter().sum::<f64>() + self.dg + self.dr
    }

    /// Largest absolute coordinate difference.
    pub fn max_abs_diff(&self, other: &DispatchVector) -> f64 {
        self.coords()
            .iter()
            .zip(other.coords())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Commitment and dispatch realized at one period; the state handed to the
/// next period's decision.
#[derive(Clone, Debug, PartialEq)]
pub struct SystemState {
    pub commitment: CommitmentVector,
    pub dispatch: DispatchVector,
}

impl SystemState {
    pub fn new(commitment: CommitmentVector, dispatch: DispatchVector) -> Self {
        Self { commitment, dispatch }
    }
}

/// Immutable problem instance.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub units: Vec<ThermalUnitParams>,
    pub dg: VirtualResourceParams,
    pub dr: VirtualResourceParams,
    pub cet: CetParams,
    pub eta_max: f64,
    pub periods: Vec<PeriodExogenous>,
    pub initial_dispatch: DispatchVector,
    pub initial_commitment: CommitmentVector,
    pub ramp_enforced: bool,
}

/// One violated invariant: the offending field and the rule it breaks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub field: String,
    pub rule: String,
}

impl Violation {
    fn new(field: impl Into<String>, rule: impl Into<String>) -> Self {
        Self { field: field.into(), rule: rule.into() }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.rule)
    }
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("missing required field `{field}` (line {line})")]
    MissingField { field: String, line: usize },
    #[error("{field}: expected {expected} entries, found {found}")]
    Dimension { field: String, expected: usize, found: usize },
    #[error("invalid scenario: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
    #[error("cannot read scenario: {0}")]
    Io(#[from] std::io::Error),
}

impl Scenario {
    pub fn n_units(&self) -> usize {
        self.units.len()
    }

    pub fn horizon(&self) -> usize {
        self.periods.len()
    }

    /// Exogenous data at period `t` (1-based).
    pub fn period(&self, t: usize) -> &PeriodExogenous {
        &self.periods[t - 1]
    }

    pub fn has_dg(&self) -> bool {
        self.periods.iter().any(|p| p.dg_max > 0.0)
    }

    pub fn has_dr(&self) -> bool {
        self.periods.iter().any(|p| p.dr_max > 0.0)
    }

    pub fn initial_state(&self) -> SystemState {
        SystemState::new(self.initial_commitment.clone(), self.initial_dispatch.clone())
    }

    /// The quota rebate `-sum_n Q_n * p_e`, applied once per horizon.
    pub fn quota_rebate(&self) -> f64 {
        -self.units.iter().map(|u| u.quota).sum::<f64>() * self.cet.price
    }

    /// Content hash of the canonical serialization.
    pub fn fingerprint(&self) -> String {
        hex::encode(Sha256::digest(self.to_document().as_bytes()))
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path)?;
        parse_scenario(&text)
    }

    /// Canonical scenario document (reserves always explicit).
    pub fn to_document(&self) -> String {
        let doc = ScenarioDoc {
            eta_max: self.eta_max,
            options: OptionsDoc { ramp_enforced: self.ramp_enforced, reserve_fraction: None },
            cet: self.cet.clone(),
            dg: CostDoc { a: self.dg.a, b: self.dg.b, c: self.dg.c },
            dr: CostDoc { a: self.dr.a, b: self.dr.b, c: self.dr.c },
            initial: InitialDoc {
                commitment: self.initial_commitment.to_string(),
                thermal: self.initial_dispatch.thermal.clone(),
                dg: self.initial_dispatch.dg,
                dr: self.initial_dispatch.dr,
            },
            units: self.units.clone(),
            periods: self
                .periods
                .iter()
                .map(|p| PeriodDoc {
                    demand: p.demand,
                    dg_max: p.dg_max,
                    dr_max: p.dr_max,
                    reserve_lo: Some(p.reserve_lo),
                    reserve_hi: Some(p.reserve_hi),
                })
                .collect(),
        };
        toml::to_string(&doc).expect("scenario documents always serialize")
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioDoc {
    eta_max: f64,
    #[serde(default)]
    options: OptionsDoc,
    #[serde(default)]
    cet: CetParams,
    dg: CostDoc,
    dr: CostDoc,
    initial: InitialDoc,
    #[serde(default)]
    units: Vec<ThermalUnitParams>,
    #[serde(default)]
    periods: Vec<PeriodDoc>,
}

#[derive(Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OptionsDoc {
    #[serde(default)]
    ramp_enforced: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    reserve_fraction: Option<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CostDoc {
    a: f64,
    b: f64,
    c: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InitialDoc {
    commitment: String,
    thermal: Vec<f64>,
    #[serde(default)]
    dg: f64,
    #[serde(default)]
    dr: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PeriodDoc {
    demand: f64,
    #[serde(default)]
    dg_max: f64,
    #[serde(default)]
    dr_max: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    reserve_lo: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    reserve_hi: Option<f64>,
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let prefix = &text[..offset.min(text.len())];
    let line = prefix.matches('\n').count() + 1;
    let column = prefix.len() - prefix.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, column)
}

/// Parses and validates a scenario document.
pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let doc: ScenarioDoc = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((0, 0), |s| line_col(text, s.start));
        let message = e.message().to_string();
        match message.strip_prefix("missing field `") {
            Some(rest) => missing_field(rest, line, column, &message),
            None => ScenarioError::Syntax { line, column, message },
        }
    })?;

    let n = doc.units.len();
    let initial_commitment = CommitmentVector::parse_bits(&doc.initial.commitment).ok_or_else(|| {
        ScenarioError::Syntax {
            line: 0,
            column: 0,
            message: format!(
                "initial.commitment: `{}` is not a bitstring",
                doc.initial.commitment
            ),
        }
    })?;
    if initial_commitment.len() != n {
        return Err(ScenarioError::Dimension {
            field: "initial.commitment".into(),
            expected: n,
            found: initial_commitment.len(),
        });
    }
    if doc.initial.thermal.len() != n {
        return Err(ScenarioError::Dimension {
            field: "initial.thermal".into(),
            expected: n,
            found: doc.initial.thermal.len(),
        });
    }

    let fraction = doc.options.reserve_fraction;
    let mut periods = Vec::with_capacity(doc.periods.len());
    for p in &doc.periods {
        let expand = |explicit: Option<f64>| match (explicit, fraction) {
            (Some(v), _) => v,
            (None, Some(f)) => f * p.demand,
            (None, None) => 0.0,
        };
        periods.push(PeriodExogenous {
            demand: p.demand,
            dg_max: p.dg_max,
            dr_max: p.dr_max,
            reserve_lo: expand(p.reserve_lo),
            reserve_hi: expand(p.reserve_hi),
        });
    }

    let scenario = Scenario {
        units: doc.units,
        dg: VirtualResourceParams::new(VirtualRole::Dg, doc.dg.a, doc.dg.b, doc.dg.c),
        dr: VirtualResourceParams::new(VirtualRole::Dr, doc.dr.a, doc.dr.b, doc.dr.c),
        cet: doc.cet,
        eta_max: doc.eta_max,
        periods,
        initial_dispatch: DispatchVector::new(doc.initial.thermal, doc.initial.dg, doc.initial.dr),
        initial_commitment,
        ramp_enforced: doc.options.ramp_enforced,
    };
    let violations = validate_scenario(&scenario);
    if violations.is_empty() {
        Ok(scenario)
    } else {
        Err(ScenarioError::Invalid(violations))
    }
}

fn missing_field(rest: &str, line: usize, column: usize, message: &str) -> ScenarioError {
    match rest.split('`').next() {
        Some(field) if !field.is_empty() => {
            ScenarioError::MissingField { field: field.to_string(), line }
        }
        _ => ScenarioError::Syntax { line, column, message: message.to_string() },
    }
}

/// Checks every type invariant; the list is empty iff the scenario is valid.
pub fn validate_scenario(s: &Scenario) -> Vec<Violation> {
    let mut out = Vec::new();
    let n = s.units.len();
    if n == 0 {
        out.push(Violation::new("units", "at least one thermal unit is required"));
    }
    for (i, u) in s.units.iter().enumerate() {
        let f = |name: &str| format!("units[{i}].{name}");
        let all = [
            ("a", u.a),
            ("b", u.b),
            ("c", u.c),
            ("p_min", u.p_min),
            ("p_max", u.p_max),
            ("c_bank", u.c_bank),
            ("c_fix", u.c_fix),
            ("c_shut", u.c_shut),
            ("alpha", u.alpha),
            ("beta", u.beta),
            ("gamma", u.gamma),
            ("quota", u.quota),
        ];
        for (name, v) in all {
            if !v.is_finite() {
                out.push(Violation::new(f(name), "must be finite"));
            }
        }
        if !(u.a > 0.0) {
            out.push(Violation::new(f("a"), "must be > 0 (strict convexity)"));
        }
        if !(u.p_min >= 0.0) {
            out.push(Violation::new(f("p_min"), "must be >= 0"));
        }
        if !(u.p_min <= u.p_max) {
            out.push(Violation::new(f("p_max"), "must be >= p_min"));
        }
        for (name, v) in [("ramp_down", u.ramp_down), ("ramp_up", u.ramp_up)] {
            if let Some(v) = v {
                if !(v >= 0.0) {
                    out.push(Violation::new(f(name), "must be >= 0 when present"));
                }
            }
        }
        for (name, v) in [("c_bank", u.c_bank), ("c_fix", u.c_fix), ("c_shut", u.c_shut)] {
            if !(v >= 0.0) {
                out.push(Violation::new(f(name), "must be >= 0"));
            }
        }
        if !(u.alpha >= 0.0) {
            out.push(Violation::new(f("alpha"), "must be >= 0"));
        }
    }
    for (name, v) in [("dg", &s.dg), ("dr", &s.dr)] {
        if !(v.a > 0.0) || !v.a.is_finite() {
            out.push(Violation::new(format!("{name}.a"), "must be > 0 (strict convexity)"));
        }
        if !v.b.is_finite() || !v.c.is_finite() {
            out.push(Violation::new(name, "coefficients must be finite"));
        }
    }
    if !(s.cet.price >= 0.0) || !s.cet.price.is_finite() {
        out.push(Violation::new("cet.price", "must be >= 0"));
    }
    if !(s.eta_max > 0.0 && s.eta_max <= 1.0) {
        out.push(Violation::new("eta_max", "must lie in (0,1]"));
    }
    if s.periods.is_empty() {
        out.push(Violation::new("periods", "horizon must be ≥ 1"));
    }
    for (k, p) in s.periods.iter().enumerate() {
        let fields = [
            ("demand", p.demand),
            ("dg_max", p.dg_max),
            ("dr_max", p.dr_max),
            ("reserve_lo", p.reserve_lo),
            ("reserve_hi", p.reserve_hi),
        ];
        for (name, v) in fields {
            if !(v >= 0.0) || !v.is_finite() {
                out.push(Violation::new(format!("periods[{k}].{name}"), "must be finite and >= 0"));
            }
        }
    }
    if s.initial_commitment.len() != n {
        out.push(Violation::new("initial.commitment", format!("must have {n} entries")));
    }
    if s.initial_dispatch.thermal.len() != n {
        out.push(Violation::new("initial.thermal", format!("must have {n} entries")));
    }
    if s.initial_dispatch.coords().iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        out.push(Violation::new("initial", "dispatch entries must be finite and >= 0"));
    }
    out
}
