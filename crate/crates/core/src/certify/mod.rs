//! Verification of sub-barrier (CSBC) and barrier (CBC) certificates by sampled
//! falsification and interval branch-and-bound, plus the additive-to-max gain conversion.

pub mod bnb;
mod cbc;
mod checks;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use bnb::{BnbConfig, BnbOutcome, BoxCheck};
pub use cbc::verify_cbc;
pub use checks::Check;

use crate::error::{Error, Result};
use crate::par::Exec;
use crate::poly::{CompiledPoly, Interval, IntervalBox, Polynomial, EPS_NUM};
use crate::system::{InputSet, Subsystem};

/// Linear class-K∞ gain φ(s) = slope·s (slope 0 encodes the zero function).
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LinearGain(pub f64);

impl LinearGain {
    pub fn slope(self) -> f64 {
        self.0
    }
    pub fn apply(self, s: f64) -> f64 {
        self.0 * s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableCell {
    pub region: IntervalBox,
    pub input: Vec<f64>,
}

/// Local controller attached to a certificate.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Controller {
    /// The subsystem has no external inputs, or the input is chosen per box at verification time.
    #[default]
    None,
    /// State feedback u = ν(x), one polynomial per input coordinate.
    Polynomial { components: Vec<Polynomial> },
    /// Piecewise-constant feedback over state cells (finite input sets).
    Table { cells: Vec<TableCell> },
}

impl Controller {
    pub fn polynomial(components: Vec<Polynomial>) -> Self {
        Controller::Polynomial { components }
    }

    pub fn compile(&self, state_vars: &[String]) -> Result<CompiledController> {
        Ok(match self {
            Controller::None => CompiledController::None,
            Controller::Polynomial { components } => CompiledController::Poly(
                components.iter().map(|c| CompiledPoly::new(c, state_vars)).collect::<Result<_>>()?,
            ),
            Controller::Table { cells } => CompiledController::Table(
                cells
                    .iter()
                    .map(|c| {
                        let b = c.region.project(state_vars).ok_or_else(|| {
                            Error::Model(format!("controller cell does not cover state variables {state_vars:?}"))
                        })?;
                        Ok((b.intervals().to_vec(), c.input.clone()))
                    })
                    .collect::<Result<_>>()?,
            ),
        })
    }

    /// Distinct input vectors of a table controller, in first-seen order.
    pub fn table_inputs(&self) -> Vec<Vec<f64>> {
        let mut out: Vec<Vec<f64>> = Vec::new();
        if let Controller::Table { cells } = self {
            for c in cells {
                if !out.contains(&c.input) {
                    out.push(c.input.clone());
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug)]
pub enum CompiledController {
    None,
    Poly(Vec<CompiledPoly>),
    Table(Vec<(Vec<Interval>, Vec<f64>)>),
}

impl CompiledController {
    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        match self {
            CompiledController::None => Vec::new(),
            CompiledController::Poly(cs) => cs.iter().map(|c| c.eval(x)).collect(),
            CompiledController::Table(cells) => {
                if let Some((_, u)) = cells.iter().find(|(b, _)| b.iter().zip(x).all(|(iv, v)| iv.contains(*v))) {
                    return u.clone();
                }
                // Outside every cell (only off X): nearest cell in the max-norm.
                let dist = |b: &[Interval]| {
                    b.iter().zip(x).map(|(iv, v)| (iv.lo - v).max(v - iv.hi).max(0.0)).fold(0.0, f64::max)
                };
                cells
                    .iter()
                    .min_by(|a, b| dist(&a.0).total_cmp(&dist(&b.0)))
                    .map(|(_, u)| u.clone())
                    .unwrap_or_default()
            }
        }
    }
}

/// Control sub-barrier certificate for one subsystem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CsbcRecord {
    pub subsystem: String,
    pub barrier: Polynomial,
    #[serde(default)]
    pub controller: Controller,
    pub eta: f64,
    pub beta: f64,
    pub c: f64,
    pub alpha: LinearGain,
    pub kappa: LinearGain,
    pub rho: LinearGain,
    /// X_0 as a union of boxes.
    pub init: Vec<IntervalBox>,
    /// X_u as a union of boxes.
    #[serde(rename = "unsafe")]
    pub unsafe_set: Vec<IntervalBox>,
    #[serde(default)]
    pub provenance: String,
}

impl CsbcRecord {
    /// Constant and gain domain checks of the definition.
    pub fn constant_checks(&self) -> Vec<ArithmeticCheck> {
        let k = self.kappa.0;
        vec![
            ArithmeticCheck::new("eta >= 0", self.eta >= 0.0, format!("eta = {}", self.eta)),
            ArithmeticCheck::new("beta > 0", self.beta > 0.0, format!("beta = {}", self.beta)),
            ArithmeticCheck::new("c >= 0", self.c >= 0.0, format!("c = {}", self.c)),
            ArithmeticCheck::new("0 < kappa < 1", k > 0.0 && k < 1.0, format!("kappa = {k}")),
            ArithmeticCheck::new("alpha > 0", self.alpha.0 > 0.0, format!("alpha = {}", self.alpha.0)),
            ArithmeticCheck::new("rho >= 0", self.rho.0 >= 0.0, format!("rho = {}", self.rho.0)),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        match self.constant_checks().into_iter().find(|c| !c.holds) {
            Some(c) => Err(Error::Domain(format!("certificate `{}`: {} violated ({})", self.subsystem, c.name, c.detail))),
            None => Ok(()),
        }
    }

    pub fn gains(&self) -> (f64, f64, f64) {
        (self.kappa.0, self.rho.0, self.c)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let r: CsbcRecord = serde_json::from_str(s)?;
        Ok(r)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// (κ̂, ρ̂, c) of the max-form condition.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaxGains {
    pub kappa: f64,
    pub rho: f64,
    pub c: f64,
}

/// Convert additive drift E ≤ κ̄B + ρ̄‖w‖² + c̄ into the max form with linear
/// π(s)=θs, π̄(s)=θ̄s and δ̄(s)=ds.
pub fn additive_to_max(kappa_bar: f64, rho_bar: f64, c_bar: f64, theta: f64, theta_bar: f64, d: f64) -> Result<MaxGains> {
    if !(kappa_bar > 0.0 && kappa_bar < 1.0) {
        return Err(Error::Domain(format!("kappa_bar = {kappa_bar} must lie in (0,1)")));
    }
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::Domain(format!("theta = {theta} must lie in (0,1)")));
    }
    if !(theta_bar > 1.0) {
        return Err(Error::Domain(format!("theta_bar = {theta_bar} must exceed 1")));
    }
    if !(d > 0.0) {
        return Err(Error::Domain(format!("d = {d} must be positive")));
    }
    if !(rho_bar >= 0.0 && c_bar >= 0.0) {
        return Err(Error::Domain("rho_bar and c_bar must be non-negative".into()));
    }
    let one_k = 1.0 - kappa_bar;
    Ok(MaxGains {
        kappa: 1.0 - (1.0 - theta) * one_k,
        rho: (1.0 + d) * rho_bar * theta_bar / (one_k * theta),
        c: (1.0 + 1.0 / d) * theta_bar * c_bar / (one_k * theta * (theta_bar - 1.0)),
    })
}

/// E[B(f(x, u, w, ς))] as a polynomial in the remaining (non-noise) variables.
pub fn expected_barrier(barrier: &Polynomial, sub: &Subsystem) -> Result<Polynomial> {
    let states = sub.state_vars();
    if states.len() != sub.dynamics.len() {
        return Err(Error::Model(format!("subsystem `{}` has mismatched dynamics", sub.name)));
    }
    let subst: BTreeMap<String, Polynomial> = states.into_iter().zip(sub.dynamics.iter().cloned()).collect();
    barrier.substitute(&subst).expectation(&sub.noise)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VerifyMode {
    Sampled { samples: usize, seed: u64 },
    Rigorous { budget: usize, width_floor: f64 },
}

impl VerifyMode {
    pub fn sampled(samples: usize) -> Self {
        VerifyMode::Sampled { samples, seed: 0 }
    }
    pub fn rigorous() -> Self {
        let d = BnbConfig::default();
        VerifyMode::Rigorous { budget: d.budget, width_floor: d.width_floor }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    pub mode: VerifyMode,
    pub epsilon: f64,
    #[serde(skip, default)]
    pub exec: Exec,
}

impl VerifyOptions {
    pub fn new(mode: VerifyMode) -> Self {
        VerifyOptions { mode, epsilon: EPS_NUM, exec: Exec::default() }
    }
    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Status {
    /// Proven by interval branch-and-bound.
    Verified,
    /// No violation among the samples.
    Passed,
    /// Concrete point where the inequality fails by more than ε.
    Falsified { witness: Vec<f64>, violation: f64 },
    /// Budget or width floor reached with undecided boxes (first few listed).
    Exhausted { frontier: Vec<Vec<Interval>>, undecided: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub condition: String,
    pub part: String,
    pub vars: Vec<String>,
    #[serde(flatten)]
    pub status: Status,
    pub boxes: usize,
    pub samples: usize,
    /// Violating samples (sampled mode).
    pub violations: usize,
    /// Largest violation seen among samples (negative means slack).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub max_violation: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArithmeticCheck {
    pub name: String,
    pub holds: bool,
    pub detail: String,
}

impl ArithmeticCheck {
    pub fn new(name: &str, holds: bool, detail: String) -> Self {
        ArithmeticCheck { name: name.into(), holds, detail }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Falsified,
    Inconclusive,
    Passed,
    Verified,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub subject: String,
    pub mode: VerifyMode,
    pub epsilon: f64,
    pub verdict: Verdict,
    pub arithmetic: Vec<ArithmeticCheck>,
    pub conditions: Vec<ConditionReport>,
    /// Piecewise-constant controller found for a finite input set (rigorous mode).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub synthesized_controller: Option<Controller>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub notes: Vec<String>,
}

impl VerificationReport {
    fn compute_verdict(&self) -> Verdict {
        let mut v = Verdict::Verified;
        if self.arithmetic.iter().any(|a| !a.holds) {
            return Verdict::Falsified;
        }
        for c in &self.conditions {
            let cv = match c.status {
                Status::Verified => Verdict::Verified,
                Status::Passed => Verdict::Passed,
                Status::Falsified { .. } => Verdict::Falsified,
                Status::Exhausted { .. } => Verdict::Inconclusive,
            };
            v = v.min(cv);
        }
        v
    }

    pub fn finish(mut self) -> Self {
        self.verdict = self.compute_verdict();
        self
    }

    pub fn first_falsified(&self) -> Option<&ConditionReport> {
        self.conditions.iter().find(|c| matches!(c.status, Status::Falsified { .. }))
    }

    pub fn at_least(&self, v: Verdict) -> bool {
        self.verdict >= v
    }
}

pub(crate) fn run_check(check: &Check, opts: &VerifyOptions, record_cells: bool) -> (ConditionReport, Vec<(Vec<Interval>, usize)>) {
    run_obligation(check, &check.condition, &check.part, &check.vars, &check.root, opts, record_cells)
}

pub(crate) fn run_obligation<C: BoxCheck + ?Sized>(
    check: &C,
    condition: &str,
    part: &str,
    vars: &[String],
    root: &[Interval],
    opts: &VerifyOptions,
    record_cells: bool,
) -> (ConditionReport, Vec<(Vec<Interval>, usize)>) {
    let mut rep = ConditionReport {
        condition: condition.to_string(),
        part: part.to_string(),
        vars: vars.to_vec(),
        status: Status::Verified,
        boxes: 0,
        samples: 0,
        violations: 0,
        max_violation: None,
    };
    match &opts.mode {
        VerifyMode::Sampled { samples, seed } => {
            let s = bnb::sample_check(check, root, *samples, *seed, opts.epsilon, opts.exec);
            rep.samples = s.samples;
            rep.violations = s.violations;
            rep.max_violation = Some(s.max_violation);
            rep.status = match s.witness {
                Some((witness, violation)) => Status::Falsified { witness, violation },
                None => Status::Passed,
            };
            (rep, Vec::new())
        }
        VerifyMode::Rigorous { budget, width_floor } => {
            let cfg = BnbConfig { budget: *budget, width_floor: *width_floor, epsilon: opts.epsilon, exec: opts.exec, ..Default::default() };
            let run = cfg.run(check, root.to_vec(), None, record_cells);
            rep.boxes = run.boxes;
            rep.status = match run.outcome {
                BnbOutcome::Verified => Status::Verified,
                BnbOutcome::Falsified { witness, violation } => Status::Falsified { witness, violation },
                BnbOutcome::Exhausted { frontier } => {
                    let undecided = frontier.len();
                    Status::Exhausted { frontier: frontier.into_iter().take(16).collect(), undecided }
                }
            };
            (rep, run.cells)
        }
    }
}

/// Obligations (5)–(8) of a CSBC for `sub`.
pub fn csbc_checks(record: &CsbcRecord, sub: &Subsystem, epsilon: f64) -> Result<Vec<Check>> {
    let xs = sub.state_vars();
    let xroot = sub.states.intervals().to_vec();
    let b = &record.barrier;
    let mut checks = Vec::new();
    for (j, h) in sub.output_coordinates().iter().enumerate() {
        let g = b.sub(&h.pow(2).scale(record.alpha.0));
        checks.push(Check::at_least("5", format!("h[{j}] = {h}"), &g, 0.0, xs.clone(), xroot.clone(), epsilon)?);
    }
    for (k, bx) in record.init.iter().enumerate() {
        let bx = region_on(bx, &xs, "X_0")?;
        checks.push(Check::at_most("6", format!("X_0[{k}]"), b, record.eta, xs.clone(), bx, epsilon)?);
    }
    for (k, bx) in record.unsafe_set.iter().enumerate() {
        let bx = region_on(bx, &xs, "X_u")?;
        checks.push(Check::at_least("7", format!("X_u[{k}]"), b, record.beta, xs.clone(), bx, epsilon)?);
    }
    checks.push(drift_obligation(record, sub, epsilon)?);
    Ok(checks)
}

fn region_on(b: &IntervalBox, vars: &[String], what: &str) -> Result<Vec<Interval>> {
    b.project(vars)
        .map(|p| p.intervals().to_vec())
        .ok_or_else(|| Error::RegionMismatch(format!("{what} box does not cover state variables {vars:?}")))
}

fn drift_obligation(record: &CsbcRecord, sub: &Subsystem, epsilon: f64) -> Result<Check> {
    let gains = record.gains();
    let b = &record.barrier;
    if sub.input_vars().is_empty() {
        return checks::drift_check(&expected_barrier(b, sub)?, b, sub, gains, epsilon);
    }
    let fixed = |inputs: &[Vec<f64>]| -> Result<Vec<Polynomial>> {
        let open = expected_barrier(b, sub)?;
        inputs
            .iter()
            .map(|u| {
                let subst: BTreeMap<String, Polynomial> =
                    sub.input_vars().into_iter().zip(u.iter().map(|v| Polynomial::constant(*v))).collect();
                Ok(open.substitute(&subst))
            })
            .collect()
    };
    match (&record.controller, &sub.inputs) {
        (Controller::Polynomial { components }, _) => {
            let closed = sub.close_loop(components)?;
            checks::drift_check(&expected_barrier(b, &closed)?, b, &closed, gains, epsilon)
        }
        (Controller::Table { cells }, _) => {
            let inputs = record.controller.table_inputs();
            let xs = sub.state_vars();
            let selector = cells
                .iter()
                .map(|c| Ok((region_on(&c.region, &xs, "controller cell")?, inputs.iter().position(|u| *u == c.input).unwrap())))
                .collect::<Result<Vec<_>>>()?;
            checks::finite_drift_check(&fixed(&inputs)?, b, sub, gains, epsilon, Some(selector), "table controller".into())
        }
        (Controller::None, InputSet::Finite { values, .. }) => {
            checks::finite_drift_check(&fixed(values)?, b, sub, gains, epsilon, None, format!("exists u in {} inputs", values.len()))
        }
        (Controller::None, InputSet::Box { .. }) => Err(Error::MissingController(format!(
            "certificate `{}` needs a controller for the continuous input set",
            record.subsystem
        ))),
    }
}

/// Check conditions (5)–(8) of a CSBC for `sub`.
pub fn verify_csbc(record: &CsbcRecord, sub: &Subsystem, opts: &VerifyOptions) -> Result<VerificationReport> {
    let mut arithmetic = record.constant_checks();
    for (k, b) in record.init.iter().enumerate() {
        arithmetic.push(ArithmeticCheck::new(&format!("X_0[{k}] within X"), sub.states.contains_box(b), b.to_string()));
    }
    for (k, b) in record.unsafe_set.iter().enumerate() {
        arithmetic.push(ArithmeticCheck::new(&format!("X_u[{k}] within X"), sub.states.contains_box(b), b.to_string()));
    }
    if let Controller::Table { cells } = &record.controller {
        let regions: Vec<IntervalBox> = cells.iter().map(|c| c.region.clone()).collect();
        arithmetic.push(ArithmeticCheck::new(
            "controller cells cover X",
            crate::poly::covered_by_union(&sub.states, &regions),
            format!("{} cells", cells.len()),
        ));
    }
    let checks = csbc_checks(record, sub, opts.epsilon)?;
    let mut conditions = Vec::with_capacity(checks.len());
    let mut synthesized = None;
    for check in &checks {
        let record_cells = check.is_finite_input() && record.controller == Controller::None;
        let (rep, cells) = run_check(check, opts, record_cells);
        if record_cells && rep.status == Status::Verified {
            if let InputSet::Finite { values, .. } = &sub.inputs {
                synthesized = Some(Controller::Table {
                    cells: cells
                        .into_iter()
                        .map(|(b, u)| TableCell {
                            region: IntervalBox::from_intervals(check.vars.clone(), b),
                            input: values[u].clone(),
                        })
                        .collect(),
                });
            }
        }
        conditions.push(rep);
    }
    Ok(VerificationReport {
        subject: record.subsystem.clone(),
        mode: opts.mode.clone(),
        epsilon: opts.epsilon,
        verdict: Verdict::Verified,
        arithmetic,
        conditions,
        synthesized_controller: synthesized,
        notes: Vec::new(),
    }
    .finish())
}

/// Re-evaluate a reported witness: the violation of the named obligation at `point`.
pub fn reevaluate(record: &CsbcRecord, sub: &Subsystem, condition: &str, part: &str, point: &[f64], epsilon: f64) -> Result<f64> {
    let checks = csbc_checks(record, sub, epsilon)?;
    let c = checks
        .iter()
        .find(|c| c.condition == condition && c.part == part)
        .ok_or_else(|| Error::Domain(format!("no obligation ({condition}) `{part}`")))?;
    Ok(c.violation(point))
}
