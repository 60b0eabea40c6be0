//! Counterexample-guided synthesis of sub-barrier certificates and local controllers.

mod lp;
mod problem;
mod refit;

use std::sync::atomic::{AtomicUsize, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

pub use lp::{candidate, LpSettings, Samples};
pub use problem::{monomial_basis, Coefficients, Normalizer, Problem};
pub use refit::{choose_inputs, refit_controller};

use crate::certify::{
    additive_to_max, verify_csbc, ConditionReport, Controller, CsbcRecord, LinearGain, Status, Verdict, VerificationReport,
    VerifyMode, VerifyOptions,
};
use crate::error::{Error, Result};
use crate::par::Exec;
use crate::poly::{Interval, IntervalBox, EPS_NUM};
use crate::system::{InputSet, Subsystem};

/// Parameters of the additive-to-max conversion.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Conversion {
    pub theta: f64,
    pub theta_bar: f64,
    pub d: f64,
}

impl Default for Conversion {
    fn default() -> Self {
        Conversion { theta: 0.5, theta_bar: 2.0, d: 1.0 }
    }
}

impl Conversion {
    /// c = factor · c̄.
    pub fn c_factor(&self, kappa_bar: f64) -> f64 {
        (1.0 + 1.0 / self.d) * self.theta_bar / ((1.0 - kappa_bar) * self.theta * (self.theta_bar - 1.0))
    }

    /// ρ̂ = factor · ρ̄.
    pub fn rho_factor(&self, kappa_bar: f64) -> f64 {
        (1.0 + self.d) * self.theta_bar / ((1.0 - kappa_bar) * self.theta)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Objective {
    /// Minimize η (β is fixed to 1); c̄ carries a small weight.
    Margin,
    /// Minimize the first-order bound η + T·c at the given horizon.
    Bound { horizon: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CegisConfig {
    pub barrier_degree: u32,
    pub controller_degree: u32,
    /// Additive decay rates κ̄ tried in order.
    pub kappa_grid: Vec<f64>,
    pub conversions: Vec<Conversion>,
    /// Upper limit on the converted gain ratio ρ̂/α̂.
    pub gain_ratio: f64,
    pub init_samples: usize,
    pub unsafe_samples: usize,
    pub state_samples: usize,
    pub drift_samples: usize,
    pub max_rounds: usize,
    /// LP / controller-refit alternations per round (continuous inputs).
    pub alternations: usize,
    pub neighbours: usize,
    pub refit_iters: u64,
    pub verify: VerifyMode,
    pub epsilon: f64,
    pub objective: Objective,
    /// Unsafe samples must reach 1 + slack.
    pub slack: f64,
    /// Upper limit on η (β is 1); keeps the LP away from flat barriers.
    pub eta_max: f64,
    /// Absolute LP tightening of (5), (6) and the drift condition.
    pub margin: f64,
    pub seed: u64,
    #[serde(skip)]
    pub exec: Exec,
}

impl Default for CegisConfig {
    fn default() -> Self {
        CegisConfig {
            barrier_degree: 2,
            controller_degree: 1,
            kappa_grid: vec![0.8, 0.9, 0.95, 0.98, 0.99],
            conversions: vec![Conversion { theta: 0.9, theta_bar: 10.0, d: 10.0 }, Conversion::default()],
            gain_ratio: 0.99,
            init_samples: 8,
            unsafe_samples: 32,
            state_samples: 64,
            drift_samples: 256,
            max_rounds: 10,
            alternations: 3,
            neighbours: 32,
            refit_iters: 300,
            verify: VerifyMode::rigorous(),
            epsilon: EPS_NUM,
            objective: Objective::Bound { horizon: 10 },
            slack: 1e-3,
            eta_max: 0.5,
            margin: 1e-4,
            seed: 0,
            exec: Exec::default(),
        }
    }
}

impl CegisConfig {
    fn cells(&self) -> Vec<(f64, Conversion)> {
        self.kappa_grid.iter().flat_map(|k| self.conversions.iter().map(move |c| (*k, *c))).collect()
    }

    fn target(&self) -> Verdict {
        match self.verify {
            VerifyMode::Rigorous { .. } => Verdict::Verified,
            VerifyMode::Sampled { .. } => Verdict::Passed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kappa_grid.iter().any(|k| !(*k > 0.0 && *k < 1.0)) {
            return Err(Error::Synthesis("kappa grid entries must lie in (0, 1)".into()));
        }
        for c in &self.conversions {
            if !(c.theta > 0.0 && c.theta < 1.0 && c.theta_bar > 1.0 && c.d > 0.0) {
                return Err(Error::Synthesis(format!("invalid conversion parameters {c:?}")));
            }
        }
        if !(self.eta_max > 0.0 && self.eta_max < 1.0) {
            return Err(Error::Synthesis("eta_max must lie in (0, 1)".into()));
        }
        if self.init_samples == 0 || self.unsafe_samples == 0 {
            return Err(Error::Synthesis("need at least one sample per region".into()));
        }
        Ok(())
    }
}

/// A verifier witness turned into synthesis feedback.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Counterexample {
    pub condition: String,
    pub part: String,
    pub vars: Vec<String>,
    pub witness: Vec<f64>,
    pub violation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundLog {
    pub round: usize,
    /// Sample counts: X_0, X_u, X, X×W.
    pub samples: [usize; 4],
    pub lp: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_bar: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub controller_cost: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verdict: Option<Verdict>,
    pub counterexamples: Vec<Counterexample>,
    /// Per counterexample: the candidate violates the matching LP constraint there.
    pub previous_violates: Vec<bool>,
    pub undecided_boxes: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellJournal {
    pub cell: usize,
    pub kappa_bar: f64,
    pub conversion: Conversion,
    pub outcome: String,
    pub rounds: Vec<RoundLog>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Synthesis {
    pub subsystem: String,
    /// Verified record, or the last candidate of the first cell when synthesis failed.
    pub record: Option<CsbcRecord>,
    pub report: Option<VerificationReport>,
    pub success: bool,
    pub cell: Option<usize>,
    pub journal: Vec<CellJournal>,
}

impl Synthesis {
    pub fn into_record(self) -> Result<CsbcRecord> {
        match (self.success, self.record) {
            (true, Some(r)) => Ok(r),
            _ => {
                let last: Vec<String> = self.journal.iter().map(|c| format!("cell {}: {}", c.cell, c.outcome)).collect();
                Err(Error::Synthesis(format!("no certificate for `{}` ({})", self.subsystem, last.join("; "))))
            }
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

fn uniform(rng: &mut ChaCha8Rng, b: &[Interval]) -> Vec<f64> {
    b.iter().map(|iv| if iv.width() > 0.0 { rng.random_range(iv.lo..=iv.hi) } else { iv.lo }).collect()
}

fn seed_region(rng: &mut ChaCha8Rng, boxes: &[IntervalBox], per_box: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for b in boxes {
        out.extend(b.corners());
        out.push(b.center());
        for _ in 0..per_box {
            out.push(uniform(rng, b.intervals()));
        }
    }
    out
}

fn clamp_into(x: &mut [f64], b: &[Interval]) {
    for (v, iv) in x.iter_mut().zip(b) {
        *v = v.clamp(iv.lo, iv.hi);
    }
}

struct Cell<'a> {
    sub: &'a Subsystem,
    p: &'a Problem,
    init: &'a [IntervalBox],
    unsafe_set: &'a [IntervalBox],
    cfg: &'a CegisConfig,
    kappa_bar: f64,
    conv: Conversion,
}

struct Candidate {
    coef: Coefficients,
    ctrl: Vec<f64>,
    cost: Option<f64>,
}

impl Cell<'_> {
    fn lp_settings(&self) -> LpSettings {
        let factor = self.conv.c_factor(self.kappa_bar);
        let c_weight = match self.cfg.objective {
            Objective::Margin => 1e-3 * factor,
            Objective::Bound { horizon } => horizon as f64 * factor,
        };
        LpSettings {
            kappa_bar: self.kappa_bar,
            ratio: self.cfg.gain_ratio / self.conv.rho_factor(self.kappa_bar),
            c_weight,
            slack: self.cfg.slack,
            eta_max: self.cfg.eta_max,
            margin: self.cfg.margin,
        }
    }

    fn applied_inputs(&self, samples: &Samples, ctrl: &[f64]) -> Vec<Vec<f64>> {
        samples.drift.iter().map(|s| self.p.controller(ctrl, s)).collect()
    }

    /// Starting barrier for the first input choice: squared distance to the X_0 center.
    fn seed_coefficients(&self) -> Coefficients {
        let c0 = self.p.norm.z(&self.init[0].center());
        let b = self
            .p
            .basis
            .iter()
            .map(|m| {
                let f = m.factors();
                match f {
                    [] => c0.iter().map(|c| c * c).sum(),
                    [(v, 1)] => -2.0 * c0[self.p.norm.vars.iter().position(|n| n == v).unwrap()],
                    [(_, 2)] => 1.0,
                    _ => 0.0,
                }
            })
            .collect();
        Coefficients { b, eta: 0.0, c_bar: 0.0, alpha: 0.0, rho_bar: 0.0 }
    }

    fn initial_controller(&self) -> Vec<f64> {
        let InputSet::Box { bounds } = &self.sub.inputs else { return Vec::new() };
        let n = self.p.ctrl_basis.len();
        let mut a = vec![0.0; bounds.dim() * n];
        for (j, iv) in bounds.intervals().iter().enumerate() {
            a[j * n] = iv.mid();
        }
        a
    }

    fn solve(&self, samples: &Samples, prev: Option<&Candidate>) -> Result<Option<Candidate>> {
        let settings = self.lp_settings();
        let mut ctrl = prev.map(|c| c.ctrl.clone()).unwrap_or_else(|| self.initial_controller());
        let seed = self.seed_coefficients();
        let mut cost = None;
        match &self.sub.inputs {
            InputSet::Finite { values, .. } => {
                let guide = prev.map(|c| &c.coef).unwrap_or(&seed);
                let choice = choose_inputs(self.p, guide, self.kappa_bar, &samples.drift, values);
                let inputs: Vec<Vec<f64>> = choice.iter().map(|k| values[*k].clone()).collect();
                Ok(candidate(self.p, samples, &inputs, &settings)?.map(|coef| Candidate { coef, ctrl, cost }))
            }
            InputSet::Box { bounds } => {
                if prev.is_none() && !bounds.names().is_empty() {
                    ctrl = refit_controller(self.p, &seed, self.kappa_bar, &samples.drift, &ctrl, bounds, self.cfg.refit_iters).0;
                }
                let mut best = None;
                for _ in 0..self.cfg.alternations.max(1) {
                    let inputs = self.applied_inputs(samples, &ctrl);
                    let Some(coef) = candidate(self.p, samples, &inputs, &settings)? else { break };
                    if !bounds.names().is_empty() {
                        let (a, c) = refit_controller(
                            self.p,
                            &coef,
                            self.kappa_bar,
                            &samples.drift,
                            &ctrl,
                            bounds,
                            self.cfg.refit_iters,
                        );
                        ctrl = a;
                        cost = Some(c);
                    }
                    best = Some(coef);
                }
                // Final LP with the refitted controller so constants match it.
                let inputs = self.applied_inputs(samples, &ctrl);
                match candidate(self.p, samples, &inputs, &settings)? {
                    Some(coef) => Ok(Some(Candidate { coef, ctrl, cost })),
                    None => Ok(best.map(|coef| Candidate { coef, ctrl, cost })),
                }
            }
        }
    }

    fn record(&self, cand: &Candidate) -> Result<CsbcRecord> {
        let coef = &cand.coef;
        let g = additive_to_max(
            self.kappa_bar,
            coef.rho_bar,
            coef.c_bar,
            self.conv.theta,
            self.conv.theta_bar,
            self.conv.d,
        )?;
        let controller = match &self.sub.inputs {
            InputSet::Box { bounds } if !bounds.names().is_empty() => {
                Controller::polynomial(self.p.controller_polys(&cand.ctrl))
            }
            _ => Controller::None,
        };
        Ok(CsbcRecord {
            subsystem: self.sub.name.clone(),
            barrier: self.p.barrier_poly(&coef.b),
            controller,
            eta: coef.eta,
            beta: 1.0,
            c: g.c,
            alpha: LinearGain(coef.alpha),
            kappa: LinearGain(g.kappa),
            rho: LinearGain(g.rho),
            init: self.init.to_vec(),
            unsafe_set: self.unsafe_set.to_vec(),
            provenance: format!(
                "cegis: degree {} barrier, kappa_bar {}, theta {}, theta_bar {}, d {}",
                self.cfg.barrier_degree, self.kappa_bar, self.conv.theta, self.conv.theta_bar, self.conv.d
            ),
        })
    }

    /// Map a report entry to sample points: the witness (or frontier centers) plus neighbours.
    fn feedback(&self, rep: &ConditionReport, rng: &mut ChaCha8Rng, samples: &mut Samples) -> Option<Counterexample> {
        let (points, cex) = match &rep.status {
            Status::Falsified { witness, violation } => (
                vec![witness.clone()],
                Some(Counterexample {
                    condition: rep.condition.clone(),
                    part: rep.part.clone(),
                    vars: rep.vars.clone(),
                    witness: witness.clone(),
                    violation: *violation,
                }),
            ),
            Status::Exhausted { frontier, .. } => {
                (frontier.iter().map(|b| b.iter().map(|iv| iv.mid()).collect()).collect(), None)
            }
            _ => return None,
        };
        let root: Vec<Interval> = match rep.condition.as_str() {
            "8" => self.p.sample_box.intervals().to_vec(),
            _ => self.sub.states.intervals().to_vec(),
        };
        let names: Vec<String> = match rep.condition.as_str() {
            "8" => self.p.sample_box.names().to_vec(),
            _ => self.sub.state_vars(),
        };
        for pt in points {
            for full in self.expand(&rep.vars, &pt, &names, &root, false) {
                let region: Vec<Interval> = match rep.condition.as_str() {
                    "6" => containing(self.init, &full).unwrap_or_else(|| root.clone()),
                    "7" => containing(self.unsafe_set, &full).unwrap_or_else(|| root.clone()),
                    _ => root.clone(),
                };
                let target = match rep.condition.as_str() {
                    "5" => &mut samples.state,
                    "6" => &mut samples.init,
                    "7" => &mut samples.unsafe_set,
                    _ => &mut samples.drift,
                };
                target.push(full.clone());
                for _ in 0..self.cfg.neighbours {
                    let mut q: Vec<f64> = full
                        .iter()
                        .zip(&region)
                        .map(|(v, iv)| v + Normal::new(0.0, 0.02 * iv.width().max(1e-12)).unwrap().sample(rng))
                        .collect();
                    clamp_into(&mut q, &region);
                    target.push(q);
                }
            }
        }
        cex
    }

    /// Complete a point over `vars` to the layout `names`, filling missing
    /// coordinates with the corners and center of their range.
    /// With `grid`, up to two missing coordinates are filled from a 9-point grid each.
    fn expand(&self, vars: &[String], pt: &[f64], names: &[String], root: &[Interval], grid: bool) -> Vec<Vec<f64>> {
        let missing: Vec<usize> = (0..names.len()).filter(|&k| !vars.contains(&names[k])).collect();
        let sub_box = IntervalBox::from_intervals(
            missing.iter().map(|k| names[*k].clone()).collect(),
            missing.iter().map(|k| root[*k]).collect(),
        );
        let mut fills = if missing.len() <= 4 { sub_box.corners() } else { Vec::new() };
        fills.push(sub_box.center());
        if grid && !missing.is_empty() && missing.len() <= 2 {
            let axis = |iv: &Interval| (0..9).map(|k| iv.lo + iv.width() * k as f64 / 8.0).collect::<Vec<_>>();
            let ivs = sub_box.intervals();
            fills = match ivs {
                [a] => axis(a).into_iter().map(|v| vec![v]).collect(),
                [a, b] => axis(a).into_iter().flat_map(|u| axis(b).into_iter().map(move |v| vec![u, v])).collect(),
                _ => fills,
            };
        }
        fills
            .into_iter()
            .map(|fill| {
                let mut fi = fill.into_iter();
                names
                    .iter()
                    .map(|n| match vars.iter().position(|v| v == n) {
                        Some(k) => pt[k],
                        None => fi.next().unwrap_or(0.0),
                    })
                    .collect()
            })
            .collect()
    }

    /// Does `cand` violate the LP constraint generated by this counterexample?
    fn previous_violates(&self, cand: &Candidate, cex: &Counterexample) -> bool {
        let coef = &cand.coef;
        let names: Vec<String> =
            if cex.condition == "8" { self.p.sample_box.names().to_vec() } else { self.sub.state_vars() };
        let root: Vec<Interval> = if cex.condition == "8" {
            self.p.sample_box.intervals().to_vec()
        } else {
            self.sub.states.intervals().to_vec()
        };
        let tol = self.cfg.epsilon;
        let pts = self.expand(&cex.vars, &cex.witness, &names, &root, true);
        let some = |f: &dyn Fn(&[f64]) -> bool| pts.iter().any(|x| f(x));
        match cex.condition.as_str() {
            "5" => some(&|x| {
                self.p.outputs.iter().any(|h| {
                    self.p.barrier(&coef.b, x) - coef.alpha * h.eval(&x[..self.p.n_states]).powi(2) < -tol
                })
            }),
            "6" => some(&|x| self.p.barrier(&coef.b, x) > coef.eta + tol),
            "7" => some(&|x| self.p.barrier(&coef.b, x) < 1.0 + self.cfg.slack - tol),
            // Every input fails at some internal input.
            _ => match &self.sub.inputs {
                InputSet::Finite { values, .. } => values
                    .iter()
                    .all(|u| some(&|x| self.p.drift_residual(coef, self.kappa_bar, x, u) > -tol)),
                InputSet::Box { .. } => some(&|x| {
                    let u = self.p.controller(&cand.ctrl, x);
                    self.p.drift_residual(coef, self.kappa_bar, x, &u) > -tol
                }),
            },
        }
    }

    fn run(&self, index: usize, found: &AtomicUsize) -> (CellJournal, Option<(CsbcRecord, VerificationReport)>, Option<CsbcRecord>) {
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        rng.set_stream(index as u64);
        let mut samples = Samples {
            init: seed_region(&mut rng, self.init, self.cfg.init_samples),
            unsafe_set: seed_region(&mut rng, self.unsafe_set, self.cfg.unsafe_samples),
            state: seed_region(&mut rng, std::slice::from_ref(&self.sub.states), self.cfg.state_samples),
            drift: seed_region(&mut rng, std::slice::from_ref(&self.p.sample_box), self.cfg.drift_samples),
        };
        let opts = VerifyOptions { mode: self.cfg.verify.clone(), epsilon: self.cfg.epsilon, exec: self.cfg.exec };
        let mut journal =
            CellJournal { cell: index, kappa_bar: self.kappa_bar, conversion: self.conv, outcome: String::new(), rounds: Vec::new() };
        let mut prev: Option<Candidate> = None;
        let mut last_record = None;
        for round in 0..self.cfg.max_rounds {
            if found.load(Ordering::SeqCst) < index {
                journal.outcome = "abandoned: an earlier cell succeeded".into();
                return (journal, None, last_record);
            }
            let mut log = RoundLog {
                round,
                samples: samples.counts(),
                lp: String::new(),
                eta: None,
                c_bar: None,
                controller_cost: None,
                verdict: None,
                counterexamples: Vec::new(),
                previous_violates: Vec::new(),
                undecided_boxes: 0,
            };
            let cand = match self.solve(&samples, prev.as_ref()) {
                Ok(Some(c)) => c,
                Ok(None) => {
                    log.lp = "infeasible".into();
                    journal.rounds.push(log);
                    journal.outcome = "scenario LP infeasible".into();
                    return (journal, None, last_record);
                }
                Err(e) => {
                    log.lp = format!("error: {e}");
                    journal.rounds.push(log);
                    journal.outcome = format!("LP error: {e}");
                    return (journal, None, last_record);
                }
            };
            log.lp = "optimal".into();
            log.eta = Some(cand.coef.eta);
            log.c_bar = Some(cand.coef.c_bar);
            log.controller_cost = cand.cost;
            let mut record = match self.record(&cand) {
                Ok(r) => r,
                Err(e) => {
                    journal.rounds.push(log);
                    journal.outcome = format!("conversion failed: {e}");
                    return (journal, None, last_record);
                }
            };
            if record.c >= record.beta {
                journal.rounds.push(log);
                journal.outcome = format!("uninformative: converted c = {} is not below beta", record.c);
                return (journal, None, Some(record));
            }
            let report = match verify_csbc(&record, self.sub, &opts) {
                Ok(r) => r,
                Err(e) => {
                    journal.rounds.push(log);
                    journal.outcome = format!("verification error: {e}");
                    return (journal, None, Some(record));
                }
            };
            log.verdict = Some(report.verdict);
            if report.at_least(self.cfg.target()) {
                if let Some(table) = &report.synthesized_controller {
                    record.controller = table.clone();
                }
                journal.rounds.push(log);
                journal.outcome = format!("{:?} after {} rounds", report.verdict, round + 1);
                found.fetch_min(index, Ordering::SeqCst);
                return (journal, Some((record, report)), None);
            }
            for rep in &report.conditions {
                if let Status::Exhausted { undecided, .. } = rep.status {
                    log.undecided_boxes += undecided;
                }
                if let Some(cex) = self.feedback(rep, &mut rng, &mut samples) {
                    log.previous_violates.push(self.previous_violates(&cand, &cex));
                    log.counterexamples.push(cex);
                }
            }
            journal.rounds.push(log);
            last_record = Some(record);
            prev = Some(cand);
        }
        journal.outcome = format!("round limit {} reached", self.cfg.max_rounds);
        (journal, None, last_record)
    }
}

fn containing(boxes: &[IntervalBox], x: &[f64]) -> Option<Vec<Interval>> {
    boxes.iter().find(|b| b.contains_point(x)).map(|b| b.intervals().to_vec())
}

/// Synthesize a CSBC (and controller) for `sub` with initial and unsafe boxes.
/// Gain cells run in parallel; the lowest-index successful cell wins.
pub fn cegis(sub: &Subsystem, init: &[IntervalBox], unsafe_set: &[IntervalBox], cfg: &CegisConfig) -> Result<Synthesis> {
    cfg.validate()?;
    if init.is_empty() || unsafe_set.is_empty() {
        return Err(Error::Synthesis("initial and unsafe regions must be nonempty".into()));
    }
    for b in init.iter().chain(unsafe_set) {
        if !sub.states.contains_box(b) {
            return Err(Error::Synthesis(format!("region {b} is not within the state set")));
        }
    }
    let p = Problem::new(sub, cfg.barrier_degree, cfg.controller_degree)?;
    let cells = cfg.cells();
    let found = AtomicUsize::new(usize::MAX);
    let results = cfg.exec.map_range(cells.len(), |k| {
        let (kappa_bar, conv) = cells[k];
        Cell { sub, p: &p, init, unsafe_set, cfg, kappa_bar, conv }.run(k, &found)
    });
    let mut journal = Vec::new();
    let mut winner = None;
    let mut fallback = None;
    for (k, (j, ok, last)) in results.into_iter().enumerate() {
        journal.push(j);
        if winner.is_none() {
            if let Some(w) = ok {
                winner = Some((k, w));
            }
        }
        if fallback.is_none() {
            fallback = last;
        }
    }
    Ok(match winner {
        Some((k, (record, report))) => Synthesis {
            subsystem: sub.name.clone(),
            record: Some(record),
            report: Some(report),
            success: true,
            cell: Some(k),
            journal,
        },
        None => Synthesis { subsystem: sub.name.clone(), record: fallback, report: None, success: false, cell: None, journal },
    })
}

/// Run the verifier on a candidate and return its first counterexample, if any.
pub fn falsify(record: &CsbcRecord, sub: &Subsystem, opts: &VerifyOptions) -> Result<Option<Counterexample>> {
    let report = verify_csbc(record, sub, opts)?;
    Ok(report.first_falsified().map(|rep| {
        let Status::Falsified { witness, violation } = &rep.status else { unreachable!() };
        Counterexample {
            condition: rep.condition.clone(),
            part: rep.part.clone(),
            vars: rep.vars.clone(),
            witness: witness.clone(),
            violation: *violation,
        }
    }))
}

#[cfg(test)]
mod tests;
