//! Stage runners over a run directory. Every stage reads `config.json` and the
//! artifacts of earlier stages and writes structured text; only `timing.json`
//! depends on the wall clock.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use scbc_core::automata::{Decomposition, PartitionKey, SwitchingAutomaton};
use scbc_core::bounds::{bound_report, BoundReport};
use scbc_core::certify::{reevaluate, verify_csbc, CsbcRecord, Status, Verdict, VerificationReport, VerifyOptions};
use scbc_core::compose::{compose, CbcRecord, Composition};
use scbc_core::poly::{Interval, IntervalBox};
use scbc_core::sim::{state_names, traces_csv, traces_svg, EmpiricalResult, InitialStates, Simulator, SwitchingController};
use scbc_core::synth::cegis;
use scbc_core::system::Quantifier;
use scbc_core::{fixtures, Error, Exec, Result};

use crate::config::{Problem, ProblemConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Decompose,
    Synth,
    Verify,
    Compose,
    Bound,
    Simulate,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 7] =
        [Stage::Decompose, Stage::Synth, Stage::Verify, Stage::Compose, Stage::Bound, Stage::Simulate, Stage::Report];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Decompose => "decompose",
            Stage::Synth => "synth",
            Stage::Verify => "verify",
            Stage::Compose => "compose",
            Stage::Bound => "bound",
            Stage::Simulate => "simulate",
            Stage::Report => "report",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Source of externally computed certificates.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Import {
    /// Published room certificate and controller.
    PaperRoom,
    /// Published Kuramoto certificates (task starting in p1, task starting in p4).
    PaperKuramoto,
    /// Directory of `<certificate name>.cert` files.
    Dir(PathBuf),
}

impl FromStr for Import {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "paper_room" => Import::PaperRoom,
            "paper_kuramoto" => Import::PaperKuramoto,
            _ => Import::Dir(PathBuf::from(s)),
        })
    }
}

#[derive(Clone, Debug, Default)]
pub struct Options {
    pub import: Option<Import>,
    pub exec: Exec,
}

pub struct RunDir {
    root: PathBuf,
}

impl RunDir {
    pub fn new(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        std::fs::create_dir_all(&root)?;
        Ok(RunDir { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    pub fn exists(&self, rel: &str) -> bool {
        self.path(rel).exists()
    }

    pub fn write(&self, rel: &str, text: &str) -> Result<()> {
        let p = self.path(rel);
        if let Some(dir) = p.parent() {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(p, text)?;
        Ok(())
    }

    /// Artifact of an earlier stage; a missing file names the stage that produces it.
    pub fn read(&self, stage: Stage, rel: &str) -> Result<String> {
        std::fs::read_to_string(self.path(rel)).map_err(|e| Error::Stage {
            stage: stage.to_string(),
            path: self.path(rel).display().to_string(),
            msg: format!("missing upstream artifact ({e})"),
        })
    }

    pub fn json<T: for<'de> Deserialize<'de>>(&self, stage: Stage, rel: &str) -> Result<T> {
        let text = self.read(stage, rel)?;
        serde_json::from_str(&text).map_err(|e| Error::Stage {
            stage: stage.to_string(),
            path: self.path(rel).display().to_string(),
            msg: e.to_string(),
        })
    }

    pub fn write_json<T: Serialize>(&self, rel: &str, value: &T) -> Result<()> {
        self.write(rel, &(serde_json::to_string_pretty(value)? + "\n"))
    }

    pub fn write_config(&self, cfg: &ProblemConfig) -> Result<()> {
        self.write("config.json", &cfg.to_json()?)
    }

    pub fn config(&self) -> Result<ProblemConfig> {
        ProblemConfig::from_json(&self.read(Stage::Decompose, "config.json")?)
    }

    fn record_time(&self, stage: Stage, seconds: f64) -> Result<()> {
        let mut t: BTreeMap<String, f64> = std::fs::read_to_string(self.path("timing.json"))
            .ok()
            .and_then(|s| serde_json::from_str(&s).ok())
            .unwrap_or_default();
        t.insert(stage.to_string(), seconds);
        self.write_json("timing.json", &t)
    }
}

/// Certificate obligation: one subsystem model with fixed initial and unsafe boxes,
/// shared by every member listed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertJob {
    pub name: String,
    pub model: String,
    pub members: Vec<usize>,
    pub init: Vec<IntervalBox>,
    #[serde(rename = "unsafe")]
    pub unsafe_set: Vec<IntervalBox>,
}

/// One γ partition set and the certificates it needs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub key: PartitionKey,
    pub label: String,
    pub init_symbols: BTreeSet<String>,
    pub unsafe_symbols: BTreeSet<String>,
    pub unsafe_quantifier: Quantifier,
    pub elements: Vec<String>,
    pub jobs: Vec<CertJob>,
    /// Why no certificate can be posed for this task (e.g. a region without box form).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub issue: Option<String>,
}

/// Decomposition in listing form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecompositionArtifact {
    pub horizon: usize,
    /// R_M.
    pub runs: Vec<String>,
    /// R^p_M per proposition.
    pub runs_by_prop: BTreeMap<String, Vec<String>>,
    /// P^p(q) per proposition and run.
    pub elements: BTreeMap<String, BTreeMap<String, Vec<String>>>,
    pub tasks: Vec<Task>,
    pub switching: SwitchingAutomaton,
}

struct Context {
    cfg: ProblemConfig,
    problem: Problem,
    decomp: Decomposition,
    tasks: Vec<Task>,
}

fn tasks(problem: &Problem, decomp: &Decomposition) -> Result<Vec<Task>> {
    let net = &problem.net;
    let regions = &problem.regions;
    let classes = net.classes();
    decomp
        .partitions
        .iter()
        .map(|set| {
            let (init_symbols, unsafe_symbols) = set.roles();
            let any = unsafe_symbols
                .iter()
                .any(|p| regions.region(p).is_some_and(|r| r.quantifier == Quantifier::Any));
            let mut jobs: Vec<CertJob> = Vec::new();
            let mut issue = None;
            'classes: for class in &classes {
                let model = net.model(class[0]).name.clone();
                for &i in class {
                    let boxes = regions
                        .member_boxes(&init_symbols, i)
                        .and_then(|init| Ok((init, regions.member_boxes(&unsafe_symbols, i)?)));
                    let (init, unsafe_set) = match boxes {
                        Ok(b) => b,
                        Err(e) => {
                            issue = Some(e.to_string());
                            jobs.clear();
                            break 'classes;
                        }
                    };
                    // Homogeneous shortcut: members with equal model and boxes share one certificate.
                    match jobs.iter_mut().find(|j| j.model == model && j.init == init && j.unsafe_set == unsafe_set) {
                        Some(j) => j.members.push(i),
                        None => jobs.push(CertJob { name: String::new(), model: model.clone(), members: vec![i], init, unsafe_set }),
                    }
                }
            }
            let slug = set.key.slug();
            let single = jobs.len() == 1;
            for (k, j) in jobs.iter_mut().enumerate() {
                j.name = if single { format!("{slug}.{}", j.model) } else { format!("{slug}.{}.{k}", j.model) };
            }
            Ok(Task {
                key: set.key.clone(),
                label: set.key.to_string(),
                init_symbols,
                unsafe_symbols,
                unsafe_quantifier: if any { Quantifier::Any } else { Quantifier::All },
                elements: set.members.iter().map(|e| e.to_string()).collect(),
                jobs,
                issue,
            })
        })
        .collect()
}

impl Context {
    fn load(run: &RunDir) -> Result<Self> {
        let cfg = run.config()?;
        let problem = cfg.build()?;
        let decomp = Decomposition::new(&problem.dfa, cfg.horizon)?;
        let tasks = tasks(&problem, &decomp)?;
        Ok(Context { cfg, problem, decomp, tasks })
    }

    fn model(&self, job: &CertJob) -> &scbc_core::system::Subsystem {
        self.problem.net.model(job.members[0])
    }

    fn load_cert(&self, run: &RunDir, stage: Stage, job: &CertJob) -> Result<CsbcRecord> {
        run.json(stage, &format!("certs/{}.cert", job.name))
    }

    fn composites(&self, run: &RunDir, stage: Stage) -> Result<BTreeMap<PartitionKey, CbcRecord>> {
        let c: BTreeMap<String, TaskComposite> = run.json(stage, "composite.cert")?;
        Ok(c.into_values().map(|t| (t.key, t.composition.record)).collect())
    }
}

fn decomposition_artifact(decomp: &Decomposition, tasks: &[Task]) -> DecompositionArtifact {
    let runs = decomp.runs.iter().map(|r| r.to_string()).collect();
    let mut runs_by_prop = BTreeMap::new();
    let mut elements: BTreeMap<String, BTreeMap<String, Vec<String>>> = BTreeMap::new();
    for (p, idx) in &decomp.runs_by_prop {
        runs_by_prop.insert(p.clone(), idx.iter().map(|&k| decomp.runs[k].to_string()).collect());
        let per_run = elements.entry(p.clone()).or_default();
        for &k in idx {
            per_run.insert(decomp.runs[k].to_string(), decomp.elements_for(p, k).iter().map(|e| e.to_string()).collect());
        }
    }
    DecompositionArtifact {
        horizon: decomp.horizon,
        runs,
        runs_by_prop,
        elements,
        tasks: tasks.to_vec(),
        switching: decomp.switching.clone(),
    }
}

fn decompose(run: &RunDir) -> Result<()> {
    let ctx = Context::load(run)?;
    run.write_json("decomposition.json", &decomposition_artifact(&ctx.decomp, &ctx.tasks))?;
    run.write("decomposition/complement.dot", &ctx.decomp.complement.to_dot("complement"))?;
    run.write("decomposition/switching.dot", &ctx.decomp.switching.to_dot("switching"))?;
    run.write("decomposition/specification.dot", &ctx.problem.dfa.to_dot("specification"))?;
    Ok(())
}

fn imported(import: &Import, task: &Task, job: &CertJob) -> Result<CsbcRecord> {
    let rec = match import {
        Import::PaperRoom => fixtures::paper_room_csbc(),
        Import::PaperKuramoto => {
            let n = if task.init_symbols.contains("p1") {
                1
            } else if task.init_symbols.contains("p4") {
                2
            } else {
                return Err(Error::Synthesis(format!("no published Kuramoto certificate for task {}", task.label)));
            };
            fixtures::paper_kuramoto_csbc(n)
        }
        Import::Dir(dir) => CsbcRecord::load(&dir.join(format!("{}.cert", job.name)))?,
    };
    if rec.subsystem != job.model {
        return Err(Error::Synthesis(format!("imported certificate is for `{}`, task needs `{}`", rec.subsystem, job.model)));
    }
    rec.validate()?;
    Ok(rec)
}

fn synth(run: &RunDir, opts: &Options) -> Result<()> {
    let ctx = Context::load(run)?;
    run.read(Stage::Synth, "decomposition.json")?;
    let mut cfg = ctx.problem.cegis.clone();
    cfg.exec = opts.exec;
    let mut skipped = Vec::new();
    for task in &ctx.tasks {
        if let Some(issue) = &task.issue {
            skipped.push(format!("{}: {issue}", task.label));
        }
        for job in &task.jobs {
            let rec = match &opts.import {
                Some(import) => imported(import, task, job)?,
                None => {
                    let s = cegis(ctx.model(job), &job.init, &job.unsafe_set, &cfg)?;
                    run.write(&format!("certs/{}.synth.json", job.name), &s.to_json()?)?;
                    s.into_record()?
                }
            };
            run.write(&format!("certs/{}.cert", job.name), &rec.to_json()?)?;
        }
    }
    if skipped.is_empty() {
        Ok(())
    } else {
        Err(Error::Synthesis(format!("no certificate can be posed for {}", skipped.join("; "))))
    }
}

/// Re-evaluation of a reported witness by the independent point evaluator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WitnessCheck {
    pub condition: String,
    pub part: String,
    pub witness: Vec<f64>,
    pub reported: f64,
    pub reevaluated: f64,
    pub confirmed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyArtifact {
    pub certificate: String,
    pub report: VerificationReport,
    pub witnesses: Vec<WitnessCheck>,
}

pub fn check_witnesses(rec: &CsbcRecord, sub: &scbc_core::system::Subsystem, report: &VerificationReport) -> Result<Vec<WitnessCheck>> {
    report
        .conditions
        .iter()
        .filter_map(|c| match &c.status {
            Status::Falsified { witness, violation } => Some((c, witness, *violation)),
            _ => None,
        })
        .map(|(c, witness, violation)| {
            let v = reevaluate(rec, sub, &c.condition, &c.part, witness, report.epsilon)?;
            Ok(WitnessCheck {
                condition: c.condition.clone(),
                part: c.part.clone(),
                witness: witness.clone(),
                reported: violation,
                reevaluated: v,
                confirmed: v > report.epsilon && (v - violation).abs() <= 1e-9 * violation.abs().max(1.0),
            })
        })
        .collect()
}

fn verify(run: &RunDir, opts: &Options) -> Result<()> {
    let ctx = Context::load(run)?;
    let vopts = VerifyOptions::new(ctx.cfg.modes.verify_mode(ctx.cfg.seed)).with_exec(opts.exec);
    let mut failed = Vec::new();
    for task in &ctx.tasks {
        for job in &task.jobs {
            let rec = ctx.load_cert(run, Stage::Verify, job)?;
            let sub = ctx.model(job);
            let report = verify_csbc(&rec, sub, &vopts)?;
            let witnesses = check_witnesses(&rec, sub, &report)?;
            if !report.at_least(Verdict::Passed) {
                failed.push(format!("{}: {:?}", job.name, report.verdict));
            }
            run.write_json(&format!("certs/{}.verify.json", job.name), &VerifyArtifact { certificate: job.name.clone(), report, witnesses })?;
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Error::Verification(format!("certificates not verified: {}", failed.join(", "))))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskComposite {
    pub key: PartitionKey,
    pub composition: Composition,
}

/// Composite κ̂ printed for the published certificates, kept for comparison.
fn reference_kappa(rec: &CsbcRecord) -> Option<f64> {
    (rec.provenance == fixtures::paper_room_csbc().provenance).then_some(0.99)
}

fn compose_stage(run: &RunDir) -> Result<()> {
    let ctx = Context::load(run)?;
    let net = &ctx.problem.net;
    let mut out = BTreeMap::new();
    for task in ctx.tasks.iter().filter(|t| !t.jobs.is_empty()) {
        let mut certs = Vec::new();
        let mut member_cert = vec![usize::MAX; net.len()];
        for (k, job) in task.jobs.iter().enumerate() {
            certs.push(ctx.load_cert(run, Stage::Compose, job)?);
            for &i in &job.members {
                member_cert[i] = k;
            }
        }
        let reference = reference_kappa(&certs[0]);
        let mut composition = compose(&task.key.slug(), net, certs, member_cert, task.unsafe_quantifier)?;
        composition.record.reference_kappa = reference;
        out.insert(task.key.slug(), TaskComposite { key: task.key.clone(), composition });
    }
    run.write_json("composite.cert", &out)
}

fn bound(run: &RunDir) -> Result<()> {
    let ctx = Context::load(run)?;
    let certs = ctx.composites(run, Stage::Bound)?;
    let mut report = bound_report(&ctx.decomp, &certs, &ctx.problem.net, &ctx.problem.regions, ctx.cfg.modes.bound)?;
    report.cross_check()?;
    let provenance: BTreeSet<&str> = certs.values().flat_map(|c| c.certs.iter().map(|r| r.provenance.as_str())).collect();
    if provenance.contains(fixtures::paper_room_csbc().provenance.as_str()) {
        report.references.insert("p0".into(), 0.95);
        report.references.insert("element".into(), 0.054);
        report.notes.push(
            "published room constants give element bound 1 - (1 - eta/beta)(1 - c/beta)^9 = 0.0568 at T_h = 9; \
             the printed 0.054 differs by about 3e-3"
                .into(),
        );
    }
    if provenance.contains(fixtures::paper_kuramoto_csbc(1).provenance.as_str()) {
        report.references.insert("p1".into(), 0.94);
        report.references.insert("p4".into(), 0.9);
    }
    for c in certs.values() {
        if let Some(r) = c.reference_kappa {
            report.notes.push(format!("{}: composite kappa {} computed from the gain matrix, {r} printed", c.name, c.kappa));
        }
    }
    // Verification verdicts travel with the bounds they support.
    for task in &ctx.tasks {
        for job in &task.jobs {
            let rel = format!("certs/{}.verify.json", job.name);
            if run.exists(&rel) {
                let v: VerifyArtifact = run.json(Stage::Bound, &rel)?;
                report.notes.push(format!("{}: verification verdict {:?}", job.name, v.report.verdict));
            } else {
                report.notes.push(format!("{}: not verified in this run", job.name));
            }
        }
    }
    run.write("bounds.json", &report.to_json()?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub prop: String,
    pub result: EmpiricalResult,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub certified_lower: Option<f64>,
    /// Upper confidence limit at or above the certified lower bound.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub covers_bound: Option<bool>,
    /// Estimate at or above the certified bound minus three binomial standard errors.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub within_three_se: Option<bool>,
    pub traces: String,
    pub plot: String,
}

/// Uniform distribution over a product region, in global state order.
pub fn region_distribution(problem: &Problem, prop: &str) -> Result<InitialStates> {
    let r = problem.regions.region(prop).ok_or_else(|| Error::config("simulation", format!("unknown proposition `{prop}`")))?;
    let bounds: Vec<Interval> = r.boxes.iter().flat_map(|b| b.intervals().to_vec()).collect();
    Ok(InitialStates::Uniform { bounds })
}

fn simulate(run: &RunDir, opts: &Options) -> Result<()> {
    let ctx = Context::load(run)?;
    let certs = ctx.composites(run, Stage::Simulate)?;
    let bounds: Option<BoundReport> = if run.exists("bounds.json") { Some(run.json(Stage::Simulate, "bounds.json")?) } else { None };
    let mut policy = SwitchingController::from_certificates(ctx.decomp.switching.clone(), &certs);
    // Runs that start in a violating label never enter a task; any controller will do.
    if let Some(first) = policy.tasks.values().next() {
        policy = policy.clone().with_default(first.clone());
    }
    let missing = policy.missing();
    if !missing.is_empty() {
        return Err(Error::MissingController(missing.join(", ")));
    }
    let net = &ctx.problem.net;
    let sim = Simulator::new(net, &ctx.problem.regions, &ctx.problem.dfa, &policy)?;
    let s = &ctx.cfg.simulation;
    let names = state_names(net);
    let off = net.offsets();
    let coord = off[s.plot_member];
    let mut out = Vec::new();
    for prop in &s.initial {
        let init = region_distribution(&ctx.problem, prop)?;
        let result = sim.monte_carlo(&init, s.n_traj, ctx.cfg.horizon, s.delta, ctx.cfg.seed, opts.exec)?;
        let trajs = sim.trajectories(&init, s.plot_traj.min(s.n_traj), ctx.cfg.horizon, ctx.cfg.seed, opts.exec)?;
        let traces = format!("traces/{prop}.csv");
        let plot = format!("plots/{prop}.svg");
        let coords: Vec<usize> = (off[s.plot_member]..off[s.plot_member + 1]).collect();
        run.write(&traces, &traces_csv(&trajs, &names, &coords)?)?;
        let title = format!("{}: {} runs from {prop}, member {}", ctx.cfg.name, trajs.len(), names[coord]);
        run.write(&plot, &traces_svg(&trajs, coord, &names[coord], &s.bands, &title))?;
        let certified_lower = bounds.as_ref().and_then(|b| b.for_prop(prop)).map(|b| b.lower);
        let se = (result.estimate * (1.0 - result.estimate) / result.n as f64).sqrt();
        out.push(SimulationSummary {
            prop: prop.clone(),
            covers_bound: certified_lower.map(|l| result.upper >= l),
            within_three_se: certified_lower.map(|l| result.estimate >= l - 3.0 * se),
            certified_lower,
            result,
            traces,
            plot,
        });
    }
    run.write_json("simulation.json", &out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertSummary {
    pub name: String,
    pub task: String,
    pub members: usize,
    pub provenance: String,
    pub barrier: String,
    pub controller: String,
    pub eta: f64,
    pub beta: f64,
    pub c: f64,
    pub kappa: f64,
    pub alpha: f64,
    pub rho: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub verdict: Option<Verdict>,
    /// Boxes and samples spent by the verifier.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub verifier_boxes: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub verifier_samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub cegis_rounds: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompositeSummary {
    pub task: String,
    pub eta: f64,
    pub beta: f64,
    pub c: f64,
    pub kappa: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub reference_kappa: Option<f64>,
    pub max_gain: f64,
    pub small_gain: String,
    pub lambda_range: (f64, f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub name: String,
    pub members: usize,
    pub horizon: usize,
    pub bound_mode: String,
    pub decomposition: DecompositionArtifact,
    pub certificates: Vec<CertSummary>,
    pub composites: Vec<CompositeSummary>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub bounds: Option<BoundReport>,
    pub simulation: Vec<SimulationSummary>,
    /// Stages whose artifacts were absent.
    pub missing: Vec<String>,
}

fn report(run: &RunDir) -> Result<()> {
    let ctx = Context::load(run)?;
    let decomposition: DecompositionArtifact = run.json(Stage::Report, "decomposition.json")?;
    let mut missing = Vec::new();
    let mut certificates = Vec::new();
    for task in &ctx.tasks {
        for job in &task.jobs {
            let rel = format!("certs/{}.cert", job.name);
            if !run.exists(&rel) {
                missing.push(rel);
                continue;
            }
            let rec = ctx.load_cert(run, Stage::Report, job)?;
            let verify: Option<VerifyArtifact> = {
                let rel = format!("certs/{}.verify.json", job.name);
                if run.exists(&rel) { Some(run.json(Stage::Report, &rel)?) } else { None }
            };
            let rounds = {
                let rel = format!("certs/{}.synth.json", job.name);
                if run.exists(&rel) {
                    let s: scbc_core::synth::Synthesis = run.json(Stage::Report, &rel)?;
                    Some(s.journal.iter().map(|c| c.rounds.len()).sum())
                } else {
                    None
                }
            };
            certificates.push(CertSummary {
                name: job.name.clone(),
                task: task.label.clone(),
                members: job.members.len(),
                provenance: rec.provenance.clone(),
                barrier: rec.barrier.to_string(),
                controller: serde_json::to_string(&rec.controller)?,
                eta: rec.eta,
                beta: rec.beta,
                c: rec.c,
                kappa: rec.kappa.0,
                alpha: rec.alpha.0,
                rho: rec.rho.0,
                verdict: verify.as_ref().map(|v| v.report.verdict),
                verifier_boxes: verify.as_ref().map(|v| v.report.conditions.iter().map(|c| c.boxes).sum()),
                verifier_samples: verify.as_ref().map(|v| v.report.conditions.iter().map(|c| c.samples).sum()),
                cegis_rounds: rounds,
            });
        }
    }
    let mut composites = Vec::new();
    if run.exists("composite.cert") {
        let c: BTreeMap<String, TaskComposite> = run.json(Stage::Report, "composite.cert")?;
        for t in c.values() {
            let r = &t.composition.record;
            let lo = r.lambda.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = r.lambda.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            composites.push(CompositeSummary {
                task: t.key.to_string(),
                eta: r.eta,
                beta: r.beta,
                c: r.c,
                kappa: r.kappa,
                reference_kappa: r.reference_kappa,
                max_gain: t.composition.max_gain,
                small_gain: serde_json::to_string(&t.composition.small_gain)?,
                lambda_range: (lo, hi),
            });
        }
    } else {
        missing.push("composite.cert".into());
    }
    let bounds: Option<BoundReport> = if run.exists("bounds.json") {
        let b: BoundReport = run.json(Stage::Report, "bounds.json")?;
        b.cross_check()?;
        Some(b)
    } else {
        missing.push("bounds.json".into());
        None
    };
    let simulation: Vec<SimulationSummary> = if run.exists("simulation.json") {
        run.json(Stage::Report, "simulation.json")?
    } else {
        missing.push("simulation.json".into());
        Vec::new()
    };
    let rep = Report {
        name: ctx.cfg.name.clone(),
        members: ctx.problem.net.len(),
        horizon: ctx.cfg.horizon,
        bound_mode: ctx.cfg.modes.bound.to_string(),
        decomposition,
        certificates,
        composites,
        bounds,
        simulation,
        missing,
    };
    run.write_json("report.json", &rep)?;
    run.write("report.md", &crate::report::markdown(&rep))
}

/// Run one stage; failures carry the stage name and run directory.
pub fn run_stage(run: &RunDir, stage: Stage, opts: &Options) -> Result<()> {
    let start = Instant::now();
    let res = match stage {
        Stage::Decompose => decompose(run),
        Stage::Synth => synth(run, opts),
        Stage::Verify => verify(run, opts),
        Stage::Compose => compose_stage(run),
        Stage::Bound => bound(run),
        Stage::Simulate => simulate(run, opts),
        Stage::Report => report(run),
    };
    run.record_time(stage, start.elapsed().as_secs_f64())?;
    res.map_err(|e| match e {
        e @ Error::Stage { .. } => e,
        e => Error::Stage { stage: stage.to_string(), path: run.root.display().to_string(), msg: e.to_string() },
    })
}

/// Run stages in order. Verification failures do not stop later stages; the
/// first error is returned after all stages that can run have run.
pub fn run_stages(run: &RunDir, stages: &[Stage], opts: &Options) -> Result<()> {
    let mut first = None;
    for &s in stages {
        match run_stage(run, s, opts) {
            Ok(()) => {}
            Err(e) if s == Stage::Verify => {
                first.get_or_insert(e);
            }
            Err(e) => return Err(first.unwrap_or(e)),
        }
    }
    first.map_or(Ok(()), Err)
}
