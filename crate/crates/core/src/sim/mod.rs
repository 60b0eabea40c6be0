//! Closed-loop simulation under the switching controller, DFA acceptance of
//! labeled traces and Monte Carlo estimates with exact binomial intervals.

mod plot;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

pub use plot::{state_names, traces_csv, traces_svg, Band};

use crate::automata::{Dfa, PartitionKey, SwitchState, SwitchingAutomaton};
use crate::certify::{CompiledController, Controller};
use crate::compose::CbcRecord;
use crate::error::{Error, Result};
use crate::par::Exec;
use crate::poly::Interval;
use crate::system::{CompiledNetwork, Interconnection, LabeledRegions};

/// Controller-switching policy: one controller per member for every task state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwitchingController {
    pub automaton: SwitchingAutomaton,
    pub tasks: BTreeMap<PartitionKey, Vec<Controller>>,
    /// Used in the initial switching state (q_0 self-loops) and before any task was entered.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default: Option<Vec<Controller>>,
}

impl SwitchingController {
    /// Controllers of each composite certificate, keyed by its partition set.
    pub fn from_certificates(automaton: SwitchingAutomaton, certs: &BTreeMap<PartitionKey, CbcRecord>) -> Self {
        let tasks = certs
            .iter()
            .map(|(k, cbc)| (k.clone(), (0..cbc.members.len()).map(|i| cbc.cert(i).controller.clone()).collect()))
            .collect();
        SwitchingController { automaton, tasks, default: None }
    }

    pub fn with_default(mut self, default: Vec<Controller>) -> Self {
        self.default = Some(default);
        self
    }

    /// Switching states that need a controller but have none.
    pub fn missing(&self) -> Vec<String> {
        let a = &self.automaton;
        let mut out = Vec::new();
        for (s, st) in a.states.iter().enumerate() {
            match st {
                SwitchState::Task { key } if !self.tasks.contains_key(key) => out.push(st.to_string()),
                SwitchState::Init { .. } if self.default.is_none() && a.transitions[s].contains(&s) => {
                    out.push(st.to_string())
                }
                _ => {}
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub index: usize,
    pub states: Vec<Vec<f64>>,
    pub word: Vec<String>,
    /// Run of the specification DFA, starting at its initial state (length M + 1).
    pub run: Vec<String>,
    /// Switching state after consuming each label.
    pub switching: Vec<String>,
    pub accepted: bool,
    /// Steps whose state lay outside the global state box.
    pub excursions: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalResult {
    pub n: usize,
    pub accepted: usize,
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
    /// Two-sided level 1 − δ.
    pub confidence: f64,
    pub horizon: usize,
    pub seed: u64,
    pub excursions: usize,
}

/// Initial-state distribution over the full state vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialStates {
    Point { x: Vec<f64> },
    Uniform { bounds: Vec<Interval> },
}

impl InitialStates {
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match self {
            InitialStates::Point { x } => x.clone(),
            InitialStates::Uniform { bounds } => bounds
                .iter()
                .map(|iv| if iv.width() > 0.0 { rng.random_range(iv.lo..=iv.hi) } else { iv.lo })
                .collect(),
        }
    }

    fn dim(&self) -> usize {
        match self {
            InitialStates::Point { x } => x.len(),
            InitialStates::Uniform { bounds } => bounds.len(),
        }
    }
}

/// Everything needed to simulate one closed loop.
pub struct Simulator<'a> {
    net: &'a Interconnection,
    code: CompiledNetwork,
    regions: &'a LabeledRegions,
    spec: &'a Dfa,
    automaton: &'a SwitchingAutomaton,
    /// Per switching state: compiled controllers per member (None for final states).
    policy: Vec<Option<Vec<CompiledController>>>,
    default: Option<Vec<CompiledController>>,
    prop_of_label: BTreeMap<String, (usize, usize)>,
}

impl<'a> Simulator<'a> {
    pub fn new(net: &'a Interconnection, regions: &'a LabeledRegions, spec: &'a Dfa, ctrl: &'a SwitchingController) -> Result<Self> {
        let code = CompiledNetwork::new(net)?;
        let compile = |cs: &[Controller]| -> Result<Vec<CompiledController>> {
            if cs.len() != net.len() {
                return Err(Error::Model(format!("{} controllers for {} members", cs.len(), net.len())));
            }
            cs.iter()
                .enumerate()
                .map(|(i, c)| {
                    let model = net.model(i);
                    if matches!(c, Controller::None) && !model.input_vars().is_empty() {
                        return Err(Error::MissingController(format!("member {} has inputs but no controller", net.members[i].id)));
                    }
                    c.compile(&model.state_vars())
                })
                .collect()
        };
        let a = &ctrl.automaton;
        let policy = a
            .states
            .iter()
            .map(|st| match st {
                SwitchState::Task { key } => ctrl.tasks.get(key).map(|cs| compile(cs)).transpose(),
                _ => Ok(None),
            })
            .collect::<Result<Vec<_>>>()?;
        let default = ctrl.default.as_deref().map(compile).transpose()?;
        let mut prop_of_label = BTreeMap::new();
        for p in regions.props() {
            let sp = spec.prop_index(&p).ok_or_else(|| Error::Automaton(format!("label `{p}` not in the specification alphabet")))?;
            let ap = a.prop_index(&p).ok_or_else(|| Error::Automaton(format!("label `{p}` not in the switching alphabet")))?;
            prop_of_label.insert(p, (sp, ap));
        }
        Ok(Simulator { net, code, regions, spec, automaton: a, policy, default, prop_of_label })
    }

    /// One closed-loop run of M states: label x(k), advance the switching automaton,
    /// then apply the selected controller to reach x(k+1).
    pub fn run<R: Rng + ?Sized>(&self, index: usize, x0: &[f64], m: usize, rng: &mut R) -> Result<Trajectory> {
        if x0.len() != self.code.state_dim() {
            return Err(Error::Model(format!("initial state has dimension {}, expected {}", x0.len(), self.code.state_dim())));
        }
        let a = self.automaton;
        let mut x = x0.to_vec();
        let mut s = a.initial;
        let mut q = self.spec.initial();
        let mut active: Option<&[CompiledController]> = None;
        let mut t = Trajectory {
            index,
            states: Vec::with_capacity(m),
            word: Vec::with_capacity(m),
            run: vec![self.spec.name(q).to_string()],
            switching: Vec::with_capacity(m),
            accepted: false,
            excursions: 0,
        };
        for k in 0..m {
            let label = self.regions.label_or_remainder(self.net, &x);
            if self.regions.label(self.net, &x).is_err() {
                t.excursions += 1;
            }
            let (sp, ap) = self.prop_of_label[label];
            q = self.spec.step(q, sp);
            s = a.step(s, ap);
            t.word.push(label.to_string());
            t.run.push(self.spec.name(q).to_string());
            t.switching.push(a.states[s].to_string());
            t.states.push(x.clone());
            if k + 1 == m {
                break;
            }
            let chosen = match (&a.states[s], &self.policy[s]) {
                (SwitchState::Task { .. }, Some(cs)) => cs.as_slice(),
                (SwitchState::Task { .. }, None) => return Err(Error::MissingController(a.states[s].to_string())),
                // The specification is decided; hold the last controller.
                (SwitchState::Final { .. }, _) => match active.or(self.default.as_deref()) {
                    Some(cs) => cs,
                    None => return Err(Error::MissingController(a.states[s].to_string())),
                },
                (SwitchState::Init { .. }, _) => match self.default.as_deref() {
                    Some(cs) => cs,
                    None => return Err(Error::MissingController(a.states[s].to_string())),
                },
            };
            active = Some(chosen);
            x = self.code.step_with(&x, |i, xi| chosen[i].eval(xi), rng);
        }
        t.accepted = self.spec.is_accepting(q);
        Ok(t)
    }

    fn rng(seed: u64, index: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index as u64);
        rng
    }

    /// Trajectory `index` of the seeded family (initial state drawn from its own stream).
    pub fn sample(&self, init: &InitialStates, index: usize, m: usize, seed: u64) -> Result<Trajectory> {
        if init.dim() != self.code.state_dim() {
            return Err(Error::Model(format!("initial distribution has dimension {}, expected {}", init.dim(), self.code.state_dim())));
        }
        let mut rng = Self::rng(seed, index);
        let x0 = init.draw(&mut rng);
        self.run(index, &x0, m, &mut rng)
    }

    pub fn trajectories(&self, init: &InitialStates, n: usize, m: usize, seed: u64, exec: Exec) -> Result<Vec<Trajectory>> {
        exec.map_range(n, |k| self.sample(init, k, m, seed)).into_iter().collect()
    }

    /// n independent runs; acceptance frequency with a Clopper–Pearson interval at level 1 − δ.
    pub fn monte_carlo(&self, init: &InitialStates, n: usize, m: usize, delta: f64, seed: u64, exec: Exec) -> Result<EmpiricalResult> {
        if n == 0 {
            return Err(Error::Domain("Monte Carlo needs at least one trajectory".into()));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::Domain(format!("confidence parameter δ = {delta} must lie in (0, 1)")));
        }
        let outcomes = exec.map_range(n, |k| self.sample(init, k, m, seed).map(|t| (t.accepted, t.excursions)));
        let mut accepted = 0;
        let mut excursions = 0;
        for o in outcomes {
            let (acc, exc) = o?;
            accepted += acc as usize;
            excursions += exc;
        }
        let (lower, upper) = clopper_pearson(accepted, n, delta)?;
        Ok(EmpiricalResult {
            n,
            accepted,
            estimate: accepted as f64 / n as f64,
            lower,
            upper,
            confidence: 1.0 - delta,
            horizon: m,
            seed,
            excursions,
        })
    }
}

/// Exact two-sided binomial interval: P(X ≥ k | lower) = δ/2 and P(X ≤ k | upper) = δ/2.
pub fn clopper_pearson(k: usize, n: usize, delta: f64) -> Result<(f64, f64)> {
    if n == 0 || k > n {
        return Err(Error::Domain(format!("invalid binomial count {k} of {n}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Domain(format!("δ = {delta} must lie in (0, 1)")));
    }
    let (kf, nf) = (k as f64, n as f64);
    let half = delta / 2.0;
    // The Beta quantile is the root of a monotone regularized incomplete beta.
    let quantile = |a: f64, b: f64, target: f64| {
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if beta_reg(a, b, mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let lower = if k == 0 { 0.0 } else { quantile(kf, nf - kf + 1.0, half) };
    let upper = if k == n { 1.0 } else { quantile(kf + 1.0, nf - kf, 1.0 - half) };
    Ok((lower, upper))
}
