//! Subsystems, their interconnection and labeled regions.

mod network;
mod regions;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::{Interval, IntervalBox, NoiseModel, Polynomial};

pub use network::CompiledNetwork;
pub use regions::{LabeledRegions, Quantifier, Region};

/// External input set: a box, or an explicit finite list of input vectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InputSet {
    Box { bounds: IntervalBox },
    Finite { vars: Vec<String>, values: Vec<Vec<f64>> },
}

impl InputSet {
    pub fn none() -> Self {
        InputSet::Box { bounds: IntervalBox::default() }
    }

    pub fn vars(&self) -> Vec<String> {
        match self {
            InputSet::Box { bounds } => bounds.names().to_vec(),
            InputSet::Finite { vars, .. } => vars.clone(),
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, InputSet::Finite { .. })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputBlock {
    pub name: String,
    pub exprs: Vec<Polynomial>,
}

/// Non-polynomial aggregate replaced by a bounded variable in the certified model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Coupling {
    /// `var = Σ_k sin(inputs[k] − state)`, bounded by ±inputs.len().
    SineSum { var: String, state: String, inputs: Vec<String> },
}

impl Coupling {
    pub fn var(&self) -> &str {
        match self {
            Coupling::SineSum { var, .. } => var,
        }
    }

    pub fn range(&self) -> Interval {
        match self {
            Coupling::SineSum { inputs, .. } => {
                let n = inputs.len() as f64;
                Interval::new(-n, n)
            }
        }
    }
}

/// One dt-SCS: x⁺ = f(x, u, w, ς) with output blocks h_ij.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Subsystem {
    pub name: String,
    pub states: IntervalBox,
    #[serde(default = "InputSet::none")]
    pub inputs: InputSet,
    #[serde(default)]
    pub internal: IntervalBox,
    /// One polynomial per state variable, in the order of `states`.
    pub dynamics: Vec<Polynomial>,
    /// Output blocks sent to neighbours; the identity block h_ii is implicit.
    #[serde(default)]
    pub outputs: Vec<OutputBlock>,
    #[serde(default)]
    pub noise: BTreeMap<String, NoiseModel>,
    #[serde(default)]
    pub couplings: Vec<Coupling>,
}

impl Subsystem {
    pub fn state_vars(&self) -> Vec<String> {
        self.states.names().to_vec()
    }

    pub fn input_vars(&self) -> Vec<String> {
        self.inputs.vars()
    }

    pub fn internal_vars(&self) -> Vec<String> {
        self.internal.names().to_vec()
    }

    pub fn noise_vars(&self) -> Vec<String> {
        self.noise.keys().cloned().collect()
    }

    pub fn coupling_vars(&self) -> Vec<String> {
        self.couplings.iter().map(|c| c.var().to_string()).collect()
    }

    /// Variable order used by compiled dynamics: states, inputs, internal, couplings, noise.
    pub fn all_vars(&self) -> Vec<String> {
        let mut v = self.state_vars();
        v.extend(self.input_vars());
        v.extend(self.internal_vars());
        v.extend(self.coupling_vars());
        v.extend(self.noise_vars());
        v
    }

    pub fn coupling_box(&self) -> IntervalBox {
        let mut b = IntervalBox::default();
        for c in &self.couplings {
            b.push(c.var(), c.range());
        }
        b
    }

    pub fn output_block(&self, name: &str) -> Option<&OutputBlock> {
        self.outputs.iter().find(|o| o.name == name)
    }

    /// All output coordinates h_i: the state itself followed by every block entry, deduplicated.
    pub fn output_coordinates(&self) -> Vec<Polynomial> {
        let mut out: Vec<Polynomial> = self.state_vars().iter().map(|v| Polynomial::var(v)).collect();
        for b in &self.outputs {
            for e in &b.exprs {
                if !out.contains(e) {
                    out.push(e.clone());
                }
            }
        }
        out
    }

    /// Substitute a state-feedback controller for the external inputs.
    pub fn close_loop(&self, controller: &[Polynomial]) -> Result<Subsystem> {
        let ins = self.input_vars();
        if controller.len() != ins.len() {
            return Err(Error::Model(format!(
                "controller has {} components, subsystem `{}` has {} inputs",
                controller.len(),
                self.name,
                ins.len()
            )));
        }
        let states: BTreeSet<String> = self.state_vars().into_iter().collect();
        for c in controller {
            if let Some(v) = c.variables().into_iter().find(|v| !states.contains(v)) {
                return Err(Error::Model(format!("controller references non-state variable `{v}`")));
            }
        }
        let subst: BTreeMap<String, Polynomial> = ins.into_iter().zip(controller.iter().cloned()).collect();
        let mut closed = self.clone();
        closed.dynamics = self.dynamics.iter().map(|f| f.substitute(&subst)).collect();
        closed.inputs = InputSet::none();
        Ok(closed)
    }

    /// Fix the external inputs to a constant vector.
    pub fn with_constant_input(&self, u: &[f64]) -> Result<Subsystem> {
        let c: Vec<Polynomial> = u.iter().map(|x| Polynomial::constant(*x)).collect();
        self.close_loop(&c)
    }

    pub fn diagnostics(&self) -> Vec<String> {
        let mut d = Vec::new();
        let states = self.state_vars();
        if self.dynamics.len() != states.len() {
            d.push(format!(
                "dynamics has {} components for {} state variables",
                self.dynamics.len(),
                states.len()
            ));
        }
        let known: BTreeSet<String> = self.all_vars().into_iter().collect();
        for (k, f) in self.dynamics.iter().enumerate() {
            for v in f.variables() {
                if !known.contains(&v) {
                    d.push(format!("dynamics[{k}] uses undeclared variable `{v}`"));
                }
            }
        }
        let state_set: BTreeSet<&String> = states.iter().collect();
        for b in &self.outputs {
            for e in &b.exprs {
                for v in e.variables() {
                    if self.noise.contains_key(&v) {
                        d.push(format!("output block `{}` depends on noise variable `{v}`", b.name));
                    } else if !state_set.contains(&v) {
                        d.push(format!("output block `{}` uses non-state variable `{v}`", b.name));
                    }
                }
            }
        }
        for (v, n) in &self.noise {
            if let Err(e) = n.validate() {
                d.push(format!("noise `{v}`: {e}"));
            }
        }
        let internal: BTreeSet<String> = self.internal_vars().into_iter().collect();
        for c in &self.couplings {
            let Coupling::SineSum { state, inputs, .. } = c;
            if !state_set.contains(state) {
                d.push(format!("coupling `{}` refers to unknown state `{state}`", c.var()));
            }
            for i in inputs {
                if !internal.contains(i) {
                    d.push(format!("coupling `{}` refers to unknown internal input `{i}`", c.var()));
                }
            }
        }
        let mut seen = BTreeSet::new();
        for v in self.all_vars() {
            if !seen.insert(v.clone()) {
                d.push(format!("variable `{v}` declared twice"));
            }
        }
        if let InputSet::Finite { vars, values } = &self.inputs {
            if values.is_empty() || values.iter().any(|u| u.len() != vars.len()) {
                d.push("finite input set must list vectors matching its variables".into());
            }
        }
        d
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Member {
    pub id: String,
    pub model: Arc<Subsystem>,
}

/// Binds internal inputs of `target` to an output block of `source`;
/// `source = None` marks the inputs as identically zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Wire {
    pub target: usize,
    pub inputs: Vec<String>,
    #[serde(default)]
    pub source: Option<usize>,
    #[serde(default)]
    pub output: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub target: Option<usize>,
    pub source: Option<usize>,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.target, self.source) {
            (Some(i), Some(j)) => write!(f, "({i},{j}): {}", self.message),
            (Some(i), None) => write!(f, "({i}): {}", self.message),
            _ => write!(f, "{}", self.message),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Interconnection {
    pub members: Vec<Member>,
    pub wiring: Vec<Wire>,
}

impl Interconnection {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn model(&self, i: usize) -> &Subsystem {
        &self.members[i].model
    }

    /// Offsets of each member's state block in the flat global state vector.
    pub fn offsets(&self) -> Vec<usize> {
        let mut off = Vec::with_capacity(self.len() + 1);
        let mut acc = 0;
        for m in &self.members {
            off.push(acc);
            acc += m.model.states.dim();
        }
        off.push(acc);
        off
    }

    pub fn state_dim(&self) -> usize {
        *self.offsets().last().unwrap()
    }

    /// Wired (target, source) pairs with a nonzero connection.
    pub fn wired_pairs(&self) -> BTreeSet<(usize, usize)> {
        self.wiring
            .iter()
            .filter_map(|w| w.source.map(|s| (w.target, s)))
            .collect()
    }

    /// Groups of members sharing the same model (by pointer or structural equality).
    pub fn classes(&self) -> Vec<Vec<usize>> {
        let mut classes: Vec<Vec<usize>> = Vec::new();
        for (i, m) in self.members.iter().enumerate() {
            match classes.iter_mut().find(|c| {
                let r = &self.members[c[0]].model;
                Arc::ptr_eq(r, &m.model) || **r == *m.model
            }) {
                Some(c) => c.push(i),
                None => classes.push(vec![i]),
            }
        }
        classes
    }

    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut d = Vec::new();
        let n = self.len();
        let mut ids = BTreeSet::new();
        for (i, m) in self.members.iter().enumerate() {
            if !ids.insert(&m.id) {
                d.push(Diagnostic { target: Some(i), source: None, message: format!("duplicate id `{}`", m.id) });
            }
            for msg in m.model.diagnostics() {
                d.push(Diagnostic { target: Some(i), source: None, message: msg });
            }
        }
        let mut bound: Vec<BTreeMap<String, usize>> = vec![BTreeMap::new(); n];
        for w in &self.wiring {
            let diag = |msg: String| Diagnostic { target: Some(w.target), source: w.source, message: msg };
            if w.target >= n || w.source.is_some_and(|s| s >= n) {
                d.push(diag("member index out of range".into()));
                continue;
            }
            if w.source == Some(w.target) {
                d.push(diag("self wiring; h_ii is the implicit identity".into()));
                continue;
            }
            let tgt = self.model(w.target);
            for v in &w.inputs {
                if tgt.internal.get(v).is_none() {
                    d.push(diag(format!("`{v}` is not an internal input of the target")));
                }
                *bound[w.target].entry(v.clone()).or_insert(0) += 1;
            }
            let Some(s) = w.source else { continue };
            let src = self.model(s);
            let Some(name) = &w.output else {
                d.push(diag("wire with a source needs an output block name".into()));
                continue;
            };
            let Some(block) = src.output_block(name) else {
                d.push(diag(format!("source has no output block `{name}`")));
                continue;
            };
            if block.exprs.len() != w.inputs.len() {
                d.push(diag(format!(
                    "dimension mismatch: output `{name}` has {} components, slot has {}",
                    block.exprs.len(),
                    w.inputs.len()
                )));
                continue;
            }
            for (e, v) in block.exprs.iter().zip(&w.inputs) {
                let (Ok(y), Some(wv)) = (e.interval_bound(&src.states), tgt.internal.get(v)) else {
                    continue;
                };
                let slack = crate::poly::EPS_NUM * (1.0 + wv.lo.abs().max(wv.hi.abs()));
                if y.lo < wv.lo - slack || y.hi > wv.hi + slack {
                    d.push(diag(format!("output range {y} not inside W of `{v}` ({wv})")));
                }
            }
        }
        for (i, m) in self.members.iter().enumerate() {
            for v in m.model.internal_vars() {
                match bound[i].get(&v) {
                    None => d.push(Diagnostic {
                        target: Some(i),
                        source: None,
                        message: format!("internal input `{v}` is not covered by wiring"),
                    }),
                    Some(k) if *k > 1 => d.push(Diagnostic {
                        target: Some(i),
                        source: None,
                        message: format!("internal input `{v}` bound {k} times"),
                    }),
                    _ => {}
                }
            }
        }
        d
    }

    /// Circular wiring: internal slot `prev` ← member i−1, `next` ← member i+1.
    pub fn ring(model: Arc<Subsystem>, n: usize, prefix: &str, prev: &str, next: &str, output: &str) -> Self {
        let members = (0..n)
            .map(|i| Member { id: format!("{prefix}{}", i + 1), model: model.clone() })
            .collect();
        let mut wiring = Vec::with_capacity(2 * n);
        for i in 0..n {
            let (p, q) = ((i + n - 1) % n, (i + 1) % n);
            for (slot, src) in [(prev, p), (next, q)] {
                wiring.push(if n > 1 && src != i {
                    Wire { target: i, inputs: vec![slot.into()], source: Some(src), output: Some(output.into()) }
                } else {
                    Wire { target: i, inputs: vec![slot.into()], source: None, output: None }
                });
            }
        }
        Interconnection { members, wiring }
    }

    /// All-to-all wiring: member i's slots `slots[k]` take the k-th other member's output.
    pub fn full(model: Arc<Subsystem>, n: usize, prefix: &str, slots: &[String], output: &str) -> Self {
        let members = (0..n)
            .map(|i| Member { id: format!("{prefix}{}", i + 1), model: model.clone() })
            .collect();
        let mut wiring = Vec::with_capacity(n * slots.len());
        for i in 0..n {
            let others = (0..n).filter(|&j| j != i);
            let mut used = 0;
            for (slot, j) in slots.iter().zip(others) {
                wiring.push(Wire { target: i, inputs: vec![slot.clone()], source: Some(j), output: Some(output.into()) });
                used += 1;
            }
            for slot in &slots[used..] {
                wiring.push(Wire { target: i, inputs: vec![slot.clone()], source: None, output: None });
            }
        }
        Interconnection { members, wiring }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::poly::poly;

    #[test]
    fn room_network_valid() {
        let net = fixtures::room_network(5, fixtures::RoomModel::Bilinear);
        assert!(net.validate().is_empty(), "{:?}", net.validate());
        assert_eq!(net.classes().len(), 1);
    }

    #[test]
    fn kuramoto_network_valid() {
        let net = fixtures::kuramoto_network(6);
        assert!(net.validate().is_empty(), "{:?}", net.validate());
    }

    #[test]
    fn dimension_mismatch_reported() {
        let mut sub = fixtures::room_subsystem(fixtures::RoomModel::Bilinear);
        sub.outputs.push(OutputBlock { name: "pair".into(), exprs: vec![poly("T"), poly("T")] });
        let sub = Arc::new(sub);
        let mut net = Interconnection::ring(sub, 3, "room", "w1", "w2", "y");
        net.wiring[0].output = Some("pair".into());
        let d = net.validate();
        assert_eq!(d.len(), 1);
        assert!(d[0].message.contains("dimension mismatch"));
        assert_eq!((d[0].target, d[0].source), (Some(0), Some(2)));
    }

    #[test]
    fn range_and_coverage_checked() {
        let sub = Arc::new(fixtures::room_subsystem(fixtures::RoomModel::Bilinear));
        let mut net = Interconnection::ring(sub.clone(), 3, "room", "w1", "w2", "y");
        net.wiring.pop();
        assert!(net.validate().iter().any(|d| d.message.contains("not covered")));
        let mut narrow = (*sub).clone();
        narrow.internal = IntervalBox::new([("w1", 10.0, 20.0), ("w2", 1.0, 50.0)]);
        let net = Interconnection::ring(Arc::new(narrow), 3, "room", "w1", "w2", "y");
        assert!(net.validate().iter().any(|d| d.message.contains("not inside W")));
    }

    #[test]
    fn close_loop_room_paper_controller() {
        let sub = fixtures::room_subsystem(fixtures::RoomModel::Bilinear);
        let closed = sub.close_loop(&[poly("-0.012 * T + 0.8")]).unwrap();
        assert!(closed.input_vars().is_empty());
        // Hand evaluation at T = 20, w = (19, 21), ς = 0.
        let (eps, iota, mu, te, th) = (0.005, 0.06, 0.145, -15.0, 45.0);
        let nu = -0.012 * 20.0 + 0.8;
        let want = (1.0 - 2.0 * eps - iota - mu * nu) * 20.0 + mu * th * nu + eps * 40.0 + iota * te;
        let got = closed.dynamics[0]
            .eval_pairs(&[("T", 20.0), ("w1", 19.0), ("w2", 21.0), ("s", 0.0)])
            .unwrap();
        assert!((got - want).abs() < 1e-12);
        let zero = sub.close_loop(&[Polynomial::zero()]).unwrap();
        let got = zero.dynamics[0].eval_pairs(&[("T", 20.0), ("w1", 19.0), ("w2", 21.0), ("s", 0.0)]).unwrap();
        assert!((got - ((1.0 - 2.0 * eps - iota) * 20.0 + eps * 40.0 + iota * te)).abs() < 1e-12);
    }

    #[test]
    fn close_loop_kuramoto_degree() {
        let sub = fixtures::kuramoto_subsystem(4);
        let closed = sub.close_loop(&[poly("-0.532 * theta^2 + 1.69")]).unwrap();
        assert_eq!(closed.dynamics[0].degree_in("theta"), 2);
    }

    #[test]
    fn close_loop_rejects_non_state() {
        let sub = fixtures::room_subsystem(fixtures::RoomModel::Bilinear);
        assert!(sub.close_loop(&[poly("w1")]).is_err());
        assert!(sub.close_loop(&[]).is_err());
    }
}
