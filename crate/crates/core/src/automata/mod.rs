//! DFA specifications and their decomposition into sequential reachability tasks.

mod switching;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use switching::{SwitchState, SwitchingAutomaton};

/// Config form of a DFA: explicit state list and (state, prop, state) triples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DfaSpec {
    pub states: Vec<String>,
    pub alphabet: Vec<String>,
    pub initial: String,
    pub accepting: Vec<String>,
    pub transitions: Vec<(String, String, String)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DfaSpec", into = "DfaSpec")]
pub struct Dfa {
    states: Vec<String>,
    alphabet: Vec<String>,
    initial: usize,
    accepting: BTreeSet<usize>,
    /// delta[q][p]
    delta: Vec<Vec<usize>>,
}

impl TryFrom<DfaSpec> for Dfa {
    type Error = Error;

    fn try_from(s: DfaSpec) -> Result<Dfa> {
        let idx = |names: &[String], n: &str, what: &str| {
            names
                .iter()
                .position(|x| x == n)
                .ok_or_else(|| Error::Automaton(format!("unknown {what} `{n}`")))
        };
        let mut uniq = BTreeSet::new();
        for q in &s.states {
            if !uniq.insert(q) {
                return Err(Error::Automaton(format!("state `{q}` listed twice")));
            }
        }
        let initial = idx(&s.states, &s.initial, "state")?;
        let accepting = s
            .accepting
            .iter()
            .map(|q| idx(&s.states, q, "state"))
            .collect::<Result<BTreeSet<_>>>()?;
        let mut delta = vec![vec![usize::MAX; s.alphabet.len()]; s.states.len()];
        for (q, p, r) in &s.transitions {
            let (qi, pi, ri) = (idx(&s.states, q, "state")?, idx(&s.alphabet, p, "proposition")?, idx(&s.states, r, "state")?);
            if delta[qi][pi] != usize::MAX && delta[qi][pi] != ri {
                return Err(Error::Automaton(format!("nondeterministic transition ({q}, {p})")));
            }
            delta[qi][pi] = ri;
        }
        for (qi, row) in delta.iter().enumerate() {
            if let Some(pi) = row.iter().position(|&r| r == usize::MAX) {
                return Err(Error::Automaton(format!(
                    "transition function not total: missing ({}, {})",
                    s.states[qi], s.alphabet[pi]
                )));
            }
        }
        Ok(Dfa { states: s.states, alphabet: s.alphabet, initial, accepting, delta })
    }
}

impl From<Dfa> for DfaSpec {
    fn from(d: Dfa) -> DfaSpec {
        let mut transitions = Vec::new();
        for (q, row) in d.delta.iter().enumerate() {
            for (p, r) in row.iter().enumerate() {
                transitions.push((d.states[q].clone(), d.alphabet[p].clone(), d.states[*r].clone()));
            }
        }
        DfaSpec {
            initial: d.states[d.initial].clone(),
            accepting: d.accepting.iter().map(|q| d.states[*q].clone()).collect(),
            states: d.states,
            alphabet: d.alphabet,
            transitions,
        }
    }
}

impl Dfa {
    /// Build from edges carrying proposition sets: (from, [props], to).
    pub fn from_edges(
        states: &[&str],
        alphabet: &[&str],
        initial: &str,
        accepting: &[&str],
        edges: &[(&str, &[&str], &str)],
    ) -> Result<Dfa> {
        let mut transitions = Vec::new();
        for (q, ps, r) in edges {
            for p in *ps {
                transitions.push((q.to_string(), p.to_string(), r.to_string()));
            }
        }
        Dfa::try_from(DfaSpec {
            states: states.iter().map(|s| s.to_string()).collect(),
            alphabet: alphabet.iter().map(|s| s.to_string()).collect(),
            initial: initial.to_string(),
            accepting: accepting.iter().map(|s| s.to_string()).collect(),
            transitions,
        })
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn alphabet(&self) -> &[String] {
        &self.alphabet
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    pub fn accepting(&self) -> &BTreeSet<usize> {
        &self.accepting
    }

    pub fn is_accepting(&self, q: usize) -> bool {
        self.accepting.contains(&q)
    }

    pub fn name(&self, q: usize) -> &str {
        &self.states[q]
    }

    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.states.iter().position(|s| s == name)
    }

    pub fn prop_index(&self, p: &str) -> Option<usize> {
        self.alphabet.iter().position(|s| s == p)
    }

    pub fn step(&self, q: usize, p: usize) -> usize {
        self.delta[q][p]
    }

    pub fn step_prop(&self, q: usize, p: &str) -> Result<usize> {
        let pi = self
            .prop_index(p)
            .ok_or_else(|| Error::Automaton(format!("unknown proposition `{p}`")))?;
        Ok(self.delta[q][pi])
    }

    /// δ*(q0, word).
    pub fn run_word<'a>(&self, word: impl IntoIterator<Item = &'a str>) -> Result<usize> {
        let mut q = self.initial;
        for p in word {
            q = self.step_prop(q, p)?;
        }
        Ok(q)
    }

    pub fn complement(&self) -> Dfa {
        let accepting = (0..self.states.len()).filter(|q| !self.accepting.contains(q)).collect();
        Dfa { accepting, ..self.clone() }
    }

    /// σ(q, q′): propositions leading from q to q′.
    pub fn edge_symbols(&self, q: usize, r: usize) -> BTreeSet<String> {
        self.delta[q]
            .iter()
            .enumerate()
            .filter(|(_, t)| **t == r)
            .map(|(p, _)| self.alphabet[p].clone())
            .collect()
    }

    /// Δ(q): successors of q other than q itself.
    pub fn successors(&self, q: usize) -> BTreeSet<usize> {
        self.delta[q].iter().copied().filter(|&r| r != q).collect()
    }

    /// Q_z: states with at least one self-loop.
    pub fn self_loop_states(&self) -> BTreeSet<usize> {
        (0..self.states.len())
            .filter(|&q| self.delta[q].contains(&q))
            .collect()
    }

    /// R_M: accepting runs with at most M+1 states and no consecutive repetition.
    pub fn accepting_runs(&self, m: usize) -> Vec<AcceptingRun> {
        let mut out = Vec::new();
        let mut path = vec![self.initial];
        self.dfs(&mut path, m + 1, &mut out);
        out.sort_by(|a, b| (a.states.len(), &a.states).cmp(&(b.states.len(), &b.states)));
        out
    }

    fn dfs(&self, path: &mut Vec<usize>, max_len: usize, out: &mut Vec<AcceptingRun>) {
        let q = *path.last().unwrap();
        if path.len() >= 2 && self.is_accepting(q) {
            out.push(self.make_run(path));
        }
        if path.len() == max_len {
            return;
        }
        for r in self.successors(q) {
            path.push(r);
            self.dfs(path, max_len, out);
            path.pop();
        }
    }

    fn make_run(&self, states: &[usize]) -> AcceptingRun {
        AcceptingRun {
            names: states.iter().map(|&q| self.states[q].clone()).collect(),
            symbols: states.windows(2).map(|w| self.edge_symbols(w[0], w[1])).collect(),
            states: states.to_vec(),
        }
    }

    /// P^p(q): one element per consecutive triple of the run.
    pub fn reach_elements(&self, run: &AcceptingRun, m: usize) -> Vec<ReachElement> {
        let qz = self.self_loop_states();
        let len = run.states.len();
        if len < 3 {
            return Vec::new();
        }
        (0..len - 2)
            .map(|l| {
                let (a, b, c) = (run.states[l], run.states[l + 1], run.states[l + 2]);
                let horizon = if qz.contains(&b) { m + 2 - len } else { 1 };
                ReachElement {
                    q: self.states[a].clone(),
                    q1: self.states[b].clone(),
                    q2: self.states[c].clone(),
                    horizon,
                    init_symbols: run.symbols[l].clone(),
                    unsafe_symbols: run.symbols[l + 1].clone(),
                }
            })
            .collect()
    }

    pub fn partition_key(&self, q: usize, r: usize) -> PartitionKey {
        PartitionKey {
            q: self.states[q].clone(),
            q1: self.states[r].clone(),
            successors: self.successors(r).iter().map(|&s| self.states[s].clone()).collect(),
        }
    }

    /// Graph-description export (DOT).
    pub fn to_dot(&self, name: &str) -> String {
        let mut s = format!("digraph {name} {{\n  rankdir=LR;\n  __start [shape=point];\n");
        for (q, n) in self.states.iter().enumerate() {
            let shape = if self.is_accepting(q) { "doublecircle" } else { "circle" };
            s += &format!("  \"{n}\" [shape={shape}];\n");
        }
        s += &format!("  __start -> \"{}\";\n", self.states[self.initial]);
        for q in 0..self.states.len() {
            let mut targets: BTreeMap<usize, Vec<&str>> = BTreeMap::new();
            for (p, r) in self.delta[q].iter().enumerate() {
                targets.entry(*r).or_default().push(&self.alphabet[p]);
            }
            for (r, ps) in targets {
                s += &format!(
                    "  \"{}\" -> \"{}\" [label=\"{}\"];\n",
                    self.states[q],
                    self.states[r],
                    ps.join(" | ")
                );
            }
        }
        s + "}\n"
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AcceptingRun {
    #[serde(skip)]
    pub states: Vec<usize>,
    pub names: Vec<String>,
    /// σ(q_l, q_{l+1}) for each step.
    pub symbols: Vec<BTreeSet<String>>,
}

impl AcceptingRun {
    pub fn first_symbols(&self) -> &BTreeSet<String> {
        &self.symbols[0]
    }
}

impl fmt::Display for AcceptingRun {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({})", self.names.join(","))
    }
}

/// R^p_M: runs whose first edge can be taken on p.
pub fn runs_by_prop<'a>(runs: &'a [AcceptingRun], p: &str) -> Vec<&'a AcceptingRun> {
    runs.iter().filter(|r| r.first_symbols().contains(p)).collect()
}

/// ϑ = (q, q′, q″, T_h) with the edge symbol sets resolving X_0 and X_u.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ReachElement {
    pub q: String,
    pub q1: String,
    pub q2: String,
    pub horizon: usize,
    pub init_symbols: BTreeSet<String>,
    pub unsafe_symbols: BTreeSet<String>,
}

impl ReachElement {
    pub fn key(&self) -> (String, String, String, usize) {
        (self.q.clone(), self.q1.clone(), self.q2.clone(), self.horizon)
    }
}

impl fmt::Display for ReachElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{},{})", self.q, self.q1, self.q2, self.horizon)
    }
}

/// γ key (q, q′, Δ(q′)).
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PartitionKey {
    pub q: String,
    pub q1: String,
    pub successors: BTreeSet<String>,
}

impl fmt::Display for PartitionKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let succ: Vec<&str> = self.successors.iter().map(String::as_str).collect();
        write!(f, "({},{},{{{}}})", self.q, self.q1, succ.join(","))
    }
}

impl PartitionKey {
    /// File-name friendly form.
    pub fn slug(&self) -> String {
        let succ: Vec<&str> = self.successors.iter().map(String::as_str).collect();
        format!("{}_{}_{}", self.q, self.q1, succ.join("-"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionSet {
    pub key: PartitionKey,
    pub members: Vec<ReachElement>,
}

impl PartitionSet {
    /// Union of the initial-edge symbols (shared by all members) and of the unsafe-edge symbols.
    pub fn roles(&self) -> (BTreeSet<String>, BTreeSet<String>) {
        let mut init = BTreeSet::new();
        let mut uns = BTreeSet::new();
        for m in &self.members {
            init.extend(m.init_symbols.iter().cloned());
            uns.extend(m.unsafe_symbols.iter().cloned());
        }
        (init, uns)
    }
}

/// Group elements by (q, q′); Δ(q′) is determined by q′.
pub fn partition(dfa_c: &Dfa, elements: &[ReachElement]) -> Vec<PartitionSet> {
    let mut groups: BTreeMap<PartitionKey, BTreeSet<ReachElement>> = BTreeMap::new();
    for e in elements {
        let (q, r) = (dfa_c.state_index(&e.q).unwrap(), dfa_c.state_index(&e.q1).unwrap());
        groups.entry(dfa_c.partition_key(q, r)).or_default().insert(e.clone());
    }
    groups
        .into_iter()
        .map(|(key, m)| PartitionSet { key, members: m.into_iter().collect() })
        .collect()
}

/// Full §6/§7.1 decomposition of a specification automaton.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Decomposition {
    pub horizon: usize,
    pub complement: Dfa,
    pub runs: Vec<AcceptingRun>,
    /// p → indices into `runs` (R^p_M).
    pub runs_by_prop: BTreeMap<String, Vec<usize>>,
    /// (p, run index) → P^p(q).
    pub elements: Vec<PropRunElements>,
    pub partitions: Vec<PartitionSet>,
    pub switching: SwitchingAutomaton,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropRunElements {
    pub prop: String,
    pub run: usize,
    pub elements: Vec<ReachElement>,
}

impl Decomposition {
    pub fn new(spec: &Dfa, m: usize) -> Result<Decomposition> {
        if m < 1 {
            return Err(Error::Domain("horizon M must be at least 1".into()));
        }
        let dfa_c = spec.complement();
        let runs = dfa_c.accepting_runs(m);
        let mut by_prop = BTreeMap::new();
        let mut elements = Vec::new();
        let mut all = BTreeSet::new();
        for p in dfa_c.alphabet() {
            let idx: Vec<usize> = (0..runs.len()).filter(|&k| runs[k].first_symbols().contains(p)).collect();
            for &k in &idx {
                let els = dfa_c.reach_elements(&runs[k], m);
                all.extend(els.iter().cloned());
                elements.push(PropRunElements { prop: p.clone(), run: k, elements: els });
            }
            by_prop.insert(p.clone(), idx);
        }
        let all: Vec<ReachElement> = all.into_iter().collect();
        let partitions = partition(&dfa_c, &all);
        let switching = SwitchingAutomaton::new(&dfa_c);
        Ok(Decomposition { horizon: m, complement: dfa_c, runs, runs_by_prop: by_prop, elements, partitions, switching })
    }

    pub fn runs_for(&self, p: &str) -> Vec<&AcceptingRun> {
        self.runs_by_prop
            .get(p)
            .map(|v| v.iter().map(|&k| &self.runs[k]).collect())
            .unwrap_or_default()
    }

    pub fn elements_for(&self, p: &str, run: usize) -> &[ReachElement] {
        self.elements
            .iter()
            .find(|e| e.prop == p && e.run == run)
            .map(|e| e.elements.as_slice())
            .unwrap_or(&[])
    }

    pub fn partition_of(&self, e: &ReachElement) -> Option<&PartitionSet> {
        self.partitions.iter().find(|s| s.members.contains(e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn sorted(v: impl IntoIterator<Item = String>) -> Vec<String> {
        let mut v: Vec<String> = v.into_iter().collect();
        v.sort();
        v
    }

    #[test]
    fn complement_is_involution() {
        let d = fixtures::room_dfa();
        assert_eq!(d.complement().complement(), d);
        let c = d.complement();
        assert_eq!(c.accepting().iter().map(|&q| c.name(q)).collect::<Vec<_>>(), ["q2"]);
        let all = Dfa::from_edges(&["a", "b"], &["x"], "a", &["a", "b"], &[("a", &["x"], "b"), ("b", &["x"], "b")]).unwrap();
        let c = all.complement();
        assert!(c.accepting().is_empty());
        assert!(c.accepting_runs(5).is_empty());
    }

    #[test]
    fn example_5_8_runs() {
        let c = fixtures::example58_complement();
        let runs = c.accepting_runs(4);
        assert_eq!(
            sorted(runs.iter().map(|r| r.to_string())),
            sorted(["(q0,q5)", "(q0,q3,q5)", "(q0,q1,q2,q5)", "(q0,q3,q4,q5)"].map(String::from))
        );
        let by = |p: &str| sorted(runs_by_prop(&runs, p).iter().map(|r| r.to_string()));
        assert_eq!(by("p0"), ["(q0,q1,q2,q5)"]);
        assert_eq!(by("p1"), ["(q0,q5)"]);
        assert_eq!(by("p3"), ["(q0,q5)"]);
        assert_eq!(by("p2"), ["(q0,q3,q4,q5)", "(q0,q3,q5)"]);
    }

    #[test]
    fn example_5_8_elements() {
        let c = fixtures::example58_complement();
        let runs = c.accepting_runs(4);
        let find = |s: &str| runs.iter().find(|r| r.to_string() == s).unwrap();
        let els = |s: &str| sorted(c.reach_elements(find(s), 4).iter().map(|e| e.to_string()));
        assert_eq!(els("(q0,q1,q2,q5)"), ["(q0,q1,q2,2)", "(q1,q2,q5,2)"]);
        assert_eq!(els("(q0,q3,q5)"), ["(q0,q3,q5,3)"]);
        assert_eq!(els("(q0,q3,q4,q5)"), ["(q0,q3,q4,2)", "(q3,q4,q5,2)"]);
        assert!(els("(q0,q5)").is_empty());
    }

    #[test]
    fn example_5_8_partition_shares_q3_source() {
        let d = Decomposition::new(&fixtures::example58_complement().complement(), 4).unwrap();
        let set = d
            .partitions
            .iter()
            .find(|s| s.key.q == "q0" && s.key.q1 == "q3")
            .unwrap();
        assert_eq!(sorted(set.members.iter().map(|e| e.to_string())), ["(q0,q3,q4,2)", "(q0,q3,q5,3)"]);
        assert_eq!(set.key.to_string(), "(q0,q3,{q4,q5})");
        let total: usize = d.partitions.iter().map(|s| s.members.len()).sum();
        assert_eq!(total, 5);
    }

    #[test]
    fn kuramoto_decomposition() {
        let d = Decomposition::new(&fixtures::kuramoto_dfa(), 7).unwrap();
        assert_eq!(
            sorted(d.runs.iter().map(|r| r.to_string())),
            sorted(["(q0,q3)", "(q0,q1,q3)", "(q0,q2,q3)"].map(String::from))
        );
        let els: Vec<String> = d.partitions.iter().flat_map(|s| s.members.iter().map(|e| e.to_string())).collect();
        assert_eq!(sorted(els), ["(q0,q1,q3,6)", "(q0,q2,q3,6)"]);
        assert_eq!(d.partitions.len(), 2);
        let p1 = d.runs_for("p1");
        assert_eq!(p1.len(), 1);
        assert_eq!(p1[0].to_string(), "(q0,q1,q3)");
        assert_eq!(d.runs_for("p4")[0].to_string(), "(q0,q2,q3)");
    }

    #[test]
    fn room_decomposition() {
        let d = Decomposition::new(&fixtures::room_dfa(), 10).unwrap();
        let els: Vec<String> = d.partitions.iter().flat_map(|s| s.members.iter().map(|e| e.to_string())).collect();
        assert_eq!(els, ["(q0,q1,q2,9)"]);
        assert_eq!(d.runs_for("p0")[0].to_string(), "(q0,q1,q2)");
        for p in ["p1", "p2", "p3"] {
            let r = d.runs_for(p);
            assert_eq!(r.len(), 1);
            assert_eq!(r[0].to_string(), "(q0,q2)");
        }
        let e = &d.partitions[0].members[0];
        assert_eq!(sorted(e.init_symbols.iter().cloned()), ["p0"]);
        assert_eq!(sorted(e.unsafe_symbols.iter().cloned()), ["p1", "p2"]);
    }

    #[test]
    fn unreachable_accepting_gives_no_runs() {
        let d = Dfa::from_edges(
            &["a", "b", "f"],
            &["x"],
            "a",
            &["f"],
            &[("a", &["x"], "b"), ("b", &["x"], "a"), ("f", &["x"], "f")],
        )
        .unwrap();
        assert!(d.accepting_runs(6).is_empty());
    }

    #[test]
    fn dfa_json_round_trip_and_totality() {
        let d = fixtures::kuramoto_dfa();
        let s = serde_json::to_string(&d).unwrap();
        let back: Dfa = serde_json::from_str(&s).unwrap();
        assert_eq!(back, d);
        let mut spec = DfaSpec::from(d);
        spec.transitions.pop();
        let err = Dfa::try_from(spec).unwrap_err();
        assert!(err.to_string().contains("not total"));
    }

    #[test]
    fn dot_export_mentions_every_state() {
        let d = fixtures::example58_complement();
        let dot = d.to_dot("A");
        for q in d.states() {
            assert!(dot.contains(&format!("\"{q}\"")));
        }
        assert!(dot.contains("doublecircle"));
    }
}
