use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{Dfa, PartitionKey};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SwitchState {
    /// q_{0s} = (q_0, Δ(q_0)).
    Init { q: String, successors: Vec<String> },
    Task { key: PartitionKey },
    /// Accepting state of the complement (specification violated).
    Final { q: String },
}

impl fmt::Display for SwitchState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SwitchState::Init { q, successors } => write!(f, "({q},{{{}}})", successors.join(",")),
            SwitchState::Task { key } => write!(f, "{key}"),
            SwitchState::Final { q } => write!(f, "{q}"),
        }
    }
}

/// Controller-switching DFA A^c_s built from the complement automaton.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwitchingAutomaton {
    pub states: Vec<SwitchState>,
    pub alphabet: Vec<String>,
    pub initial: usize,
    /// transitions[s][p]
    pub transitions: Vec<Vec<usize>>,
    /// Complement-DFA state tracked by each switching state (q′ for tasks).
    #[serde(skip)]
    tracked: Vec<usize>,
}

impl SwitchingAutomaton {
    pub fn new(dfa_c: &Dfa) -> SwitchingAutomaton {
        let q0 = dfa_c.initial();
        let init = SwitchState::Init {
            q: dfa_c.name(q0).to_string(),
            successors: dfa_c.successors(q0).iter().map(|&s| dfa_c.name(s).to_string()).collect(),
        };
        let mut states = vec![init];
        let mut tracked = vec![q0];
        let mut index: BTreeMap<SwitchState, usize> = BTreeMap::new();
        index.insert(states[0].clone(), 0);
        let mut transitions: Vec<Vec<usize>> = Vec::new();
        let mut queue = VecDeque::from([0usize]);
        let np = dfa_c.alphabet().len();
        while let Some(s) = queue.pop_front() {
            let cur = tracked[s];
            let mut row = vec![s; np];
            if !matches!(states[s], SwitchState::Final { .. }) {
                for (p, slot) in row.iter_mut().enumerate() {
                    let next = dfa_c.step(cur, p);
                    if next == cur {
                        continue;
                    }
                    let target = if dfa_c.is_accepting(next) {
                        SwitchState::Final { q: dfa_c.name(next).to_string() }
                    } else {
                        SwitchState::Task { key: dfa_c.partition_key(cur, next) }
                    };
                    let id = *index.entry(target.clone()).or_insert_with(|| {
                        states.push(target);
                        tracked.push(next);
                        queue.push_back(states.len() - 1);
                        states.len() - 1
                    });
                    *slot = id;
                }
            }
            if transitions.len() <= s {
                transitions.resize(s + 1, Vec::new());
            }
            transitions[s] = row;
        }
        SwitchingAutomaton {
            states,
            alphabet: dfa_c.alphabet().to_vec(),
            initial: 0,
            transitions,
            tracked,
        }
    }

    pub fn step(&self, s: usize, p: usize) -> usize {
        self.transitions[s][p]
    }

    pub fn prop_index(&self, p: &str) -> Option<usize> {
        self.alphabet.iter().position(|a| a == p)
    }

    pub fn is_final(&self, s: usize) -> bool {
        matches!(self.states[s], SwitchState::Final { .. })
    }

    pub fn task_key(&self, s: usize) -> Option<&PartitionKey> {
        match &self.states[s] {
            SwitchState::Task { key } => Some(key),
            _ => None,
        }
    }

    /// Complement-DFA state currently tracked (valid for automata built in this process).
    pub fn tracked_state(&self, s: usize) -> Option<usize> {
        self.tracked.get(s).copied()
    }

    pub fn to_dot(&self, name: &str) -> String {
        let mut out = format!("digraph {name} {{\n  rankdir=LR;\n  __start [shape=point];\n");
        for (k, s) in self.states.iter().enumerate() {
            let shape = if self.is_final(k) { "doublecircle" } else { "box" };
            out += &format!("  s{k} [shape={shape}, label=\"{s}\"];\n");
        }
        out += &format!("  __start -> s{};\n", self.initial);
        for (k, row) in self.transitions.iter().enumerate() {
            let mut targets: BTreeMap<usize, Vec<&str>> = BTreeMap::new();
            for (p, t) in row.iter().enumerate() {
                targets.entry(*t).or_default().push(&self.alphabet[p]);
            }
            for (t, ps) in targets {
                out += &format!("  s{k} -> s{t} [label=\"{}\"];\n", ps.join(" | "));
            }
        }
        out + "}\n"
    }
}
