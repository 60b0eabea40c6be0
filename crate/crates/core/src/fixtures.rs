//! Built-in case studies: the circular room network, the Kuramoto network,
//! and the six-state decomposition example.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use crate::automata::Dfa;
use crate::certify::{Controller, CsbcRecord, LinearGain};
use crate::poly::{poly, IntervalBox, NoiseModel, Polynomial};
use crate::system::{Coupling, InputSet, Interconnection, LabeledRegions, OutputBlock, Quantifier, Subsystem};

pub const ROOM_EPS: f64 = 0.005;
pub const ROOM_IOTA: f64 = 0.06;
pub const ROOM_MU: f64 = 0.145;
pub const ROOM_TE: f64 = -15.0;
pub const ROOM_TH: f64 = 45.0;

pub const KURAMOTO_TAU: f64 = 0.1;
pub const KURAMOTO_OMEGA: f64 = 0.01;
pub const KURAMOTO_K: f64 = 0.0012;

/// How the heater input enters the room dynamics.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoomModel {
    /// Diagonal 1 − 2ε − ι − μν, plus μT_Hν: the input multiplies the state.
    Bilinear,
    /// Constant diagonal ā = 1 − 2ε − ι, input enters only through μT_Hν.
    ConstantA,
}

pub fn room_subsystem(model: RoomModel) -> Subsystem {
    let a = 1.0 - 2.0 * ROOM_EPS - ROOM_IOTA;
    let mut f = Polynomial::var("T").scale(a)
        .add(&Polynomial::var("nu").scale(ROOM_MU * ROOM_TH))
        .add(&poly("w1 + w2").scale(ROOM_EPS))
        .add(&Polynomial::constant(ROOM_IOTA * ROOM_TE))
        .add(&poly("0.1 * s"));
    if model == RoomModel::Bilinear {
        f = f.sub(&poly("nu * T").scale(ROOM_MU));
    }
    let mut noise = BTreeMap::new();
    noise.insert("s".to_string(), NoiseModel::gaussian(1.0));
    Subsystem {
        name: "room".into(),
        states: IntervalBox::new([("T", 1.0, 50.0)]),
        inputs: InputSet::Box { bounds: IntervalBox::new([("nu", 0.0, 1.0)]) },
        internal: IntervalBox::new([("w1", 1.0, 50.0), ("w2", 1.0, 50.0)]),
        dynamics: vec![f],
        outputs: vec![OutputBlock { name: "y".into(), exprs: vec![poly("T")] }],
        noise,
        couplings: vec![],
    }
}

/// Room subsystem with a finite heater input set.
pub fn room_subsystem_finite(model: RoomModel, values: &[f64]) -> Subsystem {
    let mut s = room_subsystem(model);
    s.inputs = InputSet::Finite { vars: vec!["nu".into()], values: values.iter().map(|v| vec![*v]).collect() };
    s
}

pub fn room_network(n: usize, model: RoomModel) -> Interconnection {
    Interconnection::ring(Arc::new(room_subsystem(model)), n, "room", "w1", "w2", "y")
}

pub fn room_regions(n: usize) -> LabeledRegions {
    let b = |lo: f64, hi: f64| IntervalBox::new([("T", lo, hi)]);
    LabeledRegions::homogeneous(
        n,
        &[
            ("p0", Quantifier::All, b(19.5, 20.0)),
            ("p1", Quantifier::Any, b(1.0, 17.0)),
            ("p2", Quantifier::Any, b(23.0, 50.0)),
        ],
        "p3",
    )
}

/// Specification: start in p0, then stay in p0/p3 (comfort band) forever.
pub fn room_dfa() -> Dfa {
    Dfa::from_edges(
        &["q0", "q1", "q2"],
        &["p0", "p1", "p2", "p3"],
        "q0",
        &["q0", "q1"],
        &[
            ("q0", &["p0"], "q1"),
            ("q0", &["p1", "p2", "p3"], "q2"),
            ("q1", &["p0", "p3"], "q1"),
            ("q1", &["p1", "p2"], "q2"),
            ("q2", &["p0", "p1", "p2", "p3"], "q2"),
        ],
    )
    .expect("room DFA is well formed")
}

pub fn kuramoto_slots(n: usize) -> Vec<String> {
    (1..n).map(|k| format!("w{k}")).collect()
}

pub fn kuramoto_subsystem(n: usize) -> Subsystem {
    let slots = kuramoto_slots(n);
    let mut internal = IntervalBox::default();
    for s in &slots {
        internal.push(s.clone(), crate::poly::Interval::new(0.0, 2.0 * PI));
    }
    let f = poly("theta + u + 0.05 * s")
        .add(&Polynomial::constant(KURAMOTO_TAU * KURAMOTO_OMEGA))
        .add(&Polynomial::var("phi").scale(KURAMOTO_K * KURAMOTO_TAU / n as f64));
    let mut noise = BTreeMap::new();
    noise.insert("s".to_string(), NoiseModel::gaussian(1.0));
    Subsystem {
        name: "oscillator".into(),
        states: IntervalBox::new([("theta", 0.0, 2.0 * PI)]),
        inputs: InputSet::Box { bounds: IntervalBox::new([("u", -20.0, 20.0)]) },
        internal,
        dynamics: vec![f],
        outputs: vec![OutputBlock { name: "y".into(), exprs: vec![poly("theta")] }],
        noise,
        couplings: vec![Coupling::SineSum { var: "phi".into(), state: "theta".into(), inputs: slots }],
    }
}

pub fn kuramoto_network(n: usize) -> Interconnection {
    Interconnection::full(Arc::new(kuramoto_subsystem(n)), n, "osc", &kuramoto_slots(n), "y")
}

pub fn kuramoto_regions(n: usize) -> LabeledRegions {
    let b = |lo: f64, hi: f64| IntervalBox::new([("theta", lo, hi)]);
    let all = Quantifier::All;
    LabeledRegions::homogeneous(
        n,
        &[
            ("p0", all, b(0.0, PI / 15.0)),
            ("p1", all, b(4.0 * PI / 9.0, 5.0 * PI / 9.0)),
            ("p2", all, b(14.0 * PI / 15.0, PI)),
            ("p3", all, b(PI, 16.0 * PI / 15.0)),
            ("p4", all, b(13.0 * PI / 9.0, 14.0 * PI / 9.0)),
            ("p5", all, b(29.0 * PI / 15.0, 2.0 * PI)),
        ],
        "p6",
    )
}

/// Specification: from p1 avoid p0/p2; from p4 avoid p3/p5; other starts violate.
pub fn kuramoto_dfa() -> Dfa {
    let props = ["p0", "p1", "p2", "p3", "p4", "p5", "p6"];
    Dfa::from_edges(
        &["q0", "q1", "q2", "q3"],
        &props,
        "q0",
        &["q0", "q1", "q2"],
        &[
            ("q0", &["p1"], "q1"),
            ("q0", &["p4"], "q2"),
            ("q0", &["p0", "p2", "p3", "p5", "p6"], "q3"),
            ("q1", &["p0", "p2"], "q3"),
            ("q1", &["p1", "p3", "p4", "p5", "p6"], "q1"),
            ("q2", &["p3", "p5"], "q3"),
            ("q2", &["p0", "p1", "p2", "p4", "p6"], "q2"),
            ("q3", &props, "q3"),
        ],
    )
    .expect("Kuramoto DFA is well formed")
}

/// Complement automaton of the six-state decomposition example (accepting q5).
pub fn example58_complement() -> Dfa {
    let props = ["p0", "p1", "p2", "p3"];
    Dfa::from_edges(
        &["q0", "q1", "q2", "q3", "q4", "q5"],
        &props,
        "q0",
        &["q5"],
        &[
            ("q0", &["p0"], "q1"),
            ("q0", &["p1", "p3"], "q5"),
            ("q0", &["p2"], "q3"),
            ("q1", &["p1"], "q2"),
            ("q1", &["p0", "p2", "p3"], "q1"),
            ("q2", &["p3"], "q5"),
            ("q2", &["p0", "p1", "p2"], "q2"),
            ("q3", &["p0"], "q4"),
            ("q3", &["p1"], "q5"),
            ("q3", &["p2", "p3"], "q3"),
            ("q4", &["p3"], "q5"),
            ("q4", &["p0", "p1", "p2"], "q4"),
            ("q5", &props, "q5"),
        ],
    )
    .expect("example DFA is well formed")
}

/// Published room certificate and controller (imported verbatim).
pub fn paper_room_csbc() -> CsbcRecord {
    let b = |lo: f64, hi: f64| IntervalBox::new([("T", lo, hi)]);
    CsbcRecord {
        subsystem: "room".into(),
        barrier: poly("0.7659 * T^2 - 30.24 * T + 298.5"),
        controller: Controller::polynomial(vec![poly("-0.012 * T + 0.8")]),
        eta: 0.13,
        beta: 4.4,
        c: 0.0139,
        alpha: LinearGain(5e-5),
        kappa: LinearGain(0.99),
        rho: LinearGain(4.99e-5),
        init: vec![b(19.5, 20.0)],
        unsafe_set: vec![b(1.0, 17.0), b(23.0, 50.0)],
        provenance: "imported: paper_room".into(),
    }
}

/// Published Kuramoto certificates: 1 for the task starting in p1, 2 for p4.
pub fn paper_kuramoto_csbc(task: u8) -> CsbcRecord {
    let b = |lo: f64, hi: f64| IntervalBox::new([("theta", lo, hi)]);
    let (barrier, nu, eta, beta, c, alpha, kappa, rho, init, unsafe_set) = match task {
        1 => (
            "0.001361 * theta^8 - 0.0001877 * theta^7 + 0.0004904 * theta^6 - 0.03395 * theta^5 \
             + 0.00107 * theta^4 - 0.1927 * theta^3 + 1.71 * theta^2 - 3.205 * theta + 1.827",
            "-0.532 * theta^2 + 1.69",
            0.02,
            1.2,
            0.0083,
            4.5e-7,
            0.997,
            4.49e-7,
            b(4.0 * PI / 9.0, 5.0 * PI / 9.0),
            vec![b(0.0, PI / 15.0), b(14.0 * PI / 15.0, PI)],
        ),
        2 => (
            "0.5396 * theta^2 - 5.086 * theta + 11.86",
            "-0.21 * theta^2 + 4.6591",
            0.017,
            1.0,
            0.0162,
            4.5e-8,
            0.998,
            4.49e-8,
            b(13.0 * PI / 9.0, 14.0 * PI / 9.0),
            vec![b(PI, 16.0 * PI / 15.0), b(29.0 * PI / 15.0, 2.0 * PI)],
        ),
        _ => panic!("Kuramoto task must be 1 or 2"),
    };
    CsbcRecord {
        subsystem: "oscillator".into(),
        barrier: poly(barrier),
        controller: Controller::polynomial(vec![poly(nu)]),
        eta,
        beta,
        c,
        alpha: LinearGain(alpha),
        kappa: LinearGain(kappa),
        rho: LinearGain(rho),
        init: vec![init],
        unsafe_set,
        provenance: format!("imported: paper_kuramoto task {task}"),
    }
}
