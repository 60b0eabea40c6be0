use std::collections::BTreeMap;

use super::*;
use crate::certify::{reevaluate, LinearGain};
use crate::fixtures::{self, RoomModel, ROOM_EPS, ROOM_IOTA, ROOM_MU, ROOM_TE, ROOM_TH};
use crate::poly::poly;
use crate::system::OutputBlock;

fn b(lo: f64, hi: f64) -> IntervalBox {
    IntervalBox::new([("T", lo, hi)])
}

fn room_sets() -> (Vec<IntervalBox>, Vec<IntervalBox>) {
    (vec![b(19.5, 20.0)], vec![b(1.0, 17.0), b(23.0, 50.0)])
}

fn all_regressions_hold(s: &Synthesis) {
    for cell in &s.journal {
        for r in &cell.rounds {
            assert_eq!(r.previous_violates.len(), r.counterexamples.len());
            assert!(r.previous_violates.iter().all(|v| *v), "cell {} round {}", cell.cell, r.round);
        }
    }
}

#[test]
fn room_quadratic_is_verified() {
    let sub = fixtures::room_subsystem(RoomModel::Bilinear);
    let (init, unsafe_set) = room_sets();
    let cfg = CegisConfig::default();
    let s = cegis(&sub, &init, &unsafe_set, &cfg).unwrap();
    assert!(s.success);
    let k = s.cell.unwrap();
    assert!(s.journal[k].rounds.len() <= cfg.max_rounds);
    assert_eq!(s.report.as_ref().unwrap().verdict, Verdict::Verified);
    all_regressions_hold(&s);
    let rec = s.record.clone().unwrap();
    assert!(rec.beta > rec.eta);
    assert!(rec.c < rec.beta);
    assert_eq!(rec.barrier.degree(), 2);
    // The returned record re-verifies at the claimed status.
    let again = verify_csbc(&rec, &sub, &VerifyOptions::new(VerifyMode::rigorous())).unwrap();
    assert_eq!(again.verdict, Verdict::Verified);
    assert!(matches!(rec.controller, Controller::Polynomial { .. }));
}

#[test]
fn room_sampled_mode_passes() {
    let sub = fixtures::room_subsystem(RoomModel::Bilinear);
    let (init, unsafe_set) = room_sets();
    let cfg = CegisConfig { verify: VerifyMode::sampled(4000), ..CegisConfig::default() };
    let s = cegis(&sub, &init, &unsafe_set, &cfg).unwrap();
    let rec = s.clone().into_record().unwrap();
    let again = verify_csbc(&rec, &sub, &VerifyOptions::new(VerifyMode::sampled(4000))).unwrap();
    assert!(again.at_least(Verdict::Passed));
    all_regressions_hold(&s);
}

#[test]
fn coinciding_regions_fail() {
    let sub = fixtures::room_subsystem(RoomModel::Bilinear);
    let cfg = CegisConfig { kappa_grid: vec![0.9], ..CegisConfig::default() };
    let s = cegis(&sub, &[b(19.5, 20.0)], &[b(19.5, 20.0)], &cfg).unwrap();
    assert!(!s.success);
    assert!(s.journal.iter().all(|c| c.outcome == "scenario LP infeasible"));
    assert!(matches!(s.into_record(), Err(Error::Synthesis(_))));
}

#[test]
fn rejects_bad_config() {
    let sub = fixtures::room_subsystem(RoomModel::Bilinear);
    let (init, unsafe_set) = room_sets();
    let bad = CegisConfig { kappa_grid: vec![1.0], ..CegisConfig::default() };
    assert!(cegis(&sub, &init, &unsafe_set, &bad).is_err());
    let bad = CegisConfig { conversions: vec![Conversion { theta: 0.5, theta_bar: 1.0, d: 1.0 }], ..CegisConfig::default() };
    assert!(cegis(&sub, &init, &unsafe_set, &bad).is_err());
    assert!(cegis(&sub, &[], &unsafe_set, &CegisConfig::default()).is_err());
    assert!(cegis(&sub, &[b(0.0, 20.0)], &unsafe_set, &CegisConfig::default()).is_err());
}

/// E[B(m + 0.1 s)] = B(m) + 0.01 b₂ for a quadratic B, with b₂ read off by finite differences.
fn room_expectation(barrier: &crate::poly::Polynomial, t: f64, u: f64, w1: f64, w2: f64) -> f64 {
    let at = |v: f64| barrier.eval_pairs(&[("T", v)]).unwrap();
    let b2 = (at(1.0) + at(-1.0) - 2.0 * at(0.0)) / 2.0;
    let a = 1.0 - 2.0 * ROOM_EPS - ROOM_IOTA;
    let m = a * t + ROOM_MU * ROOM_TH * u - ROOM_MU * u * t + ROOM_EPS * (w1 + w2) + ROOM_IOTA * ROOM_TE;
    at(m) + 0.01 * b2
}

#[test]
fn finite_inputs_table_against_enumeration() {
    let values = [0.0, 0.5, 1.0];
    let sub = fixtures::room_subsystem_finite(RoomModel::Bilinear, &values);
    let (init, unsafe_set) = room_sets();
    let s = cegis(&sub, &init, &unsafe_set, &CegisConfig::default()).unwrap();
    all_regressions_hold(&s);
    let rec = s.into_record().unwrap();
    let Controller::Table { cells } = &rec.controller else { panic!("expected a table controller") };
    let (kappa, rho, c) = rec.gains();
    let ws: Vec<f64> = (0..5).map(|k| 1.0 + 49.0 * k as f64 / 4.0).collect();
    let worst = |t: f64, u: f64| {
        let bt = rec.barrier.eval_pairs(&[("T", t)]).unwrap();
        let mut m = f64::NEG_INFINITY;
        for &w1 in &ws {
            for &w2 in &ws {
                let rhs = (kappa * bt).max(rho * w1.max(w2).powi(2)).max(c);
                m = m.max(room_expectation(&rec.barrier, t, u, w1, w2) - rhs);
            }
        }
        m
    };
    let mut t = 1.0;
    while t <= 50.0 {
        let cell = cells.iter().find(|c| c.region.contains_point(&[t])).expect("grid point outside table");
        let table = worst(t, cell.input[0]);
        let best = values.iter().map(|u| worst(t, *u)).fold(f64::INFINITY, f64::min);
        assert!(table <= 1e-9, "table input fails at T = {t}");
        assert!(best <= table);
        t += 0.25;
    }
}

#[test]
fn zero_barrier_is_falsified_in_unsafe_set() {
    let sub = fixtures::room_subsystem(RoomModel::Bilinear);
    let (init, unsafe_set) = room_sets();
    let mut rec = fixtures::paper_room_csbc();
    rec.barrier = crate::poly::Polynomial::zero();
    rec.init = init;
    rec.unsafe_set = unsafe_set;
    rec.beta = 1.0;
    let opts = VerifyOptions::new(VerifyMode::rigorous());
    let report = verify_csbc(&rec, &sub, &opts).unwrap();
    let sevens: Vec<_> = report.conditions.iter().filter(|c| c.condition == "7").collect();
    assert_eq!(sevens.len(), 2);
    for (rep, region) in sevens.iter().zip(&rec.unsafe_set) {
        let Status::Falsified { witness, violation } = &rep.status else { panic!("{:?}", rep.status) };
        assert!(region.contains_point(witness));
        let v = reevaluate(&rec, &sub, "7", &rep.part, witness, opts.epsilon).unwrap();
        assert!((v - violation).abs() < 1e-12 && (v - 1.0).abs() < 1e-12);
    }
    // α > 0 makes (5) fail as well, and it comes first.
    assert_eq!(falsify(&rec, &sub, &opts).unwrap().unwrap().condition, "5");
}

/// x⁺ = 0.5x(1 + w) with B = x²: the max-form drift fails only where x(1 + w) > √(4c).
fn corner_toy() -> (Subsystem, CsbcRecord) {
    let sub = Subsystem {
        name: "toy".into(),
        states: IntervalBox::new([("x", 0.0, 1.0)]),
        inputs: InputSet::Finite { vars: vec![], values: vec![vec![]] },
        internal: IntervalBox::new([("w", 0.0, 1.0)]),
        dynamics: vec![poly("0.5 * x + 0.5 * x * w")],
        outputs: vec![OutputBlock { name: "y".into(), exprs: vec![poly("x")] }],
        noise: BTreeMap::new(),
        couplings: vec![],
    };
    let rec = CsbcRecord {
        subsystem: "toy".into(),
        barrier: poly("x^2"),
        controller: Controller::None,
        eta: 0.01,
        beta: 0.81,
        c: 0.92,
        alpha: LinearGain(1e-3),
        kappa: LinearGain(0.9),
        rho: LinearGain(1e-6),
        init: vec![IntervalBox::new([("x", 0.0, 0.1)])],
        unsafe_set: vec![IntervalBox::new([("x", 0.9, 1.0)])],
        provenance: String::new(),
    };
    (sub, rec)
}

#[test]
fn planted_corner_violation_is_found() {
    let (sub, rec) = corner_toy();
    let opts = VerifyOptions::new(VerifyMode::rigorous());
    let cex = falsify(&rec, &sub, &opts).unwrap().unwrap();
    assert_eq!(cex.condition, "8");
    let x = cex.witness[cex.vars.iter().position(|v| v == "x").unwrap()];
    assert!(x >= 0.95, "witness {:?}", cex.witness);
    if let Some(k) = cex.vars.iter().position(|v| v == "w") {
        assert!(cex.witness[k] >= 0.9);
    }
    // Independent check of the planted region at the witness state.
    assert!(0.25 * x * x * 4.0 > 0.92);
    let mut fixed = rec.clone();
    fixed.c = 1.0;
    assert!(falsify(&fixed, &sub, &opts).unwrap().is_none());
}

#[test]
fn deterministic_and_exec_independent() {
    let sub = fixtures::room_subsystem(RoomModel::Bilinear);
    let (init, unsafe_set) = room_sets();
    let cfg = CegisConfig { seed: 7, ..CegisConfig::default() };
    let a = cegis(&sub, &init, &unsafe_set, &cfg).unwrap();
    let b = cegis(&sub, &init, &unsafe_set, &cfg).unwrap();
    let seq = cegis(&sub, &init, &unsafe_set, &CegisConfig { exec: Exec::Sequential, ..cfg.clone() }).unwrap();
    let key = |s: &Synthesis| serde_json::to_string(&s.record).unwrap();
    assert_eq!(key(&a), key(&b));
    assert_eq!(key(&a), key(&seq));
    assert_eq!(a.cell, seq.cell);
}

#[test]
fn basis_and_normalizer() {
    let vars = vec!["a".to_string(), "b".to_string()];
    let basis = monomial_basis(&vars, 2);
    assert_eq!(basis.len(), 6);
    assert!(basis[0].factors().is_empty());
    let n = Normalizer::new(&IntervalBox::new([("a", 0.0, 4.0), ("b", -1.0, 1.0)]));
    assert_eq!(n.z(&[4.0, 0.5]), vec![1.0, 0.5]);
    let p = n.to_physical(&poly("a^2 + b"));
    assert!((p.eval_pairs(&[("a", 4.0), ("b", 0.5)]).unwrap() - 1.5).abs() < 1e-12);
}

#[test]
fn conversion_factors_match_additive_to_max() {
    let conv = Conversion { theta: 0.9, theta_bar: 10.0, d: 10.0 };
    let g = additive_to_max(0.8, 1e-3, 0.02, conv.theta, conv.theta_bar, conv.d).unwrap();
    assert!((g.c - conv.c_factor(0.8) * 0.02).abs() < 1e-12);
    assert!((g.rho - conv.rho_factor(0.8) * 1e-3).abs() < 1e-12);
}
