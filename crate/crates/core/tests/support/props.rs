//! Randomized property suites shared by the `properties` test target and the
//! acceptance run. Every suite uses a fixed proptest seed.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use scbc_core::bounds::{geometric_formula, kushner_bound, satisfaction_lower_bound, violation_bound, BoundMode, RunFactors};
use scbc_core::certify::{additive_to_max, expected_barrier, Controller, CsbcRecord, LinearGain};
use scbc_core::compose::{compose_cbc, min_mean_cycle, small_gain_check, GainMatrix, SmallGain};
use scbc_core::poly::{Enclosure, IntervalBox, Monomial, NoiseModel, Polynomial};
use scbc_core::system::{CompiledNetwork, InputSet, Interconnection, OutputBlock, Quantifier, Subsystem};

pub type Outcome = Result<(), String>;

fn runner(cases: u32) -> TestRunner {
    let cfg = Config { cases, failure_persistence: None, max_global_rejects: 100_000, ..Config::default() };
    TestRunner::new_with_rng(cfg, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn run<S: Strategy>(cases: u32, strategy: S, test: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Outcome {
    runner(cases).run(&strategy, test).map_err(|e| e.to_string())
}

/// Random polynomial over `vars` with up to `terms` monomials of per-variable degree ≤ `deg`.
fn arb_poly(vars: &'static [&'static str], terms: usize, deg: u32) -> impl Strategy<Value = Polynomial> {
    prop::collection::vec((prop::collection::vec(0..=deg, vars.len()), -3.0..3.0f64), 1..=terms).prop_map(move |ts| {
        Polynomial::from_terms(ts.into_iter().map(|(exps, c)| {
            (Monomial::from_pairs(vars.iter().zip(exps).filter(|(_, e)| *e > 0).map(|(v, e)| (*v, e))), c)
        }))
    })
}

fn arb_noise() -> impl Strategy<Value = NoiseModel> {
    prop_oneof![
        (0.05..1.5f64).prop_map(NoiseModel::gaussian),
        (-1.0..1.0f64, 0.1..2.0f64).prop_map(|(lo, w)| NoiseModel::uniform(lo, lo + w)),
        (prop::collection::vec(-2.0..2.0f64, 2..5), any::<u64>()).prop_map(|(values, seed)| {
            let raw: Vec<f64> = (0..values.len()).map(|k| 1.0 + ((seed >> (8 * k)) & 0xff) as f64).collect();
            let total: f64 = raw.iter().sum();
            NoiseModel::discrete(values, raw.iter().map(|r| r / total).collect())
        }),
    ]
}

/// Exact expectation over one noise coordinate agrees with a Monte Carlo mean within 4 standard errors.
pub fn expectation_matches_monte_carlo() -> Outcome {
    const N: usize = 20_000;
    run(64, (arb_poly(&["x", "s"], 6, 4), arb_noise(), -2.0..2.0f64, any::<u64>()), |(p, noise, x, seed)| {
        let model: BTreeMap<String, NoiseModel> = [("s".to_string(), noise.clone())].into();
        let exact = p.expectation(&model).unwrap().eval_pairs(&[("x", x)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values: Vec<f64> = (0..N).map(|_| p.eval_pairs(&[("x", x), ("s", noise.sample(&mut rng))]).unwrap()).collect();
        let mean = values.iter().sum::<f64>() / N as f64;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (N - 1) as f64;
        let tol = 4.0 * (var / N as f64).sqrt() + 1e-9 * (1.0 + exact.abs());
        prop_assert!((mean - exact).abs() <= tol, "mean {mean}, exact {exact}, tol {tol}");
        Ok(())
    })
}

/// (p∘q)(a) = p(q(a)), and substitution is associative.
pub fn substitution_composes() -> Outcome {
    let strategy = (
        arb_poly(&["x", "y"], 5, 3),
        arb_poly(&["x", "y", "z"], 4, 2),
        arb_poly(&["x", "y", "z"], 4, 2),
        arb_poly(&["z"], 3, 2),
        prop::array::uniform3(-1.5..1.5f64),
    );
    run(256, strategy, |(p, qx, qy, rz, [a, b, c])| {
        let q: BTreeMap<String, Polynomial> = [("x".to_string(), qx.clone()), ("y".to_string(), qy.clone())].into();
        let pq = p.substitute(&q);
        let at = [("x", a), ("y", b), ("z", c)];
        let lhs = pq.eval_pairs(&at).unwrap();
        let inner = [("x", qx.eval_pairs(&at).unwrap()), ("y", qy.eval_pairs(&at).unwrap())];
        let rhs = p.eval_pairs(&inner).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + rhs.abs()), "{lhs} vs {rhs}");
        let r: BTreeMap<String, Polynomial> = [("z".to_string(), rz)].into();
        let left = pq.substitute(&r);
        let q_r: BTreeMap<String, Polynomial> = q.iter().map(|(k, v)| (k.clone(), v.substitute(&r))).collect();
        let right = p.substitute(&q_r);
        let scale = 1.0 + left.terms().map(|(_, c)| c.abs()).fold(0.0, f64::max);
        prop_assert!(left.max_coef_diff(&right) <= 1e-9 * scale);
        Ok(())
    })
}

/// Interval enclosures contain every point value of the box.
pub fn interval_enclosures_are_sound() -> Outcome {
    let vars: Vec<String> = ["x", "y", "z"].map(String::from).to_vec();
    let boxes = prop::array::uniform3((-3.0..3.0f64, 0.0..3.0f64));
    run(1000, (arb_poly(&["x", "y", "z"], 6, 4), boxes, any::<u64>()), |(p, dims, seed)| {
        let b = IntervalBox::new(vars.iter().zip(dims).map(|(v, (lo, w))| (v.clone(), lo, lo + w)));
        let naive = p.interval_bound(&b).unwrap();
        let enc = Enclosure::new(&p, &vars).unwrap();
        let tight = enc.bound(b.intervals());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut points = b.corners();
        points.push(b.center());
        for _ in 0..32 {
            points.push(b.intervals().iter().map(|iv| rand::Rng::random_range(&mut rng, iv.lo..=iv.hi)).collect());
        }
        for x in points {
            let v = enc.eval(&x);
            let slack = 1e-12 * (1.0 + v.abs() + naive.lo.abs().max(naive.hi.abs()));
            prop_assert!(naive.lo - slack <= v && v <= naive.hi + slack, "{v} outside natural {naive:?}");
            prop_assert!(tight.lo - slack <= v && v <= tight.hi + slack, "{v} outside mean-value {tight:?}");
        }
        Ok(())
    })
}

/// Additive drift E ≤ κ̄B + ρ̄w² + c̄ implies the converted max form E ≤ max{κ̂B, ρ̂w², c}.
pub fn additive_to_max_dominates() -> Outcome {
    let strategy = (
        (0.01..0.99f64, 0.0..1.0f64, 0.0..1.0f64),
        (0.01..0.99f64, 1.01..20.0f64, 0.01..20.0f64),
        (0.0..100.0f64, 0.0..100.0f64, 0.0..=1.0f64),
    );
    run(10_000, strategy, |((kb, rb, cb), (theta, theta_bar, d), (b, w2, u))| {
        let g = additive_to_max(kb, rb, cb, theta, theta_bar, d).unwrap();
        prop_assert!(g.kappa < 1.0 && g.kappa > kb);
        let e = u * (kb * b + rb * w2 + cb);
        let rhs = (g.kappa * b).max(g.rho * w2).max(g.c);
        prop_assert!(e <= rhs * (1.0 + 1e-12) + 1e-15, "E = {e} > {rhs}");
        Ok(())
    })
}

fn chain_toy(a: f64, b1: f64, b2: f64, sigma: f64) -> Subsystem {
    let mut noise = BTreeMap::new();
    noise.insert("s".to_string(), NoiseModel::gaussian(1.0));
    Subsystem {
        name: "toy".into(),
        states: IntervalBox::new([("x", -1.0, 1.0)]),
        inputs: InputSet::none(),
        internal: IntervalBox::new([("w1", -1.0, 1.0), ("w2", -1.0, 1.0)]),
        dynamics: vec![Polynomial::from_terms([
            (Monomial::var("x"), a),
            (Monomial::var("w1"), b1),
            (Monomial::var("w2"), b2),
            (Monomial::var("s"), sigma),
        ])],
        outputs: vec![OutputBlock { name: "y".into(), exprs: vec![Polynomial::var("x")] }],
        noise,
        couplings: vec![],
    }
}

fn chain_cert(alpha: f64, kappa: f64, rho: f64, c: f64) -> CsbcRecord {
    CsbcRecord {
        subsystem: "toy".into(),
        barrier: Polynomial::var("x").pow(2),
        controller: Controller::None,
        eta: 0.01,
        beta: 0.9,
        c,
        alpha: LinearGain(alpha),
        kappa: LinearGain(kappa),
        rho: LinearGain(rho),
        init: vec![IntervalBox::new([("x", -0.1, 0.1)])],
        unsafe_set: vec![IntervalBox::new([("x", 0.95, 1.0)])],
        provenance: String::new(),
    }
}

/// Whenever every member satisfies conditions (5) and (8) at the wired state, the
/// composite satisfies max_i E[B_i(x_i⁺)]/λ_i ≤ max{κ̂B(x), c}.
pub fn composition_chain_holds() -> Outcome {
    let applied = AtomicUsize::new(0);
    let member = (0.5..=1.0f64, 0.5..0.99f64, 0.0..1.0f64, 0.0..0.3f64, 0.5..2.0f64, -1.0..1.0f64);
    let strategy = (2..=3usize, (-0.9..0.9f64, -0.3..0.3f64, -0.3..0.3f64, 0.0..0.3f64), prop::collection::vec(member, 3));
    let out = run(4000, strategy, |(n, (a, b1, b2, sigma), ms)| {
        let ms = &ms[..n];
        let net = Interconnection::ring(Arc::new(chain_toy(a, b1, b2, sigma)), n, "toy", "w1", "w2", "y");
        let certs: Vec<CsbcRecord> = ms.iter().map(|m| chain_cert(m.0, m.1, m.2, m.3)).collect();
        let lambda: Vec<f64> = ms.iter().map(|m| m.4).collect();
        let x: Vec<f64> = ms.iter().map(|m| m.5).collect();
        let Ok(cbc) = compose_cbc("chain", &net, certs.clone(), (0..n).collect(), lambda.clone(), Quantifier::All) else {
            return Err(TestCaseError::reject("scaling does not give a contraction"));
        };
        let drift = expected_barrier(&certs[0].barrier, net.model(0)).unwrap();
        let w = CompiledNetwork::new(&net).unwrap().internal_inputs(&x);
        let mut lhs = f64::NEG_INFINITY;
        for i in 0..n {
            let bi = x[i] * x[i];
            let wsq = w[i].iter().map(|v| v * v).fold(0.0, f64::max);
            let e = drift.eval_pairs(&[("x", x[i]), ("w1", w[i][0]), ("w2", w[i][1])]).unwrap();
            let c8 = e <= (certs[i].kappa.0 * bi).max(certs[i].rho.0 * wsq).max(certs[i].c);
            let c5 = certs[i].alpha.0 * x[i] * x[i] <= bi;
            if !(c8 && c5) {
                return Err(TestCaseError::reject("member conditions fail at this state"));
            }
            lhs = lhs.max(e / lambda[i]);
        }
        applied.fetch_add(1, Ordering::Relaxed);
        let bx = cbc.evaluator(&net).unwrap().eval(&x);
        let rhs = (cbc.kappa * bx).max(cbc.c);
        prop_assert!(lhs <= rhs * (1.0 + 1e-12) + 1e-15, "{lhs} > {rhs}");
        Ok(())
    });
    out?;
    let k = applied.load(Ordering::Relaxed);
    if k < 1000 {
        return Err(format!("only {k} non-vacuous cases"));
    }
    Ok(())
}

/// Range, monotonicity and mode ordering of the finite-horizon bounds.
pub fn bounds_are_monotone_and_in_range() -> Outcome {
    let strategy = ((0.1..10.0f64, 0.0..0.99f64, 0.0..1.0f64), 0.01..0.99f64, 1..60usize);
    run(2000, strategy, |((beta, eta_frac, c_frac), kappa, t)| {
        let (eta, c) = (eta_frac * beta, c_frac * beta);
        let p = |e: f64, b: f64, cc: f64, tt: usize, m| kushner_bound(e, b, cc, kappa, tt, m).unwrap();
        let base = p(eta, beta, c, t, BoundMode::PaperCompat);
        prop_assert!((0.0..=1.0).contains(&base));
        prop_assert!(p(eta, beta, c, t + 1, BoundMode::PaperCompat) >= base);
        prop_assert!(p(eta, beta * 1.1, c, t, BoundMode::PaperCompat) <= base);
        prop_assert!(p(eta * 0.5, beta, c, t, BoundMode::PaperCompat) <= base);
        prop_assert!(p(eta, beta, c * 0.5, t, BoundMode::PaperCompat) <= base);
        prop_assert!(base >= eta / beta - 1e-15);
        let th = p(eta, beta, c, t, BoundMode::Theorem);
        let ti = p(eta, beta, c, t, BoundMode::Tightest);
        prop_assert!((0.0..=1.0).contains(&th) && (0.0..=1.0).contains(&ti));
        prop_assert!(ti <= base && ti <= th);
        let g = geometric_formula(eta, beta, c, kappa, t);
        let (lo, hi) = (eta.min(c / kappa) / beta, eta.max(c / kappa) / beta);
        prop_assert!(g >= lo - 1e-12 && g <= hi + 1e-12);
        Ok(())
    })?;
    let runs = prop::collection::vec(prop::collection::vec(0.0..=1.0f64, 1..4), 0..5);
    run(2000, (runs, 0.0..=1.0f64), |(runs, shrink)| {
        let rf: Vec<RunFactors> = runs.iter().enumerate().map(|(k, f)| RunFactors::new(format!("r{k}"), vec![], f.clone())).collect();
        let v = violation_bound(&rf);
        prop_assert!((0.0..=1.0).contains(&v));
        let smaller: Vec<RunFactors> =
            runs.iter().map(|f| RunFactors::new(String::new(), vec![], f.iter().map(|x| x * shrink).collect())).collect();
        prop_assert!(violation_bound(&smaller) <= v);
        let s = satisfaction_lower_bound("p", rf);
        prop_assert!(s.lower == 1.0 - s.violation && (0.0..=1.0).contains(&s.lower));
        Ok(())
    })
}

/// Largest cycle geometric mean over all simple cycles (self-loops included).
fn brute_max_cycle(a: &[Vec<f64>]) -> Option<f64> {
    fn dfs(a: &[Vec<f64>], start: usize, cur: usize, log: f64, len: usize, seen: &mut [bool], best: &mut Option<f64>) {
        for next in 0..a.len() {
            if a[cur][next] <= 0.0 {
                continue;
            }
            let l = log + a[cur][next].ln();
            if next == start {
                let m = (l / (len + 1) as f64).exp();
                *best = Some(best.map_or(m, |b| b.max(m)));
            } else if next > start && !seen[next] {
                seen[next] = true;
                dfs(a, start, next, l, len + 1, seen, best);
                seen[next] = false;
            }
        }
    }
    let mut best = None;
    for s in 0..a.len() {
        let mut seen = vec![false; a.len()];
        seen[s] = true;
        dfs(a, s, s, 0.0, 0, &mut seen, &mut best);
    }
    best
}

/// Minimum-mean-cycle small-gain verdicts agree with exhaustive cycle enumeration.
pub fn cycle_check_matches_brute_force() -> Outcome {
    let entry = prop_oneof![Just(0.0), 0.05..1.5f64];
    let strategy = (1..=6usize).prop_flat_map(move |n| prop::collection::vec(prop::collection::vec(entry.clone(), n), n));
    run(2000, strategy, |rows| {
        let g = GainMatrix::from_dense(&rows);
        let dense: Vec<Vec<f64>> = (0..g.n).map(|i| (0..g.n).map(|j| g.get(i, j)).collect()).collect();
        let brute = brute_max_cycle(&dense);
        if brute.is_some_and(|b| (b - 1.0).abs() < 1e-9) {
            return Err(TestCaseError::reject("tie at one"));
        }
        let logs: Vec<(usize, usize, f64)> = g.edges().into_iter().map(|(i, j, a)| (i, j, -a.ln())).collect();
        match (min_mean_cycle(g.n, &logs), brute) {
            (None, None) => {}
            (Some(mc), Some(b)) => prop_assert!(((-mc.mean).exp() - b).abs() <= 1e-9 * b, "karp {} vs {b}", (-mc.mean).exp()),
            (k, b) => prop_assert!(false, "karp {k:?} vs brute {b:?}"),
        }
        match small_gain_check(&g) {
            SmallGain::Holds { max_cycle_gain } => {
                let b = brute.unwrap_or(0.0);
                prop_assert!(b < 1.0 && (max_cycle_gain - b).abs() <= 1e-9 * (1.0 + b));
            }
            SmallGain::Violated { cycle, product } => {
                let b = brute.unwrap();
                prop_assert!(b > 1.0 && product >= 1.0);
                let k = cycle.len();
                let p: f64 = (0..k).map(|t| dense[cycle[t]][cycle[(t + 1) % k]]).product();
                prop_assert!(p > 0.0 && (p - product).abs() <= 1e-12 * p);
                prop_assert!((p.powf(1.0 / k as f64) - b).abs() <= 1e-9 * b, "reported cycle is not the worst");
            }
        }
        Ok(())
    })
}

#[allow(dead_code)]
pub const SUITES: [(&str, fn() -> Outcome); 7] = [
    ("expectation vs Monte Carlo (4 sigma)", expectation_matches_monte_carlo),
    ("substitution composition law", substitution_composes),
    ("interval soundness, 1000 polynomial/box pairs", interval_enclosures_are_sound),
    ("additive-to-max dominance, 10^4 triples", additive_to_max_dominates),
    ("composition chain on 2- and 3-member rings", composition_chain_holds),
    ("bound monotonicity and range", bounds_are_monotone_and_in_range),
    ("min-mean-cycle vs brute force, N <= 6", cycle_check_matches_brute_force),
];
