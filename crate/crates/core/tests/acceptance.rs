//! Acceptance run: one PASS/FAIL line per criterion with pinned tolerances.
//! Built with `harness = false`; exits non-zero if any criterion fails.

#[path = "support/props.rs"]
mod props;

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{self, AssertUnwindSafe};
use std::time::{Duration, Instant};

use scbc_core::automata::{runs_by_prop, Decomposition, PartitionKey};
use scbc_core::bounds::{bound_report, element_bound, kushner_bound, BoundMode};
use scbc_core::certify::{reevaluate, verify_csbc, Status, Verdict, VerifyMode, VerifyOptions};
use scbc_core::compose::{compose, compose_cbc, gain_matrix, small_gain_check, solve_scaling, CbcRecord, SmallGain};
use scbc_core::fixtures::{self, RoomModel};
use scbc_core::poly::IntervalBox;
use scbc_core::sim::{state_names, traces_svg, Band, InitialStates, Simulator, SwitchingController};
use scbc_core::synth::{cegis, CegisConfig};
use scbc_core::system::{Interconnection, LabeledRegions, Quantifier, Subsystem};
use scbc_core::Exec;

const BOUND_TOL: f64 = 1e-3;
const LOWER_TOL: f64 = 5e-3;
const ROOM_BAND: (f64, f64) = (0.94, 0.95);
const SAMPLES: usize = 100_000;
const CEGIS_ROUNDS: usize = 10;
const MC_TRAJ: usize = 10_000;
const MC_DELTA: f64 = 0.01;
const MC_SLACK: f64 = 0.02;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit_s: f64) -> Result<(), String> {
    ensure(elapsed.as_secs_f64() < limit_s, || format!("took {:.3} s, limit {limit_s} s", elapsed.as_secs_f64()))
}

fn sorted<I: IntoIterator<Item = String>>(it: I) -> Vec<String> {
    let mut v: Vec<String> = it.into_iter().collect();
    v.sort();
    v
}

fn strs(v: &[&str]) -> Vec<String> {
    sorted(v.iter().map(|s| s.to_string()))
}

fn room_sets() -> (Vec<IntervalBox>, Vec<IntervalBox>) {
    let b = |lo, hi| IntervalBox::new([("T", lo, hi)]);
    (vec![b(19.5, 20.0)], vec![b(1.0, 17.0), b(23.0, 50.0)])
}

fn room_composite(n: usize) -> (Interconnection, CbcRecord) {
    let net = fixtures::room_network(n, RoomModel::Bilinear);
    let rec = compose("room", &net, vec![fixtures::paper_room_csbc()], vec![0; n], Quantifier::Any).map(|c| c.record);
    (net, rec.expect("room composition"))
}

fn kuramoto_certs(net: &Interconnection, d: &Decomposition) -> scbc_core::Result<BTreeMap<PartitionKey, CbcRecord>> {
    let mut certs = BTreeMap::new();
    for (task, init) in [(1u8, "p1"), (2, "p4")] {
        let rec = compose("osc", net, vec![fixtures::paper_kuramoto_csbc(task)], vec![0; net.len()], Quantifier::All)?.record;
        if let Some(set) = d.partitions.iter().find(|s| s.members.iter().all(|m| m.init_symbols.contains(init))) {
            certs.insert(set.key.clone(), rec);
        }
    }
    Ok(certs)
}

fn initial_region(regions: &LabeledRegions, prop: &str, n: usize) -> scbc_core::Result<InitialStates> {
    let props: BTreeSet<String> = [prop.to_string()].into();
    let mut bounds = Vec::new();
    for i in 0..n {
        bounds.extend(regions.member_boxes(&props, i)?[0].intervals().iter().copied());
    }
    Ok(InitialStates::Uniform { bounds })
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let c = fixtures::example58_complement();
    let runs = c.accepting_runs(4);
    let rm = sorted(runs.iter().map(|r| r.to_string()));
    ensure(rm == strs(&["(q0,q5)", "(q0,q3,q5)", "(q0,q1,q2,q5)", "(q0,q3,q4,q5)"]), || format!("R_4 = {rm:?}"))?;
    let want_rp: [(&str, &[&str]); 4] = [
        ("p0", &["(q0,q1,q2,q5)"]),
        ("p1", &["(q0,q5)"]),
        ("p2", &["(q0,q3,q5)", "(q0,q3,q4,q5)"]),
        ("p3", &["(q0,q5)"]),
    ];
    for (p, want) in want_rp {
        let got = sorted(runs_by_prop(&runs, p).iter().map(|r| r.to_string()));
        ensure(got == strs(want), || format!("R^{p}_4 = {got:?}"))?;
    }
    let want_p: [(&str, &[&str]); 4] = [
        ("(q0,q1,q2,q5)", &["(q0,q1,q2,2)", "(q1,q2,q5,2)"]),
        ("(q0,q5)", &[]),
        ("(q0,q3,q5)", &["(q0,q3,q5,3)"]),
        ("(q0,q3,q4,q5)", &["(q0,q3,q4,2)", "(q3,q4,q5,2)"]),
    ];
    for (run, want) in want_p {
        let r = runs.iter().find(|r| r.to_string() == run).ok_or_else(|| format!("run {run} missing"))?;
        let got = sorted(c.reach_elements(r, 4).iter().map(|e| e.to_string()));
        ensure(got == strs(want), || format!("P({run}) = {got:?}"))?;
    }
    // The same sets through the full decomposition of the specification.
    let d = Decomposition::new(&c.complement(), 4).map_err(|e| e.to_string())?;
    for (p, want) in want_rp {
        let got = sorted(d.runs_for(p).iter().map(|r| r.to_string()));
        ensure(got == strs(want), || format!("decomposition R^{p}_4 = {got:?}"))?;
    }
    within(start.elapsed(), 1.0)?;
    Ok(format!("R_4, R^p_4 and P^p(q) match; {:.3} s", start.elapsed().as_secs_f64()))
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let k1 = fixtures::paper_kuramoto_csbc(1).kappa.0;
    let k2 = fixtures::paper_kuramoto_csbc(2).kappa.0;
    let a = kushner_bound(0.02, 1.2, 0.0083, k1, 6, BoundMode::PaperCompat).map_err(|e| e.to_string())?;
    let b = kushner_bound(0.017, 1.0, 0.0162, k2, 6, BoundMode::PaperCompat).map_err(|e| e.to_string())?;
    ensure((a - 0.0568).abs() <= BOUND_TOL, || format!("bound 1 = {a}"))?;
    ensure((b - 0.109).abs() <= BOUND_TOL, || format!("bound 2 = {b}"))?;

    let n = 100;
    let net = fixtures::kuramoto_network(n);
    let d = Decomposition::new(&fixtures::kuramoto_dfa(), 7).map_err(|e| e.to_string())?;
    let certs = kuramoto_certs(&net, &d).map_err(|e| e.to_string())?;
    let r = bound_report(&d, &certs, &net, &fixtures::kuramoto_regions(n), BoundMode::PaperCompat).map_err(|e| e.to_string())?;
    let l1 = r.for_prop("p1").ok_or("no p1 bound")?.lower;
    let l4 = r.for_prop("p4").ok_or("no p4 bound")?.lower;
    ensure((l1 - 0.9432).abs() <= LOWER_TOL, || format!("p1 lower bound {l1}"))?;
    ensure((l4 - 0.891).abs() <= LOWER_TOL, || format!("p4 lower bound {l4}"))?;

    let rooms = 1000;
    let (net, cbc) = room_composite(rooms);
    let regions = fixtures::room_regions(rooms);
    let mut room = Vec::new();
    for th in [9, 10] {
        let d = Decomposition::new(&fixtures::room_dfa(), th + 1).map_err(|e| e.to_string())?;
        let el = &d.elements_for("p0", d.runs_by_prop["p0"][0])[0];
        ensure(el.horizon == th, || format!("element horizon {} for M = {}", el.horizon, th + 1))?;
        let rb = element_bound(el, Some(&cbc), &net, &regions, BoundMode::PaperCompat).map_err(|e| e.to_string())?;
        let sat = 1.0 - rb.value;
        ensure((ROOM_BAND.0..=ROOM_BAND.1).contains(&sat), || format!("room T_h = {th}: 1 - kappa = {sat}"))?;
        room.push(sat);
    }
    within(start.elapsed(), 1.0)?;
    Ok(format!(
        "bounds {a:.4}/{b:.4}, lower {l1:.4}/{l4:.4}, room 1-kappa {:.4} (T_h 9), {:.4} (T_h 10); {:.3} s",
        room[0],
        room[1],
        start.elapsed().as_secs_f64()
    ))
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let n = 1000;
    let net = fixtures::room_network(n, RoomModel::Bilinear);
    let rec = fixtures::paper_room_csbc();
    let g = gain_matrix(&net, std::slice::from_ref(&rec), &vec![0; n]).map_err(|e| e.to_string())?;
    let ratio = rec.rho.0 / rec.alpha.0;
    for i in 0..n {
        ensure(g.get(i, i) == 0.99, || format!("a[{i}][{i}] = {}", g.get(i, i)))?;
        for j in [(i + 1) % n, (i + n - 1) % n] {
            ensure(g.get(i, j) == ratio, || format!("a[{i}][{j}] = {}", g.get(i, j)))?;
        }
    }
    ensure(g.off.len() == 2 * n, || format!("{} off-diagonal entries", g.off.len()))?;
    ensure((ratio - 0.998).abs() < 1e-12, || format!("neighbour gain {ratio}"))?;
    ensure(small_gain_check(&g).holds(), || "small-gain check fails".into())?;
    let lambda = solve_scaling(&g).map_err(|e| e.to_string())?;
    ensure(lambda.iter().all(|l| *l == 1.0), || "scaling is not identically one".into())?;
    let c = compose("room", &net, vec![rec.clone()], vec![0; n], Quantifier::Any).map_err(|e| e.to_string())?;
    let r = &c.record;
    ensure((r.eta, r.beta, r.c) == (rec.eta, rec.beta, rec.c), || format!("composite constants {:?}", (r.eta, r.beta, r.c)))?;
    ensure(r.kappa == ratio.max(0.99), || format!("composite kappa {}", r.kappa))?;

    // Heterogeneous members: constants equal the max of the scaled member constants.
    let small = fixtures::room_network(3, RoomModel::Bilinear);
    let (mut m1, mut m2) = (rec.clone(), rec.clone());
    m1.rho.0 = 1e-6;
    m2.rho.0 = 1e-6;
    m1.eta = 0.2;
    m2.c = 0.05;
    m2.beta = 5.0;
    let lam = vec![1.0, 2.0, 1.5];
    let h = compose_cbc("h", &small, vec![m1, m2], vec![0, 1, 0], lam, Quantifier::All).map_err(|e| e.to_string())?;
    let want = (0.2f64.max(0.13 / 2.0).max(0.2 / 1.5), 4.4f64.max(5.0 / 2.0).max(4.4 / 1.5), 0.0139f64.max(0.05 / 2.0).max(0.0139 / 1.5));
    ensure((h.eta, h.beta, h.c) == want, || format!("heterogeneous constants {:?} vs {want:?}", (h.eta, h.beta, h.c)))?;

    // Planted 2-cycle of product 1.21 between members 500 and 501.
    let mut planted = g.clone();
    for e in planted.off.iter_mut() {
        if (e.0, e.1) == (500, 501) || (e.0, e.1) == (501, 500) {
            e.2 = 1.1;
        }
    }
    match small_gain_check(&planted) {
        SmallGain::Violated { cycle, product } => {
            let mut cyc = cycle.clone();
            cyc.sort();
            ensure(cyc == [500, 501] && (product - 1.21).abs() < 1e-12, || format!("cycle {cycle:?}, product {product}"))?;
        }
        s => return Err(format!("planted cycle not rejected: {s:?}")),
    }
    within(start.elapsed(), 1.0)?;
    Ok(format!("N = {n}: gains 0.99/{ratio:.3}, lambda = 1, planted cycle [500, 501] rejected; {:.3} s", start.elapsed().as_secs_f64()))
}

fn verify_reproducibly(name: &str, rec: &scbc_core::certify::CsbcRecord, sub: &Subsystem) -> Result<String, String> {
    let opts = VerifyOptions::new(VerifyMode::sampled(SAMPLES));
    let a = verify_csbc(rec, sub, &opts).map_err(|e| e.to_string())?;
    let b = verify_csbc(rec, sub, &opts.clone().with_exec(Exec::Sequential)).map_err(|e| e.to_string())?;
    ensure(a == b, || format!("{name}: parallel and sequential reports differ"))?;
    let mut witnessed = Vec::new();
    for c in &a.conditions {
        if let Status::Falsified { witness, violation } = &c.status {
            let again = reevaluate(rec, sub, &c.condition, &c.part, witness, a.epsilon).map_err(|e| e.to_string())?;
            ensure(again == *violation && again > a.epsilon, || format!("{name}: witness for ({}) re-evaluates to {again}", c.condition))?;
            witnessed.push(format!("({})", c.condition));
        }
    }
    witnessed.dedup();
    let v = format!("{:?}", a.verdict).to_lowercase();
    Ok(if witnessed.is_empty() { format!("{name} {v}") } else { format!("{name} {v} with witnessed {}", witnessed.join(",")) })
}

fn criterion_4() -> Outcome {
    let room = fixtures::room_subsystem(RoomModel::Bilinear);
    let mut parts = vec![verify_reproducibly("room", &fixtures::paper_room_csbc(), &room)?];
    let osc = fixtures::kuramoto_subsystem(100);
    for task in [1, 2] {
        parts.push(verify_reproducibly(&format!("kuramoto{task}"), &fixtures::paper_kuramoto_csbc(task), &osc)?);
    }
    let start = Instant::now();
    let (init, unsafe_set) = room_sets();
    let rec = cegis(&room, &init, &unsafe_set, &CegisConfig::default()).and_then(|s| s.into_record()).map_err(|e| e.to_string())?;
    ensure(rec.barrier.degree() == 2, || format!("barrier degree {}", rec.barrier.degree()))?;
    let rep = verify_csbc(&rec, &room, &VerifyOptions::new(VerifyMode::rigorous())).map_err(|e| e.to_string())?;
    ensure(rep.verdict == Verdict::Verified, || format!("rigorous verdict {:?}", rep.verdict))?;
    within(start.elapsed(), 60.0)?;
    Ok(format!("{}; synthesized quadratic verified rigorously in {:.2} s", parts.join("; "), start.elapsed().as_secs_f64()))
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let room = fixtures::room_subsystem(RoomModel::Bilinear);
    let (init, unsafe_set) = room_sets();
    let cfg = CegisConfig { seed: 0, ..CegisConfig::default() };
    let s = cegis(&room, &init, &unsafe_set, &cfg).map_err(|e| e.to_string())?;
    let cell = s.cell.ok_or("no grid cell succeeded")?;
    let rounds = s.journal[cell].rounds.len();
    let verdict = s.report.as_ref().map(|r| r.verdict).ok_or("no verification report")?;
    let rec = s.into_record().map_err(|e| e.to_string())?;
    ensure(rounds <= CEGIS_ROUNDS, || format!("{rounds} rounds"))?;
    ensure(verdict >= Verdict::Passed, || format!("verdict {verdict:?}"))?;
    ensure(rec.beta > rec.eta, || format!("beta {} <= eta {}", rec.beta, rec.eta))?;
    within(start.elapsed(), 300.0)?;
    Ok(format!(
        "{:?} in {rounds} round(s) of cell {cell}, eta {:.4} < beta {:.4}; {:.2} s",
        verdict,
        rec.eta,
        rec.beta,
        start.elapsed().as_secs_f64()
    ))
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let n = 3;
    let m = 10;
    let room = fixtures::room_subsystem(RoomModel::Bilinear);
    let (init, unsafe_set) = room_sets();
    let rec = cegis(&room, &init, &unsafe_set, &CegisConfig::default()).and_then(|s| s.into_record()).map_err(|e| e.to_string())?;
    let net = fixtures::room_network(n, RoomModel::Bilinear);
    let regions = fixtures::room_regions(n);
    let dfa = fixtures::room_dfa();
    let cbc = compose("room", &net, vec![rec], vec![0; n], Quantifier::Any).map_err(|e| e.to_string())?.record;
    let d = Decomposition::new(&dfa, m).map_err(|e| e.to_string())?;
    let certs: BTreeMap<PartitionKey, CbcRecord> = d.partitions.iter().map(|s| (s.key.clone(), cbc.clone())).collect();
    let report = bound_report(&d, &certs, &net, &regions, BoundMode::Tightest).map_err(|e| e.to_string())?;
    let certified = report.for_prop("p0").ok_or("no p0 bound")?.lower;
    let ctrl = SwitchingController::from_certificates(d.switching.clone(), &certs);
    let sim = Simulator::new(&net, &regions, &dfa, &ctrl).map_err(|e| e.to_string())?;
    let x0 = initial_region(&regions, "p0", n).map_err(|e| e.to_string())?;
    let mc = sim.monte_carlo(&x0, MC_TRAJ, m, MC_DELTA, 0, Exec::default()).map_err(|e| e.to_string())?;
    ensure(mc.lower >= certified - MC_SLACK, || format!("CP lower {} < certified {certified} - {MC_SLACK}", mc.lower))?;
    within(start.elapsed(), 30.0)?;
    Ok(format!(
        "{}/{} accepted, 99% CP lower {:.5} >= certified {:.5} - {MC_SLACK}; {:.2} s",
        mc.accepted,
        mc.n,
        mc.lower,
        certified,
        start.elapsed().as_secs_f64()
    ))
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let mut failed = Vec::new();
    for (name, suite) in props::SUITES {
        if let Err(e) = suite() {
            failed.push(format!("{name}: {e}"));
        }
    }
    ensure(failed.is_empty(), || failed.join("; "))?;
    Ok(format!("{} suites, zero failures; {:.2} s", props::SUITES.len(), start.elapsed().as_secs_f64()))
}

fn criterion_8() -> Outcome {
    let start = Instant::now();
    let rooms = 1000;
    let (net, cbc) = room_composite(rooms);
    let regions = fixtures::room_regions(rooms);
    let dfa = fixtures::room_dfa();
    let d = Decomposition::new(&dfa, 10).map_err(|e| e.to_string())?;
    let certs: BTreeMap<PartitionKey, CbcRecord> = d.partitions.iter().map(|s| (s.key.clone(), cbc.clone())).collect();
    let r = bound_report(&d, &certs, &net, &regions, BoundMode::PaperCompat).map_err(|e| e.to_string())?;
    let room_lower = r.for_prop("p0").ok_or("no p0 bound")?.lower;

    let osc = 100;
    let knet = fixtures::kuramoto_network(osc);
    let kd = Decomposition::new(&fixtures::kuramoto_dfa(), 7).map_err(|e| e.to_string())?;
    let kcerts = kuramoto_certs(&knet, &kd).map_err(|e| e.to_string())?;
    let kr = bound_report(&kd, &kcerts, &knet, &fixtures::kuramoto_regions(osc), BoundMode::PaperCompat).map_err(|e| e.to_string())?;
    ensure(kr.satisfaction.iter().all(|s| (0.0..=1.0).contains(&s.lower)), || "kuramoto bounds out of range".into())?;
    let bounds_time = start.elapsed();
    within(bounds_time, 10.0)?;

    let sim_start = Instant::now();
    let ctrl = SwitchingController::from_certificates(d.switching.clone(), &certs);
    let sim = Simulator::new(&net, &regions, &dfa, &ctrl).map_err(|e| e.to_string())?;
    let x0 = initial_region(&regions, "p0", rooms).map_err(|e| e.to_string())?;
    let trajs = sim.trajectories(&x0, 10, 10, 0, Exec::default()).map_err(|e| e.to_string())?;
    let names = state_names(&net);
    let band = Band { lo: 17.0, hi: 23.0, label: "comfort [17, 23]".into() };
    let svg = traces_svg(&trajs, 0, &names[0], &[band], "room 1 of 1000");
    let dir = std::path::Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
    std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
    let path = dir.join("rooms1000.svg");
    std::fs::write(&path, &svg).map_err(|e| e.to_string())?;
    let sim_time = sim_start.elapsed();
    ensure(svg.matches("<polyline").count() == 10, || "SVG does not show 10 trajectories".into())?;
    within(sim_time, 10.0)?;
    Ok(format!(
        "bounds+composition (room p0 {room_lower:.4}, {} kuramoto bounds) {:.3} s; 10x1000-room simulation + SVG {:.3} s -> {}",
        kr.satisfaction.len(),
        bounds_time.as_secs_f64(),
        sim_time.as_secs_f64(),
        path.display()
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("decomposition fidelity", criterion_1),
        ("bound reproduction", criterion_2),
        ("small-gain and composition", criterion_3),
        ("certificate verification", criterion_4),
        ("CEGIS end-to-end", criterion_5),
        ("statistical soundness", criterion_6),
        ("property suites", criterion_7),
        ("full-scale smoke", criterion_8),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failures = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let outcome = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        match outcome {
            Ok(detail) => println!("criterion {} {name}: PASS ({detail})", k + 1),
            Err(e) => {
                failures += 1;
                println!("criterion {} {name}: FAIL ({e})", k + 1);
            }
        }
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
