//! Parallel vs sequential execution of the data-parallel kernels.

use std::collections::BTreeMap;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use scbc_core::automata::{Decomposition, PartitionKey};
use scbc_core::certify::{verify_csbc, VerifyMode, VerifyOptions};
use scbc_core::compose::{compose, CbcRecord};
use scbc_core::fixtures::{self, RoomModel};
use scbc_core::poly::{Interval, IntervalBox};
use scbc_core::sim::{InitialStates, Simulator, SwitchingController};
use scbc_core::synth::{cegis, CegisConfig};
use scbc_core::system::Quantifier;
use scbc_core::Exec;

const MODES: [(&str, Exec); 2] = [("parallel", Exec::Parallel), ("sequential", Exec::Sequential)];

fn monte_carlo(c: &mut Criterion) {
    let n = 10;
    let net = fixtures::room_network(n, RoomModel::Bilinear);
    let regions = fixtures::room_regions(n);
    let dfa = fixtures::room_dfa();
    let d = Decomposition::new(&dfa, 10).unwrap();
    let cbc = compose("room", &net, vec![fixtures::paper_room_csbc()], vec![0; n], Quantifier::Any).unwrap().record;
    let certs: BTreeMap<PartitionKey, CbcRecord> = d.partitions.iter().map(|s| (s.key.clone(), cbc.clone())).collect();
    let ctrl = SwitchingController::from_certificates(d.switching.clone(), &certs);
    let sim = Simulator::new(&net, &regions, &dfa, &ctrl).unwrap();
    let init = InitialStates::Uniform { bounds: vec![Interval::new(19.5, 20.0); n] };
    let mut g = c.benchmark_group("monte_carlo_10_rooms_2000_traj");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| sim.monte_carlo(&init, 2000, 10, 0.01, 0, exec).unwrap())
        });
    }
    g.finish();
}

fn sampled_verification(c: &mut Criterion) {
    let sub = fixtures::room_subsystem(RoomModel::Bilinear);
    let rec = fixtures::paper_room_csbc();
    let mut g = c.benchmark_group("sampled_verify_room_20000");
    g.sample_size(20);
    for (name, exec) in MODES {
        let opts = VerifyOptions::new(VerifyMode::sampled(20_000)).with_exec(exec);
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| verify_csbc(&rec, &sub, &opts).unwrap()));
    }
    g.finish();
}

fn rigorous_verification(c: &mut Criterion) {
    let sub = fixtures::room_subsystem(RoomModel::Bilinear);
    let b = |lo, hi| IntervalBox::new([("T", lo, hi)]);
    let rec = cegis(&sub, &[b(19.5, 20.0)], &[b(1.0, 17.0), b(23.0, 50.0)], &CegisConfig::default())
        .and_then(|s| s.into_record())
        .unwrap();
    let mut g = c.benchmark_group("rigorous_verify_synthesized_room");
    g.sample_size(10);
    for (name, exec) in MODES {
        let opts = VerifyOptions::new(VerifyMode::rigorous()).with_exec(exec);
        g.bench_function(BenchmarkId::from_parameter(name), |bch| bch.iter(|| verify_csbc(&rec, &sub, &opts).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, monte_carlo, sampled_verification, rigorous_verification);
criterion_main!(benches);
