use criterion::{black_box, criterion_group, criterion_main, Criterion};
use leoroute::experiments::compare_algorithms;
use leoroute::routing::{k_shortest_paths, ospf_assign, shortest_path};
use leoroute::traffic::max_min_fair_throughput;
use leoroute::{Scenario, ScenarioConfig};

fn scenario() -> Scenario {
    Scenario::build(ScenarioConfig::default()).expect("default scenario")
}

fn paths(c: &mut Criterion) {
    let s = scenario();
    let snap = s.snapshot_at(0.0).unwrap();
    let pairs = s.config.profile_pairs(&s.cities).unwrap();
    let (a, b) = (
        snap.ground(pairs[0].0).unwrap(),
        snap.ground(pairs[0].1).unwrap(),
    );

    c.bench_function("shortest_path/starlink", |bch| {
        bch.iter(|| shortest_path(&snap, black_box(a), black_box(b)))
    });
    let mut g = c.benchmark_group("k_shortest_paths/starlink");
    g.sample_size(20);
    for k in [4, 50] {
        g.bench_function(format!("k={k}"), |bch| {
            bch.iter(|| k_shortest_paths(&snap, a, b, black_box(k)))
        });
    }
    g.finish();
}

fn allocation(c: &mut Criterion) {
    let s = scenario();
    let snap = s.snapshot_at(0.0).unwrap();
    let assignment = ospf_assign(&snap, &s.demands);
    c.bench_function("max_min_fair/ospf", |bch| {
        bch.iter(|| max_min_fair_throughput(black_box(&assignment), &snap))
    });

    let snaps = s.snapshots().unwrap();
    let params = s.config.scheduler_params();
    let mut g = c.benchmark_group("compare");
    g.sample_size(10);
    g.bench_function("default", |bch| {
        bch.iter(|| compare_algorithms(&snaps, &s.demands, &params))
    });
    g.finish();
}

criterion_group!(benches, paths, allocation);
criterion_main!(benches);
