use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use jcl_core::exec::{map_runs, map_runs_sequential};
use jcl_core::{BinaryCoinPair, Honest, ProbabilityVector, SeedTree, Stall, StrongMechanism};

fn strong_runs(c: &mut Criterion) {
    let coins = BinaryCoinPair::new(0.3, 0.7).unwrap();
    let nu = ProbabilityVector::from_pairs([("j1", 0.2), ("j2", 0.3), ("j3", 0.5)]).unwrap();
    let m = StrongMechanism::new(coins, nu, 16.0).unwrap();
    let seeds = SeedTree::new(0);
    let runs = 2000;
    let mut group = c.benchmark_group("strong_2000_runs");
    group.sample_size(10);
    for (name, stall) in [("honest", false), ("stall", true)] {
        let one = |r: u64| {
            let mut streams = seeds.device_streams(r);
            if stall {
                m.sample(&Stall, &Honest, &mut streams).outcome
            } else {
                m.sample(&Honest, &Honest, &mut streams).outcome
            }
        };
        group.bench_with_input(BenchmarkId::new("parallel", name), &runs, |b, &n| b.iter(|| map_runs(n, one)));
        group.bench_with_input(BenchmarkId::new("sequential", name), &runs, |b, &n| {
            b.iter(|| map_runs_sequential(n, one))
        });
    }
    group.finish();
}

criterion_group!(benches, strong_runs);
criterion_main!(benches);
