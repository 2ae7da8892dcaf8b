use std::collections::BTreeMap;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use picard_entropy::estimators::{kl_joint_vs_product, mutual_information, Budget, Channel, RunContext};
use picard_entropy::exec::Executor;
use picard_entropy::experiment::build_preset;
use picard_entropy::model::TimeGrid;
use picard_entropy::picard::Order;

fn channel(steps: usize) -> Channel {
    let (drift, law) = build_preset("linear-feedback", &BTreeMap::new()).unwrap();
    Channel::new(drift, law, TimeGrid::new(1.0, steps).unwrap())
}

fn executors() -> Vec<(&'static str, Executor)> {
    vec![
        ("sequential", Executor::sequential()),
        ("parallel", Executor::with_workers(4).unwrap()),
    ]
}

fn joint_divergence(c: &mut Criterion) {
    let ch = channel(256);
    let mut group = c.benchmark_group("kl_joint_vs_product");
    group.sample_size(10);
    for (name, exec) in executors() {
        let ctx = RunContext::new(7, exec);
        group.bench_function(BenchmarkId::new(name, ctx.executor.workers()), |b| {
            b.iter(|| kl_joint_vs_product(&ch, Order::Iterate(3), 2_000, &ctx).unwrap())
        });
    }
    group.finish();
}

fn mutual(c: &mut Criterion) {
    let ch = channel(32);
    let mut group = c.benchmark_group("mutual_information");
    group.sample_size(10);
    for (name, exec) in executors() {
        let ctx = RunContext::new(7, exec);
        group.bench_function(BenchmarkId::new(name, ctx.executor.workers()), |b| {
            b.iter(|| mutual_information(&ch, Order::Iterate(2), Budget::new(500, 100), &ctx).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, joint_divergence, mutual);
criterion_main!(benches);
