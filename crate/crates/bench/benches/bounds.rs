use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use sharpbounds_bench::{skewed_system, skewed_system_f64};
use sharpbounds_core::verify::{self, Suite, VerifyConfig};
use sharpbounds_core::{evaluate, BoundRequest, MomentSet, Side, Target};

fn moments(c: &mut Criterion) {
    let mut group = c.benchmark_group("moments");
    for n in [6, 10] {
        let sys = skewed_system(n);
        group.bench_with_input(BenchmarkId::new("rational", n), &sys, |b, sys| {
            b.iter(|| MomentSet::from_system(black_box(sys), 2, 3).unwrap())
        });
        let sys = skewed_system_f64(n);
        group.bench_with_input(BenchmarkId::new("f64", n), &sys, |b, sys| {
            b.iter(|| MomentSet::from_system(black_box(sys), 2, 3).unwrap())
        });
    }
    group.finish();
}

fn bounds(c: &mut Criterion) {
    let mut group = c.benchmark_group("bounds");
    let n = 8;
    let exact = MomentSet::from_system(&skewed_system(n), 2, 3).unwrap();
    let float = MomentSet::from_system(&skewed_system_f64(n), 2, 3).unwrap();
    for (name, ell) in [("l2", 2), ("l3", 3)] {
        for side in [Side::Upper, Side::Lower] {
            let req = BoundRequest::best(4, ell, Target::AtLeast, side);
            let id = format!("{name}-{side}");
            group.bench_with_input(BenchmarkId::new("rational", &id), &req, |b, req| {
                b.iter(|| evaluate(black_box(&exact), req).unwrap())
            });
            group.bench_with_input(BenchmarkId::new("f64", &id), &req, |b, req| {
                b.iter(|| evaluate(black_box(&float), req).unwrap())
            });
        }
    }
    let full = MomentSet::from_system(&skewed_system(n), 2, 4).unwrap();
    let req = BoundRequest::best(4, 4, Target::AtLeast, Side::Upper);
    group.bench_function("engine-ell4", |b| b.iter(|| evaluate(black_box(&full), &req).unwrap()));
    group.finish();
}

fn suites(c: &mut Criterion) {
    let mut group = c.benchmark_group("verify");
    group.sample_size(10);
    for suite in [Suite::Sandwich, Suite::Conditional] {
        let config = VerifyConfig { n_max: 6, ..VerifyConfig::only(suite, 10) };
        group.bench_function(suite.name(), |b| b.iter(|| verify::run(&config)));
    }
    group.finish();
}

criterion_group!(benches, moments, bounds, suites);
criterion_main!(benches);
