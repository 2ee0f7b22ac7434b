use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use robustbar::{calibrate, joint_pmfs, robust_barrier_bounds, CalibrationConfig, Side};
use robustbar_bench::{instance_with_levels, instances};

fn config(refine: usize) -> CalibrationConfig {
    CalibrationConfig {
        refine,
        ..Default::default()
    }
}

fn calibrate_by_refinement(c: &mut Criterion) {
    let inst = instance_with_levels(2, 7);
    let mut group = c.benchmark_group("calibrate");
    for refine in [0, 1, 2] {
        let cfg = config(refine);
        group.bench_with_input(BenchmarkId::from_parameter(refine), &cfg, |b, cfg| {
            b.iter(|| calibrate(black_box(&inst.quotes), cfg).unwrap())
        });
    }
    group.finish();
}

fn calibrate_corpus(c: &mut Criterion) {
    let corpus = instances(16, 11);
    let cfg = config(1);
    c.bench_function("calibrate 16 instances", |b| {
        b.iter(|| {
            for inst in &corpus {
                black_box(calibrate(&inst.quotes, &cfg).unwrap());
            }
        })
    });
}

fn one_touch_bounds(c: &mut Criterion) {
    let inst = instance_with_levels(1, 13);
    let q = &inst.quotes;
    // Midway between spot and the first quoted level: never a quoted barrier.
    let level = 0.5 * (q.spot + inst.model.level(1));
    let cfg = config(1);
    let mut group = c.benchmark_group("bounds");
    for (name, side) in [("max", Side::Max), ("min", Side::Min)] {
        group.bench_function(name, |b| {
            b.iter(|| robust_barrier_bounds(black_box(q), 0, level, side, &cfg).unwrap())
        });
    }
    group.finish();
}

fn joint_law_export(c: &mut Criterion) {
    let inst = instance_with_levels(2, 17);
    c.bench_function("joint pmfs", |b| {
        b.iter(|| joint_pmfs(black_box(&inst.model)).unwrap())
    });
}

criterion_group!(
    benches,
    calibrate_by_refinement,
    calibrate_corpus,
    one_touch_bounds,
    joint_law_export
);
criterion_main!(benches);
