use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use irsolve_bench::{covariance, rhs};
use irsolve_core::refinement::{cg_ir, cholesky_ir, sweep_perturbation};
use irsolve_core::{InnerKind, PrecisionTier, RefinementConfig};
use std::hint::black_box;

fn refinement(c: &mut Criterion) {
    let mut group = c.benchmark_group("refinement");
    group.sample_size(10);
    let n = 1000;
    let kinds = [
        ("chol-ir", InnerKind::CholeskyFull),
        ("cg-ir", InnerKind::CgFull),
        ("banded-cg-ir", InnerKind::CgBanded { k: 16 }),
    ];
    for d in [1.0, 4.0] {
        let a = covariance(n, d, PrecisionTier::High);
        for m in [1, 8] {
            let b = rhs(n, m, PrecisionTier::High);
            for (name, kind) in kinds {
                let cfg = RefinementConfig::new(kind);
                let id = BenchmarkId::new(name, format!("n{n}/d{d}/m{m}"));
                group.bench_function(id, |bench| {
                    bench.iter(|| {
                        if kind.is_cholesky() {
                            cholesky_ir(black_box(&a), &b, &cfg).unwrap()
                        } else {
                            cg_ir(black_box(&a), &b, &cfg).unwrap()
                        }
                    })
                });
            }
        }
    }
    group.finish();
}

fn perturbation_sweep(c: &mut Criterion) {
    let mut group = c.benchmark_group("sweep");
    group.sample_size(10);
    let mut cfg = RefinementConfig::new(InnerKind::CholeskyFull);
    cfg.inner.inner_tier = PrecisionTier::High;
    group.bench_function("n500_five_gammas", |b| {
        b.iter(|| sweep_perturbation(&[500], &[-1.0, -3.25, -5.5, -7.75, -10.0], 2.0, &cfg).unwrap())
    });
    group.finish();
}

criterion_group!(benches, refinement, perturbation_sweep);
criterion_main!(benches);
