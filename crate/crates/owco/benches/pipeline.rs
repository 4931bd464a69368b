//! End-to-end benchmarks over the per-vertex fanout paths. Bench names are
//! identical with and without the `parallel` feature, so the two builds can
//! be compared directly:
//!
//! ```text
//! cargo bench -- --save-baseline parallel
//! cargo bench --no-default-features -- --baseline parallel
//! ```

use criterion::{criterion_group, criterion_main, Criterion};

use owco::extension::necessity::{necessity_extract, NecessityOptions};
use owco::extension::wco::wco_reduce;
use owco::extension::{certify_subnormality, check_conditions, consistency_check, density_table};
use owco::gallery;

fn bench_certify(c: &mut Criterion) {
    let (spec, theta) = gallery::kary(3, 6, &[0.5, 1.0, 2.0]).unwrap();
    c.bench_function("certify/kary-k3-depth6", |b| {
        b.iter(|| certify_subnormality(&spec, &theta, 1e-9).unwrap())
    });
}

fn bench_density(c: &mut Criterion) {
    let (spec, theta) = gallery::kary(3, 6, &[0.5, 1.0, 2.0]).unwrap();
    let conditions = check_conditions(&spec, &theta).unwrap();
    c.bench_function("density/kary-k3-depth6", |b| {
        b.iter(|| {
            let g = density_table(&spec, &theta, &conditions).unwrap();
            consistency_check(&spec, &theta, &g).unwrap()
        })
    });
}

fn bench_necessity(c: &mut Criterion) {
    let (spec, _) = gallery::kary(2, 8, &[0.5, 1.0, 2.0]).unwrap();
    let opts = NecessityOptions {
        max_depth: 8,
        tol: 1e-9,
    };
    c.bench_function("necessity/kary-k2-depth8", |b| {
        b.iter(|| necessity_extract(&spec, &opts).unwrap())
    });
}

fn bench_wco(c: &mut Criterion) {
    let sys = gallery::wco_shift(64).unwrap();
    c.bench_function("wco-balance/shift-depth64", |b| {
        b.iter(|| wco_reduce(&sys, 1e-9).unwrap())
    });
}

criterion_group!(
    benches,
    bench_certify,
    bench_density,
    bench_necessity,
    bench_wco
);
criterion_main!(benches);
