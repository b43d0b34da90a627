use std::collections::BTreeMap;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use itolift_core::exec::run_single_threaded;
use itolift_core::lift::{ito_transform, ShearMap};
use itolift_core::quantization::{assemble_l0, compose_l};
use itolift_core::semigroup::cutoff_convergence;
use itolift_core::symbols::{builtin_symbol, Symbol};
use itolift_core::trig::TrigPoly;
use itolift_core::{PeriodicGrid, SpectralVector};
use num_complex::Complex64;

fn symbol() -> Symbol {
    let params: BTreeMap<String, f64> = [("m", 1.0), ("beta0", 2.0), ("beta1", 1.0)]
        .iter()
        .map(|(k, v)| (k.to_string(), *v))
        .collect();
    builtin_symbol("variable_bessel", &params).unwrap()
}

fn bench(c: &mut Criterion) {
    let a = symbol();
    let base = PeriodicGrid::new(32, 1.0).unwrap();
    let fiber = PeriodicGrid::new(16, 1.0).unwrap();
    let shear = ShearMap::from_trig(&TrigPoly::sine(0.25), base, fiber);
    let l = compose_l(&a, &base).unwrap();
    let u = SpectralVector::point(base.sample(|x| Complex64::new((2.0 * std::f64::consts::PI * x).cos(), 0.0)));
    let lambdas: Vec<f64> = (1..=8).map(|i| 2.0 * i as f64).collect();

    let mut group = c.benchmark_group("assemble_l0");
    group.bench_function(BenchmarkId::new("parallel", 32), |b| b.iter(|| assemble_l0(&a, &base).unwrap()));
    group.bench_function(BenchmarkId::new("sequential", 32), |b| {
        b.iter(|| run_single_threaded(|| assemble_l0(&a, &base).unwrap()))
    });
    group.finish();

    let mut group = c.benchmark_group("ito_transform");
    group.bench_function(BenchmarkId::new("parallel", "32x16"), |b| b.iter(|| ito_transform(&l, &shear).unwrap()));
    group.bench_function(BenchmarkId::new("sequential", "32x16"), |b| {
        b.iter(|| run_single_threaded(|| ito_transform(&l, &shear).unwrap()))
    });
    group.finish();

    let mut group = c.benchmark_group("cutoff_sweep");
    group.sample_size(10);
    group.bench_function(BenchmarkId::new("parallel", 8), |b| {
        b.iter(|| cutoff_convergence(&a, &base, &lambdas, &u, &[0.1]).unwrap())
    });
    group.bench_function(BenchmarkId::new("sequential", 8), |b| {
        b.iter(|| run_single_threaded(|| cutoff_convergence(&a, &base, &lambdas, &u, &[0.1]).unwrap()))
    });
    group.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
