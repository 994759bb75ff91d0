use std::f64::consts::PI;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use kagome_bench::{cylinder, torus};
use kagome_core::bloch::band_summary;
use kagome_core::circuit::apply_circuit;
use kagome_core::entanglement::{correlation_spectrum, free_many_body_es, schmidt_es};
use kagome_core::fock::{build_ground_state, verify_unique_ground_state};
use kagome_core::geometry::{euler_class, Method, Orientation};
use kagome_core::peps::evaluate_peps_state;
use kagome_core::realspace::{cylinder_spectrum, many_body_metric};

fn bloch(c: &mut Criterion) {
    c.bench_function("band_summary 101", |b| b.iter(|| band_summary(black_box(101), 0.0)));
    c.bench_function("euler_class 401", |b| {
        b.iter(|| euler_class(black_box(401), Method::AnalyticN, Orientation::D2CrossD1))
    });
}

fn states(c: &mut Criterion) {
    let lat = torus(3, 2);
    c.bench_function("hexagon product 3x2", |b| b.iter(|| build_ground_state(black_box(&lat), None).unwrap()));
    c.bench_function("peps evaluation 3x2", |b| b.iter(|| evaluate_peps_state(black_box(&lat), None).unwrap()));
}

fn spectra(c: &mut Criterion) {
    let mut g = c.benchmark_group("exact diagonalisation");
    g.sample_size(10);
    let lat = torus(2, 2);
    g.bench_function("unique ground state 2x2 mu=0", |b| {
        b.iter(|| verify_unique_ground_state(black_box(&lat), 0.0, 0.0).unwrap())
    });
    let cyl = cylinder(40, 12);
    g.bench_function("cylinder 40x12", |b| b.iter(|| cylinder_spectrum(black_box(&cyl), -1.0).unwrap()));
    let big = torus(6, 6);
    g.bench_function("many-body metric 6x6", |b| b.iter(|| many_body_metric(black_box(&big), 0.0, 1e-3).unwrap()));
    g.finish();
}

fn entanglement(c: &mut Criterion) {
    let mut g = c.benchmark_group("entanglement");
    g.sample_size(10);
    g.bench_function("correlation spectrum 120x6", |b| b.iter(|| correlation_spectrum(120, 6, black_box(60)).unwrap()));
    let modes = correlation_spectrum(120, 6, 60).unwrap();
    g.bench_function("free ES 120x6 eps<=12", |b| {
        b.iter(|| free_many_body_es(black_box(&modes), (2, 3), 12.0).unwrap())
    });
    let lat = torus(2, 4);
    let psi = apply_circuit(&lat, &build_ground_state(&lat, None).unwrap(), 0.2 * PI);
    g.bench_function("Schmidt ES 2x4", |b| b.iter(|| schmidt_es(black_box(&psi), &lat, 1, true).unwrap()));
    g.finish();
}

criterion_group!(benches, bloch, states, spectra, entanglement);
criterion_main!(benches);
