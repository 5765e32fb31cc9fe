use std::hint::black_box;
use std::time::Duration;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use ricci_bench::{bumped_funnel, collar_background, funnel_state, smooth_source};
use ricci_core::collar::build_eta;
use ricci_core::elliptic::{green_exhaustion, solve_poisson};
use ricci_core::flow::{evolve_with, EvolveOptions};
use ricci_core::geometry::{geodesic_distance, scalar_curvature};

fn curvature(c: &mut Criterion) {
    let mut g = c.benchmark_group("scalar_curvature");
    for n in [64, 256] {
        let m = bumped_funnel(n);
        g.bench_with_input(BenchmarkId::from_parameter(n), &m, |b, m| b.iter(|| scalar_curvature(black_box(m))));
    }
    g.finish();
}

fn flow(c: &mut Criterion) {
    let mut g = c.benchmark_group("flow");
    g.sample_size(10);
    let m = bumped_funnel(64);
    let opts = EvolveOptions::default();
    g.bench_function("funnel_64_to_t_0.05", |b| b.iter(|| evolve_with(black_box(&m), 0.05, &opts).unwrap()));
    g.finish();
}

fn elliptic(c: &mut Criterion) {
    let mut g = c.benchmark_group("elliptic");
    g.sample_size(10).measurement_time(Duration::from_secs(10));
    for n in [64, 128] {
        let m = funnel_state(n);
        let f = smooth_source(&m);
        g.bench_with_input(BenchmarkId::new("poisson", n), &n, |b, _| b.iter(|| solve_poisson(&m, &f, None).unwrap()));
    }
    let m = funnel_state(64);
    g.bench_function("green_exhaustion_64", |b| b.iter(|| green_exhaustion(&m, (32, 0), 1e-4).unwrap()));
    g.finish();
}

fn distance(c: &mut Criterion) {
    let m = funnel_state(128);
    c.bench_function("geodesic_distance_128", |b| b.iter(|| geodesic_distance(black_box(&m), (64, 0)).unwrap()));
}

fn collar(c: &mut Criterion) {
    let mut g = c.benchmark_group("build_eta");
    for n in [4, 6, 8] {
        let bg = collar_background(n);
        g.bench_with_input(BenchmarkId::from_parameter(n), &bg, |b, bg| b.iter(|| build_eta(black_box(bg), n).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, curvature, flow, elliptic, distance, collar);
criterion_main!(benches);
