// Rayon grid evaluation against the sequential path on the same cells.
// Build with `--no-default-features` to make `par_map` itself sequential.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use henon_core::escape::green_plus;
use henon_core::henon::{select_constants, HenonParams, PointC2, RegionConstants};
use henon_core::locus::{tangency_w, PHI_TOL};
use henon_core::par::{par_map, seq_map};
use henon_core::poly::PolyParams;
use henon_core::C64;

fn cells(n: usize) -> Vec<PointC2> {
    (0..n * n)
        .map(|k| {
            let s = |m: usize| -3.0 + 6.0 * m as f64 / (n - 1) as f64;
            PointC2::new(C64::new(s(k % n), s(k / n)), C64::new(0.7, 0.2))
        })
        .collect()
}

fn setup() -> (HenonParams, RegionConstants) {
    let c = C64::new(-3.0, 0.0);
    (
        HenonParams::new(c, C64::new(1e-3, 0.0), 0.1),
        select_constants(&PolyParams::new(c), 0.1).unwrap(),
    )
}

fn bench_grid(cr: &mut Criterion) {
    let (h, rc) = setup();
    let mut g = cr.benchmark_group("green_plus_grid");
    for n in [32usize, 96] {
        let z = cells(n);
        let f = |q: &PointC2| green_plus(&h, &rc, *q, 1e-14, 200).value;
        g.bench_with_input(BenchmarkId::new("par_map", n), &z, |b, z| {
            b.iter(|| par_map(black_box(z), f))
        });
        g.bench_with_input(BenchmarkId::new("seq_map", n), &z, |b, z| {
            b.iter(|| seq_map(black_box(z), f))
        });
    }
    g.finish();
    let mut g = cr.benchmark_group("w_grid");
    g.sample_size(20);
    let z = cells(48);
    let f = |q: &PointC2| {
        tangency_w(&h, &rc, *q, PHI_TOL)
            .map(|t| t.w.norm())
            .unwrap_or(f64::NAN)
    };
    g.bench_function("par_map", |b| b.iter(|| par_map(black_box(&z), f)));
    g.bench_function("seq_map", |b| b.iter(|| seq_map(black_box(&z), f)));
    g.finish();
}

criterion_group!(benches, bench_grid);
criterion_main!(benches);
