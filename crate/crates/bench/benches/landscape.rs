use criterion::{criterion_group, criterion_main, Criterion};
use fwpath::*;

fn grid() -> GridSpec {
    GridSpec::new((-0.2, 1.3), (-0.6, 0.6), 151, 121).unwrap()
}

fn norm(c: &mut Criterion) {
    let ms = MaierStein::new(5.0).unwrap();
    let g = grid();
    c.bench_function("norm_grid_151x121", |b| b.iter(|| norm_grid(&ms, &g).unwrap()));
    c.bench_function("analyze_landscape_151x121", |b| b.iter(|| analyze_landscape(&ms, &g).unwrap()));
    c.bench_function("bifurcation_scan_41", |b| {
        b.iter(|| bifurcation_scan(MaierStein::new, Vec2::new(0.5, 0.0), (3.0, 5.0), 41, None).unwrap())
    });
}

fn loops(c: &mut Criterion) {
    let ms = MaierStein::new(3.0).unwrap();
    let circle = circle_loop(Vec2::new(0.5, 0.3), 0.2, 2048);
    c.bench_function("loop_decomposition_2048", |b| b.iter(|| loop_decomposition(&ms, &circle, 1e-9).unwrap()));
}

fn bounds(c: &mut Criterion) {
    c.bench_function("admissibility_band", |b| b.iter(|| admissibility_band(20.0, 0.1, 0.01).unwrap()));
}

criterion_group!(benches, norm, loops, bounds);
criterion_main!(benches);
