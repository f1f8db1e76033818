use criterion::{criterion_group, criterion_main, Criterion};
use fwpath::instanton::{Bounds, HalfPlane};
use fwpath::*;

fn planar(alpha: f64) -> PlanarSpace<MaierStein> {
    PlanarSpace::new(MaierStein::new(alpha).unwrap(), HalfPlane { normal: Vec2::x(), offset: 0.0 })
        .with_bounds(Bounds::new(-0.5, 2.0, -2.0, 2.0))
        .with_mirror_symmetry()
}

fn maier_stein(c: &mut Criterion) {
    let space = planar(5.0);
    let problem = EscapeProblem::new(&space, 0, MaierStein::STABLE).with_target(Vec3::zeros());
    let config = ShootingConfig { fan_size: 16, ..Default::default() };
    c.bench_function("fan_maier_stein_16", |b| b.iter(|| fan_shoot(&problem, &config).unwrap()));
    c.bench_function("optimal_escape_maier_stein", |b| b.iter(|| optimal_escape(&problem, &config).unwrap()));
    let fan = fan_shoot(&problem, &config).unwrap();
    c.bench_function("crossings_fan_16", |b| b.iter(|| detect_crossings(&fan.trajectories, &CrossingOptions::default())));
}

fn macrospin(c: &mut Criterion) {
    let model = Macrospin::from_ratios(0.01, 0.0, -0.3, 0.0).unwrap();
    let space = SphereSpace::new(model);
    let m0 = model.stable_point().unwrap();
    let chart = space.best_chart(&m0);
    let problem = EscapeProblem::new(&space, chart, space.locate(chart, &m0));
    let config = ShootingConfig { fan_size: 4, ..Default::default() };
    let mut g = c.benchmark_group("sphere");
    g.sample_size(10);
    g.bench_function("fan_uniaxial_4", |b| b.iter(|| fan_shoot(&problem, &config).unwrap()));
    g.finish();
}

criterion_group!(benches, maier_stein, macrospin);
criterion_main!(benches);
