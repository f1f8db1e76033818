use fwpath::bounds::{admissibility_band, nongradient_max, nongradient_term, precessional_min};
use fwpath::langevin::{heun_step, StochasticModel};
use fwpath::models::critical_tilt_angle;
use fwpath::norm::norm_gradient;
use fwpath::*;
use proptest::prelude::*;

fn unit(theta: f64, phi: f64) -> Vec3 {
    Vec3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos())
}

fn macrospin() -> impl Strategy<Value = Macrospin> {
    (1e-3..0.5f64, 0.0..30.0f64, -3.0..3.0f64, -1.2..1.2f64)
        .prop_map(|(a, d, i, w)| Macrospin::new(a, d, i, w).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn zero_energy_ellipse_has_closed_form_axes(m in macrospin(), theta in 0.2..2.9f64, phi in -3.1..3.1f64) {
        let chart = m.chart(PolarAxis::Z);
        let x = Vec2::new(theta, phi);
        let g = chart.metric(&x);
        let f = g.lower(&chart.drift(&x));
        prop_assume!(g.norm_sq(&f) > 1e-10);
        let mut extent = Vec2::zeros();
        for k in 0..10_000 {
            let p = momentum_on_ellipse(&chart, &x, std::f64::consts::TAU * k as f64 / 1e4).unwrap();
            prop_assert!(hamiltonian(&chart, &x, &p).unwrap().abs() <= 1e-12 * (1.0 + g.norm_sq(&f)));
            extent = extent.zip_map(&(p + f), |e, v| e.max(v.abs()));
        }
        let scales = g.scales();
        for i in 0..2 {
            let a = (g.norm_sq(&f) / (scales[i] * scales[i])).sqrt();
            prop_assert!((extent[i] - a).abs() <= 1e-6 * a);
        }
    }

    #[test]
    fn lagrangian_at_drift_speed(alpha in 0.5..6.0f64, x in -1.5..1.5f64, y in -1.5..1.5f64, turn in 0.0..6.28f64) {
        let ms = MaierStein::new(alpha).unwrap();
        let p = Vec2::new(x, y);
        let f = ms.drift(&p);
        prop_assume!(f.norm() > 1e-6);
        let (s, c) = turn.sin_cos();
        let v = Vec2::new(c * f[0] - s * f[1], s * f[0] + c * f[1]);
        let psi = psi_angle(&ms, &p, &v).unwrap();
        let l = lagrangian(&ms, &p, &v).unwrap();
        prop_assert!((l - f.norm_squared() * (1.0 - psi.cos())).abs() <= 1e-10 * (1.0 + f.norm_squared()));
    }

    #[test]
    fn energy_is_half_the_speed_excess(m in macrospin(), theta in 0.2..2.9f64, phi in -3.1..3.1f64, p0 in -2.0..2.0f64, p1 in -2.0..2.0f64) {
        let chart = m.chart(PolarAxis::Z);
        let x = Vec2::new(theta, phi);
        let p = Vec2::new(p0, p1);
        let g = chart.metric(&x);
        let v = flow_rhs(&chart, &x, &p).unwrap().x_dot;
        let f = g.lower(&chart.drift(&x));
        let gap = g.inv_norm_sq(&v) - g.norm_sq(&f) - 2.0 * hamiltonian(&chart, &x, &p).unwrap();
        prop_assert!(gap.abs() <= 1e-10 * (1.0 + g.inv_norm_sq(&v)));
    }

    #[test]
    fn macrospin_drift_is_tangent(m in macrospin(), theta in 0.0..3.1416f64, phi in -3.1416..3.1416f64) {
        let s = unit(theta, phi);
        prop_assert!(m.drift_cartesian(&s).unwrap().dot(&s).abs() <= 1e-12);
    }

    #[test]
    fn chart_drift_pushes_forward(m in macrospin(), theta in 0.05..3.09f64, phi in -3.1..3.1f64, axis in 0usize..3) {
        let chart = m.chart(PolarAxis::from_index(axis));
        let x = Vec2::new(theta, phi);
        let lab = m.drift(&chart.embed(&x));
        let pushed = chart.embed_velocity(&x, &chart.drift(&x));
        prop_assert!((lab - pushed).norm() <= 1e-10 * (1.0 + lab.norm()));
    }

    #[test]
    fn energy_rate_matches_flow(m in macrospin(), theta in 0.1..3.0f64, phi in -3.1..3.1f64) {
        let s = unit(theta, phi);
        let (_, rate) = m.energy_and_rate(&s).unwrap();
        let h = 1e-6;
        let ahead = (s + h * m.drift(&s)).normalize();
        let behind = (s - h * m.drift(&s)).normalize();
        let fd = (m.energy(&ahead) - m.energy(&behind)) / (2.0 * h);
        prop_assert!((fd - rate).abs() <= 1e-5 * rate.abs().max(1e-3 * m.drift(&s).norm()));
    }

    #[test]
    fn separatrix_lies_on_tilted_planes(d in 0.1..40.0f64, t in -3.1..3.1f64, mirror in prop::bool::ANY) {
        // unit circle in the plane spanned by y and (sin theta_C, 0, cos theta_C)
        let tilt = critical_tilt_angle(d);
        let sx = if mirror { -tilt.sin() } else { tilt.sin() };
        let m = Vec3::new(sx * t.cos(), t.sin(), tilt.cos() * t.cos());
        let ms = Macrospin::new(0.1, d, 0.0, 0.0).unwrap();
        prop_assert!((m.norm() - 1.0).abs() <= 1e-12);
        prop_assert!(ms.energy(&m).abs() <= 1e-12);
    }

    #[test]
    fn maier_stein_is_mirror_symmetric(alpha in 0.5..8.0f64, x in -1.5..1.5f64, y in -1.5..1.5f64) {
        let ms = MaierStein::new(alpha).unwrap();
        let f = ms.drift(&Vec2::new(x, y));
        let g = ms.drift(&Vec2::new(x, -y));
        prop_assert_eq!(f[0], g[0]);
        prop_assert_eq!(f[1], -g[1]);
        let a = norm_gradient(&ms, &Vec2::new(x, y));
        let b = norm_gradient(&ms, &Vec2::new(x, -y));
        prop_assert!((a[0] - b[0]).abs() <= 1e-12 * (1.0 + a.norm()) && (a[1] + b[1]).abs() <= 1e-12 * (1.0 + a.norm()));
    }

    #[test]
    fn norm_gradient_matches_differences(m in macrospin(), theta in 0.2..2.9f64, phi in -3.1..3.1f64) {
        let chart = m.chart(PolarAxis::Z);
        let x = Vec2::new(theta, phi);
        let g = norm_gradient(&chart, &x);
        let h = 1e-6;
        for k in 0..2 {
            let mut e = Vec2::zeros();
            e[k] = h;
            let fd = (chart.drift_norm_sq(&(x + e)) - chart.drift_norm_sq(&(x - e))) / (2.0 * h);
            prop_assert!((fd - g[k]).abs() <= 1e-6 * (1.0 + g.norm()));
        }
    }

    #[test]
    fn bounds_hold_pointwise_on_contours(d in 0.0..30.0f64, e in 0.01..0.99f64, ratio in 0.0..0.9f64, s in -1.0..1.0f64, sign in prop::bool::ANY) {
        let omega = ratio * critical_tilt_angle(d).min(1.4);
        let ex = (1.0 - e).sqrt() * s;
        let m = if d == 0.0 {
            let r = (1.0 - e).sqrt();
            [r * (s * 3.0).cos(), r * (s * 3.0).sin(), e.sqrt()]
        } else {
            let mx = ((1.0 - ex * ex - e) / (d + 1.0)).max(0.0).sqrt() * if sign { 1.0 } else { -1.0 };
            [mx, ex, (1.0 - ex * ex - mx * mx).max(0.0).sqrt()]
        };
        let h = [-2.0 * d * m[0], 0.0, 2.0 * m[2]];
        let c = Vec3::new(m[1] * h[2], m[2] * h[0] - m[0] * h[2], -m[1] * h[0]);
        let pmin = precessional_min(-e, d).unwrap();
        prop_assert!(c.norm_squared() >= pmin - 1e-12);
        let nmax = nongradient_max(-e, d, omega, 0.01).unwrap();
        prop_assert!(nongradient_term(&m, d, omega, 0.01).unwrap() <= nmax * (1.0 + 1e-9) + 1e-15);
    }

    #[test]
    fn admissibility_band_is_ordered(d in 0.0..30.0f64, w in 0.0..1.55f64, alpha in 1e-3..0.2f64) {
        let band = admissibility_band(d, w, alpha).unwrap();
        let mut last = 0.0;
        for &(a, b) in &band.intervals {
            prop_assert!(a >= last && a < b && b <= 1.0);
            last = b;
        }
        if band.regime == Regime::LargeTilt {
            prop_assert!(band.is_empty());
        }
        let covered: f64 = band.intervals.iter().chain(band.excluded().iter()).map(|(a, b)| b - a).sum();
        prop_assert!((covered - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn heun_keeps_unit_length(m in macrospin(), theta in 0.0..3.14f64, phi in -3.1..3.1f64, w0 in -3.0..3.0f64, w1 in -3.0..3.0f64, w2 in -3.0..3.0f64) {
        let s = unit(theta, phi);
        let next = heun_step(&m, &s, 0.01, 0.1, &(Vec3::new(w0, w1, w2) * 0.1));
        prop_assert!((next.norm() - 1.0).abs() <= 1e-15);
        prop_assert!(m.noise(&s, &Vec3::new(w0, w1, w2)).dot(&s).abs() <= 1e-12);
    }
}
