//! Freidlin-Wentzell Lagrangian/Hamiltonian machinery for planar drift models.
//!
//! Conventions: a model supplies the raw drift `F` and a diagonal metric `G`
//! (entries `g_i^2`). The lowered drift is `f_i = F_i / g_i^2`, so `F = G f`.
//! All norms `|v|_G` use `v . G . v`, and `|v|_{G^-1}` uses `v . G^-1 . v`.

use nalgebra::{Matrix2, Vector2};

use crate::error::{ensure_finite, Error, Result};

pub type Vec2 = Vector2<f64>;
pub type Mat2 = Matrix2<f64>;

/// Below this drift norm the momentum ellipse collapses to a point.
pub const DEGENERATE_DRIFT_NORM: f64 = 1e-14;

/// Diagonal metric tensor `G = diag(g_x^2, g_y^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricTensor {
    diag: Vec2,
}

impl MetricTensor {
    pub fn identity() -> Self {
        Self { diag: Vec2::new(1.0, 1.0) }
    }

    pub(crate) fn from_entries(diag: Vec2) -> Self {
        Self { diag }
    }

    pub fn diagonal(gx2: f64, gy2: f64) -> Result<Self> {
        if gx2 > 0.0 && gy2 > 0.0 && gx2.is_finite() && gy2.is_finite() {
            Ok(Self { diag: Vec2::new(gx2, gy2) })
        } else {
            Err(Error::Domain(format!("metric entries must be positive, got ({gx2}, {gy2})")))
        }
    }

    /// The entries `g_i^2`.
    pub fn entries(&self) -> Vec2 {
        self.diag
    }

    /// The scale factors `g_i`.
    pub fn scales(&self) -> Vec2 {
        self.diag.map(f64::sqrt)
    }

    pub fn raise(&self, v: &Vec2) -> Vec2 {
        self.diag.component_mul(v)
    }

    pub fn lower(&self, v: &Vec2) -> Vec2 {
        v.component_div(&self.diag)
    }

    /// `v . G . v`
    pub fn norm_sq(&self, v: &Vec2) -> f64 {
        self.diag[0] * v[0] * v[0] + self.diag[1] * v[1] * v[1]
    }

    /// `v . G^-1 . v`
    pub fn inv_norm_sq(&self, v: &Vec2) -> f64 {
        v[0] * v[0] / self.diag[0] + v[1] * v[1] / self.diag[1]
    }
}

/// Raw drift `F` together with its metric-lowered form `f`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftPair {
    pub raw: Vec2,
    pub lowered: Vec2,
}

/// A planar drift field with a diagonal noise metric.
///
/// Implementors must be immutable; the solver shares them across threads.
pub trait DriftModel: Send + Sync {
    /// Raw drift `F(x)`.
    fn drift(&self, x: &Vec2) -> Vec2;

    fn metric(&self, _x: &Vec2) -> MetricTensor {
        MetricTensor::identity()
    }

    /// `d G_ii / d x_k`, stored at `[(i, k)]`.
    fn metric_gradient(&self, _x: &Vec2) -> Mat2 {
        Mat2::zeros()
    }

    /// `d F_i / d x_k`, stored at `[(i, k)]`.
    fn jacobian(&self, x: &Vec2) -> Mat2 {
        central_difference_jacobian(|y| self.drift(y), x)
    }

    /// Rejects configurations outside the chart (poles, etc.).
    fn check_domain(&self, x: &Vec2) -> Result<()> {
        ensure_finite(x.as_slice(), "configuration")
    }

    fn drift_pair(&self, x: &Vec2) -> DriftPair {
        let raw = self.drift(x);
        DriftPair { raw, lowered: self.metric(x).lower(&raw) }
    }

    /// `|f|^2_G`, which equals `|F|^2_{G^-1}`.
    fn drift_norm_sq(&self, x: &Vec2) -> f64 {
        self.metric(x).inv_norm_sq(&self.drift(x))
    }
}

/// Central-difference Jacobian with step `1e-6 * max(1, |x|)`.
pub fn central_difference_jacobian<F>(f: F, x: &Vec2) -> Mat2
where
    F: Fn(&Vec2) -> Vec2,
{
    let h = 1e-6 * x.norm().max(1.0);
    let mut jac = Mat2::zeros();
    for k in 0..2 {
        let mut fwd = *x;
        let mut bwd = *x;
        fwd[k] += h;
        bwd[k] -= h;
        let col = (f(&fwd) - f(&bwd)) / (2.0 * h);
        jac.set_column(k, &col);
    }
    jac
}

/// Configuration, momentum and bookkeeping at one instant of the Hamiltonian flow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhasePoint {
    pub x: Vec2,
    pub p: Vec2,
    pub t: f64,
    /// Arc length travelled so far.
    pub s: f64,
    /// Action accumulated so far.
    pub action: f64,
}

impl PhasePoint {
    pub fn new(x: Vec2, p: Vec2) -> Self {
        Self { x, p, t: 0.0, s: 0.0, action: 0.0 }
    }
}

/// `L = 1/2 (v - F) . G^-1 . (v - F)`.
pub fn lagrangian(model: &dyn DriftModel, x: &Vec2, v: &Vec2) -> Result<f64> {
    ensure_finite(v.as_slice(), "velocity")?;
    model.check_domain(x)?;
    let diff = v - model.drift(x);
    Ok(0.5 * model.metric(x).inv_norm_sq(&diff))
}

/// `H = 1/2 [(p + f) . G . (p + f) - f . G . f]`, evaluated as `p . G . (p/2 + f)`
/// which is algebraically identical and free of cancellation.
pub fn hamiltonian(model: &dyn DriftModel, x: &Vec2, p: &Vec2) -> Result<f64> {
    ensure_finite(p.as_slice(), "momentum")?;
    model.check_domain(x)?;
    Ok(hamiltonian_unchecked(model, x, p))
}

pub(crate) fn hamiltonian_unchecked(model: &dyn DriftModel, x: &Vec2, p: &Vec2) -> f64 {
    let metric = model.metric(x);
    let raw = model.drift(x);
    0.5 * metric.norm_sq(p) + p.dot(&raw)
}

/// Phase-space velocity `(x_dot, p_dot)` of Hamilton's equations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowRhs {
    pub x_dot: Vec2,
    pub p_dot: Vec2,
}

/// `x_dot = G (p + f)`, `p_dot = -grad_x H`.
pub fn flow_rhs(model: &dyn DriftModel, x: &Vec2, p: &Vec2) -> Result<FlowRhs> {
    ensure_finite(p.as_slice(), "momentum")?;
    model.check_domain(x)?;
    Ok(flow_rhs_unchecked(model, x, p))
}

pub(crate) fn flow_rhs_unchecked(model: &dyn DriftModel, x: &Vec2, p: &Vec2) -> FlowRhs {
    let metric = model.metric(x);
    let raw = model.drift(x);
    let jac = model.jacobian(x);
    let dg = model.metric_gradient(x);
    let x_dot = metric.raise(p) + raw;
    // dH/dx_k = 1/2 sum_i dG_i/dx_k p_i^2 + sum_i p_i dF_i/dx_k
    let p_sq = p.component_mul(p);
    let grad = 0.5 * dg.transpose() * p_sq + jac.transpose() * p;
    FlowRhs { x_dot, p_dot: -grad }
}

/// The zero-energy momentum ellipse at one configuration point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentumEllipse {
    pub center: Vec2,
    pub axes: Vec2,
    /// Angle at which the ellipse passes through `p = 0`.
    pub gamma0: f64,
    drift_norm: f64,
}

impl MomentumEllipse {
    pub fn at(model: &dyn DriftModel, x: &Vec2) -> Result<Self> {
        model.check_domain(x)?;
        let metric = model.metric(x);
        let f = metric.lower(&model.drift(x));
        let norm = metric.norm_sq(&f).sqrt();
        if !(norm >= DEGENERATE_DRIFT_NORM) {
            return Err(Error::DegenerateEllipse { norm });
        }
        let g = metric.scales();
        Ok(Self {
            center: -f,
            axes: Vec2::new(norm / g[0], norm / g[1]),
            gamma0: (g[1] * f[1]).atan2(g[0] * f[0]),
            drift_norm: norm,
        })
    }

    pub fn point(&self, gamma: f64) -> Vec2 {
        Vec2::new(self.axes[0] * gamma.cos(), self.axes[1] * gamma.sin()) + self.center
    }

    /// `|f|_G`
    pub fn drift_norm(&self) -> f64 {
        self.drift_norm
    }
}

/// Momentum on the zero-energy ellipse at angle `gamma`.
pub fn momentum_on_ellipse(model: &dyn DriftModel, x: &Vec2, gamma: f64) -> Result<Vec2> {
    ensure_finite(&[gamma], "ellipse angle")?;
    Ok(MomentumEllipse::at(model, x)?.point(gamma))
}

/// Ellipse angle of a velocity, `tan gamma = (g_x / g_y)(v_y / v_x)`, quadrant-resolved
/// into `(-pi, pi]`.
pub fn gamma_of_velocity(model: &dyn DriftModel, x: &Vec2, v: &Vec2) -> Result<f64> {
    ensure_finite(v.as_slice(), "velocity")?;
    model.check_domain(x)?;
    if v[0] == 0.0 && v[1] == 0.0 {
        return Err(Error::Domain("zero velocity has no ellipse angle".into()));
    }
    let g = model.metric(x).scales();
    Ok((v[1] / g[1]).atan2(v[0] / g[0]))
}

/// Angle in `[0, pi]` between a velocity and the drift, measured in the noise metric.
/// On zero-energy paths the normalisation `|v|_{G^-1} |f|_G` equals `|f|^2_G`.
pub fn psi_angle(model: &dyn DriftModel, x: &Vec2, v: &Vec2) -> Result<f64> {
    ensure_finite(v.as_slice(), "velocity")?;
    model.check_domain(x)?;
    let metric = model.metric(x);
    let f = metric.lower(&model.drift(x));
    let f_norm = metric.norm_sq(&f).sqrt();
    if !(f_norm >= DEGENERATE_DRIFT_NORM) {
        return Err(Error::DegenerateEllipse { norm: f_norm });
    }
    let v_norm = metric.inv_norm_sq(v).sqrt();
    if v_norm == 0.0 {
        return Err(Error::Domain("zero velocity has no escape angle".into()));
    }
    Ok((v.dot(&f) / (v_norm * f_norm)).clamp(-1.0, 1.0).acos())
}

/// Line-integral action `S = int p . dx` by the trapezoidal rule.
pub fn accumulate_action(points: &[PhasePoint]) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::TooFewPoints { needed: 2, got: points.len() });
    }
    Ok(points
        .windows(2)
        .map(|w| 0.5 * (w[0].p + w[1].p).dot(&(w[1].x - w[0].x)))
        .sum())
}

/// Both sides of the closed-loop action identity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopDecomposition {
    /// `oint |f|_G ds`
    pub perimeter: f64,
    /// Curl flux through the loop, evaluated as `oint f . dx`.
    pub flux: f64,
    /// `perimeter - flux`
    pub total: f64,
    /// `oint (|f|^2 - x_dot . f) dt` with the loop traversed at speed `|f|`.
    pub direct: f64,
}

impl LoopDecomposition {
    pub fn relative_gap(&self) -> f64 {
        (self.total - self.direct).abs() / self.total.abs().max(self.direct.abs()).max(f64::MIN_POSITIVE)
    }
}

const GAUSS3_NODES: [f64; 3] = [-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4];
const GAUSS3_WEIGHTS: [f64; 3] = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];

/// Closed-loop action split into a perimeter term and a curl-flux term.
///
/// The loop is a closed polyline (last point within `closure_tol` of the first).
/// `perimeter` and `flux` use Simpson's rule on each segment; `direct` is an
/// independent three-point Gauss quadrature of the time-domain integrand with the
/// loop traversed at the drift speed.
pub fn loop_decomposition(
    model: &dyn DriftModel,
    points: &[Vec2],
    closure_tol: f64,
) -> Result<LoopDecomposition> {
    if points.len() < 4 {
        return Err(Error::TooFewPoints { needed: 4, got: points.len() });
    }
    let gap = (points[points.len() - 1] - points[0]).norm();
    if gap > closure_tol {
        return Err(Error::OpenLoop { gap });
    }
    let lowered = |x: &Vec2| model.metric(x).lower(&model.drift(x));
    let norm = |x: &Vec2| {
        let m = model.metric(x);
        m.norm_sq(&m.lower(&model.drift(x))).sqrt()
    };
    let mut perimeter = 0.0;
    let mut flux = 0.0;
    let mut direct = 0.0;
    for w in points.windows(2) {
        let (a, b) = (w[0], w[1]);
        let dx = b - a;
        let len = dx.norm();
        if len == 0.0 {
            continue;
        }
        let mid = 0.5 * (a + b);
        perimeter += len * (norm(&a) + 4.0 * norm(&mid) + norm(&b)) / 6.0;
        flux += dx.dot(&(lowered(&a) + 4.0 * lowered(&mid) + lowered(&b))) / 6.0;

        // dt = ds / |f|, x_dot = |f| u along the unit tangent u
        let u = dx / len;
        for (node, weight) in GAUSS3_NODES.iter().zip(GAUSS3_WEIGHTS) {
            let x = mid + 0.5 * node * dx;
            let f = lowered(&x);
            let speed = norm(&x);
            if speed == 0.0 {
                return Err(Error::DegenerateEllipse { norm: 0.0 });
            }
            let dt_ds = 1.0 / speed;
            let x_dot = speed * u;
            let integrand = (speed * speed - x_dot.dot(&f)) * dt_ds;
            direct += 0.5 * len * weight * integrand;
        }
    }
    Ok(LoopDecomposition { perimeter, flux, total: perimeter - flux, direct })
}

/// Samples a circle counter-clockwise as a closed polyline with `n` segments.
pub fn circle_loop(center: Vec2, radius: f64, n: usize) -> Vec<Vec2> {
    let mut pts: Vec<Vec2> = (0..n)
        .map(|k| {
            let a = std::f64::consts::TAU * k as f64 / n as f64;
            center + radius * Vec2::new(a.cos(), a.sin())
        })
        .collect();
    pts.push(pts[0]);
    pts
}

/// Time derivatives of `|x_dot|^2_{G^-1}` and `|f|^2_G` along the flow, by central
/// differences of two RK4 sub-steps of size `h` forward and backward.
pub fn lorentz_rates(model: &dyn DriftModel, x: &Vec2, p: &Vec2, h: f64) -> (f64, f64) {
    let speed_sq = |x: &Vec2, p: &Vec2| {
        let m = model.metric(x);
        m.inv_norm_sq(&(m.raise(p) + model.drift(x)))
    };
    let norm_sq = |x: &Vec2| model.drift_norm_sq(x);
    let fwd = rk4_flow(model, *x, *p, h);
    let bwd = rk4_flow(model, *x, *p, -h);
    let d_speed = (speed_sq(&fwd.0, &fwd.1) - speed_sq(&bwd.0, &bwd.1)) / (2.0 * h);
    let d_norm = (norm_sq(&fwd.0) - norm_sq(&bwd.0)) / (2.0 * h);
    (d_speed, d_norm)
}

fn rk4_flow(model: &dyn DriftModel, x: Vec2, p: Vec2, h: f64) -> (Vec2, Vec2) {
    let f = |x: &Vec2, p: &Vec2| {
        let r = flow_rhs_unchecked(model, x, p);
        (r.x_dot, r.p_dot)
    };
    let (k1x, k1p) = f(&x, &p);
    let (k2x, k2p) = f(&(x + 0.5 * h * k1x), &(p + 0.5 * h * k1p));
    let (k3x, k3p) = f(&(x + 0.5 * h * k2x), &(p + 0.5 * h * k2p));
    let (k4x, k4p) = f(&(x + h * k3x), &(p + h * k3p));
    (
        x + h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x),
        p + h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    /// Linear test field with an anisotropic metric.
    struct Linear {
        a: Mat2,
        g: MetricTensor,
    }

    impl DriftModel for Linear {
        fn drift(&self, x: &Vec2) -> Vec2 {
            self.a * x
        }
        fn metric(&self, _x: &Vec2) -> MetricTensor {
            self.g
        }
    }

    fn sample() -> Linear {
        Linear {
            a: Mat2::new(-1.0, 0.7, -0.3, -2.0),
            g: MetricTensor::diagonal(2.0, 0.5).unwrap(),
        }
    }

    #[test]
    fn metric_rejects_nonpositive_entries() {
        assert!(MetricTensor::diagonal(0.0, 1.0).is_err());
        assert!(MetricTensor::diagonal(1.0, -2.0).is_err());
    }

    #[test]
    fn lagrangian_vanishes_on_drift() {
        let m = sample();
        let x = Vec2::new(0.3, -0.8);
        assert_eq!(lagrangian(&m, &x, &m.drift(&x)).unwrap(), 0.0);
    }

    #[test]
    fn lagrangian_rejects_nan() {
        let m = sample();
        assert!(lagrangian(&m, &Vec2::new(0.0, 0.0), &Vec2::new(f64::NAN, 0.0)).is_err());
    }

    #[test]
    fn hamiltonian_special_momenta() {
        let m = sample();
        let x = Vec2::new(0.4, 0.9);
        let pair = m.drift_pair(&x);
        let f = pair.lowered;
        assert_eq!(hamiltonian(&m, &x, &Vec2::zeros()).unwrap(), 0.0);
        assert_abs_diff_eq!(hamiltonian(&m, &x, &(-2.0 * f)).unwrap(), 0.0, epsilon = 1e-14);
        let center = hamiltonian(&m, &x, &(-f)).unwrap();
        assert_abs_diff_eq!(center, -0.5 * m.metric(&x).norm_sq(&f), epsilon = 1e-14);
        // F = G f
        assert_abs_diff_eq!((m.metric(&x).raise(&f) - pair.raw).norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn ellipse_landmarks_and_zero_energy() {
        let m = sample();
        let x = Vec2::new(-0.7, 0.2);
        let e = MomentumEllipse::at(&m, &x).unwrap();
        let f = m.drift_pair(&x).lowered;
        assert_abs_diff_eq!(e.point(e.gamma0).norm(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!((e.point(PI + e.gamma0) + 2.0 * f).norm(), 0.0, epsilon = 1e-14);
        for k in 0..64 {
            let g = k as f64 * 0.1;
            let p = e.point(g);
            let h = hamiltonian(&m, &x, &p).unwrap();
            assert!(h.abs() <= 1e-12 * m.drift_norm_sq(&x).max(1.0), "H = {h}");
        }
    }

    #[test]
    fn ellipse_axes_match_bruteforce_extent() {
        let m = sample();
        let x = Vec2::new(0.5, 0.5);
        let e = MomentumEllipse::at(&m, &x).unwrap();
        let f = m.drift_pair(&x).lowered;
        let mut ext = Vec2::zeros();
        for k in 0..10_000 {
            let p = e.point(std::f64::consts::TAU * k as f64 / 10_000.0);
            ext[0] = ext[0].max((p[0] + f[0]).abs());
            ext[1] = ext[1].max((p[1] + f[1]).abs());
        }
        let fgf = m.metric(&x).norm_sq(&f);
        let g = m.metric(&x).entries();
        assert_abs_diff_eq!(ext[0], (fgf / g[0]).sqrt(), epsilon = 1e-6);
        assert_abs_diff_eq!(ext[1], (fgf / g[1]).sqrt(), epsilon = 1e-6);
    }

    #[test]
    fn degenerate_ellipse_at_fixed_point() {
        let m = sample();
        assert!(matches!(
            momentum_on_ellipse(&m, &Vec2::zeros(), 0.3),
            Err(Error::DegenerateEllipse { .. })
        ));
    }

    #[test]
    fn gamma_round_trip() {
        let m = sample();
        let x = Vec2::new(0.1, -1.3);
        for k in 0..40 {
            let gamma = -PI + 0.05 + k as f64 * 0.157;
            let p = momentum_on_ellipse(&m, &x, gamma).unwrap();
            let v = flow_rhs(&m, &x, &p).unwrap().x_dot;
            let back = gamma_of_velocity(&m, &x, &v).unwrap();
            let diff = (back - gamma + PI).rem_euclid(2.0 * PI) - PI;
            assert!(diff.abs() < 1e-10, "{gamma} -> {back}");
        }
    }

    #[test]
    fn gamma_of_drift_is_gamma0() {
        let m = sample();
        let x = Vec2::new(0.6, 0.1);
        let e = MomentumEllipse::at(&m, &x).unwrap();
        let g = gamma_of_velocity(&m, &x, &(3.0 * m.drift(&x))).unwrap();
        assert_abs_diff_eq!(g, e.gamma0, epsilon = 1e-14);
    }

    #[test]
    fn gamma_isotropic_vertical() {
        let m = Linear { a: Mat2::identity(), g: MetricTensor::identity() };
        let g = gamma_of_velocity(&m, &Vec2::new(1.0, 1.0), &Vec2::new(0.0, 1.0)).unwrap();
        assert_abs_diff_eq!(g, PI / 2.0);
        assert!(gamma_of_velocity(&m, &Vec2::new(1.0, 1.0), &Vec2::zeros()).is_err());
    }

    #[test]
    fn psi_limits() {
        let m = Linear { a: Mat2::new(0.0, 1.0, -1.0, -0.5), g: MetricTensor::identity() };
        let x = Vec2::new(0.3, 0.4);
        let f = m.drift(&x);
        assert_abs_diff_eq!(psi_angle(&m, &x, &f).unwrap(), 0.0, epsilon = 1e-7);
        assert_abs_diff_eq!(psi_angle(&m, &x, &(-f)).unwrap(), PI, epsilon = 1e-7);
    }

    #[test]
    fn lagrangian_orthogonal_velocity() {
        let m = Linear { a: Mat2::new(-1.0, 0.2, 0.4, -0.3), g: MetricTensor::identity() };
        let x = Vec2::new(0.9, -0.4);
        let f = m.drift(&x);
        let v = Vec2::new(-f[1], f[0]);
        assert_abs_diff_eq!(lagrangian(&m, &x, &v).unwrap(), f.norm_squared(), epsilon = 1e-14);
    }

    #[test]
    fn flow_rhs_matches_finite_difference_of_hamiltonian() {
        let m = sample();
        let x = Vec2::new(0.3, 0.7);
        let p = Vec2::new(-0.2, 0.5);
        let r = flow_rhs(&m, &x, &p).unwrap();
        let h = 1e-6;
        for k in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[k] += h;
            xm[k] -= h;
            let dh = (hamiltonian(&m, &xp, &p).unwrap() - hamiltonian(&m, &xm, &p).unwrap()) / (2.0 * h);
            assert_abs_diff_eq!(-dh, r.p_dot[k], epsilon = 1e-8);
            let mut pp = p;
            let mut pm = p;
            pp[k] += h;
            pm[k] -= h;
            let dp = (hamiltonian(&m, &x, &pp).unwrap() - hamiltonian(&m, &x, &pm).unwrap()) / (2.0 * h);
            assert_abs_diff_eq!(dp, r.x_dot[k], epsilon = 1e-8);
        }
    }

    #[test]
    fn action_of_relaxation_segment_is_zero() {
        let pts: Vec<PhasePoint> = (0..10)
            .map(|k| PhasePoint::new(Vec2::new(k as f64 * 0.1, 0.0), Vec2::zeros()))
            .collect();
        assert_eq!(accumulate_action(&pts).unwrap(), 0.0);
        assert!(accumulate_action(&pts[..1]).is_err());
    }

    #[test]
    fn open_loop_is_rejected() {
        let m = sample();
        let mut pts = circle_loop(Vec2::new(1.0, 1.0), 0.3, 50);
        pts.pop();
        assert!(matches!(loop_decomposition(&m, &pts, 1e-9), Err(Error::OpenLoop { .. })));
    }

    #[test]
    fn small_loop_terms_scale_with_radius() {
        let m = Linear { a: Mat2::new(-1.0, 0.7, -0.3, -2.0), g: MetricTensor::identity() };
        let c = Vec2::new(1.0, 1.0);
        let r = 1e-3;
        let d = loop_decomposition(&m, &circle_loop(c, r, 256), 1e-12).unwrap();
        let perimeter = std::f64::consts::TAU * r * m.drift(&c).norm();
        assert!((d.perimeter - perimeter).abs() < 1e-4 * perimeter);
        // curl of a linear field is a21 - a12 = -1
        let flux = -std::f64::consts::PI * r * r;
        assert!((d.flux - flux).abs() < 1e-3 * flux.abs());
        assert!(d.relative_gap() < 1e-9);
    }

    #[test]
    fn central_difference_jacobian_of_linear_map() {
        let m = sample();
        let j = m.jacobian(&Vec2::new(0.2, 0.3));
        assert_abs_diff_eq!((j - m.a).norm(), 0.0, epsilon = 1e-8);
    }
}
