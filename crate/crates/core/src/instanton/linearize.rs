//! Linearised Hamiltonian flow at a fixed point and the seeds derived from it.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fw::{hamiltonian_unchecked, momentum_on_ellipse, DriftModel, Mat2, MomentumEllipse, Vec2};

const FIXED_POINT_TOL: f64 = 1e-10;

type C2 = [Complex64; 2];

/// Eigenvalue with its phase-space eigenvector `(x1, x2, p1, p2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Eigenpair {
    pub value: Complex64,
    pub vector: [Complex64; 4],
}

/// Eigenstructure of `[[M, G], [0, -M^T]]`, the linearised flow at `(x_S, 0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linearization {
    pub point: Vec2,
    pub drift_jacobian: Mat2,
    pub metric: Vec2,
    /// Deterministic relaxation modes (zero momentum block).
    pub relaxation: [Eigenpair; 2],
    /// Fluctuation modes (eigenvalues of `-M^T`); `None` where the position part
    /// is not determined, which happens only at non-hyperbolic or saddle points.
    pub fluctuation: [Option<Eigenpair>; 2],
}

impl Linearization {
    pub fn eigenvalues(&self) -> Vec<Complex64> {
        let mut v: Vec<Complex64> = self.relaxation.iter().map(|e| e.value).collect();
        v.extend(fluctuation_values(&self.drift_jacobian));
        v
    }

    pub fn is_stable(&self) -> bool {
        self.relaxation.iter().all(|e| e.value.re < 0.0)
    }

    /// Symmetric `Q` with `p = Q (x - x_S)` on the local instanton manifold; solves
    /// `Q G Q + Q M + M^T Q = 0`.
    pub fn riccati(&self) -> Result<Mat2> {
        if !self.is_stable() {
            return Err(Error::Domain("instanton manifold requested at a non-stable fixed point".into()));
        }
        let pairs: Vec<Eigenpair> = self.fluctuation.iter().flatten().copied().collect();
        if pairs.len() != 2 {
            return Err(Error::DefectiveLinearization("fluctuation modes are incomplete".into()));
        }
        let (xa, pa, xb, pb) = if pairs[0].value.im.abs() > 0.0 {
            let v = pairs[0].vector;
            (
                Vec2::new(v[0].re, v[1].re),
                Vec2::new(v[2].re, v[3].re),
                Vec2::new(v[0].im, v[1].im),
                Vec2::new(v[2].im, v[3].im),
            )
        } else {
            let (u, v) = (pairs[0].vector, pairs[1].vector);
            (
                Vec2::new(u[0].re, u[1].re),
                Vec2::new(u[2].re, u[3].re),
                Vec2::new(v[0].re, v[1].re),
                Vec2::new(v[2].re, v[3].re),
            )
        };
        let x = Mat2::from_columns(&[xa, xb]);
        let p = Mat2::from_columns(&[pa, pb]);
        let inv = x
            .try_inverse()
            .ok_or_else(|| Error::DefectiveLinearization("position parts of the fluctuation modes are collinear".into()))?;
        let q = p * inv;
        let q = 0.5 * (q + q.transpose());
        let g = Mat2::from_diagonal(&self.metric);
        let m = self.drift_jacobian;
        let residual = (q * g * q + q * m + m.transpose() * q).norm();
        let scale = (q.norm() * (q.norm() * g.norm() + 2.0 * m.norm())).max(1e-300);
        if residual > 1e-8 * scale {
            return Err(Error::DefectiveLinearization(format!("Riccati residual {residual:e}")));
        }
        Ok(q)
    }
}

fn fluctuation_values(m: &Mat2) -> [Complex64; 2] {
    let (l1, l2) = eigenvalues_2x2(m);
    [-l1, -l2]
}

fn eigenvalues_2x2(a: &Mat2) -> (Complex64, Complex64) {
    let half_tr = 0.5 * (a[(0, 0)] + a[(1, 1)]);
    let half_diff = 0.5 * (a[(0, 0)] - a[(1, 1)]);
    let disc = Complex64::new(half_diff * half_diff + a[(0, 1)] * a[(1, 0)], 0.0).sqrt();
    (half_tr + disc, half_tr - disc)
}

/// Eigenpairs of a real 2x2 matrix; errors on a non-diagonalisable matrix.
fn eigen_2x2(a: &Mat2) -> Result<[(Complex64, C2); 2]> {
    let (l1, l2) = eigenvalues_2x2(a);
    let scale = a.norm().max(1e-300);
    let (b, c) = (a[(0, 1)], a[(1, 0)]);
    let tiny = 1e-14 * scale;
    let z = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    if b.abs() <= tiny && c.abs() <= tiny {
        // already diagonal (to rounding): coordinate axes
        let (a0, a1) = (a[(0, 0)], a[(1, 1)]);
        return Ok([(Complex64::new(a0, 0.0), [one, z]), (Complex64::new(a1, 0.0), [z, one])]);
    }
    if (l1 - l2).norm() <= 1e-10 * scale {
        return Err(Error::DefectiveLinearization("repeated eigenvalue with a single eigenvector".into()));
    }
    let vec = |l: Complex64| -> C2 {
        let v = if b.abs() >= c.abs() {
            [Complex64::new(b, 0.0), l - a[(0, 0)]]
        } else {
            [l - a[(1, 1)], Complex64::new(c, 0.0)]
        };
        let n = (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
        [v[0] / n, v[1] / n]
    };
    Ok([(l1, vec(l1)), (l2, vec(l2))])
}

fn solve_2x2(a: [[Complex64; 2]; 2], rhs: C2) -> Option<C2> {
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    let scale = a.iter().flatten().map(|v| v.norm()).fold(0.0, f64::max);
    if det.norm() <= 1e-12 * scale * scale || scale == 0.0 {
        return None;
    }
    Some([
        (rhs[0] * a[1][1] - a[0][1] * rhs[1]) / det,
        (a[0][0] * rhs[1] - a[1][0] * rhs[0]) / det,
    ])
}

/// Linearises the Hamiltonian flow at the fixed point `x_s` of `model`.
pub fn linearize_fixed_point(model: &dyn DriftModel, x_s: &Vec2) -> Result<Linearization> {
    model.check_domain(x_s)?;
    let residual = model.drift(x_s).norm();
    if !(residual <= FIXED_POINT_TOL) {
        return Err(Error::NotFixedPoint { residual });
    }
    let m = model.jacobian(x_s);
    let g = model.metric(x_s).entries();
    let z = Complex64::new(0.0, 0.0);

    let relax = eigen_2x2(&m)?;
    let relaxation = relax.map(|(value, v)| Eigenpair { value, vector: [v[0], v[1], z, z] });

    let fluct = eigen_2x2(&(-m.transpose()))?;
    let fluctuation = fluct.map(|(mu, w)| {
        // (mu - M) x = G w
        let a = [
            [mu - m[(0, 0)], Complex64::new(-m[(0, 1)], 0.0)],
            [Complex64::new(-m[(1, 0)], 0.0), mu - m[(1, 1)]],
        ];
        solve_2x2(a, [w[0] * g[0], w[1] * g[1]]).map(|x| Eigenpair { value: mu, vector: [x[0], x[1], w[0], w[1]] })
    });

    Ok(Linearization { point: *x_s, drift_jacobian: m, metric: g, relaxation, fluctuation })
}

/// Initial condition for one shot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Seed {
    pub index: usize,
    pub chart: usize,
    pub x: Vec2,
    pub p: Vec2,
    /// Action already accumulated between the fixed point and the seed.
    pub action: f64,
    /// Fan angle `a`; the seed displacement points along `(-cos a, -sin a)`.
    pub angle: f64,
}

impl Seed {
    /// Reflection `y -> -y` about the fixed point's horizontal line.
    pub fn mirrored(&self, index: usize, center_y: f64) -> Self {
        Self {
            index,
            chart: self.chart,
            x: Vec2::new(self.x[0], 2.0 * center_y - self.x[1]),
            p: Vec2::new(self.p[0], -self.p[1]),
            action: self.action,
            angle: std::f64::consts::TAU - self.angle,
        }
    }
}

/// Unit displacement direction for fan angle `a`: `a = 0` points along `-x`.
pub fn fan_direction(angle: f64) -> Vec2 {
    let (s, c) = angle.sin_cos();
    Vec2::new(-c, -s)
}

/// Rescales `p` along `p + f` so that it lies on the zero-energy ellipse.
pub fn project_to_zero_energy(model: &dyn DriftModel, x: &Vec2, p: &Vec2) -> Result<Vec2> {
    let metric = model.metric(x);
    let f = metric.lower(&model.drift(x));
    let shifted = p + f;
    let num = metric.norm_sq(&f);
    let den = metric.norm_sq(&shifted);
    if !(den > 0.0) || !(num > 0.0) {
        return Err(Error::DegenerateEllipse { norm: num.sqrt() });
    }
    Ok(-f + (num / den).sqrt() * shifted)
}

/// Seed on the linear instanton manifold in direction `dir`, scaled so that
/// `dx^T Q dx = delta^2 tr(Q) / 2`, then projected onto `H = 0`.
pub fn instanton_seed(
    model: &dyn DriftModel,
    x_s: &Vec2,
    q: &Mat2,
    angle: f64,
    delta: f64,
    index: usize,
    chart: usize,
) -> Result<Seed> {
    let d = fan_direction(angle);
    instanton_seed_along(model, x_s, q, d, angle, delta, index, chart)
}

#[allow(clippy::too_many_arguments)]
fn instanton_seed_along(
    model: &dyn DriftModel,
    x_s: &Vec2,
    q: &Mat2,
    d: Vec2,
    angle: f64,
    delta: f64,
    index: usize,
    chart: usize,
) -> Result<Seed> {
    let quad = d.dot(&(q * d));
    if !(quad > 0.0) {
        return Err(Error::DefectiveLinearization("instanton quadratic form is not positive".into()));
    }
    let r = delta * (0.5 * q.trace() / quad).sqrt();
    let dx = r * d;
    let x = x_s + dx;
    let p = project_to_zero_energy(model, &x, &(q * dx))?;
    let action = 0.5 * dx.dot(&(q * dx));
    Ok(Seed { index, chart, x, p, action, angle })
}

/// Fan angles `2 pi k / n`. When `mirror` is set, the upper half is generated by
/// reflecting the lower half so mirror partners are bitwise symmetric.
pub fn eigenvector_fan(
    model: &dyn DriftModel,
    lin: &Linearization,
    n: usize,
    delta: f64,
    chart: usize,
    mirror: bool,
) -> Result<Vec<Seed>> {
    let q = lin.riccati()?;
    let x_s = lin.point;
    let mut seeds: Vec<Option<Seed>> = vec![None; n];
    for k in 0..n {
        let angle = std::f64::consts::TAU * k as f64 / n as f64;
        if mirror && 2 * k > n {
            let partner = seeds[n - k].expect("lower half seeded first");
            seeds[k] = Some(partner.mirrored(k, x_s[1]));
            continue;
        }
        let mut d = fan_direction(angle);
        if mirror && (k == 0 || 2 * k == n) {
            d[1] = 0.0;
        }
        seeds[k] = Some(instanton_seed_along(model, &x_s, &q, d, angle, delta, k, chart)?);
    }
    Ok(seeds.into_iter().flatten().collect())
}

/// Seeds on a circle of radius `delta` whose momenta are the ellipse points that
/// push the state radially outward; seeds whose outward angle lies within
/// `gamma_skip` of the relaxation angle `gamma0` are skipped.
pub fn gamma_fan(
    model: &dyn DriftModel,
    x_s: &Vec2,
    n: usize,
    delta: f64,
    gamma_skip: f64,
    chart: usize,
) -> Result<Vec<Seed>> {
    let mut seeds = Vec::with_capacity(n);
    for k in 0..n {
        let angle = std::f64::consts::TAU * k as f64 / n as f64;
        let d = fan_direction(angle);
        let x = x_s + delta * d;
        let ellipse = MomentumEllipse::at(model, &x)?;
        let g = model.metric(&x).scales();
        let gamma = (d[1] / g[1]).atan2(d[0] / g[0]);
        let offset = (gamma - ellipse.gamma0 + std::f64::consts::PI).rem_euclid(std::f64::consts::TAU)
            - std::f64::consts::PI;
        if offset.abs() < gamma_skip {
            continue;
        }
        let p = momentum_on_ellipse(model, &x, gamma)?;
        seeds.push(Seed { index: k, chart, x, p, action: 0.0, angle });
    }
    if seeds.is_empty() {
        return Err(Error::AllSeedsRejected(vec!["every gamma lies in the skipped band".into()]));
    }
    Ok(seeds)
}

/// Energy of a seed relative to `max(1, |f|^2_G)`.
pub fn relative_energy(model: &dyn DriftModel, x: &Vec2, p: &Vec2) -> f64 {
    hamiltonian_unchecked(model, x, p).abs() / model.drift_norm_sq(x).max(1.0)
}
