use std::f64::consts::FRAC_PI_2;

use nalgebra::{Matrix3, Vector3};

use crate::error::{ensure_finite, Error, Result};
use crate::fw::{DriftModel, Mat2, MetricTensor, Vec2};

pub type Vec3 = Vector3<f64>;

/// Anisotropy at which the two critical-current branches meet.
pub const CRITICAL_ANISOTROPY: f64 = 5.09;

/// Spherical charts are refused within this polar angle of a pole.
pub const POLE_EXCLUSION: f64 = 1e-4;

const UNIT_TOL: f64 = 1e-9;

/// Tilt of the separatrix planes from the y-z plane, `arctan(1/sqrt(D))`.
pub fn critical_tilt_angle(anisotropy: f64) -> f64 {
    if anisotropy == 0.0 {
        FRAC_PI_2
    } else {
        (1.0 / anisotropy.sqrt()).atan()
    }
}

/// Magnitude of the switching current for anisotropy `D` and polariser tilt `omega`.
pub fn critical_current(anisotropy: f64, omega: f64) -> Result<f64> {
    if !(anisotropy >= 0.0) || !anisotropy.is_finite() {
        return Err(Error::Domain(format!("anisotropy must be non-negative, got {anisotropy}")));
    }
    if !omega.is_finite() || omega.abs() >= FRAC_PI_2 || omega.cos() <= 0.0 {
        return Err(Error::Domain(format!("polariser tilt must lie in (-pi/2, pi/2), got {omega}")));
    }
    let d = anisotropy;
    let aligned = if d > CRITICAL_ANISOTROPY {
        2.0 / std::f64::consts::PI * (d * (d + 1.0)).sqrt()
    } else {
        (d + 2.0) / 2.0
    };
    Ok(aligned / omega.cos())
}

/// Biaxial macrospin `eps(m) = D m_x^2 - m_z^2` driven by a spin-polarised current.
///
/// The drift is `A = m x h - alpha m x (m x h) - alpha I m x (m x n)` with the
/// reduced field `h = -grad(eps)/2 = (-D m_x, 0, m_z)` and polariser
/// `n = (sin omega, 0, cos omega)`. A negative current destabilises `m_z > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Macrospin {
    pub alpha: f64,
    pub anisotropy: f64,
    pub current: f64,
    pub omega: f64,
}

impl Macrospin {
    pub fn new(alpha: f64, anisotropy: f64, current: f64, omega: f64) -> Result<Self> {
        ensure_finite(&[alpha, anisotropy, current, omega], "macrospin parameter")?;
        if alpha <= 0.0 {
            return Err(Error::Domain(format!("damping must be positive, got {alpha}")));
        }
        if anisotropy < 0.0 {
            return Err(Error::Domain(format!("anisotropy must be non-negative, got {anisotropy}")));
        }
        if omega.abs() >= FRAC_PI_2 {
            return Err(Error::Domain(format!("polariser tilt must lie in (-pi/2, pi/2), got {omega}")));
        }
        Ok(Self { alpha, anisotropy, current, omega })
    }

    /// Builds the model from a signed drive ratio `I / I_C(D, omega)` and a tilt
    /// given as a fraction of the separatrix angle.
    pub fn from_ratios(alpha: f64, anisotropy: f64, current_ratio: f64, omega_ratio: f64) -> Result<Self> {
        ensure_finite(&[current_ratio, omega_ratio], "drive ratio")?;
        let omega = omega_ratio * critical_tilt_angle(anisotropy);
        let current = current_ratio * critical_current(anisotropy, omega)?;
        Self::new(alpha, anisotropy, current, omega)
    }

    pub fn polarizer(&self) -> Vec3 {
        Vec3::new(self.omega.sin(), 0.0, self.omega.cos())
    }

    /// Current projected on the easy axis, `I cos(omega)`.
    pub fn effective_current(&self) -> f64 {
        self.current * self.omega.cos()
    }

    pub fn critical_current(&self) -> f64 {
        critical_current(self.anisotropy, self.omega).unwrap_or(f64::NAN)
    }

    /// `h = (-D m_x, 0, m_z)`
    pub fn field(&self, m: &Vec3) -> Vec3 {
        Vec3::new(-self.anisotropy * m[0], 0.0, m[2])
    }

    pub fn energy(&self, m: &Vec3) -> f64 {
        self.anisotropy * m[0] * m[0] - m[2] * m[2]
    }

    pub fn energy_gradient(&self, m: &Vec3) -> Vec3 {
        -2.0 * self.field(m)
    }

    pub fn drift(&self, m: &Vec3) -> Vec3 {
        let h = self.field(m);
        let n = self.polarizer();
        let mh = m.cross(&h);
        let mn = m.cross(&n);
        mh - self.alpha * m.cross(&mh) - self.alpha * self.current * m.cross(&mn)
    }

    /// Validated Cartesian drift.
    pub fn drift_cartesian(&self, m: &Vec3) -> Result<Vec3> {
        check_unit(m)?;
        Ok(self.drift(m))
    }

    /// Directional derivative `dA[v]` of the drift at `m`.
    pub fn drift_derivative(&self, m: &Vec3, v: &Vec3) -> Vec3 {
        let h = self.field(m);
        let hv = self.field(v);
        let n = self.polarizer();
        let a = self.alpha;
        v.cross(&h) + m.cross(&hv)
            - a * (v.cross(&m.cross(&h)) + m.cross(&v.cross(&h)) + m.cross(&m.cross(&hv)))
            - a * self.current * (v.cross(&m.cross(&n)) + m.cross(&v.cross(&n)))
    }

    /// Drift Jacobian as a 3x3 matrix, acting on ambient displacements.
    pub fn drift_jacobian(&self, m: &Vec3) -> Matrix3<f64> {
        let mut j = Matrix3::zeros();
        for k in 0..3 {
            let mut e = Vec3::zeros();
            e[k] = 1.0;
            j.set_column(k, &self.drift_derivative(m, &e));
        }
        j
    }

    /// Energy and its rate along the deterministic flow,
    /// `d eps/dt = -2 alpha [m x (h + I n)] . (m x h)`.
    pub fn energy_and_rate(&self, m: &Vec3) -> Result<(f64, f64)> {
        check_unit(m)?;
        let h = self.field(m);
        let mh = m.cross(&h);
        let rate = -2.0 * self.alpha * m.cross(&(h + self.current * self.polarizer())).dot(&mh);
        Ok((self.energy(m), rate))
    }

    /// Signed distance-like margin to the basin boundary of the `m_z > 0` state;
    /// positive inside the basin.
    ///
    /// Without anisotropy the boundary is the unstable limit cycle
    /// `m_z = -I cos(omega)`; otherwise it is the `eps = 0` separatrix.
    pub fn basin_margin(&self, m: &Vec3) -> f64 {
        if self.anisotropy == 0.0 {
            m[2] + self.effective_current()
        } else {
            -self.energy(m)
        }
    }

    pub fn chart(&self, axis: PolarAxis) -> SphericalChart {
        SphericalChart { model: *self, axis }
    }

    /// Drift pushed forward to the standard `(theta, phi)` chart.
    pub fn drift_spherical(&self, theta: f64, phi: f64) -> Result<Vec2> {
        let chart = self.chart(PolarAxis::Z);
        let x = Vec2::new(theta, phi);
        chart.check_domain(&x)?;
        Ok(chart.drift(&x))
    }

    /// The stable state near `+z`, located by Newton iteration in a chart whose
    /// equator passes through `+z`.
    pub fn stable_point(&self) -> Result<Vec3> {
        let chart = self.chart(PolarAxis::X);
        let mut x = chart.locate(&Vec3::z());
        for _ in 0..100 {
            let f = chart.drift(&x);
            if f.norm() < 1e-15 {
                break;
            }
            let j = chart.jacobian(&x);
            let step = j
                .lu()
                .solve(&f)
                .ok_or_else(|| Error::NotFixedPoint { residual: f.norm() })?;
            x -= step;
        }
        let residual = chart.drift(&x).norm();
        if !(residual < 1e-12) {
            return Err(Error::NotFixedPoint { residual });
        }
        Ok(chart.embed(&x))
    }
}

fn check_unit(m: &Vec3) -> Result<()> {
    ensure_finite(m.as_slice(), "magnetisation")?;
    let err = (m.norm() - 1.0).abs();
    if err > UNIT_TOL {
        return Err(Error::Domain(format!("magnetisation is not a unit vector (| |m| - 1 | = {err:e})")));
    }
    Ok(())
}

/// Dynamical regions of the sphere bounded by the `eps = 0` separatrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Region {
    NegEnergyUp,
    NegEnergyDown,
    PosEnergyXPlus,
    PosEnergyXMinus,
    Separatrix,
}

impl Region {
    pub fn label(&self) -> &'static str {
        match self {
            Region::NegEnergyUp => "neg_energy_up",
            Region::NegEnergyDown => "neg_energy_down",
            Region::PosEnergyXPlus => "pos_energy_xplus",
            Region::PosEnergyXMinus => "pos_energy_xminus",
            Region::Separatrix => "separatrix",
        }
    }
}

pub fn classify_region(m: &Vec3, anisotropy: f64, separatrix_tol: f64) -> Result<Region> {
    check_unit(m)?;
    let eps = anisotropy * m[0] * m[0] - m[2] * m[2];
    Ok(if eps.abs() <= separatrix_tol {
        Region::Separatrix
    } else if eps < 0.0 {
        if m[2] > 0.0 {
            Region::NegEnergyUp
        } else {
            Region::NegEnergyDown
        }
    } else if m[0] > 0.0 {
        Region::PosEnergyXPlus
    } else {
        Region::PosEnergyXMinus
    })
}

/// Which lab axis plays the role of the chart's polar axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PolarAxis {
    X,
    Y,
    Z,
}

impl PolarAxis {
    pub const ALL: [PolarAxis; 3] = [PolarAxis::X, PolarAxis::Y, PolarAxis::Z];

    pub fn index(&self) -> usize {
        match self {
            PolarAxis::X => 0,
            PolarAxis::Y => 1,
            PolarAxis::Z => 2,
        }
    }

    pub fn from_index(k: usize) -> Self {
        Self::ALL[k % 3]
    }

    /// Maps chart-frame components to lab components by a cyclic permutation.
    fn to_lab(&self, c: Vec3) -> Vec3 {
        match self {
            PolarAxis::Z => c,
            PolarAxis::X => Vec3::new(c[2], c[0], c[1]),
            PolarAxis::Y => Vec3::new(c[1], c[2], c[0]),
        }
    }

    fn to_chart(&self, l: Vec3) -> Vec3 {
        match self {
            PolarAxis::Z => l,
            PolarAxis::X => Vec3::new(l[1], l[2], l[0]),
            PolarAxis::Y => Vec3::new(l[2], l[0], l[1]),
        }
    }
}

/// Orthonormal spherical frame expressed in lab components.
#[derive(Debug, Clone, Copy)]
struct Frame {
    sin: f64,
    cos: f64,
    m: Vec3,
    e_theta: Vec3,
    e_phi: Vec3,
}

/// The macrospin drift in a `(theta, phi)` chart with metric `diag(1, 1/sin^2 theta)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphericalChart {
    pub model: Macrospin,
    pub axis: PolarAxis,
}

impl SphericalChart {
    fn frame(&self, x: &Vec2) -> Frame {
        let (st, ct) = x[0].sin_cos();
        let (sp, cp) = x[1].sin_cos();
        Frame {
            sin: st,
            cos: ct,
            m: self.axis.to_lab(Vec3::new(st * cp, st * sp, ct)),
            e_theta: self.axis.to_lab(Vec3::new(ct * cp, ct * sp, -st)),
            e_phi: self.axis.to_lab(Vec3::new(-sp, cp, 0.0)),
        }
    }

    pub fn embed(&self, x: &Vec2) -> Vec3 {
        self.frame(x).m
    }

    /// Chart coordinates of a lab unit vector, `phi` in `(-pi, pi]`.
    pub fn locate(&self, m: &Vec3) -> Vec2 {
        let c = self.axis.to_chart(*m);
        Vec2::new(c[2].clamp(-1.0, 1.0).acos(), c[1].atan2(c[0]))
    }

    /// Chart-independent covector `P = p_theta e_theta + p_phi e_phi / sin theta`.
    pub fn embed_momentum(&self, x: &Vec2, p: &Vec2) -> Vec3 {
        let fr = self.frame(x);
        p[0] * fr.e_theta + p[1] / fr.sin * fr.e_phi
    }

    /// Chart momentum of an ambient covector tangent to the sphere.
    pub fn chart_momentum(&self, x: &Vec2, momentum: &Vec3) -> Vec2 {
        let fr = self.frame(x);
        Vec2::new(momentum.dot(&fr.e_theta), fr.sin * momentum.dot(&fr.e_phi))
    }

    /// Ambient velocity of a chart velocity.
    pub fn embed_velocity(&self, x: &Vec2, v: &Vec2) -> Vec3 {
        let fr = self.frame(x);
        v[0] * fr.e_theta + fr.sin * v[1] * fr.e_phi
    }

    /// `|cos theta|`; large values mean the chart is near its pole.
    pub fn pole_proximity(&self, x: &Vec2) -> f64 {
        x[0].cos().abs()
    }
}

impl DriftModel for SphericalChart {
    fn drift(&self, x: &Vec2) -> Vec2 {
        let fr = self.frame(x);
        let a = self.model.drift(&fr.m);
        Vec2::new(a.dot(&fr.e_theta), a.dot(&fr.e_phi) / fr.sin)
    }

    fn metric(&self, x: &Vec2) -> MetricTensor {
        let s = x[0].sin();
        MetricTensor::from_entries(Vec2::new(1.0, 1.0 / (s * s)))
    }

    fn metric_gradient(&self, x: &Vec2) -> Mat2 {
        let (s, c) = x[0].sin_cos();
        let mut dg = Mat2::zeros();
        dg[(1, 0)] = -2.0 * c / (s * s * s);
        dg
    }

    fn jacobian(&self, x: &Vec2) -> Mat2 {
        let fr = self.frame(x);
        let (s, c) = (fr.sin, fr.cos);
        let a = self.model.drift(&fr.m);
        let da_theta = self.model.drift_derivative(&fr.m, &fr.e_theta);
        let da_phi = self.model.drift_derivative(&fr.m, &(s * fr.e_phi));
        let a_phi = a.dot(&fr.e_phi);
        Mat2::new(
            da_theta.dot(&fr.e_theta) - a.dot(&fr.m),
            da_phi.dot(&fr.e_theta) + c * a_phi,
            da_theta.dot(&fr.e_phi) / s - a_phi * c / (s * s),
            da_phi.dot(&fr.e_phi) / s - a.dot(&(s * fr.m + c * fr.e_theta)) / s,
        )
    }

    fn check_domain(&self, x: &Vec2) -> Result<()> {
        ensure_finite(x.as_slice(), "chart coordinates")?;
        if x[0].sin() < POLE_EXCLUSION.sin() {
            return Err(Error::PoleChart { theta: x[0] });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fw::central_difference_jacobian;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_unit(rng: &mut ChaCha8Rng) -> Vec3 {
        loop {
            let v = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let n = v.norm();
            if n > 0.1 && n < 1.0 {
                return v / n;
            }
        }
    }

    #[test]
    fn easy_axis_is_fixed_without_current() {
        let m = Macrospin::new(0.01, 20.0, 0.0, 0.0).unwrap();
        assert_eq!(m.drift_cartesian(&Vec3::z()).unwrap(), Vec3::zeros());
        assert_eq!(m.energy_and_rate(&Vec3::z()).unwrap(), (-1.0, 0.0));
    }

    #[test]
    fn hard_axis_is_fixed() {
        let m = Macrospin::new(0.01, 20.0, 0.0, 0.0).unwrap();
        assert_eq!(m.drift_cartesian(&Vec3::x()).unwrap().norm(), 0.0);
    }

    #[test]
    fn rejects_non_unit() {
        let m = Macrospin::new(0.01, 2.0, -0.5, 0.0).unwrap();
        assert!(m.drift_cartesian(&Vec3::new(1.0, 1.0, 0.0)).is_err());
        assert!(Macrospin::new(0.0, 1.0, 0.0, 0.0).is_err());
        assert!(Macrospin::new(0.1, 1.0, 0.0, FRAC_PI_2).is_err());
    }

    #[test]
    fn uniaxial_spherical_drift() {
        let m = Macrospin::new(0.01, 0.0, -0.3, 0.0).unwrap();
        let t = std::f64::consts::FRAC_PI_3;
        let f = m.drift_spherical(t, 0.7).unwrap();
        assert_abs_diff_eq!(f[0], -0.1 * 3f64.sqrt() * 0.01, epsilon = 1e-15);
        assert_abs_diff_eq!(f[1], -t.cos(), epsilon = 1e-15);
        assert_abs_diff_eq!(m.drift_spherical(FRAC_PI_2, 0.0).unwrap()[1], 0.0, epsilon = 1e-15);
        for k in 1..20 {
            let th = 0.15 * k as f64;
            let f = m.drift_spherical(th, -1.3).unwrap();
            assert_abs_diff_eq!(f[0], -0.01 * (-0.3 + th.cos()) * th.sin(), epsilon = 1e-15);
            assert_abs_diff_eq!(f[1], -th.cos(), epsilon = 1e-15);
        }
    }

    #[test]
    fn pole_is_refused() {
        let m = Macrospin::new(0.01, 0.0, -0.3, 0.0).unwrap();
        assert!(matches!(m.drift_spherical(1e-6, 0.0), Err(Error::PoleChart { .. })));
    }

    #[test]
    fn critical_currents() {
        assert_eq!(critical_current(0.0, 0.0).unwrap(), 1.0);
        assert_abs_diff_eq!(critical_current(20.0, 0.0).unwrap(), 2.0 / std::f64::consts::PI * 420f64.sqrt());
        assert_abs_diff_eq!(critical_current(20.0, 0.0).unwrap(), 13.045, epsilon = 2e-3);
        for d in [0.0, 1.0, 5.0, 8.0, 20.0] {
            let w = 0.3;
            assert_abs_diff_eq!(
                critical_current(d, w).unwrap(),
                critical_current(d, 0.0).unwrap() / w.cos(),
                epsilon = 1e-14
            );
        }
        assert!(critical_current(1.0, FRAC_PI_2).is_err());
        assert!(critical_current(-1.0, 0.0).is_err());
    }

    #[test]
    fn region_labels() {
        assert_eq!(classify_region(&Vec3::z(), 2.0, 1e-12).unwrap(), Region::NegEnergyUp);
        assert_eq!(classify_region(&-Vec3::z(), 2.0, 1e-12).unwrap(), Region::NegEnergyDown);
        assert_eq!(classify_region(&Vec3::x(), 2.0, 1e-12).unwrap(), Region::PosEnergyXPlus);
        assert_eq!(classify_region(&-Vec3::x(), 2.0, 1e-12).unwrap(), Region::PosEnergyXMinus);
        let d: f64 = 3.0;
        let mz: f64 = 0.5;
        let mx = mz / d.sqrt();
        let m = Vec3::new(mx, (1.0 - mx * mx - mz * mz).sqrt(), mz);
        assert_eq!(classify_region(&m, d, 1e-12).unwrap(), Region::Separatrix);
    }

    #[test]
    fn separatrix_plane_tilt() {
        let d: f64 = 20.0;
        // eps = 0 contains y and the direction (1, 0, sqrt D)
        let dir = Vec3::new(1.0, 0.0, d.sqrt()).normalize();
        let m = Macrospin::new(0.01, d, 0.0, 0.0).unwrap();
        for k in 0..16 {
            let a = k as f64 * 0.4;
            let p = a.cos() * Vec3::y() + a.sin() * dir;
            assert_abs_diff_eq!(m.energy(&p), 0.0, epsilon = 1e-14);
        }
        let tilt = dir.dot(&Vec3::x()).asin();
        assert_abs_diff_eq!(tilt, critical_tilt_angle(d), epsilon = 1e-14);
    }

    #[test]
    fn invariants_on_random_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let m = Macrospin::new(0.02, 20.0, -0.5, 0.1).unwrap();
        for _ in 0..500 {
            let p = random_unit(&mut rng);
            let a = m.drift(&p);
            assert!(a.dot(&p).abs() <= 1e-12);
            // rate formula equals grad(eps) . A
            let (_, rate) = m.energy_and_rate(&p).unwrap();
            assert_abs_diff_eq!(rate, m.energy_gradient(&p).dot(&a), epsilon = 1e-12);
        }
    }

    #[test]
    fn rate_matches_flow_finite_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = Macrospin::new(0.01, 20.0, -0.5, 0.0).unwrap();
        let h = 1e-4;
        let flow = |p: Vec3, dt: f64| {
            // RK4 then renormalise
            let k1 = m.drift(&p);
            let k2 = m.drift(&(p + 0.5 * dt * k1));
            let k3 = m.drift(&(p + 0.5 * dt * k2));
            let k4 = m.drift(&(p + dt * k3));
            (p + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)).normalize()
        };
        for _ in 0..50 {
            let p = random_unit(&mut rng);
            let (_, rate) = m.energy_and_rate(&p).unwrap();
            let fd = (m.energy(&flow(p, h)) - m.energy(&flow(p, -h))) / (2.0 * h);
            assert!((fd - rate).abs() <= 1e-5 * rate.abs().max(1e-8), "{fd} vs {rate}");
        }
    }

    #[test]
    fn no_current_dissipates() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = Macrospin::new(0.05, 4.0, 0.0, 0.0).unwrap();
        for _ in 0..500 {
            assert!(m.energy_and_rate(&random_unit(&mut rng)).unwrap().1 <= 0.0);
        }
    }

    #[test]
    fn directional_derivative_matches_finite_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = Macrospin::new(0.3, 7.0, -1.2, 0.2).unwrap();
        for _ in 0..20 {
            let p = random_unit(&mut rng);
            let v = random_unit(&mut rng);
            let h = 1e-6;
            let fd = (m.drift(&(p + h * v)) - m.drift(&(p - h * v))) / (2.0 * h);
            assert_abs_diff_eq!((fd - m.drift_derivative(&p, &v)).norm(), 0.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn charts_agree_with_cartesian_pushforward() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let m = Macrospin::new(0.01, 20.0, -0.5, 0.05).unwrap();
        for axis in PolarAxis::ALL {
            let chart = m.chart(axis);
            for _ in 0..200 {
                let p = random_unit(&mut rng);
                let x = chart.locate(&p);
                if x[0].sin() < 0.05 {
                    continue;
                }
                assert_abs_diff_eq!((chart.embed(&x) - p).norm(), 0.0, epsilon = 1e-12);
                let v = chart.embed_velocity(&x, &chart.drift(&x));
                assert!((v - m.drift(&p)).norm() <= 1e-10);
            }
        }
    }

    #[test]
    fn chart_jacobian_matches_finite_difference() {
        let m = Macrospin::new(0.05, 20.0, -0.8, 0.1).unwrap();
        for axis in PolarAxis::ALL {
            let chart = m.chart(axis);
            for x in [Vec2::new(0.7, 0.3), Vec2::new(2.1, -2.5), Vec2::new(1.5, 1.0)] {
                let fd = central_difference_jacobian(|y| chart.drift(y), &x);
                assert_abs_diff_eq!((fd - chart.jacobian(&x)).norm(), 0.0, epsilon = 1e-7);
            }
        }
    }

    #[test]
    fn momentum_transfer_round_trip() {
        let m = Macrospin::new(0.01, 2.0, -0.5, 0.0).unwrap();
        let x = Vec2::new(1.1, 0.4);
        let p = Vec2::new(0.3, -0.2);
        let za = m.chart(PolarAxis::Z);
        let big = za.embed_momentum(&x, &p);
        assert!(big.dot(&za.embed(&x)).abs() < 1e-15);
        for axis in PolarAxis::ALL {
            let c = m.chart(axis);
            let y = c.locate(&za.embed(&x));
            let q = c.chart_momentum(&y, &big);
            assert_abs_diff_eq!((c.embed_momentum(&y, &q) - big).norm(), 0.0, epsilon = 1e-14);
            // the Hamiltonian is chart independent
            let h1 = crate::fw::hamiltonian(&za, &x, &p).unwrap();
            let h2 = crate::fw::hamiltonian(&c, &y, &q).unwrap();
            assert_abs_diff_eq!(h1, h2, epsilon = 1e-14);
        }
    }

    #[test]
    fn tilted_stable_point() {
        let m = Macrospin::from_ratios(0.01, 20.0, -0.8, 0.25).unwrap();
        let s = m.stable_point().unwrap();
        assert!(m.drift(&s).norm() < 1e-12);
        assert!(s[2] > 0.99);
        let aligned = Macrospin::new(0.01, 20.0, -5.0, 0.0).unwrap();
        assert_abs_diff_eq!((aligned.stable_point().unwrap() - Vec3::z()).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn norm_decomposition_is_second_order_in_damping() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let points: Vec<Vec3> = (0..200).map(|_| random_unit(&mut rng)).collect();
        let worst = |alpha: f64| {
            let m = Macrospin::new(alpha, 20.0, -3.0, 0.1).unwrap();
            points
                .iter()
                .map(|p| {
                    let h = m.field(p);
                    let mh = p.cross(&h);
                    let approx = mh.norm_squared() + 2.0 * alpha * m.current * m.polarizer().dot(&mh);
                    (m.drift(p).norm_squared() - approx).abs()
                })
                .fold(0.0, f64::max)
        };
        let (e2, e3) = (worst(1e-2), worst(1e-3));
        let c = e2 / 1e-4;
        assert!(e3 <= 1.01 * c * 1e-6, "{e2} {e3}");
        assert!((e2 / e3 - 100.0).abs() < 1.0);
    }
}
