//! Energy-resolved bounds on the macrospin drift norm.
//!
//! On a contour of constant negative energy the precessional part of the norm
//! is bounded below and the spin-torque part is bounded above (with the current
//! set to its critical value). Where the lower bound wins, the nongradient term
//! cannot reshape the extrema of the norm.
//!
//! The bounds are written for the field `h_eff = -grad(eps)`, twice the reduced
//! field used by [`Macrospin`](crate::Macrospin).

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::models::{critical_current, CRITICAL_ANISOTROPY};

/// `alpha tan(omega)` at or above which the tilt counts as large.
pub const LARGE_TILT_THRESHOLD: f64 = 1.0;

const Q_SCAN_POINTS: usize = 1000;
const Q_TOL: f64 = 1e-10;

fn check_energy(epsilon: f64, closed_at_pole: bool) -> Result<()> {
    ensure_finite(&[epsilon], "energy")?;
    let ok = if closed_at_pole { (-1.0..0.0).contains(&epsilon) } else { epsilon > -1.0 && epsilon < 0.0 };
    if ok {
        Ok(())
    } else {
        Err(Error::Domain(format!("energy {epsilon} is outside the negative-energy range")))
    }
}

fn check_anisotropy(anisotropy: f64) -> Result<()> {
    ensure_finite(&[anisotropy], "anisotropy")?;
    if anisotropy < 0.0 {
        return Err(Error::Domain(format!("anisotropy must be non-negative, got {anisotropy}")));
    }
    Ok(())
}

/// Minimum of `|m x h_eff|^2` on the contour `eps(m) = epsilon`: `4|eps|(1 - |eps|)`.
pub fn precessional_min(epsilon: f64, anisotropy: f64) -> Result<f64> {
    check_energy(epsilon, true)?;
    check_anisotropy(anisotropy)?;
    let e = epsilon.abs();
    Ok(4.0 * e * (1.0 - e))
}

/// Range of `m_z` swept by the contour `eps(m) = epsilon` in the upper hemisphere.
pub fn contour_mz_range(epsilon: f64, anisotropy: f64) -> Result<(f64, f64)> {
    check_energy(epsilon, false)?;
    check_anisotropy(anisotropy)?;
    let e = epsilon.abs();
    let lo = e.sqrt();
    let hi = ((anisotropy + e) / (anisotropy + 1.0)).sqrt();
    if !(lo <= hi) {
        return Err(Error::EmptyRange(format!("m_z range [{lo}, {hi}]")));
    }
    Ok((lo, hi))
}

fn q_integrand(mz: f64, e: f64, d: f64, tan_omega: f64) -> f64 {
    let outer = (1.0 - (d + 1.0) * mz * mz / (d + e)).max(0.0).sqrt();
    let inner = (mz * mz / e - 1.0).max(0.0).sqrt() + tan_omega / d.sqrt() * mz / e.sqrt();
    outer * inner
}

/// `Q(omega)`: maximum over the contour's `m_z` range of
/// `sqrt(1 - (D+1) m_z^2/(D+|eps|)) [sqrt(m_z^2/|eps| - 1) + tan(omega) m_z / sqrt(D |eps|)]`.
pub fn q_omega(epsilon: f64, anisotropy: f64, omega: f64) -> Result<f64> {
    let (lo, hi) = contour_mz_range(epsilon, anisotropy)?;
    if anisotropy == 0.0 {
        return Err(Error::Domain("Q(omega) needs a positive anisotropy".into()));
    }
    ensure_finite(&[omega], "tilt")?;
    let (e, d, t) = (epsilon.abs(), anisotropy, omega.tan());
    let q = |mz: f64| q_integrand(mz, e, d, t);
    let step = (hi - lo) / Q_SCAN_POINTS as f64;
    let best = (0..=Q_SCAN_POINTS)
        .max_by(|&a, &b| q(lo + a as f64 * step).total_cmp(&q(lo + b as f64 * step)))
        .unwrap_or(0);
    let mut a = (lo + (best as f64 - 1.0) * step).max(lo);
    let mut b = (lo + (best as f64 + 1.0) * step).min(hi);
    let inv_phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - inv_phi * (b - a);
    let mut g = a + inv_phi * (b - a);
    while b - a > Q_TOL {
        if q(c) >= q(g) {
            b = g;
            g = c;
            c = b - inv_phi * (b - a);
        } else {
            a = c;
            c = g;
            g = a + inv_phi * (b - a);
        }
    }
    Ok(q(0.5 * (a + b)).max(q(lo + best as f64 * step)))
}

/// Maximum of `2 alpha I_C n . (m x h_eff)` on the contour `eps(m) = epsilon`,
/// with the polariser tilted by `omega` in the x-z plane.
pub fn nongradient_max(epsilon: f64, anisotropy: f64, omega: f64, alpha: f64) -> Result<f64> {
    check_energy(epsilon, false)?;
    check_anisotropy(anisotropy)?;
    ensure_finite(&[omega, alpha], "bound parameter")?;
    let (e, d) = (epsilon.abs(), anisotropy);
    if d == 0.0 {
        return Ok(4.0 * alpha * (e * (1.0 - e)).sqrt() * omega.tan());
    }
    let q = q_omega(epsilon, anisotropy, omega)?;
    if d > CRITICAL_ANISOTROPY {
        Ok(8.0 * alpha / std::f64::consts::PI * (d * (d + 1.0) * (d + e) * e).sqrt() * q)
    } else {
        Ok(2.0 * alpha * (d + 2.0) * ((d + e) * e).sqrt() * q)
    }
}

/// `n . (m x h_eff)` scaled by `2 alpha I_C`, evaluated at a point. Companion of
/// [`nongradient_max`] for sampling.
pub fn nongradient_term(m: &[f64; 3], anisotropy: f64, omega: f64, alpha: f64) -> Result<f64> {
    let ic = critical_current(anisotropy, omega)?;
    let h = [-2.0 * anisotropy * m[0], 0.0, 2.0 * m[2]];
    let mxh = [m[1] * h[2] - m[2] * h[1], m[2] * h[0] - m[0] * h[2], m[0] * h[1] - m[1] * h[0]];
    Ok(2.0 * alpha * ic * (omega.sin() * mxh[0] + omega.cos() * mxh[2]))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    SmallTilt,
    LargeTilt,
}

impl Regime {
    pub fn label(&self) -> &'static str {
        match self {
            Regime::SmallTilt => "small_tilt",
            Regime::LargeTilt => "large_tilt",
        }
    }
}

/// Energies `|eps|` in which the precessional term is expected to dominate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityBand {
    pub regime: Regime,
    /// Disjoint open intervals of `|eps|`, ascending.
    pub intervals: Vec<(f64, f64)>,
    pub caution: Option<String>,
}

impl AdmissibilityBand {
    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn contains(&self, abs_epsilon: f64) -> bool {
        self.intervals.iter().any(|&(a, b)| a < abs_epsilon && abs_epsilon < b)
    }

    /// Smallest interval covering the band.
    pub fn hull(&self) -> Option<(f64, f64)> {
        Some((self.intervals.first()?.0, self.intervals.last()?.1))
    }

    /// Parts of `(0, 1)` outside the band, near the separatrix and near the pole.
    pub fn excluded(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        let mut start = 0.0;
        for &(a, b) in &self.intervals {
            if a > start {
                out.push((start, a));
            }
            start = b;
        }
        if start < 1.0 {
            out.push((start, 1.0));
        }
        out
    }
}

fn clip(a: f64, b: f64, lo: f64, hi: f64) -> Option<(f64, f64)> {
    let (a, b) = (a.max(lo), b.min(hi));
    (a < b).then_some((a, b))
}

/// Band of `|eps|` where the precessional lower bound dominates the torque upper bound.
pub fn admissibility_band(anisotropy: f64, omega: f64, alpha: f64) -> Result<AdmissibilityBand> {
    check_anisotropy(anisotropy)?;
    ensure_finite(&[omega, alpha], "band parameter")?;
    let t = omega.tan().abs();
    let d = anisotropy;
    if alpha * t >= LARGE_TILT_THRESHOLD {
        return Ok(AdmissibilityBand {
            regime: Regime::LargeTilt,
            intervals: Vec::new(),
            caution: Some("large tilt: the nongradient term may dominate everywhere; analyse the norm extrema directly".into()),
        });
    }
    let weak = (alpha * t).powi(2);
    let strong = d * alpha * t;
    let mut intervals: Vec<(f64, f64)> = if d == 0.0 {
        clip(weak, 1.0 - weak, 0.0, 1.0).into_iter().collect()
    } else if d > CRITICAL_ANISOTROPY {
        clip(strong, 1.0 - strong, 0.0, 1.0).into_iter().collect()
    } else {
        [clip(strong, 1.0 - strong, 0.0, d.min(1.0)), clip(weak, 1.0 - weak, d, 1.0)]
            .into_iter()
            .flatten()
            .collect()
    };
    let mut merged: Vec<(f64, f64)> = Vec::new();
    intervals.sort_by(|a, b| a.0.total_cmp(&b.0));
    for (a, b) in intervals {
        match merged.last_mut() {
            Some(last) if a <= last.1 => last.1 = last.1.max(b),
            _ => merged.push((a, b)),
        }
    }
    Ok(AdmissibilityBand { regime: Regime::SmallTilt, intervals: merged, caution: None })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::critical_tilt_angle;
    use approx::assert_abs_diff_eq;

    const SAMPLES: usize = 100_000;

    /// Points of the contour `D m_x^2 - m_z^2 = eps` with `m_z > 0`.
    fn contour(epsilon: f64, d: f64) -> Vec<[f64; 3]> {
        let e = epsilon.abs();
        let mut out = Vec::with_capacity(2 * SAMPLES);
        if d == 0.0 {
            let r = (1.0 - e).sqrt();
            for k in 0..2 * SAMPLES {
                let psi = std::f64::consts::TAU * k as f64 / (2 * SAMPLES) as f64;
                out.push([r * psi.cos(), r * psi.sin(), e.sqrt()]);
            }
            return out;
        }
        let smax = (1.0 - e).sqrt();
        for k in 0..SAMPLES {
            let s = -smax + 2.0 * smax * k as f64 / (SAMPLES - 1) as f64;
            let mx = ((1.0 - s * s - e) / (d + 1.0)).max(0.0).sqrt();
            let mz = (1.0 - s * s - mx * mx).max(0.0).sqrt();
            out.push([mx, s, mz]);
            out.push([-mx, s, mz]);
        }
        out
    }

    fn brute_precessional_min(epsilon: f64, d: f64) -> f64 {
        contour(epsilon, d)
            .iter()
            .map(|m| {
                let h = [-2.0 * d * m[0], 0.0, 2.0 * m[2]];
                let c = [m[1] * h[2], m[2] * h[0] - m[0] * h[2], -m[1] * h[0]];
                c.iter().map(|v| v * v).sum::<f64>()
            })
            .fold(f64::INFINITY, f64::min)
    }

    fn brute_nongradient_max(epsilon: f64, d: f64, omega: f64, alpha: f64) -> f64 {
        contour(epsilon, d)
            .iter()
            .map(|m| nongradient_term(m, d, omega, alpha).unwrap())
            .fold(f64::NEG_INFINITY, f64::max)
    }

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * a.abs().max(b.abs()) || (a - b).abs() <= 1e-14
    }

    #[test]
    fn contour_points_have_the_energy() {
        for (eps, d) in [(-0.3, 20.0), (-0.7, 2.0), (-0.4, 0.0)] {
            for m in contour(eps, d).iter().step_by(997) {
                assert_abs_diff_eq!(m.iter().map(|v| v * v).sum::<f64>(), 1.0, epsilon = 1e-12);
                assert_abs_diff_eq!(d * m[0] * m[0] - m[2] * m[2], eps, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn precessional_examples() {
        assert_eq!(precessional_min(-1.0, 3.0).unwrap(), 0.0);
        assert_abs_diff_eq!(precessional_min(-0.5, 3.0).unwrap(), 1.0, epsilon = 1e-15);
        assert!(precessional_min(0.0, 1.0).is_err());
        assert!(precessional_min(-1.5, 1.0).is_err());
        let brute = brute_precessional_min(-0.3, 20.0);
        assert!(close(precessional_min(-0.3, 20.0).unwrap(), brute, 1e-4), "{brute}");
    }

    #[test]
    fn nongradient_examples() {
        assert_eq!(nongradient_max(-0.4, 0.0, 0.0, 0.01).unwrap(), 0.0);
        let brute = brute_nongradient_max(-0.3, 20.0, 0.0, 0.01);
        let bound = nongradient_max(-0.3, 20.0, 0.0, 0.01).unwrap();
        assert!(close(bound, brute, 1e-3), "{bound} {brute}");
    }

    #[test]
    fn q_at_zero_tilt_is_the_bare_maximum() {
        let (eps, d) = (-0.3f64, 20.0);
        let (lo, hi) = contour_mz_range(eps, d).unwrap();
        let e = eps.abs();
        let brute = (0..=SAMPLES)
            .map(|k| lo + (hi - lo) * k as f64 / SAMPLES as f64)
            .map(|mz| (1.0 - (d + 1.0) * mz * mz / (d + e)).sqrt() * (mz * mz / e - 1.0).sqrt())
            .fold(f64::NEG_INFINITY, f64::max);
        assert_abs_diff_eq!(q_omega(eps, d, 0.0).unwrap(), brute, epsilon = 1e-8);
    }

    #[test]
    fn q_grows_with_tilt() {
        let mut prev = 0.0;
        for w in [0.0, 0.05, 0.1, 0.2] {
            let q = q_omega(-0.2, 3.0, w).unwrap();
            assert!(q > prev);
            prev = q;
        }
    }

    #[test]
    fn bounds_match_sampled_contours() {
        for d in [0.0, 1.0, 4.0, 20.0] {
            for eps in [-0.1, -0.5, -0.85] {
                for ratio in [0.0, 0.25] {
                    let omega = ratio * critical_tilt_angle(d);
                    let bound = nongradient_max(eps, d, omega, 0.01).unwrap();
                    let brute = brute_nongradient_max(eps, d, omega, 0.01);
                    assert!(close(bound, brute, 1e-3), "D={d} eps={eps} w={omega}: {bound} vs {brute}");
                    let pmin = precessional_min(eps, d).unwrap();
                    assert!(close(pmin, brute_precessional_min(eps, d), 1e-3));
                }
            }
        }
    }

    #[test]
    fn band_examples() {
        let band = admissibility_band(0.0, 0.0, 0.01).unwrap();
        assert_eq!(band.intervals, vec![(0.0, 1.0)]);
        assert!(band.excluded().is_empty());

        let band = admissibility_band(0.0, 10f64.atan(), 0.01).unwrap();
        assert_eq!(band.regime, Regime::SmallTilt);
        let (a, b) = band.hull().unwrap();
        assert_abs_diff_eq!(a, 0.01, epsilon = 1e-12);
        assert_abs_diff_eq!(b, 0.99, epsilon = 1e-12);

        let band = admissibility_band(3.0, 1000f64.atan(), 0.01).unwrap();
        assert!(band.is_empty());
        assert_eq!(band.regime, Regime::LargeTilt);
        assert!(band.caution.is_some());
        assert_eq!(band.excluded(), vec![(0.0, 1.0)]);
    }

    #[test]
    fn band_for_strong_anisotropy() {
        let band = admissibility_band(20.0, 0.01f64.atan(), 0.01).unwrap();
        let (a, b) = band.hull().unwrap();
        assert_abs_diff_eq!(a, 20.0 * 1e-4, epsilon = 1e-15);
        assert_abs_diff_eq!(b, 1.0 - 20.0 * 1e-4, epsilon = 1e-15);
    }

    #[test]
    fn band_for_weak_anisotropy_joins_both_rules() {
        let (d, alpha, t) = (0.3, 0.01, 2.0f64);
        let band = admissibility_band(d, t.atan(), alpha).unwrap();
        // below |eps| = D the strong rule applies, above it the weak one
        assert!(!band.contains(0.5 * d * alpha * t));
        assert!(band.contains(1.5 * d * alpha * t));
        assert!(band.contains(0.9));
        assert!(!band.contains(1.0 - 0.5 * (alpha * t).powi(2)));
        assert_eq!(band.intervals.len(), 1);
        assert_abs_diff_eq!(band.intervals[0].0, d * alpha * t, epsilon = 1e-15);
        assert_abs_diff_eq!(band.intervals[0].1, 1.0 - (alpha * t).powi(2), epsilon = 1e-15);
    }
}
