//! Closed-form instanton of the uniaxial (`D = 0`) macrospin.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::models::Macrospin;

use super::Trajectory;

/// Separatrix angle `arccos(-I)`.
fn separatrix_angle(current: f64) -> f64 {
    (-current).acos()
}

/// `phi(theta) = [log tan(theta/2) + I log(2 (I + cos theta) / sin theta)] / (alpha (1 - I^2))`
///
/// Diverges at the pole and at the separatrix, where an error is returned.
pub fn analytic_phi_of_theta(theta: f64, alpha: f64, current: f64) -> Result<f64> {
    ensure_finite(&[theta, alpha, current], "oracle argument")?;
    if !(current.abs() < 1.0) || !(alpha > 0.0) {
        return Err(Error::Domain(format!("oracle needs |I| < 1 and alpha > 0, got I = {current}, alpha = {alpha}")));
    }
    let sep = separatrix_angle(current);
    if !(theta > 0.0 && theta < sep) {
        return Err(Error::Domain(format!("phi(theta) diverges outside (0, {sep}); theta = {theta}")));
    }
    let log_tan = (0.5 * theta).tan().ln();
    let log_ratio = (2.0 * (current + theta.cos()) / theta.sin()).ln();
    Ok((log_tan + current * log_ratio) / (alpha * (1.0 - current * current)))
}

/// `S(theta) = 2 alpha [I (1 - cos theta) + sin^2(theta) / 2]`; equals
/// `alpha (1 + I)^2` at the separatrix.
pub fn analytic_uniaxial_action(theta: f64, alpha: f64, current: f64) -> Result<f64> {
    ensure_finite(&[theta, alpha, current], "oracle argument")?;
    if !(current.abs() <= 1.0) {
        return Err(Error::Domain(format!("oracle needs |I| <= 1, got {current}")));
    }
    let sep = separatrix_angle(current);
    if !(0.0..=sep).contains(&theta) {
        return Err(Error::Domain(format!("theta = {theta} outside [0, {sep}]")));
    }
    let s = theta.sin();
    Ok(2.0 * alpha * (current * (1.0 - theta.cos()) + 0.5 * s * s))
}

/// Deviation of a shot trajectory from the closed-form `phi(theta)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleDeviation {
    pub rms: f64,
    pub max_abs: f64,
    pub points: usize,
    /// Window actually used, `(theta_lo, theta_hi)`.
    pub window: (f64, f64),
    /// Lower edge was raised to where `theta` increases monotonically.
    pub restricted: bool,
    /// Residuals were averaged over one precession turn.
    pub averaged: bool,
    /// Fitted constant offset (the closed form fixes `phi` only up to a constant).
    pub offset: f64,
    /// Current used in the closed form.
    pub current: f64,
}

/// Compares the unwrapped azimuth of a `D = 0` trajectory with the closed form.
///
/// Trajectories precess with `phi_dot = -cos(theta)` while `theta` grows, so the
/// azimuth decreases along the path; it is compared against `-phi(theta)` plus a
/// fitted constant. The window defaults to `[0.1, theta* - 0.05]`.
///
/// Without `effective` the lower edge is raised to the point after which `theta`
/// grows monotonically. With `effective` the drive is replaced by its projection
/// `I cos(omega)` on the easy axis and the residual is averaged over one
/// precession turn.
pub fn compare_to_oracle(
    trajectory: &Trajectory,
    model: &Macrospin,
    effective: bool,
    window: Option<(f64, f64)>,
) -> Result<OracleDeviation> {
    if model.anisotropy != 0.0 {
        return Err(Error::Domain("the closed-form oracle holds only without anisotropy".into()));
    }
    let current = if effective { model.effective_current() } else { model.current };
    let sep = separatrix_angle(current);
    let (lo, hi) = window.unwrap_or((0.1, sep - 0.05));
    if !(lo < hi) {
        return Err(Error::EmptyRange(format!("oracle window [{lo}, {hi}]")));
    }

    // polar angle and unwrapped azimuth about +z
    let mut samples = Vec::with_capacity(trajectory.points.len());
    let mut prev_raw: Option<f64> = None;
    let mut unwrapped = 0.0;
    for p in &trajectory.points {
        let m = p.position;
        let theta = m[2].clamp(-1.0, 1.0).acos();
        let raw = m[1].atan2(m[0]);
        unwrapped += match prev_raw {
            None => raw,
            Some(q) => {
                let d = raw - q;
                d - std::f64::consts::TAU * (d / std::f64::consts::TAU).round()
            }
        };
        prev_raw = Some(raw);
        samples.push((theta, unwrapped));
    }

    let residual = |theta: f64, phi: f64| analytic_phi_of_theta(theta, model.alpha, current).map(|v| phi + v);
    let inside = |theta: f64| theta >= lo && theta <= hi;

    let (used, restricted, averaged): (Vec<(f64, f64)>, bool, bool) = if effective {
        // The tilt leaves the fixed point slightly off the pole, so theta wobbles once
        // per precession turn; residuals are averaged over one turn in phi along the
        // contiguous stretch where the closed form is defined, and the window is
        // applied to the averaged theta.
        let defined = |theta: f64| theta > 0.0 && theta < sep;
        let start = samples.iter().position(|s| defined(s.0)).unwrap_or(samples.len());
        let len = samples[start..].iter().position(|s| !defined(s.0)).unwrap_or(samples.len() - start);
        let raw: Vec<(f64, f64, f64)> = samples[start..start + len]
            .iter()
            .map(|&(theta, phi)| Ok((theta, phi, residual(theta, phi)?)))
            .collect::<Result<_>>()?;
        let used = turn_averaged(&raw).into_iter().filter(|u| inside(u.0)).collect();
        (used, false, true)
    } else {
        // last index where theta falls below its running maximum
        let mut running = f64::NEG_INFINITY;
        let mut last_drop = None;
        for (k, &(theta, _)) in samples.iter().enumerate() {
            if theta < running && inside(theta) {
                last_drop = Some(k);
            }
            running = running.max(theta);
        }
        let start = last_drop.map_or(0, |k| k + 1);
        let used = samples[start..]
            .iter()
            .filter(|(theta, _)| inside(*theta))
            .map(|&(theta, phi)| Ok((theta, residual(theta, phi)?)))
            .collect::<Result<_>>()?;
        (used, last_drop.is_some(), false)
    };
    if used.len() < 2 {
        return Err(Error::TooFewPoints { needed: 2, got: used.len() });
    }
    let lo_used = used.iter().map(|u| u.0).fold(f64::INFINITY, f64::min);
    let hi_used = used.iter().map(|u| u.0).fold(f64::NEG_INFINITY, f64::max);
    let offset = used.iter().map(|u| u.1).sum::<f64>() / used.len() as f64;
    let sq = used.iter().map(|u| (u.1 - offset).powi(2)).sum::<f64>() / used.len() as f64;
    let max_abs = used.iter().map(|u| (u.1 - offset).abs()).fold(0.0, f64::max);
    Ok(OracleDeviation {
        rms: sq.sqrt(),
        max_abs,
        points: used.len(),
        window: if restricted || averaged { (lo_used, hi_used) } else { (lo, hi) },
        restricted,
        averaged,
        offset,
        current,
    })
}

/// Averages `(theta, phi, residual)` samples over one precession turn centred on
/// each sample; samples whose turn is not fully covered are dropped.
fn turn_averaged(raw: &[(f64, f64, f64)]) -> Vec<(f64, f64)> {
    use std::f64::consts::PI;
    if raw.len() < 3 {
        return Vec::new();
    }
    // trapezoid weights in |d phi|, with prefix sums for O(n) window integrals
    let mut cum_w = vec![0.0; raw.len()];
    let mut cum_r = vec![0.0; raw.len()];
    let mut cum_t = vec![0.0; raw.len()];
    for k in 1..raw.len() {
        let dphi = (raw[k].1 - raw[k - 1].1).abs();
        cum_w[k] = cum_w[k - 1] + dphi;
        cum_r[k] = cum_r[k - 1] + 0.5 * dphi * (raw[k].2 + raw[k - 1].2);
        cum_t[k] = cum_t[k - 1] + 0.5 * dphi * (raw[k].0 + raw[k - 1].0);
    }
    let total = cum_w[raw.len() - 1];
    let mut out = Vec::new();
    let (mut a, mut b) = (0, 0);
    for k in 0..raw.len() {
        let (from, to) = (cum_w[k] - PI, cum_w[k] + PI);
        if from < 0.0 || to > total {
            continue;
        }
        while cum_w[a] < from {
            a += 1;
        }
        while b + 1 < raw.len() && cum_w[b + 1] <= to {
            b += 1;
        }
        if b <= a {
            continue;
        }
        let span = cum_w[b] - cum_w[a];
        out.push(((cum_t[b] - cum_t[a]) / span, (cum_r[b] - cum_r[a]) / span));
    }
    out
}
