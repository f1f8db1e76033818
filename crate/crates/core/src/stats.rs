//! Goodness-of-fit and modality tests for simulated samples.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const KDE_GRID: usize = 512;

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample standard deviation (`n - 1` denominator).
pub fn std_dev(x: &[f64]) -> f64 {
    let m = mean(x);
    (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() as f64 - 1.0)).sqrt()
}

/// One-sample Kolmogorov-Smirnov statistic `sup |F_n - F|`.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    let mut x = samples.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    x.iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = cdf(v);
            (f - i as f64 / n).max((i as f64 + 1.0) / n - f)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic p-value of the KS statistic `d` for `n` samples, with Stephens'
/// small-sample correction.
pub fn ks_p_value(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Number of local maxima of the Gaussian kernel density estimate.
pub fn count_modes(samples: &[f64], bandwidth: f64) -> usize {
    let lo = samples.iter().copied().fold(f64::INFINITY, f64::min) - 3.0 * bandwidth;
    let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 3.0 * bandwidth;
    let step = (hi - lo) / (KDE_GRID - 1) as f64;
    let inv = 1.0 / (2.0 * bandwidth * bandwidth);
    let density: Vec<f64> = (0..KDE_GRID)
        .map(|k| {
            let g = lo + k as f64 * step;
            samples.iter().map(|v| (-(g - v).powi(2) * inv).exp()).sum()
        })
        .collect();
    density.windows(3).filter(|w| w[1] > w[0] && w[1] >= w[2]).count()
}

/// Smallest Gaussian bandwidth at which the density estimate is unimodal.
pub fn critical_bandwidth(samples: &[f64]) -> Result<f64> {
    if samples.len() < 3 {
        return Err(Error::TooFewPoints { needed: 3, got: samples.len() });
    }
    let spread = std_dev(samples);
    if !(spread > 0.0) {
        return Err(Error::Domain("samples have no spread".into()));
    }
    let mut hi = 2.0 * spread;
    while count_modes(samples, hi) > 1 {
        hi *= 2.0;
    }
    let mut lo = 1e-4 * spread;
    if count_modes(samples, lo) <= 1 {
        return Ok(lo);
    }
    while hi - lo > 1e-4 * spread {
        let mid = 0.5 * (lo + hi);
        if count_modes(samples, mid) > 1 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModalityTest {
    pub samples: usize,
    pub critical_bandwidth: f64,
    /// Probability under the unimodal null of needing a bandwidth at least this large.
    pub p_value: f64,
    pub bootstrap: usize,
}

impl ModalityTest {
    pub fn multimodal_at(&self, confidence: f64) -> bool {
        self.p_value < 1.0 - confidence
    }
}

/// Silverman's test of unimodality with a smoothed, variance-corrected bootstrap.
pub fn silverman_test(samples: &[f64], bootstrap: usize, seed: u64) -> Result<ModalityTest> {
    if bootstrap == 0 {
        return Err(Error::Config("bootstrap count must be at least 1".into()));
    }
    let h = critical_bandwidth(samples)?;
    let m = mean(samples);
    let var = std_dev(samples).powi(2);
    let shrink = 1.0 / (1.0 + h * h / var).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = samples.len();
    let mut exceed = 0;
    let mut resample = vec![0.0; n];
    for _ in 0..bootstrap {
        for r in resample.iter_mut() {
            let y = samples[rng.random_range(0..n)];
            let z: f64 = rng.sample(StandardNormal);
            *r = m + (y - m + h * z) * shrink;
        }
        if count_modes(&resample, h) > 1 {
            exceed += 1;
        }
    }
    Ok(ModalityTest { samples: n, critical_bandwidth: h, p_value: exceed as f64 / bootstrap as f64, bootstrap })
}
