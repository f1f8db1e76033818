use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fw::Vec2;
use crate::models::Vec3;

use super::linearize::{eigenvector_fan, gamma_fan, instanton_seed, linearize_fixed_point, Linearization, Seed};
use super::shoot::shoot;
use super::space::PhaseSpace;
use super::{SeedMode, ShootingConfig, StopReason, Trajectory};

/// Escape from a stable fixed point, optionally toward a target point (a saddle).
#[derive(Clone, Copy)]
pub struct EscapeProblem<'a> {
    pub space: &'a dyn PhaseSpace,
    pub chart: usize,
    pub stable: Vec2,
    pub target: Option<Vec3>,
}

impl<'a> EscapeProblem<'a> {
    pub fn new(space: &'a dyn PhaseSpace, chart: usize, stable: Vec2) -> Self {
        Self { space, chart, stable, target: None }
    }

    pub fn with_target(mut self, target: Vec3) -> Self {
        self.target = Some(target);
        self
    }
}

/// Result of shooting one fan of seeds.
#[derive(Debug, Clone)]
pub struct Fan {
    pub linearization: Option<Linearization>,
    pub seed_mode: SeedMode,
    /// Set when eigenvector seeding was requested but the linearisation was defective.
    pub fallback_reason: Option<String>,
    /// Accepted trajectories in seed order.
    pub trajectories: Vec<Trajectory>,
    pub rejected: Vec<(usize, String)>,
}

impl Fan {
    /// Least-action trajectory among those that stopped for `reason`.
    pub fn least_action(&self, reason: StopReason) -> Option<&Trajectory> {
        self.trajectories
            .iter()
            .filter(|t| t.stop == reason)
            .min_by(|a, b| a.action().total_cmp(&b.action()))
    }
}

fn make_seeds(problem: &EscapeProblem, config: &ShootingConfig) -> Result<(Option<Linearization>, SeedMode, Option<String>, Vec<Seed>)> {
    let model = problem.space.chart(problem.chart);
    let mirror = problem.space.mirror_symmetric();
    let n = config.fan_size;
    let delta = config.seed_radius;
    match config.seed_mode {
        SeedMode::EigenvectorFan => {
            let attempt = linearize_fixed_point(model, &problem.stable)
                .and_then(|lin| eigenvector_fan(model, &lin, n, delta, problem.chart, mirror).map(|s| (lin, s)));
            match attempt {
                Ok((lin, seeds)) => Ok((Some(lin), SeedMode::EigenvectorFan, None, seeds)),
                Err(e @ Error::DefectiveLinearization(_)) => {
                    let seeds = gamma_fan(model, &problem.stable, n, delta, config.gamma_skip, problem.chart)?;
                    Ok((None, SeedMode::GammaFan, Some(e.to_string()), seeds))
                }
                Err(e) => Err(e),
            }
        }
        SeedMode::GammaFan => {
            let lin = linearize_fixed_point(model, &problem.stable)?;
            let seeds = gamma_fan(model, &problem.stable, n, delta, config.gamma_skip, problem.chart)?;
            Ok((Some(lin), SeedMode::GammaFan, None, seeds))
        }
    }
}

/// Shoots every fan seed concurrently; results are kept in seed order.
pub fn fan_shoot(problem: &EscapeProblem, config: &ShootingConfig) -> Result<Fan> {
    config.validate()?;
    let (linearization, seed_mode, fallback_reason, seeds) = make_seeds(problem, config)?;
    let results: Vec<(usize, Result<Trajectory>)> = seeds
        .par_iter()
        .map(|s| (s.index, shoot(problem.space, s, problem.target, config)))
        .collect();
    let mut trajectories = Vec::new();
    let mut rejected = Vec::new();
    for (index, r) in results {
        match r {
            Ok(t) => trajectories.push(t),
            Err(e) => rejected.push((index, e.to_string())),
        }
    }
    if trajectories.is_empty() {
        return Err(Error::AllSeedsRejected(
            rejected.iter().map(|(i, e)| format!("seed {i}: {e}")).collect(),
        ));
    }
    Ok(Fan { linearization, seed_mode, fallback_reason, trajectories, rejected })
}

/// One direction of the target search scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanSample {
    pub angle: f64,
    pub closest_approach: f64,
    pub stop: StopReason,
    pub action: f64,
}

#[derive(Debug, Clone)]
pub struct OptimalEscape {
    pub scan: Vec<ScanSample>,
    /// Every distinct trajectory that reached the target, sorted by fan angle.
    pub candidates: Vec<Trajectory>,
    pub optimal_index: usize,
}

impl OptimalEscape {
    pub fn optimal(&self) -> &Trajectory {
        &self.candidates[self.optimal_index]
    }
}

const GOLDEN: f64 = 0.618_033_988_749_894_9;
const MAX_REFINED_MINIMA: usize = 16;

/// Finds the least-action trajectory that reaches the target.
///
/// Seeds are scanned over `config.search_samples` fan angles; every local minimum
/// of the closest approach is refined by golden-section search on the angle until
/// the trajectory enters the capture radius. The reached trajectory with the
/// smallest action is reported as optimal.
pub fn optimal_escape(problem: &EscapeProblem, config: &ShootingConfig) -> Result<OptimalEscape> {
    config.validate()?;
    let target = problem
        .target
        .ok_or_else(|| Error::Config("optimal escape search needs a target point".into()))?;
    let model = problem.space.chart(problem.chart);
    let lin = linearize_fixed_point(model, &problem.stable)?;
    let q = lin.riccati()?;
    let n = config.search_samples;
    let scan_config = ShootingConfig { fan_size: n, ..config.clone() };
    let seeds = eigenvector_fan(model, &lin, n, config.seed_radius, problem.chart, problem.space.mirror_symmetric())?;

    let shots: Vec<Result<Trajectory>> = seeds
        .par_iter()
        .map(|s| shoot(problem.space, s, Some(target), &scan_config))
        .collect();
    let step = std::f64::consts::TAU / n as f64;
    let scan: Vec<ScanSample> = shots
        .iter()
        .zip(&seeds)
        .map(|(r, s)| match r {
            Ok(t) => ScanSample {
                angle: s.angle,
                closest_approach: t.closest_approach.unwrap_or(f64::INFINITY),
                stop: t.stop,
                action: t.action(),
            },
            Err(_) => ScanSample { angle: s.angle, closest_approach: f64::INFINITY, stop: StopReason::MaxSteps, action: f64::NAN },
        })
        .collect();

    let d = |k: usize| scan[k % n].closest_approach;
    let mut minima: Vec<usize> = (0..n)
        .filter(|&k| d(k).is_finite() && d(k) <= d(k + n - 1) && d(k) <= d(k + 1))
        .collect();
    minima.sort_by(|&a, &b| d(a).total_cmp(&d(b)));
    minima.truncate(MAX_REFINED_MINIMA);

    let shoot_angle = |angle: f64| -> Option<Trajectory> {
        let seed = instanton_seed(model, &problem.stable, &q, angle, config.seed_radius, 0, problem.chart).ok()?;
        shoot(problem.space, &seed, Some(target), config).ok()
    };

    let refined: Vec<Trajectory> = minima
        .par_iter()
        .filter_map(|&k| {
            if let Ok(t) = &shots[k] {
                if t.stop == StopReason::Reached {
                    return Some(t.clone());
                }
            }
            let center = seeds[k].angle;
            let (mut a, mut b) = (center - step, center + step);
            let measure = |tr: &Option<Trajectory>| tr.as_ref().and_then(|t| t.closest_approach).unwrap_or(f64::INFINITY);
            let mut c = b - GOLDEN * (b - a);
            let mut e = a + GOLDEN * (b - a);
            let mut tc = shoot_angle(c);
            let mut te = shoot_angle(e);
            for _ in 0..200 {
                for t in [&tc, &te].into_iter().flatten() {
                    if t.stop == StopReason::Reached {
                        return Some(t.clone());
                    }
                }
                if b - a < 1e-13 {
                    break;
                }
                if measure(&tc) <= measure(&te) {
                    b = e;
                    e = c;
                    te = tc;
                    c = b - GOLDEN * (b - a);
                    tc = shoot_angle(c);
                } else {
                    a = c;
                    c = e;
                    tc = te;
                    e = a + GOLDEN * (b - a);
                    te = shoot_angle(e);
                }
            }
            None
        })
        .collect();

    let mut candidates: Vec<Trajectory> = Vec::new();
    for t in refined {
        let angle = t.seed.angle.rem_euclid(std::f64::consts::TAU);
        let duplicate = candidates.iter().any(|c| {
            let diff = (c.seed.angle.rem_euclid(std::f64::consts::TAU) - angle).abs();
            diff.min(std::f64::consts::TAU - diff) < 1e-9
        });
        if !duplicate {
            candidates.push(t);
        }
    }
    if candidates.is_empty() {
        return Err(Error::Domain("no trajectory of the fan reached the target".into()));
    }
    candidates.sort_by(|a, b| {
        a.seed.angle.rem_euclid(std::f64::consts::TAU).total_cmp(&b.seed.angle.rem_euclid(std::f64::consts::TAU))
    });
    for (i, c) in candidates.iter_mut().enumerate() {
        c.seed.index = i;
    }
    let optimal_index = (0..candidates.len())
        .min_by(|&a, &b| candidates[a].action().total_cmp(&candidates[b].action()))
        .unwrap_or(0);
    Ok(OptimalEscape { scan, candidates, optimal_index })
}
