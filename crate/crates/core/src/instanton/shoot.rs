use crate::error::{Error, Result};
use crate::fw::{flow_rhs_unchecked, Vec2};
use crate::integrate::{bisect_event, DenseStep, Dopri5};
use crate::models::Vec3;

use super::linearize::{relative_energy, Seed};
use super::space::PhaseSpace;
use super::{ShootingConfig, ShotDiagnostics, StopReason, Trajectory, TrajectoryPoint};

const EVENT_TIME_TOL: f64 = 1e-10;

fn split(y: &[f64; 4]) -> (Vec2, Vec2) {
    (Vec2::new(y[0], y[1]), Vec2::new(y[2], y[3]))
}

fn pack(x: &Vec2, p: &Vec2) -> [f64; 4] {
    [x[0], x[1], p[0], p[1]]
}

fn make_point(space: &dyn PhaseSpace, chart: usize, t: f64, s: f64, action: f64, y: &[f64; 4]) -> TrajectoryPoint {
    let (x, p) = split(y);
    let model = space.chart(chart);
    let metric = model.metric(&x);
    let raw = model.drift(&x);
    let f = metric.lower(&raw);
    let drift_norm_sq = metric.norm_sq(&f);
    let x_dot = metric.raise(&p) + raw;
    let speed_sq = metric.inv_norm_sq(&x_dot);
    let psi = if drift_norm_sq > 0.0 && speed_sq > 0.0 {
        (x_dot.dot(&f) / (speed_sq.sqrt() * drift_norm_sq.sqrt())).clamp(-1.0, 1.0).acos()
    } else {
        f64::NAN
    };
    let g = metric.scales();
    TrajectoryPoint {
        t,
        s,
        chart: chart as u8,
        x,
        p,
        position: space.embed(chart, &x),
        momentum: space.embed_momentum(chart, &x, &p),
        action,
        energy: 0.5 * metric.norm_sq(&p) + p.dot(&raw),
        drift_norm_sq,
        speed_sq,
        psi,
        gamma: (x_dot[1] / g[1]).atan2(x_dot[0] / g[0]),
    }
}

/// Running quantities at a sub-sample of the dense output.
#[derive(Clone, Copy)]
struct Sample {
    theta: f64,
    y: [f64; 4],
    position: Vec3,
    s: f64,
    action: f64,
}

struct Stops<'a> {
    space: &'a dyn PhaseSpace,
    target: Option<Vec3>,
    config: &'a ShootingConfig,
    separatrix_tol: f64,
    max_arc_length: f64,
}

impl Stops<'_> {
    /// Event functions, positive while integration continues.
    fn values(&self, chart: usize, y: &[f64; 4], position: &Vec3, s: f64) -> [(StopReason, f64); 5] {
        let (x, _) = split(y);
        let target = self
            .target
            .map_or(f64::INFINITY, |c| (position - c).norm() - self.config.target_tol);
        let fixed = self.space.chart(chart).drift_norm_sq(&x).sqrt() - self.config.fixed_point_tol;
        [
            (StopReason::Reached, target),
            (StopReason::Separatrix, self.space.basin_margin(position) - self.separatrix_tol),
            (StopReason::LeftDomain, self.space.domain_margin(position)),
            (StopReason::MaxArcLength, self.max_arc_length - s),
            (StopReason::FixedPoint, fixed),
        ]
    }

    fn first_triggered(&self, chart: usize, y: &[f64; 4], position: &Vec3, s: f64) -> Option<StopReason> {
        self.values(chart, y, position, s)
            .into_iter()
            .find(|(_, g)| !(*g > 0.0))
            .map(|(r, _)| r)
    }
}

fn advance(space: &dyn PhaseSpace, chart: usize, prev: &Sample, step: &DenseStep<4>, theta: f64) -> Sample {
    let y = step.at_fraction(theta);
    let position = space.embed(chart, &split(&y).0);
    let (x0, p0) = split(&prev.y);
    let (x1, p1) = split(&y);
    Sample {
        theta,
        y,
        position,
        s: prev.s + (position - prev.position).norm(),
        action: prev.action + 0.5 * (p0 + p1).dot(&(x1 - x0)),
    }
}

/// Integrates Hamilton's equations from `seed` until a stop condition fires.
///
/// The action is accumulated as `int p . dx` with the trapezoidal rule on
/// `config.substeps` dense-output samples per step; events are located by
/// bisection on the dense output to `1e-10` in time.
pub fn shoot(space: &dyn PhaseSpace, seed: &Seed, target: Option<Vec3>, config: &ShootingConfig) -> Result<Trajectory> {
    config.validate()?;
    let mut chart = seed.chart;
    space.chart(chart).check_domain(&seed.x)?;
    let seed_residual = relative_energy(space.chart(chart), &seed.x, &seed.p);
    if !(seed_residual <= config.energy_tol) {
        return Err(Error::TrajectoryRejected { t: 0.0, residual: seed_residual, limit: config.energy_tol });
    }

    let stops = Stops {
        space,
        target,
        config,
        separatrix_tol: space.separatrix_tolerance(config.separatrix_tol),
        max_arc_length: config.max_arc_length.unwrap_or_else(|| space.default_max_arc_length()),
    };
    let mut y = pack(&seed.x, &seed.p);
    let mut t = 0.0;
    let first = make_point(space, chart, t, 0.0, seed.action, &y);
    let mut diagnostics = ShotDiagnostics::default();
    track(&mut diagnostics, &first);
    let mut closest = target.map(|c| (first.position - c).norm());
    let mut points = vec![first];
    let mut current = Sample { theta: 0.0, y, position: first.position, s: 0.0, action: seed.action };

    let finish = |points: Vec<TrajectoryPoint>, stop, closest, diagnostics| Trajectory {
        seed: *seed,
        points,
        stop,
        closest_approach: closest,
        diagnostics,
    };

    if let Some(reason) = stops.first_triggered(chart, &y, &current.position, 0.0) {
        return Ok(finish(points, reason, closest, diagnostics));
    }

    let tol = config.tolerances();
    let mut carried_h: Option<f64> = None;
    loop {
        let model = space.chart(chart);
        let rhs = |_t: f64, y: &[f64; 4]| {
            let (x, p) = split(y);
            let r = flow_rhs_unchecked(model, &x, &p);
            [r.x_dot[0], r.x_dot[1], r.p_dot[0], r.p_dot[1]]
        };
        let mut stepper = Dopri5::new(rhs, t, y, tol);
        if let Some(h) = carried_h {
            stepper.set_step_size(h);
        }
        loop {
            if diagnostics.accepted_steps >= config.max_steps {
                return Ok(finish(points, StopReason::MaxSteps, closest, diagnostics));
            }
            stepper.limit_next_step(config.max_time - t);
            let rejected_before = stepper.rejected;
            let step = stepper.step()?;
            diagnostics.accepted_steps += 1;
            diagnostics.rejected_steps += stepper.rejected - rejected_before;

            let n = config.substeps;
            let mut prev = Sample { theta: 0.0, ..current };
            for j in 1..=n {
                let theta = j as f64 / n as f64;
                let next = if j == n {
                    let mut s = advance(space, chart, &prev, &step, 1.0);
                    s.y = step.y1;
                    s.position = space.embed(chart, &split(&step.y1).0);
                    s
                } else {
                    advance(space, chart, &prev, &step, theta)
                };
                if let (Some(c), Some(best)) = (target, closest.as_mut()) {
                    *best = best.min((next.position - c).norm());
                }
                if let Some(reason) = stops.first_triggered(chart, &next.y, &next.position, next.s) {
                    // earliest event inside (prev.theta, theta]
                    let theta_tol = EVENT_TIME_TOL / step.h.max(f64::MIN_POSITIVE);
                    let mut best: Option<(f64, StopReason)> = None;
                    for (k, (r, g)) in stops.values(chart, &next.y, &next.position, next.s).into_iter().enumerate() {
                        if g > 0.0 {
                            continue;
                        }
                        let event = |th: f64| {
                            let s = advance(space, chart, &prev, &step, th);
                            stops.values(chart, &s.y, &s.position, s.s)[k].1
                        };
                        let th = if event(prev.theta) > 0.0 {
                            bisect_event(event, prev.theta, theta, theta_tol)
                        } else {
                            prev.theta
                        };
                        if best.is_none_or(|(b, _)| th < b) {
                            best = Some((th, r));
                        }
                    }
                    let (th, r) = best.unwrap_or((theta, reason));
                    let hit = advance(space, chart, &prev, &step, th);
                    let point = make_point(space, chart, step.t0 + th * step.h, hit.s, hit.action, &hit.y);
                    if let (Some(c), Some(best)) = (target, closest.as_mut()) {
                        *best = best.min((point.position - c).norm());
                    }
                    track(&mut diagnostics, &point);
                    points.push(point);
                    return Ok(finish(points, r, closest, diagnostics));
                }
                prev = next;
            }

            t = step.t1();
            y = step.y1;
            current = Sample { theta: 0.0, ..prev };
            let point = make_point(space, chart, t, current.s, current.action, &y);
            let residual = point.energy_residual();
            if !(residual <= config.energy_tol) {
                return Err(Error::TrajectoryRejected { t, residual, limit: config.energy_tol });
            }
            track(&mut diagnostics, &point);
            points.push(point);
            if t >= config.max_time {
                return Ok(finish(points, StopReason::MaxTime, closest, diagnostics));
            }

            let (x, mut p) = split(&y);
            let mut restart = false;
            if config.project_energy {
                p = super::linearize::project_to_zero_energy(space.chart(chart), &x, &p)?;
                restart = true;
            }
            let next_chart = space.preferred_chart(chart, &x);
            let (x, p) = if next_chart != chart {
                diagnostics.chart_switches += 1;
                let moved = space.transfer(chart, next_chart, &x, &p);
                chart = next_chart;
                restart = true;
                moved
            } else {
                (x, p)
            };
            if restart {
                y = pack(&x, &p);
                current.y = y;
                carried_h = Some(stepper.step_size());
                break;
            }
        }
    }
}

fn track(d: &mut ShotDiagnostics, point: &TrajectoryPoint) {
    d.max_energy_residual = d.max_energy_residual.max(point.energy_residual());
    d.max_speed_deviation = d.max_speed_deviation.max((point.speed_sq - point.drift_norm_sq).abs());
    d.peak_drift_norm_sq = d.peak_drift_norm_sq.max(point.drift_norm_sq);
}
