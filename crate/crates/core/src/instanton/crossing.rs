//! Crossings between fan members with distinct momenta: the numerical signature
//! of a caustic.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::models::Vec3;

use super::{StopReason, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub first: usize,
    pub second: usize,
    pub point: [f64; 3],
    pub momentum_mismatch: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossingReport {
    pub crossings: Vec<Crossing>,
    pub match_tol: f64,
    pub momentum_tol: f64,
}

impl CrossingReport {
    pub fn is_empty(&self) -> bool {
        self.crossings.is_empty()
    }

    pub fn len(&self) -> usize {
        self.crossings.len()
    }
}

/// Settings of the crossing scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CrossingOptions {
    /// Planar: segments must intersect exactly; sphere: embedded segments must pass
    /// within this distance.
    pub match_tol: f64,
    /// Minimum momentum difference; `None` means `1e-2 * max |f|_G` over the fan
    /// members that escaped (all members if none did).
    pub momentum_tol: Option<f64>,
    /// Segments closer than this to their trajectory's seed are ignored.
    pub seed_exclusion: f64,
    /// Use the embedded proximity test instead of planar intersection.
    pub spherical: bool,
    pub include_self: bool,
}

impl Default for CrossingOptions {
    fn default() -> Self {
        Self { match_tol: 1e-3, momentum_tol: None, seed_exclusion: 0.05, spherical: false, include_self: true }
    }
}

#[derive(Clone, Copy)]
struct Segment {
    traj: usize,
    index: usize,
    a: Vec3,
    b: Vec3,
    pa: Vec3,
    pb: Vec3,
}

/// Parameters `(s, u)` of the intersection of two planar segments, if any.
fn planar_intersection(a: &Segment, b: &Segment) -> Option<(f64, f64)> {
    let r = (a.b - a.a).xy();
    let q = (b.b - b.a).xy();
    let w = (b.a - a.a).xy();
    let denom = r[0] * q[1] - r[1] * q[0];
    let scale = r.norm() * q.norm();
    if denom.abs() <= 1e-14 * scale {
        // parallel: only collinear overlaps count
        let cross = w[0] * r[1] - w[1] * r[0];
        if cross.abs() > 1e-14 * scale.max(1e-300) || r.norm() == 0.0 {
            return None;
        }
        let rr = r.norm_squared();
        let t0 = w.dot(&r) / rr;
        let t1 = t0 + q.dot(&r) / rr;
        let (lo, hi) = (t0.min(t1).max(0.0), t0.max(t1).min(1.0));
        if lo > hi {
            return None;
        }
        let s = 0.5 * (lo + hi);
        let pt = a.a.xy() + s * r;
        let u = if q.norm() > 0.0 { ((pt - b.a.xy()).dot(&q) / q.norm_squared()).clamp(0.0, 1.0) } else { 0.0 };
        return Some((s, u));
    }
    let s = (w[0] * q[1] - w[1] * q[0]) / denom;
    let u = (w[0] * r[1] - w[1] * r[0]) / denom;
    if (0.0..=1.0).contains(&s) && (0.0..=1.0).contains(&u) {
        Some((s, u))
    } else {
        None
    }
}

/// Closest points of two 3D segments and their distance.
fn closest_points(a: &Segment, b: &Segment) -> (f64, f64, f64) {
    let d1 = a.b - a.a;
    let d2 = b.b - b.a;
    let r = a.a - b.a;
    let (aa, ee, f) = (d1.norm_squared(), d2.norm_squared(), d2.dot(&r));
    let (mut s, mut t);
    if aa <= f64::MIN_POSITIVE && ee <= f64::MIN_POSITIVE {
        return (0.0, 0.0, r.norm());
    }
    if aa <= f64::MIN_POSITIVE {
        s = 0.0;
        t = (f / ee).clamp(0.0, 1.0);
    } else {
        let c = d1.dot(&r);
        if ee <= f64::MIN_POSITIVE {
            t = 0.0;
            s = (-c / aa).clamp(0.0, 1.0);
        } else {
            let bb = d1.dot(&d2);
            let denom = aa * ee - bb * bb;
            s = if denom > 0.0 { ((bb * f - c * ee) / denom).clamp(0.0, 1.0) } else { 0.0 };
            t = (bb * s + f) / ee;
            if t < 0.0 {
                t = 0.0;
                s = (-c / aa).clamp(0.0, 1.0);
            } else if t > 1.0 {
                t = 1.0;
                s = ((bb - c) / aa).clamp(0.0, 1.0);
            }
        }
    }
    let dist = ((a.a + s * d1) - (b.a + t * d2)).norm();
    (s, t, dist)
}

fn cell_key(v: &Vec3, cell: f64) -> (i64, i64, i64) {
    ((v[0] / cell).floor() as i64, (v[1] / cell).floor() as i64, (v[2] / cell).floor() as i64)
}

/// Reports crossings between (and within) trajectories whose momenta differ by at
/// least the momentum tolerance.
///
/// Segments are bucketed in a uniform grid; buckets whose momenta all lie within a
/// box smaller than the momentum tolerance cannot contain a qualifying pair and
/// are skipped.
pub fn detect_crossings(trajectories: &[Trajectory], options: &CrossingOptions) -> CrossingReport {
    // scale from escaping members; those leaving the domain can see far larger drifts
    let escaping = |t: &&Trajectory| matches!(t.stop, StopReason::Reached | StopReason::Separatrix);
    let peak = |ts: &mut dyn Iterator<Item = &Trajectory>| {
        ts.flat_map(|t| t.points.iter()).map(|p| p.drift_norm_sq.sqrt()).fold(0.0, f64::max)
    };
    let max_f = if trajectories.iter().any(|t| escaping(&t)) {
        peak(&mut trajectories.iter().filter(escaping))
    } else {
        peak(&mut trajectories.iter())
    };
    let momentum_tol = options.momentum_tol.unwrap_or(1e-2 * max_f);
    let match_tol = options.match_tol;
    let mut report = CrossingReport { crossings: Vec::new(), match_tol, momentum_tol };

    let mut segments = Vec::new();
    for (ti, traj) in trajectories.iter().enumerate() {
        let Some(origin) = traj.points.first().map(|p| p.position) else { continue };
        for (k, w) in traj.points.windows(2).enumerate() {
            let (a, b) = (w[0].position, w[1].position);
            if (a - origin).norm() < options.seed_exclusion || (b - origin).norm() < options.seed_exclusion {
                continue;
            }
            segments.push(Segment { traj: ti, index: k, a, b, pa: w[0].momentum, pb: w[1].momentum });
        }
    }
    if segments.is_empty() {
        return report;
    }

    let mut lengths: Vec<f64> = segments.iter().map(|s| (s.b - s.a).norm()).collect();
    lengths.sort_by(f64::total_cmp);
    let pad = if options.spherical { match_tol } else { 0.0 };
    let cell = lengths[lengths.len() / 2].max(match_tol).max(1e-12);

    let mut grid: HashMap<(i64, i64, i64), Vec<usize>> = HashMap::new();
    for (i, s) in segments.iter().enumerate() {
        let lo = s.a.inf(&s.b).add_scalar(-pad);
        let hi = s.a.sup(&s.b).add_scalar(pad);
        let (l, h) = (cell_key(&lo, cell), cell_key(&hi, cell));
        for x in l.0..=h.0 {
            for y in l.1..=h.1 {
                for z in l.2..=h.2 {
                    grid.entry((x, y, z)).or_default().push(i);
                }
            }
        }
    }

    let mut keys: Vec<&(i64, i64, i64)> = grid.keys().collect();
    keys.sort();
    let mut seen: HashSet<(usize, usize)> = HashSet::new();
    let mut found: Vec<Crossing> = Vec::new();
    for key in keys {
        let members = &grid[key];
        if members.len() < 2 {
            continue;
        }
        let mut plo = Vec3::repeat(f64::INFINITY);
        let mut phi = Vec3::repeat(f64::NEG_INFINITY);
        for &i in members {
            let s = &segments[i];
            plo = plo.inf(&s.pa).inf(&s.pb);
            phi = phi.sup(&s.pa).sup(&s.pb);
        }
        if (phi - plo).norm() < momentum_tol {
            continue;
        }
        for (ai, &i) in members.iter().enumerate() {
            for &j in &members[ai + 1..] {
                let (sa, sb) = (&segments[i], &segments[j]);
                if sa.traj == sb.traj {
                    if !options.include_self || sa.index.abs_diff(sb.index) <= 1 {
                        continue;
                    }
                }
                let pair = (i.min(j), i.max(j));
                if !seen.insert(pair) {
                    continue;
                }
                let hit = if options.spherical {
                    let (s, u, d) = closest_points(sa, sb);
                    (d <= match_tol).then_some((s, u))
                } else {
                    planar_intersection(sa, sb)
                };
                let Some((s, u)) = hit else { continue };
                let pa = sa.pa + s * (sa.pb - sa.pa);
                let pb = sb.pa + u * (sb.pb - sb.pa);
                let mismatch = (pa - pb).norm();
                if mismatch < momentum_tol {
                    continue;
                }
                let point = 0.5 * ((sa.a + s * (sa.b - sa.a)) + (sb.a + u * (sb.b - sb.a)));
                let (first, second) = if sa.traj <= sb.traj { (sa, sb) } else { (sb, sa) };
                found.push(Crossing {
                    first: trajectories[first.traj].index(),
                    second: trajectories[second.traj].index(),
                    point: [point[0], point[1], point[2]],
                    momentum_mismatch: mismatch,
                });
            }
        }
    }

    // one report per trajectory pair and location
    found.sort_by(|a, b| (a.first, a.second).cmp(&(b.first, b.second)).then(a.point[0].total_cmp(&b.point[0])));
    for c in found {
        let dup = report.crossings.iter().any(|r| {
            r.first == c.first
                && r.second == c.second
                && (Vec3::from(r.point) - Vec3::from(c.point)).norm() <= match_tol.max(1e-12)
        });
        if !dup {
            report.crossings.push(c);
        }
    }
    report
}
