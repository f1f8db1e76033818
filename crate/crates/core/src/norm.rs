//! Landscapes of the drift norm `N = |f|^2_G`, their stationary points and the
//! parameter values at which those change type.

use nalgebra::SymmetricEigen;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::fw::{DriftModel, Mat2, Vec2};
use crate::models::{Macrospin, PolarAxis, Vec3};

/// Step of the finite difference taken on the analytic gradient.
pub const HESSIAN_STEP: f64 = 1e-5;
/// Hessian eigenvalues below this magnitude are flagged as degenerate.
pub const DEGENERATE_EIGENVALUE: f64 = 1e-8;
/// Newton polishing target for `|grad N|`.
pub const STATIONARY_TOL: f64 = 1e-8;

/// Uniform node grid over a rectangle of chart coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub nx: usize,
    pub ny: usize,
}

impl GridSpec {
    pub fn new(x_range: (f64, f64), y_range: (f64, f64), nx: usize, ny: usize) -> Result<Self> {
        let spec = Self { x_min: x_range.0, x_max: x_range.1, y_min: y_range.0, y_max: y_range.1, nx, ny };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        ensure_finite(&[self.x_min, self.x_max, self.y_min, self.y_max], "grid bounds")?;
        if !(self.x_min < self.x_max && self.y_min < self.y_max) {
            return Err(Error::EmptyRange("grid bounds must be increasing".into()));
        }
        if self.nx < 3 || self.ny < 3 {
            return Err(Error::Config(format!("grid needs at least 3x3 nodes, got {}x{}", self.nx, self.ny)));
        }
        Ok(())
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.nx - 1) as f64
    }

    pub fn dy(&self) -> f64 {
        (self.y_max - self.y_min) / (self.ny - 1) as f64
    }

    pub fn node(&self, i: usize, j: usize) -> Vec2 {
        Vec2::new(self.x_min + i as f64 * self.dx(), self.y_min + j as f64 * self.dy())
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Macrospin drift-norm decomposition at one node:
/// `|A|^2 = |m x h|^2 + 2 alpha I n . (m x h) + O(alpha^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormTerms {
    pub precessional: f64,
    pub nongradient: f64,
    /// `|A|^2` minus the two leading terms.
    pub remainder: f64,
}

impl NormTerms {
    pub fn at(model: &Macrospin, m: &Vec3) -> Self {
        let mh = m.cross(&model.field(m));
        let precessional = mh.norm_squared();
        let nongradient = 2.0 * model.alpha * model.current * model.polarizer().dot(&mh);
        Self { precessional, nongradient, remainder: model.drift(m).norm_squared() - precessional - nongradient }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtremumKind {
    Min,
    Max,
    Saddle,
}

impl ExtremumKind {
    pub fn label(&self) -> &'static str {
        match self {
            ExtremumKind::Min => "min",
            ExtremumKind::Max => "max",
            ExtremumKind::Saddle => "saddle",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extremum {
    pub location: Vec2,
    pub value: f64,
    pub kind: ExtremumKind,
    /// Ascending eigenvalues of the Hessian of `N`.
    pub hessian_eigenvalues: [f64; 2],
    pub gradient_norm: f64,
    /// Newton polishing reached `|grad N| <= 1e-8`.
    pub refined: bool,
    /// Some Hessian eigenvalue is below `1e-8` in magnitude.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormLandscape {
    pub grid: GridSpec,
    /// Row-major values, index `j * nx + i`.
    pub values: Vec<f64>,
    /// Embedded node positions (sphere charts only).
    pub embedded: Option<Vec<Vec3>>,
    /// Decomposition terms per node (macrospin only).
    pub terms: Option<Vec<NormTerms>>,
    pub extrema: Vec<Extremum>,
}

impl NormLandscape {
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.grid.nx + i]
    }

    pub fn count(&self, kind: ExtremumKind) -> usize {
        self.extrema.iter().filter(|e| e.kind == kind).count()
    }
}

/// Evaluates `|f|^2_G` at every grid node. Every node must lie in the chart domain.
pub fn norm_grid(model: &dyn DriftModel, grid: &GridSpec) -> Result<NormLandscape> {
    grid.validate()?;
    let rows: Vec<Vec<f64>> = (0..grid.ny)
        .into_par_iter()
        .map(|j| {
            (0..grid.nx)
                .map(|i| {
                    let x = grid.node(i, j);
                    model.check_domain(&x)?;
                    Ok(model.drift_norm_sq(&x))
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    Ok(NormLandscape { grid: *grid, values: rows.concat(), embedded: None, terms: None, extrema: Vec::new() })
}

/// Macrospin landscape over `(theta, phi)` of the standard chart, with embedded
/// node positions and the decomposition terms.
pub fn macrospin_norm_grid(model: &Macrospin, grid: &GridSpec) -> Result<NormLandscape> {
    let chart = model.chart(PolarAxis::Z);
    let mut landscape = norm_grid(&chart, grid)?;
    let embedded: Vec<Vec3> = (0..grid.ny)
        .flat_map(|j| (0..grid.nx).map(move |i| (i, j)))
        .map(|(i, j)| chart.embed(&grid.node(i, j)))
        .collect();
    landscape.terms = Some(embedded.par_iter().map(|m| NormTerms::at(model, m)).collect());
    landscape.embedded = Some(embedded);
    Ok(landscape)
}

/// `grad N` from the drift Jacobian:
/// `d_k N = sum_i [2 F_i J_ik / G_i - F_i^2 d_k G_i / G_i^2]`.
pub fn norm_gradient(model: &dyn DriftModel, x: &Vec2) -> Vec2 {
    let f = model.drift(x);
    let j = model.jacobian(x);
    let g = model.metric(x).entries();
    let dg = model.metric_gradient(x);
    let mut grad = Vec2::zeros();
    for k in 0..2 {
        for i in 0..2 {
            grad[k] += 2.0 * f[i] * j[(i, k)] / g[i] - f[i] * f[i] * dg[(i, k)] / (g[i] * g[i]);
        }
    }
    grad
}

/// Symmetrised central difference of the analytic gradient.
pub fn norm_hessian(model: &dyn DriftModel, x: &Vec2) -> Mat2 {
    let mut h = Mat2::zeros();
    for k in 0..2 {
        let mut e = Vec2::zeros();
        e[k] = HESSIAN_STEP;
        let col = (norm_gradient(model, &(x + e)) - norm_gradient(model, &(x - e))) / (2.0 * HESSIAN_STEP);
        h.set_column(k, &col);
    }
    0.5 * (h + h.transpose())
}

fn eigenvalues(h: &Mat2) -> [f64; 2] {
    let e = SymmetricEigen::new(*h).eigenvalues;
    let (a, b) = (e[0], e[1]);
    [a.min(b), a.max(b)]
}

/// Classifies a stationary point of `N` by the Hessian eigen-signs.
pub fn classify_point(model: &dyn DriftModel, x: &Vec2, refined: bool) -> Extremum {
    let lambda = eigenvalues(&norm_hessian(model, x));
    let kind = if lambda[0] > 0.0 {
        ExtremumKind::Min
    } else if lambda[1] < 0.0 {
        ExtremumKind::Max
    } else {
        ExtremumKind::Saddle
    };
    Extremum {
        location: *x,
        value: model.drift_norm_sq(x),
        kind,
        hessian_eigenvalues: lambda,
        gradient_norm: norm_gradient(model, x).norm(),
        refined,
        degenerate: lambda[0].abs() < DEGENERATE_EIGENVALUE || lambda[1].abs() < DEGENERATE_EIGENVALUE,
    }
}

/// Newton iteration on `grad N = 0`, with steps capped at `max_step`.
/// Returns the last iterate and whether it met the stationarity target.
pub fn polish_stationary_point(model: &dyn DriftModel, start: &Vec2, max_step: f64) -> (Vec2, bool) {
    let mut x = *start;
    for _ in 0..100 {
        if model.check_domain(&x).is_err() {
            return (x, false);
        }
        let g = norm_gradient(model, &x);
        if g.norm() <= STATIONARY_TOL {
            return (x, true);
        }
        let Some(step) = norm_hessian(model, &x).lu().solve(&g) else {
            return (x, false);
        };
        let len = step.norm();
        if !len.is_finite() {
            return (x, false);
        }
        x -= if len > max_step { step * (max_step / len) } else { step };
    }
    let ok = model.check_domain(&x).is_ok() && norm_gradient(model, &x).norm() <= STATIONARY_TOL;
    (x, ok)
}

/// Locates the stationary points of `N` inside the grid.
///
/// A cell is a candidate when both gradient components change sign over its
/// corners. Candidates are polished by Newton iteration; converged points are
/// kept if they stay within one cell of their candidate, and candidates with a
/// strict sign change that fail to converge are reported unrefined.
pub fn find_and_classify_extrema(model: &dyn DriftModel, landscape: &NormLandscape) -> Vec<Extremum> {
    let grid = landscape.grid;
    let (dx, dy) = (grid.dx(), grid.dy());
    let gradients: Vec<Vec<Vec2>> = (0..grid.ny)
        .into_par_iter()
        .map(|j| (0..grid.nx).map(|i| norm_gradient(model, &grid.node(i, j))).collect())
        .collect();

    let mut candidates = Vec::new();
    for j in 0..grid.ny - 1 {
        for i in 0..grid.nx - 1 {
            let corners = [gradients[j][i], gradients[j][i + 1], gradients[j + 1][i], gradients[j + 1][i + 1]];
            let mut inclusive = true;
            let mut strict = true;
            for k in 0..2 {
                let lo = corners.iter().map(|g| g[k]).fold(f64::INFINITY, f64::min);
                let hi = corners.iter().map(|g| g[k]).fold(f64::NEG_INFINITY, f64::max);
                inclusive &= lo <= 0.0 && hi >= 0.0;
                strict &= lo < 0.0 && hi > 0.0;
            }
            if inclusive {
                let center = grid.node(i, j) + Vec2::new(0.5 * dx, 0.5 * dy);
                candidates.push((center, strict));
            }
        }
    }

    let polished: Vec<Option<Extremum>> = candidates
        .par_iter()
        .map(|(center, strict)| {
            let (x, ok) = polish_stationary_point(model, center, dx.max(dy));
            let near = (x[0] - center[0]).abs() <= 1.5 * dx && (x[1] - center[1]).abs() <= 1.5 * dy;
            if ok && near {
                Some(classify_point(model, &x, true))
            } else if *strict {
                Some(classify_point(model, center, false))
            } else {
                None
            }
        })
        .collect();

    let mut extrema: Vec<Extremum> = Vec::new();
    let merge = 1e-6 * (1.0 + dx.max(dy));
    for e in polished.into_iter().flatten() {
        let reach = if e.refined { merge } else { dx.max(dy) };
        if let Some(existing) = extrema.iter_mut().find(|o| (o.location - e.location).norm() <= reach) {
            if !existing.refined && e.refined {
                *existing = e;
            }
            continue;
        }
        extrema.push(e);
    }
    extrema.sort_by(|a, b| a.location[0].total_cmp(&b.location[0]).then(a.location[1].total_cmp(&b.location[1])));
    extrema
}

/// Landscape plus its classified extrema.
pub fn analyze_landscape(model: &dyn DriftModel, grid: &GridSpec) -> Result<NormLandscape> {
    let mut landscape = norm_grid(model, grid)?;
    landscape.extrema = find_and_classify_extrema(model, &landscape);
    Ok(landscape)
}

/// One parameter value of a bifurcation scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BifurcationStep {
    pub parameter: f64,
    /// The tracked stationary point at this parameter.
    pub tracked: Extremum,
    /// Extrema over the scan grid, when one was given.
    pub extrema: Vec<Extremum>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BifurcationReport {
    pub steps: Vec<BifurcationStep>,
    /// Grid interval in which the tracked point changes type.
    pub bracket: Option<(f64, f64)>,
    /// Parameter at which the larger Hessian eigenvalue of the tracked point
    /// changes sign, refined by bisection.
    pub threshold: Option<f64>,
}

impl BifurcationReport {
    pub fn found(&self) -> bool {
        self.threshold.is_some()
    }
}

/// Tracks the stationary point of `N` that starts at `start` across a monotone
/// parameter grid and locates where its larger Hessian eigenvalue changes sign
/// (a saddle turning into a maximum, or back).
pub fn bifurcation_scan<M, F>(
    family: F,
    start: Vec2,
    range: (f64, f64),
    steps: usize,
    grid: Option<&GridSpec>,
) -> Result<BifurcationReport>
where
    M: DriftModel,
    F: Fn(f64) -> Result<M> + Sync,
{
    ensure_finite(&[range.0, range.1], "parameter range")?;
    if !(range.0 < range.1) {
        return Err(Error::EmptyRange(format!("parameter range [{}, {}]", range.0, range.1)));
    }
    if steps < 2 {
        return Err(Error::Config("bifurcation scan needs at least 2 steps".into()));
    }
    let step_cap = grid.map_or(0.1, |g| g.dx().max(g.dy()));
    let track = |a: f64, from: &Vec2| -> Result<Extremum> {
        let model = family(a)?;
        let (x, ok) = polish_stationary_point(&model, from, step_cap);
        if !ok {
            return Err(Error::Domain(format!("lost the tracked stationary point at parameter {a}")));
        }
        Ok(classify_point(&model, &x, true))
    };

    let params: Vec<f64> = (0..steps)
        .map(|k| range.0 + (range.1 - range.0) * k as f64 / (steps - 1) as f64)
        .collect();
    let mut tracked = Vec::with_capacity(steps);
    let mut at = start;
    for &a in &params {
        let e = track(a, &at)?;
        at = e.location;
        tracked.push(e);
    }
    let extrema: Vec<Vec<Extremum>> = match grid {
        Some(g) => params
            .iter()
            .map(|&a| {
                let model = family(a)?;
                Ok(analyze_landscape(&model, g)?.extrema)
            })
            .collect::<Result<_>>()?,
        None => vec![Vec::new(); steps],
    };

    let sign = |e: &Extremum| e.hessian_eigenvalues[1] > 0.0;
    let mut bracket = None;
    let mut threshold = None;
    if let Some(k) = (1..steps).find(|&k| sign(&tracked[k]) != sign(&tracked[k - 1])) {
        let (mut lo, mut hi) = (params[k - 1], params[k]);
        bracket = Some((lo, hi));
        let lo_sign = sign(&tracked[k - 1]);
        let mut from = tracked[k - 1].location;
        while hi - lo > 1e-10 * (1.0 + lo.abs()) {
            let mid = 0.5 * (lo + hi);
            let e = track(mid, &from)?;
            if sign(&e) == lo_sign {
                lo = mid;
                from = e.location;
            } else {
                hi = mid;
            }
        }
        threshold = Some(0.5 * (lo + hi));
    }
    let steps = params
        .into_iter()
        .zip(tracked)
        .zip(extrema)
        .map(|((parameter, tracked), extrema)| BifurcationStep { parameter, tracked, extrema })
        .collect();
    Ok(BifurcationReport { steps, bracket, threshold })
}
