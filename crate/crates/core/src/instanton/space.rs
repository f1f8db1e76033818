//! Configuration spaces the shooter can integrate on: a single planar chart, or
//! the unit sphere covered by three rotated spherical charts.

use crate::fw::{DriftModel, Vec2};
use crate::models::{Macrospin, PolarAxis, SphericalChart, Vec3};

/// A configuration manifold covered by one or more charts, each carrying a drift
/// model. Positions and momenta are also embedded in R^3 so that distances,
/// crossings and stop conditions are chart independent.
pub trait PhaseSpace: Sync {
    fn chart_count(&self) -> usize {
        1
    }

    fn chart(&self, index: usize) -> &dyn DriftModel;

    fn embed(&self, chart: usize, x: &Vec2) -> Vec3;

    /// Ambient covector of a chart momentum.
    fn embed_momentum(&self, chart: usize, x: &Vec2, p: &Vec2) -> Vec3;

    /// Chart to continue in after an accepted step ending at `x`.
    fn preferred_chart(&self, chart: usize, _x: &Vec2) -> usize {
        chart
    }

    /// Re-expresses `(x, p)` from one chart in another.
    fn transfer(&self, _from: usize, _to: usize, x: &Vec2, p: &Vec2) -> (Vec2, Vec2) {
        (*x, *p)
    }

    /// Positive inside the basin of the stable state being escaped from.
    fn basin_margin(&self, position: &Vec3) -> f64;

    /// Positive inside the region where integration is allowed.
    fn domain_margin(&self, _position: &Vec3) -> f64 {
        f64::INFINITY
    }

    /// Whether `y -> -y` maps trajectories to trajectories in chart 0.
    fn mirror_symmetric(&self) -> bool {
        false
    }

    /// Margin at which the separatrix stop fires, given the configured tolerance.
    fn separatrix_tolerance(&self, configured: f64) -> f64 {
        configured
    }

    fn default_max_arc_length(&self) -> f64 {
        50.0
    }

    fn is_sphere(&self) -> bool {
        false
    }
}

/// Half-plane `normal . x > offset`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfPlane {
    pub normal: Vec2,
    pub offset: f64,
}

impl HalfPlane {
    pub fn margin(&self, x: &Vec2) -> f64 {
        self.normal.dot(x) - self.offset
    }
}

/// Axis-aligned box `[x_min, x_max] x [y_min, y_max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Bounds {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Self {
        Self { x_min, x_max, y_min, y_max }
    }

    pub fn margin(&self, x: &Vec2) -> f64 {
        (x[0] - self.x_min).min(self.x_max - x[0]).min(x[1] - self.y_min).min(self.y_max - x[1])
    }

    pub fn contains(&self, x: &Vec2) -> bool {
        self.margin(x) >= 0.0
    }
}

/// A planar model integrated in a single Cartesian chart.
#[derive(Debug, Clone)]
pub struct PlanarSpace<M> {
    pub model: M,
    pub basin: HalfPlane,
    pub bounds: Option<Bounds>,
    pub mirror: bool,
}

impl<M: DriftModel> PlanarSpace<M> {
    pub fn new(model: M, basin: HalfPlane) -> Self {
        Self { model, basin, bounds: None, mirror: false }
    }

    pub fn with_bounds(mut self, bounds: Bounds) -> Self {
        self.bounds = Some(bounds);
        self
    }

    pub fn with_mirror_symmetry(mut self) -> Self {
        self.mirror = true;
        self
    }
}

fn flat(v: &Vec2) -> Vec3 {
    Vec3::new(v[0], v[1], 0.0)
}

impl<M: DriftModel> PhaseSpace for PlanarSpace<M> {
    fn chart(&self, _index: usize) -> &dyn DriftModel {
        &self.model
    }

    fn embed(&self, _chart: usize, x: &Vec2) -> Vec3 {
        flat(x)
    }

    fn embed_momentum(&self, _chart: usize, _x: &Vec2, p: &Vec2) -> Vec3 {
        flat(p)
    }

    fn basin_margin(&self, position: &Vec3) -> f64 {
        self.basin.margin(&position.xy())
    }

    fn domain_margin(&self, position: &Vec3) -> f64 {
        self.bounds.map_or(f64::INFINITY, |b| b.margin(&position.xy()))
    }

    fn mirror_symmetric(&self) -> bool {
        self.mirror
    }

    fn separatrix_tolerance(&self, _configured: f64) -> f64 {
        0.0
    }
}

/// The macrospin on the unit sphere with an atlas of three spherical charts whose
/// polar axes are the lab x, y and z axes (chart index = axis index).
#[derive(Debug, Clone)]
pub struct SphereSpace {
    pub model: Macrospin,
    charts: [SphericalChart; 3],
    /// Switch charts once `sin(theta)` drops below this value.
    pub switch_below: f64,
}

impl SphereSpace {
    pub fn new(model: Macrospin) -> Self {
        Self {
            model,
            charts: PolarAxis::ALL.map(|a| model.chart(a)),
            switch_below: 0.5,
        }
    }

    pub fn spherical_chart(&self, index: usize) -> &SphericalChart {
        &self.charts[index]
    }

    /// Chart whose polar axis is most nearly orthogonal to `m`.
    pub fn best_chart(&self, m: &Vec3) -> usize {
        (0..3)
            .min_by(|&a, &b| m[a].abs().total_cmp(&m[b].abs()))
            .unwrap_or(2)
    }

    pub fn locate(&self, chart: usize, m: &Vec3) -> Vec2 {
        self.charts[chart].locate(m)
    }
}

impl PhaseSpace for SphereSpace {
    fn chart_count(&self) -> usize {
        3
    }

    fn chart(&self, index: usize) -> &dyn DriftModel {
        &self.charts[index]
    }

    fn embed(&self, chart: usize, x: &Vec2) -> Vec3 {
        self.charts[chart].embed(x)
    }

    fn embed_momentum(&self, chart: usize, x: &Vec2, p: &Vec2) -> Vec3 {
        self.charts[chart].embed_momentum(x, p)
    }

    fn preferred_chart(&self, chart: usize, x: &Vec2) -> usize {
        if x[0].sin() >= self.switch_below {
            chart
        } else {
            self.best_chart(&self.charts[chart].embed(x))
        }
    }

    fn transfer(&self, from: usize, to: usize, x: &Vec2, p: &Vec2) -> (Vec2, Vec2) {
        if from == to {
            return (*x, *p);
        }
        let m = self.charts[from].embed(x);
        let big = self.charts[from].embed_momentum(x, p);
        let y = self.charts[to].locate(&m);
        (y, self.charts[to].chart_momentum(&y, &big))
    }

    fn basin_margin(&self, position: &Vec3) -> f64 {
        self.model.basin_margin(position)
    }

    /// Instantons spiral out over many precession turns at small damping.
    fn default_max_arc_length(&self) -> f64 {
        1e4
    }

    fn is_sphere(&self) -> bool {
        true
    }
}
