//! Zero-energy shooting of instantons out of a stable fixed point, caustic
//! detection through trajectory crossings, and the uniaxial closed-form oracle.

mod crossing;
mod fan;
mod invariants;
mod linearize;
mod oracle;
mod shoot;
mod space;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fw::Vec2;
use crate::integrate::Tolerances;
use crate::models::Vec3;

pub use crossing::{detect_crossings, Crossing, CrossingOptions, CrossingReport};
pub use fan::{fan_shoot, optimal_escape, EscapeProblem, Fan, OptimalEscape, ScanSample};
pub use invariants::{check_invariants, InvariantReport};
pub use linearize::{
    eigenvector_fan, fan_direction, gamma_fan, instanton_seed, linearize_fixed_point, project_to_zero_energy,
    relative_energy, Eigenpair, Linearization, Seed,
};
pub use oracle::{analytic_phi_of_theta, analytic_uniaxial_action, compare_to_oracle, OracleDeviation};
pub use shoot::shoot;
pub use space::{Bounds, HalfPlane, PhaseSpace, PlanarSpace, SphereSpace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SeedMode {
    #[default]
    EigenvectorFan,
    GammaFan,
}

/// Numerical and stopping parameters of a shooting run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShootingConfig {
    pub seed_mode: SeedMode,
    pub fan_size: usize,
    pub seed_radius: f64,
    /// Half-width of the skipped band around the relaxation angle (gamma fan only).
    pub gamma_skip: f64,
    pub rtol: f64,
    pub atol: f64,
    pub min_step: f64,
    pub max_step: f64,
    pub max_time: f64,
    /// Arc-length cap in the embedding; unset uses the phase space default.
    pub max_arc_length: Option<f64>,
    pub max_steps: usize,
    /// Capture radius around the target point.
    pub target_tol: f64,
    /// Stop once the macrospin basin margin drops to this value; planar basins stop on
    /// the boundary itself.
    pub separatrix_tol: f64,
    /// Stop once `|f|_G` drops below this value (relaxation onto a fixed point).
    pub fixed_point_tol: f64,
    /// Reject when `|H| > energy_tol * max(1, |f|^2_G)`.
    pub energy_tol: f64,
    /// Re-project onto `H = 0` after every accepted step.
    pub project_energy: bool,
    /// Dense-output samples per step used for the action quadrature and event scan.
    pub substeps: usize,
    /// Directions scanned when searching for trajectories that reach the target.
    pub search_samples: usize,
}

impl Default for ShootingConfig {
    fn default() -> Self {
        Self {
            seed_mode: SeedMode::EigenvectorFan,
            fan_size: 16,
            seed_radius: 1e-3,
            gamma_skip: 0.1,
            rtol: 1e-10,
            atol: 1e-12,
            min_step: 1e-14,
            max_step: f64::INFINITY,
            max_time: 1e5,
            max_arc_length: None,
            max_steps: 10_000_000,
            target_tol: 1e-4,
            separatrix_tol: 1e-4,
            fixed_point_tol: 1e-12,
            energy_tol: 1e-8,
            project_energy: false,
            substeps: 8,
            search_samples: 256,
        }
    }
}

impl ShootingConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(what.to_string()));
        if self.fan_size < 1 {
            return bad("fan_size must be at least 1");
        }
        if !(self.seed_radius > 0.0 && self.seed_radius.is_finite()) {
            return bad("seed_radius must be positive");
        }
        for (name, tol) in [("rtol", self.rtol), ("atol", self.atol)] {
            if !(tol > 0.0 && tol < 1e-2) {
                return Err(Error::Config(format!("{name} must lie in (0, 1e-2)")));
            }
        }
        if !(self.min_step > 0.0) || !(self.max_step > self.min_step) {
            return bad("step bounds must satisfy 0 < min_step < max_step");
        }
        if !(self.max_time > 0.0) || self.max_arc_length.is_some_and(|s| !(s > 0.0)) || self.max_steps == 0 {
            return bad("stop limits must be positive");
        }
        if !(self.target_tol > 0.0) || !(self.separatrix_tol >= 0.0) || !(self.fixed_point_tol >= 0.0) {
            return bad("stop tolerances must be non-negative (target_tol positive)");
        }
        if !(self.energy_tol > 0.0) {
            return bad("energy_tol must be positive");
        }
        if self.substeps < 1 {
            return bad("substeps must be at least 1");
        }
        if self.search_samples < 4 {
            return bad("search_samples must be at least 4");
        }
        Ok(())
    }

    pub fn tolerances(&self) -> Tolerances {
        Tolerances { rtol: self.rtol, atol: self.atol, h_min: self.min_step, h_max: self.max_step }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// Within the capture radius of the target point.
    Reached,
    /// Basin boundary reached.
    Separatrix,
    LeftDomain,
    /// Relaxed onto a fixed point.
    FixedPoint,
    MaxTime,
    MaxArcLength,
    MaxSteps,
}

impl StopReason {
    pub fn label(&self) -> &'static str {
        match self {
            StopReason::Reached => "reached",
            StopReason::Separatrix => "separatrix",
            StopReason::LeftDomain => "left_domain",
            StopReason::FixedPoint => "fixed_point",
            StopReason::MaxTime => "max_time",
            StopReason::MaxArcLength => "max_arc_length",
            StopReason::MaxSteps => "max_steps",
        }
    }
}

/// State recorded at every accepted step (and at the seed and the stop event).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryPoint {
    pub t: f64,
    /// Arc length of the embedded path.
    pub s: f64,
    pub chart: u8,
    pub x: Vec2,
    pub p: Vec2,
    pub position: Vec3,
    /// Chart-independent covector of `p`.
    pub momentum: Vec3,
    pub action: f64,
    pub energy: f64,
    pub drift_norm_sq: f64,
    pub speed_sq: f64,
    pub psi: f64,
    /// Ellipse angle in the integration chart.
    pub gamma: f64,
}

impl TrajectoryPoint {
    /// `|H| / max(1, |f|^2_G)`
    pub fn energy_residual(&self) -> f64 {
        self.energy.abs() / self.drift_norm_sq.max(1.0)
    }

    /// `| |x_dot|^2_{G^-1} - |f|^2_G | / |f|^2_G`
    pub fn speed_mismatch(&self) -> f64 {
        (self.speed_sq - self.drift_norm_sq).abs() / self.drift_norm_sq
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ShotDiagnostics {
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub chart_switches: usize,
    pub max_energy_residual: f64,
    /// Largest `| |x_dot|^2_{G^-1} - |f|^2_G |` along the path.
    pub max_speed_deviation: f64,
    pub peak_drift_norm_sq: f64,
}

impl ShotDiagnostics {
    /// Speed identity violation relative to the peak `|f|^2_G` of the path.
    pub fn speed_mismatch(&self) -> f64 {
        if self.peak_drift_norm_sq > 0.0 {
            self.max_speed_deviation / self.peak_drift_norm_sq
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub seed: Seed,
    pub points: Vec<TrajectoryPoint>,
    pub stop: StopReason,
    /// Closest approach to the target, when one was set.
    pub closest_approach: Option<f64>,
    pub diagnostics: ShotDiagnostics,
}

impl Trajectory {
    pub fn index(&self) -> usize {
        self.seed.index
    }

    pub fn action(&self) -> f64 {
        self.points.last().map_or(0.0, |p| p.action)
    }

    pub fn last(&self) -> &TrajectoryPoint {
        self.points.last().expect("trajectories hold at least the seed")
    }

    pub fn max_abs_y(&self) -> f64 {
        self.points.iter().map(|p| p.position[1].abs()).fold(0.0, f64::max)
    }
}
