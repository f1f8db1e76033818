//! Freidlin-Wentzell optimal escape paths for two-dimensional noisy systems.
//!
//! The crate shoots zero-energy Hamiltonian trajectories out of a stable fixed
//! point, detects caustics where they cross, maps the drift norm `|f|^2_G`,
//! and checks the results against stochastic simulation.

pub mod bounds;
pub mod error;
pub mod fw;
pub mod instanton;
pub mod integrate;
pub mod langevin;
pub mod models;
pub mod norm;
pub mod stats;

pub use error::{Error, Result};
pub use fw::{
    accumulate_action, circle_loop, flow_rhs, gamma_of_velocity, hamiltonian, lagrangian, loop_decomposition,
    lorentz_rates, momentum_on_ellipse, psi_angle, DriftModel, DriftPair, LoopDecomposition, Mat2, MetricTensor, MomentumEllipse,
    PhasePoint, Vec2,
};
pub use models::{DoubleWell, Macrospin, MaierStein, PolarAxis, Region, SphericalChart, Vec3};
pub use instanton::{
    detect_crossings, fan_shoot, optimal_escape, shoot, CrossingOptions, CrossingReport, EscapeProblem, Fan,
    OptimalEscape, PhaseSpace, PlanarSpace, SeedMode, ShootingConfig, SphereSpace, StopReason, Trajectory,
    TrajectoryPoint,
};
pub use norm::{
    analyze_landscape, bifurcation_scan, find_and_classify_extrema, macrospin_norm_grid, norm_grid, BifurcationReport,
    Extremum, ExtremumKind, GridSpec, NormLandscape, NormTerms,
};
pub use bounds::{admissibility_band, nongradient_max, precessional_min, q_omega, AdmissibilityBand, Regime};
pub use langevin::{sample_stationary, simulate_escapes, EscapeEvent, Probe, SimConfig, SimResult, StationaryEnergyLaw, StochasticModel};
