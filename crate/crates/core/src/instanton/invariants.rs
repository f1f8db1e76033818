use serde::{Deserialize, Serialize};

use crate::fw::lorentz_rates;

use super::space::PhaseSpace;
use super::Trajectory;

/// Step of the two-sided flow used to differentiate along a trajectory.
const LORENTZ_STEP: f64 = 1e-3;

/// Worst-case violations of the zero-energy invariants along one trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InvariantReport {
    /// `max |H| / max(1, |f|^2_G)`.
    pub energy: f64,
    /// `max | |x_dot|^2 - |f|^2 |` over the peak `|f|^2`.
    pub speed: f64,
    /// `max |d|x_dot|^2/dt - d|f|^2/dt|` over the peak `|d|f|^2/dt|`.
    pub lorentz: f64,
}

/// Checks energy, speed identity and the Lorentz rate identity at every
/// `stride`-th stored point.
pub fn check_invariants(space: &dyn PhaseSpace, trajectory: &Trajectory, stride: usize) -> InvariantReport {
    let stride = stride.max(1);
    let mut worst_gap: f64 = 0.0;
    let mut peak_rate: f64 = 0.0;
    for point in trajectory.points.iter().step_by(stride) {
        let model = space.chart(point.chart as usize);
        let (d_speed, d_norm) = lorentz_rates(model, &point.x, &point.p, LORENTZ_STEP);
        worst_gap = worst_gap.max((d_speed - d_norm).abs());
        peak_rate = peak_rate.max(d_norm.abs()).max(d_speed.abs());
    }
    InvariantReport {
        energy: trajectory.diagnostics.max_energy_residual,
        speed: trajectory.diagnostics.speed_mismatch(),
        lorentz: if peak_rate > 0.0 { worst_gap / peak_rate } else { worst_gap },
    }
}
