use crate::error::{ensure_finite, Result};
use crate::fw::{DriftModel, DriftPair, Mat2, Vec2};

/// Gradient system `F = -grad U` with `U = (x^2 - 1)^2 / 4 + y^2 / 2`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DoubleWell;

impl DoubleWell {
    pub const STABLE: Vec2 = Vec2::new(1.0, 0.0);
    pub const SADDLE: Vec2 = Vec2::new(0.0, 0.0);

    pub fn potential(&self, p: &Vec2) -> f64 {
        let (x, y) = (p[0], p[1]);
        0.25 * (x * x - 1.0).powi(2) + 0.5 * y * y
    }
}

impl DriftModel for DoubleWell {
    fn drift(&self, p: &Vec2) -> Vec2 {
        let (x, y) = (p[0], p[1]);
        Vec2::new(x - x * x * x, -y)
    }

    fn jacobian(&self, p: &Vec2) -> Mat2 {
        Mat2::new(1.0 - 3.0 * p[0] * p[0], 0.0, 0.0, -1.0)
    }
}

/// Drift pair and potential value of the double well.
pub fn gradient_double_well(x: &Vec2) -> Result<(DriftPair, f64)> {
    ensure_finite(x.as_slice(), "position")?;
    Ok((DoubleWell.drift_pair(x), DoubleWell.potential(x)))
}
