use crate::error::{ensure_finite, Error, Result};
use crate::fw::{DriftModel, Mat2, Vec2};

/// `F = (x - x^3 - alpha x y^2, -(1 + x^2) y)` with isotropic noise.
///
/// Stable points at `(+-1, 0)`, saddle at the origin; gradient only for `alpha = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaierStein {
    pub alpha: f64,
}

impl MaierStein {
    pub const STABLE: Vec2 = Vec2::new(1.0, 0.0);
    pub const SADDLE: Vec2 = Vec2::new(0.0, 0.0);

    pub fn new(alpha: f64) -> Result<Self> {
        if alpha.is_finite() && alpha > 0.0 {
            Ok(Self { alpha })
        } else {
            Err(Error::Domain(format!("alpha must be positive and finite, got {alpha}")))
        }
    }

    /// Scalar curl `dF_y/dx - dF_x/dy = 2 (alpha - 1) x y`.
    pub fn curl(&self, x: &Vec2) -> f64 {
        2.0 * (self.alpha - 1.0) * x[0] * x[1]
    }
}

impl DriftModel for MaierStein {
    fn drift(&self, p: &Vec2) -> Vec2 {
        let (x, y) = (p[0], p[1]);
        Vec2::new(x - x * x * x - self.alpha * x * y * y, -(1.0 + x * x) * y)
    }

    fn jacobian(&self, p: &Vec2) -> Mat2 {
        let (x, y) = (p[0], p[1]);
        Mat2::new(
            1.0 - 3.0 * x * x - self.alpha * y * y,
            -2.0 * self.alpha * x * y,
            -2.0 * x * y,
            -(1.0 + x * x),
        )
    }
}

pub fn maier_stein_drift(x: &Vec2, alpha: f64) -> Result<Vec2> {
    ensure_finite(x.as_slice(), "position")?;
    Ok(MaierStein::new(alpha)?.drift(x))
}
